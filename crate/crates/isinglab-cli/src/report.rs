//! The `report` subcommand: merge per-run summaries into one scaling table.
//!
//! The one-arm fit fixes the magnetization exponent's driver and the
//! four-arm fit fixes the length exponent; every other exponent in the
//! table is derived from those two. Measured values found in any scaling
//! block of the inputs are carried along and compared against the derived
//! ones.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use isinglab::estimators::{scaling_report, ScalingQuantity, ValueWithError};

use crate::experiment::{scaling_entries, CliError};
use crate::output::Summary;

/// A merged scaling table rendered for the terminal.
#[derive(Debug)]
pub struct MergedReport {
    pub text: String,
}

fn quantity_of(name: &str) -> Option<ScalingQuantity> {
    match name {
        "delta" => Some(ScalingQuantity::Delta),
        "eta" => Some(ScalingQuantity::Eta),
        "beta" => Some(ScalingQuantity::Beta),
        "gamma" => Some(ScalingQuantity::Gamma),
        "gap" => Some(ScalingQuantity::Gap),
        _ => None,
    }
}

/// Read the given summaries and merge them into one scaling table.
///
/// Requires a `one-arm` fit and a `four-arm` fit somewhere among the
/// inputs; anything else found (measured exponents in scaling blocks,
/// cautionary notes) is folded in.
pub fn merged_report(paths: &[impl AsRef<Path>]) -> Result<MergedReport, CliError> {
    if paths.is_empty() {
        return Err(CliError::Inputs("no summary files given".to_string()));
    }
    let mut one_arm: Option<(f64, f64)> = None;
    let mut four_arm: Option<(f64, f64)> = None;
    let mut measured: Vec<(ScalingQuantity, ValueWithError)> = Vec::new();
    let mut notes: Vec<String> = Vec::new();
    for path in paths {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| {
            CliError::Inputs(format!("{}: {e}", path.display()))
        })?;
        let summary: Summary = serde_json::from_str(&text).map_err(|e| {
            CliError::Inputs(format!("{}: not a summary file: {e}", path.display()))
        })?;
        if let Some(fit) = summary.fits.get("one-arm") {
            one_arm = Some((fit.slope, fit.slope_stderr));
        }
        if let Some(fit) = summary.fits.get("four-arm") {
            four_arm = Some((fit.slope, fit.slope_stderr));
        }
        for (name, entry) in &summary.scaling {
            if let (Some(q), Some(value)) = (quantity_of(name), entry.measured) {
                measured.push((
                    q,
                    ValueWithError { value, stderr: entry.measured_stderr.unwrap_or(0.0) },
                ));
            }
        }
        notes.extend(summary.notes);
    }
    let (s1, s1_err) = one_arm.ok_or_else(|| {
        CliError::Inputs("no one-arm fit among the given summaries".to_string())
    })?;
    let (s4, s4_err) = four_arm.ok_or_else(|| {
        CliError::Inputs("no four-arm fit among the given summaries".to_string())
    })?;
    if s1 >= 0.0 {
        return Err(CliError::Inputs(format!(
            "one-arm slope {s1} is not negative; cannot invert to an exponent"
        )));
    }
    if s4 + 2.0 <= 0.0 {
        return Err(CliError::Inputs(format!(
            "four-arm slope {s4} is at or below -2; cannot invert to a length exponent"
        )));
    }
    // one-arm probability ~ n^(-1/r)  =>  r = -1/slope.
    let r = -1.0 / s1;
    let r_err = s1_err * r * r;
    // four-arm probability ~ n^(s4) with n^2 * prob(n) reaching 1/delta at
    // the characteristic length  =>  nu = 1/(2 + slope).
    let nu = 1.0 / (2.0 + s4);
    let nu_err = s4_err * nu * nu;
    let report = scaling_report(
        ValueWithError { value: r, stderr: r_err },
        ValueWithError { value: nu, stderr: nu_err },
        &measured,
    );
    let entries = scaling_entries(&report);

    let mut text = String::from("quantity      derived      stderr     measured     residual\n");
    for (name, entry) in &entries {
        let measured_text = entry
            .measured
            .map(|m| format!("{m:>12.5}"))
            .unwrap_or_else(|| format!("{:>12}", "-"));
        let residual_text = entry
            .residual
            .map(|r| format!("{r:>12.5}"))
            .unwrap_or_else(|| format!("{:>12}", "-"));
        let _ = writeln!(
            text,
            "{name:<12} {:>9.5} {:>11.5} {measured_text} {residual_text}",
            entry.derived, entry.derived_stderr
        );
    }
    for note in notes {
        let _ = writeln!(text, "note: {note}");
    }
    Ok(MergedReport { text })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::output::FitOut;
    use std::collections::BTreeMap;

    fn summary_with_fit(name: &str, slope: f64) -> Summary {
        let mut fits = BTreeMap::new();
        fits.insert(
            name.to_string(),
            FitOut { slope, slope_stderr: 0.01, intercept: 0.0, points: 5 },
        );
        Summary {
            kind: "arm-exponent".to_string(),
            config_sha256: "0".repeat(64),
            code_version: "0.0.0".to_string(),
            statuses: BTreeMap::new(),
            fits,
            scaling: BTreeMap::new(),
            notes: Vec::new(),
        }
    }

    #[test]
    fn reference_slopes_reproduce_the_reference_exponents() {
        let dir = std::env::temp_dir().join(format!("isinglab-report-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let one = dir.join("one.json");
        let four = dir.join("four.json");
        // Reference values: one-arm slope -5/48, four-arm slope -5/4.
        fs::write(&one, serde_json::to_string(&summary_with_fit("one-arm", -5.0 / 48.0)).unwrap())
            .unwrap();
        fs::write(&four, serde_json::to_string(&summary_with_fit("four-arm", -5.0 / 4.0)).unwrap())
            .unwrap();
        let report = merged_report(&[&one, &four]).unwrap();
        // r = 48/5 gives delta = 2r - 1 = 18.2 and eta = 2/r = 5/24.
        assert!(report.text.contains("delta"), "{}", report.text);
        assert!(report.text.contains("18.2"), "{}", report.text);
        let _ = fs::remove_dir_all(&dir);
    }

    #[test]
    fn missing_fits_are_reported_as_input_errors() {
        let dir = std::env::temp_dir().join(format!("isinglab-report2-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let one = dir.join("one.json");
        fs::write(&one, serde_json::to_string(&summary_with_fit("one-arm", -0.1)).unwrap())
            .unwrap();
        let err = merged_report(&[&one]).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("four-arm"));
        let empty: [&Path; 0] = [];
        let err = merged_report(&empty).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        let _ = fs::remove_dir_all(&dir);
    }
}
