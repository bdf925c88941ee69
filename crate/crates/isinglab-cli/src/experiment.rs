//! Config-driven experiment dispatch: builds events and regions, runs the
//! estimators, and persists CSV/JSON outputs.

use std::collections::BTreeMap;
use std::path::Path;

use isinglab::clusters::Color;
use isinglab::estimators::{
    correlation_length, estimate_prob, fit_exponent, l0_of_delta, scaling_report, Estimate,
    EstimatorError, LengthStatus, SamplingPlan, ScalingQuantity, ValueWithError,
};
use isinglab::events::{BoundaryArmKind, EventSpec, Orientation};
use isinglab::gibbs::{Boundary, GibbsError, Model, Region};
use isinglab::lattice::{Annulus, Coord, GeometryError, SiteSet, Square, ORIGIN};
use isinglab::oracle::OracleError;

use crate::config::{
    ConfigError, EventKind, ExperimentConfig, KindParams, PlanConfig,
};
use crate::output::{write_outputs, FitOut, OutputFiles, Row, ScalingEntry, Summary};
use crate::verify::{self, VerifyReport};

/// Anything that can stop a run.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Estimator(#[from] EstimatorError),
    #[error("{0}")]
    Model(#[from] GibbsError),
    #[error("{0}")]
    Geometry(#[from] GeometryError),
    #[error("{0}")]
    Oracle(#[from] OracleError),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("report input: {0}")]
    Inputs(String),
}

impl CliError {
    /// Process exit code: 2 for input problems, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Inputs(_) => 2,
            _ => 1,
        }
    }
}

/// What a completed run produced.
#[derive(Debug)]
pub enum RunOutcome {
    /// Output files were written; exit 0.
    Files(OutputFiles),
    /// A verification run; exit 0 when everything passed, 1 otherwise.
    Verified(VerifyReport),
}

fn to_plan(plan: &PlanConfig) -> SamplingPlan {
    SamplingPlan {
        n_samples: plan.samples,
        burn_in: plan.burn_in,
        thinning: plan.thinning,
        workers: plan.workers,
        seed: plan.seed,
    }
}

/// The event and sampling region realizing `kind` at size `n`.
fn event_at(kind: EventKind, n: Coord) -> Result<(EventSpec, Region), CliError> {
    let square = Square::centered(n)?.rect();
    let spec = match kind {
        EventKind::Crossing => EventSpec::Crossing {
            rect: square,
            orientation: Orientation::Horizontal,
            color: Color::Plus,
        },
        EventKind::OneArm => EventSpec::OneArm { radius: n, color: Color::Plus },
        EventKind::TwoArmBoundary => {
            EventSpec::HalfPlaneBoundary { radius: n, kind: BoundaryArmKind::TwoArm }
        }
        EventKind::ThreeArmBoundary => {
            EventSpec::HalfPlaneBoundary { radius: n, kind: BoundaryArmKind::ThreeArm }
        }
        EventKind::FourArm => EventSpec::FourArm { site: ORIGIN, radius: n },
        EventKind::Circuit => {
            let annulus = Annulus::new(n, 2 * n)?;
            let sites = SiteSet::from_sites(annulus.sites())?;
            return Ok((
                EventSpec::Circuit { annulus, color: Color::Plus },
                Region::Masked(sites),
            ));
        }
    };
    Ok((spec, Region::Window(square)))
}

fn estimate_rows(
    kind: EventKind,
    sizes: &[Coord],
    model: Model,
    plan: &SamplingPlan,
) -> Result<Vec<(Coord, Estimate)>, CliError> {
    sizes
        .iter()
        .map(|&n| {
            let (spec, region) = event_at(kind, n)?;
            let est = estimate_prob(&spec, model, &region, &Boundary::Free, plan)?;
            Ok((n, est))
        })
        .collect()
}

fn rows_from_estimates(name: &str, estimates: &[(Coord, Estimate)]) -> Vec<Row> {
    estimates
        .iter()
        .map(|&(n, est)| Row {
            quantity: name.to_string(),
            n: n as i64,
            mean: est.mean,
            stderr: est.stderr,
            n_samples: est.n_samples,
            seed: est.seed,
        })
        .collect()
}

/// Run a parsed config, writing outputs under its output directory (or
/// `override_dir` when given).
pub fn run_experiment(
    config: &ExperimentConfig,
    config_text: &str,
    override_dir: Option<&Path>,
) -> Result<RunOutcome, CliError> {
    let dir = override_dir.unwrap_or(&config.output_dir).to_path_buf();
    let mut summary = Summary::new(config.kind.name(), config_text);
    let mut rows: Vec<Row> = Vec::new();

    match &config.params {
        KindParams::Estimate { event, sizes } => {
            let model = config.model.expect("validated by parse");
            let plan = to_plan(config.plan.as_ref().expect("validated by parse"));
            let estimates = estimate_rows(*event, sizes, model, &plan)?;
            rows.extend(rows_from_estimates(event.name(), &estimates));
        }
        KindParams::ArmExponent { event, sizes } => {
            let model = config.model.expect("validated by parse");
            let plan = to_plan(config.plan.as_ref().expect("validated by parse"));
            let estimates = estimate_rows(*event, sizes, model, &plan)?;
            rows.extend(rows_from_estimates(event.name(), &estimates));
            for &(n, est) in &estimates {
                let hits = (est.mean * est.n_samples as f64).round() as u64;
                if hits < 50 {
                    summary.notes.push(format!(
                        "low statistics: {} at n={n} has only {hits} hits; \
                         treat the fit with caution",
                        event.name()
                    ));
                }
            }
            let points: Vec<(f64, Estimate)> =
                estimates.iter().map(|&(n, est)| (n as f64, est)).collect();
            match fit_exponent(&points) {
                Ok(fit) => {
                    summary.fits.insert(
                        event.name().to_string(),
                        FitOut {
                            slope: fit.slope,
                            slope_stderr: fit.slope_stderr,
                            intercept: fit.intercept,
                            points: fit.points,
                        },
                    );
                }
                Err(err) => {
                    summary
                        .statuses
                        .insert("fit".to_string(), format!("not fitted: {err}"));
                }
            }
        }
        KindParams::CorrLen { epsilon, n_max, side } => {
            let model = config.model.expect("validated by parse");
            let plan = to_plan(config.plan.as_ref().expect("validated by parse"));
            let result = correlation_length(model, *epsilon, *n_max, *side, &plan)?;
            rows.push(Row {
                quantity: "correlation-length".to_string(),
                n: result.length as i64,
                mean: result.length as f64,
                stderr: 0.0,
                n_samples: plan.n_samples,
                seed: plan.seed,
            });
            summary.statuses.insert(
                "correlation-length".to_string(),
                match result.status {
                    LengthStatus::Resolved => "resolved".to_string(),
                    LengthStatus::Unresolved => {
                        format!("unresolved at the scan cap {n_max}")
                    }
                },
            );
            summary
                .statuses
                .insert("side".to_string(), format!("{:?}", result.side).to_lowercase());
        }
        KindParams::L0Scan { deltas, n_max } => {
            let model = config.model.expect("validated by parse");
            let plan = to_plan(config.plan.as_ref().expect("validated by parse"));
            for &delta in deltas {
                let result = l0_of_delta(model, delta, *n_max, &plan)?;
                rows.push(Row {
                    quantity: format!("l0(delta={delta})"),
                    n: result.n as i64,
                    mean: result.n as f64,
                    stderr: 0.0,
                    n_samples: plan.n_samples,
                    seed: plan.seed,
                });
                summary.statuses.insert(
                    format!("l0(delta={delta})"),
                    match result.status {
                        LengthStatus::Resolved => "resolved".to_string(),
                        LengthStatus::Unresolved => {
                            format!("unresolved at the scan cap {n_max}")
                        }
                    },
                );
            }
        }
        KindParams::Scaling { delta_r, nu, measured } => {
            let measured_pairs: Vec<(ScalingQuantity, ValueWithError)> = measured
                .iter()
                .map(|(name, value, stderr)| {
                    let quantity = match name.as_str() {
                        "delta" => ScalingQuantity::Delta,
                        "eta" => ScalingQuantity::Eta,
                        "beta" => ScalingQuantity::Beta,
                        "gamma" => ScalingQuantity::Gamma,
                        _ => ScalingQuantity::Gap,
                    };
                    (quantity, ValueWithError { value: *value, stderr: *stderr })
                })
                .collect();
            let report = scaling_report(
                ValueWithError { value: delta_r.0, stderr: delta_r.1 },
                ValueWithError { value: nu.0, stderr: nu.1 },
                &measured_pairs,
            );
            summary.scaling = scaling_entries(&report);
        }
        KindParams::Verify { full } => {
            let report = if *full { verify::verify_full() } else { verify::verify_quick() };
            return Ok(RunOutcome::Verified(report));
        }
    }

    let files = write_outputs(&dir, &rows, &summary)?;
    Ok(RunOutcome::Files(files))
}

/// Flatten a scaling report into named summary entries.
pub fn scaling_entries(
    report: &isinglab::estimators::ScalingReport,
) -> BTreeMap<String, ScalingEntry> {
    let mut out = BTreeMap::new();
    let mut put = |name: &str, v: ValueWithError| {
        out.insert(
            name.to_string(),
            ScalingEntry {
                derived: v.value,
                derived_stderr: v.stderr,
                measured: None,
                measured_stderr: None,
                residual: None,
            },
        );
    };
    put("delta_r", report.delta_r);
    put("nu", report.nu);
    put("delta", report.delta);
    put("eta", report.eta);
    put("beta", report.beta);
    put("gamma", report.gamma);
    put("gap", report.gap);
    for residual in &report.residuals {
        let name = match residual.quantity {
            ScalingQuantity::Delta => "delta",
            ScalingQuantity::Eta => "eta",
            ScalingQuantity::Beta => "beta",
            ScalingQuantity::Gamma => "gamma",
            ScalingQuantity::Gap => "gap",
        };
        if let Some(entry) = out.get_mut(name) {
            entry.measured = Some(residual.measured.value);
            entry.measured_stderr = Some(residual.measured.stderr);
            entry.residual = Some(residual.residual);
        }
    }
    out
}
