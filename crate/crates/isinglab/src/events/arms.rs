//! Polychromatic arm events in annuli, full-plane and half-plane.
//!
//! The arm event asks for `k1` plus-arms and `k2` minus-star-arms crossing
//! the annulus from the inner ring to the outer ring, with every pair of
//! minus-arms separated by a plus-arm; in the half-plane variant all arms stay
//! in `{x >= 1}`.
//!
//! Detection reduces the configuration to its *arm signature*: walk the inner
//! ring in cyclic order (or the half-plane arc in linear order) and record one
//! letter per *crossing cluster* — a monochromatic cluster of the annulus
//! joining inner to outer ring — at its first contact with the walk. Distinct
//! crossing clusters stand in for disjoint arms, and the separation condition
//! becomes a combinatorial property of the letter word: the event holds iff
//! the word contains `k1` plus letters, `k2` minus letters, and (for
//! `k2 >= 2`) at least `k2` maximal runs of minus letters, so that a minus
//! letter can be chosen from each run with plus letters between all chosen
//! pairs. This cluster-alternation reading is the operative definition here;
//! the exhaustive small-annulus enumeration in the verification battery
//! anchors it against direct counting.

use std::collections::VecDeque;

use super::EventError;
use crate::clusters::{Color, SpinField};
use crate::lattice::{Annulus, Site, Square};

/// A `k1`-plus / `k2`-minus-star arm event across an annulus; `half_plane`
/// restricts every arm to `{x >= 1}`.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct ArmSpec {
    pub plus_arms: u32,
    pub minus_arms: u32,
    pub annulus: Annulus,
    pub half_plane: bool,
}

impl ArmSpec {
    /// Validated spec: at least one arm, and a genuinely two-radius annulus.
    pub fn new(
        plus_arms: u32,
        minus_arms: u32,
        annulus: Annulus,
        half_plane: bool,
    ) -> Result<Self, EventError> {
        let spec = ArmSpec {
            plus_arms,
            minus_arms,
            annulus,
            half_plane,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// The invariants [`ArmSpec::new`] enforces, rechecked on a bare struct:
    /// at least one arm, and a genuinely two-radius annulus.
    pub fn validate(&self) -> Result<(), EventError> {
        if self.plus_arms + self.minus_arms == 0 {
            return Err(EventError::NoArms);
        }
        if self.annulus.inner() >= self.annulus.outer() {
            return Err(EventError::ThinAnnulus {
                inner: self.annulus.inner(),
                outer: self.annulus.outer(),
            });
        }
        Ok(())
    }
}

/// The walk along which first contacts are recorded: the full inner-ring
/// cycle, or its `{x >= 1}` arc rotated to start at `(1, -r)` so the letters
/// read in path order along the arc.
fn contact_walk(annulus: Annulus, half_plane: bool) -> Vec<Site> {
    let cycle = Square::centered(annulus.inner())
        .expect("inner >= 1")
        .boundary_cycle();
    if !half_plane {
        return cycle;
    }
    let mut arc: Vec<Site> = cycle.into_iter().filter(|s| s.x >= 1).collect();
    let start = Site::new(1, -annulus.inner());
    let pos = arc.iter().position(|&s| s == start).expect("arc start on ring");
    arc.rotate_left(pos);
    arc
}

/// The arm signature: one color letter per crossing cluster, in first-contact
/// order along the inner ring (cyclic) or the half-plane arc (linear).
pub fn arm_signature<F: SpinField + ?Sized>(
    field: &mut F,
    annulus: Annulus,
    half_plane: bool,
) -> Vec<Color> {
    let rect = annulus.rect();
    let outer = annulus.outer();
    let in_region = |s: Site| annulus.contains(s) && (!half_plane || s.x >= 1);

    let mut label = vec![0u32; rect.len()];
    let mut next_label = 0u32;
    let mut queue: VecDeque<Site> = VecDeque::new();
    let mut word = Vec::new();

    for start in contact_walk(annulus, half_plane) {
        let si = rect.index_unchecked(start);
        if label[si] != 0 {
            continue; // cluster already lettered at an earlier contact
        }
        let Some(spin) = field.spin_at(start) else {
            continue;
        };
        let color = if spin.is_plus() { Color::Plus } else { Color::MinusStar };
        next_label += 1;
        label[si] = next_label;
        queue.clear();
        queue.push_back(start);
        let mut reaches_outer = start.norm_linf() == outer;
        while let Some(s) = queue.pop_front() {
            let l1;
            let linf;
            let neighbors: &[Site] = match color {
                Color::Plus => {
                    l1 = s.l1_neighbors();
                    &l1
                }
                Color::MinusStar => {
                    linf = s.linf_neighbors();
                    &linf
                }
            };
            for &nb in neighbors {
                if !in_region(nb) {
                    continue;
                }
                let j = rect.index_unchecked(nb);
                if label[j] != 0 {
                    continue;
                }
                match field.spin_at(nb) {
                    Some(sp) if color.occupies(sp) => {
                        label[j] = next_label;
                        reaches_outer |= nb.norm_linf() == outer;
                        queue.push_back(nb);
                    }
                    _ => {}
                }
            }
        }
        if reaches_outer {
            word.push(color);
        }
    }
    word
}

/// Number of maximal runs of minus letters, cyclically or linearly.
fn minus_runs(word: &[Color], cyclic: bool) -> usize {
    let n = word.len();
    if n == 0 {
        return 0;
    }
    if cyclic && word.iter().all(|&c| c == Color::MinusStar) {
        return 1;
    }
    (0..n)
        .filter(|&i| {
            word[i] == Color::MinusStar
                && if i + 1 < n {
                    word[i + 1] == Color::Plus
                } else if cyclic {
                    word[0] == Color::Plus
                } else {
                    true // a linear word's trailing run ends at the boundary
                }
        })
        .count()
}

/// Does the configuration realize the arm event?
pub fn has_arm_event<F: SpinField + ?Sized>(field: &mut F, spec: &ArmSpec) -> bool {
    let word = arm_signature(field, spec.annulus, spec.half_plane);
    let plus = word.iter().filter(|&&c| c == Color::Plus).count();
    let minus = word.len() - plus;
    let k1 = spec.plus_arms as usize;
    let k2 = spec.minus_arms as usize;
    plus >= k1 && minus >= k2 && (k2 < 2 || minus_runs(&word, !spec.half_plane) >= k2)
}
