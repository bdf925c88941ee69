//! Connectivity events and their detectors.
//!
//! Every event is a measurable function of the spins in a finite window and is
//! described by an [`EventSpec`]:
//!
//! * side-to-side crossings of a rectangle in either color;
//! * circuits surrounding the hole of an annulus;
//! * the one-arm event (origin to the boundary of `S(n)`);
//! * polychromatic arm events in annuli, full-plane or half-plane;
//! * the two- and three-arm events at the top boundary point of `S(n)` (and
//!   their color-swapped variants);
//! * pivotality of a site for an inner event, and the four-arm event
//!   (pivotality of a site for the crossing of a centered box);
//! * the spin at a single site.
//!
//! Detectors run against any [`SpinField`], so the same code is exercised by
//! exact enumeration, eager Monte Carlo and lazily sampled Bernoulli fields.
//! Pivotality is evaluated by definition — the event is computed on the
//! configuration and on its single-site flip — and the four-arm detector has
//! an independent characterization (two plus-arms to the sides, two
//! minus-star-arms to top and bottom) used as a cross-check and by the fast
//! samplers.

mod arms;
mod circuit;
mod lowest;
mod parse;

pub use arms::{arm_signature, has_arm_event, ArmSpec};
pub use circuit::has_circuit;
pub use lowest::{below_region, central_highest_point, lowest_crossing, CentralHighestPoint};
pub use parse::EventParseError;

use thiserror::Error;

use crate::clusters::{Color, Flipped, SpinField, Traversal};
use crate::gibbs::Spin;
use crate::lattice::{Annulus, Coord, Rect, Site, Square};

/// An event description that cannot be realized.
#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum EventError {
    #[error("an arm event needs at least one arm")]
    NoArms,
    #[error("an arm annulus needs inner < outer, got {inner}..{outer}")]
    ThinAnnulus { inner: Coord, outer: Coord },
    #[error("the event needs a box radius of at least 1, got {0}")]
    RadiusTooSmall(Coord),
    #[error("pivotality cannot be nested inside another pivotality event")]
    NestedPivotality,
    #[error("the event reads {needed:?}, outside the configuration window {have:?}")]
    WindowOutsideRegion { needed: Rect, have: Rect },
}

/// Direction of a rectangle crossing.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub enum Orientation {
    /// Left column to right column.
    Horizontal,
    /// Bottom row to top row.
    Vertical,
}

/// The four boundary-arm events at the top boundary point of `S(n)`.
///
/// The two-arm event asks for a minus-star-path from `(0, n)` and a plus-path
/// from `(-1, n)`; both paths stay in `S(n)` and end on the inner boundary
/// minus the top side. The three-arm event asks for a plus spin at `(0, n)`,
/// plus-paths from `(-1, n)` and `(1, n)` and a minus-star-path from
/// `(0, n-1)`, with the same endpoints but each path confined to the interior
/// of the box after its seed (no other top-row site): the center path then
/// separates the two side paths, which is what drives the faster decay.
/// Starred variants swap the two colors.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub enum BoundaryArmKind {
    TwoArm,
    TwoArmStarred,
    ThreeArm,
    ThreeArmStarred,
}

impl BoundaryArmKind {
    pub fn starred(self) -> bool {
        matches!(
            self,
            BoundaryArmKind::TwoArmStarred | BoundaryArmKind::ThreeArmStarred
        )
    }
}

/// Description of a connectivity event. See the module docs; the text form
/// produced by `Display` and accepted by `FromStr` is the configuration-file
/// grammar.
#[derive(Clone, PartialEq, Debug)]
pub enum EventSpec {
    /// A `color` crossing of `rect` in `orientation`.
    Crossing {
        rect: Rect,
        orientation: Orientation,
        color: Color,
    },
    /// A `color` circuit inside the annulus surrounding its hole.
    Circuit { annulus: Annulus, color: Color },
    /// A `color` path from the origin to the inner boundary of `S(radius)`,
    /// inside the box.
    OneArm { radius: Coord, color: Color },
    /// Polychromatic arm event in an annulus.
    Arms(ArmSpec),
    /// A boundary-arm event at the top boundary point of `S(radius)`.
    HalfPlaneBoundary {
        radius: Coord,
        kind: BoundaryArmKind,
    },
    /// The site's flip changes the indicator of the inner event.
    Pivotal { site: Site, inner: Box<EventSpec> },
    /// Pivotality of `site` for the horizontal plus-crossing of `S(radius)`:
    /// the four-arm event.
    FourArm { site: Site, radius: Coord },
    /// The spin at a site equals a value.
    SpinIs { site: Site, value: Spin },
}

impl EventSpec {
    /// The window of sites the event can read. Detector traversals stay
    /// inside it.
    pub fn window(&self) -> Rect {
        match self {
            EventSpec::Crossing { rect, .. } => *rect,
            EventSpec::Circuit { annulus, .. } | EventSpec::Arms(ArmSpec { annulus, .. }) => {
                annulus.rect()
            }
            EventSpec::OneArm { radius, .. } | EventSpec::HalfPlaneBoundary { radius, .. } => {
                Square::centered(*radius).expect("validated radius").rect()
            }
            EventSpec::Pivotal { site, inner } => {
                let w = inner.window();
                let one = Rect::new(site.x, site.x, site.y, site.y).expect("point rect");
                w.hull(&one)
            }
            EventSpec::FourArm { site, radius } => {
                let w = Square::centered(*radius).expect("validated radius").rect();
                let one = Rect::new(site.x, site.x, site.y, site.y).expect("point rect");
                w.hull(&one)
            }
            EventSpec::SpinIs { site, .. } => {
                Rect::new(site.x, site.x, site.y, site.y).expect("point rect")
            }
        }
    }

    /// A characteristic linear size for reporting: the box or annulus radius,
    /// or half the larger rectangle dimension.
    pub fn characteristic_size(&self) -> Coord {
        match self {
            EventSpec::Crossing { rect, .. } => (rect.width().max(rect.height()) as Coord) / 2,
            EventSpec::Circuit { annulus, .. } | EventSpec::Arms(ArmSpec { annulus, .. }) => {
                annulus.outer()
            }
            EventSpec::OneArm { radius, .. }
            | EventSpec::HalfPlaneBoundary { radius, .. }
            | EventSpec::FourArm { radius, .. } => *radius,
            EventSpec::Pivotal { inner, .. } => inner.characteristic_size(),
            EventSpec::SpinIs { .. } => 1,
        }
    }

    /// Check the structural invariants a well-formed description satisfies:
    /// positive radii, a realizable arm specification, and pivotality nested
    /// at most one level. The text parser and the measurement entry points
    /// run this; detectors assume it.
    pub fn validate(&self) -> Result<(), EventError> {
        match self {
            EventSpec::Crossing { .. } | EventSpec::Circuit { .. } | EventSpec::SpinIs { .. } => {
                Ok(())
            }
            EventSpec::OneArm { radius, .. }
            | EventSpec::HalfPlaneBoundary { radius, .. }
            | EventSpec::FourArm { radius, .. } => {
                if *radius >= 1 {
                    Ok(())
                } else {
                    Err(EventError::RadiusTooSmall(*radius))
                }
            }
            EventSpec::Arms(spec) => spec.validate(),
            EventSpec::Pivotal { inner, .. } => {
                if matches!(**inner, EventSpec::Pivotal { .. }) {
                    Err(EventError::NestedPivotality)
                } else {
                    inner.validate()
                }
            }
        }
    }

    /// Check that everything the event reads lies inside `have`.
    pub fn check_window(&self, have: Rect) -> Result<(), EventError> {
        let needed = self.window();
        let inside = have.x0() <= needed.x0()
            && needed.x1() <= have.x1()
            && have.y0() <= needed.y0()
            && needed.y1() <= have.y1();
        if inside {
            Ok(())
        } else {
            Err(EventError::WindowOutsideRegion { needed, have })
        }
    }
}

/// Reusable event evaluator: owns the traversal scratch so repeated
/// evaluation (enumeration loops, samplers) does not allocate.
pub struct Evaluator {
    tr: Traversal,
}

impl Evaluator {
    /// Evaluator sized for `spec`'s window.
    pub fn for_spec(spec: &EventSpec) -> Self {
        Evaluator {
            tr: Traversal::new(spec.window()),
        }
    }

    /// Evaluator over an explicit window (must contain any later spec's
    /// window).
    pub fn with_window(window: Rect) -> Self {
        Evaluator {
            tr: Traversal::new(window),
        }
    }

    fn ensure_window(&mut self, w: Rect) {
        if self.tr.window() != self.tr.window().hull(&w) {
            self.tr = Traversal::new(self.tr.window().hull(&w));
        }
    }

    /// Evaluate `spec` on `field`.
    pub fn eval<F: SpinField + ?Sized>(&mut self, field: &mut F, spec: &EventSpec) -> bool {
        debug_assert!(spec.validate().is_ok(), "unvalidated spec: {spec:?}");
        self.ensure_window(spec.window());
        let mut shim: &mut F = field;
        self.eval_dyn(&mut shim, spec)
    }

    fn eval_dyn(&mut self, field: &mut dyn SpinField, spec: &EventSpec) -> bool {
        match spec {
            EventSpec::Crossing {
                rect,
                orientation,
                color,
            } => crossing(&mut self.tr, field, *rect, *orientation, *color),
            EventSpec::Circuit { annulus, color } => has_circuit(field, *annulus, *color),
            EventSpec::OneArm { radius, color } => one_arm(&mut self.tr, field, *radius, *color),
            EventSpec::Arms(spec) => has_arm_event(field, spec),
            EventSpec::HalfPlaneBoundary { radius, kind } => match kind {
                BoundaryArmKind::TwoArm | BoundaryArmKind::TwoArmStarred => {
                    boundary_two_arm(&mut self.tr, field, *radius, kind.starred())
                }
                BoundaryArmKind::ThreeArm | BoundaryArmKind::ThreeArmStarred => {
                    boundary_three_arm(&mut self.tr, field, *radius, kind.starred())
                }
            },
            EventSpec::Pivotal { site, inner } => {
                let plain = self.eval_dyn(field, inner);
                let mut flipped = Flipped {
                    inner: field,
                    at: *site,
                };
                let swapped = self.eval_dyn(&mut flipped, inner);
                plain != swapped
            }
            EventSpec::FourArm { site, radius } => {
                let rect = Square::centered(*radius).expect("validated radius").rect();
                let plain =
                    crossing(&mut self.tr, field, rect, Orientation::Horizontal, Color::Plus);
                let mut flipped = Flipped {
                    inner: field,
                    at: *site,
                };
                let swapped = crossing(
                    &mut self.tr,
                    &mut flipped,
                    rect,
                    Orientation::Horizontal,
                    Color::Plus,
                );
                plain != swapped
            }
            EventSpec::SpinIs { site, value } => field.spin_at(*site) == Some(*value),
        }
    }
}

/// One-shot evaluation with fresh scratch. Hot loops should hold an
/// [`Evaluator`].
pub fn evaluate<F: SpinField + ?Sized>(field: &mut F, spec: &EventSpec) -> bool {
    Evaluator::for_spec(spec).eval(field, spec)
}

/// Side-to-side `color` crossing of `rect`.
pub fn crossing<F: SpinField + ?Sized>(
    tr: &mut Traversal,
    field: &mut F,
    rect: Rect,
    orientation: Orientation,
    color: Color,
) -> bool {
    let seeds: Vec<Site> = match orientation {
        Orientation::Horizontal => (rect.y0()..=rect.y1())
            .map(|y| Site::new(rect.x0(), y))
            .collect(),
        Orientation::Vertical => (rect.x0()..=rect.x1())
            .map(|x| Site::new(x, rect.y0()))
            .collect(),
    };
    let within = |s: Site| rect.contains(s);
    match orientation {
        Orientation::Horizontal => tr.reach(field, color, &seeds, within, |s| s.x == rect.x1()),
        Orientation::Vertical => tr.reach(field, color, &seeds, within, |s| s.y == rect.y1()),
    }
}

/// `color` path from the origin to the inner boundary of `S(n)`, inside the
/// box. The origin must carry the color.
pub fn one_arm<F: SpinField + ?Sized>(
    tr: &mut Traversal,
    field: &mut F,
    radius: Coord,
    color: Color,
) -> bool {
    debug_assert!(radius >= 1);
    let sq = Square::centered(radius).expect("radius >= 1");
    let within = move |s: Site| sq.contains(s);
    tr.reach(field, color, &[crate::lattice::ORIGIN], within, move |s| {
        s.norm_linf() == radius
    })
}

/// Target predicate for the boundary arm events: the inner boundary of
/// `S(n)` minus its top side.
#[inline]
fn ring_minus_top(radius: Coord) -> impl Fn(Site) -> bool + Copy {
    move |s: Site| s.norm_linf() == radius && s.y != radius
}

/// Two-arm event at the top boundary point of `S(n)`; see
/// [`BoundaryArmKind`].
pub fn boundary_two_arm<F: SpinField + ?Sized>(
    tr: &mut Traversal,
    field: &mut F,
    radius: Coord,
    starred: bool,
) -> bool {
    debug_assert!(radius >= 1);
    let sq = Square::centered(radius).expect("radius >= 1");
    let within = move |s: Site| sq.contains(s);
    let target = ring_minus_top(radius);
    let (first_color, second_color) = if starred {
        (Color::Plus, Color::MinusStar)
    } else {
        (Color::MinusStar, Color::Plus)
    };
    // Arm from (0, n) in the first color, from (-1, n) in the second.
    tr.reach(field, first_color, &[Site::new(0, radius)], within, target)
        && tr.reach(field, second_color, &[Site::new(-1, radius)], within, target)
}

/// Three-arm event at the top boundary point of `S(n)`; see
/// [`BoundaryArmKind`].
pub fn boundary_three_arm<F: SpinField + ?Sized>(
    tr: &mut Traversal,
    field: &mut F,
    radius: Coord,
    starred: bool,
) -> bool {
    debug_assert!(radius >= 1);
    let sq = Square::centered(radius).expect("radius >= 1");
    let target = ring_minus_top(radius);
    let (side_color, center_color) = if starred {
        (Color::MinusStar, Color::Plus)
    } else {
        (Color::Plus, Color::MinusStar)
    };
    // Cheap reject first: the spin at (0, n) must carry the side color.
    if field.spin_at(Site::new(0, radius)) != Some(side_color.spin()) {
        return false;
    }
    // Paths run in the interior: past its seed an arm may not touch the top
    // row, otherwise the two side arms could meet along it and the center arm
    // would no longer separate them.
    let interior = move |s: Site| sq.contains(s) && s.y != radius;
    let from_top = move |seed: Site| move |s: Site| interior(s) || s == seed;
    let left = Site::new(-1, radius);
    let right = Site::new(1, radius);
    tr.reach(field, side_color, &[left], from_top(left), target)
        && tr.reach(field, side_color, &[right], from_top(right), target)
        && tr.reach(field, center_color, &[Site::new(0, radius - 1)], interior, target)
}

/// Is `v` pivotal for `spec` in `field`: does flipping the spin at `v` change
/// the indicator? Evaluated by definition (two evaluations). A `Pivotal`
/// spec is rejected — pivotality does not nest.
pub fn is_pivotal<F: SpinField + ?Sized>(
    ev: &mut Evaluator,
    field: &mut F,
    v: Site,
    spec: &EventSpec,
) -> Result<bool, EventError> {
    if matches!(spec, EventSpec::Pivotal { .. }) {
        return Err(EventError::NestedPivotality);
    }
    let plain = ev.eval(field, spec);
    let mut flipped = Flipped {
        inner: field,
        at: v,
    };
    let swapped = ev.eval(&mut flipped, spec);
    Ok(plain != swapped)
}

/// Four-arm event at `v` in `S(n)` via the arm characterization: two
/// plus-arms from the `l1` neighborhood of `v` to the left and right sides of
/// the box and two minus-star-arms from the `linf` neighborhood to bottom and
/// top, all avoiding `v`. When `v` lies on a side of the box, the arm to that
/// side is trivially present.
///
/// Equivalent to pivotality of `v` for the horizontal plus-crossing
/// ([`EventSpec::FourArm`] evaluates that definition directly); the
/// equivalence is exercised exhaustively in tests and underpins the fast
/// samplers.
pub fn four_arm_by_arms<F: SpinField + ?Sized>(
    tr: &mut Traversal,
    field: &mut F,
    v: Site,
    radius: Coord,
) -> bool {
    let sq = Square::centered(radius).expect("radius >= 0");
    let rect = sq.rect();
    if !rect.contains(v) {
        return false;
    }
    let within = move |s: Site| rect.contains(s) && s != v;

    let plus_seeds: Vec<Site> = v
        .l1_neighbors()
        .into_iter()
        .filter(|s| rect.contains(*s))
        .collect();
    let star_seeds: Vec<Site> = v
        .linf_neighbors()
        .into_iter()
        .filter(|s| rect.contains(*s))
        .collect();

    let left = v.x == rect.x0()
        || tr.reach(field, Color::Plus, &plus_seeds, within, |s| s.x == rect.x0());
    if !left {
        return false;
    }
    let right = v.x == rect.x1()
        || tr.reach(field, Color::Plus, &plus_seeds, within, |s| s.x == rect.x1());
    if !right {
        return false;
    }
    let bottom = v.y == rect.y0()
        || tr.reach(field, Color::MinusStar, &star_seeds, within, |s| s.y == rect.y0());
    if !bottom {
        return false;
    }
    v.y == rect.y1()
        || tr.reach(field, Color::MinusStar, &star_seeds, within, |s| s.y == rect.y1())
}
