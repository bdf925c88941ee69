//! Square-lattice geometry: sites, centered boxes, rectangles, annuli,
//! boundaries, tori, and dense site sets.
//!
//! Conventions used throughout the crate:
//!
//! * A *site* is a point of `Z^2` with `i32` coordinates.
//! * Two adjacencies matter: `l1` (4 nearest neighbors, `|x-y|_1 = 1`) and
//!   `linf` (8 "star" neighbors, `|x-y|_inf = 1`). Plus-colored connectivity
//!   uses `l1`, minus-star connectivity uses `linf`; see [`crate::clusters`].
//! * `S(n)` denotes the centered box `[-n, n]^2` ([`Square::centered`]), with
//!   side `2n + 1` and inner boundary `{x : |x|_inf = n}` (`8n` sites for
//!   `n >= 1`).
//! * The annulus `B(r, R)` is `[-R, R]^2` minus the open box `(-r, r)^2`; on
//!   the lattice that keeps exactly the sites with `r <= |x|_inf <= R`, i.e.
//!   `(2R+1)^2 - (2r-1)^2` sites.
//!
//! Iteration order everywhere is row-major: `y` ascending, then `x` ascending.
//! Every iterator here is deterministic, which the reproducibility contract of
//! the estimators relies on.

use std::fmt;

use thiserror::Error;

/// Lattice coordinate type.
pub type Coord = i32;

/// Errors from constructing degenerate geometry.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum GeometryError {
    #[error("rectangle has empty extent: x {x0}..={x1}, y {y0}..={y1}")]
    EmptyRect { x0: Coord, x1: Coord, y0: Coord, y1: Coord },
    #[error("square radius must be >= 0, got {0}")]
    NegativeRadius(Coord),
    #[error("annulus needs 1 <= inner <= outer, got inner {inner}, outer {outer}")]
    BadAnnulus { inner: Coord, outer: Coord },
    #[error("torus side must be >= 3 to avoid doubled bonds, got {0}")]
    TorusTooSmall(Coord),
}

/// A site of the square lattice `Z^2`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Site {
    pub x: Coord,
    pub y: Coord,
}

impl fmt::Debug for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// The origin `O = (0, 0)`.
pub const ORIGIN: Site = Site { x: 0, y: 0 };

impl Site {
    pub const fn new(x: Coord, y: Coord) -> Self {
        Site { x, y }
    }

    /// `|x|_inf`, the max norm.
    pub fn norm_linf(self) -> Coord {
        self.x.abs().max(self.y.abs())
    }

    /// `|x|_1`, the taxicab norm.
    pub fn norm_l1(self) -> Coord {
        self.x.abs() + self.y.abs()
    }

    /// The 4 nearest (`l1`) neighbors, in deterministic order.
    pub fn l1_neighbors(self) -> [Site; 4] {
        let Site { x, y } = self;
        [
            Site::new(x - 1, y),
            Site::new(x + 1, y),
            Site::new(x, y - 1),
            Site::new(x, y + 1),
        ]
    }

    /// The 8 star (`linf`) neighbors, in deterministic order.
    pub fn linf_neighbors(self) -> [Site; 8] {
        let Site { x, y } = self;
        [
            Site::new(x - 1, y - 1),
            Site::new(x, y - 1),
            Site::new(x + 1, y - 1),
            Site::new(x - 1, y),
            Site::new(x + 1, y),
            Site::new(x - 1, y + 1),
            Site::new(x, y + 1),
            Site::new(x + 1, y + 1),
        ]
    }

    pub fn offset(self, dx: Coord, dy: Coord) -> Site {
        Site::new(self.x + dx, self.y + dy)
    }
}

/// An axis-aligned rectangle of sites, inclusive on all four edges.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Hash)]
pub struct Rect {
    x0: Coord,
    y0: Coord,
    x1: Coord,
    y1: Coord,
}

impl Rect {
    /// Rectangle `[x0, x1] x [y0, y1]`; fails if either range is empty.
    pub fn new(x0: Coord, x1: Coord, y0: Coord, y1: Coord) -> Result<Self, GeometryError> {
        if x0 > x1 || y0 > y1 {
            return Err(GeometryError::EmptyRect { x0, x1, y0, y1 });
        }
        Ok(Rect { x0, y0, x1, y1 })
    }

    pub fn x0(&self) -> Coord {
        self.x0
    }
    pub fn x1(&self) -> Coord {
        self.x1
    }
    pub fn y0(&self) -> Coord {
        self.y0
    }
    pub fn y1(&self) -> Coord {
        self.y1
    }

    /// Number of columns.
    pub fn width(&self) -> usize {
        (self.x1 - self.x0 + 1) as usize
    }

    /// Number of rows.
    pub fn height(&self) -> usize {
        (self.y1 - self.y0 + 1) as usize
    }

    /// Total number of sites.
    pub fn len(&self) -> usize {
        self.width() * self.height()
    }

    pub fn is_empty(&self) -> bool {
        false // construction forbids empty extents
    }

    pub fn contains(&self, s: Site) -> bool {
        self.x0 <= s.x && s.x <= self.x1 && self.y0 <= s.y && s.y <= self.y1
    }

    /// Row-major index of `s` within the rectangle, if inside.
    pub fn index_of(&self, s: Site) -> Option<usize> {
        if !self.contains(s) {
            return None;
        }
        Some(self.index_unchecked(s))
    }

    /// Row-major index assuming `s` is inside (debug-asserted).
    #[inline]
    pub fn index_unchecked(&self, s: Site) -> usize {
        debug_assert!(self.contains(s));
        (s.y - self.y0) as usize * self.width() + (s.x - self.x0) as usize
    }

    /// Site at row-major index `i`.
    pub fn site_at(&self, i: usize) -> Site {
        let w = self.width();
        Site::new(self.x0 + (i % w) as Coord, self.y0 + (i / w) as Coord)
    }

    /// All sites in row-major order.
    pub fn sites(&self) -> impl Iterator<Item = Site> {
        let r = *self;
        (0..r.len()).map(move |i| r.site_at(i))
    }

    /// Smallest rectangle containing both `self` and `other`.
    pub fn hull(&self, other: &Rect) -> Rect {
        Rect {
            x0: self.x0.min(other.x0),
            y0: self.y0.min(other.y0),
            x1: self.x1.max(other.x1),
            y1: self.y1.max(other.y1),
        }
    }

    /// Grow by `m >= 0` in every direction.
    pub fn inflate(&self, m: Coord) -> Rect {
        Rect {
            x0: self.x0 - m,
            y0: self.y0 - m,
            x1: self.x1 + m,
            y1: self.y1 + m,
        }
    }
}

/// The centered box `S(c, n) = c + [-n, n]^2`.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Hash)]
pub struct Square {
    center: Site,
    radius: Coord,
}

impl Square {
    /// Box of radius `n >= 0` around `center`.
    pub fn new(center: Site, radius: Coord) -> Result<Self, GeometryError> {
        if radius < 0 {
            return Err(GeometryError::NegativeRadius(radius));
        }
        Ok(Square { center, radius })
    }

    /// `S(n) = [-n, n]^2` around the origin.
    pub fn centered(radius: Coord) -> Result<Self, GeometryError> {
        Square::new(ORIGIN, radius)
    }

    pub fn center(&self) -> Site {
        self.center
    }

    pub fn radius(&self) -> Coord {
        self.radius
    }

    /// Side length `2n + 1`.
    pub fn side(&self) -> usize {
        (2 * self.radius + 1) as usize
    }

    pub fn rect(&self) -> Rect {
        Rect {
            x0: self.center.x - self.radius,
            y0: self.center.y - self.radius,
            x1: self.center.x + self.radius,
            y1: self.center.y + self.radius,
        }
    }

    pub fn contains(&self, s: Site) -> bool {
        s.offset(-self.center.x, -self.center.y).norm_linf() <= self.radius
    }

    pub fn site_count(&self) -> usize {
        self.side() * self.side()
    }

    pub fn sites(&self) -> impl Iterator<Item = Site> {
        self.rect().sites()
    }

    /// Inner boundary `{x : |x - c|_inf = n}`: `8n` sites for `n >= 1`, just
    /// the center for `n = 0`. Row-major order.
    pub fn inner_boundary(&self) -> Vec<Site> {
        let n = self.radius;
        if n == 0 {
            return vec![self.center];
        }
        self.rect()
            .sites()
            .filter(|s| s.offset(-self.center.x, -self.center.y).norm_linf() == n)
            .collect()
    }

    /// Inner boundary walked as a cycle, counterclockwise, starting at the
    /// bottom-right corner `c + (n, -n)`. Used by arm signatures, which need a
    /// cyclic order rather than a row-major one.
    pub fn boundary_cycle(&self) -> Vec<Site> {
        let n = self.radius;
        let c = self.center;
        if n == 0 {
            return vec![c];
        }
        let mut out = Vec::with_capacity(8 * n as usize);
        // Right edge, bottom to top.
        for y in -n..=n {
            out.push(c.offset(n, y));
        }
        // Top edge, right to left (corners already emitted).
        for x in (-n..n).rev() {
            out.push(c.offset(x, n));
        }
        // Left edge, top to bottom.
        for y in (-n..n).rev() {
            out.push(c.offset(-n, y));
        }
        // Bottom edge, left to right.
        for x in -n + 1..n {
            out.push(c.offset(x, -n));
        }
        out
    }
}

/// The annulus `B(r, R) = [-R, R]^2 \ (-r, r)^2`, i.e. sites with
/// `r <= |x|_inf <= R`.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Hash)]
pub struct Annulus {
    inner: Coord,
    outer: Coord,
}

impl Annulus {
    pub fn new(inner: Coord, outer: Coord) -> Result<Self, GeometryError> {
        if inner < 1 || outer < inner {
            return Err(GeometryError::BadAnnulus { inner, outer });
        }
        Ok(Annulus { inner, outer })
    }

    pub fn inner(&self) -> Coord {
        self.inner
    }

    pub fn outer(&self) -> Coord {
        self.outer
    }

    /// Bounding rectangle `[-R, R]^2`.
    pub fn rect(&self) -> Rect {
        Square {
            center: ORIGIN,
            radius: self.outer,
        }
        .rect()
    }

    pub fn contains(&self, s: Site) -> bool {
        let m = s.norm_linf();
        self.inner <= m && m <= self.outer
    }

    /// `(2R+1)^2 - (2r-1)^2`.
    pub fn site_count(&self) -> usize {
        let full = (2 * self.outer + 1) as usize;
        let hole = (2 * self.inner - 1) as usize;
        full * full - hole * hole
    }

    /// Sites in row-major order.
    pub fn sites(&self) -> impl Iterator<Item = Site> {
        let a = *self;
        a.rect().sites().filter(move |s| a.contains(*s))
    }

    /// Sites of the inner ring `|x|_inf = r`, in row-major order.
    pub fn inner_ring(&self) -> Vec<Site> {
        Square::centered(self.inner).expect("inner >= 1").inner_boundary()
    }

    /// Sites of the outer ring `|x|_inf = R`, in row-major order.
    pub fn outer_ring(&self) -> Vec<Site> {
        Square::centered(self.outer).expect("outer >= 1").inner_boundary()
    }
}

/// A periodic `side x side` torus with fundamental domain
/// `{0, .., side-1}^2`. Sides below 3 are rejected: on a side-2 torus every
/// bond would be doubled.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Hash)]
pub struct Torus {
    side: Coord,
}

impl Torus {
    pub fn new(side: Coord) -> Result<Self, GeometryError> {
        if side < 3 {
            return Err(GeometryError::TorusTooSmall(side));
        }
        Ok(Torus { side })
    }

    pub fn side(&self) -> Coord {
        self.side
    }

    pub fn site_count(&self) -> usize {
        (self.side * self.side) as usize
    }

    pub fn rect(&self) -> Rect {
        Rect {
            x0: 0,
            y0: 0,
            x1: self.side - 1,
            y1: self.side - 1,
        }
    }

    /// Canonical representative of `s` in the fundamental domain.
    pub fn wrap(&self, s: Site) -> Site {
        Site::new(s.x.rem_euclid(self.side), s.y.rem_euclid(self.side))
    }

    /// Row-major index of the canonical representative.
    pub fn index_of(&self, s: Site) -> usize {
        let w = self.wrap(s);
        (w.y * self.side + w.x) as usize
    }

    /// The 4 `l1` neighbors with wraparound, canonicalized.
    pub fn l1_neighbors(&self, s: Site) -> [Site; 4] {
        s.l1_neighbors().map(|t| self.wrap(t))
    }

    /// The 8 `linf` neighbors with wraparound, canonicalized.
    pub fn linf_neighbors(&self, s: Site) -> [Site; 8] {
        s.linf_neighbors().map(|t| self.wrap(t))
    }

    /// Every `l1` bond exactly once, as (site, right neighbor) and
    /// (site, up neighbor) pairs. Valid because `side >= 3`.
    pub fn bonds(&self) -> impl Iterator<Item = (Site, Site)> {
        let t = *self;
        t.rect().sites().flat_map(move |s| {
            [
                (s, t.wrap(s.offset(1, 0))),
                (s, t.wrap(s.offset(0, 1))),
            ]
        })
    }
}

/// A set of sites stored as a dense bitmap over a bounding rectangle.
///
/// Iteration is row-major over the bounding rectangle, so it is deterministic
/// and sorted by `(y, x)`.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct SiteSet {
    rect: Rect,
    words: Vec<u64>,
    len: usize,
}

impl SiteSet {
    /// Empty set over the given bounding rectangle.
    pub fn empty(rect: Rect) -> Self {
        let nwords = rect.len().div_ceil(64);
        SiteSet {
            rect,
            words: vec![0; nwords],
            len: 0,
        }
    }

    /// Set of all sites of `rect`.
    pub fn full(rect: Rect) -> Self {
        let mut s = SiteSet::empty(rect);
        for i in 0..rect.len() {
            s.words[i / 64] |= 1 << (i % 64);
        }
        s.len = rect.len();
        s
    }

    /// Collect from an iterator; the bounding rectangle is the hull of the
    /// sites. Fails on an empty iterator.
    pub fn from_sites<I: IntoIterator<Item = Site>>(iter: I) -> Result<Self, GeometryError> {
        let sites: Vec<Site> = iter.into_iter().collect();
        let first = sites.first().copied().ok_or(GeometryError::EmptyRect {
            x0: 0,
            x1: -1,
            y0: 0,
            y1: -1,
        })?;
        let mut x0 = first.x;
        let mut x1 = first.x;
        let mut y0 = first.y;
        let mut y1 = first.y;
        for s in &sites {
            x0 = x0.min(s.x);
            x1 = x1.max(s.x);
            y0 = y0.min(s.y);
            y1 = y1.max(s.y);
        }
        let mut set = SiteSet::empty(Rect::new(x0, x1, y0, y1)?);
        for s in sites {
            set.insert(s);
        }
        Ok(set)
    }

    pub fn bounding_rect(&self) -> Rect {
        self.rect
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Insert; returns whether the site was newly added. Sites outside the
    /// bounding rectangle are rejected as a programming error.
    pub fn insert(&mut self, s: Site) -> bool {
        let i = self
            .rect
            .index_of(s)
            .unwrap_or_else(|| panic!("site {s:?} outside bounding rect {:?}", self.rect));
        let (w, b) = (i / 64, i % 64);
        let newly = self.words[w] & (1 << b) == 0;
        if newly {
            self.words[w] |= 1 << b;
            self.len += 1;
        }
        newly
    }

    pub fn contains(&self, s: Site) -> bool {
        match self.rect.index_of(s) {
            Some(i) => self.words[i / 64] & (1 << (i % 64)) != 0,
            None => false,
        }
    }

    /// Members in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = Site> + '_ {
        self.rect.sites().filter(move |s| self.contains(*s))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn box_counts_match_closed_forms() {
        let s3 = Square::centered(3).unwrap();
        assert_eq!(s3.side(), 7);
        assert_eq!(s3.site_count(), 49);
        assert_eq!(s3.sites().count(), 49);
        assert_eq!(s3.inner_boundary().len(), 24); // 8n at n = 3

        let s0 = Square::centered(0).unwrap();
        assert_eq!(s0.inner_boundary(), vec![ORIGIN]);
    }

    #[test]
    fn shifted_box_is_translated() {
        let c = Site::new(5, -2);
        let s = Square::new(c, 2).unwrap();
        assert!(s.contains(Site::new(7, 0)));
        assert!(!s.contains(Site::new(8, 0)));
        assert_eq!(s.site_count(), 25);
    }

    #[test]
    fn annulus_counts_match_closed_form() {
        let a = Annulus::new(2, 4).unwrap();
        assert_eq!(a.site_count(), 72); // 81 - 9
        assert_eq!(a.sites().count(), 72);
        assert!(!a.contains(Site::new(1, 1))); // |x|_inf = 1 < 2 excluded
        assert!(a.contains(Site::new(2, 0)));
        assert!(a.contains(Site::new(4, 4)));

        let tight = Annulus::new(1, 2).unwrap();
        assert_eq!(tight.site_count(), 24);
        assert!(!tight.contains(ORIGIN));
    }

    #[test]
    fn annulus_rejects_degenerate_parameters() {
        assert!(Annulus::new(0, 4).is_err());
        assert!(Annulus::new(3, 2).is_err());
    }

    #[test]
    fn boundary_cycle_is_cyclic_and_complete() {
        for n in 1..6 {
            let sq = Square::centered(n).unwrap();
            let cycle = sq.boundary_cycle();
            assert_eq!(cycle.len(), 8 * n as usize);
            // Same membership as the row-major boundary.
            let mut a = cycle.clone();
            let mut b = sq.inner_boundary();
            a.sort();
            b.sort();
            assert_eq!(a, b);
            // Consecutive sites (cyclically) are linf-adjacent.
            for i in 0..cycle.len() {
                let u = cycle[i];
                let v = cycle[(i + 1) % cycle.len()];
                let d = u.offset(-v.x, -v.y).norm_linf();
                assert_eq!(d, 1, "cycle step {i} not adjacent: {u:?} -> {v:?}");
            }
        }
    }

    #[test]
    fn torus_wraps_and_enumerates_bonds_once() {
        let t = Torus::new(3).unwrap();
        assert_eq!(t.wrap(Site::new(-1, 4)), Site::new(2, 1));
        let bonds: Vec<_> = t.bonds().collect();
        assert_eq!(bonds.len(), 2 * 9); // 2 bonds per site on a torus
        // No unordered bond appears twice.
        let mut seen = std::collections::HashSet::new();
        for (a, b) in bonds {
            let key = if (a.y, a.x) <= (b.y, b.x) { (a, b) } else { (b, a) };
            assert!(seen.insert(key), "bond {key:?} enumerated twice");
        }
        assert!(Torus::new(2).is_err());
    }

    #[test]
    fn site_set_inserts_and_iterates_in_row_major_order() {
        let mut set = SiteSet::empty(Rect::new(-2, 2, -2, 2).unwrap());
        assert!(set.insert(Site::new(1, -2)));
        assert!(set.insert(Site::new(-2, 0)));
        assert!(!set.insert(Site::new(1, -2)));
        assert_eq!(set.len(), 2);
        let got: Vec<_> = set.iter().collect();
        assert_eq!(got, vec![Site::new(1, -2), Site::new(-2, 0)]);
    }

    proptest! {
        // l1 adjacency is symmetric and contained in linf adjacency.
        #[test]
        fn neighbor_relations_are_symmetric(x in -50i32..50, y in -50i32..50) {
            let s = Site::new(x, y);
            for t in s.l1_neighbors() {
                prop_assert!(t.l1_neighbors().contains(&s));
                prop_assert!(s.linf_neighbors().contains(&t));
            }
            for t in s.linf_neighbors() {
                prop_assert!(t.linf_neighbors().contains(&s));
                prop_assert_eq!(s.offset(-t.x, -t.y).norm_linf(), 1);
            }
        }

        // The box partitions into its inner boundary ring and the smaller box.
        #[test]
        fn box_splits_into_ring_and_interior(n in 1i32..12) {
            let sq = Square::centered(n).unwrap();
            let ring = sq.inner_boundary();
            prop_assert_eq!(ring.len(), 8 * n as usize);
            for s in &ring {
                prop_assert_eq!(s.norm_linf(), n);
            }
            let interior = Square::centered(n - 1).unwrap();
            prop_assert_eq!(ring.len() + interior.site_count(), sq.site_count());
        }

        // Annulus membership matches the norm characterization.
        #[test]
        fn annulus_membership_is_norm_band(r in 1i32..6, extra in 0i32..6, x in -12i32..12, y in -12i32..12) {
            let a = Annulus::new(r, r + extra).unwrap();
            let s = Site::new(x, y);
            prop_assert_eq!(a.contains(s), r <= s.norm_linf() && s.norm_linf() <= r + extra);
        }

        // Rect row-major indexing round-trips.
        #[test]
        fn rect_indexing_round_trips(x0 in -10i32..10, w in 1i32..8, y0 in -10i32..10, h in 1i32..8) {
            let r = Rect::new(x0, x0 + w - 1, y0, y0 + h - 1).unwrap();
            for (i, s) in r.sites().enumerate() {
                prop_assert_eq!(r.index_of(s), Some(i));
                prop_assert_eq!(r.site_at(i), s);
            }
        }

        // Torus wrap is idempotent and lands in the fundamental domain.
        #[test]
        fn torus_wrap_is_canonical(side in 3i32..8, x in -30i32..30, y in -30i32..30) {
            let t = Torus::new(side).unwrap();
            let w = t.wrap(Site::new(x, y));
            prop_assert!(t.rect().contains(w));
            prop_assert_eq!(t.wrap(w), w);
            prop_assert_eq!((w.x - x).rem_euclid(side), 0);
            prop_assert_eq!((w.y - y).rem_euclid(side), 0);
        }
    }
}
