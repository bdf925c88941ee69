//! Connectivity in colored spin configurations.
//!
//! Two colors with *different adjacencies* drive everything here:
//!
//! * [`Color::Plus`]: plus spins connected through `l1` (4-neighbor) steps —
//!   plus-clusters and plus-paths;
//! * [`Color::MinusStar`]: minus spins connected through `linf` (8-neighbor,
//!   "star") steps — minus-star-clusters and minus-star-paths.
//!
//! The pair is a matching-lattice pair: on a rectangle, the complement of a
//! horizontal plus-crossing is a vertical minus-star-crossing, and in an
//! annulus a plus circuit surrounding the hole exists exactly when no
//! minus-star path joins inner to outer ring. Event detectors in
//! [`crate::events`] lean on this duality, and the acceptance battery checks
//! it exhaustively on small regions and on sampled large ones.
//!
//! [`Traversal`] is the shared breadth-first engine. It works through the
//! [`SpinField`] abstraction so the same detector code runs against eagerly
//! materialized configurations and against lazily sampled Bernoulli fields
//! (which draw a site's spin the first time the traversal looks at it).

use std::fmt;
use std::ops::ControlFlow;

use crate::gibbs::{Spin, SpinConfig};
use crate::lattice::{Rect, Site};

/// A percolation color: which spin value is "occupied" and which adjacency
/// its paths use.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub enum Color {
    /// Plus spins, `l1` adjacency.
    Plus,
    /// Minus spins, `linf` (star) adjacency.
    MinusStar,
}

impl Color {
    /// The spin value this color occupies.
    pub fn spin(self) -> Spin {
        match self {
            Color::Plus => Spin::Plus,
            Color::MinusStar => Spin::Minus,
        }
    }

    /// Does a spin belong to this color?
    #[inline]
    pub fn occupies(self, spin: Spin) -> bool {
        spin == self.spin()
    }

    /// The color with the opposite spin and the matching (dual) adjacency.
    pub fn dual(self) -> Color {
        match self {
            Color::Plus => Color::MinusStar,
            Color::MinusStar => Color::Plus,
        }
    }
}

impl fmt::Display for Color {
    /// The word used in event descriptions and reports.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Color::Plus => "plus",
            Color::MinusStar => "minus*",
        })
    }
}

/// Read access to a spin field. `&mut` because lazily sampled fields draw and
/// memoize spins on first access; reads must stay consistent afterwards.
pub trait SpinField {
    /// Spin at `s`, or `None` when `s` lies outside the field's domain.
    fn spin_at(&mut self, s: Site) -> Option<Spin>;
}

/// Read-only configurations are fields (torus coordinates wrap).
impl SpinField for &SpinConfig {
    #[inline]
    fn spin_at(&mut self, s: Site) -> Option<Spin> {
        self.spin(s)
    }
}

/// Mutable references forward, so `&mut dyn SpinField` is itself a field.
/// Recursive detectors (pivotality of a pivotality event) go through dynamic
/// dispatch, which keeps monomorphization depth independent of nesting.
impl<F: SpinField + ?Sized> SpinField for &mut F {
    #[inline]
    fn spin_at(&mut self, s: Site) -> Option<Spin> {
        (**self).spin_at(s)
    }
}

/// A field with one site's spin overridden — evaluating events on `omega^v`
/// (the spin-flip involution) without copying the configuration.
pub struct Flipped<F> {
    pub inner: F,
    pub at: Site,
}

impl<F: SpinField> SpinField for Flipped<F> {
    #[inline]
    fn spin_at(&mut self, s: Site) -> Option<Spin> {
        let raw = self.inner.spin_at(s)?;
        Some(if s == self.at { raw.flipped() } else { raw })
    }
}

/// Reusable breadth-first traversal over a working window, with epoch-stamped
/// visit marks so repeated runs need no clearing.
///
/// All traversal is planar: neighbors are taken in `Z^2` and filtered by the
/// caller's `within` predicate and the working window. Order is deterministic
/// (seeds in given order, FIFO, neighbor order fixed), which the reproducible
/// lazy samplers rely on.
pub struct Traversal {
    window: Rect,
    stamp: Vec<u32>,
    epoch: u32,
    queue: std::collections::VecDeque<Site>,
}

impl Traversal {
    /// Traversal scratch covering `window`; sites outside it are never
    /// visited.
    pub fn new(window: Rect) -> Self {
        Traversal {
            window,
            stamp: vec![0; window.len()],
            epoch: 0,
            queue: std::collections::VecDeque::new(),
        }
    }

    pub fn window(&self) -> Rect {
        self.window
    }

    fn begin(&mut self) {
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.stamp.fill(0);
            self.epoch = 1;
        }
        self.queue.clear();
    }

    #[inline]
    fn mark(&mut self, s: Site) -> bool {
        let i = self.window.index_unchecked(s);
        if self.stamp[i] == self.epoch {
            false
        } else {
            self.stamp[i] = self.epoch;
            true
        }
    }

    /// Breadth-first traversal of the `color` cluster(s) grown from `seeds`,
    /// restricted to the working window and the `within` predicate.
    ///
    /// `visit` runs once per cluster site; `ControlFlow::Break` aborts the
    /// traversal. Returns `true` when the traversal was aborted. Seeds that
    /// are out of window, out of `within`, or not of the color are ignored.
    pub fn traverse<F, W, V>(
        &mut self,
        field: &mut F,
        color: Color,
        seeds: &[Site],
        within: W,
        mut visit: V,
    ) -> bool
    where
        F: SpinField + ?Sized,
        W: Fn(Site) -> bool,
        V: FnMut(Site) -> ControlFlow<()>,
    {
        self.begin();
        for &s in seeds {
            if !self.window.contains(s) || !within(s) || !self.mark(s) {
                continue;
            }
            match field.spin_at(s) {
                Some(sp) if color.occupies(sp) => {
                    if visit(s).is_break() {
                        return true;
                    }
                    self.queue.push_back(s);
                }
                _ => {}
            }
        }
        while let Some(s) = self.queue.pop_front() {
            let step = |nb: Site, this: &mut Self, field: &mut F, visit: &mut V| -> bool {
                if !this.window.contains(nb) || !within(nb) || !this.mark(nb) {
                    return false;
                }
                match field.spin_at(nb) {
                    Some(sp) if color.occupies(sp) => {
                        if visit(nb).is_break() {
                            return true;
                        }
                        this.queue.push_back(nb);
                        false
                    }
                    _ => false,
                }
            };
            match color {
                Color::Plus => {
                    for nb in s.l1_neighbors() {
                        if step(nb, self, field, &mut visit) {
                            return true;
                        }
                    }
                }
                Color::MinusStar => {
                    for nb in s.linf_neighbors() {
                        if step(nb, self, field, &mut visit) {
                            return true;
                        }
                    }
                }
            }
        }
        false
    }

    /// Does some `color` path inside `within` join a seed to a site
    /// satisfying `target`?
    pub fn reach<F, W, T>(
        &mut self,
        field: &mut F,
        color: Color,
        seeds: &[Site],
        within: W,
        target: T,
    ) -> bool
    where
        F: SpinField + ?Sized,
        W: Fn(Site) -> bool,
        T: Fn(Site) -> bool,
    {
        self.traverse(field, color, seeds, within, |s| {
            if target(s) {
                ControlFlow::Break(())
            } else {
                ControlFlow::Continue(())
            }
        })
    }
}

/// Are `a` and `b` joined by a `color` path whose sites all satisfy `within`?
/// A site is connected to itself when it carries the color.
///
/// Convenience wrapper that allocates its own scratch; hot paths should hold
/// a [`Traversal`] instead.
pub fn connected<W: Fn(Site) -> bool>(
    config: &SpinConfig,
    a: Site,
    b: Site,
    window: Rect,
    within: W,
    color: Color,
) -> bool {
    let mut tr = Traversal::new(window);
    tr.reach(&mut &*config, color, &[a], within, |s| s == b)
}

/// Identifier of a cluster within a [`ClusterLabels`].
pub type ClusterId = u32;

const UNLABELED: u32 = u32::MAX;

/// Per-cluster summary computed while labeling.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ClusterInfo {
    /// Number of sites.
    pub size: u32,
    /// Canonical representative: the row-major-smallest member site.
    pub canonical: Site,
    /// Coordinate extremes (x0, x1, y0, y1) over the cluster.
    pub bbox: (i32, i32, i32, i32),
    /// Whether the cluster touches each edge of the labeled window:
    /// (left, right, bottom, top).
    pub touches: (bool, bool, bool, bool),
}

impl ClusterInfo {
    /// Largest `|v|_inf` over member sites: the cluster radius seen from the
    /// origin.
    pub fn max_norm_linf(&self) -> i32 {
        let (x0, x1, y0, y1) = self.bbox;
        x0.abs().max(x1.abs()).max(y0.abs()).max(y1.abs())
    }

    /// Does the cluster touch any edge of the labeled window?
    pub fn touches_boundary(&self) -> bool {
        let (l, r, b, t) = self.touches;
        l || r || b || t
    }
}

/// Connected-component labels for one color over a rectangular window of a
/// configuration, built with union-find (path halving, union by size).
///
/// Labeling is planar: adjacency never wraps, even for torus-backed
/// configurations.
#[derive(Clone, Debug)]
pub struct ClusterLabels {
    window: Rect,
    label: Vec<u32>,
    clusters: Vec<ClusterInfo>,
}

impl ClusterLabels {
    /// Label the `color` clusters of `config` restricted to `window` (each
    /// site must also lie in the config's region to participate).
    pub fn build(config: &SpinConfig, window: Rect, color: Color) -> Self {
        let n = window.len();
        let mut parent: Vec<u32> = (0..n as u32).collect();
        let mut rank: Vec<u32> = vec![1; n];
        let mut occupied = vec![false; n];

        let mut cfg_ref = config;
        for i in 0..n {
            let s = window.site_at(i);
            if let Some(sp) = cfg_ref.spin_at(s) {
                occupied[i] = color.occupies(sp);
            }
        }

        fn find(parent: &mut [u32], mut i: u32) -> u32 {
            while parent[i as usize] != i {
                parent[i as usize] = parent[parent[i as usize] as usize];
                i = parent[i as usize];
            }
            i
        }
        let union = |parent: &mut Vec<u32>, rank: &mut Vec<u32>, a: u32, b: u32| {
            let (ra, rb) = (find(parent, a), find(parent, b));
            if ra == rb {
                return;
            }
            let (big, small) = if rank[ra as usize] >= rank[rb as usize] { (ra, rb) } else { (rb, ra) };
            parent[small as usize] = big;
            rank[big as usize] += rank[small as usize];
        };

        // Union each occupied site with its already-scanned neighbors: for l1
        // the left and down neighbors; for star additionally both lower
        // diagonals. Scanning row-major makes each unordered pair union once.
        for i in 0..n {
            if !occupied[i] {
                continue;
            }
            let s = window.site_at(i);
            let back: &[Site] = match color {
                Color::Plus => &[s.offset(-1, 0), s.offset(0, -1)],
                Color::MinusStar => &[
                    s.offset(-1, 0),
                    s.offset(0, -1),
                    s.offset(-1, -1),
                    s.offset(1, -1),
                ],
            };
            for &nb in back {
                if let Some(j) = window.index_of(nb) {
                    if occupied[j] {
                        union(&mut parent, &mut rank, i as u32, j as u32);
                    }
                }
            }
        }

        // Compact roots into dense cluster ids in row-major order of their
        // canonical (smallest-index) member.
        let mut label = vec![UNLABELED; n];
        let mut clusters: Vec<ClusterInfo> = Vec::new();
        let mut root_to_id: std::collections::HashMap<u32, u32> = std::collections::HashMap::new();
        for i in 0..n {
            if !occupied[i] {
                continue;
            }
            let root = find(&mut parent, i as u32);
            let s = window.site_at(i);
            let id = *root_to_id.entry(root).or_insert_with(|| {
                clusters.push(ClusterInfo {
                    size: 0,
                    canonical: s,
                    bbox: (s.x, s.x, s.y, s.y),
                    touches: (false, false, false, false),
                });
                (clusters.len() - 1) as u32
            });
            label[i] = id;
            let info = &mut clusters[id as usize];
            info.size += 1;
            info.bbox.0 = info.bbox.0.min(s.x);
            info.bbox.1 = info.bbox.1.max(s.x);
            info.bbox.2 = info.bbox.2.min(s.y);
            info.bbox.3 = info.bbox.3.max(s.y);
            info.touches.0 |= s.x == window.x0();
            info.touches.1 |= s.x == window.x1();
            info.touches.2 |= s.y == window.y0();
            info.touches.3 |= s.y == window.y1();
        }

        ClusterLabels { window, label, clusters }
    }

    pub fn window(&self) -> Rect {
        self.window
    }

    /// Cluster id at `s`, or `None` when `s` is out of window or not of the
    /// color.
    pub fn cluster_of(&self, s: Site) -> Option<ClusterId> {
        let i = self.window.index_of(s)?;
        match self.label[i] {
            UNLABELED => None,
            id => Some(id),
        }
    }

    pub fn clusters(&self) -> &[ClusterInfo] {
        &self.clusters
    }

    pub fn cluster(&self, id: ClusterId) -> &ClusterInfo {
        &self.clusters[id as usize]
    }

    /// Total number of occupied sites.
    pub fn occupied_sites(&self) -> usize {
        self.clusters.iter().map(|c| c.size as usize).sum()
    }
}
