//! Spin configurations and their Gibbs dynamics: the Hamiltonian with an
//! external field and boundary spins, single-site heat-bath updates in
//! checkerboard order, and a ghost-field Wolff cluster accelerator.
//!
//! The energy of a configuration `sigma` on a finite region `V` with field `h`
//! and boundary spins `omega` is
//!
//! ```text
//! H(sigma) = -(1/2) * sum over ordered pairs x, y in V with |x-y|_1 = 1 of
//!              sigma(x) * sigma(y)
//!            - sum over x in V of (h + g(x)) * sigma(x)
//! ```
//!
//! where `g(x)` is the sum of boundary spins just outside `V` adjacent to `x`
//! (zero for free boundaries, supplied by wraparound neighbors on a torus).
//! The Gibbs weight at temperature `T` is `exp(-H / T)`; the Boltzmann-like
//! constant and the coupling are fixed to 1, so the inverse temperature is
//! `beta = 1/T`.
//!
//! The conditional law of a single spin given its neighborhood depends only on
//! `f = (sum of neighboring spins, boundary included) + h`:
//! `P(plus) = e^(beta f) / (e^(beta f) + e^(-beta f))`. Heat-bath sweeps
//! resample every site from this law in checkerboard order (even parity of
//! `x + y` first, then odd, row-major within a parity class), which is a
//! deterministic order and is safe to parallelize within a parity class on
//! bipartite regions.

use std::fmt;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::lattice::{Rect, Site, SiteSet, Torus};

/// An Ising spin, stored as one byte with values +1 / -1.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
#[repr(i8)]
pub enum Spin {
    Minus = -1,
    Plus = 1,
}

impl Spin {
    #[inline]
    pub fn as_int(self) -> i32 {
        self as i8 as i32
    }

    #[inline]
    pub fn flipped(self) -> Spin {
        match self {
            Spin::Plus => Spin::Minus,
            Spin::Minus => Spin::Plus,
        }
    }

    #[inline]
    pub fn is_plus(self) -> bool {
        matches!(self, Spin::Plus)
    }
}

impl fmt::Display for Spin {
    /// The word used in event descriptions and reports.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Spin::Plus => "plus",
            Spin::Minus => "minus",
        })
    }
}

/// Boundary spins for a non-periodic region.
#[derive(Clone, Debug, PartialEq)]
pub enum Boundary {
    /// No boundary term.
    Free,
    /// Every site just outside the region carries spin +1.
    Plus,
    /// Every site just outside the region carries spin -1.
    Minus,
    /// Explicit spins at selected outside sites; unlisted sites contribute
    /// nothing (free).
    Fixed(Vec<(Site, Spin)>),
}

/// The finite domain a configuration lives on.
///
/// Periodic boundary conditions are represented by the [`Region::Torus`]
/// variant; `Window` and `Masked` regions take a [`Boundary`].
#[derive(Clone, Debug, PartialEq)]
pub enum Region {
    /// All sites of a rectangle.
    Window(Rect),
    /// A periodic torus; neighbors wrap around.
    Torus(Torus),
    /// An arbitrary site set (e.g. an annulus), addressed through its
    /// bounding rectangle.
    Masked(SiteSet),
}

impl Region {
    /// Bounding rectangle used for dense storage.
    pub fn storage_rect(&self) -> Rect {
        match self {
            Region::Window(r) => *r,
            Region::Torus(t) => t.rect(),
            Region::Masked(m) => m.bounding_rect(),
        }
    }

    pub fn contains(&self, s: Site) -> bool {
        match self {
            Region::Window(r) => r.contains(s),
            Region::Torus(t) => t.rect().contains(s),
            Region::Masked(m) => m.contains(s),
        }
    }

    /// Number of sites carrying spins.
    pub fn site_count(&self) -> usize {
        match self {
            Region::Window(r) => r.len(),
            Region::Torus(t) => t.site_count(),
            Region::Masked(m) => m.len(),
        }
    }

    /// Member sites in row-major order.
    pub fn sites(&self) -> Vec<Site> {
        match self {
            Region::Window(r) => r.sites().collect(),
            Region::Torus(t) => t.rect().sites().collect(),
            Region::Masked(m) => m.iter().collect(),
        }
    }

    /// Is this a periodic domain?
    pub fn is_periodic(&self) -> bool {
        matches!(self, Region::Torus(_))
    }
}

/// Errors from building or updating configurations.
#[derive(Debug, Error, PartialEq)]
pub enum GibbsError {
    #[error("temperature must be positive, got {0}")]
    NonPositiveTemperature(f64),
    #[error("plus-density must lie in [0, 1], got {0}")]
    DensityOutOfRange(f64),
    #[error("site {0:?} lies outside the region")]
    OutsideRegion(Site),
}

/// The sampling model: a finite-temperature Ising measure or its
/// infinite-temperature limit, an independent Bernoulli field.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Model {
    Ising { temperature: f64, field: f64 },
    Bernoulli { p: f64 },
}

impl Model {
    pub fn validate(&self) -> Result<(), GibbsError> {
        match *self {
            Model::Ising { temperature, .. } if temperature <= 0.0 => {
                Err(GibbsError::NonPositiveTemperature(temperature))
            }
            Model::Bernoulli { p } if !(0.0..=1.0).contains(&p) => {
                Err(GibbsError::DensityOutOfRange(p))
            }
            _ => Ok(()),
        }
    }

    /// Inverse temperature `1/T` for Ising models, 0 for Bernoulli fields.
    pub fn beta(&self) -> f64 {
        match *self {
            Model::Ising { temperature, .. } => 1.0 / temperature,
            Model::Bernoulli { .. } => 0.0,
        }
    }
}

/// Zero-field critical temperature of the two-dimensional Ising model,
/// `2 / ln(1 + sqrt 2)`. This is an externally established reference value; it
/// is used to position simulations on the temperature axis and is never
/// asserted against by any correctness check in this crate.
pub fn critical_temperature_zero_field() -> f64 {
    2.0 / (1.0 + std::f64::consts::SQRT_2).ln()
}

/// The interpolated external-field schedule between a critical-field estimate
/// and a target field.
///
/// When the target lies above the estimate the schedule runs from the
/// estimate up to the target; otherwise it runs from the target up to the
/// estimate. In both cases the field increases affinely in `t` at the
/// constant rate `|target − critical|`, which is what makes the exact
/// derivative identity checked by the enumeration oracle hold with that
/// prefactor.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FieldSchedule {
    /// Target external field `h`.
    pub target: f64,
    /// Critical-field estimate.
    pub critical: f64,
}

impl FieldSchedule {
    /// The external field at interpolation parameter `t`.
    pub fn field_at(&self, t: f64) -> f64 {
        if self.target > self.critical {
            self.critical + t * (self.target - self.critical)
        } else {
            self.target + t * (self.critical - self.target)
        }
    }

    /// `d field / dt`, constant in `t`: `|target − critical|`.
    pub fn rate(&self) -> f64 {
        (self.target - self.critical).abs()
    }
}

/// A spin configuration on a finite region, with enough cached structure to
/// evaluate energies and run Gibbs updates.
///
/// Spins are stored densely over the region's storage rectangle in row-major
/// order. For masked regions the slots outside the mask exist but are never
/// read. The per-site boundary contribution `g(x)` is precomputed at
/// construction (it does not depend on the spins).
#[derive(Clone, Debug, PartialEq)]
pub struct SpinConfig {
    region: Region,
    boundary: Boundary,
    spins: Vec<Spin>,
    /// `g(x)`: sum of fixed boundary spins adjacent to each site (0 on tori).
    boundary_field: Vec<i32>,
}

impl SpinConfig {
    /// All-minus configuration on a region with the given boundary.
    ///
    /// For [`Region::Torus`] the boundary must be [`Boundary::Free`]; a torus
    /// has no outside.
    pub fn new(region: Region, boundary: Boundary) -> Self {
        let rect = region.storage_rect();
        let n = rect.len();
        debug_assert!(
            !(region.is_periodic() && !matches!(boundary, Boundary::Free)),
            "a torus has no boundary spins"
        );
        let mut cfg = SpinConfig {
            region,
            boundary,
            spins: vec![Spin::Minus; n],
            boundary_field: vec![0; n],
        };
        cfg.rebuild_boundary_field();
        cfg
    }

    fn rebuild_boundary_field(&mut self) {
        let rect = self.region.storage_rect();
        if self.region.is_periodic() {
            return; // no outside sites
        }
        let fixed: Option<std::collections::HashMap<Site, Spin>> = match &self.boundary {
            Boundary::Fixed(list) => Some(list.iter().copied().collect()),
            _ => None,
        };
        for s in self.region.sites() {
            let mut g = 0;
            for nb in s.l1_neighbors() {
                if self.region.contains(nb) {
                    continue;
                }
                g += match &self.boundary {
                    Boundary::Free => 0,
                    Boundary::Plus => 1,
                    Boundary::Minus => -1,
                    Boundary::Fixed(_) => fixed
                        .as_ref()
                        .and_then(|m| m.get(&nb))
                        .map_or(0, |sp| sp.as_int()),
                };
            }
            self.boundary_field[rect.index_unchecked(s)] = g;
        }
    }

    pub fn region(&self) -> &Region {
        &self.region
    }

    pub fn boundary(&self) -> &Boundary {
        &self.boundary
    }

    /// Spin at a site, or `None` outside the region. Torus coordinates are
    /// wrapped first.
    #[inline]
    pub fn spin(&self, s: Site) -> Option<Spin> {
        match &self.region {
            Region::Window(r) => r.index_of(s).map(|i| self.spins[i]),
            Region::Torus(t) => Some(self.spins[t.index_of(s)]),
            Region::Masked(m) => {
                if m.contains(s) {
                    Some(self.spins[m.bounding_rect().index_unchecked(s)])
                } else {
                    None
                }
            }
        }
    }

    /// Set the spin at a site inside the region.
    pub fn set_spin(&mut self, s: Site, v: Spin) -> Result<(), GibbsError> {
        let i = self.dense_index(s).ok_or(GibbsError::OutsideRegion(s))?;
        self.spins[i] = v;
        Ok(())
    }

    /// Flip the spin at a site (the involution behind pivotality).
    pub fn flip(&mut self, s: Site) -> Result<(), GibbsError> {
        let i = self.dense_index(s).ok_or(GibbsError::OutsideRegion(s))?;
        self.spins[i] = self.spins[i].flipped();
        Ok(())
    }

    #[inline]
    fn dense_index(&self, s: Site) -> Option<usize> {
        match &self.region {
            Region::Window(r) => r.index_of(s),
            Region::Torus(t) => Some(t.index_of(s)),
            Region::Masked(m) => {
                if m.contains(s) {
                    Some(m.bounding_rect().index_unchecked(s))
                } else {
                    None
                }
            }
        }
    }

    /// Fill every site with the same spin.
    pub fn fill(&mut self, v: Spin) {
        match &self.region {
            Region::Masked(m) => {
                let rect = m.bounding_rect();
                let sites: Vec<usize> = m.iter().map(|s| rect.index_unchecked(s)).collect();
                for i in sites {
                    self.spins[i] = v;
                }
            }
            _ => self.spins.fill(v),
        }
    }

    /// Fill with independent spins, `P(plus) = p`, drawing one uniform per
    /// site in row-major order.
    pub fn fill_bernoulli(&mut self, p: f64, rng: &mut ChaCha8Rng) {
        for s in self.region.sites() {
            let i = self.dense_index(s).expect("region site");
            self.spins[i] = if rng.random::<f64>() < p { Spin::Plus } else { Spin::Minus };
        }
    }

    /// `(sum of neighbor spins inside and outside the region) + h` at `s`:
    /// the local field entering the single-site conditional.
    pub fn local_field(&self, s: Site, h: f64) -> f64 {
        let mut nb_sum = 0i32;
        match &self.region {
            Region::Torus(t) => {
                for nb in t.l1_neighbors(s) {
                    nb_sum += self.spins[t.index_of(nb)].as_int();
                }
            }
            _ => {
                for nb in s.l1_neighbors() {
                    if let Some(sp) = self.spin(nb) {
                        nb_sum += sp.as_int();
                    }
                }
            }
        }
        let i = self.dense_index(s).expect("local_field at region site");
        nb_sum as f64 + self.boundary_field[i] as f64 + h
    }

    /// The three integer parts of the energy: (ordered-pair edge sum
    /// `sum sigma sigma`, spin sum `sum sigma`, boundary sum
    /// `sum g(x) sigma(x)`). Exact integers; the Hamiltonian and the
    /// enumeration oracle assemble floats from these.
    pub fn energy_parts(&self) -> (i64, i64, i64) {
        let mut edge = 0i64;
        let mut spin_sum = 0i64;
        let mut bnd = 0i64;
        match &self.region {
            Region::Torus(t) => {
                for s in t.rect().sites() {
                    let v = self.spins[t.index_of(s)].as_int() as i64;
                    spin_sum += v;
                    for nb in t.l1_neighbors(s) {
                        edge += v * self.spins[t.index_of(nb)].as_int() as i64;
                    }
                }
            }
            _ => {
                let rect = self.region.storage_rect();
                for s in self.region.sites() {
                    let i = rect.index_unchecked(s);
                    let v = self.spins[i].as_int() as i64;
                    spin_sum += v;
                    bnd += v * self.boundary_field[i] as i64;
                    for nb in s.l1_neighbors() {
                        if let Some(sp) = self.spin(nb) {
                            edge += v * sp.as_int() as i64;
                        }
                    }
                }
            }
        }
        (edge, spin_sum, bnd)
    }

    /// Number of sites in the region.
    pub fn site_count(&self) -> usize {
        self.region.site_count()
    }

    /// The fixed boundary contribution `g(s)`: the sum of outside-neighbor
    /// spins adjacent to `s` (always 0 on a torus).
    pub(crate) fn boundary_contribution(&self, s: Site) -> i32 {
        let i = self.dense_index(s).expect("boundary contribution at region site");
        self.boundary_field[i]
    }

    /// Raw spins in storage order (test support; storage covers the bounding
    /// rectangle, so only meaningful for window and torus regions).
    pub fn raw_spins(&self) -> &[Spin] {
        &self.spins
    }
}

/// Energy of a configuration under external field `h`; see the module header
/// for the formula. Exact up to one float multiplication.
pub fn hamiltonian(config: &SpinConfig, h: f64) -> f64 {
    let (edge, spin_sum, bnd) = config.energy_parts();
    -0.5 * edge as f64 - h * spin_sum as f64 - bnd as f64
}

/// `P(spin = plus)` given the local field `f` (neighbor spins plus `h`):
/// `e^(beta f) / (e^(beta f) + e^(-beta f))`, evaluated stably.
#[inline]
pub fn heat_bath_conditional(local_field: f64, beta: f64) -> f64 {
    1.0 / (1.0 + (-2.0 * beta * local_field).exp())
}

/// One full heat-bath sweep in checkerboard order: all sites with even
/// `x + y` parity (row-major), then all odd ones. One uniform draw per site.
pub fn heat_bath_sweep(config: &mut SpinConfig, beta: f64, h: f64, rng: &mut ChaCha8Rng) {
    let sites = config.region.sites();
    for parity in [0, 1] {
        for &s in &sites {
            if (s.x + s.y).rem_euclid(2) != parity {
                continue;
            }
            let f = config.local_field(s, h);
            let p_plus = heat_bath_conditional(f, beta);
            let v = if rng.random::<f64>() < p_plus { Spin::Plus } else { Spin::Minus };
            config.set_spin(s, v).expect("sweep site inside region");
        }
    }
}

/// One ghost-field Wolff cluster update. Returns the number of real sites
/// flipped.
///
/// The external field and any fixed boundary spins are folded into one ghost
/// site with fixed spin +1, coupled to each real site `x` with signed strength
/// `w(x) = h + g(x)`. On the extended graph the usual Wolff rules apply: a
/// same-alignment bond of strength `J` activates with probability
/// `1 - exp(-2 beta |J|)`, where alignment means `sigma(x) sigma(y) sign(J) = +1`.
/// If the grown cluster contains the ghost, the complement of its real part is
/// flipped instead (the extended model is invariant under a global flip, and
/// the target measure is the extended one conditioned on the ghost being +1).
pub fn wolff_update(config: &mut SpinConfig, beta: f64, h: f64, rng: &mut ChaCha8Rng) -> usize {
    let sites = config.region.sites();
    let n = sites.len();
    if n == 0 {
        return 0;
    }
    let rect = config.region.storage_rect();
    let p_link = 1.0 - (-2.0 * beta).exp();

    // Dense scratch indexed like the storage rect.
    let mut in_cluster = vec![false; rect.len()];
    let dense = |s: Site, region: &Region| -> usize {
        match region {
            Region::Torus(t) => t.index_of(s),
            _ => rect.index_unchecked(s),
        }
    };

    let seed = sites[rng.random_range(0..n)];
    let mut stack = vec![seed];
    in_cluster[dense(seed, config.region())] = true;
    let mut cluster = vec![seed];
    let mut ghost_in_cluster = false;

    while let Some(s) = stack.pop() {
        let s_spin = config.spin(s).expect("cluster site inside region");
        // Lattice bonds (coupling +1): same spin required.
        let neighbors: Vec<Site> = match config.region() {
            Region::Torus(t) => t.l1_neighbors(s).to_vec(),
            _ => s.l1_neighbors().to_vec(),
        };
        for nb in neighbors {
            if !config.region().contains(nb) {
                continue;
            }
            let j = dense(nb, config.region());
            if in_cluster[j] {
                continue;
            }
            if config.spin(nb) == Some(s_spin) && rng.random::<f64>() < p_link {
                in_cluster[j] = true;
                stack.push(nb);
                cluster.push(nb);
            }
        }
        // Ghost bond of strength w(s); alignment sigma(s) * (+1) * sign(w).
        if !ghost_in_cluster {
            let w = h + config.boundary_field[dense(s, config.region())] as f64;
            if w != 0.0 && s_spin.as_int() as f64 * w > 0.0 {
                let p_ghost = 1.0 - (-2.0 * beta * w.abs()).exp();
                if rng.random::<f64>() < p_ghost {
                    ghost_in_cluster = true;
                    // The ghost neighbors every real site: grow through it.
                    for &t in &sites {
                        let k = dense(t, config.region());
                        if in_cluster[k] {
                            continue;
                        }
                        let wt = h + config.boundary_field[k] as f64;
                        let t_spin = config.spin(t).expect("region site");
                        if wt != 0.0 && t_spin.as_int() as f64 * wt > 0.0 {
                            let p = 1.0 - (-2.0 * beta * wt.abs()).exp();
                            if rng.random::<f64>() < p {
                                in_cluster[k] = true;
                                stack.push(t);
                                cluster.push(t);
                            }
                        }
                    }
                }
            }
        }
    }

    if ghost_in_cluster {
        // Flip the complement so the ghost keeps its +1 orientation.
        let mut flipped = 0;
        for &s in &sites {
            if !in_cluster[dense(s, config.region())] {
                config.flip(s).expect("region site");
                flipped += 1;
            }
        }
        flipped
    } else {
        for &s in &cluster {
            config.flip(s).expect("region site");
        }
        cluster.len()
    }
}

/// Deterministic per-sample generator: a fixed ChaCha8 keyed by the base seed
/// with the sample index as the stream. Every estimator derives its
/// randomness this way, which makes results independent of how samples are
/// distributed over threads.
pub fn sample_rng(base_seed: u64, sample_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
    rng.set_stream(sample_index);
    rng
}

/// A single Markov chain for an Ising model on a fixed region.
///
/// The chain starts from an infinite-temperature (independent fair) start and
/// advances by heat-bath sweeps; [`IsingChain::with_wolff`] interleaves one
/// Wolff cluster update per sweep as an accelerator.
pub struct IsingChain {
    config: SpinConfig,
    beta: f64,
    h: f64,
    rng: ChaCha8Rng,
    use_wolff: bool,
}

impl IsingChain {
    /// New chain; `rng` should come from [`sample_rng`] so runs are
    /// reproducible.
    pub fn new(
        region: Region,
        boundary: Boundary,
        temperature: f64,
        field: f64,
        mut rng: ChaCha8Rng,
    ) -> Result<Self, GibbsError> {
        Model::Ising { temperature, field }.validate()?;
        let mut config = SpinConfig::new(region, boundary);
        config.fill_bernoulli(0.5, &mut rng);
        Ok(IsingChain {
            config,
            beta: 1.0 / temperature,
            h: field,
            rng,
            use_wolff: false,
        })
    }

    /// Interleave a Wolff cluster update into every sweep.
    pub fn with_wolff(mut self) -> Self {
        self.use_wolff = true;
        self
    }

    /// Advance by `n` sweeps.
    pub fn run_sweeps(&mut self, n: u64) {
        for _ in 0..n {
            heat_bath_sweep(&mut self.config, self.beta, self.h, &mut self.rng);
            if self.use_wolff {
                wolff_update(&mut self.config, self.beta, self.h, &mut self.rng);
            }
        }
    }

    pub fn config(&self) -> &SpinConfig {
        &self.config
    }

    /// Consume the chain, keeping its final state.
    pub fn into_config(self) -> SpinConfig {
        self.config
    }

    /// Default burn-in for a region: 50 sweeps per unit of side length.
    pub fn default_burn_in(region: &Region) -> u64 {
        let rect = region.storage_rect();
        50 * rect.width().max(rect.height()) as u64
    }
}
