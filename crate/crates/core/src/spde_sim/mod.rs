//! Monte Carlo for the mild form of the fractional stochastic heat equation
//! in `d = 1`, `α = 2`:
//!
//! ```text
//! u_m(x_j) = (G_{t_m} * u0)(x_j) + Σ_{l<m} Σ_k K^{(m-l)}_{j-k} σ(u_l(x_k)) ΔW_{l,k}
//! ```
//!
//! with `ΔW_{l,k}` independent `N(0, dt dx)` and `σ` evaluated one level
//! back, so level `m` only sees noise of levels `< m`.
//!
//! The noise kernel at lag `L` integrates the singular `s → t` behaviour
//! exactly in `L²`: it is `G` sampled at an effective time `τ_L` with
//! `‖G_{τ_L}‖² = w_L / dt`, rescaled so that on the lattice
//!
//! ```text
//! dt dx Σ_k (K^{(L)}_k)² = w_L = ∫_{(L-1)dt}^{L dt} ‖G_s‖² ds
//!                        = C* dt^{1-θ} (L^{1-θ} - (L-1)^{1-θ}) / (1-θ),   θ = β/2.
//! ```
//!
//! For `σ(u) = λu` and constant `u0` on a periodic grid this makes the
//! ensemble second moment solve a product-integration discretization of
//! the renewal equation for `E|u_t(x)|²`.
//!
//! The history sum is evaluated in Fourier space, one transform per level
//! and replica. Periodic grids need a power-of-two `nx`; zero-padded grids
//! use a transform of length at least `2 nx - 1`.

mod bounds;
mod estimate;

pub use bounds::*;
pub use estimate::*;

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{domain, Error, Result};
use crate::fft::Fft;
use crate::kernel::{build_kernel_rows, c_star, GreenEvaluator, ModelParams};
use crate::stats::{compensated_sum, NeumaierSum};

/// Largest kernel mass allowed outside the half-width of the domain at `t_max`.
pub const DOMAIN_TAIL_TOL: f64 = 1e-3;

/// Replicas per work unit. Results are merged unit by unit in index order,
/// which keeps sums independent of how units are scheduled.
pub const CHUNK: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    /// Field and noise vanish outside `[x_min, x_max]`.
    ZeroPadded,
    Periodic,
}

/// Cell-centred space grid and uniform time levels `t_m = m dt`, `m = 0..=nt`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpaceTimeGrid {
    pub x_min: f64,
    pub x_max: f64,
    pub nx: usize,
    pub t_max: f64,
    pub nt: usize,
    pub boundary: Boundary,
}

impl SpaceTimeGrid {
    pub fn new(x_min: f64, x_max: f64, nx: usize, t_max: f64, nt: usize, boundary: Boundary) -> Result<Self> {
        let g = Self {
            x_min,
            x_max,
            nx,
            t_max,
            nt,
            boundary,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.x_min.is_finite() && self.x_max.is_finite() && self.x_max > self.x_min) {
            return Err(domain(format!("need finite x_min < x_max, got [{}, {}]", self.x_min, self.x_max)));
        }
        if self.nx < 16 {
            return Err(domain(format!("nx must be at least 16, got {}", self.nx)));
        }
        if !(self.t_max > 0.0) || !self.t_max.is_finite() {
            return Err(domain(format!("t_max must be positive, got {}", self.t_max)));
        }
        if self.nt < 8 {
            return Err(domain(format!("nt must be at least 8, got {}", self.nt)));
        }
        if self.boundary == Boundary::Periodic && !self.nx.is_power_of_two() {
            return Err(domain(format!("periodic grids need a power-of-two nx, got {}", self.nx)));
        }
        Ok(())
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / self.nx as f64
    }

    pub fn dt(&self) -> f64 {
        self.t_max / self.nt as f64
    }

    /// Centre of cell `j`.
    pub fn x(&self, j: usize) -> f64 {
        self.x_min + (j as f64 + 0.5) * self.dx()
    }

    pub fn t(&self, m: usize) -> f64 {
        m as f64 * self.dt()
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.nx).map(|j| self.x(j)).collect()
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.nt).map(|m| self.t(m)).collect()
    }

    /// Cell whose centre is closest to `x`.
    pub fn nearest_cell(&self, x: f64) -> usize {
        let j = ((x - self.x_min) / self.dx() - 0.5).round();
        (j.max(0.0) as usize).min(self.nx - 1)
    }

    fn fft_len(&self) -> usize {
        match self.boundary {
            Boundary::Periodic => self.nx,
            Boundary::ZeroPadded => (2 * self.nx - 1).next_power_of_two(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SigmaKind {
    /// `σ(u) = λu`.
    Linear { lambda: f64 },
    /// Piecewise-linear interpolation of `(knots, values)`, extended
    /// linearly with the end slopes.
    Sampled { knots: Vec<f64>, values: Vec<f64> },
}

/// The noise coefficient `σ` with its Lipschitz constant and cone constant
/// `L_σ = inf_z |σ(z)/z|`.
#[derive(Debug, Clone, PartialEq)]
pub struct NonlinearitySpec {
    pub kind: SigmaKind,
    pub lip_sigma: f64,
    pub l_sigma: f64,
}

impl NonlinearitySpec {
    pub fn linear(lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(domain(format!("lambda must be finite and nonnegative, got {lambda}")));
        }
        Ok(Self {
            kind: SigmaKind::Linear { lambda },
            lip_sigma: lambda,
            l_sigma: lambda,
        })
    }

    pub fn zero() -> Self {
        Self {
            kind: SigmaKind::Linear { lambda: 0.0 },
            lip_sigma: 0.0,
            l_sigma: 0.0,
        }
    }

    /// Sampled map; `lip_sigma` and `l_sigma` are computed exactly for the
    /// interpolant.
    pub fn sampled(knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        check_samples(&knots, &values)?;
        let n = knots.len();
        let slopes: Vec<f64> = (0..n - 1)
            .map(|i| (values[i + 1] - values[i]) / (knots[i + 1] - knots[i]))
            .collect();
        let lip = slopes.iter().fold(0.0f64, |m, s| m.max(s.abs()));
        // σ(z)/z is monotone on each linear piece, so the infimum is taken at
        // a knot or in the limit |z| → ∞
        let mut l = slopes[0].abs().min(slopes[n - 2].abs());
        for (z, v) in knots.iter().zip(&values) {
            if *z != 0.0 {
                l = l.min((v / z).abs());
            }
        }
        Ok(Self {
            kind: SigmaKind::Sampled { knots, values },
            lip_sigma: lip,
            l_sigma: l,
        })
    }

    pub fn validate(&self) -> Result<()> {
        match &self.kind {
            SigmaKind::Linear { lambda } => {
                if !(*lambda >= 0.0) || !lambda.is_finite() {
                    return Err(domain(format!("lambda must be finite and nonnegative, got {lambda}")));
                }
                if self.lip_sigma < *lambda {
                    return Err(domain("lip_sigma is below lambda"));
                }
            }
            SigmaKind::Sampled { knots, values } => check_samples(knots, values)?,
        }
        if !(self.l_sigma >= 0.0 && self.lip_sigma.is_finite()) {
            return Err(domain("Lipschitz and cone constants must be finite and nonnegative"));
        }
        if self.l_sigma > self.lip_sigma {
            return Err(domain(format!(
                "L_sigma = {} exceeds Lip_sigma = {}",
                self.l_sigma, self.lip_sigma
            )));
        }
        Ok(())
    }

    pub fn eval(&self, u: f64) -> f64 {
        match &self.kind {
            SigmaKind::Linear { lambda } => lambda * u,
            SigmaKind::Sampled { knots, values } => {
                let n = knots.len();
                let k = knots.partition_point(|&z| z <= u).clamp(1, n - 1);
                let (z0, z1) = (knots[k - 1], knots[k]);
                values[k - 1] + (values[k] - values[k - 1]) * (u - z0) / (z1 - z0)
            }
        }
    }

    pub fn vanishes_at_zero(&self) -> bool {
        self.eval(0.0) == 0.0
    }

    pub fn is_zero(&self) -> bool {
        match &self.kind {
            SigmaKind::Linear { lambda } => *lambda == 0.0,
            SigmaKind::Sampled { values, .. } => values.iter().all(|v| *v == 0.0),
        }
    }
}

fn check_samples(knots: &[f64], values: &[f64]) -> Result<()> {
    if knots.len() < 2 || knots.len() != values.len() {
        return Err(domain("sampled sigma needs at least two knots and matching values"));
    }
    if knots.iter().chain(values).any(|v| !v.is_finite()) {
        return Err(domain("sampled sigma must be finite"));
    }
    if knots.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(domain("sampled sigma knots must be strictly increasing"));
    }
    Ok(())
}

/// Everything that determines an ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationSpec {
    pub params: ModelParams,
    pub grid: SpaceTimeGrid,
    /// Initial field at the cell centres.
    pub u0: Vec<f64>,
    pub sigma: NonlinearitySpec,
    pub seed: u64,
    pub replicas: usize,
    /// Cells whose values are kept for every replica and level.
    pub record_cells: Vec<usize>,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of replica `r`: a 64-bit mix of `(seed, r)`.
pub fn replica_seed(seed: u64, replica: u64) -> u64 {
    splitmix64(splitmix64(seed) ^ replica.wrapping_mul(0xd1b5_4a32_d192_ed03))
}

pub fn replica_rng(seed: u64, replica: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(replica_seed(seed, replica))
}

/// `w_L = C* dt^{1-θ} (L^{1-θ} - (L-1)^{1-θ}) / (1-θ)`, `L = 1..=n`.
pub fn noise_lag_weights(c_star: f64, theta: f64, dt: f64, n: usize) -> Vec<f64> {
    let e = 1.0 - theta;
    (1..=n)
        .map(|l| {
            let l = l as f64;
            c_star * dt.powf(e) * (l.powf(e) - (l - 1.0).powf(e)) / e
        })
        .collect()
}

/// Even kernel samples `row[k] = g(k dx)`, `k = 0..=nx`, laid out for a
/// length-`n` circular convolution.
fn circular_layout(row: &[f64], grid: &SpaceTimeGrid, n: usize) -> Vec<f64> {
    let nx = grid.nx;
    let mut out = vec![0.0; n];
    match grid.boundary {
        Boundary::Periodic => {
            // the two nearest images; further ones lie beyond the table tail
            for (k, o) in out.iter_mut().enumerate() {
                *o = row[k] + row[nx - k];
            }
        }
        Boundary::ZeroPadded => {
            out[0] = row[0];
            for k in 1..nx {
                out[k] = row[k];
                out[n - k] = row[k];
            }
        }
    }
    out
}

/// Prepared simulation: deterministic part, noise kernel spectra and FFT
/// plan. Shared read-only between workers.
#[derive(Debug, Clone)]
pub struct Simulator {
    spec: SimulationSpec,
    /// `[level][cell]`, level 0 is `u0`.
    det: Vec<f64>,
    /// `[lag - 1][frequency]`, real because the kernels are even.
    noise_hat: Vec<f64>,
    fft: Fft,
    noise_sd: f64,
    c_star: f64,
}

impl Simulator {
    pub fn new(spec: &SimulationSpec) -> Result<Self> {
        let p = spec.params;
        if p.d != 1 || p.alpha != 2.0 {
            return Err(Error::Unsupported(format!(
                "the simulator handles d = 1, alpha = 2; got d = {}, alpha = {}",
                p.d, p.alpha
            )));
        }
        p.check_simulation()?;
        let g = spec.grid;
        g.validate()?;
        spec.sigma.validate()?;
        if spec.u0.len() != g.nx {
            return Err(domain(format!("u0 has {} samples, grid has {} cells", spec.u0.len(), g.nx)));
        }
        if spec.u0.iter().any(|v| !v.is_finite()) {
            return Err(domain("u0 must be finite"));
        }
        if spec.replicas == 0 {
            return Err(domain("need at least one replica"));
        }
        if let Some(j) = spec.record_cells.iter().find(|&&j| j >= g.nx) {
            return Err(domain(format!("recorded cell {j} is outside the grid")));
        }
        let (dt, dx, nx, nt) = (g.dt(), g.dx(), g.nx, g.nt);

        let ev = GreenEvaluator::new(&p)?;
        let half = 0.5 * (g.x_max - g.x_min);
        let tail = ev.tail_mass(g.t_max, half)?;
        if tail > DOMAIN_TAIL_TOL {
            return Err(Error::Truncation(format!(
                "kernel mass {tail:.3e} beyond |x| = {half} at t_max exceeds {DOMAIN_TAIL_TOL:.0e}; widen the domain"
            )));
        }

        let levels: Vec<f64> = (1..=nt).map(|m| g.t(m)).collect();
        let det_rows = build_kernel_rows(&p, dt, dx, nx, &levels)?;
        let mut det = spec.u0.clone();
        for m in 1..=nt {
            det.extend(deterministic_level(det_rows.row(m), &g, &spec.u0));
        }

        let cs = c_star(&p)?;
        let theta = p.theta();
        let w = noise_lag_weights(cs, theta, dt, nt);
        let taus: Vec<f64> = w.iter().map(|wl| (wl / (cs * dt)).powf(-1.0 / theta)).collect();
        let noise_rows = build_kernel_rows(&p, dt, dx, nx, &taus)?;
        let n = g.fft_len();
        let fft = Fft::new(n)?;
        let mut noise_hat = Vec::with_capacity(nt * n);
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        for (l, wl) in w.iter().enumerate() {
            let k = circular_layout(noise_rows.row(l + 1), &g, n);
            let sq = compensated_sum(k.iter().map(|v| v * v));
            let scale = (wl / (dt * dx * sq)).sqrt();
            for (b, v) in buf.iter_mut().zip(&k) {
                *b = Complex64::new(scale * v, 0.0);
            }
            fft.forward(&mut buf);
            noise_hat.extend(buf.iter().map(|z| z.re));
        }
        Ok(Self {
            spec: spec.clone(),
            det,
            noise_hat,
            fft,
            noise_sd: (dt * dx).sqrt(),
            c_star: cs,
        })
    }

    pub fn spec(&self) -> &SimulationSpec {
        &self.spec
    }

    pub fn c_star(&self) -> f64 {
        self.c_star
    }

    /// Noise-free part `G_{t_m} * u0` at level `m`.
    pub fn deterministic(&self, m: usize) -> &[f64] {
        let nx = self.spec.grid.nx;
        &self.det[m * nx..(m + 1) * nx]
    }

    pub fn n_chunks(&self) -> usize {
        self.spec.replicas.div_ceil(CHUNK)
    }

    /// Full field of replica `r` into `out`, laid out `[level][cell]`.
    pub fn run_replica(&self, r: usize, out: &mut [f64]) -> Result<()> {
        let g = &self.spec.grid;
        let (nx, nt) = (g.nx, g.nt);
        let n = self.fft.len();
        assert_eq!(out.len(), (nt + 1) * nx, "field buffer has the wrong size");
        let mut rng = replica_rng(self.spec.seed, r as u64);
        out[..nx].copy_from_slice(&self.spec.u0);
        let zero = Complex64::new(0.0, 0.0);
        let mut history = vec![zero; nt * n];
        let mut acc = vec![zero; n];
        for m in 1..=nt {
            let l = m - 1;
            let xi = &mut history[l * n..(l + 1) * n];
            let prev = &out[l * nx..m * nx];
            for (x, &u) in xi.iter_mut().zip(prev) {
                let z: f64 = StandardNormal.sample(&mut rng);
                *x = Complex64::new(self.spec.sigma.eval(u) * z * self.noise_sd, 0.0);
            }
            self.fft.forward(xi);
            acc.fill(zero);
            for l in 0..m {
                let kh = &self.noise_hat[(m - l - 1) * n..(m - l) * n];
                let xh = &history[l * n..(l + 1) * n];
                for ((a, x), k) in acc.iter_mut().zip(xh).zip(kh) {
                    *a += x * k;
                }
            }
            self.fft.inverse(&mut acc);
            let det = self.deterministic(m);
            let cur = &mut out[m * nx..(m + 1) * nx];
            for ((u, d), a) in cur.iter_mut().zip(det).zip(&acc) {
                *u = d + a.re;
            }
            if cur.iter().any(|v| !v.is_finite()) {
                return Err(Error::Divergence(format!(
                    "replica {r} produced non-finite values at t = {}",
                    g.t(m)
                )));
            }
        }
        Ok(())
    }

    /// Replicas `chunk * CHUNK ..` up to [`CHUNK`] of them.
    pub fn run_chunk(&self, chunk: usize) -> Result<ChunkResult> {
        let g = &self.spec.grid;
        let (nx, levels) = (g.nx, g.nt + 1);
        let start = chunk * CHUNK;
        let end = (start + CHUNK).min(self.spec.replicas);
        if start >= end {
            return Err(domain(format!("chunk {chunk} is out of range")));
        }
        let cells = &self.spec.record_cells;
        let mut field = vec![0.0; levels * nx];
        let mut recorded = Vec::with_capacity((end - start) * levels * cells.len());
        let mut energy = Vec::with_capacity((end - start) * levels);
        let mut sums = vec![0.0; POWERS.len() * levels * nx];
        let dx = g.dx();
        for r in start..end {
            self.run_replica(r, &mut field)?;
            for m in 0..levels {
                let row = &field[m * nx..(m + 1) * nx];
                recorded.extend(cells.iter().map(|&j| row[j]));
                energy.push(dx * compensated_sum(row.iter().map(|u| u * u)));
            }
            for (k, &pw) in POWERS.iter().enumerate() {
                let s = &mut sums[k * levels * nx..(k + 1) * levels * nx];
                for (acc, u) in s.iter_mut().zip(&field) {
                    *acc += u.powi(pw);
                }
            }
        }
        Ok(ChunkResult {
            chunk,
            count: end - start,
            recorded,
            energy,
            sums,
        })
    }

    pub fn builder(&self) -> EnsembleBuilder<'_> {
        let g = &self.spec.grid;
        EnsembleBuilder {
            sim: self,
            next: 0,
            recorded: Vec::new(),
            energy: Vec::new(),
            sums: vec![NeumaierSum::default(); POWERS.len() * (g.nt + 1) * g.nx],
        }
    }
}

/// Per-cell power sums kept for every level: `Σ_r u^k` for these `k`.
pub const POWERS: [i32; 6] = [1, 2, 4, 6, 8, 12];

fn deterministic_level(row: &[f64], g: &SpaceTimeGrid, u0: &[f64]) -> Vec<f64> {
    let nx = g.nx;
    match g.boundary {
        Boundary::Periodic => {
            let k = circular_layout(row, g, nx);
            let total = compensated_sum(k.iter().copied());
            // deviation form keeps constants exact
            (0..nx)
                .map(|j| {
                    let dev = compensated_sum((0..nx).map(|i| k[(j + nx - i) % nx] * (u0[i] - u0[j])));
                    u0[j] + dev / total
                })
                .collect()
        }
        Boundary::ZeroPadded => {
            let total = row[0] + 2.0 * compensated_sum(row[1..].iter().copied());
            (0..nx)
                .map(|j| compensated_sum((0..nx).map(|i| row[j.abs_diff(i)] * u0[i])) / total)
                .collect()
        }
    }
}

/// Output of one work unit.
#[derive(Debug, Clone)]
pub struct ChunkResult {
    pub chunk: usize,
    pub count: usize,
    recorded: Vec<f64>,
    energy: Vec<f64>,
    sums: Vec<f64>,
}

/// Merges chunk results, which must arrive in chunk order.
#[derive(Debug)]
pub struct EnsembleBuilder<'a> {
    sim: &'a Simulator,
    next: usize,
    recorded: Vec<f64>,
    energy: Vec<f64>,
    sums: Vec<NeumaierSum>,
}

impl EnsembleBuilder<'_> {
    pub fn push(&mut self, c: ChunkResult) -> Result<()> {
        if c.chunk != self.next {
            return Err(domain(format!("expected chunk {}, got {}", self.next, c.chunk)));
        }
        self.recorded.extend_from_slice(&c.recorded);
        self.energy.extend_from_slice(&c.energy);
        for (s, v) in self.sums.iter_mut().zip(&c.sums) {
            s.add(*v);
        }
        self.next += 1;
        Ok(())
    }

    pub fn finish(self) -> Result<FieldEnsemble> {
        if self.next != self.sim.n_chunks() {
            return Err(domain(format!(
                "ensemble incomplete: {} of {} chunks",
                self.next,
                self.sim.n_chunks()
            )));
        }
        let spec = self.sim.spec.clone();
        Ok(FieldEnsemble {
            params: spec.params,
            grid: spec.grid,
            seed: spec.seed,
            replicas: spec.replicas,
            recorded_cells: spec.record_cells,
            recorded: self.recorded,
            energy: self.energy,
            power_sums: self.sums.iter().map(|s| s.value()).collect(),
            u0: spec.u0,
            sigma: spec.sigma,
        })
    }
}

/// Sequential driver; bit-identical to any driver that pushes the same
/// chunks in order.
pub fn simulate(spec: &SimulationSpec) -> Result<FieldEnsemble> {
    let sim = Simulator::new(spec)?;
    let mut b = sim.builder();
    for c in 0..sim.n_chunks() {
        b.push(sim.run_chunk(c)?)?;
    }
    b.finish()
}

/// Simulated ensemble.
///
/// Per-replica values are kept for the recorded cells and for the spatial
/// energy `dx Σ_j u²`; every cell keeps the power sums [`POWERS`].
#[derive(Debug, Clone, PartialEq)]
pub struct FieldEnsemble {
    pub params: ModelParams,
    pub grid: SpaceTimeGrid,
    pub seed: u64,
    pub replicas: usize,
    pub recorded_cells: Vec<usize>,
    /// `[replica][level][recorded cell]`.
    pub recorded: Vec<f64>,
    /// `[replica][level]`.
    pub energy: Vec<f64>,
    /// `[power][level][cell]`.
    pub power_sums: Vec<f64>,
    pub u0: Vec<f64>,
    pub sigma: NonlinearitySpec,
}

impl FieldEnsemble {
    pub fn levels(&self) -> usize {
        self.grid.nt + 1
    }

    pub fn recorded_value(&self, replica: usize, level: usize, slot: usize) -> f64 {
        let w = self.recorded_cells.len();
        self.recorded[(replica * self.levels() + level) * w + slot]
    }

    pub fn energy(&self, replica: usize, level: usize) -> f64 {
        self.energy[replica * self.levels() + level]
    }

    /// `Σ_r u_r(t_m, x_j)^k` for `k` in [`POWERS`].
    pub fn power_sum(&self, k: i32, level: usize, cell: usize) -> Option<f64> {
        let idx = POWERS.iter().position(|&p| p == k)?;
        let (l, nx) = (self.levels(), self.grid.nx);
        Some(self.power_sums[(idx * l + level) * nx + cell])
    }

    /// Slot of `cell` among the recorded cells.
    pub fn slot(&self, cell: usize) -> Option<usize> {
        self.recorded_cells.iter().position(|&c| c == cell)
    }
}
