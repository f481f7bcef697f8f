//! Quadrature: adaptive Gauss-Kronrod (7/15) on finite intervals and
//! half-lines, and a fixed exp-sinh rule for integrals over `(0, ∞)` whose
//! nodes are reused across many integrands.

use alloc::collections::BinaryHeap;
use alloc::vec::Vec;
use core::f64::consts::FRAC_PI_2;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::stats::NeumaierSum;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

// Gauss weights for the odd Kronrod nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Tolerances for the adaptive integrator. Converged when the summed error
/// estimate is below `max(abs_tol, rel_tol * |value|)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadConfig {
    fn default() -> Self {
        Self {
            abs_tol: 1e-13,
            rel_tol: 1e-11,
            max_intervals: 2000,
        }
    }
}

impl QuadConfig {
    pub fn new(abs_tol: f64, rel_tol: f64) -> Self {
        Self {
            abs_tol,
            rel_tol,
            ..Self::default()
        }
    }

    pub fn with_max_intervals(mut self, n: usize) -> Self {
        self.max_intervals = n;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    pub abs_err: f64,
    pub evals: usize,
}

/// One 15-point Kronrod panel with the QUADPACK error heuristic.
pub fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let (v, e, _) = gk15_floor(f, a, b);
    (v, e)
}

// value, error estimate, and the roundoff part of that estimate
fn gk15_floor<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut res_k = fc * WGK[7];
    let mut res_g = fc * WG[3];
    let mut res_abs = res_k.abs();
    let mut fv1 = [0.0; 7];
    let mut fv2 = [0.0; 7];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * res_k;
    let mut res_asc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let value = res_k * half;
    res_abs *= half.abs();
    res_asc *= half.abs();
    let mut err = ((res_k - res_g) * half).abs();
    if res_asc != 0.0 && err != 0.0 {
        err = res_asc * (200.0 * err / res_asc).powf(1.5).min(1.0);
    }
    let mut floor = 0.0;
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        floor = 50.0 * f64::EPSILON * res_abs;
        err = err.max(floor);
    }
    (value, err, floor)
}

#[derive(Clone, Copy)]
enum Map {
    Identity,
    /// `x = origin + (1 - u) / u` for `u` in `(0, 1]`.
    Tail { origin: f64 },
}

#[derive(Clone, Copy)]
struct Segment {
    lo: f64,
    hi: f64,
    map: Map,
    value: f64,
    err: f64,
    floor: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.err.total_cmp(&other.err).is_eq()
    }
}

impl Eq for Segment {}

impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<core::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Segment {
    fn cmp(&self, other: &Self) -> core::cmp::Ordering {
        self.err.total_cmp(&other.err)
    }
}

fn eval_segment<F: FnMut(f64) -> f64>(f: &mut F, lo: f64, hi: f64, map: Map) -> Segment {
    let (value, err, floor) = match map {
        Map::Identity => gk15_floor(f, lo, hi),
        Map::Tail { origin } => {
            let mut g = |u: f64| {
                let x = origin + (1.0 - u) / u;
                let v = f(x) / (u * u);
                if v.is_finite() {
                    v
                } else {
                    0.0
                }
            };
            gk15_floor(&mut g, lo, hi)
        }
    };
    Segment {
        lo,
        hi,
        map,
        value,
        err,
        floor,
    }
}

fn adaptive<F: FnMut(f64) -> f64>(
    f: &mut F,
    initial: &[(f64, f64, Map)],
    cfg: &QuadConfig,
) -> Result<Quadrature> {
    let mut heap = BinaryHeap::with_capacity(initial.len() * 4);
    // segments that can no longer be bisected
    let mut done: Vec<Segment> = Vec::new();
    let mut evals = 0;
    for &(lo, hi, map) in initial {
        if hi <= lo {
            continue;
        }
        heap.push(eval_segment(f, lo, hi, map));
        evals += 15;
    }
    let totals = |heap: &BinaryHeap<Segment>, done: &[Segment]| {
        let mut v = NeumaierSum::default();
        let (mut e, mut fl) = (0.0, 0.0);
        for s in heap.iter().chain(done) {
            v.add(s.value);
            e += s.err;
            fl += s.floor;
        }
        (v.value(), e, fl)
    };
    let (mut total, mut err, mut floor) = totals(&heap, &done);
    let mut since_refresh = 0;
    loop {
        if !total.is_finite() {
            return Err(Error::Accuracy {
                estimate: total,
                bound: f64::INFINITY,
            });
        }
        let tol = cfg.abs_tol.max(cfg.rel_tol * total.abs());
        if err <= tol || err - floor <= tol {
            let (total, err, _) = totals(&heap, &done);
            return Ok(Quadrature {
                value: total,
                abs_err: err,
                evals,
            });
        }
        let Some(s) = heap.pop() else {
            return Err(Error::Accuracy {
                estimate: total,
                bound: err,
            });
        };
        if heap.len() + done.len() + 1 >= cfg.max_intervals {
            heap.push(s);
            let (total, err, _) = totals(&heap, &done);
            return Err(Error::Accuracy {
                estimate: total,
                bound: err,
            });
        }
        let mid = 0.5 * (s.lo + s.hi);
        if mid <= s.lo || mid >= s.hi || (s.hi - s.lo) <= 1e-14 * (s.lo.abs() + s.hi.abs()) {
            done.push(s);
            continue;
        }
        let a = eval_segment(f, s.lo, mid, s.map);
        let b = eval_segment(f, mid, s.hi, s.map);
        evals += 30;
        total += a.value + b.value - s.value;
        err += a.err + b.err - s.err;
        floor += a.floor + b.floor - s.floor;
        heap.push(a);
        heap.push(b);
        since_refresh += 1;
        if since_refresh == 64 {
            // drop accumulated cancellation in the running sums
            (total, err, floor) = totals(&heap, &done);
            since_refresh = 0;
        }
    }
}

/// Integrate `f` over `[a, b]`.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, cfg: &QuadConfig) -> Result<Quadrature> {
    adaptive(&mut f, &[(a, b, Map::Identity)], cfg)
}

/// Integrate over the polyline `points[0] .. points[n-1]`, splitting at
/// every interior point (kinks, peaks, singularities).
pub fn integrate_breaks<F: FnMut(f64) -> f64>(mut f: F, points: &[f64], cfg: &QuadConfig) -> Result<Quadrature> {
    let segs: Vec<_> = points
        .windows(2)
        .map(|w| (w[0], w[1], Map::Identity))
        .collect();
    adaptive(&mut f, &segs, cfg)
}

/// Integrate over `[points[0], ∞)`. Finite breakpoints are handled as in
/// [`integrate_breaks`]; the half-line beyond the last point is mapped onto
/// `(0, 1]`.
pub fn integrate_to_infinity<F: FnMut(f64) -> f64>(
    mut f: F,
    points: &[f64],
    cfg: &QuadConfig,
) -> Result<Quadrature> {
    let mut segs: Vec<_> = points
        .windows(2)
        .map(|w| (w[0], w[1], Map::Identity))
        .collect();
    let origin = *points.last().expect("at least one breakpoint");
    segs.push((0.0, 1.0, Map::Tail { origin }));
    adaptive(&mut f, &segs, cfg)
}

/// Exp-sinh rule on `(0, ∞)`: `s = scale · exp(π/2 · sinh τ)`, trapezoid in
/// `τ`. Integrable endpoint singularities at 0 and super-exponential or
/// algebraic decay at ∞ are both handled with double-exponential
/// convergence, and nodes can be shared between integrands.
#[derive(Debug, Clone)]
pub struct ExpSinhRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl ExpSinhRule {
    pub fn new(scale: f64, step: f64, tau_min: f64, tau_max: f64) -> Self {
        let k_lo = (tau_min / step).floor() as i64;
        let k_hi = (tau_max / step).ceil() as i64;
        let mut nodes = Vec::with_capacity((k_hi - k_lo + 1) as usize);
        let mut weights = Vec::with_capacity(nodes.capacity());
        for k in k_lo..=k_hi {
            let tau = k as f64 * step;
            let s = scale * (FRAC_PI_2 * tau.sinh()).exp();
            if s == 0.0 || !s.is_finite() {
                continue;
            }
            nodes.push(s);
            weights.push(step * FRAC_PI_2 * tau.cosh() * s);
        }
        Self { nodes, weights }
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&s, &w)| w * f(s))
            .sum()
    }
}

/// Composite trapezoid sum `h Σ' f_j` over equally spaced samples
/// starting at a symmetry point, doubled: `∫_{-X}^{X}` for even `f` sampled
/// at `0, h, 2h, …, X`.
pub fn even_trapezoid(samples: &[f64], h: f64) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    let n = samples.len();
    let interior: f64 = samples[1..n.saturating_sub(1).max(1)].iter().sum();
    let end = if n > 1 { 0.5 * samples[n - 1] } else { 0.0 };
    h * (samples[0] + 2.0 * (interior + end))
}

/// Richardson-extrapolated [`even_trapezoid`]: combines step `h` with step
/// `2h` (every other sample) to cancel the `h²` term.
pub fn even_trapezoid_richardson(samples: &[f64], h: f64) -> f64 {
    let fine = even_trapezoid(samples, h);
    let n = samples.len();
    if n < 5 || !(n - 1).is_multiple_of(2) {
        return fine;
    }
    let coarse: Vec<f64> = samples.iter().step_by(2).copied().collect();
    let coarse = even_trapezoid(&coarse, 2.0 * h);
    (4.0 * fine - coarse) / 3.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kronrod_exact_for_degree_23() {
        let mut f = |x: f64| x.powi(22) + 3.0 * x.powi(23);
        let (v, _) = gk15(&mut f, -1.0, 1.0);
        assert!((v - 2.0 / 23.0).abs() < 1e-14);
    }

    #[test]
    fn gauss_part_is_consistent() {
        // A smooth integrand must produce a tiny Kronrod-Gauss gap.
        let mut f = |x: f64| x.exp();
        let (v, e) = gk15(&mut f, 0.0, 1.0);
        assert!((v - (1f64.exp() - 1.0)).abs() < 1e-15);
        assert!(e < 1e-12);
    }

    #[test]
    fn adaptive_handles_endpoint_singularity() {
        let q = integrate(|x| 1.0 / x.sqrt(), 0.0, 1.0, &QuadConfig::default()).unwrap();
        assert!((q.value - 2.0).abs() < 1e-9, "{}", q.value);
    }

    #[test]
    fn half_line_gaussian() {
        let q = integrate_to_infinity(|x| (-x * x).exp(), &[0.0, 1.0], &QuadConfig::default()).unwrap();
        assert!((q.value - 0.5 * core::f64::consts::PI.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn half_line_algebraic_tail() {
        let q = integrate_to_infinity(|x| 1.0 / (1.0 + x * x), &[0.0], &QuadConfig::default()).unwrap();
        assert!((q.value - FRAC_PI_2).abs() < 1e-10);
    }

    #[test]
    fn exp_sinh_gamma_function() {
        // ∫ s^{-1/2} e^{-s} ds = √π
        let rule = ExpSinhRule::new(1.0, 1.0 / 16.0, -4.5, 3.5);
        let v = rule.integrate(|s| (-s).exp() / s.sqrt());
        assert!((v - core::f64::consts::PI.sqrt()).abs() < 1e-12, "{v}");
    }

    #[test]
    fn richardson_trapezoid_on_cusp() {
        // ∫ e^{-|x|} over ℝ = 2; the kink at 0 is a grid point.
        let h = 0.05;
        let s: Vec<f64> = (0..=800).map(|j| (-(j as f64) * h).exp()).collect();
        let plain = even_trapezoid(&s, h);
        let rich = even_trapezoid_richardson(&s, h);
        assert!((rich - 2.0).abs() < (plain - 2.0).abs() / 100.0);
        assert!((rich - 2.0).abs() < 1e-6);
    }

    #[test]
    fn max_intervals_reports_accuracy_error() {
        let cfg = QuadConfig::new(0.0, 1e-15).with_max_intervals(4);
        let r = integrate(|x| (50.0 * x).sin().abs(), 0.0, 10.0, &cfg);
        assert!(matches!(r, Err(Error::Accuracy { .. })));
    }
}
