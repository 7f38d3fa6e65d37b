//! Quadrature, compensated summation and small fitting helpers shared by
//! every module.
//!
//! The quadrature routines are global-adaptive Gauss–Kronrod (7/15) with
//! a bisection queue. [`integrate_ln`] works entirely with logarithms of
//! the integrand so that integrands like `exp(-10^6)` never underflow.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Result of a linear-scale quadrature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quad {
    pub value: f64,
    pub error: f64,
    pub converged: bool,
}

/// Result of a log-scale quadrature: `ln ∫ exp(g)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LnQuad {
    pub ln_value: f64,
    /// Estimated relative error of `exp(ln_value)`.
    pub rel_error: f64,
    pub converged: bool,
}

#[derive(Debug)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

/// Kronrod node with its Kronrod and embedded Gauss weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Node {
    pub x: f64,
    pub wk: f64,
    pub wg: f64,
}

/// Gauss–Kronrod 7/15 nodes on each panel `[p_i, p_{i+1}]`, for integrals
/// that share one set of function evaluations.
pub fn gk15_nodes(points: &[f64]) -> Vec<Node> {
    let mut out = Vec::with_capacity(15 * points.len());
    for w in points.windows(2) {
        let c = 0.5 * (w[0] + w[1]);
        let h = 0.5 * (w[1] - w[0]);
        out.push(Node { x: c, wk: h * WGK[7], wg: h * WG[3] });
        for j in 0..7 {
            let wg = if j % 2 == 1 { h * WG[j / 2] } else { 0.0 };
            for sign in [-1.0, 1.0] {
                out.push(Node { x: c + sign * h * XGK[j], wk: h * WGK[j], wg });
            }
        }
    }
    out
}

/// Adaptive integral of `f` over `[a, b]` split initially at `breaks`.
pub fn integrate<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    breaks: &[f64],
    rel_tol: f64,
    abs_tol: f64,
) -> Quad {
    if a == b {
        return Quad { value: 0.0, error: 0.0, converged: true };
    }
    let mut pts: Vec<f64> = vec![a];
    pts.extend(breaks.iter().copied().filter(|x| *x > a && *x < b));
    pts.push(b);
    let mut heap = BinaryHeap::new();
    let (mut total, mut err) = (0.0, 0.0);
    for w in pts.windows(2) {
        let (v, e) = gk15(&mut f, w[0], w[1]);
        total += v;
        err += e;
        heap.push(Panel { a: w[0], b: w[1], value: v, error: e });
    }
    let mut iters = 0;
    while err > abs_tol.max(rel_tol * total.abs()) && iters < 4000 {
        let Some(p) = heap.pop() else { break };
        let m = 0.5 * (p.a + p.b);
        if m <= p.a || m >= p.b {
            heap.push(p);
            break;
        }
        let (v1, e1) = gk15(&mut f, p.a, m);
        let (v2, e2) = gk15(&mut f, m, p.b);
        total += v1 + v2 - p.value;
        err += e1 + e2 - p.error;
        heap.push(Panel { a: p.a, b: m, value: v1, error: e1 });
        heap.push(Panel { a: m, b: p.b, value: v2, error: e2 });
        iters += 1;
    }
    // re-sum to wash out drift from the running updates
    let mut s = NeumaierSum::default();
    let mut es = 0.0;
    for p in heap.iter() {
        s.add(p.value);
        es += p.error;
    }
    let value = s.total();
    Quad { value, error: es, converged: es <= abs_tol.max(rel_tol * value.abs()) }
}

#[derive(Debug)]
struct LnPanel {
    a: f64,
    b: f64,
    ln_value: f64,
    ln_error: f64,
}

impl PartialEq for LnPanel {
    fn eq(&self, other: &Self) -> bool {
        self.ln_error == other.ln_error
    }
}
impl Eq for LnPanel {}
impl PartialOrd for LnPanel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for LnPanel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.ln_error.total_cmp(&other.ln_error)
    }
}

fn gk15_ln<F: FnMut(f64) -> f64>(g: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut vals = [0.0f64; 15];
    vals[0] = g(c);
    for j in 0..7 {
        let dx = h * XGK[j];
        vals[1 + 2 * j] = g(c - dx);
        vals[2 + 2 * j] = g(c + dx);
    }
    let m = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return (f64::NEG_INFINITY, f64::NEG_INFINITY);
    }
    let e = |x: f64| (x - m).exp();
    let mut kron = e(vals[0]) * WGK[7];
    let mut gauss = e(vals[0]) * WG[3];
    for j in 0..7 {
        let s = e(vals[1 + 2 * j]) + e(vals[2 + 2 * j]);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    let v = kron * h;
    let er = ((kron - gauss) * h).abs().max(v * 1e-15);
    (m + v.ln(), m + er.ln())
}

/// Adaptive integral of `exp(g(x))` over `[a, b]`, returned as a logarithm.
///
/// `g` returns the logarithm of the integrand and may return `-inf`.
pub fn integrate_ln<F: FnMut(f64) -> f64>(mut g: F, a: f64, b: f64, breaks: &[f64], rel_tol: f64) -> LnQuad {
    if a >= b {
        return LnQuad { ln_value: f64::NEG_INFINITY, rel_error: 0.0, converged: true };
    }
    let mut pts: Vec<f64> = vec![a];
    pts.extend(breaks.iter().copied().filter(|x| *x > a && *x < b));
    pts.push(b);
    let mut heap = BinaryHeap::new();
    for w in pts.windows(2) {
        let (v, e) = gk15_ln(&mut g, w[0], w[1]);
        heap.push(LnPanel { a: w[0], b: w[1], ln_value: v, ln_error: e });
    }
    let summary = |heap: &BinaryHeap<LnPanel>| {
        let v = log_sum_exp(heap.iter().map(|p| p.ln_value));
        let e = log_sum_exp(heap.iter().map(|p| p.ln_error));
        (v, e)
    };
    let ln_tol = rel_tol.ln();
    let mut iters = 0;
    loop {
        // summary is recomputed every 32 splits; cheap relative to integrand calls
        let (v, e) = summary(&heap);
        if v == f64::NEG_INFINITY || e - v <= ln_tol || iters >= 6000 {
            return LnQuad { ln_value: v, rel_error: (e - v).exp(), converged: e - v <= ln_tol };
        }
        for _ in 0..32 {
            let Some(p) = heap.pop() else { break };
            let m = 0.5 * (p.a + p.b);
            if m <= p.a || m >= p.b {
                heap.push(p);
                break;
            }
            let (v1, e1) = gk15_ln(&mut g, p.a, m);
            let (v2, e2) = gk15_ln(&mut g, m, p.b);
            heap.push(LnPanel { a: p.a, b: m, ln_value: v1, ln_error: e1 });
            heap.push(LnPanel { a: m, b: p.b, ln_value: v2, ln_error: e2 });
            iters += 1;
        }
    }
}

/// `ln Σ exp(x_i)` without overflow.
pub fn log_sum_exp<I: IntoIterator<Item = f64>>(xs: I) -> f64 {
    let v: Vec<f64> = xs.into_iter().collect();
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    if m == f64::INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// `ln(e^a + e^b)`.
pub fn ln_add(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if lo == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// `ln(e^a - e^b)` for `a ≥ b`.
pub fn ln_sub(a: f64, b: f64) -> f64 {
    if b == f64::NEG_INFINITY {
        return a;
    }
    a + (-(b - a).exp()).ln_1p()
}

/// Neumaier compensated summation.
#[derive(Debug, Default, Clone, Copy)]
pub struct NeumaierSum {
    sum: f64,
    comp: f64,
}

impl NeumaierSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn total(&self) -> f64 {
        self.sum + self.comp
    }
}

impl std::iter::FromIterator<f64> for NeumaierSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = NeumaierSum::default();
        for x in iter {
            s.add(x);
        }
        s
    }
}

/// Ordinary least squares `y ≈ intercept + slope·x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual.
    pub rms: f64,
}

pub fn fit_line(xs: &[f64], ys: &[f64]) -> LineFit {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let rms = (xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    LineFit { slope, intercept, rms }
}

/// Bisection for an increasing function: returns `x` in `[lo, hi]` with
/// `f(x) ≈ target`, stopping at relative width `rel_tol`.
pub fn bisect_increasing<F: FnMut(f64) -> f64>(mut f: F, target: f64, mut lo: f64, mut hi: f64, rel_tol: f64) -> f64 {
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo) <= rel_tol * hi.abs().max(lo.abs()).max(f64::MIN_POSITIVE) {
            break;
        }
    }
    0.5 * (lo + hi)
}
