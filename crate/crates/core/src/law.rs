//! Symmetric one-dimensional laws on ℤ with masses `w(|y|)/Z`.
//!
//! A law is either truncated to `|y| ≤ R` (the missing mass is the
//! deficit) or ideal (`R = ∞`). The normalizer `Z` always refers to the
//! ideal law, so truncation never renormalizes.
//!
//! For ideal laws the symbol `1 − φ̂(θ)` is available in logarithmic form
//! for angles `θ = e^{-u}` far below double precision.

use std::fmt;

use crate::error::{Error, Result};
use crate::numeric::{integrate, integrate_ln, log_sum_exp, NeumaierSum};
use crate::slowvary::{fmt_num, ln1p_exp, SlowVaryFn};

/// Weight profile `w(t)` on `t ≥ 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Weight {
    /// `1/((1+t) ℓ(1+t²))`, the generator-power and D-based radial law on ℤ.
    Slow(SlowVaryFn),
    /// `1/((1+t) ℓ(1+t))`, the direct subordination weights.
    SlowCoeff(SlowVaryFn),
    /// `(1+t)^{-1-α}`, stable-like with index α.
    Stable(f64),
}

impl Weight {
    /// `ln w(t)` with `t = e^{ln_t}` (`ln_t = -∞` is `t = 0`).
    pub fn ln_w_ln(&self, ln_t: f64) -> f64 {
        let a = ln1p_exp(ln_t);
        match self {
            Weight::Slow(ell) => -a - ell.ln_ell_from_l1(ln1p_exp(ln1p_exp(2.0 * ln_t))),
            Weight::SlowCoeff(ell) => -a - ell.ln_ell_from_l1(ln1p_exp(a)),
            Weight::Stable(alpha) => -(1.0 + alpha) * a,
        }
    }

    pub fn w(&self, t: f64) -> f64 {
        self.ln_w_ln(t.ln()).exp()
    }

    /// `ln ∫_A^∞ w(t) dt` with `A = e^{ln_a}`.
    pub fn ln_tail_ln(&self, ln_a: f64) -> f64 {
        match self {
            Weight::Stable(alpha) => -alpha * ln1p_exp(ln_a) - alpha.ln(),
            Weight::SlowCoeff(ell) => ell.tail_integral_ln(ln1p_exp(ln_a)).ln(),
            Weight::Slow(ell) => {
                // w(t) = t/((1+t²)ℓ(1+t²)) + (1−t)/((1+t)(1+t²)ℓ(1+t²))
                let main = 0.5 * ell.tail_integral_ln(ln1p_exp(2.0 * ln_a));
                if ln_a > 40.0 {
                    return main.ln();
                }
                let g = |v: f64| {
                    let t = v.exp();
                    let l = ell.ln_ell_from_l1(ln1p_exp(ln1p_exp(2.0 * v)));
                    (1.0 - t) * t / ((1.0 + t) * (1.0 + t * t)) * (-l).exp()
                };
                let lo = ln_a;
                let hi = ln_a.max(0.0) + 45.0;
                let breaks: Vec<f64> = (1..10).map(|i| lo + (hi - lo) * i as f64 / 10.0).collect();
                let rem = integrate(g, lo, hi, &breaks, 1e-13, 1e-300).value;
                (main + rem).ln()
            }
        }
    }

    pub fn tail(&self, a: f64) -> f64 {
        self.ln_tail_ln(a.ln()).exp()
    }

    /// `Σ_{y > M} w(y)` by the midpoint Euler–Maclaurin rule.
    pub fn sum_beyond(&self, m: u64) -> f64 {
        let a = m as f64 + 0.5;
        let h = 1e-3 * a;
        let dw = (self.w(a + h) - self.w(a - h)) / (2.0 * h);
        self.tail(a) + dw / 24.0
    }
}

impl fmt::Display for Weight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Weight::Slow(ell) => write!(f, "slow({ell})"),
            Weight::SlowCoeff(ell) => write!(f, "slowcoeff({ell})"),
            Weight::Stable(a) => write!(f, "stable({})", fmt_num(*a)),
        }
    }
}

/// Terms summed explicitly before switching to the integral tail.
const M0: u64 = 1000;
/// Table length for weights and cumulative sums.
const TABLE: u64 = 100_000;
/// Angles below this use the scaled-integral representation.
const THETA_SPLIT: f64 = 0.01;

/// Symmetric law `φ(y) = w(|y|)/Z` on ℤ, truncated at `radius` or ideal.
#[derive(Debug, Clone)]
pub struct ZLaw {
    weight: Weight,
    radius: Option<u64>,
    z: f64,
    /// `w(y)` for `y = 0..=len`
    w: Vec<f64>,
    /// `Σ_{y > r} w(y)` for `r = 0..=len` (ideal law)
    beyond: Vec<f64>,
    /// `Σ_{1 ≤ y ≤ r} y² w(y)`
    second: Vec<f64>,
    deficit: f64,
}

impl ZLaw {
    pub fn new(weight: Weight, radius: Option<u64>) -> Result<Self> {
        if let Weight::Stable(a) = weight {
            if !(a > 0.0 && a < 2.0) {
                return Err(Error::Domain(format!("stable index must lie in (0,2), got {a}")));
            }
        }
        let m = match radius {
            Some(r) => r.max(M0),
            None => M0,
        };
        let len = match radius {
            Some(r) => r.clamp(M0, TABLE),
            None => TABLE,
        };
        let top = m.max(len);
        let mut w = Vec::with_capacity(top as usize + 1);
        for y in 0..=top {
            w.push(weight.w(y as f64));
        }
        // Σ_{y>r} w for r ≤ top, anchored at the Euler–Maclaurin tail at m
        let anchor = weight.sum_beyond(m);
        let mut beyond = vec![0.0; top as usize + 1];
        let mut acc = NeumaierSum::default();
        acc.add(anchor);
        beyond[m as usize] = anchor;
        for r in (0..m).rev() {
            acc.add(w[r as usize + 1]);
            beyond[r as usize] = acc.total();
        }
        for r in m + 1..=top {
            beyond[r as usize] = beyond[r as usize - 1] - w[r as usize];
        }
        let z = w[0] + 2.0 * beyond[0];
        let mut second = vec![0.0; len as usize + 1];
        let mut s = NeumaierSum::default();
        for y in 1..=len as usize {
            s.add((y * y) as f64 * w[y]);
            second[y] = s.total();
        }
        w.truncate(len as usize + 1);
        beyond.truncate(len as usize + 1);
        let deficit = match radius {
            None => 0.0,
            Some(r) => 2.0 * beyond_at(&weight, &beyond, r) / z,
        };
        Ok(ZLaw { weight, radius, z, w, beyond, second, deficit })
    }

    pub fn weight(&self) -> Weight {
        self.weight
    }

    pub fn radius(&self) -> Option<u64> {
        self.radius
    }

    pub fn normalizer(&self) -> f64 {
        self.z
    }

    pub fn deficit(&self) -> f64 {
        self.deficit
    }

    fn w_at(&self, y: u64) -> f64 {
        match self.w.get(y as usize) {
            Some(v) => *v,
            None => self.weight.w(y as f64),
        }
    }

    /// Represented mass at `y`.
    pub fn mass(&self, y: i64) -> f64 {
        let a = y.unsigned_abs();
        match self.radius {
            Some(r) if a > r => 0.0,
            _ => self.w_at(a) / self.z,
        }
    }

    /// Mass the ideal law puts on `{|y| > r}`.
    pub fn ideal_tail(&self, r: u64) -> f64 {
        2.0 * beyond_at(&self.weight, &self.beyond, r) / self.z
    }

    /// Represented mass on `{|y| > r}`.
    pub fn represented_tail(&self, r: u64) -> f64 {
        match self.radius {
            None => self.ideal_tail(r),
            Some(big) if r >= big => 0.0,
            Some(_) => (self.ideal_tail(r) - self.deficit).max(0.0),
        }
    }

    /// `Σ_{|y| ≤ r} y² φ(y)` over represented masses.
    pub fn second_moment(&self, r: u64) -> f64 {
        let r = match self.radius {
            Some(big) => r.min(big),
            None => r,
        };
        let len = self.second.len() as u64 - 1;
        if r <= len {
            return 2.0 * self.second[r as usize] / self.z;
        }
        let mut s = NeumaierSum::default();
        s.add(self.second[len as usize]);
        for y in len + 1..=r {
            s.add((y * y) as f64 * self.weight.w(y as f64));
        }
        2.0 * s.total() / self.z
    }

    /// `ln(1 − φ̂(θ))` of the ideal law at `θ = e^{-u}`, `0 < θ ≤ π`.
    pub fn ln_symbol(&self, u: f64) -> f64 {
        let theta = (-u).exp();
        let core = if theta >= THETA_SPLIT { self.symbol_sum_ln(theta) } else { self.symbol_scaled_ln(u) };
        std::f64::consts::LN_2 - self.z.ln() + core
    }

    /// `ln Σ_{y≥1} w(y)(1 − cos yθ)` by direct summation plus a summed-by-parts tail.
    pub(crate) fn symbol_sum_ln(&self, theta: f64) -> f64 {
        let m = ((400.0 / theta).ceil() as u64).max(M0);
        let mut c = NeumaierSum::default();
        for y in 1..=m {
            c.add(self.w_at(y) * (y as f64 * theta).cos());
        }
        let tail = abel_tail(|y| self.w_at(y), m + 1, theta, 4);
        c.add(tail);
        let total = 0.5 * (self.z - self.w[0]);
        (total - c.total()).ln()
    }

    /// Same quantity via `Σ_{y ≤ M0}` plus `θ⁻¹∫ w(x/θ)(1 − cos x) dx`.
    pub(crate) fn symbol_scaled_ln(&self, u: f64) -> f64 {
        let lt = -u;
        let theta = lt.exp();
        let mut parts = Vec::with_capacity(4);
        if (M0 as f64) * theta < 1e-4 {
            parts.push(2.0 * lt - std::f64::consts::LN_2 + self.second[M0 as usize].ln());
        } else {
            let mut s = NeumaierSum::default();
            for y in 1..=M0 {
                let h = (0.5 * y as f64 * theta).sin();
                s.add(self.w[y as usize] * 2.0 * h * h);
            }
            parts.push(s.total().ln());
        }
        let ln_h = |ln_x: f64| self.weight.ln_w_ln(ln_x - lt) - lt;
        let x0 = (M0 as f64 + 0.5) * theta;
        let ln_x0 = (M0 as f64 + 0.5).ln() + lt;
        if x0 < 1.0 {
            let lo = ln_x0.max(-40.0);
            let g = |v: f64| {
                let x = v.exp();
                let s = (0.5 * x).sin();
                ln_h(v) + std::f64::consts::LN_2 + 2.0 * s.ln() + v
            };
            let n = ((-lo) / 4.0).ceil().max(1.0) as usize;
            let breaks: Vec<f64> = (1..n).map(|i| lo + (-lo) * i as f64 / n as f64).collect();
            parts.push(integrate_ln(g, lo, 0.0, &breaks, 1e-12).ln_value);
        }
        let a2 = x0.max(1.0);
        let two_pi = 2.0 * std::f64::consts::PI;
        let m = ((a2 + 20.0 * std::f64::consts::PI) / two_pi).ceil().max(10.0);
        let big_x = two_pi * m + std::f64::consts::FRAC_PI_2;
        let c = ln_h(a2.ln());
        let f = |x: f64| (ln_h(x.ln()) - c).exp() * 2.0 * (0.5 * x).sin().powi(2);
        let k0 = (a2 / std::f64::consts::PI).floor() as i64 + 1;
        let k1 = (big_x / std::f64::consts::PI).floor() as i64;
        let breaks: Vec<f64> = (k0..=k1).map(|k| k as f64 * std::f64::consts::PI).collect();
        let mid = integrate(f, a2, big_x, &breaks, 1e-12, 0.0).value;
        parts.push(c + mid.ln());
        // ∫_X^∞ h(1 − cos) = ∫_X^∞ h + h(X) − h''(X) + …, with sin X = 1
        let ln_wt = self.weight.ln_tail_ln(big_x.ln() - lt);
        let lx = ln_h(big_x.ln());
        let d = 0.5;
        let rp = (ln_h((big_x + d).ln()) - lx).exp();
        let rm = (ln_h((big_x - d).ln()) - lx).exp();
        let h2 = (rp - 2.0 + rm) / (d * d);
        parts.push(log_sum_exp([ln_wt, lx + (1.0 - h2).ln()]));
        log_sum_exp(parts)
    }
}

fn beyond_at(weight: &Weight, beyond: &[f64], r: u64) -> f64 {
    match beyond.get(r as usize) {
        Some(v) => *v,
        None => weight.sum_beyond(r),
    }
}

/// Real part of `Σ_{y ≥ m0} a(y) e^{iyθ}` by `k` rounds of summation by parts.
fn abel_tail<A: Fn(u64) -> f64>(a: A, m0: u64, theta: f64, k: usize) -> f64 {
    // 1/(1 − z) for z = e^{iθ}
    let (zr, zi) = (theta.cos(), theta.sin());
    let (dr, di) = (1.0 - zr, -zi);
    let den = dr * dr + di * di;
    let (ir, ii) = (dr / den, -di / den);
    let mut binom = vec![1.0f64];
    let mut acc_r = 0.0;
    let mut acc_i = 0.0;
    // S_j = [Δ^j a(m0+j) z^{m0+j} + S_{j+1}]/(1 − z), unrolled from the top
    let mut terms = Vec::with_capacity(k);
    for j in 0..k {
        let m = m0 + j as u64;
        let mut d = 0.0;
        for (i, b) in binom.iter().enumerate() {
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            d += sign * b * a(m - i as u64);
        }
        let ang = m as f64 * theta;
        terms.push((d * ang.cos(), d * ang.sin()));
        let mut next = vec![1.0; binom.len() + 1];
        for i in 1..binom.len() {
            next[i] = binom[i - 1] + binom[i];
        }
        binom = next;
    }
    for (tr, ti) in terms.into_iter().rev() {
        let (sr, si) = (tr + acc_r, ti + acc_i);
        acc_r = sr * ir - si * ii;
        acc_i = sr * ii + si * ir;
    }
    acc_r
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_core(weight: &Weight, theta: f64, n: u64) -> f64 {
        let mut s = NeumaierSum::default();
        for y in 1..=n {
            let h = (0.5 * y as f64 * theta).sin();
            s.add(weight.w(y as f64) * 2.0 * h * h);
        }
        // the oscillating part of the remainder is O(w(n)/θ)
        s.add(weight.sum_beyond(n));
        s.total()
    }

    #[test]
    fn stable_tail_closed_form() {
        let w = Weight::Stable(1.0);
        assert!((w.tail(9.0) - 0.1).abs() < 1e-15);
        // Σ_{k>N} k^{-2} = 1/(N+½) + O(N^{-4})
        let exact: f64 = (1001..2_000_000).map(|y| 1.0 / ((1.0 + y as f64).powi(2))).sum::<f64>() + 1.0 / 2_000_000.5;
        assert!((w.sum_beyond(1000) - exact).abs() < 1e-12 * exact);
    }

    #[test]
    fn slow_tail_matches_quadrature() {
        let ell = SlowVaryFn::log_power(1.0).unwrap();
        let w = Weight::Slow(ell);
        for a in [0.5, 3.0, 100.0] {
            let q = integrate(|v: f64| (w.ln_w_ln(v) + v).exp(), f64::ln(a), 800.0, &[10.0, 50.0, 200.0], 1e-13, 0.0).value;
            // ∫_{e^800}^∞ w ≈ ½(1+1600)^{-1}
            let oracle = q + 0.5 / 1601.0;
            assert!((w.tail(a) - oracle).abs() < 1e-9 * oracle, "{a}: {} {oracle}", w.tail(a));
        }
    }

    #[test]
    fn coefficient_tail_matches_quadrature() {
        let ell = SlowVaryFn::iter_log(2, 1.0).unwrap();
        let w = Weight::SlowCoeff(ell);
        for a in [0.5, 17.5, 1000.0] {
            let q = integrate(|v: f64| (w.ln_w_ln(v) + v).exp(), f64::ln(a), 700.0, &[10.0, 50.0, 200.0], 1e-13, 0.0).value;
            let far = ell.tail_integral_ln(700.0);
            let oracle = q + far;
            assert!((w.tail(a) - oracle).abs() < 1e-9 * oracle, "{a}: {} {oracle}", w.tail(a));
        }
    }

    #[test]
    fn mass_plus_deficit_is_one() {
        let ell = SlowVaryFn::log_power(1.0).unwrap();
        for r in [10u64, 1000, 50_000] {
            let law = ZLaw::new(Weight::Slow(ell), Some(r)).unwrap();
            let mut s = NeumaierSum::default();
            for y in -(r as i64)..=(r as i64) {
                s.add(law.mass(y));
            }
            s.add(law.deficit());
            assert!((s.total() - 1.0).abs() < 1e-12, "{r}: {}", s.total());
        }
    }

    #[test]
    fn symbol_matches_brute_force() {
        let ell = SlowVaryFn::log_power(1.0).unwrap();
        for weight in [Weight::Stable(1.0), Weight::Stable(0.5), Weight::Slow(ell)] {
            let law = ZLaw::new(weight, None).unwrap();
            for theta in [3.0f64, 1.0, 0.05, 0.012, 0.005, 0.001] {
                let oracle = brute_core(&weight, theta, 20_000_000);
                let got = law.ln_symbol(-theta.ln()) - std::f64::consts::LN_2 + law.normalizer().ln();
                assert!((got - oracle.ln()).abs() < 2e-6, "{weight} θ={theta}: {got} vs {}", oracle.ln());
            }
        }
    }

    #[test]
    fn symbol_branches_agree() {
        let ell = SlowVaryFn::iter_log(2, 1.0).unwrap();
        for weight in [Weight::Stable(1.5), Weight::Slow(ell)] {
            let law = ZLaw::new(weight, None).unwrap();
            for theta in [0.02f64, 0.04] {
                let a = law.symbol_sum_ln(theta);
                let b = law.symbol_scaled_ln(-theta.ln());
                assert!((a - b).abs() < 1e-4, "{weight} {theta}: {a} {b}");
            }
        }
    }

    #[test]
    fn stable_symbol_small_angle_scaling() {
        // Σ(1 − cos yθ)/y² → πθ/2
        let law = ZLaw::new(Weight::Stable(1.0), None).unwrap();
        for u in [50.0, 300.0, 2000.0] {
            let got = law.ln_symbol(u);
            let want = (std::f64::consts::PI / law.normalizer()).ln() - u;
            assert!((got - want).abs() < 1e-6, "{u}: {got} {want}");
        }
    }

    #[test]
    fn slow_symbol_is_monotone_at_tiny_angles() {
        let law = ZLaw::new(Weight::Slow(SlowVaryFn::log_power(1.0).unwrap()), None).unwrap();
        let mut prev = f64::INFINITY;
        for i in 0..60 {
            let u = 3.0 + i as f64 * 50.0;
            let v = law.ln_symbol(u);
            assert!(v < prev, "{u}");
            prev = v;
        }
        // S(θ) ≍ (log 1/θ)^{-δ}: with δ = 1 the product stays bounded
        let r = law.ln_symbol(1000.0).exp() * 1000.0;
        let r2 = law.ln_symbol(2000.0).exp() * 2000.0;
        assert!((r2 / r - 1.0).abs() < 0.1, "{r} {r2}");
    }

    #[test]
    fn tails_and_second_moments() {
        let law = ZLaw::new(Weight::Stable(1.0), Some(5000)).unwrap();
        let mut prev_h = f64::INFINITY;
        let mut prev_g = 0.0;
        for r in [0u64, 1, 10, 100, 4999, 5000, 6000] {
            let h = law.represented_tail(r);
            let g = law.second_moment(r);
            assert!(h <= prev_h && g >= prev_g);
            prev_h = h;
            prev_g = g;
        }
        assert_eq!(law.represented_tail(5000), 0.0);
        let direct: f64 = (11..=5000).map(|y| 2.0 * law.mass(y)).sum();
        assert!((law.represented_tail(10) - direct).abs() < 1e-13);
    }
}
