//! Subordination coefficients `c(ψ, n)` and their generating functions.
//!
//! Three sources: the closed-form binomial series of `1 − (1−x)^α`, the
//! Lévy-measure integral `c(n) = (1/n!)∫ tⁿ e^{-t} m(t) dt` (+ drift for
//! `n = 1`), and direct weights `c(n) ∝ 1/((1+n)ℓ(1+n))`.

use std::collections::BTreeMap;
use std::fmt;

use statrs::function::gamma::{gamma_lr, ln_gamma};

use crate::convolution::convolve;
use crate::error::{Error, Result};
use crate::group::Element;
use crate::law::Weight;
use crate::measure::{Atom, Measure};
use crate::numeric::{integrate, integrate_ln, log_sum_exp, NeumaierSum};
use crate::slowvary::{fmt_num, SlowVaryFn};

/// Lévy density of a Bernstein function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LevyDensity {
    /// `α/Γ(1−α) · t^{-1-α}`, the density of `ψ(s) = s^α`.
    Stable(f64),
}

impl LevyDensity {
    fn ln_m(&self, t_ln: f64) -> f64 {
        match *self {
            LevyDensity::Stable(a) => a.ln() - ln_gamma(1.0 - a) - (1.0 + a) * t_ln,
        }
    }

    /// `∫_T^∞ m(t) dt` with `T = e^{ln_t}`.
    fn upper_mass(&self, ln_t: f64) -> f64 {
        match *self {
            LevyDensity::Stable(a) => (-a * ln_t - ln_gamma(1.0 - a)).exp(),
        }
    }
}

/// Bernstein function `ψ(s) = a + b s + κ ∫(1 − e^{-st}) m(t) dt`,
/// with `κ` fixed at construction so that `ψ(1) = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BernsteinRep {
    a: f64,
    b: f64,
    levy: Option<LevyDensity>,
    scale: f64,
}

const LN_T_LO: f64 = -60.0;
const LN_T_HI: f64 = 60.0;

impl BernsteinRep {
    pub fn new(a: f64, b: f64, levy: Option<LevyDensity>) -> Result<Self> {
        if !(a >= 0.0 && b >= 0.0) {
            return Err(Error::Domain(format!("killing and drift must be nonnegative, got a={a}, b={b}")));
        }
        if let Some(LevyDensity::Stable(al)) = levy {
            if !(al > 0.0 && al < 1.0) {
                return Err(Error::Domain(format!("stable Lévy index must lie in (0,1), got {al}")));
            }
        }
        let mut rep = BernsteinRep { a, b, levy, scale: 1.0 };
        match levy {
            None => {
                if (a + b - 1.0).abs() > 1e-12 {
                    return Err(Error::Domain(format!("ψ(1) = {} ≠ 1 without a Lévy part", a + b)));
                }
            }
            Some(m) => {
                rep.check_integrable(m)?;
                let raw = rep.levy_part(1.0)?;
                let room = 1.0 - a - b;
                if !(room > 0.0) {
                    return Err(Error::Domain("a + b must be below 1 when a Lévy part is present".into()));
                }
                rep.scale = room / raw;
            }
        }
        Ok(rep)
    }

    /// `ψ(s) = s^α`.
    pub fn stable(alpha: f64) -> Result<Self> {
        Self::new(0.0, 0.0, Some(LevyDensity::Stable(alpha)))
    }

    /// `ψ(s) = s`.
    pub fn drift() -> Self {
        BernsteinRep { a: 0.0, b: 1.0, levy: None, scale: 1.0 }
    }

    pub fn killing(&self) -> f64 {
        self.a
    }

    pub fn drift_coeff(&self) -> f64 {
        self.b
    }

    pub fn levy(&self) -> Option<LevyDensity> {
        self.levy
    }

    fn check_integrable(&self, m: LevyDensity) -> Result<()> {
        // ∫ t m(t)/(1+t) dt, in v = ln t
        let g = |v: f64| (m.ln_m(v) + 2.0 * v - crate::slowvary::ln1p_exp(v)).exp();
        let q = integrate(g, LN_T_LO, LN_T_HI, &breaks(LN_T_LO, LN_T_HI, 24), 1e-10, 0.0);
        let edge = g(LN_T_LO) + g(LN_T_HI);
        if !q.converged || !q.value.is_finite() || edge > 1e-6 * q.value {
            return Err(Error::Divergent(format!("∫ t m(t)/(1+t) dt does not close (value {}, edge {edge})", q.value)));
        }
        Ok(())
    }

    fn levy_part(&self, s: f64) -> Result<f64> {
        let Some(m) = self.levy else { return Ok(0.0) };
        let g = |v: f64| {
            let x = s * v.exp();
            let one_minus = if x < 1e-8 { x * (1.0 - 0.5 * x) } else { -(-x).exp_m1() };
            one_minus * (m.ln_m(v) + v).exp()
        };
        let q = integrate(g, LN_T_LO, LN_T_HI, &breaks(LN_T_LO, LN_T_HI, 24), 1e-11, 0.0);
        if !q.converged {
            return Err(Error::Quadrature(format!("ψ({s})")));
        }
        Ok(q.value + m.upper_mass(LN_T_HI))
    }

    /// `ψ(s)` from the representation.
    pub fn psi(&self, s: f64) -> Result<f64> {
        Ok(self.a + self.b * s + self.scale * self.levy_part(s)?)
    }

    /// `c(ψ, n)` by log-domain quadrature.
    pub fn coefficient(&self, n: u64) -> Result<f64> {
        let drift = if n == 1 { self.b } else { 0.0 };
        let Some(m) = self.levy else { return Ok(drift) };
        let nf = n as f64;
        let lg = ln_gamma(nf + 1.0);
        let g = |v: f64| nf * v - v.exp() + m.ln_m(v) + v - lg;
        let centre = nf.ln();
        let width = 1.0 / nf.sqrt();
        let hi = (nf + 40.0 * nf.sqrt() + 60.0).ln();
        let mut br: Vec<f64> = (-8..=8).map(|k| centre + k as f64 * width).collect();
        br.extend(breaks(LN_T_LO, hi, 12));
        br.sort_by(f64::total_cmp);
        let q = integrate_ln(g, LN_T_LO, hi, &br, 1e-11);
        if !q.converged {
            return Err(Error::Quadrature(format!("c({n})")));
        }
        Ok(drift + self.scale * q.ln_value.exp())
    }

    /// `Σ_{n > N} c(ψ, n) = κ ∫ m(t) P(N+1, t) dt` with `P` the regularized
    /// lower incomplete gamma function.
    pub fn tail_beyond(&self, big_n: u64) -> Result<f64> {
        let Some(m) = self.levy else { return Ok(if big_n == 0 { self.b } else { 0.0 }) };
        let a = big_n as f64 + 1.0;
        let g = |v: f64| {
            let p = gamma_lr(a, v.exp());
            if p <= 0.0 {
                return 0.0;
            }
            (m.ln_m(v) + v).exp() * p
        };
        let centre = a.ln();
        let mut br: Vec<f64> = (-8..=8).map(|k| centre + k as f64 / a.sqrt()).collect();
        br.extend(breaks(LN_T_LO, LN_T_HI, 24));
        br.sort_by(f64::total_cmp);
        let lo = (centre - 30.0 / a.sqrt().min(1.0) - 5.0).max(LN_T_LO);
        let q = integrate(g, lo, LN_T_HI, &br, 1e-11, 0.0);
        if !q.converged {
            return Err(Error::Quadrature(format!("tail beyond {big_n}")));
        }
        let drift = if big_n == 0 { self.b } else { 0.0 };
        Ok(drift + self.scale * (q.value + m.upper_mass(LN_T_HI)))
    }
}

fn breaks(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (1..n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect()
}

/// Source of a coefficient sequence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CoeffFamily {
    Alpha(f64),
    Levy(BernsteinRep),
    Direct(SlowVaryFn),
}

impl CoeffFamily {
    pub fn coeffs(&self, n: usize) -> Result<SubordCoeffs> {
        match *self {
            CoeffFamily::Alpha(a) => coeffs_alpha(a, n),
            CoeffFamily::Levy(rep) => coeffs_from_levy(&rep, n),
            CoeffFamily::Direct(ell) => coeffs_direct(ell, n),
        }
    }

    /// Generating function of the untruncated sequence.
    pub fn generating(&self) -> Result<GenFn> {
        match *self {
            CoeffFamily::Alpha(a) => {
                if !(a > 0.0 && a <= 1.0) {
                    return Err(Error::Domain(format!("α must lie in (0,1], got {a}")));
                }
                Ok(GenFn::Power(a))
            }
            CoeffFamily::Levy(rep) => match rep.levy {
                None => Ok(GenFn::Power(1.0)),
                Some(LevyDensity::Stable(a)) if rep.a == 0.0 && rep.b == 0.0 => Ok(GenFn::Power(a)),
                Some(_) => Err(Error::UnsupportedFamily("generating function of a mixed Lévy representation".into())),
            },
            CoeffFamily::Direct(ell) => Ok(GenFn::Direct(DirectGen::new(ell))),
        }
    }
}

impl fmt::Display for CoeffFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CoeffFamily::Alpha(a) => write!(f, "alpha:{}", fmt_num(*a)),
            CoeffFamily::Levy(rep) => match rep.levy {
                None => write!(f, "levy:drift"),
                Some(LevyDensity::Stable(0.5)) => write!(f, "levy:sqrt"),
                Some(LevyDensity::Stable(a)) => write!(f, "levy:stable:{}", fmt_num(a)),
            },
            CoeffFamily::Direct(ell) => write!(f, "direct({ell})"),
        }
    }
}

impl std::str::FromStr for CoeffFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some(rest) = s.strip_prefix("alpha:") {
            let a: f64 = rest.trim().parse().map_err(|_| Error::Parse(format!("bad α in `{s}`")))?;
            if !(a > 0.0 && a <= 1.0) {
                return Err(Error::Domain(format!("α must lie in (0,1], got {a}")));
            }
            return Ok(CoeffFamily::Alpha(a));
        }
        if let Some(rest) = s.strip_prefix("levy:") {
            return match rest {
                "sqrt" => Ok(CoeffFamily::Levy(BernsteinRep::stable(0.5)?)),
                "drift" => Ok(CoeffFamily::Levy(BernsteinRep::drift())),
                _ => {
                    let a = rest
                        .strip_prefix("stable:")
                        .and_then(|x| x.parse::<f64>().ok())
                        .ok_or_else(|| Error::Parse(format!("bad Lévy token `{s}`")))?;
                    Ok(CoeffFamily::Levy(BernsteinRep::stable(a)?))
                }
            };
        }
        if let Some(inner) = s.strip_prefix("direct(").and_then(|r| r.strip_suffix(')')) {
            return Ok(CoeffFamily::Direct(inner.parse()?));
        }
        Err(Error::UnsupportedFamily(s.to_string()))
    }
}

/// Coefficients `c(1..=N)` with the mass `Σ_{n>N} c(n)` recorded as tail.
#[derive(Debug, Clone, PartialEq)]
pub struct SubordCoeffs {
    pub family: CoeffFamily,
    /// `c[i]` is `c(i + 1)`
    pub c: Vec<f64>,
    pub tail: f64,
}

impl SubordCoeffs {
    pub fn len(&self) -> usize {
        self.c.len()
    }

    pub fn is_empty(&self) -> bool {
        self.c.is_empty()
    }

    pub fn get(&self, n: usize) -> f64 {
        if n == 0 {
            0.0
        } else {
            self.c.get(n - 1).copied().unwrap_or(0.0)
        }
    }

    pub fn total(&self) -> f64 {
        let mut s: NeumaierSum = self.c.iter().copied().collect();
        s.add(self.tail);
        s.total()
    }
}

/// `Σ_{n ≤ N} c(n) φ^(n)`, each power truncated at word length `cap`; the
/// coefficient tail and the truncated mass go to the deficit.
pub fn subordinate(phi: &Measure, coeffs: &SubordCoeffs, cap: u32) -> Result<Measure> {
    let mut acc: BTreeMap<Element, Atom> = BTreeMap::new();
    let mut deficit = NeumaierSum::default();
    deficit.add(coeffs.tail);
    let mut power = phi.clone();
    for n in 1..=coeffs.len() {
        if n > 1 {
            power = convolve(&power, phi, cap)?;
        }
        let c = coeffs.get(n);
        deficit.add(c * power.deficit());
        for (g, a) in power.support() {
            acc.entry(*g).or_insert(Atom { mass: 0.0, len: a.len }).mass += c * a.mass;
        }
    }
    Ok(Measure::new(phi.group().clone(), acc, deficit.total(), None, format!("subord({})", phi.descriptor())))
}

pub fn coeffs_alpha(alpha: f64, n: usize) -> Result<SubordCoeffs> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::Domain(format!("α must lie in (0,1], got {alpha}")));
    }
    if n == 0 {
        return Err(Error::Domain("N must be at least 1".into()));
    }
    let mut c = Vec::with_capacity(n);
    let mut cur = alpha;
    // Σ_{m>k} c(m) = Γ(k+1−α)/(Γ(1−α)Γ(k+1)), by the same product recursion
    let mut tail = 1.0 - alpha;
    for k in 1..=n {
        c.push(cur);
        let kf = k as f64;
        cur *= (kf - alpha) / (kf + 1.0);
        if k < n {
            tail *= (kf + 1.0 - alpha) / (kf + 1.0);
        }
    }
    Ok(SubordCoeffs { family: CoeffFamily::Alpha(alpha), c, tail })
}

pub fn coeffs_from_levy(rep: &BernsteinRep, n: usize) -> Result<SubordCoeffs> {
    if rep.a != 0.0 {
        return Err(Error::Domain("coefficients require ψ(0) = 0".into()));
    }
    if n == 0 {
        return Err(Error::Domain("N must be at least 1".into()));
    }
    let c = (1..=n as u64).map(|k| rep.coefficient(k)).collect::<Result<Vec<_>>>()?;
    let tail = rep.tail_beyond(n as u64)?;
    Ok(SubordCoeffs { family: CoeffFamily::Levy(*rep), c, tail })
}

pub fn coeffs_direct(ell: SlowVaryFn, n: usize) -> Result<SubordCoeffs> {
    if n == 0 {
        return Err(Error::Domain("N must be at least 1".into()));
    }
    let w = Weight::SlowCoeff(ell);
    let raw: Vec<f64> = (1..=n).map(|k| w.w(k as f64)).collect();
    let beyond = w.sum_beyond(n as u64);
    let mut z: NeumaierSum = raw.iter().copied().collect();
    z.add(beyond);
    let z = z.total();
    Ok(SubordCoeffs { family: CoeffFamily::Direct(ell), c: raw.iter().map(|x| x / z).collect(), tail: beyond / z })
}

/// `x ↦ 1 − F(1 − x)` for `F(z) = Σ c(n) zⁿ`, in logarithmic form.
#[derive(Debug, Clone)]
pub enum GenFn {
    /// `1 − F(1−x) = x^α`
    Power(f64),
    Direct(DirectGen),
    /// finite sequence, evaluated by summation
    Finite(SubordCoeffs),
}

impl GenFn {
    /// `ln(1 − F(1 − x))` given `ln x`, `0 < x ≤ 1`.
    pub fn ln_one_minus(&self, ln_x: f64) -> f64 {
        match self {
            GenFn::Power(a) => a * ln_x,
            GenFn::Direct(d) => d.ln_one_minus(ln_x),
            GenFn::Finite(c) => {
                // 1 − Σ c zⁿ = tail + Σ c(n)(1 − zⁿ)
                let lz = (-ln_x.exp()).ln_1p();
                let mut s = NeumaierSum::default();
                s.add(c.tail);
                for (i, ci) in c.c.iter().enumerate() {
                    s.add(ci * -((i as f64 + 1.0) * lz).exp_m1());
                }
                s.total().ln()
            }
        }
    }
}

/// Generating function of the untruncated direct weights.
#[derive(Debug, Clone)]
pub struct DirectGen {
    weight: Weight,
    /// `w_c(n)` for `n = 0..=HEAD_TABLE`, index 0 unused
    w: Vec<f64>,
    z: f64,
}

const HEAD: usize = 1000;
const HEAD_TABLE: usize = 50_000;

impl DirectGen {
    pub fn new(ell: SlowVaryFn) -> Self {
        let weight = Weight::SlowCoeff(ell);
        let mut w = vec![0.0];
        w.extend((1..=HEAD_TABLE).map(|k| weight.w(k as f64)));
        let mut z: NeumaierSum = w[1..=HEAD].iter().copied().collect();
        z.add(weight.sum_beyond(HEAD as u64));
        DirectGen { weight, w, z: z.total() }
    }

    /// Normalizer `Σ_{n ≥ 1} w_c(n)`.
    pub fn normalizer(&self) -> f64 {
        self.z
    }

    pub fn coefficient(&self, n: usize) -> f64 {
        let w = self.w.get(n).copied().unwrap_or_else(|| self.weight.w(n as f64));
        w / self.z
    }

    /// `ln Σ_{n≥1} w_c(n)(1 − e^{-λn})` with `λ = e^{ln_lambda}`.
    pub fn ln_g(&self, ln_lambda: f64) -> f64 {
        let lambda = ln_lambda.exp();
        if lambda >= 1e-3 {
            let m = ((40.0 / lambda).ceil() as usize).clamp(HEAD, HEAD_TABLE);
            let mut s = NeumaierSum::default();
            for n in 1..=m {
                s.add(self.w[n] * -(-(lambda * n as f64)).exp_m1());
            }
            s.add(self.weight.sum_beyond(m as u64));
            return s.total().ln();
        }
        // head: λ Σ n w_c(n) r(λn) with r(x) = (1 − e^{-x})/x
        let r = |x: f64| if x < 1e-10 { 1.0 - 0.5 * x } else { -(-x).exp_m1() / x };
        let mut s = NeumaierSum::default();
        for n in 1..=HEAD {
            let nf = n as f64;
            s.add(nf * self.w[n] * r(lambda * nf));
        }
        let head = ln_lambda + s.total().ln();
        // tail: ∫_{HEAD+½}^∞ w_c(t)(1 − e^{-λt}) dt in v = ln t
        let lo = (HEAD as f64 + 0.5).ln();
        let hi = (-ln_lambda + 40f64.ln()).max(lo + 1.0);
        let g = |v: f64| {
            let ln_y = ln_lambda + v;
            let y = ln_y.exp();
            let ln_one_minus = if y < 1e-10 { ln_y + (1.0 - 0.5 * y).ln() } else { (-(-y).exp_m1()).ln() };
            self.weight.ln_w_ln(v) + ln_one_minus + v
        };
        let n = ((hi - lo) / 8.0).ceil().max(2.0) as usize;
        let br = breaks(lo, hi, n);
        let mid = integrate_ln(g, lo, hi, &br, 1e-11).ln_value;
        let far = self.weight.ln_tail_ln(hi);
        log_sum_exp([head, mid, far])
    }

    pub fn ln_one_minus(&self, ln_x: f64) -> f64 {
        if ln_x == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        // λ = −ln(1 − x)
        let x = ln_x.exp();
        let ln_lambda = if x < 1e-8 { ln_x + (1.0 + 0.5 * x).ln() } else if x >= 1.0 { f64::INFINITY } else { (-(-x).ln_1p()).ln() };
        if ln_lambda == f64::INFINITY {
            return 0.0;
        }
        self.ln_g(ln_lambda) - self.z.ln()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigUint;
    use num_traits::{One, ToPrimitive};

    /// c(n) of 1 − (1−x)^{1/2} is Cat(n−1)/2^{2n−1}.
    fn binomial_oracle(n: u32) -> f64 {
        let m = n - 1;
        let mut num = BigUint::one();
        let mut den = BigUint::one();
        for i in 0..m {
            num *= BigUint::from(2 * m - i);
            den *= BigUint::from(i + 1);
        }
        den *= BigUint::from(m + 1);
        den <<= (2 * n - 1) as usize;
        // scaled integer division keeps 60 significant bits
        let shift = 200usize;
        let q = (num << shift) / den;
        q.to_f64().unwrap() / 2f64.powi(shift as i32)
    }

    #[test]
    fn alpha_half_first_terms() {
        let c = coeffs_alpha(0.5, 3).unwrap();
        assert_eq!(c.c, vec![0.5, 0.125, 0.0625]);
    }

    #[test]
    fn alpha_half_matches_binomial_series() {
        let c = coeffs_alpha(0.5, 50).unwrap();
        for n in 1..=50u32 {
            let o = binomial_oracle(n);
            assert!((c.get(n as usize) - o).abs() <= 1e-12 * o.max(1e-300), "{n}");
        }
        assert!((c.total() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn alpha_one_is_identity() {
        let c = coeffs_alpha(1.0, 5).unwrap();
        assert_eq!(c.c, vec![1.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(c.tail, 0.0);
    }

    #[test]
    fn alpha_tail_at_large_n() {
        let n = 10_000;
        let c = coeffs_alpha(0.5, n).unwrap();
        assert!((c.total() - 1.0).abs() < 1e-12);
        // oracle: partial sums at 4N plus the asymptotic N^{-1/2}/√π law
        let far = coeffs_alpha(0.5, 4 * n).unwrap();
        let between: f64 = far.c[n..].iter().sum();
        assert!((c.tail - (between + far.tail)).abs() < 1e-12);
        let asym = 1.0 / (std::f64::consts::PI * n as f64).sqrt();
        assert!((c.tail / asym - 1.0).abs() < 1e-4);
        assert!(coeffs_alpha(1.5, 3).is_err());
        assert!(coeffs_alpha(0.0, 3).is_err());
    }

    #[test]
    fn levy_sqrt_matches_gamma_formula() {
        let rep = BernsteinRep::stable(0.5).unwrap();
        assert!((rep.psi(1.0).unwrap() - 1.0).abs() < 1e-9);
        assert!((rep.psi(4.0).unwrap() - 2.0).abs() < 1e-8);
        let c = coeffs_from_levy(&rep, 100).unwrap();
        let alpha = coeffs_alpha(0.5, 100).unwrap();
        for n in 1..=100u64 {
            let nf = n as f64;
            let oracle = (ln_gamma(nf - 0.5) - ln_gamma(nf + 1.0)).exp() / (2.0 * std::f64::consts::PI.sqrt());
            let got = c.get(n as usize);
            assert!((got - oracle).abs() < 1e-7 * oracle, "{n}: {got} {oracle}");
            assert!((got - alpha.get(n as usize)).abs() < 1e-7);
        }
        assert!((c.total() - 1.0).abs() < 1e-6, "{}", c.total());
        assert!((c.tail - alpha.tail).abs() < 1e-7);
    }

    #[test]
    fn drift_only() {
        let c = coeffs_from_levy(&BernsteinRep::drift(), 4).unwrap();
        assert_eq!(c.c, vec![1.0, 0.0, 0.0, 0.0]);
        assert_eq!(c.tail, 0.0);
    }

    #[test]
    fn direct_coefficients() {
        let ell = SlowVaryFn::log_power(1.0).unwrap();
        let c = coeffs_direct(ell, 1000).unwrap();
        let w = Weight::SlowCoeff(ell);
        let z0 = c.get(1) / w.w(1.0);
        for n in [1usize, 10, 500, 1000] {
            assert!((c.get(n) / w.w(n as f64) / z0 - 1.0).abs() < 1e-14);
        }
        assert!((c.total() - 1.0).abs() < 1e-12);
        let one = coeffs_direct(ell, 1).unwrap();
        assert!(one.get(1) < 1.0 && one.tail > 0.0);
        let il = coeffs_direct(SlowVaryFn::iter_log(2, 1.0).unwrap(), 2000).unwrap();
        let r = il.get(1000) / il.get(2000);
        assert!((1.9..=2.3).contains(&r), "{r}");
    }

    #[test]
    fn generating_functions_match_finite_sums() {
        let ell = SlowVaryFn::log_power(1.0).unwrap();
        let fam = CoeffFamily::Direct(ell);
        let GenFn::Direct(d) = fam.generating().unwrap() else { panic!() };
        // moderate x: compare with a long finite sum using the same normalizer
        for x in [0.9f64, 0.3, 0.01] {
            let lz = (-x).ln_1p();
            let mut s = NeumaierSum::default();
            let top = 2_000_000usize;
            for n in 1..=top {
                let e = -((n as f64) * lz).exp_m1();
                s.add(d.coefficient(n) * e);
            }
            s.add(Weight::SlowCoeff(ell).sum_beyond(top as u64) / d.normalizer());
            let got = d.ln_one_minus(x.ln());
            assert!((got - s.total().ln()).abs() < 1e-9, "{x}: {got} {}", s.total().ln());
        }
        // tiny x: 1 − F(1 − x) ≍ 1/ℓ-type decay, continuous across the head/tail switch
        let a = d.ln_one_minus(-2.0 * 1e-3f64.ln().abs());
        let b = d.ln_one_minus(-2.0 * 1e-3f64.ln().abs() - 1e-6);
        assert!((a - b).abs() < 1e-5);
        let small = d.ln_one_minus(-1000.0);
        let smaller = d.ln_one_minus(-2000.0);
        assert!(smaller < small && small < 0.0);
        // c(n) ≍ 1/(nℓ(n)) gives 1 − F(1−x) ≈ J(1/x)/Z, i.e. ≈ 1/(Z(1 + ln(1/x)))
        let approx = -(d.normalizer() * 1001.0).ln();
        assert!((small - approx).abs() < 0.05, "{small} {approx}");
        assert_eq!(GenFn::Power(0.5).ln_one_minus(-4.0), -2.0);
    }

    #[test]
    fn finite_generating_function() {
        let c = coeffs_alpha(1.0, 3).unwrap();
        let g = GenFn::Finite(c);
        assert!((g.ln_one_minus(0.25f64.ln()) - 0.25f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn tokens() {
        for t in ["alpha:0.5", "levy:sqrt", "levy:stable:0.3", "direct(logpow:1.0)", "levy:drift"] {
            let f: CoeffFamily = t.parse().unwrap();
            assert_eq!(f.to_string(), t);
        }
        assert!("alpha:2.0".parse::<CoeffFamily>().is_err());
    }
}
