//! Convolution powers and return probabilities.
//!
//! The direct engine iterates exact sparse convolutions on a Cayley ball;
//! the Fourier engine integrates `μ̂(θ)^n` over the torus entirely in the
//! log domain, so probabilities far below double precision are reachable.

use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;
use rustc_hash::FxHashMap;

use crate::bernstein::GenFn;
use crate::error::{Error, Result};
use crate::group::{Element, GroupKind, GroupSpec, Metric};
use crate::law::{Weight, ZLaw};
use crate::measure::{Atom, Extent, Measure, MeasureDesc};
use crate::numeric::{integrate_ln, ln_add, log_sum_exp, NeumaierSum};

/// `μ * ν`, restricted to word length at most `cap`.
pub fn convolve(mu: &Measure, nu: &Measure, cap: u32) -> Result<Measure> {
    if mu.group() != nu.group() {
        return Err(Error::Domain("convolution of measures on different groups".into()));
    }
    let group = mu.group();
    let metric = Metric::new(group, cap)?;
    let mut acc: FxHashMap<Element, f64> = FxHashMap::default();
    let mut dropped = NeumaierSum::default();
    for (x, a) in mu.support() {
        for (y, b) in nu.support() {
            let g = group.compose(*x, *y);
            let m = a.mass * b.mass;
            match metric.wordlen(&g) {
                Some(l) if l <= cap => *acc.entry(g).or_insert(0.0) += m,
                _ => dropped.add(m),
            }
        }
    }
    let mut support = BTreeMap::new();
    for (g, m) in acc {
        let len = metric.wordlen(&g).expect("kept elements have a length");
        support.insert(g, Atom { mass: m, len });
    }
    let (dm, dn) = (mu.deficit(), nu.deficit());
    let deficit = dm + dn - dm * dn + dropped.total();
    Ok(Measure::new(group.clone(), support, deficit, None, format!("({})*({})", mu.descriptor(), nu.descriptor())))
}

/// Engine provenance of a return series.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Engine {
    Direct,
    Fourier,
}

impl fmt::Display for Engine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Engine::Direct => "direct",
            Engine::Fourier => "fourier",
        })
    }
}

impl std::str::FromStr for Engine {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "direct" => Ok(Engine::Direct),
            "fourier" => Ok(Engine::Fourier),
            other => Err(Error::Parse(format!("unknown engine `{other}`"))),
        }
    }
}

/// `log μ^(n)(e)` with certified bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReturnEntry {
    pub n: u64,
    pub log_p_lower: f64,
    pub log_p_upper: f64,
    pub deficit: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReturnSeries {
    pub entries: Vec<ReturnEntry>,
    pub engine: Engine,
    pub descriptor: String,
    /// steps whose probability fell below the double-precision floor
    pub omitted: Vec<u64>,
}

/// Probabilities below this are dropped by the direct engine.
pub const UNDERFLOW_FLOOR: f64 = 1e-300;

impl ReturnSeries {
    /// CSV with columns `n,log_p_lower,log_p_upper,engine,deficit`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("n,log_p_lower,log_p_upper,engine,deficit\n");
        for e in &self.entries {
            s.push_str(&format!("{},{:e},{:e},{},{:e}\n", e.n, e.log_p_lower, e.log_p_upper, self.engine, e.deficit));
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::EmptyInput("series CSV".into()))?;
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        if cols != ["n", "log_p_lower", "log_p_upper", "engine", "deficit"] {
            return Err(Error::Parse(format!("unexpected series header `{header}`")));
        }
        let mut entries = Vec::new();
        let mut engine = Engine::Direct;
        for line in lines {
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            if f.len() != 5 {
                return Err(Error::Parse(format!("bad series row `{line}`")));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| Error::Parse(format!("bad number `{s}`")));
            engine = f[3].parse()?;
            entries.push(ReturnEntry {
                n: f[0].parse().map_err(|_| Error::Parse(format!("bad step `{}`", f[0])))?,
                log_p_lower: num(f[1])?,
                log_p_upper: num(f[2])?,
                deficit: num(f[4])?,
            });
        }
        Ok(ReturnSeries { entries, engine, descriptor: String::new(), omitted: Vec::new() })
    }

    pub fn get(&self, n: u64) -> Option<&ReturnEntry> {
        self.entries.iter().find(|e| e.n == n)
    }

    /// Violations of monotonicity and log-convexity of `m ↦ log p(2m)`.
    pub fn structure_violations(&self, tol: f64) -> Vec<String> {
        let even: Vec<(f64, f64)> =
            self.entries.iter().filter(|e| e.n % 2 == 0).map(|e| ((e.n / 2) as f64, e.log_p_lower)).collect();
        let mut out = Vec::new();
        for w in even.windows(2) {
            if w[1].1 > w[0].1 + tol {
                out.push(format!("log p increases between 2m = {} and {}", 2.0 * w[0].0, 2.0 * w[1].0));
            }
        }
        for w in even.windows(3) {
            let (m1, l1) = w[0];
            let (m2, l2) = w[1];
            let (m3, l3) = w[2];
            let chord = ((m3 - m2) * l1 + (m2 - m1) * l3) / (m3 - m1);
            if l2 > chord + tol {
                out.push(format!("log p not convex at 2m = {}", 2.0 * m2));
            }
        }
        out
    }
}

fn inner(a: &Measure, b: &Measure) -> f64 {
    let (small, big) = if a.support().len() <= b.support().len() { (a, b) } else { (b, a) };
    small.support().iter().map(|(g, x)| x.mass * big.mass(g)).collect::<NeumaierSum>().total()
}

fn norm2(a: &Measure) -> f64 {
    a.support().values().map(|x| x.mass * x.mass).collect::<NeumaierSum>().total().sqrt()
}

/// `p(n) = μ^(n)(e)` for `n = 1..=nmax` by iterated convolution, as
/// `Σ_g μ^(⌈n/2⌉)(g) μ^(⌊n/2⌋)(g)` (μ symmetric).
pub fn return_series_direct(mu: &Measure, nmax: u64, cap: u32) -> Result<ReturnSeries> {
    if !mu.is_symmetric() {
        return Err(Error::Domain("the direct engine needs a symmetric measure".into()));
    }
    let reach = nmax.div_ceil(2).saturating_mul(mu.max_len() as u64);
    let cap = cap.min(reach.min(u32::MAX as u64) as u32);
    let mut entries = Vec::new();
    let mut omitted = Vec::new();
    let mut prev = crate::measure::delta(mu.group());
    let mut cur = mu.clone();
    let mut k = 1u64;
    let mut push = |n: u64, a: &Measure, b: &Measure| {
        let p = inner(a, b);
        let (da, db) = (a.deficit(), b.deficit());
        let upper = (p + da + db).min((norm2(a) + da) * (norm2(b) + db)).min(1.0).max(p);
        if p < UNDERFLOW_FLOOR {
            omitted.push(n);
        } else {
            entries.push(ReturnEntry { n, log_p_lower: p.ln(), log_p_upper: upper.ln(), deficit: da + db });
        }
    };
    loop {
        let n_odd = 2 * k - 1;
        if n_odd > nmax {
            break;
        }
        push(n_odd, &cur, &prev);
        if 2 * k <= nmax {
            push(2 * k, &cur, &cur);
        }
        if 2 * k + 1 > nmax {
            break;
        }
        let next = convolve(&cur, mu, cap)?;
        prev = std::mem::replace(&mut cur, next);
        k += 1;
    }
    Ok(ReturnSeries { entries, engine: Engine::Direct, descriptor: mu.descriptor().to_string(), omitted })
}

/// `μ̂(θ) = Σ_y μ(y) cos(y·θ)` on ℤ^d.
pub fn char_fn(mu: &Measure, theta: &[f64]) -> Result<f64> {
    let d = mu.group().lattice_dim().ok_or_else(|| Error::WrongGroup(mu.group().name()))?;
    if theta.len() != d {
        return Err(Error::Domain(format!("angle has {} coordinates, group has {d}", theta.len())));
    }
    let s: NeumaierSum = mu
        .support()
        .iter()
        .map(|(g, a)| {
            let dot: f64 = (0..d).map(|i| g.0[i] as f64 * theta[i]).sum();
            a.mass * dot.cos()
        })
        .collect();
    Ok(s.total())
}

/// Symbol `1 − μ̂` of a lazy symmetric measure on ℤ^d, evaluated at
/// `θ_i = sign_i · e^{-u_i}` and returned as a logarithm.
pub trait Symbol: Send + Sync {
    fn dim(&self) -> usize;
    /// `ln(1 − μ̂(θ))` for the represented measure.
    fn ln_one_minus(&self, u: &[f64], signs: &[i8]) -> f64;
    /// `ln(1 − μ̂(θ) − deficit)`, the symbol of the upper-bound surrogate.
    fn ln_one_minus_upper(&self, u: &[f64], signs: &[i8]) -> f64 {
        self.ln_one_minus(u, signs)
    }
    fn deficit(&self) -> f64 {
        0.0
    }
    /// Whether μ̂ is invariant under flipping any single coordinate.
    fn coordinate_symmetric(&self) -> bool;
}

/// Symbol of a finitely supported measure.
pub struct FiniteSymbol {
    dim: usize,
    atoms: Vec<([f64; 3], f64)>,
    max_norm: f64,
    deficit: f64,
    coord_sym: bool,
}

impl FiniteSymbol {
    pub fn new(mu: &Measure) -> Result<Self> {
        Self::build(mu, true)
    }

    fn build(mu: &Measure, need_lazy: bool) -> Result<Self> {
        let dim = mu.group().lattice_dim().ok_or_else(|| Error::WrongGroup(mu.group().name()))?;
        let e = mu.mass(&Element::IDENTITY);
        if need_lazy && e < 0.5 {
            return Err(Error::NotLazy(e));
        }
        let atoms: Vec<([f64; 3], f64)> = mu
            .support()
            .iter()
            .filter(|(g, _)| **g != Element::IDENTITY)
            .map(|(g, a)| ([g.0[0] as f64, g.0[1] as f64, g.0[2] as f64], a.mass))
            .collect();
        let coord_sym = (0..dim).all(|i| {
            mu.support().iter().all(|(g, a)| {
                let mut h = *g;
                h.0[i] = -h.0[i];
                mu.mass(&h) == a.mass
            })
        });
        let max_norm = atoms.iter().map(|(y, _)| y.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
        Ok(FiniteSymbol { dim, atoms, max_norm, deficit: mu.deficit(), coord_sym })
    }

    /// `ln Σ_y μ(y) 2 sin²(y·θ/2)`; quadratic in log form once every
    /// `|y·θ| < 1e-5`, so angles below the double range stay exact.
    fn ln_sum(&self, u: &[f64], signs: &[i8]) -> f64 {
        let u_min = u[..self.dim].iter().copied().fold(f64::INFINITY, f64::min);
        let scale = (-u_min).exp();
        let mut rel = [0.0; 3];
        for i in 0..self.dim {
            rel[i] = signs[i] as f64 * (u_min - u[i]).exp();
        }
        let small = self.max_norm * scale < 1e-5;
        let mut s = NeumaierSum::default();
        for (y, m) in &self.atoms {
            let z = y[0] * rel[0] + y[1] * rel[1] + y[2] * rel[2];
            if small {
                s.add(m * 0.5 * z * z);
            } else {
                let h = (0.5 * z * scale).sin();
                s.add(m * 2.0 * h * h);
            }
        }
        if small { s.total().ln() - 2.0 * u_min } else { s.total().ln() }
    }
}

impl Symbol for FiniteSymbol {
    fn dim(&self) -> usize {
        self.dim
    }

    fn ln_one_minus(&self, u: &[f64], signs: &[i8]) -> f64 {
        let l = self.ln_sum(u, signs);
        if self.deficit > 0.0 { ln_add(l, self.deficit.ln()) } else { l }
    }

    fn ln_one_minus_upper(&self, u: &[f64], signs: &[i8]) -> f64 {
        self.ln_sum(u, signs)
    }

    fn deficit(&self) -> f64 {
        self.deficit
    }

    fn coordinate_symmetric(&self) -> bool {
        self.coord_sym
    }
}

/// Untruncated generator-power law on ℤ^d: `1 − μ̂ = d⁻¹ Σ_i S(θ_i)`.
pub struct GenPowSymbol {
    dim: usize,
    law: ZLaw,
}

impl GenPowSymbol {
    pub fn new(dim: usize, weight: Weight) -> Result<Self> {
        Ok(GenPowSymbol { dim, law: ZLaw::new(weight, None)? })
    }

    /// Mass at the identity.
    pub fn identity_mass(&self) -> f64 {
        1.0 / self.law.normalizer()
    }
}

impl Symbol for GenPowSymbol {
    fn dim(&self) -> usize {
        self.dim
    }

    fn ln_one_minus(&self, u: &[f64], _signs: &[i8]) -> f64 {
        log_sum_exp(u[..self.dim].iter().map(|&ui| self.law.ln_symbol(ui))) - (self.dim as f64).ln()
    }

    fn coordinate_symmetric(&self) -> bool {
        true
    }
}

/// `(δ_e + μ)/2`: the symbol halves.
pub struct LazySymbol(pub Box<dyn Symbol>);

impl Symbol for LazySymbol {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn ln_one_minus(&self, u: &[f64], signs: &[i8]) -> f64 {
        self.0.ln_one_minus(u, signs) - std::f64::consts::LN_2
    }

    fn ln_one_minus_upper(&self, u: &[f64], signs: &[i8]) -> f64 {
        self.0.ln_one_minus_upper(u, signs) - std::f64::consts::LN_2
    }

    fn deficit(&self) -> f64 {
        0.5 * self.0.deficit()
    }

    fn coordinate_symmetric(&self) -> bool {
        self.0.coordinate_symmetric()
    }
}

/// `Σ c(n) φ^(n)` with the untruncated coefficient sequence:
/// `1 − μ̂_ψ = 1 − F(1 − (1 − φ̂))`.
pub struct SubordSymbol {
    pub base: Box<dyn Symbol>,
    pub gen: GenFn,
}

impl Symbol for SubordSymbol {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn ln_one_minus(&self, u: &[f64], signs: &[i8]) -> f64 {
        self.gen.ln_one_minus(self.base.ln_one_minus(u, signs).min(0.0))
    }

    fn ln_one_minus_upper(&self, u: &[f64], signs: &[i8]) -> f64 {
        self.gen.ln_one_minus(self.base.ln_one_minus_upper(u, signs).min(0.0))
    }

    fn coordinate_symmetric(&self) -> bool {
        self.base.coordinate_symmetric()
    }
}

/// Symbol for a descriptor on ℤ^d; untruncated laws use their analytic
/// symbols, everything else is materialized.
pub fn symbol_for(desc: &MeasureDesc, group: &GroupSpec) -> Result<Box<dyn Symbol>> {
    symbol_inner(desc, group, true)
}

fn symbol_inner(desc: &MeasureDesc, group: &GroupSpec, need_lazy: bool) -> Result<Box<dyn Symbol>> {
    let dim = group.lattice_dim().ok_or_else(|| Error::WrongGroup(group.name()))?;
    let analytic = |w: Weight| -> Result<Box<dyn Symbol>> {
        let s = GenPowSymbol::new(dim, w)?;
        let e = s.identity_mass();
        if need_lazy && e < 0.5 {
            return Err(Error::NotLazy(e));
        }
        Ok(Box::new(s))
    };
    match desc {
        MeasureDesc::Lazified(inner) => Ok(Box::new(LazySymbol(symbol_inner(inner, group, false)?))),
        MeasureDesc::GenPow { ell, r: Extent::Ideal } => analytic(Weight::Slow(*ell)),
        MeasureDesc::Stable { alpha, r: Extent::Ideal } => analytic(Weight::Stable(*alpha)),
        MeasureDesc::Subord { coeffs, base, n: Extent::Ideal, .. } => {
            Ok(Box::new(SubordSymbol { base: symbol_inner(base, group, true)?, gen: coeffs.generating()? }))
        }
        MeasureDesc::Subord { base, .. } if base.is_ideal() => {
            Err(Error::Domain("a truncated subordination needs a finite base measure".into()))
        }
        _ => {
            let mu = desc.build(group)?;
            Ok(Box::new(FiniteSymbol::build(&mu, need_lazy)?))
        }
    }
}

/// `ln p(n)` and its relative quadrature error.
fn ln_return(sym: &dyn Symbol, n: u64, upper: bool) -> Result<(f64, f64)> {
    let d = sym.dim();
    if !(1..=3).contains(&d) {
        return Err(Error::UnsupportedGroup(format!("ℤ^{d}")));
    }
    let nf = n as f64;
    let u0 = -std::f64::consts::PI.ln();
    let log_int = |u: &[f64], signs: &[i8]| -> f64 {
        let l = if upper { sym.ln_one_minus_upper(u, signs) } else { sym.ln_one_minus(u, signs) };
        if l >= 0.0 {
            return f64::NEG_INFINITY;
        }
        let ln_mu = (-l.exp()).ln_1p();
        nf * ln_mu - u[..d].iter().sum::<f64>()
    };
    // locate the peak along the diagonal u_1 = … = u_d
    let diag = |u: f64| {
        let v = [u; 3];
        log_int(&v[..d], &[1, 1, 1][..d])
    };
    let mut best = (f64::NEG_INFINITY, u0);
    let mut samples = Vec::new();
    let mut u = u0;
    loop {
        let f = diag(u);
        samples.push((u, f));
        if f > best.0 {
            best = (f, u);
        }
        if u > best.1 + 5.0 && d as f64 * u > -best.0 + 45.0 {
            break;
        }
        u += 0.1 + 0.01 * u.abs();
    }
    if !best.0.is_finite() {
        return Err(Error::Quadrature(format!("integrand vanishes for n = {n}")));
    }
    let upper_u = (-best.0 + 45.0 + d as f64 * std::f64::consts::PI.ln()).max(best.1 + 5.0);
    // peak width: where the diagonal integrand is within e^{-1} of its peak
    let near: Vec<f64> = samples.iter().filter(|(_, f)| *f >= best.0 - 1.0).map(|(u, _)| *u).collect();
    let width = (near.last().unwrap() - near.first().unwrap()).max(0.05);
    let mut br = Vec::new();
    let mut k = 0.5;
    while k * width < upper_u - u0 {
        br.push(best.1 + k * width);
        br.push(best.1 - k * width);
        k *= 2.0;
    }
    br.retain(|x| *x > u0 && *x < upper_u);
    br.sort_by(f64::total_cmp);
    let patterns: Vec<Vec<i8>> = if sym.coordinate_symmetric() {
        vec![vec![1; d]]
    } else {
        (0..1usize << (d - 1))
            .map(|bits| (0..d).map(|i| if i > 0 && (bits >> (i - 1)) & 1 == 1 { -1 } else { 1 }).collect())
            .collect()
    };
    let multiplicity = if sym.coordinate_symmetric() { (1u32 << d) as f64 } else { 2.0 };
    let mut parts = Vec::new();
    let mut rel_err: f64 = 0.0;
    for signs in &patterns {
        let (v, e) = nested(&log_int, signs, d, u0, upper_u, &br);
        parts.push(v);
        rel_err = rel_err.max(e);
    }
    let total = log_sum_exp(parts) + multiplicity.ln() - d as f64 * (2.0 * std::f64::consts::PI).ln();
    Ok((total, rel_err))
}

fn nested<F: Fn(&[f64], &[i8]) -> f64>(f: &F, signs: &[i8], d: usize, lo: f64, hi: f64, br: &[f64]) -> (f64, f64) {
    let mut worst: f64 = 0.0;
    let q = match d {
        1 => integrate_ln(|u| f(&[u], signs), lo, hi, br, 1e-10),
        2 => integrate_ln(
            |u1| {
                let q = integrate_ln(|u2| f(&[u1, u2], signs), lo, hi, br, 1e-10);
                q.ln_value
            },
            lo,
            hi,
            br,
            1e-9,
        ),
        _ => integrate_ln(
            |u1| {
                integrate_ln(
                    |u2| integrate_ln(|u3| f(&[u1, u2, u3], signs), lo, hi, br, 1e-8).ln_value,
                    lo,
                    hi,
                    br,
                    1e-8,
                )
                .ln_value
            },
            lo,
            hi,
            br,
            1e-7,
        ),
    };
    worst = worst.max(q.rel_error);
    (q.ln_value, worst)
}

/// Fourier-engine return series for a symbol.
pub fn return_series_symbol(sym: &dyn Symbol, ns: &[u64], descriptor: &str) -> Result<ReturnSeries> {
    let deficit = sym.deficit();
    let entries: Result<Vec<ReturnEntry>> = ns
        .par_iter()
        .map(|&n| {
            let (lo, e_lo) = ln_return(sym, n, false)?;
            let (hi, e_hi) = if deficit > 0.0 { ln_return(sym, n, true)? } else { (lo, e_lo) };
            let slack = (1.0 + e_lo.max(e_hi)).ln();
            Ok(ReturnEntry { n, log_p_lower: lo - slack, log_p_upper: (hi + slack).min(0.0), deficit })
        })
        .collect();
    Ok(ReturnSeries { entries: entries?, engine: Engine::Fourier, descriptor: descriptor.to_string(), omitted: Vec::new() })
}

/// Fourier-engine return series of a finitely supported lazy measure.
pub fn return_series_fourier(mu: &Measure, ns: &[u64]) -> Result<ReturnSeries> {
    let sym = FiniteSymbol::new(mu)?;
    return_series_symbol(&sym, ns, mu.descriptor())
}

/// Fourier-engine return series for a descriptor (untruncated laws allowed).
pub fn return_series_fourier_desc(desc: &MeasureDesc, group: &GroupSpec, ns: &[u64]) -> Result<ReturnSeries> {
    if !matches!(group.kind(), GroupKind::Lattice(_)) {
        return Err(Error::WrongGroup(group.name()));
    }
    let sym = symbol_for(desc, group)?;
    return_series_symbol(sym.as_ref(), ns, &desc.to_string())
}

/// Point mass `μ(x)` recovered from a one-dimensional symbol.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MassEstimate {
    pub x: i64,
    pub value: f64,
    /// Kronrod–Gauss discrepancy plus the truncated angular range
    pub error: f64,
}

/// Panels of the inversion grid: uniform on `[π/400, π]`, unit steps in
/// `u = −ln θ` from there down to `θ = e^{-45}`.
const INVERSION_PANELS: usize = 400;
const INVERSION_U_MAX: f64 = 45.0;

/// `μ(x) = π⁻¹ ∫_0^π (1 − e^{L(θ)}) cos(xθ) dθ` with `L = ln(1 − μ̂)`, one
/// node set for every `x`.
pub fn fourier_masses(sym: &dyn Symbol, xs: &[i64]) -> Result<Vec<MassEstimate>> {
    if sym.dim() != 1 {
        return Err(Error::Domain("mass inversion is one-dimensional".into()));
    }
    use std::f64::consts::PI;
    let theta_1 = PI / INVERSION_PANELS as f64;
    let uniform: Vec<f64> = (0..=INVERSION_PANELS).map(|i| theta_1 + (PI - theta_1) * i as f64 / INVERSION_PANELS as f64).collect();
    let u_1 = -theta_1.ln();
    let mut us = vec![u_1];
    let mut u = u_1.ceil();
    while u < INVERSION_U_MAX {
        us.push(u);
        u += 1.0;
    }
    us.push(INVERSION_U_MAX);
    // (θ, Kronrod weight, Gauss weight, e^{L(θ)})
    let mut nodes: Vec<(f64, f64, f64, f64)> = Vec::new();
    for n in crate::numeric::gk15_nodes(&uniform) {
        let h = sym.ln_one_minus(&[-n.x.ln()], &[1]).exp();
        nodes.push((n.x, n.wk, n.wg, h));
    }
    for n in crate::numeric::gk15_nodes(&us) {
        let theta = (-n.x).exp();
        let h = sym.ln_one_minus(&[n.x], &[1]).exp();
        nodes.push((theta, n.wk * theta, n.wg * theta, h));
    }
    let far = (-INVERSION_U_MAX).exp() / PI;
    Ok(xs
        .iter()
        .map(|&x| {
            let (mut k, mut g) = (NeumaierSum::default(), NeumaierSum::default());
            for &(t, wk, wg, h) in &nodes {
                let c = h * (x as f64 * t).cos();
                k.add(wk * c);
                g.add(wg * c);
            }
            let base = if x == 0 { 1.0 } else { 0.0 };
            MassEstimate { x, value: base - k.total() / PI, error: (k.total() - g.total()).abs() / PI + far }
        })
        .collect())
}

/// `n` values spaced geometrically with `per_octave` points per doubling,
/// rounded to even integers.
pub fn geometric_steps(lo: u64, hi: u64, per_octave: u32) -> Vec<u64> {
    let mut out: Vec<u64> = Vec::new();
    let ratio = 2f64.powf(1.0 / per_octave as f64);
    let mut x = lo as f64;
    while x <= hi as f64 * (1.0 + 1e-12) {
        let n = ((x / 2.0).round() as u64 * 2).max(2);
        if out.last() != Some(&n) && n <= hi {
            out.push(n);
        }
        x *= ratio;
    }
    out
}
