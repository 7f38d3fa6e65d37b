//! Dirichlet forms, truncated moments, pseudo-Poincaré reports and
//! Dirichlet-form comparisons.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustc_hash::FxHashMap;

use crate::error::{Error, Result};
use crate::group::{shared_ball, Element, GroupSpec, Metric};
use crate::measure::{Atom, Measure};
use crate::numeric::NeumaierSum;
use crate::slowvary::ThetaFn;

/// Finitely supported function on a group, zero outside its ball.
#[derive(Debug, Clone, PartialEq)]
pub struct TestFunction {
    pub name: String,
    pub radius: u32,
    pub values: BTreeMap<Element, f64>,
}

impl TestFunction {
    pub fn new(name: impl Into<String>, radius: u32, values: BTreeMap<Element, f64>) -> Self {
        TestFunction { name: name.into(), radius, values }
    }

    /// Indicator of the ball of radius `r`.
    pub fn ball_indicator(group: &GroupSpec, r: u32) -> Result<Self> {
        let ball = shared_ball(group, r)?;
        let values = ball.within(r).iter().map(|g| (*g, 1.0)).collect();
        Ok(TestFunction::new(format!("ind:{r}"), r, values))
    }

    /// `f(g) = (w − |g|)₊`.
    pub fn tent(group: &GroupSpec, w: u32) -> Result<Self> {
        let r = w.saturating_sub(1);
        let ball = shared_ball(group, r)?;
        let values = ball.within(r).iter().map(|g| (*g, (w - ball.wordlen(g).unwrap()) as f64)).collect();
        Ok(TestFunction::new(format!("tent:{w}"), r, values))
    }

    /// Independent fair ±1 values on the ball of radius `r`.
    pub fn random_signs(group: &GroupSpec, r: u32, seed: u64) -> Result<Self> {
        let ball = shared_ball(group, r)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values = ball.within(r).iter().map(|g| (*g, if rng.random::<bool>() { 1.0 } else { -1.0 })).collect();
        Ok(TestFunction::new(format!("rand:{r}:{seed}"), r, values))
    }

    pub fn norm2_sq(&self) -> f64 {
        self.values.values().map(|v| v * v).collect::<NeumaierSum>().total()
    }

    pub fn scaled(&self, c: f64) -> Self {
        TestFunction::new(self.name.clone(), self.radius, self.values.iter().map(|(g, v)| (*g, c * v)).collect())
    }
}

/// Composition of a test-function suite.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteSpec {
    pub indicator_radii: Vec<u32>,
    pub tent_widths: Vec<u32>,
    pub random_count: usize,
    pub random_radius: u32,
    pub seed: u64,
}

impl SuiteSpec {
    /// Ball indicators of radii 2, 4, 8, 16, tents of widths 4, 8, 16 and
    /// 50 random sign functions on the radius-16 ball.
    pub fn standard(seed: u64) -> Self {
        SuiteSpec {
            indicator_radii: vec![2, 4, 8, 16],
            tent_widths: vec![4, 8, 16],
            random_count: 50,
            random_radius: 16,
            seed,
        }
    }

    pub fn build(&self, group: &GroupSpec) -> Result<Vec<TestFunction>> {
        let mut out = Vec::new();
        for &r in &self.indicator_radii {
            out.push(TestFunction::ball_indicator(group, r)?);
        }
        for &w in &self.tent_widths {
            out.push(TestFunction::tent(group, w)?);
        }
        for i in 0..self.random_count {
            out.push(TestFunction::random_signs(group, self.random_radius, self.seed.wrapping_add(i as u64))?);
        }
        Ok(out)
    }
}

/// `E_μ(f,f)` on the represented masses with the deficit uncertainty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirichletValue {
    pub value: f64,
    /// `2‖f‖²·deficit`, the largest contribution of unrepresented mass
    pub uncertainty: f64,
}

/// `D(y) = Σ_x |f(xy) − f(x)|²`.
fn shift_energy(group: &GroupSpec, f: &FxHashMap<Element, f64>, y: Element) -> f64 {
    let y_inv = group.invert(y);
    let mut s = NeumaierSum::default();
    for (x, v) in f {
        let w = f.get(&group.compose(*x, y)).copied().unwrap_or(0.0);
        s.add((w - v) * (w - v));
        // points x' = x·y⁻¹ outside the support with f(x'y) = f(x) ≠ 0
        if !f.contains_key(&group.compose(*x, y_inv)) {
            s.add(v * v);
        }
    }
    s.total()
}

struct Prepared<'a> {
    f: &'a TestFunction,
    map: FxHashMap<Element, f64>,
    norm2: f64,
    metric: Metric,
}

impl<'a> Prepared<'a> {
    fn new(group: &GroupSpec, f: &'a TestFunction) -> Result<Self> {
        let map = f.values.iter().filter(|(_, v)| **v != 0.0).map(|(g, v)| (*g, *v)).collect();
        Ok(Prepared { f, map, norm2: f.norm2_sq(), metric: Metric::new(group, 2 * f.radius)? })
    }

    /// Steps longer than twice the support radius move the support off itself.
    fn is_far(&self, y: &Element) -> bool {
        !matches!(self.metric.wordlen(y), Some(l) if l <= 2 * self.f.radius)
    }

    fn shift(&self, group: &GroupSpec, y: Element) -> f64 {
        if self.is_far(&y) {
            2.0 * self.norm2
        } else {
            shift_energy(group, &self.map, y)
        }
    }
}

/// `E_μ(f,f) = ½ Σ_{x,y} |f(xy) − f(x)|² μ(y)`.
pub fn dirichlet_form(mu: &Measure, f: &TestFunction) -> Result<DirichletValue> {
    let group = mu.group();
    let p = Prepared::new(group, f)?;
    let mut near = NeumaierSum::default();
    let mut far_mass = NeumaierSum::default();
    for (y, a) in mu.support() {
        if p.is_far(y) {
            far_mass.add(a.mass);
        } else {
            near.add(a.mass * shift_energy(group, &p.map, *y));
        }
    }
    let value = 0.5 * near.total() + p.norm2 * far_mass.total();
    Ok(DirichletValue { value, uncertainty: 2.0 * p.norm2 * mu.deficit() })
}

/// Truncated tail and second moment of a symmetric law on ℤ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailMoment {
    /// `Σ_{|n|≤r} n² φ(n)`
    pub g: f64,
    /// represented `Σ_{|n|>r} φ(n)`
    pub h_lower: f64,
    /// `h_lower` plus the truncation deficit
    pub h_upper: f64,
}

/// `G_φ(r)` and `H_φ(r)`.
pub fn tail_and_moment(phi: &Measure, r: u64) -> Result<TailMoment> {
    if phi.group().lattice_dim() != Some(1) {
        return Err(Error::WrongGroup(phi.group().name()));
    }
    let mut g = NeumaierSum::default();
    let mut h = NeumaierSum::default();
    for (e, a) in phi.support() {
        let n = e.0[0].unsigned_abs();
        if n <= r {
            g.add((n * n) as f64 * a.mass);
        } else {
            h.add(a.mass);
        }
    }
    let h_lower = h.total();
    Ok(TailMoment { g: g.total(), h_lower, h_upper: h_lower + phi.deficit() })
}

/// `C = max φ(b)/φ(a)` over represented `|a| ≤ |b|`.
pub fn monotonicity_constant(phi: &Measure) -> Result<f64> {
    if phi.group().lattice_dim() != Some(1) {
        return Err(Error::WrongGroup(phi.group().name()));
    }
    let mut by_radius: BTreeMap<u64, f64> = BTreeMap::new();
    for (e, a) in phi.support() {
        let m = by_radius.entry(e.0[0].unsigned_abs()).or_insert(f64::INFINITY);
        *m = m.min(a.mass);
    }
    // sup over |b| of φ(b)/min_{|a|≤|b|} φ(a), with φ(a) = 0 off the support
    let r_max = by_radius.keys().last().copied().unwrap_or(0);
    let mut c: f64 = 1.0;
    let mut min_so_far = f64::INFINITY;
    for r in 0..=r_max {
        let lo = by_radius.get(&r).copied().unwrap_or(0.0);
        min_so_far = min_so_far.min(lo);
        for sign in [1i64, -1] {
            let b = phi.mass(&Element([sign * r as i64, 0, 0]));
            if b > 0.0 {
                if min_so_far == 0.0 {
                    return Ok(f64::INFINITY);
                }
                c = c.max(b / min_so_far);
            }
        }
    }
    Ok(c)
}

/// How the bound factor of an element-mode record is computed.
#[derive(Debug, Clone)]
pub enum ElementFactor {
    /// `θ(1 + |g|²)` for radial measures
    Theta(ThetaFn),
    /// `min{1/H_φ(|g|), |g|²/G_φ(|g|)}` from the one-dimensional law
    Truncated(Measure),
}

#[derive(Debug, Clone)]
pub enum PoincareMode {
    /// `g = s_i^n` for `1 ≤ n ≤ n_max`; φ is the law on ℤ
    Power { generator: usize, n_max: u64 },
    /// listed elements, against the Dirichlet form of φ on the group
    Element { elements: Vec<Element>, factor: ElementFactor },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoincareRecord {
    pub case_id: String,
    pub n_or_wordlen: i64,
    pub lhs: f64,
    pub branch_h: f64,
    pub branch_g: f64,
    pub dirichlet: f64,
    pub ratio: f64,
    /// `lhs·H_φ(|n|) ≤ 16·C·E_{s,φ}(f,f)` (power mode only)
    pub quantitative: Option<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoincareReport {
    pub records: Vec<PoincareRecord>,
    pub max_ratio: f64,
    pub c_mono: Option<f64>,
    pub violations: usize,
    pub deficit: f64,
}

impl PoincareReport {
    /// CSV with columns `case_id,n_or_wordlen,lhs,branch_H,branch_G,dirichlet,ratio`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("case_id,n_or_wordlen,lhs,branch_H,branch_G,dirichlet,ratio\n");
        for r in &self.records {
            s.push_str(&format!(
                "{},{},{:e},{:e},{:e},{:e},{:e}\n",
                r.case_id, r.n_or_wordlen, r.lhs, r.branch_h, r.branch_g, r.dirichlet, r.ratio
            ));
        }
        s
    }

    /// Largest ratio among records with the given `n_or_wordlen`.
    pub fn max_ratio_at(&self, n: i64) -> f64 {
        self.records.iter().filter(|r| r.n_or_wordlen == n).map(|r| r.ratio).fold(0.0, f64::max)
    }
}

/// Push-forward of a law φ on ℤ along `n ↦ s^n`.
pub fn power_pushforward(group: &GroupSpec, generator: usize, phi: &Measure) -> Result<Measure> {
    if phi.group().lattice_dim() != Some(1) {
        return Err(Error::WrongGroup(phi.group().name()));
    }
    let s = *group
        .generators()
        .get(generator)
        .ok_or_else(|| Error::OutOfRange { value: generator as f64, lo: 0.0, hi: group.k() as f64 - 1.0 })?;
    let mut support = BTreeMap::new();
    for (e, a) in phi.support() {
        let n = e.0[0];
        // |s_i^n| = |n| in every catalog group
        support.insert(group.power(s, n), Atom { mass: a.mass, len: n.unsigned_abs() as u32 });
    }
    Ok(Measure::new(group.clone(), support, phi.deficit(), phi.far_radius(), format!("push({},s{generator})", phi.descriptor())))
}

/// Pseudo-Poincaré ratios over a suite.
pub fn pseudo_poincare_report(group: &GroupSpec, mode: &PoincareMode, phi: &Measure, suite: &[TestFunction]) -> Result<PoincareReport> {
    if suite.is_empty() {
        return Err(Error::EmptyInput("test-function suite".into()));
    }
    let mut records = Vec::new();
    let mut violations = 0;
    let (c_mono, deficit) = match mode {
        PoincareMode::Power { generator, n_max } => {
            let c = monotonicity_constant(phi)?;
            let pushed = power_pushforward(group, *generator, phi)?;
            let s = group.generators()[*generator];
            for f in suite {
                let e = dirichlet_form(&pushed, f)?.value;
                if e <= 0.0 {
                    return Err(Error::ZeroDirichlet(f.name.clone()));
                }
                let p = Prepared::new(group, f)?;
                for n in 1..=*n_max {
                    let lhs = p.shift(group, group.power(s, n as i64));
                    let tm = tail_and_moment(phi, n)?;
                    let branch_h = 1.0 / tm.h_lower;
                    let branch_g = (n * n) as f64 / tm.g;
                    let ok = lhs * tm.h_lower <= 16.0 * c * e * (1.0 + 1e-12);
                    if !ok {
                        violations += 1;
                    }
                    records.push(PoincareRecord {
                        case_id: f.name.clone(),
                        n_or_wordlen: n as i64,
                        lhs,
                        branch_h,
                        branch_g,
                        dirichlet: e,
                        ratio: lhs / (branch_h.min(branch_g) * e),
                        quantitative: Some(ok),
                    });
                }
            }
            (Some(c), phi.deficit())
        }
        PoincareMode::Element { elements, factor } => {
            if phi.group() != group {
                return Err(Error::Domain("φ must live on the group in element mode".into()));
            }
            let r_max = elements.iter().map(|g| g.0.iter().map(|c| c.unsigned_abs()).sum::<u64>()).max().unwrap_or(0);
            let metric = Metric::new(group, (4 * r_max).min(u32::MAX as u64) as u32)?;
            let lens: Vec<u32> = elements
                .iter()
                .map(|g| metric.wordlen(g).ok_or_else(|| Error::Domain(format!("no word length for {g:?}"))))
                .collect::<Result<_>>()?;
            for f in suite {
                let e = dirichlet_form(phi, f)?.value;
                if e <= 0.0 {
                    return Err(Error::ZeroDirichlet(f.name.clone()));
                }
                let p = Prepared::new(group, f)?;
                for (g, &len) in elements.iter().zip(&lens) {
                    let lhs = p.shift(group, *g);
                    let (branch_h, branch_g) = match factor {
                        ElementFactor::Theta(t) => (t.theta(1.0 + (len as f64).powi(2))?, f64::INFINITY),
                        ElementFactor::Truncated(law) => {
                            let tm = tail_and_moment(law, len as u64)?;
                            (1.0 / tm.h_lower, (len as f64).powi(2) / tm.g)
                        }
                    };
                    records.push(PoincareRecord {
                        case_id: f.name.clone(),
                        n_or_wordlen: len as i64,
                        lhs,
                        branch_h,
                        branch_g,
                        dirichlet: e,
                        ratio: lhs / (branch_h.min(branch_g) * e),
                        quantitative: None,
                    });
                }
            }
            (None, phi.deficit())
        }
    };
    let max_ratio = records.iter().map(|r| r.ratio).fold(0.0, f64::max);
    Ok(PoincareReport { records, max_ratio, c_mono, violations, deficit })
}

/// `Ĉ = max_f E_μ(f,f)/E_ν(f,f)`, a lower bound for the comparison constant.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub c_hat: f64,
    pub argmax: String,
    /// `(case, E_μ, E_ν)`
    pub values: Vec<(String, f64, f64)>,
}

pub fn dirichlet_comparison(mu: &Measure, nu: &Measure, suite: &[TestFunction]) -> Result<Comparison> {
    if mu.group() != nu.group() {
        return Err(Error::Domain("comparison of measures on different groups".into()));
    }
    if suite.is_empty() {
        return Err(Error::EmptyInput("test-function suite".into()));
    }
    let mut values = Vec::with_capacity(suite.len());
    let mut best = (f64::NEG_INFINITY, String::new());
    for f in suite {
        let a = dirichlet_form(mu, f)?.value;
        let b = dirichlet_form(nu, f)?.value;
        if b <= 0.0 {
            return Err(Error::ZeroDirichlet(f.name.clone()));
        }
        if a / b > best.0 {
            best = (a / b, f.name.clone());
        }
        values.push((f.name.clone(), a, b));
    }
    Ok(Comparison { c_hat: best.0, argmax: best.1, values })
}
