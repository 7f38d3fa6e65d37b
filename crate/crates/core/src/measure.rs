//! Finitely supported symmetric measures with an explicit truncation
//! deficit, the measure families built from slowly varying functions, and
//! strong and weak ρ-moments.

use std::collections::BTreeMap;
use std::fmt;

use crate::bernstein::{subordinate, CoeffFamily};
use crate::error::{Error, Result};
use crate::group::{shared_ball, Element, GroupKind, GroupSpec};
use crate::law::{Weight, ZLaw};
use crate::numeric::{integrate, NeumaierSum};
use crate::slowvary::{fmt_num, ln1p_exp, MomentFn, SlowVaryFn};

/// Mass at an element together with its word length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub mass: f64,
    pub len: u32,
}

/// Symmetric measure with finite represented support.
///
/// `deficit` is the mass of the ideal measure that is not represented.
/// When `far_radius` is set, all of that mass sits at word length greater
/// than `far_radius`.
#[derive(Debug, Clone, PartialEq)]
pub struct Measure {
    group: GroupSpec,
    support: BTreeMap<Element, Atom>,
    deficit: f64,
    far_radius: Option<u32>,
    descriptor: String,
}

impl Measure {
    pub fn new(
        group: GroupSpec,
        support: BTreeMap<Element, Atom>,
        deficit: f64,
        far_radius: Option<u32>,
        descriptor: impl Into<String>,
    ) -> Self {
        Measure { group, support, deficit, far_radius, descriptor: descriptor.into() }
    }

    /// Measure from `(element, mass)` pairs; word lengths from the group metric.
    pub fn from_masses(group: &GroupSpec, masses: &[(Element, f64)], deficit: f64, descriptor: &str) -> Result<Self> {
        let radius = masses.iter().map(|(g, _)| g.0.iter().map(|x| x.unsigned_abs()).sum::<u64>()).max().unwrap_or(0);
        let metric = crate::group::Metric::new(group, radius.min(u32::MAX as u64) as u32)?;
        let mut support = BTreeMap::new();
        for &(g, m) in masses {
            let len = metric.wordlen(&g).ok_or_else(|| Error::MissingWordLength(g.to_string()))?;
            support.entry(g).or_insert(Atom { mass: 0.0, len }).mass += m;
        }
        Ok(Measure::new(group.clone(), support, deficit, None, descriptor))
    }

    pub fn group(&self) -> &GroupSpec {
        &self.group
    }

    pub fn support(&self) -> &BTreeMap<Element, Atom> {
        &self.support
    }

    pub fn deficit(&self) -> f64 {
        self.deficit
    }

    pub fn far_radius(&self) -> Option<u32> {
        self.far_radius
    }

    pub fn descriptor(&self) -> &str {
        &self.descriptor
    }

    pub fn mass(&self, g: &Element) -> f64 {
        self.support.get(g).map_or(0.0, |a| a.mass)
    }

    /// Represented mass.
    pub fn total(&self) -> f64 {
        self.support.values().map(|a| a.mass).collect::<NeumaierSum>().total()
    }

    /// Largest word length in the support.
    pub fn max_len(&self) -> u32 {
        self.support.values().map(|a| a.len).max().unwrap_or(0)
    }

    /// Whether `μ(g) = μ(g⁻¹)` holds exactly on the support.
    pub fn is_symmetric(&self) -> bool {
        self.support.iter().all(|(g, a)| self.mass(&self.group.invert(*g)) == a.mass)
    }

    /// Nonnegative masses, exact symmetry, and mass + deficit = 1 within `tol`.
    pub fn validate(&self, tol: f64) -> Result<()> {
        if self.support.values().any(|a| !(a.mass >= 0.0)) || !(self.deficit >= 0.0) {
            return Err(Error::Domain(format!("negative mass in {}", self.descriptor)));
        }
        if !self.is_symmetric() {
            return Err(Error::Domain(format!("{} is not symmetric", self.descriptor)));
        }
        let t = self.total() + self.deficit;
        if (t - 1.0).abs() > tol {
            return Err(Error::Domain(format!("{}: mass + deficit = {t}", self.descriptor)));
        }
        Ok(())
    }

    /// `(1 − λ)δ_e + λμ`.
    pub fn rescaled(&self, lambda: f64) -> Result<Measure> {
        if !(lambda > 0.0 && lambda <= 1.0) {
            return Err(Error::Domain(format!("rescaling factor must lie in (0,1], got {lambda}")));
        }
        let mut support: BTreeMap<Element, Atom> =
            self.support.iter().map(|(g, a)| (*g, Atom { mass: lambda * a.mass, len: a.len })).collect();
        support.entry(Element::IDENTITY).or_insert(Atom { mass: 0.0, len: 0 }).mass += 1.0 - lambda;
        let descriptor = if lambda == 0.5 { format!("lazy({})", self.descriptor) } else { format!("rescale({},{})", self.descriptor, fmt_num(lambda)) };
        Ok(Measure::new(self.group.clone(), support, lambda * self.deficit, self.far_radius, descriptor))
    }

    /// `(δ_e + μ)/2`.
    pub fn lazify(&self) -> Measure {
        self.rescaled(0.5).expect("1/2 is a valid rescaling")
    }
}

/// Point mass at the identity.
pub fn delta(group: &GroupSpec) -> Measure {
    let mut support = BTreeMap::new();
    support.insert(Element::IDENTITY, Atom { mass: 1.0, len: 0 });
    Measure::new(group.clone(), support, 0.0, None, "delta")
}

/// `φ(e) = 1/2`, `φ(s_i^{±1}) = 1/(4k)`.
pub fn lazy_uniform(group: &GroupSpec) -> Measure {
    let mut support = BTreeMap::new();
    support.insert(Element::IDENTITY, Atom { mass: 0.5, len: 0 });
    let m = 1.0 / (4.0 * group.k() as f64);
    for s in group.steps() {
        support.insert(s, Atom { mass: m, len: 1 });
    }
    Measure::new(group.clone(), support, 0.0, None, "lazy")
}

/// Density of the radial families.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RadialVariant {
    /// `1/(V(1+|g|) ℓ(1+|g|))`
    VolumeBased,
    /// `1/((1+|g|)^D ℓ(1+|g|²))`
    DegreeBased,
}

/// `ln V(n)`; exact on lattices, `c·n^D` fitted at the last radius otherwise.
fn ln_volume(group: &GroupSpec, ln_n: f64, c: f64) -> f64 {
    let inv = (-ln_n).exp();
    match group.kind() {
        GroupKind::Lattice(1) => std::f64::consts::LN_2 + ln_n + (0.5 * inv).ln_1p(),
        GroupKind::Lattice(2) => std::f64::consts::LN_2 + 2.0 * ln_n + (inv + 0.5 * inv * inv).ln_1p(),
        GroupKind::Lattice(_) => (4.0f64 / 3.0).ln() + 3.0 * ln_n + (1.5 * inv + 2.0 * inv * inv + 0.75 * inv * inv * inv).ln_1p(),
        GroupKind::Heisenberg => c.ln() + 4.0 * ln_n,
    }
}

/// `ln S(r)` for the sphere of radius `r = e^{ln_r}`.
fn ln_sphere(group: &GroupSpec, ln_r: f64, c: f64) -> f64 {
    match group.kind() {
        GroupKind::Lattice(1) => std::f64::consts::LN_2,
        GroupKind::Lattice(2) => 4f64.ln() + ln_r,
        GroupKind::Lattice(_) => 4f64.ln() + 2.0 * ln_r + (0.5 * (-2.0 * ln_r).exp()).ln_1p(),
        GroupKind::Heisenberg => (4.0 * c).ln() + 3.0 * ln_r,
    }
}

fn ln_radial_density(group: &GroupSpec, ell: &SlowVaryFn, variant: RadialVariant, ln_r: f64, c: f64) -> f64 {
    let ln_1pr = ln1p_exp(ln_r);
    match variant {
        RadialVariant::VolumeBased => -ln_volume(group, ln_1pr, c) - ell.ln_ell_from_l1(ln1p_exp(ln_1pr)),
        RadialVariant::DegreeBased => {
            -(group.growth_degree() as f64) * ln_1pr - ell.ln_ell_from_l1(ln1p_exp(ln1p_exp(2.0 * ln_r)))
        }
    }
}

/// `Σ_{|g| > R} density(|g|)` by the midpoint rule on the sphere-size model.
fn radial_tail(group: &GroupSpec, ell: &SlowVaryFn, variant: RadialVariant, r: u32, c: f64) -> f64 {
    let f = |ln_t: f64| ln_sphere(group, ln_t, c) + ln_radial_density(group, ell, variant, ln_t, c);
    let a = r as f64 + 0.5;
    let lo = a.ln();
    let hi = 700.0;
    let n = 28;
    let br: Vec<f64> = (1..n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect();
    let body = integrate(|v: f64| (f(v) + v).exp(), lo, hi, &br, 1e-12, 0.0).value;
    // far field: S(r)·density(r) ~ A/(r ℓ(r^p))
    let lead = match group.kind() {
        GroupKind::Lattice(1) | GroupKind::Lattice(2) => 2.0,
        GroupKind::Lattice(_) => 4.0 / 3.0,
        GroupKind::Heisenberg => c,
    } * group.growth_degree() as f64;
    let far = match variant {
        RadialVariant::VolumeBased => group.growth_degree() as f64 * ell.tail_integral_ln(hi),
        RadialVariant::DegreeBased => 0.5 * lead * ell.tail_integral_ln(2.0 * hi),
    };
    let h = 1e-3 * a;
    let dp = ((f((a + h).ln())).exp() - (f((a - h).ln())).exp()) / (2.0 * h);
    body + far + dp / 24.0
}

/// Radial measure on the ball of radius `R`; the analytic tail beyond `R`
/// is the deficit.
pub fn radial(group: &GroupSpec, ell: SlowVaryFn, variant: RadialVariant, r: u32) -> Result<Measure> {
    if r == 0 {
        return Err(Error::Domain("radius must be positive".into()));
    }
    let ball = shared_ball(group, r + 1)?;
    let vols = ball.volumes();
    let d = group.growth_degree() as f64;
    let c = vols[r as usize] as f64 / (r as f64).powf(d);
    let dens = |len: u32| -> f64 {
        match variant {
            RadialVariant::VolumeBased => {
                1.0 / (vols[len as usize + 1] as f64 * ell.eval(1.0 + len as f64))
            }
            RadialVariant::DegreeBased => {
                let l = len as f64;
                1.0 / ((1.0 + l).powf(d) * ell.eval(1.0 + l * l))
            }
        }
    };
    let table: Vec<f64> = (0..=r).map(dens).collect();
    let mut z = NeumaierSum::default();
    for len in 0..=r {
        let s = vols[len as usize] - if len == 0 { 0 } else { vols[len as usize - 1] };
        z.add(s as f64 * table[len as usize]);
    }
    let tail = radial_tail(group, &ell, variant, r, c);
    z.add(tail);
    let z = z.total();
    let mut support = BTreeMap::new();
    for g in ball.within(r) {
        let len = ball.wordlen(g).expect("element of the ball");
        support.insert(*g, Atom { mass: table[len as usize] / z, len });
    }
    let name = match variant {
        RadialVariant::VolumeBased => "radialV",
        RadialVariant::DegreeBased => "radialD",
    };
    Ok(Measure::new(group.clone(), support, tail / z, Some(r), format!("{name}({ell},{r})")))
}

/// `μ(g) = k⁻¹ Σ_i Σ_{|n| ≤ R} φ₁(n)[g = s_i^n]` for the one-dimensional law
/// `φ₁ ∝ w(|n|)`.
pub fn generator_power_law(group: &GroupSpec, weight: Weight, r: u32, descriptor: String) -> Result<Measure> {
    let law = ZLaw::new(weight, Some(r as u64))?;
    let k = group.k() as f64;
    let mut support = BTreeMap::new();
    for &s in group.generators() {
        for n in -(r as i64)..=(r as i64) {
            let g = group.power(s, n);
            // |s_i^n| = |n| in every catalog group
            support.entry(g).or_insert(Atom { mass: 0.0, len: n.unsigned_abs() as u32 }).mass += law.mass(n) / k;
        }
    }
    Ok(Measure::new(group.clone(), support, law.deficit(), Some(r), descriptor))
}

pub fn generator_power(group: &GroupSpec, ell: SlowVaryFn, r: u32) -> Result<Measure> {
    generator_power_law(group, Weight::Slow(ell), r, format!("genpow({ell},{r})"))
}

/// Generator-power measure with stable-like law `∝ (1+|n|)^{-1-α}`.
pub fn stable_like(group: &GroupSpec, alpha: f64, r: u32) -> Result<Measure> {
    generator_power_law(group, Weight::Stable(alpha), r, format!("stable({},{r})", fmt_num(alpha)))
}

/// Value with a flag marking certified lower bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounded {
    pub value: f64,
    pub lower_bound: bool,
}

/// `Σ_g ρ(|g|) μ(g)`.
pub fn moment(mu: &Measure, rho: &MomentFn) -> Bounded {
    let s: NeumaierSum = mu.support.values().map(|a| rho.eval(a.len as f64) * a.mass).collect();
    Bounded { value: s.total(), lower_bound: mu.deficit > 0.0 }
}

/// `W(ρ, μ) = sup_s s·μ({ρ(|g|) > s})`, attained just below a jump of ρ.
pub fn weak_moment(mu: &Measure, rho: &MomentFn) -> Bounded {
    let mut by_len: BTreeMap<u32, f64> = BTreeMap::new();
    for a in mu.support.values() {
        *by_len.entry(a.len).or_insert(0.0) += a.mass;
    }
    let mut w: f64 = 0.0;
    let mut above = 0.0;
    // ρ is nondecreasing in the word length
    let levels: Vec<(u32, f64)> = by_len.into_iter().rev().collect();
    for (len, m) in levels {
        above += m;
        w = w.max(rho.eval(len as f64) * above);
    }
    Bounded { value: w, lower_bound: mu.deficit > 0.0 }
}

/// Radius argument of a descriptor: finite or the ideal untruncated law.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Extent {
    Finite(u64),
    Ideal,
}

impl fmt::Display for Extent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Extent::Finite(n) => write!(f, "{n}"),
            Extent::Ideal => write!(f, "inf"),
        }
    }
}

impl std::str::FromStr for Extent {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "inf" {
            return Ok(Extent::Ideal);
        }
        s.parse::<u64>().map(Extent::Finite).map_err(|_| Error::Parse(format!("bad radius `{s}`")))
    }
}

impl Extent {
    fn finite(&self, what: &str) -> Result<u64> {
        match self {
            Extent::Finite(n) => Ok(*n),
            Extent::Ideal => Err(Error::Domain(format!("{what}: the untruncated law has no finite representation"))),
        }
    }
}

/// Measure descriptor grammar used by configs and the CLI.
#[derive(Debug, Clone, PartialEq)]
pub enum MeasureDesc {
    Delta,
    Lazy,
    Radial { variant: RadialVariant, ell: SlowVaryFn, r: u32 },
    GenPow { ell: SlowVaryFn, r: Extent },
    Stable { alpha: f64, r: Extent },
    Subord { coeffs: CoeffFamily, base: Box<MeasureDesc>, n: Extent, cap: u32 },
    Lazified(Box<MeasureDesc>),
}

impl MeasureDesc {
    /// Materialize the represented measure.
    pub fn build(&self, group: &GroupSpec) -> Result<Measure> {
        match self {
            MeasureDesc::Delta => Ok(delta(group)),
            MeasureDesc::Lazy => Ok(lazy_uniform(group)),
            MeasureDesc::Radial { variant, ell, r } => radial(group, *ell, *variant, *r),
            MeasureDesc::GenPow { ell, r } => {
                let r = u32::try_from(r.finite("genpow")?).map_err(|_| Error::Domain("radius too large".into()))?;
                generator_power(group, *ell, r)
            }
            MeasureDesc::Stable { alpha, r } => {
                let r = u32::try_from(r.finite("stable")?).map_err(|_| Error::Domain("radius too large".into()))?;
                stable_like(group, *alpha, r)
            }
            MeasureDesc::Subord { coeffs, base, n, cap } => {
                let n = n.finite("subord")? as usize;
                let phi = base.build(group)?;
                let c = coeffs.coeffs(n)?;
                let mut m = subordinate(&phi, &c, *cap)?;
                m.descriptor = self.to_string();
                Ok(m)
            }
            MeasureDesc::Lazified(inner) => {
                let mut m = inner.build(group)?.lazify();
                m.descriptor = self.to_string();
                Ok(m)
            }
        }
    }

    /// Whether the descriptor refers to an untruncated law somewhere.
    pub fn is_ideal(&self) -> bool {
        match self {
            MeasureDesc::GenPow { r, .. } | MeasureDesc::Stable { r, .. } => *r == Extent::Ideal,
            MeasureDesc::Subord { base, n, .. } => *n == Extent::Ideal || base.is_ideal(),
            MeasureDesc::Lazified(inner) => inner.is_ideal(),
            _ => false,
        }
    }
}

impl fmt::Display for MeasureDesc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MeasureDesc::Delta => write!(f, "delta"),
            MeasureDesc::Lazy => write!(f, "lazy"),
            MeasureDesc::Radial { variant: RadialVariant::VolumeBased, ell, r } => write!(f, "radialV({ell},{r})"),
            MeasureDesc::Radial { variant: RadialVariant::DegreeBased, ell, r } => write!(f, "radialD({ell},{r})"),
            MeasureDesc::GenPow { ell, r } => write!(f, "genpow({ell},{r})"),
            MeasureDesc::Stable { alpha, r } => write!(f, "stable({},{r})", fmt_num(*alpha)),
            MeasureDesc::Subord { coeffs, base, n, cap } => write!(f, "subord({coeffs},base={base},{n},{cap})"),
            MeasureDesc::Lazified(inner) => write!(f, "lazy({inner})"),
        }
    }
}

/// Split `a,b(c,d),e` at top-level commas.
pub(crate) fn split_args(s: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, ch) in s.char_indices() {
        match ch {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => {
                out.push(s[start..i].trim());
                start = i + 1;
            }
            _ => {}
        }
    }
    out.push(s[start..].trim());
    out
}

impl std::str::FromStr for MeasureDesc {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "delta" => return Ok(MeasureDesc::Delta),
            "lazy" => return Ok(MeasureDesc::Lazy),
            _ => {}
        }
        let (name, inner) = s
            .split_once('(')
            .and_then(|(n, rest)| rest.strip_suffix(')').map(|r| (n.trim(), r)))
            .ok_or_else(|| Error::Parse(format!("bad measure descriptor `{s}`")))?;
        let args = split_args(inner);
        let want = |n: usize| -> Result<()> {
            if args.len() == n {
                Ok(())
            } else {
                Err(Error::Parse(format!("`{name}` takes {n} arguments, got {}", args.len())))
            }
        };
        let radius = |a: &str| -> Result<u32> { a.parse::<u32>().map_err(|_| Error::Parse(format!("bad radius `{a}`"))) };
        match name {
            "radialV" | "radialD" => {
                want(2)?;
                let variant = if name == "radialV" { RadialVariant::VolumeBased } else { RadialVariant::DegreeBased };
                Ok(MeasureDesc::Radial { variant, ell: args[0].parse()?, r: radius(args[1])? })
            }
            "genpow" => {
                want(2)?;
                Ok(MeasureDesc::GenPow { ell: args[0].parse()?, r: args[1].parse()? })
            }
            "stable" => {
                want(2)?;
                let alpha: f64 = args[0].parse().map_err(|_| Error::Parse(format!("bad index `{}`", args[0])))?;
                if !(alpha > 0.0 && alpha < 2.0) {
                    return Err(Error::Domain(format!("stable index must lie in (0,2), got {alpha}")));
                }
                Ok(MeasureDesc::Stable { alpha, r: args[1].parse()? })
            }
            "subord" => {
                want(4)?;
                let base = args[1]
                    .strip_prefix("base=")
                    .ok_or_else(|| Error::Parse(format!("expected `base=…`, got `{}`", args[1])))?;
                Ok(MeasureDesc::Subord {
                    coeffs: args[0].parse()?,
                    base: Box::new(base.parse()?),
                    n: args[2].parse()?,
                    cap: radius(args[3])?,
                })
            }
            "lazy" => {
                want(1)?;
                Ok(MeasureDesc::Lazified(Box::new(args[0].parse()?)))
            }
            _ => Err(Error::Parse(format!("unknown measure `{name}`"))),
        }
    }
}
