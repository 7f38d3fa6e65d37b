//! Catalog groups of polynomial growth: the lattices ℤ¹, ℤ², ℤ³ and the
//! discrete Heisenberg group H₃(ℤ), with word length computed by
//! breadth-first search on the Cayley graph.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex, OnceLock};

use rustc_hash::FxHashMap;

use crate::error::{Error, Result};
use crate::numeric::fit_line;

/// Default cap on the number of elements a ball may hold.
pub const DEFAULT_ELEMENT_CAP: usize = 50_000_000;

/// Canonical integer coordinates. Lattices use the first `d` slots and keep
/// the rest zero; Heisenberg elements are `(a, b, c)` with
/// `(a,b,c)(a',b',c') = (a+a', b+b', c+c'+ab')`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Element(pub [i64; 3]);

impl Element {
    pub const IDENTITY: Element = Element([0, 0, 0]);

    pub fn coords(&self) -> [i64; 3] {
        self.0
    }
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{})", self.0[0], self.0[1], self.0[2])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GroupKind {
    Lattice(u8),
    Heisenberg,
}

/// A finitely generated catalog group with its minimal generating tuple.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GroupSpec {
    kind: GroupKind,
    generators: Vec<Element>,
}

impl GroupSpec {
    pub fn lattice(d: u8) -> Result<Self> {
        if !(1..=3).contains(&d) {
            return Err(Error::UnsupportedGroup(format!("zd:{d}")));
        }
        let generators = (0..d as usize)
            .map(|i| {
                let mut c = [0; 3];
                c[i] = 1;
                Element(c)
            })
            .collect();
        Ok(GroupSpec { kind: GroupKind::Lattice(d), generators })
    }

    pub fn heisenberg() -> Self {
        GroupSpec { kind: GroupKind::Heisenberg, generators: vec![Element([1, 0, 0]), Element([0, 1, 0])] }
    }

    /// Parses `zd:1`, `zd:2`, `zd:3` or `heis3`.
    pub fn parse(token: &str) -> Result<Self> {
        let t = token.trim();
        if t == "heis3" {
            return Ok(Self::heisenberg());
        }
        if let Some(d) = t.strip_prefix("zd:") {
            let d: u8 = d.parse().map_err(|_| Error::UnsupportedGroup(t.to_string()))?;
            return Self::lattice(d);
        }
        Err(Error::UnsupportedGroup(t.to_string()))
    }

    pub fn name(&self) -> String {
        match self.kind {
            GroupKind::Lattice(d) => format!("zd:{d}"),
            GroupKind::Heisenberg => "heis3".to_string(),
        }
    }

    pub fn kind(&self) -> GroupKind {
        self.kind
    }

    pub fn k(&self) -> usize {
        self.generators.len()
    }

    pub fn generators(&self) -> &[Element] {
        &self.generators
    }

    /// Lattice dimension, `None` for non-abelian groups.
    pub fn lattice_dim(&self) -> Option<usize> {
        match self.kind {
            GroupKind::Lattice(d) => Some(d as usize),
            GroupKind::Heisenberg => None,
        }
    }

    /// Degree of polynomial volume growth.
    pub fn growth_degree(&self) -> u32 {
        match self.kind {
            GroupKind::Lattice(d) => d as u32,
            GroupKind::Heisenberg => 4,
        }
    }

    pub fn identity(&self) -> Element {
        Element::IDENTITY
    }

    pub fn compose(&self, g: Element, h: Element) -> Element {
        let (a, b) = (g.0, h.0);
        match self.kind {
            GroupKind::Lattice(_) => Element([a[0] + b[0], a[1] + b[1], a[2] + b[2]]),
            GroupKind::Heisenberg => Element([a[0] + b[0], a[1] + b[1], a[2] + b[2] + a[0] * b[1]]),
        }
    }

    pub fn invert(&self, g: Element) -> Element {
        let a = g.0;
        match self.kind {
            GroupKind::Lattice(_) => Element([-a[0], -a[1], -a[2]]),
            GroupKind::Heisenberg => Element([-a[0], -a[1], a[0] * a[1] - a[2]]),
        }
    }

    /// `g^n` for any integer `n`.
    pub fn power(&self, g: Element, n: i64) -> Element {
        let a = g.0;
        match self.kind {
            GroupKind::Lattice(_) => Element([a[0] * n, a[1] * n, a[2] * n]),
            // (a,b,c)^n = (na, nb, nc + ab·n(n-1)/2), valid for negative n too
            GroupKind::Heisenberg => Element([n * a[0], n * a[1], n * a[2] + a[0] * a[1] * (n * (n - 1) / 2)]),
        }
    }

    /// The symmetric set S* minus the identity: `s_1, s_1⁻¹, …, s_k, s_k⁻¹`.
    pub fn steps(&self) -> Vec<Element> {
        self.generators.iter().flat_map(|&s| [s, self.invert(s)]).collect()
    }

    pub fn ball(&self, radius: u32) -> Result<Ball> {
        Ball::build(self, radius, DEFAULT_ELEMENT_CAP)
    }
}

/// `Σ_k 2^k C(d,k) C(r,k)`, the ℓ¹ ball volume in ℤ^d.
fn lattice_volume(d: u32, r: u32) -> f64 {
    let (mut total, mut cd, mut cr) = (0.0, 1.0, 1.0);
    for k in 0..=d.min(r) {
        total += 2f64.powi(k as i32) * cd * cr;
        cd *= (d - k) as f64 / (k + 1) as f64;
        cr *= (r - k) as f64 / (k + 1) as f64;
    }
    total
}

/// Lower bound on `V(r)`; on H₃ the projection to ℤ² maps the ball onto
/// the ℓ¹ ball.
fn volume_lower_bound(group: &GroupSpec, r: u32) -> f64 {
    match group.lattice_dim() {
        Some(d) => lattice_volume(d as u32, r),
        None => lattice_volume(2, r),
    }
}

/// Word-length ball around the identity.
#[derive(Debug, Clone)]
pub struct Ball {
    group: GroupSpec,
    radius: u32,
    /// Elements in BFS order; the sphere of radius `r` is
    /// `elements[volumes[r-1]..volumes[r]]`.
    elements: Vec<Element>,
    wordlen: FxHashMap<Element, u32>,
    volumes: Vec<u64>,
}

impl Ball {
    pub fn build(group: &GroupSpec, radius: u32, cap: usize) -> Result<Self> {
        if volume_lower_bound(group, radius) > cap as f64 {
            return Err(Error::BudgetExceeded { radius, cap });
        }
        let steps = group.steps();
        let mut wordlen = FxHashMap::default();
        let mut elements = vec![Element::IDENTITY];
        wordlen.insert(Element::IDENTITY, 0u32);
        let mut volumes = vec![1u64];
        let mut frontier = 0usize;
        for r in 1..=radius {
            let end = elements.len();
            for i in frontier..end {
                let g = elements[i];
                for &s in &steps {
                    let h = group.compose(g, s);
                    if let std::collections::hash_map::Entry::Vacant(slot) = wordlen.entry(h) {
                        if elements.len() >= cap {
                            return Err(Error::BudgetExceeded { radius, cap });
                        }
                        slot.insert(r);
                        elements.push(h);
                    }
                }
            }
            frontier = end;
            volumes.push(elements.len() as u64);
        }
        Ok(Ball { group: group.clone(), radius, elements, wordlen, volumes })
    }

    pub fn group(&self) -> &GroupSpec {
        &self.group
    }

    pub fn radius(&self) -> u32 {
        self.radius
    }

    /// `V(0..=R)`.
    pub fn volumes(&self) -> &[u64] {
        &self.volumes
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// Elements in BFS order (nondecreasing word length).
    pub fn elements(&self) -> &[Element] {
        &self.elements
    }

    /// Elements of word length at most `r`.
    pub fn within(&self, r: u32) -> &[Element] {
        let r = r.min(self.radius) as usize;
        &self.elements[..self.volumes[r] as usize]
    }

    pub fn sphere(&self, r: u32) -> &[Element] {
        if r > self.radius {
            return &[];
        }
        let start = if r == 0 { 0 } else { self.volumes[r as usize - 1] as usize };
        &self.elements[start..self.volumes[r as usize] as usize]
    }

    pub fn wordlen(&self, g: &Element) -> Option<u32> {
        self.wordlen.get(g).copied()
    }

    pub fn contains(&self, g: &Element) -> bool {
        self.wordlen.contains_key(g)
    }

    /// A geodesic word for `g` as `(generator index, ±1)` letters, recovered
    /// by walking down the BFS layers.
    pub fn geodesic_word(&self, g: &Element) -> Option<Vec<(usize, i8)>> {
        let mut len = self.wordlen(g)?;
        let mut cur = *g;
        let mut letters = Vec::with_capacity(len as usize);
        while len > 0 {
            let mut found = None;
            for (i, &s) in self.group.generators.iter().enumerate() {
                for (sign, step) in [(1i8, s), (-1i8, self.group.invert(s))] {
                    // cur = prev · step  ⇒  prev = cur · step⁻¹
                    let prev = self.group.compose(cur, self.group.invert(step));
                    if self.wordlen(&prev) == Some(len - 1) {
                        found = Some((i, sign, prev));
                        break;
                    }
                }
                if found.is_some() {
                    break;
                }
            }
            let (i, sign, prev) = found?;
            letters.push((i, sign));
            cur = prev;
            len -= 1;
        }
        letters.reverse();
        Some(letters)
    }

    /// Run-length form `g = Π s_{i_j}^{x_j}` of the geodesic word.
    pub fn power_decomposition(&self, g: &Element) -> Option<Vec<(usize, i64)>> {
        let word = self.geodesic_word(g)?;
        let mut runs: Vec<(usize, i64)> = Vec::new();
        for (i, sign) in word {
            match runs.last_mut() {
                Some((j, x)) if *j == i && (*x > 0) == (sign > 0) => *x += sign as i64,
                _ => runs.push((i, sign as i64)),
            }
        }
        Some(runs)
    }
}

/// Ball of at least the given radius, shared between callers. Only the
/// largest ball built so far is kept per group.
pub fn shared_ball(group: &GroupSpec, radius: u32) -> Result<Arc<Ball>> {
    static CACHE: OnceLock<Mutex<HashMap<GroupSpec, Arc<Ball>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(b) = cache.lock().expect("ball cache poisoned").get(group) {
        if b.radius() >= radius {
            return Ok(b.clone());
        }
    }
    let ball = Arc::new(group.ball(radius)?);
    let mut guard = cache.lock().expect("ball cache poisoned");
    let keep = match guard.get(group) {
        Some(b) if b.radius() >= radius => b.clone(),
        _ => {
            guard.insert(group.clone(), ball.clone());
            ball
        }
    };
    Ok(keep)
}

/// Word length oracle: closed form on lattices, ball lookup otherwise.
#[derive(Debug, Clone)]
pub enum Metric {
    Lattice,
    Ball(Arc<Ball>),
}

impl Metric {
    /// A metric exact for all elements of word length at most `radius`.
    pub fn new(group: &GroupSpec, radius: u32) -> Result<Self> {
        match group.kind() {
            GroupKind::Lattice(_) => Ok(Metric::Lattice),
            GroupKind::Heisenberg => Ok(Metric::Ball(shared_ball(group, radius)?)),
        }
    }

    /// `|g|`, or `None` when `g` lies outside the known ball.
    pub fn wordlen(&self, g: &Element) -> Option<u32> {
        match self {
            Metric::Lattice => Some(g.0.iter().map(|x| x.unsigned_abs() as u32).sum()),
            Metric::Ball(b) => b.wordlen(g),
        }
    }
}

/// Fitted growth degree with its fit residual.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthEstimate {
    pub degree: f64,
    pub residual: f64,
}

/// Least-squares slope of `log V(n)` against `log n` over `n ∈ [R/2, R]`.
pub fn growth_degree(ball: &Ball) -> Result<GrowthEstimate> {
    let r = ball.radius();
    if r < 8 {
        return Err(Error::InsufficientRadius { got: r, need: 8 });
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = (r / 2..=r)
        .map(|n| ((n as f64).ln(), (ball.volumes()[n as usize] as f64).ln()))
        .unzip();
    let fit = fit_line(&xs, &ys);
    Ok(GrowthEstimate { degree: fit.slope, residual: fit.rms })
}
