//! Stalk spaces: finite tuples of real and Boolean coordinates with the
//! Euclidean metric, the maps between them, and Lipschitz constants.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scalar::{dist2, Scalar};

/// Real coordinates of spaces without a bounded domain are sampled from
/// `[-DEFAULT_SAMPLE_SPAN, DEFAULT_SAMPLE_SPAN]`.
pub const DEFAULT_SAMPLE_SPAN: f64 = 10.0;

/// Finite domains up to this many points are treated exhaustively when
/// estimating Lipschitz constants (all unordered pairs).
pub const EXHAUSTIVE_PAIR_POINTS: usize = 2048;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Coord {
    Real,
    Boolean,
}

#[derive(Clone, Debug, PartialEq, PartialOrd, Default)]
pub struct Point<S>(pub Vec<S>);

impl<S: Scalar> Point<S> {
    pub fn new(coords: Vec<S>) -> Self {
        Point(coords)
    }

    pub fn from_f64(coords: &[f64]) -> Self {
        Point(coords.iter().map(|&x| S::lit(x)).collect())
    }

    pub fn from_bools(bits: &[bool]) -> Self {
        Point(bits.iter().map(|&b| if b { S::one() } else { S::zero() }).collect())
    }

    pub fn empty() -> Self {
        Point(Vec::new())
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[S] {
        &self.0
    }

    pub fn select(&self, indices: &[usize]) -> Point<S> {
        Point(indices.iter().map(|&i| self.0[i]).collect())
    }

    pub fn concat(parts: &[&Point<S>]) -> Point<S> {
        Point(parts.iter().flat_map(|p| p.0.iter().copied()).collect())
    }

    pub fn approx_eq(&self, other: &Point<S>, tol: S) -> bool {
        self.dim() == other.dim() && self.0.iter().zip(&other.0).all(|(&a, &b)| (a - b).abs() <= tol)
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.0.iter().map(|x| x.to_f64_lossy()).collect()
    }
}

impl<S: Scalar> fmt::Display for Point<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, x) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{x}")?;
        }
        write!(f, ")")
    }
}

/// Membership description of a space.
#[derive(Clone, Debug)]
pub enum Domain<S> {
    /// Every tuple that matches the signature.
    All,
    /// Closed box; Boolean coordinates still take values in {0, 1}.
    Box { lo: Vec<S>, hi: Vec<S> },
    /// Explicit finite list.
    Finite(Vec<Point<S>>),
    /// Independent factors whose signatures concatenate to the space's.
    Product(Vec<Space<S>>),
}

#[derive(Clone, Debug)]
pub struct Space<S> {
    signature: Vec<Coord>,
    domain: Domain<S>,
}

impl<S: Scalar> Space<S> {
    pub fn new(signature: Vec<Coord>, domain: Domain<S>) -> Result<Self> {
        let s = Space { signature, domain };
        s.check_domain()?;
        Ok(s)
    }

    pub fn real(dim: usize) -> Self {
        Space {
            signature: vec![Coord::Real; dim],
            domain: Domain::All,
        }
    }

    pub fn boolean(dim: usize) -> Self {
        Space {
            signature: vec![Coord::Boolean; dim],
            domain: Domain::All,
        }
    }

    /// The zero-dimensional space with its single point.
    pub fn zero() -> Self {
        Space {
            signature: Vec::new(),
            domain: Domain::Finite(vec![Point::empty()]),
        }
    }

    pub fn finite(signature: Vec<Coord>, points: Vec<Point<S>>) -> Result<Self> {
        Space::new(signature, Domain::Finite(points))
    }

    pub fn boxed(signature: Vec<Coord>, lo: Vec<S>, hi: Vec<S>) -> Result<Self> {
        Space::new(signature, Domain::Box { lo, hi })
    }

    fn check_domain(&self) -> Result<()> {
        match &self.domain {
            Domain::All => Ok(()),
            Domain::Box { lo, hi } => {
                if lo.len() != self.dim() || hi.len() != self.dim() {
                    return Err(Error::SignatureMismatch(format!(
                        "box bounds of length {}/{} for dimension {}",
                        lo.len(),
                        hi.len(),
                        self.dim()
                    )));
                }
                if lo.iter().zip(hi).any(|(l, h)| !(l <= h)) {
                    return Err(Error::DegenerateDomain("box with lo > hi".into()));
                }
                Ok(())
            }
            Domain::Finite(points) => {
                for p in points {
                    if !self.matches_signature(p) {
                        return Err(Error::SignatureMismatch(format!(
                            "feasible point {p} does not match signature {:?}",
                            self.signature
                        )));
                    }
                }
                Ok(())
            }
            Domain::Product(factors) => {
                let sig: Vec<Coord> = factors.iter().flat_map(|f| f.signature.clone()).collect();
                if sig != self.signature {
                    return Err(Error::SignatureMismatch("product factors".into()));
                }
                Ok(())
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.signature.len()
    }

    pub fn signature(&self) -> &[Coord] {
        &self.signature
    }

    pub fn domain(&self) -> &Domain<S> {
        &self.domain
    }

    /// Same signature, no membership restriction.
    pub fn unrestricted(&self) -> Space<S> {
        Space {
            signature: self.signature.clone(),
            domain: Domain::All,
        }
    }

    pub fn with_domain(&self, domain: Domain<S>) -> Result<Space<S>> {
        Space::new(self.signature.clone(), domain)
    }

    pub fn is_boolean(&self) -> bool {
        self.signature.iter().all(|c| *c == Coord::Boolean)
    }

    pub fn distance(&self, a: &Point<S>, b: &Point<S>) -> S {
        dist2(&a.0, &b.0)
    }

    /// Arity and Boolean-coordinate check only.
    pub fn matches_signature(&self, p: &Point<S>) -> bool {
        p.dim() == self.dim()
            && self
                .signature
                .iter()
                .zip(&p.0)
                .all(|(c, &x)| *c == Coord::Real || x == S::zero() || x == S::one())
    }

    pub fn contains(&self, p: &Point<S>, tol: S) -> bool {
        if !self.matches_signature(p) {
            return false;
        }
        match &self.domain {
            Domain::All => true,
            Domain::Box { lo, hi } => p
                .0
                .iter()
                .zip(lo.iter().zip(hi))
                .all(|(&x, (&l, &h))| x >= l - tol && x <= h + tol),
            Domain::Finite(points) => points.iter().any(|q| q.approx_eq(p, tol)),
            Domain::Product(factors) => {
                let mut at = 0;
                factors.iter().all(|f| {
                    let part = Point(p.0[at..at + f.dim()].to_vec());
                    at += f.dim();
                    f.contains(&part, tol)
                })
            }
        }
    }

    /// Number of points when the domain is finite.
    pub fn finite_len(&self) -> Option<usize> {
        match &self.domain {
            Domain::Finite(points) => Some(points.len()),
            Domain::Product(factors) => factors
                .iter()
                .try_fold(1usize, |acc, f| f.finite_len().and_then(|n| acc.checked_mul(n))),
            Domain::All if self.is_boolean() && self.dim() < usize::BITS as usize => {
                Some(1usize << self.dim())
            }
            Domain::Box { lo, hi } if self.is_boolean() => {
                let mut n = 1usize;
                for (l, h) in lo.iter().zip(hi) {
                    let choices = [S::zero(), S::one()]
                        .iter()
                        .filter(|&&b| b >= *l && b <= *h)
                        .count();
                    n = n.checked_mul(choices)?;
                }
                Some(n)
            }
            _ => None,
        }
    }

    /// All points of a finite domain, in a fixed order (lexicographic over
    /// factors for products, binary counting for Boolean cubes).
    pub fn enumerate(&self) -> Option<Vec<Point<S>>> {
        match &self.domain {
            Domain::Finite(points) => Some(points.clone()),
            Domain::Product(factors) => {
                let mut out = vec![Point::empty()];
                for f in factors {
                    let pts = f.enumerate()?;
                    out = out
                        .iter()
                        .flat_map(|head| pts.iter().map(move |tail| Point::concat(&[head, tail])))
                        .collect();
                }
                Some(out)
            }
            Domain::All | Domain::Box { .. } => {
                let n = self.finite_len()?;
                let d = self.dim();
                Some(
                    (0..n)
                        .map(|k| {
                            Point(
                                (0..d)
                                    .map(|i| {
                                        if (k >> (d - 1 - i)) & 1 == 1 {
                                            S::one()
                                        } else {
                                            S::zero()
                                        }
                                    })
                                    .collect(),
                            )
                        })
                        .filter(|p| self.contains(p, S::zero()))
                        .collect(),
                )
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Point<S> {
        match &self.domain {
            Domain::Finite(points) => points[rng.gen_range(0..points.len())].clone(),
            Domain::Product(factors) => {
                let parts: Vec<Point<S>> = factors.iter().map(|f| f.sample(rng)).collect();
                Point(parts.into_iter().flat_map(|p| p.0).collect())
            }
            Domain::All => Point(
                self.signature
                    .iter()
                    .map(|c| match c {
                        Coord::Boolean => bit(rng.gen_bool(0.5)),
                        Coord::Real => {
                            S::lit(rng.gen_range(-DEFAULT_SAMPLE_SPAN..=DEFAULT_SAMPLE_SPAN))
                        }
                    })
                    .collect(),
            ),
            Domain::Box { lo, hi } => Point(
                self.signature
                    .iter()
                    .zip(lo.iter().zip(hi))
                    .map(|(c, (&l, &h))| match c {
                        Coord::Boolean => {
                            if l > S::zero() {
                                S::one()
                            } else if h < S::one() {
                                S::zero()
                            } else {
                                bit(rng.gen_bool(0.5))
                            }
                        }
                        Coord::Real => {
                            let (l, h) = (l.to_f64_lossy(), h.to_f64_lossy());
                            if l == h {
                                S::lit(l)
                            } else {
                                S::lit(rng.gen_range(l..=h))
                            }
                        }
                    })
                    .collect(),
            ),
        }
    }

    /// Points for sup-norm or Lipschitz evaluation: the whole domain when it
    /// is finite and at most `limit` long, otherwise `samples` seeded draws.
    pub fn evaluation_points(&self, limit: usize, samples: usize, seed: u64) -> (Vec<Point<S>>, bool) {
        if let Some(n) = self.finite_len() {
            if n <= limit {
                if let Some(pts) = self.enumerate() {
                    return (pts, true);
                }
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ((0..samples).map(|_| self.sample(&mut rng)).collect(), false)
    }
}

fn bit<S: Scalar>(b: bool) -> S {
    if b {
        S::one()
    } else {
        S::zero()
    }
}

/// Concatenated signature with the Euclidean metric on the concatenation.
pub fn product<S: Scalar>(spaces: &[Space<S>]) -> Space<S> {
    let signature: Vec<Coord> = spaces.iter().flat_map(|s| s.signature.clone()).collect();
    let unrestricted = spaces.iter().all(|s| matches!(s.domain, Domain::All));
    let domain = if unrestricted {
        Domain::All
    } else {
        let mut factors = Vec::new();
        for s in spaces {
            match &s.domain {
                Domain::Product(inner) => factors.extend(inner.iter().cloned()),
                _ => factors.push(s.clone()),
            }
        }
        Domain::Product(factors)
    };
    Space { signature, domain }
}

/// Declared Lipschitz information carried by a map.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Lipschitz<S> {
    /// The Lipschitz constant itself.
    Exact(S),
    /// A valid upper bound, possibly loose.
    UpperBound(S),
    Unknown,
}

impl<S: Scalar> Lipschitz<S> {
    pub fn value(&self) -> Option<S> {
        match *self {
            Lipschitz::Exact(k) | Lipschitz::UpperBound(k) => Some(k),
            Lipschitz::Unknown => None,
        }
    }
}

/// Matrix-plus-offset form of an affine map, rows indexed by output coordinate.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineForm<S> {
    pub matrix: Vec<Vec<S>>,
    pub offset: Vec<S>,
}

impl<S: Scalar> AffineForm<S> {
    pub fn apply(&self, x: &[S]) -> Vec<S> {
        self.matrix
            .iter()
            .zip(&self.offset)
            .map(|(row, &b)| row.iter().zip(x).fold(S::zero(), |acc, (&a, &xi)| acc + a * xi) + b)
            .collect()
    }

    /// `self ∘ inner`
    pub fn after(&self, inner: &AffineForm<S>) -> AffineForm<S> {
        let cols = inner.matrix.first().map_or(0, |r| r.len());
        let matrix = self
            .matrix
            .iter()
            .map(|row| {
                (0..cols)
                    .map(|j| {
                        row.iter()
                            .zip(&inner.matrix)
                            .fold(S::zero(), |acc, (&a, irow)| acc + a * irow[j])
                    })
                    .collect()
            })
            .collect();
        let offset = self
            .apply(&inner.offset)
            .into_iter()
            .collect();
        AffineForm { matrix, offset }
    }
}

pub type MapFn<S> = Arc<dyn Fn(&[S]) -> Vec<S> + Send + Sync>;

/// A map between stalk spaces. `apply` must be pure.
#[derive(Clone)]
pub struct StalkMap<S> {
    domain: Space<S>,
    codomain: Space<S>,
    func: MapFn<S>,
    lipschitz: Lipschitz<S>,
    affine: Option<AffineForm<S>>,
}

impl<S: fmt::Debug> fmt::Debug for StalkMap<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("StalkMap")
            .field("domain", &self.domain.signature)
            .field("codomain", &self.codomain.signature)
            .field("lipschitz", &self.lipschitz)
            .field("affine", &self.affine.is_some())
            .finish()
    }
}

impl<S: Scalar> StalkMap<S> {
    pub fn new<F>(domain: Space<S>, codomain: Space<S>, f: F) -> Self
    where
        F: Fn(&[S]) -> Vec<S> + Send + Sync + 'static,
    {
        StalkMap {
            domain,
            codomain,
            func: Arc::new(f),
            lipschitz: Lipschitz::Unknown,
            affine: None,
        }
    }

    pub fn with_lipschitz(mut self, l: Lipschitz<S>) -> Self {
        self.lipschitz = l;
        self
    }

    pub fn identity(space: Space<S>) -> Self {
        let n = space.dim();
        let matrix = (0..n)
            .map(|i| (0..n).map(|j| if i == j { S::one() } else { S::zero() }).collect())
            .collect();
        StalkMap {
            codomain: space.clone(),
            domain: space,
            func: Arc::new(|x: &[S]| x.to_vec()),
            lipschitz: Lipschitz::Exact(if n == 0 { S::zero() } else { S::one() }),
            affine: Some(AffineForm {
                matrix,
                offset: vec![S::zero(); n],
            }),
        }
    }

    /// `pr`: selects `indices` of `space`, in the given order.
    pub fn projection(space: &Space<S>, indices: &[usize]) -> Result<Self> {
        let dim = space.dim();
        if let Some(&index) = indices.iter().find(|&&i| i >= dim) {
            return Err(Error::IndexOutOfRange { index, dim });
        }
        let signature = indices.iter().map(|&i| space.signature[i]).collect();
        let idx = indices.to_vec();
        let matrix = indices
            .iter()
            .map(|&i| (0..dim).map(|j| if i == j { S::one() } else { S::zero() }).collect())
            .collect();
        let k = if indices.is_empty() { S::zero() } else { S::one() };
        Ok(StalkMap {
            domain: space.clone(),
            codomain: Space {
                signature,
                domain: Domain::All,
            },
            func: Arc::new(move |x: &[S]| idx.iter().map(|&i| x[i]).collect()),
            lipschitz: Lipschitz::Exact(k),
            affine: Some(AffineForm {
                matrix,
                offset: vec![S::zero(); indices.len()],
            }),
        })
    }

    /// `x ↦ matrix·x + offset` with its exact Lipschitz constant (spectral norm).
    pub fn affine(
        domain: Space<S>,
        codomain: Space<S>,
        matrix: Vec<Vec<S>>,
        offset: Vec<S>,
    ) -> Result<Self> {
        if matrix.len() != codomain.dim() || offset.len() != codomain.dim() {
            return Err(Error::DimensionMismatch {
                expected: codomain.dim(),
                got: matrix.len(),
            });
        }
        if let Some(row) = matrix.iter().find(|r| r.len() != domain.dim()) {
            return Err(Error::DimensionMismatch {
                expected: domain.dim(),
                got: row.len(),
            });
        }
        let form = AffineForm { matrix, offset };
        let k = spectral_norm(&form.matrix);
        let f = form.clone();
        Ok(StalkMap {
            domain,
            codomain,
            func: Arc::new(move |x: &[S]| f.apply(x)),
            lipschitz: Lipschitz::Exact(k),
            affine: Some(form),
        })
    }

    /// Constant map onto `value`.
    pub fn constant(domain: Space<S>, codomain: Space<S>, value: Point<S>) -> Self {
        let rows = codomain.dim();
        let cols = domain.dim();
        let v = value.0.clone();
        StalkMap {
            domain,
            codomain,
            func: Arc::new(move |_: &[S]| v.clone()),
            lipschitz: Lipschitz::Exact(S::zero()),
            affine: Some(AffineForm {
                matrix: vec![vec![S::zero(); cols]; rows],
                offset: value.0,
            }),
        }
    }

    pub fn zero(domain: Space<S>, codomain: Space<S>) -> Self {
        let z = Point(vec![S::zero(); codomain.dim()]);
        StalkMap::constant(domain, codomain, z)
    }

    /// `self ∘ inner`.
    pub fn after(&self, inner: &StalkMap<S>) -> StalkMap<S> {
        let (outer_f, inner_f) = (self.func.clone(), inner.func.clone());
        let affine = match (&self.affine, &inner.affine) {
            (Some(a), Some(b)) => Some(a.after(b)),
            _ => None,
        };
        let lipschitz = match (&affine, self.lipschitz.value(), inner.lipschitz.value()) {
            (Some(form), _, _) => Lipschitz::Exact(spectral_norm(&form.matrix)),
            (None, Some(a), Some(b)) if a == S::zero() || b == S::zero() => {
                Lipschitz::Exact(S::zero())
            }
            (None, Some(a), Some(b)) => Lipschitz::UpperBound(a * b),
            _ => Lipschitz::Unknown,
        };
        StalkMap {
            domain: inner.domain.clone(),
            codomain: self.codomain.clone(),
            func: Arc::new(move |x: &[S]| outer_f(&inner_f(x))),
            lipschitz,
            affine,
        }
    }

    /// Same function on a different (usually restricted) domain description.
    pub fn restrict_domain(&self, domain: Space<S>) -> StalkMap<S> {
        StalkMap {
            domain,
            ..self.clone()
        }
    }

    pub fn with_codomain(&self, codomain: Space<S>) -> StalkMap<S> {
        StalkMap {
            codomain,
            ..self.clone()
        }
    }

    pub fn apply(&self, p: &Point<S>) -> Point<S> {
        Point((self.func)(&p.0))
    }

    pub fn apply_slice(&self, x: &[S]) -> Vec<S> {
        (self.func)(x)
    }

    pub fn domain(&self) -> &Space<S> {
        &self.domain
    }

    pub fn codomain(&self) -> &Space<S> {
        &self.codomain
    }

    pub fn lipschitz(&self) -> Lipschitz<S> {
        self.lipschitz
    }

    pub fn affine_form(&self) -> Option<&AffineForm<S>> {
        self.affine.as_ref()
    }
}

/// Largest singular value by power iteration on `AᵀA`.
pub fn spectral_norm<S: Scalar>(matrix: &[Vec<S>]) -> S {
    spectral_norm_with(matrix, 200, S::lit(1e-12))
}

pub fn spectral_norm_with<S: Scalar>(matrix: &[Vec<S>], iterations: usize, tol: S) -> S {
    let cols = matrix.first().map_or(0, |r| r.len());
    if cols == 0 || matrix.is_empty() {
        return S::zero();
    }
    let mul_ata = |v: &[S]| -> Vec<S> {
        let av: Vec<S> = matrix
            .iter()
            .map(|row| row.iter().zip(v).fold(S::zero(), |acc, (&a, &x)| acc + a * x))
            .collect();
        (0..cols)
            .map(|j| matrix.iter().zip(&av).fold(S::zero(), |acc, (row, &y)| acc + row[j] * y))
            .collect()
    };
    let normalize = |v: Vec<S>| -> Option<Vec<S>> {
        let n = crate::scalar::norm2(&v);
        (n > S::zero()).then(|| v.into_iter().map(|x| x / n).collect())
    };
    // deterministic, generic start; fall back to unit vectors if it lands in the kernel
    let mut starts: Vec<Vec<S>> = vec![(0..cols)
        .map(|j| S::one() + S::lit(j as f64) / S::lit(cols as f64 * 7.0))
        .collect()];
    starts.extend((0..cols).map(|k| (0..cols).map(|j| if j == k { S::one() } else { S::zero() }).collect()));
    let mut best = S::zero();
    for start in starts {
        let Some(mut v) = normalize(start) else { continue };
        let mut lambda = S::zero();
        for _ in 0..iterations {
            let w = mul_ata(&v);
            let next_lambda = crate::scalar::norm2(&w);
            let Some(next) = normalize(w) else {
                lambda = S::zero();
                break;
            };
            let done = (next_lambda - lambda).abs() <= tol * next_lambda.max(S::one());
            v = next;
            lambda = next_lambda;
            if done {
                break;
            }
        }
        if lambda > S::zero() {
            best = best.max(lambda.sqrt());
            break;
        }
    }
    best
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Provenance {
    Declared,
    Exhaustive { pairs: usize },
    Sampled { pairs: usize, seed: u64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LipschitzEstimate<S> {
    pub value: S,
    pub provenance: Provenance,
}

/// Estimated Lipschitz constant of `map` over `source` (defaults to the map's
/// domain). Declared exact constants win; finite sources up to
/// [`EXHAUSTIVE_PAIR_POINTS`] points are checked on every pair, which is exact
/// on that set; otherwise `sample_pairs` seeded pairs give a lower bound.
pub fn estimate_lipschitz<S: Scalar>(
    map: &StalkMap<S>,
    sample_pairs: usize,
    source: Option<&Space<S>>,
    seed: u64,
) -> Result<LipschitzEstimate<S>> {
    if let Lipschitz::Exact(k) = map.lipschitz {
        return Ok(LipschitzEstimate {
            value: k,
            provenance: Provenance::Declared,
        });
    }
    estimate_lipschitz_on(map, sample_pairs, source.unwrap_or(&map.domain), seed)
}

/// Like [`estimate_lipschitz`] but always measured on `source`, ignoring any
/// declared constant.
pub fn estimate_lipschitz_on<S: Scalar>(
    map: &StalkMap<S>,
    sample_pairs: usize,
    source: &Space<S>,
    seed: u64,
) -> Result<LipschitzEstimate<S>> {
    if sample_pairs == 0 {
        return Err(Error::DegenerateDomain("zero sample pairs requested".into()));
    }
    let ratio = |x: &Point<S>, y: &Point<S>, fx: &Point<S>, fy: &Point<S>| -> Option<S> {
        let d = source.distance(x, y);
        (d > S::zero()).then(|| map.codomain.distance(fx, fy) / d)
    };
    let mut best: Option<S> = None;
    let mut bump = |r: Option<S>| {
        if let Some(r) = r {
            best = Some(best.map_or(r, |b| b.max(r)));
        }
    };
    let exhaustive = source
        .finite_len()
        .filter(|&n| n <= EXHAUSTIVE_PAIR_POINTS)
        .and_then(|_| source.enumerate());
    let provenance = if let Some(points) = exhaustive {
        let images: Vec<Point<S>> = points.iter().map(|p| map.apply(p)).collect();
        for i in 0..points.len() {
            for j in (i + 1)..points.len() {
                bump(ratio(&points[i], &points[j], &images[i], &images[j]));
            }
        }
        Provenance::Exhaustive {
            pairs: points.len() * points.len().saturating_sub(1) / 2,
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..sample_pairs {
            let x = source.sample(&mut rng);
            let y = source.sample(&mut rng);
            let (fx, fy) = (map.apply(&x), map.apply(&y));
            bump(ratio(&x, &y, &fx, &fy));
        }
        Provenance::Sampled {
            pairs: sample_pairs,
            seed,
        }
    };
    best.map(|value| LipschitzEstimate { value, provenance })
        .ok_or_else(|| Error::DegenerateDomain("no pair of distinct points".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(xs: &[f64]) -> Point<f64> {
        Point::from_f64(xs)
    }

    #[test]
    fn products() {
        let r2 = product(&[Space::<f64>::real(1), Space::real(1)]);
        assert_eq!(r2.signature(), &[Coord::Real, Coord::Real]);
        assert!(matches!(r2.domain(), Domain::All));
        assert_eq!(r2.distance(&p(&[0.0, 0.0]), &p(&[3.0, 4.0])), 5.0);

        let mixed = product(&[Space::<f64>::boolean(1), Space::real(1)]);
        assert_eq!(mixed.signature(), &[Coord::Boolean, Coord::Real]);
    }

    #[test]
    fn finite_product_enumerates_lexicographically() {
        let a = Space::finite(vec![Coord::Real], vec![p(&[0.0]), p(&[1.0])]).unwrap();
        let b = Space::finite(vec![Coord::Real], vec![p(&[5.0]), p(&[6.0]), p(&[7.0])]).unwrap();
        let ab = product(&[a, b]);
        assert_eq!(ab.finite_len(), Some(6));
        let pts = ab.enumerate().unwrap();
        assert_eq!(pts[0], p(&[0.0, 5.0]));
        assert_eq!(pts[5], p(&[1.0, 7.0]));
        assert!(ab.contains(&p(&[1.0, 6.0]), 0.0));
        assert!(!ab.contains(&p(&[1.0, 6.5]), 0.0));
    }

    #[test]
    fn boolean_cube_enumeration() {
        let cube = Space::<f64>::boolean(3);
        let pts = cube.enumerate().unwrap();
        assert_eq!(pts.len(), 8);
        assert_eq!(pts[1], p(&[0.0, 0.0, 1.0]));
        assert!(!cube.contains(&p(&[0.5, 0.0, 0.0]), 0.0));
    }

    #[test]
    fn projections() {
        let s = Space::<f64>::real(3);
        let pr = StalkMap::projection(&s, &[1]).unwrap();
        assert_eq!(pr.apply(&p(&[1.0, 2.0, 3.0])), p(&[2.0]));
        let all = StalkMap::projection(&s, &[0, 1, 2]).unwrap();
        assert_eq!(all.apply(&p(&[1.0, 2.0, 3.0])), p(&[1.0, 2.0, 3.0]));
        assert_eq!(pr.lipschitz(), Lipschitz::Exact(1.0));
        assert_eq!(
            StalkMap::projection(&s, &[3]).unwrap_err(),
            Error::IndexOutOfRange { index: 3, dim: 3 }
        );
    }

    #[test]
    fn lipschitz_of_identity_and_scaling() {
        let id = StalkMap::identity(Space::<f64>::real(2));
        let est = estimate_lipschitz(&id, 10, None, 1).unwrap();
        assert_eq!(est.value, 1.0);
        assert_eq!(est.provenance, Provenance::Declared);

        let triple = StalkMap::new(Space::<f64>::real(1), Space::real(1), |x| vec![3.0 * x[0]]);
        let est = estimate_lipschitz(&triple, 100, None, 7).unwrap();
        assert!((est.value - 3.0).abs() < 1e-12);
        assert!(matches!(est.provenance, Provenance::Sampled { .. }));
    }

    #[test]
    fn affine_lipschitz_is_spectral_norm() {
        // oracle: singular values of [[1,1],[0,1]] are sqrt of eigenvalues of
        // AᵀA = [[1,1],[1,2]], i.e. (3 ± √5)/2; the top one is the golden ratio
        let oracle = ((3.0 + 5f64.sqrt()) / 2.0).sqrt();
        assert!((oracle - 1.618034).abs() < 1e-6);
        let m = StalkMap::affine(
            Space::<f64>::real(2),
            Space::real(2),
            vec![vec![1.0, 1.0], vec![0.0, 1.0]],
            vec![0.0, 0.0],
        )
        .unwrap();
        assert!((m.lipschitz().value().unwrap() - oracle).abs() < 1e-9);

        // black-box sampling stays below the spectral norm and reaches it on the
        // top right-singular direction
        let bb = StalkMap::new(Space::<f64>::real(2), Space::real(2), |x| {
            vec![x[0] + x[1], x[1]]
        });
        let sampled = estimate_lipschitz(&bb, 2000, None, 3).unwrap().value;
        assert!(sampled <= oracle + 1e-9);
        let theta = (oracle * oracle - 1.0f64).atan2(1.0);
        let dir = Space::finite(
            vec![Coord::Real, Coord::Real],
            vec![p(&[0.0, 0.0]), p(&[theta.cos(), theta.sin()])],
        )
        .unwrap();
        let on_top = estimate_lipschitz(&bb, 1, Some(&dir), 0).unwrap().value;
        assert!((on_top - oracle).abs() < 1e-6, "{on_top}");
    }

    #[test]
    fn spectral_norm_of_zero_and_rank_one() {
        assert_eq!(spectral_norm::<f64>(&[vec![0.0, 0.0]]), 0.0);
        // start vector orthogonal to the row space
        let m = vec![vec![1.0 + 1.0 / 14.0, -1.0]];
        let want = (1.0f64 + (1.0 + 1.0 / 14.0f64).powi(2)).sqrt();
        assert!((spectral_norm(&m) - want).abs() < 1e-12);
    }

    #[test]
    fn degenerate_domain() {
        let single = Space::finite(vec![Coord::Real], vec![p(&[1.0])]).unwrap();
        let m = StalkMap::new(single.clone(), Space::real(1), |x| x.to_vec());
        assert!(matches!(
            estimate_lipschitz(&m, 10, Some(&single), 0),
            Err(Error::DegenerateDomain(_))
        ));
    }

    #[test]
    fn composition_keeps_affine_exactness() {
        let s = Space::<f64>::real(2);
        let scale = StalkMap::affine(s.clone(), s.clone(), vec![vec![2.0, 0.0], vec![0.0, 2.0]], vec![1.0, 1.0]).unwrap();
        let pr = StalkMap::projection(&s, &[1]).unwrap();
        let c = pr.after(&scale);
        assert_eq!(c.apply(&p(&[3.0, 4.0])), p(&[9.0]));
        assert_eq!(c.lipschitz(), Lipschitz::Exact(2.0));
    }

    #[test]
    fn works_over_f32() {
        let s = Space::<f32>::real(2);
        let a = Point::<f32>::from_f64(&[0.0, 0.0]);
        let b = Point::<f32>::from_f64(&[3.0, 4.0]);
        assert_eq!(s.distance(&a, &b), 5.0f32);
        let k = spectral_norm(&[vec![1.0f32, 1.0], vec![0.0, 1.0]]);
        assert!((k - 1.618034f32).abs() < 1e-5);
    }

    fn mixed_space() -> Space<f64> {
        product(&[Space::real(2), Space::boolean(1), Space::real(1)])
    }

    proptest! {
        #[test]
        fn metric_axioms(seed in any::<u64>()) {
            let s = mixed_space();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..1000 {
                let (x, y, z) = (s.sample(&mut rng), s.sample(&mut rng), s.sample(&mut rng));
                let dxy = s.distance(&x, &y);
                prop_assert!((dxy - s.distance(&y, &x)).abs() <= 1e-9);
                prop_assert!(s.distance(&x, &x) <= 1e-9);
                prop_assert!(dxy >= 0.0);
                prop_assert!(s.distance(&x, &z) <= dxy + s.distance(&y, &z) + 1e-9);
            }
        }

        #[test]
        fn product_metric_is_sum_of_squares(seed in any::<u64>()) {
            let a = Space::<f64>::real(2);
            let b = Space::<f64>::boolean(2);
            let ab = product(&[a.clone(), b.clone()]);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (x, y) = (ab.sample(&mut rng), ab.sample(&mut rng));
            let lhs = ab.distance(&x, &y).powi(2);
            let da = a.distance(&x.select(&[0, 1]), &y.select(&[0, 1])).powi(2);
            let db = b.distance(&x.select(&[2, 3]), &y.select(&[2, 3])).powi(2);
            prop_assert!((lhs - (da + db)).abs() <= 1e-9 * lhs.max(1.0));
        }

        #[test]
        fn projections_are_one_lipschitz(seed in any::<u64>()) {
            let s = mixed_space();
            let pr = StalkMap::projection(&s, &[0, 3]).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..1000 {
                let (x, y) = (s.sample(&mut rng), s.sample(&mut rng));
                prop_assert!(
                    pr.codomain().distance(&pr.apply(&x), &pr.apply(&y)) <= s.distance(&x, &y) + 1e-12
                );
            }
        }

        #[test]
        fn estimate_never_exceeds_declared(seed in any::<u64>()) {
            let m = StalkMap::affine(
                Space::<f64>::real(2), Space::real(1), vec![vec![0.3, -1.2]], vec![4.0],
            ).unwrap();
            let declared = m.lipschitz().value().unwrap();
            let est = estimate_lipschitz_on(&m, 200, m.domain(), seed).unwrap().value;
            prop_assert!(est <= declared + 1e-9);
        }
    }
}
