//! Sheaves of Euclidean spaces on finite posets.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::poset::{OrderMap, Poset};
use crate::scalar::Scalar;
use crate::space::{
    self, Lipschitz, LipschitzEstimate, Point, Provenance, Space, StalkMap, EXHAUSTIVE_PAIR_POINTS,
};

/// Absolute tolerance for "is a section" and functoriality checks.
pub const SECTION_TOL: f64 = 1e-9;
/// Stalks with at most this many points are checked exhaustively.
pub const EXHAUSTIVE_STALK_POINTS: usize = 65_536;
const FUNCTORIALITY_POINTS: usize = 4_096;
const FUNCTORIALITY_SAMPLES: usize = 64;

#[derive(Clone, Debug)]
pub struct Sheaf<S> {
    base: Arc<Poset>,
    stalks: Vec<Space<S>>,
    // one map per strict relation, composites included
    restrictions: BTreeMap<(usize, usize), StalkMap<S>>,
}

/// Collects stalks and generating restrictions. Every Hasse edge needs a map;
/// composite relations are filled in by composing along the order and any
/// explicitly given composite is checked for functoriality.
pub struct SheafBuilder<S> {
    base: Arc<Poset>,
    stalks: Vec<Option<Space<S>>>,
    given: BTreeMap<(usize, usize), StalkMap<S>>,
}

impl<S: Scalar> SheafBuilder<S> {
    pub fn new(base: Arc<Poset>) -> Self {
        let n = base.len();
        SheafBuilder {
            base,
            stalks: vec![None; n],
            given: BTreeMap::new(),
        }
    }

    pub fn stalk(&mut self, x: &str, space: Space<S>) -> Result<&mut Self> {
        let i = self.base.index_of(x)?;
        self.stalks[i] = Some(space);
        Ok(self)
    }

    pub fn restriction(&mut self, x: &str, y: &str, map: StalkMap<S>) -> Result<&mut Self> {
        let (i, j) = (self.base.index_of(x)?, self.base.index_of(y)?);
        if i == j || !self.base.le(i, j) {
            return Err(Error::NotRelated(x.to_owned(), y.to_owned()));
        }
        self.given.insert((i, j), map);
        Ok(self)
    }

    pub fn build(self) -> Result<Sheaf<S>> {
        let base = self.base;
        let mut stalks = Vec::with_capacity(base.len());
        for (i, s) in self.stalks.into_iter().enumerate() {
            stalks.push(s.ok_or_else(|| Error::MissingValue(format!("stalk at {}", base.name(i))))?);
        }
        for (&(i, j), m) in &self.given {
            if m.domain().signature() != stalks[i].signature()
                || m.codomain().signature() != stalks[j].signature()
            {
                return Err(Error::SignatureMismatch(format!(
                    "restriction {} <= {} must map {:?} to {:?}",
                    base.name(i),
                    base.name(j),
                    stalks[i].signature(),
                    stalks[j].signature()
                )));
            }
        }
        for &(i, j) in base.hasse_edges() {
            if !self.given.contains_key(&(i, j)) {
                return Err(Error::MissingValue(format!(
                    "restriction {} <= {}",
                    base.name(i),
                    base.name(j)
                )));
            }
        }
        let mut restrictions = self.given.clone();
        let pairs: Vec<(usize, usize)> = base.strict_relations().collect();
        for &(x, z) in &pairs {
            compose_into(&base, &self.given, &mut restrictions, x, z);
        }
        let sheaf = Sheaf {
            base,
            stalks,
            restrictions,
        };
        sheaf.check_functoriality()?;
        Ok(sheaf)
    }
}

fn compose_into<S: Scalar>(
    base: &Poset,
    given: &BTreeMap<(usize, usize), StalkMap<S>>,
    out: &mut BTreeMap<(usize, usize), StalkMap<S>>,
    x: usize,
    z: usize,
) -> StalkMap<S> {
    if let Some(m) = out.get(&(x, z)) {
        return m.clone();
    }
    // first Hasse step out of x that still lies below z
    let &(_, y) = base
        .hasse_edges()
        .iter()
        .find(|&&(a, b)| a == x && base.le(b, z))
        .expect("a strict relation factors through a Hasse edge");
    let first = given[&(x, y)].clone();
    let rest = compose_into(base, given, out, y, z);
    let m = rest.after(&first);
    out.insert((x, z), m.clone());
    m
}

impl<S: Scalar> Sheaf<S> {
    pub fn base(&self) -> &Arc<Poset> {
        &self.base
    }

    pub fn len(&self) -> usize {
        self.base.len()
    }

    pub fn is_empty(&self) -> bool {
        self.base.is_empty()
    }

    pub fn stalk(&self, i: usize) -> &Space<S> {
        &self.stalks[i]
    }

    pub fn stalk_named(&self, x: &str) -> Result<&Space<S>> {
        Ok(&self.stalks[self.base.index_of(x)?])
    }

    /// Restriction along `x <= y`; `None` on reflexive pairs (identity) and
    /// unrelated pairs.
    pub fn restriction(&self, x: usize, y: usize) -> Option<&StalkMap<S>> {
        self.restrictions.get(&(x, y))
    }

    pub fn restrictions(&self) -> impl Iterator<Item = ((usize, usize), &StalkMap<S>)> {
        self.restrictions.iter().map(|(&k, v)| (k, v))
    }

    /// `𝒮(x <= y)(value)`, identity when `x == y`.
    pub fn restrict(&self, x: usize, y: usize, value: &Point<S>) -> Point<S> {
        if x == y {
            return value.clone();
        }
        self.restrictions[&(x, y)].apply(value)
    }

    /// Number of related pairs, reflexive ones included.
    pub fn relation_count(&self) -> usize {
        self.base.relation_count()
    }

    fn check_functoriality(&self) -> Result<()> {
        let n = self.len();
        let tol = S::lit(SECTION_TOL);
        for x in 0..n {
            let chains: Vec<(usize, usize)> = (0..n)
                .filter(|&y| y != x && self.base.le(x, y))
                .flat_map(|y| {
                    (0..n)
                        .filter(move |&z| z != y && z != x)
                        .map(move |z| (y, z))
                })
                .filter(|&(y, z)| self.base.le(y, z))
                .collect();
            if chains.is_empty() {
                continue;
            }
            let (points, _) =
                self.stalks[x].evaluation_points(FUNCTORIALITY_POINTS, FUNCTORIALITY_SAMPLES, 0);
            for (y, z) in chains {
                let direct = &self.restrictions[&(x, z)];
                let (first, second) = (&self.restrictions[&(x, y)], &self.restrictions[&(y, z)]);
                for p in &points {
                    let gap = dist(&direct.apply(p), &second.apply(&first.apply(p)));
                    if gap > tol {
                        return Err(Error::Functoriality(
                            self.base.name(x).to_owned(),
                            self.base.name(y).to_owned(),
                            self.base.name(z).to_owned(),
                            gap.to_f64_lossy(),
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    /// The sheaf restricted to a subset of base elements (induced order).
    /// Returns the sub-sheaf; element `k` of it is `subset[k]` here.
    pub fn induced(&self, subset: &[usize]) -> Sheaf<S> {
        let base = Arc::new(self.base.induced(subset));
        let stalks = subset.iter().map(|&i| self.stalks[i].clone()).collect();
        let mut restrictions = BTreeMap::new();
        for (a, &x) in subset.iter().enumerate() {
            for (b, &y) in subset.iter().enumerate() {
                if let Some(m) = self.restrictions.get(&(x, y)) {
                    restrictions.insert((a, b), m.clone());
                }
            }
        }
        Sheaf {
            base,
            stalks,
            restrictions,
        }
    }

    /// Largest restriction Lipschitz bound, with provenance per restriction.
    pub fn restriction_lipschitz(&self, seed: u64) -> Result<S> {
        let mut k = S::zero();
        for (&(x, _), m) in &self.restrictions {
            k = k.max(lipschitz_bound(m, &self.stalks[x], seed)?.value);
        }
        Ok(k)
    }
}

fn dist<S: Scalar>(a: &Point<S>, b: &Point<S>) -> S {
    crate::scalar::dist2(&a.0, &b.0)
}

/// Lipschitz bound of `map` for pairs drawn from `source`: a declared exact
/// constant, an exhaustive measurement on small finite sources, a declared
/// upper bound, or (last resort) a sampled estimate.
pub fn lipschitz_bound<S: Scalar>(
    map: &StalkMap<S>,
    source: &Space<S>,
    seed: u64,
) -> Result<LipschitzEstimate<S>> {
    if let Lipschitz::Exact(k) = map.lipschitz() {
        return Ok(LipschitzEstimate {
            value: k,
            provenance: Provenance::Declared,
        });
    }
    let small = source
        .finite_len()
        .is_some_and(|n| n <= EXHAUSTIVE_PAIR_POINTS);
    if small {
        return match space::estimate_lipschitz_on(map, 1, source, seed) {
            Ok(est) => Ok(est),
            // fewer than two points: any constant works
            Err(Error::DegenerateDomain(_)) => Ok(LipschitzEstimate {
                value: S::zero(),
                provenance: Provenance::Exhaustive { pairs: 0 },
            }),
            Err(e) => Err(e),
        };
    }
    if let Lipschitz::UpperBound(k) = map.lipschitz() {
        return Ok(LipschitzEstimate {
            value: k,
            provenance: Provenance::Declared,
        });
    }
    space::estimate_lipschitz_on(map, 4_096, source, seed)
}

/// One optional value per base element, indexed like the base poset.
#[derive(Clone, Debug, PartialEq)]
pub struct Assignment<S> {
    values: Vec<Option<Point<S>>>,
}

impl<S: Scalar> Assignment<S> {
    /// Nothing assigned yet.
    pub fn empty(len: usize) -> Self {
        Assignment {
            values: vec![None; len],
        }
    }

    pub fn global(values: Vec<Point<S>>) -> Self {
        Assignment {
            values: values.into_iter().map(Some).collect(),
        }
    }

    pub fn from_named<'a>(
        sheaf: &Sheaf<S>,
        values: impl IntoIterator<Item = (&'a str, Point<S>)>,
    ) -> Result<Self> {
        let mut a = Assignment::empty(sheaf.len());
        for (name, p) in values {
            a.set(sheaf.base.index_of(name)?, p);
        }
        Ok(a)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, i: usize) -> Option<&Point<S>> {
        self.values.get(i).and_then(Option::as_ref)
    }

    pub fn set(&mut self, i: usize, p: Point<S>) {
        self.values[i] = Some(p);
    }

    pub fn clear(&mut self, i: usize) {
        self.values[i] = None;
    }

    pub fn values(&self) -> &[Option<Point<S>>] {
        &self.values
    }

    pub fn is_global(&self) -> bool {
        self.values.iter().all(Option::is_some)
    }

    pub fn support(&self) -> Vec<usize> {
        (0..self.values.len())
            .filter(|&i| self.values[i].is_some())
            .collect()
    }

    /// Values on `subset`, re-indexed to match [`Sheaf::induced`].
    pub fn restrict_to(&self, subset: &[usize]) -> Assignment<S> {
        Assignment {
            values: subset.iter().map(|&i| self.values[i].clone()).collect(),
        }
    }

    /// Writes values back from a sub-assignment produced by [`restrict_to`].
    pub fn overwrite(&mut self, subset: &[usize], sub: &Assignment<S>) {
        for (k, &i) in subset.iter().enumerate() {
            self.values[i] = sub.values[k].clone();
        }
    }
}

fn require_global<S: Scalar>(sheaf: &Sheaf<S>, a: &Assignment<S>) -> Result<()> {
    if a.len() != sheaf.len() {
        return Err(Error::DimensionMismatch {
            expected: sheaf.len(),
            got: a.len(),
        });
    }
    match a.values.iter().position(Option::is_none) {
        Some(i) => Err(Error::NotGlobal(sheaf.base.name(i).to_owned())),
        None => Ok(()),
    }
}

/// Squared restriction gap `d(a_y, 𝒮(x <= y) a_x)²` for one related pair.
fn gap_sq<S: Scalar>(sheaf: &Sheaf<S>, a: &Assignment<S>, x: usize, y: usize) -> S {
    let ax = a.values[x].as_ref().expect("checked");
    let ay = a.values[y].as_ref().expect("checked");
    let d = dist(ay, &sheaf.restrict(x, y, ax));
    d * d
}

/// `√Σ_{x <= y} d(a_y, 𝒮(x <= y) a_x)²` over the full closure, reflexive
/// pairs included (they add zero). Summed in lexicographic pair order.
pub fn consistency_radius<S: Scalar>(sheaf: &Sheaf<S>, a: &Assignment<S>) -> Result<S> {
    require_global(sheaf, a)?;
    Ok(sheaf
        .base
        .strict_relations()
        .fold(S::zero(), |acc, (x, y)| acc + gap_sq(sheaf, a, x, y))
        .sqrt())
}

/// Consistency radius over the related pairs with both ends in `sub`.
pub fn local_consistency_radius<S: Scalar>(
    sheaf: &Sheaf<S>,
    a: &Assignment<S>,
    sub: &[&str],
) -> Result<S> {
    let mut mask = vec![false; sheaf.len()];
    for name in sub {
        mask[sheaf.base.index_of(name)?] = true;
    }
    local_consistency_radius_mask(sheaf, a, &mask)
}

/// [`local_consistency_radius`] with the subset given as a membership mask.
pub fn local_consistency_radius_mask<S: Scalar>(
    sheaf: &Sheaf<S>,
    a: &Assignment<S>,
    mask: &[bool],
) -> Result<S> {
    for (i, &m) in mask.iter().enumerate() {
        if m && a.get(i).is_none() {
            return Err(Error::NotGlobal(sheaf.base.name(i).to_owned()));
        }
    }
    Ok(sheaf
        .base
        .strict_relations()
        .filter(|&(x, y)| mask[x] && mask[y])
        .fold(S::zero(), |acc, (x, y)| acc + gap_sq(sheaf, a, x, y))
        .sqrt())
}

/// `√Σ_x d(a_x, b_x)²` over the common support.
pub fn assignment_distance<S: Scalar>(
    sheaf: &Sheaf<S>,
    a: &Assignment<S>,
    b: &Assignment<S>,
) -> Result<S> {
    if a.len() != b.len() || a.support() != b.support() {
        return Err(Error::SupportMismatch(format!(
            "{} vs {} assigned elements",
            a.support().len(),
            b.support().len()
        )));
    }
    let _ = sheaf;
    Ok(a
        .values
        .iter()
        .zip(&b.values)
        .filter_map(|(x, y)| Some(dist(x.as_ref()?, y.as_ref()?)))
        .fold(S::zero(), |acc, d| acc + d * d)
        .sqrt())
}

/// The related pair with the largest restriction gap, if any pair exists.
pub fn worst_gap<S: Scalar>(sheaf: &Sheaf<S>, a: &Assignment<S>) -> Result<Option<(usize, usize, S)>> {
    require_global(sheaf, a)?;
    let mut worst: Option<(usize, usize, S)> = None;
    for (x, y) in sheaf.base.strict_relations() {
        let g = gap_sq(sheaf, a, x, y).sqrt();
        if worst.map_or(true, |(_, _, w)| g > w) {
            worst = Some((x, y, g));
        }
    }
    Ok(worst)
}

/// Every restriction gap is at most `tol`. Non-global assignments are never
/// sections.
pub fn is_global_section<S: Scalar>(sheaf: &Sheaf<S>, a: &Assignment<S>, tol: S) -> bool {
    if require_global(sheaf, a).is_err() {
        return false;
    }
    sheaf
        .base
        .strict_relations()
        .all(|(x, y)| gap_sq(sheaf, a, x, y).sqrt() <= tol)
}

/// `c(a) ≤ (1+K) d(sec, a)`: returns `(c(a), (1+K)·d(sec, a))`.
pub fn section_bound_check<S: Scalar>(
    sheaf: &Sheaf<S>,
    sec: &Assignment<S>,
    a: &Assignment<S>,
    k: S,
) -> Result<(S, S)> {
    if let Some((x, y, g)) = worst_gap(sheaf, sec)? {
        if g > S::lit(SECTION_TOL) {
            return Err(Error::NotASection {
                from: sheaf.base.name(x).to_owned(),
                to: sheaf.base.name(y).to_owned(),
                gap: g.to_f64_lossy(),
            });
        }
    }
    let lhs = consistency_radius(sheaf, a)?;
    let rhs = (S::one() + k) * assignment_distance(sheaf, sec, a)?;
    Ok((lhs, rhs))
}

/// A sheaf morphism `m : source -> target`. The base map runs the other way,
/// from the target's base to the source's base; `components[x]` maps the
/// source stalk at `base_map(x)` to the target stalk at `x`.
#[derive(Clone, Debug)]
pub struct SheafMorphism<S> {
    source: Arc<Sheaf<S>>,
    target: Arc<Sheaf<S>>,
    base_map: OrderMap,
    components: Vec<StalkMap<S>>,
    defect_bound: S,
}

impl<S: Scalar> SheafMorphism<S> {
    /// Checks shapes and order preservation, then measures the commutativity
    /// defect and fails if it exceeds `defect_bound` (beyond 1e-9).
    pub fn new(
        source: Arc<Sheaf<S>>,
        target: Arc<Sheaf<S>>,
        base_map: OrderMap,
        components: Vec<StalkMap<S>>,
        defect_bound: S,
    ) -> Result<Self> {
        let m = Self::unchecked(source, target, base_map, components, defect_bound)?;
        let (gap, at) = m.defect_with_witness(FUNCTORIALITY_SAMPLES * 4, 0)?;
        if gap > defect_bound + S::lit(SECTION_TOL) {
            return Err(Error::MorphismDefect {
                element: at,
                gap: gap.to_f64_lossy(),
                bound: defect_bound.to_f64_lossy(),
            });
        }
        Ok(m)
    }

    /// Like [`SheafMorphism::new`] but records the measured defect as the bound.
    pub fn measured(
        source: Arc<Sheaf<S>>,
        target: Arc<Sheaf<S>>,
        base_map: OrderMap,
        components: Vec<StalkMap<S>>,
        samples: usize,
        seed: u64,
    ) -> Result<Self> {
        let mut m = Self::unchecked(source, target, base_map, components, S::zero())?;
        m.defect_bound = m.defect_with_witness(samples, seed)?.0;
        Ok(m)
    }

    fn unchecked(
        source: Arc<Sheaf<S>>,
        target: Arc<Sheaf<S>>,
        base_map: OrderMap,
        components: Vec<StalkMap<S>>,
        defect_bound: S,
    ) -> Result<Self> {
        if *base_map.source != **target.base() || *base_map.target != **source.base() {
            return Err(Error::SignatureMismatch(
                "base map must run from the target base to the source base".into(),
            ));
        }
        if !base_map.is_order_preserving() {
            return Err(Error::SignatureMismatch("base map is not order preserving".into()));
        }
        if components.len() != target.len() {
            return Err(Error::DimensionMismatch {
                expected: target.len(),
                got: components.len(),
            });
        }
        for (x, c) in components.iter().enumerate() {
            let fx = base_map.mapping[x];
            if c.domain().signature() != source.stalk(fx).signature()
                || c.codomain().signature() != target.stalk(x).signature()
            {
                return Err(Error::SignatureMismatch(format!(
                    "component at {} must map the source stalk at {} to the target stalk",
                    target.base().name(x),
                    source.base().name(fx)
                )));
            }
        }
        Ok(SheafMorphism {
            source,
            target,
            base_map,
            components,
            defect_bound,
        })
    }

    pub fn source(&self) -> &Arc<Sheaf<S>> {
        &self.source
    }

    pub fn target(&self) -> &Arc<Sheaf<S>> {
        &self.target
    }

    pub fn base_map(&self) -> &OrderMap {
        &self.base_map
    }

    pub fn component(&self, x: usize) -> &StalkMap<S> {
        &self.components[x]
    }

    pub fn defect_bound(&self) -> S {
        self.defect_bound
    }

    /// Largest component Lipschitz bound, each measured on its source stalk.
    pub fn component_lipschitz(&self, seed: u64) -> Result<S> {
        let mut k = S::zero();
        for (x, c) in self.components.iter().enumerate() {
            let src = self.source.stalk(self.base_map.mapping[x]);
            k = k.max(lipschitz_bound(c, src, seed)?.value);
        }
        Ok(k)
    }

    fn defect_with_witness(&self, samples: usize, seed: u64) -> Result<(S, String)> {
        let mut cache: BTreeMap<usize, Vec<Point<S>>> = BTreeMap::new();
        let mut worst = (S::zero(), String::new());
        for (x, y) in self.target.base().strict_relations() {
            let (fx, fy) = (self.base_map.mapping[x], self.base_map.mapping[y]);
            let points = cache.entry(fx).or_insert_with(|| {
                self.source
                    .stalk(fx)
                    .evaluation_points(EXHAUSTIVE_STALK_POINTS, samples, seed)
                    .0
            });
            if points.is_empty() {
                return Err(Error::DegenerateDomain(format!(
                    "empty source stalk at {}",
                    self.source.base().name(fx)
                )));
            }
            for z in points.iter() {
                let upper = self.target.restrict(x, y, &self.components[x].apply(z));
                let lower = self.components[y].apply(&self.source.restrict(fx, fy, z));
                let gap = dist(&upper, &lower);
                if gap > worst.0 {
                    worst = (gap, self.target.base().name(y).to_owned());
                }
            }
        }
        Ok(worst)
    }
}

/// Largest commutativity gap over every related pair of the target base and
/// every evaluation point of the relevant source stalk.
pub fn morphism_defect<S: Scalar>(m: &SheafMorphism<S>, samples: usize, seed: u64) -> Result<S> {
    Ok(m.defect_with_witness(samples, seed)?.0)
}

/// `(m(r))_x := m_x(r(f(x)))`
pub fn apply_morphism<S: Scalar>(m: &SheafMorphism<S>, a: &Assignment<S>) -> Result<Assignment<S>> {
    let mut out = Assignment::empty(m.target.len());
    for x in 0..m.target.len() {
        let fx = m.base_map.mapping[x];
        let v = a.get(fx).ok_or_else(|| {
            Error::SupportMismatch(format!("no value at {}", m.source.base().name(fx)))
        })?;
        out.set(x, m.components[x].apply(v));
    }
    Ok(out)
}

/// `c(m(a)) ≤ K c(a) + C ε` with `C² ` the number of related pairs of the
/// target base, reflexive ones included. Returns `(lhs, rhs)`.
pub fn morphism_bound_check<S: Scalar>(
    m: &SheafMorphism<S>,
    a: &Assignment<S>,
    k: S,
    eps: S,
) -> Result<(S, S)> {
    let lhs = consistency_radius(&m.target, &apply_morphism(m, a)?)?;
    let c = S::lit(m.target.relation_count() as f64).sqrt();
    let rhs = k * consistency_radius(&m.source, a)? + c * eps;
    Ok((lhs, rhs))
}

/// The identity morphism of a sheaf.
pub fn identity_morphism<S: Scalar>(sheaf: Arc<Sheaf<S>>) -> SheafMorphism<S> {
    let components = (0..sheaf.len())
        .map(|i| StalkMap::identity(sheaf.stalk(i).clone()))
        .collect();
    SheafMorphism {
        base_map: OrderMap::identity(sheaf.base().clone()),
        source: sheaf.clone(),
        target: sheaf,
        components,
        defect_bound: S::zero(),
    }
}

/// Seeded random value from every stalk.
pub fn random_assignment<S: Scalar, R: rand::Rng + ?Sized>(
    sheaf: &Sheaf<S>,
    rng: &mut R,
) -> Assignment<S> {
    Assignment::global((0..sheaf.len()).map(|i| sheaf.stalk(i).sample(rng)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::Coord;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn diamond_identity() -> Sheaf<f64> {
        let base = Arc::new(
            Poset::new(
                &["a", "b", "c", "d"],
                &[("a", "b"), ("a", "c"), ("b", "d"), ("c", "d")],
            )
            .unwrap(),
        );
        let mut b = SheafBuilder::new(base);
        for x in ["a", "b", "c", "d"] {
            b.stalk(x, Space::real(1)).unwrap();
        }
        for (x, y) in [("a", "b"), ("a", "c"), ("b", "d"), ("c", "d")] {
            b.restriction(x, y, StalkMap::identity(Space::real(1))).unwrap();
        }
        b.build().unwrap()
    }

    fn vals(xs: &[f64]) -> Assignment<f64> {
        Assignment::global(xs.iter().map(|&x| Point::from_f64(&[x])).collect())
    }

    // brute-force oracle: enumerate pairs from the raw order, compose by hand
    fn oracle_radius(a: &[f64]) -> f64 {
        let le = |x: usize, y: usize| {
            x == y || matches!((x, y), (0, 1) | (0, 2) | (1, 3) | (2, 3) | (0, 3))
        };
        let mut sum = 0.0;
        for x in 0..4 {
            for y in 0..4 {
                if le(x, y) {
                    sum += (a[y] - a[x]).powi(2);
                }
            }
        }
        sum.sqrt()
    }

    #[test]
    fn diamond_radius_uses_full_closure() {
        let s = diamond_identity();
        assert_eq!(consistency_radius(&s, &vals(&[1.0, 1.0, 1.0, 1.0])).unwrap(), 0.0);
        let a = vals(&[0.0, 0.0, 0.0, 1.0]);
        let c = consistency_radius(&s, &a).unwrap();
        assert!((c - 3f64.sqrt()).abs() < 1e-15);
        assert!((c - oracle_radius(&[0.0, 0.0, 0.0, 1.0])).abs() < 1e-15);
        assert!(!is_global_section(&s, &a, 1e-12));
        assert!(is_global_section(&s, &a, f64::INFINITY));
        assert!(is_global_section(&s, &vals(&[4.0; 4]), 1e-12));
    }

    #[test]
    fn local_radius() {
        let s = diamond_identity();
        let a = vals(&[0.0, 0.0, 0.0, 1.0]);
        assert_eq!(local_consistency_radius(&s, &a, &["b"]).unwrap(), 0.0);
        let l = local_consistency_radius(&s, &a, &["b", "c", "d"]).unwrap();
        assert!((l - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(
            local_consistency_radius(&s, &a, &["a", "b", "c", "d"]).unwrap(),
            consistency_radius(&s, &a).unwrap()
        );
        assert_eq!(
            local_consistency_radius(&s, &a, &["q"]).unwrap_err(),
            Error::UnknownElement("q".into())
        );
    }

    #[test]
    fn not_global_is_an_error() {
        let s = diamond_identity();
        let mut a = vals(&[0.0, 0.0, 0.0, 1.0]);
        a.clear(2);
        assert_eq!(consistency_radius(&s, &a).unwrap_err(), Error::NotGlobal("c".into()));
    }

    #[test]
    fn distance_and_support() {
        let s = diamond_identity();
        let a = vals(&[0.0; 4]);
        let b = vals(&[1.0, -1.0, 1.0, -1.0]);
        assert_eq!(assignment_distance(&s, &a, &a).unwrap(), 0.0);
        assert_eq!(assignment_distance(&s, &a, &b).unwrap(), 2.0);
        let mut c = b.clone();
        c.clear(0);
        assert!(matches!(
            assignment_distance(&s, &a, &c),
            Err(Error::SupportMismatch(_))
        ));
    }

    #[test]
    fn section_bound_on_diamond() {
        let s = diamond_identity();
        let sec = vals(&[1.0; 4]);
        let a = vals(&[0.0, 0.0, 0.0, 1.0]);
        let (l, r) = section_bound_check(&s, &sec, &sec, 1.0).unwrap();
        assert_eq!((l, r), (0.0, 0.0));
        let (l, r) = section_bound_check(&s, &sec, &a, 1.0).unwrap();
        assert!((l - 3f64.sqrt()).abs() < 1e-15);
        assert!((r - 2.0 * 3f64.sqrt()).abs() < 1e-15);
        assert!(matches!(
            section_bound_check(&s, &a, &sec, 1.0),
            Err(Error::NotASection { .. })
        ));
    }

    #[test]
    fn composites_are_composed_and_checked() {
        let base = Arc::new(Poset::new(&["x", "y", "z"], &[("x", "y"), ("y", "z")]).unwrap());
        let double = || {
            StalkMap::affine(Space::real(1), Space::real(1), vec![vec![2.0]], vec![0.0]).unwrap()
        };
        let mut b = SheafBuilder::new(base.clone());
        for e in ["x", "y", "z"] {
            b.stalk(e, Space::real(1)).unwrap();
        }
        b.restriction("x", "y", double()).unwrap();
        b.restriction("y", "z", double()).unwrap();
        let s = b.build().unwrap();
        let xz = s.restriction(0, 2).unwrap();
        assert_eq!(xz.apply(&Point::from_f64(&[1.5])), Point::from_f64(&[6.0]));
        assert_eq!(xz.lipschitz(), Lipschitz::Exact(4.0));

        let mut b = SheafBuilder::new(base);
        for e in ["x", "y", "z"] {
            b.stalk(e, Space::real(1)).unwrap();
        }
        b.restriction("x", "y", double()).unwrap();
        b.restriction("y", "z", double()).unwrap();
        b.restriction("x", "z", double()).unwrap();
        assert!(matches!(b.build(), Err(Error::Functoriality(..))));
    }

    #[test]
    fn builder_rejects_bad_shapes() {
        let base = Arc::new(Poset::new(&["x", "y"], &[("x", "y")]).unwrap());
        let mut b = SheafBuilder::<f64>::new(base.clone());
        assert!(matches!(
            b.restriction("y", "x", StalkMap::identity(Space::real(1))),
            Err(Error::NotRelated(..))
        ));
        b.stalk("x", Space::real(2)).unwrap();
        b.stalk("y", Space::real(1)).unwrap();
        b.restriction("x", "y", StalkMap::identity(Space::real(1))).unwrap();
        assert!(matches!(b.build(), Err(Error::SignatureMismatch(_))));

        let mut b = SheafBuilder::<f64>::new(base);
        b.stalk("x", Space::real(1)).unwrap();
        b.stalk("y", Space::real(1)).unwrap();
        assert!(matches!(b.build(), Err(Error::MissingValue(_))));
    }

    fn line_sheaf(k: f64) -> Arc<Sheaf<f64>> {
        let base = Arc::new(Poset::new(&["x", "y"], &[("x", "y")]).unwrap());
        let mut b = SheafBuilder::new(base);
        b.stalk("x", Space::real(1)).unwrap();
        b.stalk("y", Space::real(1)).unwrap();
        b.restriction(
            "x",
            "y",
            StalkMap::affine(Space::real(1), Space::real(1), vec![vec![k]], vec![0.0]).unwrap(),
        )
        .unwrap();
        Arc::new(b.build().unwrap())
    }

    #[test]
    fn identity_and_zero_morphisms() {
        let s = Arc::new(diamond_identity());
        let id = identity_morphism(s.clone());
        let a = vals(&[0.3, -1.0, 2.0, 5.0]);
        assert_eq!(apply_morphism(&id, &a).unwrap(), a);
        assert_eq!(morphism_defect(&id, 16, 0).unwrap(), 0.0);
        let (l, r) = morphism_bound_check(&id, &a, 1.0, 0.0).unwrap();
        assert_eq!(l, r);

        // 0̂ -> ℝ̂ on a two-point discrete base
        let base = Arc::new(Poset::discrete(&["p", "q"]).unwrap());
        let mut zb = SheafBuilder::new(base.clone());
        let mut rb = SheafBuilder::new(base.clone());
        for e in ["p", "q"] {
            zb.stalk(e, Space::zero()).unwrap();
            rb.stalk(e, Space::real(1)).unwrap();
        }
        let (zero, reals) = (Arc::new(zb.build().unwrap()), Arc::new(rb.build().unwrap()));
        let comps = (0..2).map(|_| StalkMap::zero(Space::zero(), Space::real(1))).collect();
        let m = SheafMorphism::new(zero, reals, OrderMap::identity(base), comps, 0.0).unwrap();
        let image = apply_morphism(&m, &Assignment::global(vec![Point::empty(), Point::empty()])).unwrap();
        assert_eq!(image, vals(&[0.0, 0.0]));
    }

    #[test]
    fn non_commuting_components_are_measured() {
        // source restriction ×1, target restriction ×2, identity components:
        // the square misses by |2z - z| = |z| on a finite stalk {0, 1, 3}
        let base = Arc::new(Poset::new(&["x", "y"], &[("x", "y")]).unwrap());
        let finite = Space::finite(
            vec![Coord::Real],
            vec![Point::from_f64(&[0.0]), Point::from_f64(&[1.0]), Point::from_f64(&[3.0])],
        )
        .unwrap();
        let mut b = SheafBuilder::new(base.clone());
        b.stalk("x", finite.clone()).unwrap();
        b.stalk("y", Space::real(1)).unwrap();
        b.restriction("x", "y", StalkMap::identity(Space::real(1)).restrict_domain(finite.clone()))
            .unwrap();
        let src = Arc::new(b.build().unwrap());
        let tgt = line_sheaf(2.0);
        let comps = vec![
            StalkMap::identity(Space::real(1)).restrict_domain(finite),
            StalkMap::identity(Space::real(1)),
        ];
        let err = SheafMorphism::new(src.clone(), tgt.clone(), OrderMap::identity(base.clone()), comps.clone(), 0.0)
            .unwrap_err();
        assert!(matches!(err, Error::MorphismDefect { .. }));
        let m = SheafMorphism::measured(src, tgt, OrderMap::identity(base), comps, 16, 0).unwrap();
        assert_eq!(m.defect_bound(), 3.0);
        let a = vals(&[1.0, 1.0]);
        let (l, r) = morphism_bound_check(&m, &a, 1.0, m.defect_bound()).unwrap();
        assert_eq!(l, 1.0);
        assert!(l <= r);
    }

    #[test]
    fn induced_sub_sheaf_matches_local_radius() {
        let s = diamond_identity();
        let a = vals(&[0.0, 0.5, 0.0, 1.0]);
        let sub = [1usize, 2, 3];
        let t = s.induced(&sub);
        assert_eq!(
            consistency_radius(&t, &a.restrict_to(&sub)).unwrap(),
            local_consistency_radius(&s, &a, &["b", "c", "d"]).unwrap()
        );
    }

    fn arb_vals() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-10.0f64..10.0, 4)
    }

    proptest! {
        #[test]
        fn zero_radius_iff_section(xs in arb_vals(), snap in any::<bool>()) {
            let s = diamond_identity();
            let a = if snap { vals(&[xs[0]; 4]) } else { vals(&xs) };
            let c = consistency_radius(&s, &a).unwrap();
            prop_assert_eq!(c == 0.0, is_global_section(&s, &a, 1e-12));
            prop_assert!((c - oracle_radius(&a.values().iter().map(|p| p.as_ref().unwrap().0[0]).collect::<Vec<_>>())).abs() < 1e-12);
        }

        #[test]
        fn local_radius_is_monotone(xs in arb_vals(), m1 in any::<[bool; 4]>(), m2 in any::<[bool; 4]>()) {
            let s = diamond_identity();
            let a = vals(&xs);
            let small: Vec<bool> = (0..4).map(|i| m1[i] && m2[i]).collect();
            let big: Vec<bool> = (0..4).map(|i| m1[i]).collect();
            let ls = local_consistency_radius_mask(&s, &a, &small).unwrap();
            let lb = local_consistency_radius_mask(&s, &a, &big).unwrap();
            prop_assert!(ls <= lb);
        }

        #[test]
        fn assignment_distance_triangle(a in arb_vals(), b in arb_vals(), c in arb_vals()) {
            let s = diamond_identity();
            let (a, b, c) = (vals(&a), vals(&b), vals(&c));
            let ab = assignment_distance(&s, &a, &b).unwrap();
            let bc = assignment_distance(&s, &b, &c).unwrap();
            let ac = assignment_distance(&s, &a, &c).unwrap();
            prop_assert!(ac <= ab + bc + 1e-9);
        }

        #[test]
        fn section_bound_holds(k in 0.1f64..3.0, x in -5.0f64..5.0, noise in prop::collection::vec(-2.0f64..2.0, 2)) {
            let s = line_sheaf(k);
            let sec = vals(&[x, k * x]);
            let a = vals(&[x + noise[0], k * x + noise[1]]);
            let (l, r) = section_bound_check(&s, &sec, &a, k).unwrap();
            prop_assert!(l <= r + 1e-9);
        }

        #[test]
        fn exact_morphisms_preserve_sections(seed in any::<u64>()) {
            let s = Arc::new(diamond_identity());
            let id = identity_morphism(s.clone());
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let v = Space::<f64>::real(1).sample(&mut rng);
            let sec = Assignment::global(vec![v; 4]);
            prop_assert!(is_global_section(&s, &apply_morphism(&id, &sec).unwrap(), 1e-12));
        }
    }
}
