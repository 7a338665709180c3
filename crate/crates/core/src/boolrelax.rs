//! Thresholding and lifting schemes, the Boolean counterpart of a network
//! problem, discretization error budgets and the resulting bound on
//! consistency radius.
//!
//! Function norms are sup norms over the stated finite (or sampled) domain:
//! `‖g‖ = sup_x |g(x)|` and `‖g - h‖ = sup_x |g(x) - h(x)|`.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::encode::{build_s, EncodedProblem};
use crate::error::{Error, Result};
use crate::netmodel::{NetworkProblem, VertexModel};
use crate::poset::OrderMap;
use crate::scalar::{dist2, norm2, Scalar};
use crate::sheaf::{
    self, assignment_distance, consistency_radius, lipschitz_bound, Assignment, Sheaf,
    SheafMorphism, SECTION_TOL,
};
use crate::space::{self, Point, Provenance, Space, StalkMap};

/// Feasible sets up to this size are evaluated exhaustively.
pub const EXHAUSTIVE_LIMIT: usize = 65_536;
/// Seeded sample count used above [`EXHAUSTIVE_LIMIT`].
pub const DEFAULT_SAMPLES: usize = 4_096;

/// Thresholding and lifting maps at one vertex.
#[derive(Clone, Debug)]
pub struct VertexScheme<S> {
    /// `τ_v : S_v -> S̃_v`
    pub tau: StalkMap<S>,
    /// `χ_v : C_v -> C̃_v`
    pub chi: StalkMap<S>,
    /// `σ_v : R_v -> R̃_v`, componentwise from `χ_v` and the `τ_w`.
    pub sigma: StalkMap<S>,
    /// `γ_v : R̃_v -> R_v`
    pub gamma: StalkMap<S>,
    /// `γ_v` on the `S̃_v` factor alone, `S̃_v -> S_v`.
    pub rho: StalkMap<S>,
    /// `f̃_v : R̃_v -> S̃_v`
    pub f_tilde: StalkMap<S>,
    /// `F̃_v ⊆ R̃_v`, finite.
    pub feasible_tilde: Space<S>,
    pub state_tilde: Space<S>,
    pub control_tilde: Space<S>,
}

#[derive(Clone, Debug)]
pub struct ThresholdingScheme<S> {
    pub vertices: BTreeMap<String, VertexScheme<S>>,
}

impl<S: Scalar> ThresholdingScheme<S> {
    pub fn vertex(&self, v: &str) -> Result<&VertexScheme<S>> {
        self.vertices
            .get(v)
            .ok_or_else(|| Error::SchemeInvalid(format!("no scheme for vertex `{v}`")))
    }
}

/// `σ_v(c_v, s_v, s_{w_1}, …) := (χ_v(c_v), τ_v(s_v), τ_{w_1}(s_{w_1}), …)` with
/// the neighborhood in canonical order. `taus[k]` acts on the `k`-th state.
pub fn build_sigma<S: Scalar>(
    domain: Space<S>,
    chi: &StalkMap<S>,
    taus: &[StalkMap<S>],
) -> Result<StalkMap<S>> {
    let mut widths = vec![chi.domain().dim()];
    widths.extend(taus.iter().map(|t| t.domain().dim()));
    if widths.iter().sum::<usize>() != domain.dim() {
        return Err(Error::SignatureMismatch(format!(
            "σ factors cover {} coordinates, R_v has {}",
            widths.iter().sum::<usize>(),
            domain.dim()
        )));
    }
    let mut parts: Vec<StalkMap<S>> = vec![chi.clone()];
    parts.extend(taus.iter().cloned());
    let mut at = 0;
    for (part, &w) in parts.iter().zip(&widths) {
        if part.domain().signature() != &domain.signature()[at..at + w] {
            return Err(Error::SignatureMismatch(
                "σ factor does not match its slot of R_v".into(),
            ));
        }
        at += w;
    }
    let codomain = space::product(
        &parts
            .iter()
            .map(|p| p.codomain().unrestricted())
            .collect::<Vec<_>>(),
    );
    let maps = parts.clone();
    let f = move |x: &[S]| {
        let mut out = Vec::new();
        let mut at = 0;
        for (m, &w) in maps.iter().zip(&widths) {
            out.extend(m.apply_slice(&x[at..at + w]));
            at += w;
        }
        out
    };
    Ok(StalkMap::new(domain, codomain, f))
}

fn dedup<S: Scalar>(points: impl IntoIterator<Item = Point<S>>) -> Vec<Point<S>> {
    let mut out: Vec<Point<S>> = Vec::new();
    for p in points {
        if !out.contains(&p) {
            out.push(p);
        }
    }
    out
}

/// Sup-norm evaluation points of a space, with the mode that produced them.
fn points_of<S: Scalar>(space: &Space<S>, seed: u64) -> (Vec<Point<S>>, EvaluationMode) {
    let (pts, full) = space.evaluation_points(EXHAUSTIVE_LIMIT, DEFAULT_SAMPLES, seed);
    let mode = if full {
        EvaluationMode::Exhaustive { points: pts.len() }
    } else {
        EvaluationMode::Sampled {
            count: pts.len(),
            seed,
        }
    };
    (pts, mode)
}

/// Checks feasibility preservation and the shape of every map. Finite sets
/// are checked exhaustively, others on seeded samples.
pub fn validate_scheme<S: Scalar>(
    p: &NetworkProblem<S>,
    scheme: &ThresholdingScheme<S>,
    seed: u64,
) -> Result<()> {
    let tol = S::lit(SECTION_TOL);
    let bad = |v: &str, what: &str, x: &Point<S>| {
        Err(Error::SchemeInvalid(format!("vertex `{v}`: {what} at {x}")))
    };
    for v in p.vertices() {
        let m = p.model(v)?;
        let sc = scheme.vertex(v)?;
        if sc.feasible_tilde.finite_len().is_none() {
            return Err(Error::SchemeInvalid(format!("F̃ at `{v}` is not finite")));
        }
        let ftilde = sc.feasible_tilde.enumerate().unwrap_or_default();
        if ftilde.is_empty() {
            return Err(Error::SchemeInvalid(format!("F̃ at `{v}` is empty")));
        }
        let (fpts, _) = points_of(&m.feasible, seed);
        let sidx = p.state_indices(v, v)?;
        let cidx = p.control_indices(v)?;
        let ctrl_dim = sc.control_tilde.dim();
        let st_range: Vec<usize> = (ctrl_dim..ctrl_dim + sc.state_tilde.dim()).collect();
        let ctrl_range: Vec<usize> = (0..ctrl_dim).collect();
        let proj_s: Vec<Point<S>> = dedup(ftilde.iter().map(|x| x.select(&st_range)));
        let proj_c: Vec<Point<S>> = dedup(ftilde.iter().map(|x| x.select(&ctrl_range)));
        for x in &fpts {
            let sx = sc.sigma.apply(x);
            if !ftilde.iter().any(|y| y.approx_eq(&sx, tol)) {
                return bad(v, "σ leaves F̃", x);
            }
            let t = sc.tau.apply(&x.select(&sidx));
            if !proj_s.iter().any(|y| y.approx_eq(&t, tol)) {
                return bad(v, "τ leaves pr F̃", x);
            }
            let c = sc.chi.apply(&x.select(&cidx));
            if !proj_c.iter().any(|y| y.approx_eq(&c, tol)) {
                return bad(v, "χ leaves pr F̃", x);
            }
        }
        for xt in &ftilde {
            let g = sc.gamma.apply(xt);
            if !m.feasible.contains(&g, tol) {
                return bad(v, "γ leaves F", xt);
            }
            let ft = sc.f_tilde.apply(xt);
            if !proj_s.iter().any(|y| y.approx_eq(&ft, tol)) {
                return bad(v, "f̃ leaves pr F̃", xt);
            }
            for w in p.neighborhood(v)? {
                let lifted = g.select(&p.state_indices(v, &w)?);
                let rho_w = &scheme.vertex(&w)?.rho;
                let wt = tilde_state_slice(p, scheme, v, &w, xt)?;
                if !lifted.approx_eq(&rho_w.apply(&wt), tol) {
                    return bad(v, "γ disagrees with the state lifts", xt);
                }
            }
        }
    }
    Ok(())
}

/// Coordinates of `S̃_w` inside `R̃_v` (control first, then states in
/// canonical neighbor order).
pub fn tilde_state_indices<S: Scalar>(
    p: &NetworkProblem<S>,
    scheme: &ThresholdingScheme<S>,
    v: &str,
    w: &str,
) -> Result<Vec<usize>> {
    let mut at = scheme.vertex(v)?.control_tilde.dim();
    for u in p.neighborhood(v)? {
        let d = scheme.vertex(&u)?.state_tilde.dim();
        if u == w {
            return Ok((at..at + d).collect());
        }
        at += d;
    }
    Err(Error::UnknownVertex(w.to_owned()))
}

fn tilde_state_slice<S: Scalar>(
    p: &NetworkProblem<S>,
    scheme: &ThresholdingScheme<S>,
    v: &str,
    w: &str,
    x: &Point<S>,
) -> Result<Point<S>> {
    Ok(x.select(&tilde_state_indices(p, scheme, v, w)?))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EvaluationMode {
    Exhaustive { points: usize },
    Sampled { count: usize, seed: u64 },
}

impl EvaluationMode {
    pub fn is_exhaustive(&self) -> bool {
        matches!(self, EvaluationMode::Exhaustive { .. })
    }

    fn merge(self, other: EvaluationMode) -> EvaluationMode {
        match (self, other) {
            (EvaluationMode::Exhaustive { points: a }, EvaluationMode::Exhaustive { points: b }) => {
                EvaluationMode::Exhaustive { points: a + b }
            }
            (EvaluationMode::Sampled { count, seed }, _) | (_, EvaluationMode::Sampled { count, seed }) => {
                EvaluationMode::Sampled { count, seed }
            }
        }
    }
}

/// `(ω₁)_v := ‖f̃_v − τ_v ∘ f_v ∘ γ_v‖` over `F̃_v`.
pub fn omega1<S: Scalar>(
    p: &NetworkProblem<S>,
    scheme: &ThresholdingScheme<S>,
    v: &str,
    seed: u64,
) -> Result<(S, EvaluationMode)> {
    let m = p.model(v)?;
    let sc = scheme.vertex(v)?;
    let (pts, mode) = points_of(&sc.feasible_tilde, seed);
    if pts.is_empty() {
        return Err(Error::DegenerateDomain(format!("F̃ at `{v}` is empty")));
    }
    let sup = pts.iter().fold(S::zero(), |acc, x| {
        let lhs = sc.f_tilde.apply(x);
        let rhs = sc.tau.apply(&m.dynamics.apply(&sc.gamma.apply(x)));
        acc.max(dist2(&lhs.0, &rhs.0))
    });
    Ok((sup, mode))
}

/// `(ω₂)_v := ‖γ_v ∘ σ_v − id‖` over `F_v`.
pub fn omega2<S: Scalar>(
    p: &NetworkProblem<S>,
    scheme: &ThresholdingScheme<S>,
    v: &str,
    seed: u64,
) -> Result<(S, EvaluationMode)> {
    let m = p.model(v)?;
    let sc = scheme.vertex(v)?;
    let (pts, mode) = points_of(&m.feasible, seed);
    if pts.is_empty() {
        return Err(Error::DegenerateDomain(format!("F at `{v}` is empty")));
    }
    let sup = pts.iter().fold(S::zero(), |acc, x| {
        acc.max(dist2(&sc.gamma.apply(&sc.sigma.apply(x)).0, &x.0))
    });
    Ok((sup, mode))
}

/// `‖f̃_v ∘ σ_v − τ_v ∘ f_v‖` over `F_v` (the left side of the thresholding
/// error bound) and `ε_v` (its right side).
pub fn thresholding_error_bound<S: Scalar>(
    p: &NetworkProblem<S>,
    scheme: &ThresholdingScheme<S>,
    v: &str,
    seed: u64,
) -> Result<(S, S)> {
    let m = p.model(v)?;
    let sc = scheme.vertex(v)?;
    let (pts, _) = points_of(&m.feasible, seed);
    let lhs = pts.iter().fold(S::zero(), |acc, x| {
        let lower = sc.f_tilde.apply(&sc.sigma.apply(x));
        let upper = sc.tau.apply(&m.dynamics.apply(x));
        acc.max(dist2(&lower.0, &upper.0))
    });
    let budget = vertex_budget(p, scheme, v, seed)?;
    Ok((lhs, budget.eps_v))
}

#[derive(Clone, Debug, PartialEq)]
pub struct VertexBudget<S> {
    pub omega1: S,
    pub omega2: S,
    /// `‖σ_v‖` over `F_v`
    pub norm_sigma: S,
    /// `‖τ_v ∘ f_v‖` over `F_v`
    pub norm_tau_f: S,
    /// `ω₁ ‖σ_v‖ + ω₂ ‖τ_v ∘ f_v‖`
    pub eps_v: S,
    pub mode: EvaluationMode,
}

/// A Lipschitz constant that entered `K`, with where it came from.
#[derive(Clone, Debug, PartialEq)]
pub struct KEntry<S> {
    pub map: String,
    pub value: S,
    pub provenance: Provenance,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ErrorBudget<S> {
    pub vertices: BTreeMap<String, VertexBudget<S>>,
    /// `max_v ε_v`
    pub eps: S,
    /// `C = √(number of related pairs of 𝒩)`, reflexive pairs included.
    pub c: S,
    pub k: S,
    pub k_entries: Vec<KEntry<S>>,
    pub mode: EvaluationMode,
}

impl<S: Scalar> ErrorBudget<S> {
    /// Recomputes `ε_v` and `ε` from the stored parts; zero when consistent.
    pub fn recomputation_gap(&self) -> S {
        let mut gap = S::zero();
        let mut eps = S::zero();
        for b in self.vertices.values() {
            let e = b.omega1 * b.norm_sigma + b.omega2 * b.norm_tau_f;
            gap = gap.max((e - b.eps_v).abs());
            eps = eps.max(e);
        }
        gap.max((eps - self.eps).abs())
    }
}

fn vertex_budget<S: Scalar>(
    p: &NetworkProblem<S>,
    scheme: &ThresholdingScheme<S>,
    v: &str,
    seed: u64,
) -> Result<VertexBudget<S>> {
    let m = p.model(v)?;
    let sc = scheme.vertex(v)?;
    let (w1, mode1) = omega1(p, scheme, v, seed)?;
    let (w2, mode2) = omega2(p, scheme, v, seed)?;
    let (pts, _) = points_of(&m.feasible, seed);
    let norm_sigma = pts
        .iter()
        .fold(S::zero(), |acc, x| acc.max(norm2(&sc.sigma.apply(x).0)));
    let norm_tau_f = pts.iter().fold(S::zero(), |acc, x| {
        acc.max(norm2(&sc.tau.apply(&m.dynamics.apply(x)).0))
    });
    Ok(VertexBudget {
        omega1: w1,
        omega2: w2,
        norm_sigma,
        norm_tau_f,
        eps_v: w1 * norm_sigma + w2 * norm_tau_f,
        mode: mode1.merge(mode2),
    })
}

/// Every vertex budget, `ε`, `C` and `K`.
///
/// `K` is the largest Lipschitz constant among `γ_v`, `f_v`, `J_v`, `J'_v`,
/// and also `σ_v`, `τ_v`, measured on the lifted finite sets `γ_v(F̃_v)` and
/// `ρ_v(S̃_v)`, which is where the thresholding maps are evaluated in the
/// bound.
pub fn error_budget<S: Scalar>(
    p: &NetworkProblem<S>,
    scheme: &ThresholdingScheme<S>,
    seed: u64,
) -> Result<ErrorBudget<S>> {
    let mut vertices = BTreeMap::new();
    let mut mode: Option<EvaluationMode> = None;
    let mut k_entries = Vec::new();
    for v in p.vertices() {
        let b = vertex_budget(p, scheme, v, seed)?;
        mode = Some(match mode {
            None => b.mode,
            Some(m) => m.merge(b.mode),
        });
        vertices.insert(v.clone(), b);

        let m = p.model(v)?;
        let sc = scheme.vertex(v)?;
        let mut push = |name: &str, map: &StalkMap<S>, source: &Space<S>| -> Result<()> {
            let est = lipschitz_bound(map, source, seed)?;
            k_entries.push(KEntry {
                map: format!("{name}[{v}]"),
                value: est.value,
                provenance: est.provenance,
            });
            Ok(())
        };
        push("gamma", &sc.gamma, &sc.feasible_tilde)?;
        push("rho", &sc.rho, &sc.state_tilde)?;
        push("f", &m.dynamics, &m.feasible)?;
        push("J", &m.objective_state, &m.state_space)?;
        push("J'", &m.objective_control, &m.feasible)?;
        let lifted_f = lifted_set(&sc.gamma, &sc.feasible_tilde)?;
        push("sigma", &sc.sigma, &lifted_f)?;
        let lifted_s = lifted_set(&sc.rho, &sc.state_tilde)?;
        push("tau", &sc.tau, &lifted_s)?;
    }
    let eps = vertices
        .values()
        .fold(S::zero(), |acc, b: &VertexBudget<S>| acc.max(b.eps_v));
    let k = k_entries.iter().fold(S::zero(), |acc, e| acc.max(e.value));
    let (n, _) = crate::encode::build_n(p)?;
    Ok(ErrorBudget {
        vertices,
        eps,
        c: S::lit(n.relation_count() as f64).sqrt(),
        k,
        k_entries,
        mode: mode.unwrap_or(EvaluationMode::Exhaustive { points: 0 }),
    })
}

fn lifted_set<S: Scalar>(lift: &StalkMap<S>, source: &Space<S>) -> Result<Space<S>> {
    let pts = source
        .enumerate()
        .ok_or_else(|| Error::SchemeInvalid("lift source is not finite".into()))?;
    Space::finite(
        lift.codomain().signature().to_vec(),
        dedup(pts.iter().map(|x| lift.apply(x))),
    )
}

/// The Boolean network problem of a scheme: states `S̃_v`, controls `C̃_v`,
/// dynamics `f̃_v`, feasible sets `F̃_v`, objectives `J_v ∘ ρ_v` and
/// `J'_v ∘ γ_v`.
pub fn thresholded_problem<S: Scalar>(
    p: &NetworkProblem<S>,
    scheme: &ThresholdingScheme<S>,
) -> Result<NetworkProblem<S>> {
    let mut models = BTreeMap::new();
    for v in p.vertices() {
        let m = p.model(v)?;
        let sc = scheme.vertex(v)?;
        models.insert(
            v.clone(),
            VertexModel {
                state_space: sc.state_tilde.clone(),
                control_space: sc.control_tilde.clone(),
                dynamics: sc.f_tilde.restrict_domain(sc.feasible_tilde.clone()),
                objective_state: m
                    .objective_state
                    .after(&sc.rho)
                    .restrict_domain(sc.state_tilde.clone()),
                objective_control: m
                    .objective_control
                    .after(&sc.gamma)
                    .restrict_domain(sc.feasible_tilde.clone()),
                feasible: sc.feasible_tilde.clone(),
            },
        );
    }
    NetworkProblem::new(p.graph.clone(), models, p.horizon)
}

/// The Boolean encoding and the thresholding morphisms between the two.
#[derive(Clone, Debug)]
pub struct ThresholdedSheaves<S> {
    pub problem: Arc<NetworkProblem<S>>,
    pub encoded: EncodedProblem<S>,
    /// `Σ : 𝒩 -> 𝒩̃`
    pub sigma: SheafMorphism<S>,
    /// `Γ : 𝒩̃ -> 𝒩`
    pub gamma: SheafMorphism<S>,
    /// `T : ℒ -> ℒ̃`
    pub t: SheafMorphism<S>,
    /// `f̃ : 𝒩̃ -> ℒ̃`
    pub f_tilde: SheafMorphism<S>,
    /// `(Σ, T)` on one step of `𝒯` (`𝒩` with `p` and `f` into `ℒ`); its
    /// defect is the largest thresholding error over the vertices.
    pub step: SheafMorphism<S>,
}

pub fn build_thresholded_sheaves<S: Scalar>(
    encoded: &EncodedProblem<S>,
    scheme: &ThresholdingScheme<S>,
    seed: u64,
) -> Result<ThresholdedSheaves<S>> {
    let p = &encoded.problem;
    validate_scheme(p, scheme, seed)?;
    let bp = thresholded_problem(p, scheme)?;
    let benc = build_s(&bp)?;

    let same = |from: &Arc<Sheaf<S>>, to: &Arc<Sheaf<S>>| {
        OrderMap::new(from.base().clone(), to.base().clone(), (0..from.len()).collect())
    };
    let n_components = |tilde_first: bool| -> Result<Vec<StalkMap<S>>> {
        encoded
            .faces
            .iter()
            .map(|face| {
                let sc = scheme.vertex(face.vertex())?;
                Ok(match (face, tilde_first) {
                    (crate::poset::FaceLabel::Neighborhood(_), false) => sc.sigma.clone(),
                    (crate::poset::FaceLabel::Vertex(_), false) => sc.tau.clone(),
                    (crate::poset::FaceLabel::Neighborhood(_), true) => sc.gamma.clone(),
                    (crate::poset::FaceLabel::Vertex(_), true) => sc.rho.clone(),
                })
            })
            .collect()
    };
    let sigma = SheafMorphism::new(
        encoded.n.clone(),
        benc.n.clone(),
        same(&benc.n, &encoded.n)?,
        n_components(false)?,
        S::zero(),
    )?;
    let gamma = SheafMorphism::new(
        benc.n.clone(),
        encoded.n.clone(),
        same(&encoded.n, &benc.n)?,
        n_components(true)?,
        S::zero(),
    )?;
    let taus: Vec<StalkMap<S>> = p
        .vertices()
        .map(|v| Ok(scheme.vertex(v)?.tau.clone()))
        .collect::<Result<_>>()?;
    let t = SheafMorphism::new(
        encoded.l.clone(),
        benc.l.clone(),
        same(&benc.l, &encoded.l)?,
        taus,
        S::zero(),
    )?;
    let f_tilde = benc.f.clone();

    // one step of 𝒯 on both sides
    let one = crate::encode::build_s(&NetworkProblem {
        horizon: 1,
        ..(**p).clone()
    })?;
    let bone = crate::encode::build_s(&NetworkProblem {
        horizon: 1,
        ..bp.clone()
    })?;
    let comps: Vec<StalkMap<S>> = bone
        .t
        .tags
        .iter()
        .map(|tag| {
            let sc = scheme.vertex(tag.face.vertex())?;
            Ok(match (tag.layer, &tag.face) {
                (crate::encode::Layer::N, crate::poset::FaceLabel::Neighborhood(_)) => {
                    sc.sigma.clone()
                }
                _ => sc.tau.clone(),
            })
        })
        .collect::<Result<_>>()?;
    let step = SheafMorphism::measured(
        one.t.sheaf.clone(),
        bone.t.sheaf.clone(),
        same(&bone.t.sheaf, &one.t.sheaf)?,
        comps,
        DEFAULT_SAMPLES,
        seed,
    )?;
    Ok(ThresholdedSheaves {
        problem: Arc::new(bp),
        encoded: benc,
        sigma,
        gamma,
        t,
        f_tilde,
        step,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundTriple<S> {
    pub step: usize,
    pub lhs: S,
    pub mid: S,
    pub rhs: S,
}

impl<S: Scalar> BoundTriple<S> {
    pub fn holds(&self, slack: S) -> bool {
        self.lhs <= self.mid + slack && self.mid <= self.rhs + slack
    }
}

/// Per step `n`: `c_{𝒩̃_n}(r)`, `K c_{𝒩_n}(Γ(r)) + Cε` and
/// `2K d_{𝒩_n}(s, Γ(r)) + Cε`. `r` is an assignment of `𝒮̃`, `s` one of `𝒮`
/// that restricts to a section on every `𝒩_n`.
pub fn theorem_bound<S: Scalar>(
    r: &Assignment<S>,
    s: &Assignment<S>,
    encoded: &EncodedProblem<S>,
    thresholded: &ThresholdedSheaves<S>,
    budget: &ErrorBudget<S>,
) -> Result<Vec<BoundTriple<S>>> {
    let benc = &thresholded.encoded;
    let mut out = Vec::with_capacity(encoded.horizon());
    for n in 0..encoded.horizon() {
        let sn = encoded.n_part(s, n);
        if let Some((x, y, gap)) = sheaf::worst_gap(&encoded.n, &sn)? {
            if gap > S::lit(SECTION_TOL) {
                return Err(Error::NotASection {
                    from: format!("t{n}/N/{}", encoded.n.base().name(x)),
                    to: format!("t{n}/N/{}", encoded.n.base().name(y)),
                    gap: gap.to_f64_lossy(),
                });
            }
        }
        let rn = benc.n_part(r, n);
        let lifted = sheaf::apply_morphism(&thresholded.gamma, &rn)?;
        let lhs = consistency_radius(&benc.n, &rn)?;
        let ce = budget.c * budget.eps;
        let mid = budget.k * consistency_radius(&encoded.n, &lifted)? + ce;
        let two = S::one() + S::one();
        let rhs = two * budget.k * assignment_distance(&encoded.n, &sn, &lifted)? + ce;
        out.push(BoundTriple {
            step: n,
            lhs,
            mid,
            rhs,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::affine;
    use crate::fixtures;
    use crate::sheaf::{apply_morphism, is_global_section, morphism_defect, random_assignment};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sigma_is_componentwise() {
        let chi = StalkMap::identity(Space::<f64>::real(1));
        let tau = affine::heaviside_map(0.0);
        let sigma = build_sigma(Space::real(2), &chi, &[tau]).unwrap();
        assert_eq!(sigma.apply(&Point::from_f64(&[1.0, -0.5])), Point::from_f64(&[1.0, 0.0]));
        assert!(build_sigma(Space::real(3), &chi, &[affine::heaviside_map(0.0)]).is_err());

        let id = StalkMap::identity(Space::<f64>::boolean(1));
        let sigma = build_sigma(Space::boolean(2), &id, &[id.clone()]).unwrap();
        for x in Space::<f64>::boolean(2).enumerate().unwrap() {
            assert_eq!(sigma.apply(&x), x);
        }
    }

    #[test]
    fn lighting_has_zero_error() {
        let p = fixtures::lighting(2);
        let (nom, dynamics) = fixtures::lighting_affine();
        let scheme = affine::build_boolean_scheme(&p, &nom, &dynamics).unwrap();
        let budget = error_budget(&p, &scheme, 0).unwrap();
        assert!(budget.eps.abs() <= 1e-12);
        assert!(budget.mode.is_exhaustive());
        assert_eq!(budget.recomputation_gap(), 0.0);
        for v in p.vertices() {
            let (w2, _) = omega2(&p, &scheme, v, 0).unwrap();
            assert_eq!(w2, 0.0);
            let (lhs, rhs) = thresholding_error_bound(&p, &scheme, v, 0).unwrap();
            assert_eq!((lhs, rhs), (0.0, 0.0));
        }
        let enc = build_s(&p).unwrap();
        let th = build_thresholded_sheaves(&enc, &scheme, 0).unwrap();
        for m in [&th.sigma, &th.gamma, &th.t, &th.step] {
            assert!(morphism_defect(m, 256, 0).unwrap() <= 1e-12);
        }
    }

    #[test]
    fn brownout_has_positive_error() {
        let p = fixtures::brownout(1);
        let nom = fixtures::brownout_nominal();
        let scheme = affine::induced_scheme(&p, &nom).unwrap();
        let budget = error_budget(&p, &scheme, 0).unwrap();
        assert!(budget.eps > 0.0);
        assert!(budget.mode.is_exhaustive());
        for v in p.vertices() {
            let (w1, _) = omega1(&p, &scheme, v, 0).unwrap();
            assert_eq!(w1, 0.0);
            let (lhs, rhs) = thresholding_error_bound(&p, &scheme, v, 0).unwrap();
            assert!(lhs <= rhs);
        }
        let enc = build_s(&p).unwrap();
        let th = build_thresholded_sheaves(&enc, &scheme, 0).unwrap();
        let lhs_max = p
            .vertices()
            .map(|v| thresholding_error_bound(&p, &scheme, v, 0).unwrap().0)
            .fold(0.0, f64::max);
        assert_eq!(th.step.defect_bound(), lhs_max);
    }

    #[test]
    fn omega_examples() {
        // constant-1 Boolean dynamics against a lift that thresholds to 0
        let p = fixtures::lighting(1);
        let (nom, d) = fixtures::lighting_affine();
        let mut scheme = affine::build_boolean_scheme(&p, &nom, &d).unwrap();
        let sc = scheme.vertices.get_mut("breaker").unwrap();
        sc.f_tilde = StalkMap::constant(
            sc.f_tilde.domain().clone(),
            sc.f_tilde.codomain().clone(),
            Point::from_f64(&[1.0]),
        );
        let (w1, mode) = omega1(&p, &scheme, "breaker", 0).unwrap();
        assert_eq!(w1, 1.0);
        assert!(mode.is_exhaustive());
    }

    #[test]
    fn sections_survive_sigma_and_gamma() {
        let p = fixtures::lighting(1);
        let (nom, d) = fixtures::lighting_affine();
        let scheme = affine::build_boolean_scheme(&p, &nom, &d).unwrap();
        let enc = build_s(&p).unwrap();
        let th = build_thresholded_sheaves(&enc, &scheme, 0).unwrap();
        let labs = p.feasible_labelings(1_000).unwrap();
        for lab in labs {
            let sec = Assignment::global(enc.n_section(&lab).unwrap());
            let pushed = apply_morphism(&th.sigma, &sec).unwrap();
            assert!(is_global_section(&th.encoded.n, &pushed, 1e-12));
            assert_eq!(apply_morphism(&th.gamma, &pushed).unwrap(), sec);
        }
    }

    #[test]
    fn theorem_chain_on_lighting() {
        let p = fixtures::lighting(2);
        let (nom, d) = fixtures::lighting_affine();
        let scheme = affine::build_boolean_scheme(&p, &nom, &d).unwrap();
        let enc = build_s(&p).unwrap();
        let th = build_thresholded_sheaves(&enc, &scheme, 0).unwrap();
        let budget = error_budget(&p, &scheme, 0).unwrap();
        let labs = p.feasible_labelings(1_000).unwrap();
        let s = enc
            .assignment_from_labelings(&enc.s, &[labs[3].clone(), labs[7].clone()])
            .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let r = random_assignment(&th.encoded.s.sheaf, &mut rng);
            for t in theorem_bound(&r, &s, &enc, &th, &budget).unwrap() {
                assert!(t.holds(1e-9), "{t:?}");
                // ε = 0: the right side is exactly 2K·d
                let d = assignment_distance(
                    &enc.n,
                    &enc.n_part(&s, t.step),
                    &apply_morphism(&th.gamma, &th.encoded.n_part(&r, t.step)).unwrap(),
                )
                .unwrap();
                assert_eq!(t.rhs, 2.0 * budget.k * d);
            }
        }
        let not_section = random_assignment(&enc.s.sheaf, &mut rng);
        let r = random_assignment(&th.encoded.s.sheaf, &mut rng);
        assert!(matches!(
            theorem_bound(&r, &not_section, &enc, &th, &budget),
            Err(Error::NotASection { .. })
        ));
    }
}
