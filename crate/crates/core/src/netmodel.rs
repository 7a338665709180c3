//! The network dynamical system: a directed graph with self-edges, per-vertex
//! state and control spaces, feasible sets, dynamics and objectives.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::space::{self, Domain, Point, Provenance, Space, StalkMap};

/// Feasible sets up to this size are checked exhaustively by [`validate`].
pub const EXHAUSTIVE_CHECK_LIMIT: usize = 65_536;
/// Seeded samples drawn when a feasible set is too large or continuous.
pub const VALIDATION_SAMPLES: usize = 2_000;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DirectedGraph {
    vertices: BTreeSet<String>,
    edges: BTreeSet<(String, String)>,
}

impl DirectedGraph {
    pub fn new<V, E, A, B>(vertices: V, edges: E) -> Result<Self>
    where
        V: IntoIterator,
        V::Item: AsRef<str>,
        E: IntoIterator<Item = (A, B)>,
        A: AsRef<str>,
        B: AsRef<str>,
    {
        let vertices: BTreeSet<String> =
            vertices.into_iter().map(|v| v.as_ref().to_owned()).collect();
        let mut set = BTreeSet::new();
        for (a, b) in edges {
            let (a, b) = (a.as_ref().to_owned(), b.as_ref().to_owned());
            for x in [&a, &b] {
                if !vertices.contains(x) {
                    return Err(Error::UnknownVertex(x.clone()));
                }
            }
            set.insert((a, b));
        }
        Ok(DirectedGraph {
            vertices,
            edges: set,
        })
    }

    pub fn vertices(&self) -> &BTreeSet<String> {
        &self.vertices
    }

    pub fn edges(&self) -> &BTreeSet<(String, String)> {
        &self.edges
    }

    pub fn has_edge(&self, from: &str, to: &str) -> bool {
        self.edges.contains(&(from.to_owned(), to.to_owned()))
    }

    pub fn missing_self_edges(&self) -> Vec<&str> {
        self.vertices
            .iter()
            .filter(|v| !self.has_edge(v, v))
            .map(String::as_str)
            .collect()
    }

    /// `U_v`: every `w` with an edge `w -> v`, in canonical order: `v` first,
    /// then the others by name.
    pub fn neighborhood(&self, v: &str) -> Result<Vec<String>> {
        if !self.vertices.contains(v) {
            return Err(Error::UnknownVertex(v.to_owned()));
        }
        let mut out = vec![v.to_owned()];
        out.extend(
            self.edges
                .iter()
                .filter(|(w, t)| t == v && w != v)
                .map(|(w, _)| w.clone()),
        );
        Ok(out)
    }
}

/// Spaces and maps attached to one vertex.
#[derive(Clone, Debug)]
pub struct VertexModel<S> {
    /// `S_v`
    pub state_space: Space<S>,
    /// `C_v`
    pub control_space: Space<S>,
    /// `f_v : R_v -> S_v`
    pub dynamics: StalkMap<S>,
    /// `J_v : S_v -> R`
    pub objective_state: StalkMap<S>,
    /// `J'_v : R_v -> R`
    pub objective_control: StalkMap<S>,
    /// `F_v ⊆ R_v`
    pub feasible: Space<S>,
}

#[derive(Clone, Debug)]
pub struct NetworkProblem<S> {
    pub graph: DirectedGraph,
    pub models: BTreeMap<String, VertexModel<S>>,
    pub horizon: usize,
}

/// One control and one state per vertex.
#[derive(Clone, Debug, PartialEq)]
pub struct Labeling<S> {
    pub controls: BTreeMap<String, Point<S>>,
    pub states: BTreeMap<String, Point<S>>,
}

impl<S: Scalar> NetworkProblem<S> {
    pub fn new(
        graph: DirectedGraph,
        models: BTreeMap<String, VertexModel<S>>,
        horizon: usize,
    ) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::InvalidProblem("horizon must be at least 1".into()));
        }
        for v in graph.vertices() {
            if !models.contains_key(v) {
                return Err(Error::InvalidProblem(format!("no model for vertex `{v}`")));
            }
        }
        if let Some(extra) = models.keys().find(|k| !graph.vertices().contains(*k)) {
            return Err(Error::UnknownVertex(extra.clone()));
        }
        Ok(NetworkProblem {
            graph,
            models,
            horizon,
        })
    }

    pub fn vertices(&self) -> impl Iterator<Item = &String> {
        self.graph.vertices().iter()
    }

    pub fn model(&self, v: &str) -> Result<&VertexModel<S>> {
        self.models
            .get(v)
            .ok_or_else(|| Error::UnknownVertex(v.to_owned()))
    }

    pub fn neighborhood(&self, v: &str) -> Result<Vec<String>> {
        self.graph.neighborhood(v)
    }

    /// `R_v = C_v × ∏_{w ∈ U_v} S_w` in canonical order.
    pub fn r_space(&self, v: &str) -> Result<Space<S>> {
        let mut factors = vec![self.model(v)?.control_space.clone()];
        for w in self.neighborhood(v)? {
            factors.push(self.model(&w)?.state_space.clone());
        }
        Ok(space::product(&factors))
    }

    /// Coordinates of `C_v` inside `R_v`.
    pub fn control_indices(&self, v: &str) -> Result<Vec<usize>> {
        Ok((0..self.model(v)?.control_space.dim()).collect())
    }

    /// Coordinates of `S_w` inside `R_v`.
    pub fn state_indices(&self, v: &str, w: &str) -> Result<Vec<usize>> {
        let mut at = self.model(v)?.control_space.dim();
        for u in self.neighborhood(v)? {
            let d = self.model(&u)?.state_space.dim();
            if u == w {
                return Ok((at..at + d).collect());
            }
            at += d;
        }
        Err(Error::UnknownVertex(format!("{w} (not in the neighborhood of {v})")))
    }

    /// `pr_{S_w} : R_v -> S_w`
    pub fn state_projection(&self, v: &str, w: &str) -> Result<StalkMap<S>> {
        let idx = self.state_indices(v, w)?;
        let pr = StalkMap::projection(&self.model(v)?.feasible, &idx)?;
        Ok(pr.with_codomain(self.model(w)?.state_space.clone()))
    }

    /// `pr_{C_v} : R_v -> C_v`
    pub fn control_projection(&self, v: &str) -> Result<StalkMap<S>> {
        let idx = self.control_indices(v)?;
        let pr = StalkMap::projection(&self.model(v)?.feasible, &idx)?;
        Ok(pr.with_codomain(self.model(v)?.control_space.clone()))
    }

    /// The structural part of [`validate`]: self-edges and signatures. These
    /// are needed to build sheaves at all.
    pub fn check_structure(&self) -> Result<()> {
        if let Some(issue) = structural_issues(self).into_iter().next() {
            return Err(match issue {
                Issue::MissingSelfEdge { vertex } => Error::MissingSelfEdge(vertex),
                other => Error::InvalidProblem(other.to_string()),
            });
        }
        Ok(())
    }

    /// Every labeling whose assembled tuples are all feasible, or `None` when
    /// some feasible set is not finite or the count would exceed `limit`.
    /// Depth-first over vertices in name order, controls before states.
    pub fn feasible_labelings(&self, limit: usize) -> Option<Vec<Labeling<S>>> {
        let verts: Vec<&String> = self.vertices().collect();
        let mut controls: Vec<Vec<Point<S>>> = Vec::new();
        let mut states: Vec<Vec<Point<S>>> = Vec::new();
        for v in &verts {
            let m = self.models.get(*v)?;
            let pts = m.feasible.enumerate()?;
            let cidx = self.control_indices(v).ok()?;
            controls.push(dedup(pts.iter().map(|p| p.select(&cidx))));
            // a state must be projectable from every feasible set that sees it
            let mut cands: Option<Vec<Point<S>>> = None;
            for u in self.vertices() {
                let Ok(idx) = self.state_indices(u, v) else { continue };
                let proj = dedup(self.models[u].feasible.enumerate()?.iter().map(|p| p.select(&idx)));
                cands = Some(match cands {
                    None => proj,
                    Some(prev) => prev.into_iter().filter(|p| proj.contains(p)).collect(),
                });
            }
            states.push(cands.unwrap_or_default());
        }
        let mut out = Vec::new();
        let mut current: Vec<(usize, usize)> = Vec::with_capacity(verts.len());
        let ok = self.labelings_rec(&verts, &controls, &states, &mut current, &mut out, limit);
        ok.then_some(out)
    }

    fn labelings_rec(
        &self,
        verts: &[&String],
        controls: &[Vec<Point<S>>],
        states: &[Vec<Point<S>>],
        current: &mut Vec<(usize, usize)>,
        out: &mut Vec<Labeling<S>>,
        limit: usize,
    ) -> bool {
        let k = current.len();
        if k == verts.len() {
            let lab = Labeling {
                controls: verts
                    .iter()
                    .zip(current.iter())
                    .enumerate()
                    .map(|(i, (v, &(c, _)))| ((*v).clone(), controls[i][c].clone()))
                    .collect(),
                states: verts
                    .iter()
                    .zip(current.iter())
                    .enumerate()
                    .map(|(i, (v, &(_, s)))| ((*v).clone(), states[i][s].clone()))
                    .collect(),
            };
            let feasible = verts.iter().all(|v| {
                assemble_state(self, v, &lab.controls, &lab.states)
                    .map(|x| self.models[*v].feasible.contains(&x, S::zero()))
                    .unwrap_or(false)
            });
            if feasible {
                if out.len() >= limit {
                    return false;
                }
                out.push(lab);
            }
            return true;
        }
        for c in 0..controls[k].len() {
            for s in 0..states[k].len() {
                current.push((c, s));
                let ok = self.labelings_rec(verts, controls, states, current, out, limit);
                current.pop();
                if !ok {
                    return false;
                }
            }
        }
        true
    }
}

fn dedup<S: Scalar>(points: impl Iterator<Item = Point<S>>) -> Vec<Point<S>> {
    let mut out: Vec<Point<S>> = Vec::new();
    for p in points {
        if !out.contains(&p) {
            out.push(p);
        }
    }
    out
}

/// `(c_v, s_v, s_{w_1}, …)` in canonical neighbor order.
pub fn assemble_state<S: Scalar>(
    p: &NetworkProblem<S>,
    v: &str,
    controls: &BTreeMap<String, Point<S>>,
    states: &BTreeMap<String, Point<S>>,
) -> Result<Point<S>> {
    let c = controls
        .get(v)
        .ok_or_else(|| Error::MissingValue(format!("control at {v}")))?;
    let mut parts = vec![c];
    let hood = p.neighborhood(v)?;
    for w in &hood {
        parts.push(
            states
                .get(w)
                .ok_or_else(|| Error::MissingValue(format!("state at {w}")))?,
        );
    }
    Ok(Point::concat(&parts))
}

/// A failed modeling assumption.
#[derive(Clone, Debug, PartialEq)]
pub enum Issue<S> {
    MissingSelfEdge { vertex: String },
    Signature { vertex: String, detail: String },
    EmptyFeasibleSet { vertex: String },
    /// `f_v(witness) = image` is not in `pr_{S_v} F_v`.
    Invariance { vertex: String, witness: Point<S>, image: Point<S> },
    NegativeObjective { vertex: String, objective: &'static str, witness: Point<S>, value: S },
    NotLipschitz { vertex: String, detail: String },
}

impl<S: Scalar> std::fmt::Display for Issue<S> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Issue::MissingSelfEdge { vertex } => write!(f, "vertex `{vertex}` has no self-edge"),
            Issue::Signature { vertex, detail } => write!(f, "vertex `{vertex}`: {detail}"),
            Issue::EmptyFeasibleSet { vertex } => write!(f, "vertex `{vertex}` has an empty feasible set"),
            Issue::Invariance { vertex, witness, image } => write!(
                f,
                "vertex `{vertex}`: dynamics map feasible {witness} to {image}, outside the feasible states"
            ),
            Issue::NegativeObjective { vertex, objective, witness, value } => {
                write!(f, "vertex `{vertex}`: {objective} is {value} < 0 at {witness}")
            }
            Issue::NotLipschitz { vertex, detail } => {
                write!(f, "vertex `{vertex}`: dynamics not Lipschitz ({detail})")
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ValidationReport<S> {
    pub issues: Vec<Issue<S>>,
    /// Per vertex, whether the feasible-set checks were exhaustive.
    pub exhaustive: BTreeMap<String, bool>,
}

impl<S> ValidationReport<S> {
    pub fn is_valid(&self) -> bool {
        self.issues.is_empty()
    }
}

fn structural_issues<S: Scalar>(p: &NetworkProblem<S>) -> Vec<Issue<S>> {
    let mut issues: Vec<Issue<S>> = p
        .graph
        .missing_self_edges()
        .into_iter()
        .map(|v| Issue::MissingSelfEdge { vertex: v.to_owned() })
        .collect();
    for (v, m) in &p.models {
        let Ok(r) = p.r_space(v) else { continue };
        let sig = |detail: String| Issue::Signature {
            vertex: v.clone(),
            detail,
        };
        if m.feasible.signature() != r.signature() {
            issues.push(sig(format!(
                "feasible set signature {:?} differs from R_v {:?}",
                m.feasible.signature(),
                r.signature()
            )));
        }
        if m.dynamics.domain().signature() != r.signature()
            || m.dynamics.codomain().signature() != m.state_space.signature()
        {
            issues.push(sig("dynamics must map R_v to S_v".into()));
        }
        if m.objective_state.domain().signature() != m.state_space.signature()
            || m.objective_state.codomain().dim() != 1
        {
            issues.push(sig("state objective must map S_v to R".into()));
        }
        if m.objective_control.domain().signature() != r.signature()
            || m.objective_control.codomain().dim() != 1
        {
            issues.push(sig("control objective must map R_v to R".into()));
        }
    }
    issues
}

/// Checks the standing assumptions on a network problem and reports every
/// failure with a witness. An empty report means the problem is valid.
pub fn validate<S: Scalar>(p: &NetworkProblem<S>, seed: u64) -> ValidationReport<S> {
    let mut issues = structural_issues(p);
    let mut exhaustive = BTreeMap::new();
    let structural_ok = issues.is_empty();
    if !structural_ok {
        return ValidationReport { issues, exhaustive };
    }
    let tol = S::lit(1e-9);
    for (v, m) in &p.models {
        let (points, full) =
            m.feasible
                .evaluation_points(EXHAUSTIVE_CHECK_LIMIT, VALIDATION_SAMPLES, seed);
        exhaustive.insert(v.clone(), full);
        if points.is_empty() {
            issues.push(Issue::EmptyFeasibleSet { vertex: v.clone() });
            continue;
        }
        let sidx = p.state_indices(v, v).expect("v ∈ U_v");
        let reachable = project_space(&m.feasible, &sidx, &m.state_space);
        if let Some(x) = points.iter().find(|x| !reachable.contains(&m.dynamics.apply(x), tol)) {
            issues.push(Issue::Invariance {
                vertex: v.clone(),
                witness: x.clone(),
                image: m.dynamics.apply(x),
            });
        }
        for x in &points {
            let val = m.objective_control.apply(x).0[0];
            if val < S::zero() {
                issues.push(Issue::NegativeObjective {
                    vertex: v.clone(),
                    objective: "J'",
                    witness: x.clone(),
                    value: val,
                });
                break;
            }
        }
        for x in &points {
            let s = x.select(&sidx);
            let val = m.objective_state.apply(&s).0[0];
            if val < S::zero() {
                issues.push(Issue::NegativeObjective {
                    vertex: v.clone(),
                    objective: "J",
                    witness: s,
                    value: val,
                });
                break;
            }
        }
        if m.dynamics.lipschitz().value().is_none() {
            match space::estimate_lipschitz(&m.dynamics, VALIDATION_SAMPLES, Some(&m.feasible), seed)
            {
                Ok(est) if est.value.is_finite() => {}
                Ok(est) => issues.push(Issue::NotLipschitz {
                    vertex: v.clone(),
                    detail: format!("estimated constant {}", est.value),
                }),
                // a single feasible point: every map is Lipschitz there
                Err(_) => {}
            }
        }
    }
    ValidationReport { issues, exhaustive }
}

/// `pr(F)` as a space description: exact for finite sets and aligned
/// products, otherwise the fallback space.
pub fn project_space<S: Scalar>(f: &Space<S>, indices: &[usize], fallback: &Space<S>) -> Space<S> {
    let sig: Vec<_> = indices.iter().map(|&i| f.signature()[i]).collect();
    if let Some(pts) = f
        .finite_len()
        .filter(|&n| n <= EXHAUSTIVE_CHECK_LIMIT)
        .and_then(|_| f.enumerate())
    {
        let proj = dedup(pts.iter().map(|p| p.select(indices)));
        return Space::finite(sig, proj).unwrap_or_else(|_| fallback.clone());
    }
    match f.domain() {
        Domain::All => fallback.unrestricted(),
        Domain::Box { lo, hi } => Space::boxed(
            sig,
            indices.iter().map(|&i| lo[i]).collect(),
            indices.iter().map(|&i| hi[i]).collect(),
        )
        .unwrap_or_else(|_| fallback.clone()),
        Domain::Product(factors) => {
            let mut at = 0;
            for factor in factors {
                let range: Vec<usize> = (at..at + factor.dim()).collect();
                if range == indices {
                    return factor.clone();
                }
                at += factor.dim();
            }
            fallback.clone()
        }
        Domain::Finite(_) => fallback.clone(),
    }
}

/// Provenance label for a feasible-set evaluation.
pub fn provenance_of(full: bool, count: usize, seed: u64) -> Provenance {
    if full {
        Provenance::Exhaustive { pairs: count }
    } else {
        Provenance::Sampled { pairs: count, seed }
    }
}
