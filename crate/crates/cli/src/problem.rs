//! Problem files (TOML, `schema_version = 1`).
//!
//! ```toml
//! schema_version = 1
//! horizon = 2
//!
//! [graph]
//! vertices = ["breaker", "fixture"]
//! edges = [["breaker", "breaker"], ["fixture", "fixture"], ["breaker", "fixture"]]
//!
//! [dynamics]
//! form = "affine"            # or "saturating-affine" with lo, hi
//!
//! [vertices.fixture]
//! controls = [0.0, 120.0]    # C_v, a finite list of reals
//! states = [0.0, 120.0]      # S_v; defaults to [s_phi, s_omega]
//! b = 0.0                    # B_vv
//! h = 0.0
//! a = { breaker = 1.0 }      # A_wv for each in-neighbor w (self included)
//! state_objective = { form = "abs", target = 120.0, weight = 1.0 }
//! control_objective = { form = "zero" }
//! nominal = { s_phi = 0.0, s_omega = 120.0, eta = 40.0 }
//!
//! [solver]
//! mode = "both"
//! budget = 200000
//! seed = 0
//! tolerance = 1e-6
//! ```
//!
//! `F_v` is the full product `C_v × ∏_{w∈U_v} S_w`. The nominal block enables
//! the Boolean scheme, with `c₀, c₁` the two listed controls.

use std::collections::BTreeMap;
use std::fmt;

use serde::Deserialize;
use sheafrelax::affine::{AffineDynamics, Nominal, NominalStates};
use sheafrelax::netmodel::{DirectedGraph, NetworkProblem, VertexModel};
use sheafrelax::space::{self, Coord, Lipschitz, Point, Space, StalkMap};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub schema_version: u32,
    pub horizon: usize,
    pub graph: GraphBlock,
    pub dynamics: DynamicsBlock,
    pub vertices: BTreeMap<String, VertexBlock>,
    #[serde(default)]
    pub solver: SolverBlock,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphBlock {
    pub vertices: Vec<String>,
    pub edges: Vec<(String, String)>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicsBlock {
    pub form: String,
    pub lo: Option<f64>,
    pub hi: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VertexBlock {
    pub controls: Vec<f64>,
    pub states: Option<Vec<f64>>,
    #[serde(default)]
    pub b: f64,
    #[serde(default)]
    pub h: f64,
    #[serde(default)]
    pub a: BTreeMap<String, f64>,
    #[serde(default)]
    pub state_objective: ObjectiveBlock,
    #[serde(default)]
    pub control_objective: ObjectiveBlock,
    pub nominal: Option<NominalBlock>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NominalBlock {
    pub s_phi: f64,
    pub s_omega: f64,
    pub eta: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveBlock {
    pub form: String,
    pub target: Option<f64>,
    pub weight: Option<f64>,
}

impl Default for ObjectiveBlock {
    fn default() -> Self {
        ObjectiveBlock {
            form: "zero".into(),
            target: None,
            weight: None,
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverBlock {
    pub mode: Option<String>,
    pub budget: Option<usize>,
    pub seed: Option<u64>,
    pub tolerance: Option<f64>,
}

#[derive(Debug)]
pub struct ParseError(pub String);

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ParseError {}

fn bad<T>(msg: impl Into<String>) -> Result<T, ParseError> {
    Err(ParseError(msg.into()))
}

/// A parsed problem with everything the commands need.
pub struct Loaded {
    pub problem: NetworkProblem<f64>,
    pub dynamics: AffineDynamics<f64>,
    /// Present only when every vertex has a nominal block.
    pub nominal: Option<NominalStates<f64>>,
    pub solver: SolverBlock,
}

pub fn parse(text: &str) -> Result<Loaded, ParseError> {
    let file: ProblemFile = toml::from_str(text).map_err(|e| ParseError(e.to_string()))?;
    build(file)
}

pub fn load(path: &std::path::Path) -> Result<Loaded, ParseError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ParseError(format!("{}: {e}", path.display())))?;
    parse(&text)
}

fn finite_reals(xs: &[f64], what: &str) -> Result<Space<f64>, ParseError> {
    if xs.is_empty() {
        return bad(format!("{what} must list at least one value"));
    }
    if xs.iter().any(|x| !x.is_finite()) {
        return bad(format!("{what} must be finite numbers"));
    }
    Space::finite(vec![Coord::Real], xs.iter().map(|&x| Point::from_f64(&[x])).collect())
        .map_err(|e| ParseError(e.to_string()))
}

fn state_objective(block: &ObjectiveBlock, domain: Space<f64>, v: &str) -> Result<StalkMap<f64>, ParseError> {
    match block.form.as_str() {
        "zero" => Ok(StalkMap::zero(domain, Space::real(1))),
        "abs" => {
            let (t, w) = (block.target.unwrap_or(0.0), block.weight.unwrap_or(1.0));
            Ok(StalkMap::new(domain, Space::real(1), move |x: &[f64]| {
                vec![w * (x[0] - t).abs()]
            })
            .with_lipschitz(Lipschitz::Exact(w.abs())))
        }
        other => bad(format!("vertex `{v}`: unknown state objective form `{other}`")),
    }
}

fn control_objective(block: &ObjectiveBlock, domain: Space<f64>, v: &str) -> Result<StalkMap<f64>, ParseError> {
    match block.form.as_str() {
        "zero" => Ok(StalkMap::zero(domain, Space::real(1))),
        "linear" => {
            let mut row = vec![0.0; domain.dim()];
            row[0] = block.weight.unwrap_or(1.0);
            StalkMap::affine(domain, Space::real(1), vec![row], vec![0.0])
                .map_err(|e| ParseError(e.to_string()))
        }
        "abs" => {
            let (t, w) = (block.target.unwrap_or(0.0), block.weight.unwrap_or(1.0));
            Ok(StalkMap::new(domain, Space::real(1), move |x: &[f64]| {
                vec![w * (x[0] - t).abs()]
            })
            .with_lipschitz(Lipschitz::Exact(w.abs())))
        }
        other => bad(format!("vertex `{v}`: unknown control objective form `{other}`")),
    }
}

fn build(file: ProblemFile) -> Result<Loaded, ParseError> {
    if file.schema_version != SCHEMA_VERSION {
        return bad(format!(
            "unsupported schema_version {} (expected {SCHEMA_VERSION})",
            file.schema_version
        ));
    }
    let graph = DirectedGraph::new(file.graph.vertices.clone(), file.graph.edges.clone())
        .map_err(|e| ParseError(e.to_string()))?;
    for v in graph.vertices() {
        if !file.vertices.contains_key(v) {
            return bad(format!("no [vertices.{v}] block"));
        }
    }
    if let Some(extra) = file.vertices.keys().find(|k| !graph.vertices().contains(*k)) {
        return bad(format!("[vertices.{extra}] names an unknown vertex"));
    }
    let clamp = match (file.dynamics.form.as_str(), file.dynamics.lo, file.dynamics.hi) {
        ("affine", None, None) => None,
        ("affine", _, _) => return bad("lo/hi only apply to saturating-affine dynamics"),
        ("saturating-affine", Some(lo), Some(hi)) => Some((lo, hi)),
        ("saturating-affine", _, _) => return bad("saturating-affine dynamics need lo and hi"),
        (other, _, _) => return bad(format!("unknown dynamics form `{other}`")),
    };

    let names: Vec<String> = graph.vertices().iter().cloned().collect();
    let mut coef = vec![vec![0.0; names.len()]; names.len()];
    let mut b = Vec::new();
    let mut h = Vec::new();
    for (i, v) in names.iter().enumerate() {
        let block = &file.vertices[v];
        for (w, &a) in &block.a {
            let Some(j) = names.iter().position(|x| x == w) else {
                return bad(format!("vertex `{v}`: coefficient for unknown vertex `{w}`"));
            };
            coef[i][j] = a;
        }
        b.push(block.b);
        h.push(block.h);
    }
    let dynamics =
        AffineDynamics::new(&graph, coef, b, h, clamp).map_err(|e| ParseError(e.to_string()))?;

    let mut nominal = BTreeMap::new();
    let mut states = BTreeMap::new();
    for v in &names {
        let block = &file.vertices[v];
        if let Some(n) = &block.nominal {
            if block.controls.len() != 2 {
                return bad(format!("vertex `{v}`: a nominal block needs exactly two controls"));
            }
            nominal.insert(
                v.clone(),
                Nominal {
                    s_phi: n.s_phi,
                    s_omega: n.s_omega,
                    eta: n.eta,
                    c0: block.controls[0],
                    c1: block.controls[1],
                },
            );
        }
        let levels = match (&block.states, &block.nominal) {
            (Some(s), _) => s.clone(),
            (None, Some(n)) => vec![n.s_phi, n.s_omega],
            (None, None) => return bad(format!("vertex `{v}`: states or nominal block required")),
        };
        states.insert(v.clone(), finite_reals(&levels, &format!("vertex `{v}` states"))?);
    }
    let nominal = if nominal.len() == names.len() {
        Some(NominalStates::new(nominal).map_err(|e| ParseError(e.to_string()))?)
    } else {
        None
    };

    let mut models = BTreeMap::new();
    for v in &names {
        let block = &file.vertices[v];
        let controls = finite_reals(&block.controls, &format!("vertex `{v}` controls"))?;
        let mut factors = vec![controls.clone()];
        for w in graph.neighborhood(v).map_err(|e| ParseError(e.to_string()))? {
            factors.push(states[&w].clone());
        }
        let feasible = space::product(&factors);
        models.insert(
            v.clone(),
            VertexModel {
                state_space: states[v].clone(),
                control_space: controls,
                dynamics: dynamics
                    .component_map(&graph, v, feasible.clone())
                    .map_err(|e| ParseError(e.to_string()))?,
                objective_state: state_objective(&block.state_objective, states[v].clone(), v)?,
                objective_control: control_objective(&block.control_objective, feasible.clone(), v)?,
                feasible,
            },
        );
    }
    let problem =
        NetworkProblem::new(graph, models, file.horizon).map_err(|e| ParseError(e.to_string()))?;
    Ok(Loaded {
        problem,
        dynamics,
        nominal,
        solver: file.solver,
    })
}
