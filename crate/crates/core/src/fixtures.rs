//! Small bundled problems and seeded random instance generators, shared by
//! tests, the command line front end and the acceptance suite.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::affine::{nominal_problem, AffineDynamics, Nominal, NominalStates, Objectives};
use crate::netmodel::{DirectedGraph, NetworkProblem, VertexModel};
use crate::space::{self, Coord, Lipschitz, Point, Space, StalkMap};

const VOLTS: f64 = 120.0;

fn lighting_graph() -> DirectedGraph {
    DirectedGraph::new(
        ["breaker", "fixture"],
        [
            ("breaker", "breaker"),
            ("fixture", "fixture"),
            ("breaker", "fixture"),
        ],
    )
    .expect("static graph")
}

fn lighting_nominal() -> Nominal<f64> {
    Nominal {
        s_phi: 0.0,
        s_omega: VOLTS,
        eta: 40.0,
        c0: 0.0,
        c1: VOLTS,
    }
}

/// Nominal states and dynamics of the lighting network: the breaker follows
/// its control, the fixture follows the breaker.
pub fn lighting_affine() -> (NominalStates<f64>, AffineDynamics<f64>) {
    let g = lighting_graph();
    let n = NominalStates::new(BTreeMap::from([
        ("breaker".to_owned(), lighting_nominal()),
        ("fixture".to_owned(), lighting_nominal()),
    ]))
    .expect("valid nominal states");
    // rows: breaker, fixture; columns: breaker, fixture
    let d = AffineDynamics::new(
        &g,
        vec![vec![0.0, 0.0], vec![1.0, 0.0]],
        vec![1.0, 0.0],
        vec![0.0, 0.0],
        None,
    )
    .expect("sparse coefficients");
    (n, d)
}

/// `J_fixture(s) = |s − 120|`
pub fn fixture_objective(state: Space<f64>) -> StalkMap<f64> {
    StalkMap::new(state, Space::real(1), |x: &[f64]| vec![(x[0] - VOLTS).abs()])
        .with_lipschitz(Lipschitz::Exact(1.0))
}

/// `J'_v = weight · c_v` on `R_v`.
pub fn control_cost(domain: Space<f64>, weight: f64) -> StalkMap<f64> {
    let mut row = vec![0.0; domain.dim()];
    row[0] = weight;
    StalkMap::affine(domain, Space::real(1), vec![row], vec![0.0]).expect("one row")
}

fn lighting_objectives(p_domain: Space<f64>) -> BTreeMap<String, Objectives<f64>> {
    let state = Space::finite(
        vec![Coord::Real],
        vec![Point::from_f64(&[0.0]), Point::from_f64(&[VOLTS])],
    )
    .expect("1-d points");
    BTreeMap::from([
        (
            "breaker".to_owned(),
            Objectives {
                state: None,
                control: Some(control_cost(p_domain, 0.1)),
            },
        ),
        (
            "fixture".to_owned(),
            Objectives {
                state: Some(fixture_objective(state)),
                control: None,
            },
        ),
    ])
}

fn breaker_domain() -> Space<f64> {
    let pts = vec![Point::from_f64(&[0.0]), Point::from_f64(&[VOLTS])];
    let f = Space::finite(vec![Coord::Real], pts).expect("1-d points");
    space::product(&[f.clone(), f])
}

/// The two-vertex lighting network on nominal states `{0, 120}` V with
/// controls `{0, 120}`: the fixture should be lit, switching the breaker on
/// costs `0.1 c`.
pub fn lighting(horizon: usize) -> NetworkProblem<f64> {
    let (n, d) = lighting_affine();
    nominal_problem(
        lighting_graph(),
        &n,
        &d,
        lighting_objectives(breaker_domain()),
        horizon,
    )
    .expect("lighting problem")
}

/// The lighting network with every objective identically zero.
pub fn zero_objective(horizon: usize) -> NetworkProblem<f64> {
    let (n, d) = lighting_affine();
    nominal_problem(lighting_graph(), &n, &d, BTreeMap::new(), horizon).expect("zero problem")
}

pub fn brownout_nominal() -> NominalStates<f64> {
    lighting_affine().0
}

/// Saturating dynamics of the brownout network.
pub fn brownout_dynamics() -> AffineDynamics<f64> {
    AffineDynamics::new(
        &lighting_graph(),
        vec![vec![0.0, 0.0], vec![1.0, 0.0]],
        vec![1.0, 1.0],
        vec![0.0, -VOLTS / 2.0],
        Some((0.0, VOLTS)),
    )
    .expect("sparse coefficients")
}

/// Lighting with a half-voltage level: states `{0, 60, 120}`, and the
/// fixture sees `clamp(s_breaker + c_fixture − 60, 0, 120)`. The 60 V level is
/// not nominal, so thresholding loses information.
pub fn brownout(horizon: usize) -> NetworkProblem<f64> {
    let g = lighting_graph();
    let d = brownout_dynamics();
    let levels = Space::finite(
        vec![Coord::Real],
        [0.0, VOLTS / 2.0, VOLTS]
            .iter()
            .map(|&s| Point::from_f64(&[s]))
            .collect(),
    )
    .expect("levels");
    let controls = Space::finite(
        vec![Coord::Real],
        vec![Point::from_f64(&[0.0]), Point::from_f64(&[VOLTS])],
    )
    .expect("controls");
    let mut models = BTreeMap::new();
    for v in g.vertices() {
        let mut factors = vec![controls.clone()];
        factors.extend(g.neighborhood(v).expect("vertex").iter().map(|_| levels.clone()));
        let feasible = space::product(&factors);
        let objective_state = if v == "fixture" {
            fixture_objective(levels.clone())
        } else {
            StalkMap::zero(levels.clone(), Space::real(1))
        };
        let objective_control = if v == "breaker" {
            control_cost(feasible.clone(), 0.1)
        } else {
            StalkMap::zero(feasible.clone(), Space::real(1))
        };
        models.insert(
            v.clone(),
            VertexModel {
                state_space: levels.clone(),
                control_space: controls.clone(),
                dynamics: d.component_map(&g, v, feasible.clone()).expect("row"),
                objective_state,
                objective_control,
                feasible,
            },
        );
    }
    NetworkProblem::new(g, models, horizon).expect("brownout problem")
}

/// A random graph on `k` vertices `v0, v1, …` with every self-edge and
/// each other ordered pair present with probability 0.4.
pub fn random_graph<R: Rng + ?Sized>(rng: &mut R, k: usize) -> DirectedGraph {
    let names: Vec<String> = (0..k).map(|i| format!("v{i}")).collect();
    let mut edges = Vec::new();
    for w in &names {
        for v in &names {
            if w == v || rng.gen_bool(0.4) {
                edges.push((w.clone(), v.clone()));
            }
        }
    }
    DirectedGraph::new(names.clone(), edges).expect("generated graph")
}

/// A random affine problem on nominal states: sparsity-respecting `A`,
/// nonzero diagonal `B`, random `h`, nominal pairs, thresholds and controls,
/// and nonnegative absolute-deviation objectives.
pub fn random_affine_instance<R: Rng + ?Sized>(
    rng: &mut R,
    k: usize,
    horizon: usize,
) -> (NetworkProblem<f64>, NominalStates<f64>, AffineDynamics<f64>) {
    let g = random_graph(rng, k);
    let names: Vec<String> = g.vertices().iter().cloned().collect();
    let mut coef = vec![vec![0.0; k]; k];
    for (i, v) in names.iter().enumerate() {
        for (j, w) in names.iter().enumerate() {
            if g.has_edge(w, v) {
                coef[i][j] = rng.gen_range(-1.0..1.0);
            }
        }
    }
    let b = (0..k)
        .map(|_| rng.gen_range(0.5..2.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 })
        .collect();
    let h = (0..k).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let d = AffineDynamics::new(&g, coef, b, h, None).expect("sparse coefficients");
    let mut noms = BTreeMap::new();
    for v in &names {
        let s_phi = rng.gen_range(-2.0..0.0);
        let gap = rng.gen_range(0.5..3.0);
        let c0 = rng.gen_range(-1.0..1.0);
        let dc = rng.gen_range(0.5..2.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        noms.insert(
            v.clone(),
            Nominal {
                s_phi,
                s_omega: s_phi + gap,
                eta: s_phi + rng.gen_range(0.05..1.0) * gap,
                c0,
                c1: c0 + dc,
            },
        );
    }
    let n = NominalStates::new(noms).expect("valid nominal states");
    let mut objectives = BTreeMap::new();
    for v in &names {
        let nv = *n.get(v).expect("vertex");
        let (ws, wc) = (rng.gen_range(0.0..2.0), rng.gen_range(0.0..2.0));
        let state = Space::finite(vec![Coord::Real], nv.state_points()).expect("points");
        let hood = g.neighborhood(v).expect("vertex").len();
        objectives.insert(
            v.clone(),
            Objectives {
                state: Some(
                    StalkMap::new(state, Space::real(1), move |x: &[f64]| {
                        vec![ws * (x[0] - nv.s_omega).abs()]
                    })
                    .with_lipschitz(Lipschitz::Exact(ws)),
                ),
                control: Some(
                    StalkMap::new(Space::real(1 + hood), Space::real(1), move |x: &[f64]| {
                        vec![wc * (x[0] - nv.c0).abs()]
                    })
                    .with_lipschitz(Lipschitz::Exact(wc)),
                ),
            },
        );
    }
    let p = nominal_problem(g, &n, &d, objectives, horizon).expect("affine problem");
    let p = fix_objective_domains(p);
    (p, n, d)
}

fn fix_objective_domains(mut p: NetworkProblem<f64>) -> NetworkProblem<f64> {
    for m in p.models.values_mut() {
        m.objective_control = m.objective_control.restrict_domain(m.feasible.clone());
    }
    p
}

/// Replaces every `F_v` with a random nonempty subset of itself, each point
/// kept with probability `keep`.
pub fn thin_feasible<R: Rng + ?Sized>(
    rng: &mut R,
    mut p: NetworkProblem<f64>,
    keep: f64,
) -> NetworkProblem<f64> {
    for m in p.models.values_mut() {
        let pts = m.feasible.enumerate().expect("finite feasible set");
        let mut kept: Vec<Point<f64>> = pts.iter().filter(|_| rng.gen_bool(keep)).cloned().collect();
        if kept.is_empty() {
            kept.push(pts.choose(rng).expect("nonempty").clone());
        }
        m.feasible = Space::finite(m.feasible.signature().to_vec(), kept).expect("subset");
        m.dynamics = m.dynamics.restrict_domain(m.feasible.clone());
        m.objective_control = m.objective_control.restrict_domain(m.feasible.clone());
    }
    p
}
