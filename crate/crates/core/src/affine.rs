//! Boolean state control: nominal states, Heaviside thresholds, affine
//! dynamics `f(x, u) = A x + B u + h` and their Boolean counterparts.
//!
//! Coefficients are stored per target vertex: `coef[v][w]` is the weight of
//! `s_w` in the update of `v`, i.e. the entry `A_{wv}` of the edge-indexed
//! matrix. With this layout the vectorized form multiplies by `coef`
//! directly, and both forms read the same numbers.

use std::collections::BTreeMap;

use crate::boolrelax::{build_sigma, ThresholdingScheme, VertexScheme};
use crate::error::{Error, Result};
use crate::netmodel::{DirectedGraph, NetworkProblem, VertexModel};
use crate::scalar::Scalar;
use crate::sheaf::SECTION_TOL;
use crate::space::{self, Coord, Lipschitz, Point, Space, StalkMap};

/// Inputs this close to zero count as zero in the Heaviside function.
pub const HEAVISIDE_GUARD: f64 = 1e-12;

/// `H(x) = 1` for `x ≥ 0`, else `0`.
pub fn heaviside<S: Scalar>(x: S) -> S {
    if x >= -S::lit(HEAVISIDE_GUARD) {
        S::one()
    } else {
        S::zero()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Nominal<S> {
    pub s_phi: S,
    pub s_omega: S,
    pub eta: S,
    pub c0: S,
    pub c1: S,
}

impl<S: Scalar> Nominal<S> {
    pub fn check(&self, v: &str) -> Result<()> {
        if !(self.s_phi < self.eta && self.eta <= self.s_omega) {
            return Err(Error::InvalidNominal(
                v.to_owned(),
                format!(
                    "need s_phi < eta <= s_omega, got {} / {} / {}",
                    self.s_phi, self.eta, self.s_omega
                ),
            ));
        }
        if self.c0 == self.c1 {
            return Err(Error::InvalidNominal(v.to_owned(), "c0 equals c1".into()));
        }
        Ok(())
    }

    /// `τ_v(s) = H(s − η_v)`
    pub fn tau(&self, s: S) -> S {
        heaviside(s - self.eta)
    }

    /// `ρ_v(0) = s_Φ`, `ρ_v(1) = s_Ω`
    pub fn rho(&self, b: S) -> S {
        if b >= S::lit(0.5) {
            self.s_omega
        } else {
            self.s_phi
        }
    }

    /// `ρ_v(b) = (s_Ω − s_Φ) b + s_Φ`
    pub fn rho_affine(&self, b: S) -> S {
        (self.s_omega - self.s_phi) * b + self.s_phi
    }

    /// `χ_v(c) = (c − c₀)/(c₁ − c₀)`
    pub fn chi(&self, c: S) -> S {
        (c - self.c0) / (self.c1 - self.c0)
    }

    /// `χ_v⁻¹(b) = (c₁ − c₀) b + c₀`
    pub fn chi_inv(&self, b: S) -> S {
        (self.c1 - self.c0) * b + self.c0
    }

    pub fn state_points(&self) -> Vec<Point<S>> {
        vec![Point::new(vec![self.s_phi]), Point::new(vec![self.s_omega])]
    }

    pub fn control_points(&self) -> Vec<Point<S>> {
        vec![Point::new(vec![self.c0]), Point::new(vec![self.c1])]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NominalStates<S> {
    pub vertices: BTreeMap<String, Nominal<S>>,
}

impl<S: Scalar> NominalStates<S> {
    pub fn new(vertices: BTreeMap<String, Nominal<S>>) -> Result<Self> {
        for (v, n) in &vertices {
            n.check(v)?;
        }
        Ok(NominalStates { vertices })
    }

    pub fn get(&self, v: &str) -> Result<&Nominal<S>> {
        self.vertices
            .get(v)
            .ok_or_else(|| Error::InvalidNominal(v.to_owned(), "no nominal states".into()))
    }
}

/// `f(x, u) = A x + B u + h` over the vertices in name order, optionally
/// clamped componentwise to `[lo, hi]` afterwards.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineDynamics<S> {
    pub vertices: Vec<String>,
    /// `coef[v][w] = A_{wv}`
    pub coef: Vec<Vec<S>>,
    /// diagonal of `B`
    pub b: Vec<S>,
    pub h: Vec<S>,
    pub clamp: Option<(S, S)>,
}

impl<S: Scalar> AffineDynamics<S> {
    /// Checks dimensions and that `A_{wv} ≠ 0` only on edges `(w, v)`.
    pub fn new(
        graph: &DirectedGraph,
        coef: Vec<Vec<S>>,
        b: Vec<S>,
        h: Vec<S>,
        clamp: Option<(S, S)>,
    ) -> Result<Self> {
        let vertices: Vec<String> = graph.vertices().iter().cloned().collect();
        let n = vertices.len();
        for len in [coef.len(), b.len(), h.len()] {
            if len != n {
                return Err(Error::DimensionMismatch { expected: n, got: len });
            }
        }
        for (v, row) in vertices.iter().zip(&coef) {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: row.len(),
                });
            }
            for (w, &a) in vertices.iter().zip(row) {
                if a != S::zero() && !graph.has_edge(w, v) {
                    return Err(Error::InvalidProblem(format!(
                        "A[{w}][{v}] is nonzero but ({w}, {v}) is not an edge"
                    )));
                }
            }
        }
        if let Some((lo, hi)) = clamp {
            if lo > hi {
                return Err(Error::InvalidProblem("clamp lo exceeds hi".into()));
            }
        }
        Ok(AffineDynamics {
            vertices,
            coef,
            b,
            h,
            clamp,
        })
    }

    fn index(&self, v: &str) -> Result<usize> {
        self.vertices
            .iter()
            .position(|x| x == v)
            .ok_or_else(|| Error::UnknownVertex(v.to_owned()))
    }

    /// `A_{wv}`
    pub fn a(&self, w: &str, v: &str) -> Result<S> {
        Ok(self.coef[self.index(v)?][self.index(w)?])
    }

    /// `f(x, u)` on full state and control vectors.
    pub fn apply(&self, x: &[S], u: &[S]) -> Result<Vec<S>> {
        let n = self.vertices.len();
        for len in [x.len(), u.len()] {
            if len != n {
                return Err(Error::DimensionMismatch { expected: n, got: len });
            }
        }
        Ok((0..n)
            .map(|v| {
                let ax = self.coef[v]
                    .iter()
                    .zip(x)
                    .fold(S::zero(), |acc, (&a, &s)| acc + a * s);
                self.saturate(ax + self.b[v] * u[v] + self.h[v])
            })
            .collect())
    }

    fn saturate(&self, y: S) -> S {
        match self.clamp {
            Some((lo, hi)) => y.max(lo).min(hi),
            None => y,
        }
    }

    /// The coefficient row of `f_v` against `R_v = C_v × S_v × S_{w₁} × …`.
    pub fn row(&self, graph: &DirectedGraph, v: &str) -> Result<Vec<S>> {
        let i = self.index(v)?;
        let mut row = vec![self.b[i]];
        for w in graph.neighborhood(v)? {
            row.push(self.coef[i][self.index(&w)?]);
        }
        Ok(row)
    }

    /// Evaluates `f_v` on a tuple of `R_v`, summing the state terms in vertex
    /// order so the result matches [`AffineDynamics::apply`] bit for bit.
    fn evaluator(&self, graph: &DirectedGraph, v: &str) -> Result<impl Fn(&[S]) -> S> {
        let i = self.index(v)?;
        let mut slots: Vec<(usize, usize)> = graph
            .neighborhood(v)?
            .iter()
            .enumerate()
            .map(|(k, w)| Ok((self.index(w)?, k + 1)))
            .collect::<Result<_>>()?;
        slots.sort_unstable();
        let weights: Vec<(S, usize)> = slots.iter().map(|&(j, k)| (self.coef[i][j], k)).collect();
        let (b, h, clamp) = (self.b[i], self.h[i], self.clamp);
        Ok(move |x: &[S]| {
            let ax = weights
                .iter()
                .fold(S::zero(), |acc, &(a, k)| acc + a * x[k]);
            let y = ax + b * x[0] + h;
            match clamp {
                Some((lo, hi)) => y.max(lo).min(hi),
                None => y,
            }
        })
    }

    /// `f_v : R_v -> S_v` as a map. The Lipschitz constant is the norm of the
    /// coefficient row, exact when unclamped and an upper bound otherwise.
    pub fn component_map(&self, graph: &DirectedGraph, v: &str, domain: Space<S>) -> Result<StalkMap<S>> {
        let row = self.row(graph, v)?;
        if row.len() != domain.dim() {
            return Err(Error::DimensionMismatch {
                expected: row.len(),
                got: domain.dim(),
            });
        }
        let k = crate::scalar::norm2(&row);
        let eval = self.evaluator(graph, v)?;
        Ok(StalkMap::new(domain, Space::real(1), move |x: &[S]| vec![eval(x)]).with_lipschitz(
            if self.clamp.is_some() {
                Lipschitz::UpperBound(k)
            } else {
                Lipschitz::Exact(k)
            },
        ))
    }
}

/// `[f(x, u)]_v = Σ_{w∈U_v} A_{wv} s_w + B_{vv} c_v + h_v` on a tuple of
/// `R_v` in canonical order.
pub fn dynamics_component<S: Scalar>(
    graph: &DirectedGraph,
    d: &AffineDynamics<S>,
    v: &str,
    tuple: &[S],
) -> Result<S> {
    let width = 1 + graph.neighborhood(v)?.len();
    if tuple.len() != width {
        return Err(Error::DimensionMismatch {
            expected: width,
            got: tuple.len(),
        });
    }
    Ok(d.evaluator(graph, v)?(tuple))
}

pub fn heaviside_tau<S: Scalar>(n: &NominalStates<S>, v: &str, s: S) -> Result<S> {
    Ok(n.get(v)?.tau(s))
}

pub fn lift_rho<S: Scalar>(n: &NominalStates<S>, v: &str, b: S) -> Result<S> {
    Ok(n.get(v)?.rho(b))
}

/// `τ_v` as a map `ℝ¹ -> 𝔹¹`.
pub fn heaviside_map<S: Scalar>(eta: S) -> StalkMap<S> {
    StalkMap::new(Space::real(1), Space::boolean(1), move |x: &[S]| {
        vec![heaviside(x[0] - eta)]
    })
}

/// `f̃_v(c̃_v, s̃_v, …) = H(Σ_{w∈U_v} A_{wv} ρ_w(s̃_w) + B_{vv} χ_v⁻¹(c̃_v) + h_v − η_v)`
pub fn boolean_dynamics_component<S: Scalar>(
    graph: &DirectedGraph,
    d: &AffineDynamics<S>,
    n: &NominalStates<S>,
    v: &str,
    tuple: &[S],
) -> Result<S> {
    let hood = graph.neighborhood(v)?;
    if tuple.len() != hood.len() + 1 {
        return Err(Error::DimensionMismatch {
            expected: hood.len() + 1,
            got: tuple.len(),
        });
    }
    let nv = n.get(v)?;
    let mut lifted = vec![nv.chi_inv(tuple[0])];
    for (w, &b) in hood.iter().zip(&tuple[1..]) {
        lifted.push(n.get(w)?.rho(b));
    }
    Ok(nv.tau(dynamics_component(graph, d, v, &lifted)?))
}

/// `𝐇(M₁ x̃ + M₂ ũ + 𝐲)` together with the matrices it is built from.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorizedBooleanDynamics<S> {
    /// `A D_s`
    pub m1: Vec<Vec<S>>,
    /// `B D_c`, diagonal
    pub m2: Vec<S>,
    /// `A 𝐡_s + B 𝐜₀ + 𝐡 − 𝛈`
    pub y: Vec<S>,
    pub d_c: Vec<S>,
    pub d_s: Vec<S>,
    pub h_s: Vec<S>,
    pub c0: Vec<S>,
    pub eta: Vec<S>,
}

impl<S: Scalar> VectorizedBooleanDynamics<S> {
    pub fn new(d: &AffineDynamics<S>, n: &NominalStates<S>) -> Result<Self> {
        let noms = d
            .vertices
            .iter()
            .map(|v| n.get(v).copied())
            .collect::<Result<Vec<_>>>()?;
        let d_s: Vec<S> = noms.iter().map(|x| x.s_omega - x.s_phi).collect();
        let h_s: Vec<S> = noms.iter().map(|x| x.s_phi).collect();
        let d_c: Vec<S> = noms.iter().map(|x| x.c1 - x.c0).collect();
        let c0: Vec<S> = noms.iter().map(|x| x.c0).collect();
        let eta: Vec<S> = noms.iter().map(|x| x.eta).collect();
        let m1 = d
            .coef
            .iter()
            .map(|row| row.iter().zip(&d_s).map(|(&a, &s)| a * s).collect())
            .collect();
        let m2 = d.b.iter().zip(&d_c).map(|(&b, &c)| b * c).collect();
        let y = (0..d.vertices.len())
            .map(|v| {
                let ah = d.coef[v]
                    .iter()
                    .zip(&h_s)
                    .fold(S::zero(), |acc, (&a, &s)| acc + a * s);
                ah + d.b[v] * c0[v] + d.h[v] - eta[v]
            })
            .collect();
        Ok(VectorizedBooleanDynamics {
            m1,
            m2,
            y,
            d_c,
            d_s,
            h_s,
            c0,
            eta,
        })
    }

    /// `𝐇(M₁ x̃ + M₂ ũ + 𝐲)`
    pub fn apply(&self, x: &[S], u: &[S]) -> Result<Vec<S>> {
        let n = self.y.len();
        for len in [x.len(), u.len()] {
            if len != n {
                return Err(Error::DimensionMismatch { expected: n, got: len });
            }
        }
        Ok((0..n)
            .map(|v| {
                let mx = self.m1[v]
                    .iter()
                    .zip(x)
                    .fold(S::zero(), |acc, (&a, &s)| acc + a * s);
                heaviside(mx + self.m2[v] * u[v] + self.y[v])
            })
            .collect())
    }

    /// `Γ(x̃, ũ) = (D_s x̃ + 𝐡_s, D_c ũ + 𝐜₀)`
    pub fn gamma(&self, x: &[S], u: &[S]) -> (Vec<S>, Vec<S>) {
        let xs = x
            .iter()
            .zip(self.d_s.iter().zip(&self.h_s))
            .map(|(&b, (&d, &h))| d * b + h)
            .collect();
        let us = u
            .iter()
            .zip(self.d_c.iter().zip(&self.c0))
            .map(|(&b, (&d, &c))| d * b + c)
            .collect();
        (xs, us)
    }

    /// `T(x) = 𝐇(x − 𝛈)`
    pub fn t(&self, x: &[S]) -> Vec<S> {
        x.iter().zip(&self.eta).map(|(&s, &e)| heaviside(s - e)).collect()
    }
}

/// Objective maps of one vertex; `None` means identically zero.
#[derive(Clone, Debug, Default)]
pub struct Objectives<S> {
    pub state: Option<StalkMap<S>>,
    pub control: Option<StalkMap<S>>,
}

/// The problem with `S_v = {s_Φ, s_Ω}`, `C_v = {c₀, c₁}` and
/// `F_v = C_v × ∏_{w∈U_v} S_w`, dynamics from `d`.
pub fn nominal_problem<S: Scalar>(
    graph: DirectedGraph,
    n: &NominalStates<S>,
    d: &AffineDynamics<S>,
    mut objectives: BTreeMap<String, Objectives<S>>,
    horizon: usize,
) -> Result<NetworkProblem<S>> {
    let mut models = BTreeMap::new();
    for v in graph.vertices() {
        let nv = n.get(v)?;
        let state = Space::finite(vec![Coord::Real], nv.state_points())?;
        let control = Space::finite(vec![Coord::Real], nv.control_points())?;
        let mut factors = vec![control.clone()];
        for w in graph.neighborhood(v)? {
            factors.push(Space::finite(vec![Coord::Real], n.get(&w)?.state_points())?);
        }
        let feasible = space::product(&factors);
        let obj = objectives.remove(v).unwrap_or_default();
        models.insert(
            v.clone(),
            VertexModel {
                objective_state: obj
                    .state
                    .unwrap_or_else(|| StalkMap::zero(state.clone(), Space::real(1))),
                objective_control: obj
                    .control
                    .unwrap_or_else(|| StalkMap::zero(feasible.clone(), Space::real(1))),
                dynamics: d.component_map(&graph, v, feasible.clone())?,
                state_space: state,
                control_space: control,
                feasible,
            },
        );
    }
    NetworkProblem::new(graph, models, horizon)
}

fn vertex_parts<S: Scalar>(
    p: &NetworkProblem<S>,
    n: &NominalStates<S>,
    v: &str,
) -> Result<(StalkMap<S>, StalkMap<S>, StalkMap<S>, StalkMap<S>)> {
    let nv = *n.get(v)?;
    let m = p.model(v)?;
    if m.state_space.dim() != 1 || m.control_space.dim() != 1 {
        return Err(Error::SchemeInvalid(format!(
            "vertex `{v}` needs one-dimensional states and controls"
        )));
    }
    let tau = heaviside_map(nv.eta);
    // case forms: on {c₀, c₁} and {0, 1} they agree with the affine formulas
    // but hit the endpoints exactly
    let chi = StalkMap::new(m.control_space.clone(), Space::boolean(1), move |x: &[S]| {
        vec![if (x[0] - nv.c1).abs() < (x[0] - nv.c0).abs() {
            S::one()
        } else {
            S::zero()
        }]
    })
    .with_lipschitz(Lipschitz::Exact(S::one() / (nv.c1 - nv.c0).abs()));
    let rho = StalkMap::new(Space::boolean(1), Space::real(1), move |x: &[S]| vec![nv.rho(x[0])])
        .with_lipschitz(Lipschitz::Exact((nv.s_omega - nv.s_phi).abs()));
    let mut lifts = vec![(nv.c0, nv.c1)];
    for w in p.neighborhood(v)? {
        let nw = n.get(&w)?;
        lifts.push((nw.s_phi, nw.s_omega));
    }
    let k = lifts
        .iter()
        .fold(S::zero(), |acc, &(lo, hi)| acc.max((hi - lo).abs()));
    let gamma = StalkMap::new(
        Space::boolean(lifts.len()),
        p.r_space(v)?.unrestricted(),
        move |x: &[S]| {
            x.iter()
                .zip(&lifts)
                .map(|(&b, &(lo, hi))| if b >= S::lit(0.5) { hi } else { lo })
                .collect()
        },
    )
    .with_lipschitz(Lipschitz::Exact(k));
    Ok((tau, chi, rho, gamma))
}

/// The thresholding scheme with `f̃_v = τ_v ∘ f_v ∘ γ_v` for an arbitrary
/// problem on nominal states; `F̃_v = σ_v(F_v)`.
pub fn induced_scheme<S: Scalar>(
    p: &NetworkProblem<S>,
    n: &NominalStates<S>,
) -> Result<ThresholdingScheme<S>> {
    scheme_with(p, n, |v, tau, gamma| {
        Ok(tau.after(&p.model(v)?.dynamics.after(gamma)))
    })
}

/// The scheme of an affine problem with the closed-form Boolean dynamics.
/// Fails with `InconsistentDynamics` when the problem's `f_v` differs from
/// the one `d` induces on some feasible point.
pub fn build_boolean_scheme<S: Scalar>(
    p: &NetworkProblem<S>,
    n: &NominalStates<S>,
    d: &AffineDynamics<S>,
) -> Result<ThresholdingScheme<S>> {
    let tol = S::lit(SECTION_TOL);
    for v in p.vertices() {
        let m = p.model(v)?;
        let pts = m.feasible.enumerate().ok_or_else(|| Error::InconsistentDynamics {
            vertex: v.clone(),
            detail: "F_v is not finite".into(),
        })?;
        for x in pts {
            let want = dynamics_component(&p.graph, d, v, &x.0)?;
            let got = m.dynamics.apply(&x);
            if (got.0[0] - want).abs() > tol {
                return Err(Error::InconsistentDynamics {
                    vertex: v.clone(),
                    detail: format!("f_v{x} = {} but the affine form gives {want}", got.0[0]),
                });
            }
        }
    }
    scheme_with(p, n, |v, _, _| {
        let graph = p.graph.clone();
        let (d, n, v) = (d.clone(), n.clone(), v.to_owned());
        let k = 1 + p.neighborhood(&v)?.len();
        Ok(StalkMap::new(Space::boolean(k), Space::boolean(1), move |x: &[S]| {
            vec![boolean_dynamics_component(&graph, &d, &n, &v, x).unwrap_or_else(|_| S::zero())]
        }))
    })
}

fn scheme_with<S: Scalar>(
    p: &NetworkProblem<S>,
    n: &NominalStates<S>,
    f_tilde: impl Fn(&str, &StalkMap<S>, &StalkMap<S>) -> Result<StalkMap<S>>,
) -> Result<ThresholdingScheme<S>> {
    let mut vertices = BTreeMap::new();
    for v in p.vertices() {
        let (tau, chi, rho, gamma) = vertex_parts(p, n, v)?;
        let taus = p
            .neighborhood(v)?
            .iter()
            .map(|w| Ok(heaviside_map(n.get(w)?.eta)))
            .collect::<Result<Vec<_>>>()?;
        let m = p.model(v)?;
        let sigma = build_sigma(m.feasible.clone(), &chi, &taus)?;
        let pts = m.feasible.enumerate().ok_or_else(|| {
            Error::SchemeInvalid(format!("F at `{v}` must be finite to build F̃"))
        })?;
        let mut tilde: Vec<Point<S>> = Vec::new();
        for x in &pts {
            let y = sigma.apply(x);
            if !tilde.contains(&y) {
                tilde.push(y);
            }
        }
        tilde.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        let k = 1 + taus.len();
        let feasible_tilde = Space::finite(vec![Coord::Boolean; k], tilde)?;
        let f = f_tilde(v, &tau, &gamma)?;
        vertices.insert(
            v.clone(),
            VertexScheme {
                tau: tau.restrict_domain(m.state_space.clone()),
                chi: chi.restrict_domain(m.control_space.clone()),
                sigma,
                gamma: gamma.restrict_domain(feasible_tilde.clone()),
                rho,
                f_tilde: f.restrict_domain(feasible_tilde.clone()),
                feasible_tilde,
                state_tilde: Space::boolean(1),
                control_tilde: Space::boolean(1),
            },
        );
    }
    Ok(ThresholdingScheme { vertices })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boolrelax::{error_budget, omega1, omega2, thresholding_error_bound};
    use crate::fixtures;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn two_vertex() -> DirectedGraph {
        DirectedGraph::new(["v", "w"], [("v", "v"), ("w", "w"), ("w", "v")]).unwrap()
    }

    #[test]
    fn component_arithmetic() {
        let g = DirectedGraph::new(["v"], [("v", "v")]).unwrap();
        let d = AffineDynamics::new(&g, vec![vec![0.0]], vec![1.0], vec![0.0], None).unwrap();
        assert_eq!(dynamics_component(&g, &d, "v", &[1.0, 7.0]).unwrap(), 1.0);

        let g = two_vertex();
        let d = AffineDynamics::new(
            &g,
            vec![vec![0.5, 0.25], vec![0.0, 1.0]],
            vec![2.0, 1.0],
            vec![0.1, 0.0],
            None,
        )
        .unwrap();
        assert_eq!(d.a("w", "v").unwrap(), 0.25);
        // (c_v, s_v, s_w) = (1, 120, 0)
        let y: f64 = dynamics_component(&g, &d, "v", &[1.0, 120.0, 0.0]).unwrap();
        assert!((y - 62.1).abs() < 1e-12);
        let map = d.component_map(&g, "v", Space::real(3)).unwrap();
        let row_norm = (4.0f64 + 0.25 + 0.0625).sqrt();
        assert!((map.lipschitz().value().unwrap() - row_norm).abs() < 1e-12);
    }

    #[test]
    fn sparsity_is_enforced() {
        let g = two_vertex();
        let bad = AffineDynamics::new(
            &g,
            vec![vec![0.0, 0.0], vec![1.0, 0.0]],
            vec![1.0, 1.0],
            vec![0.0, 0.0],
            None,
        );
        assert!(bad.is_err());
    }

    #[test]
    fn component_matches_vector_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let (p, _, d) = fixtures::random_affine_instance(&mut rng, 4, 1);
            for _ in 0..10 {
                let x: Vec<f64> = (0..4).map(|_| rng.gen_range(-5.0..5.0)).collect();
                let u: Vec<f64> = (0..4).map(|_| rng.gen_range(-5.0..5.0)).collect();
                let full = d.apply(&x, &u).unwrap();
                for (i, v) in d.vertices.iter().enumerate() {
                    let mut tuple = vec![u[i]];
                    for w in p.neighborhood(v).unwrap() {
                        tuple.push(x[d.index(&w).unwrap()]);
                    }
                    assert_eq!(dynamics_component(&p.graph, &d, v, &tuple).unwrap(), full[i]);
                }
            }
        }
    }

    #[test]
    fn non_neighbors_are_ignored() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (_, _, d) = fixtures::random_affine_instance(&mut rng, 5, 1);
        let x: Vec<f64> = (0..5).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let u = vec![1.0; 5];
        let base = d.apply(&x, &u).unwrap();
        for (v, row) in d.coef.iter().enumerate() {
            for (w, &a) in row.iter().enumerate() {
                if a == 0.0 {
                    let mut y = x.clone();
                    y[w] += 1000.0;
                    assert_eq!(d.apply(&y, &u).unwrap()[v], base[v]);
                }
            }
        }
    }

    #[test]
    fn heaviside_cases() {
        let n = fixtures::lighting_affine().0;
        assert_eq!(heaviside_tau(&n, "fixture", 120.0).unwrap(), 1.0);
        assert_eq!(heaviside_tau(&n, "fixture", 40.0).unwrap(), 1.0);
        assert_eq!(heaviside_tau(&n, "fixture", 0.0).unwrap(), 0.0);
        assert_eq!(heaviside(-1e-13f64), 1.0);
        assert_eq!(heaviside(-1e-9f64), 0.0);
        for b in [0.0, 1.0] {
            let s = lift_rho(&n, "fixture", b).unwrap();
            assert_eq!(s, n.get("fixture").unwrap().rho_affine(b));
            assert_eq!(heaviside_tau(&n, "fixture", s).unwrap(), b);
        }
        assert_eq!(lift_rho(&n, "fixture", 1.0).unwrap(), 120.0);
        assert_eq!(lift_rho(&n, "fixture", 0.0).unwrap(), 0.0);
    }

    #[test]
    fn nominal_checks() {
        let bad = Nominal {
            s_phi: 50.0,
            s_omega: 120.0,
            eta: 40.0,
            c0: 0.0,
            c1: 1.0,
        };
        assert!(bad.check("v").is_err());
        let same = Nominal {
            eta: 60.0,
            c1: 0.0,
            ..bad
        };
        assert!(same.check("v").is_err());
        assert!(Nominal { eta: 120.0, ..same }.check("v").is_err());
        assert!(Nominal { c1: 1.0, ..same }.check("v").is_ok());
    }

    #[test]
    fn identity_feedback() {
        // A = I, B = 0, h = 0, η = 0.5 on nominal states {0, 1}
        let g = DirectedGraph::new(["v"], [("v", "v")]).unwrap();
        let d = AffineDynamics::new(&g, vec![vec![1.0]], vec![0.0], vec![0.0], None).unwrap();
        let n = NominalStates::new(BTreeMap::from([(
            "v".to_owned(),
            Nominal {
                s_phi: 0.0,
                s_omega: 1.0,
                eta: 0.5,
                c0: 0.0,
                c1: 1.0,
            },
        )]))
        .unwrap();
        for c in [0.0, 1.0] {
            assert_eq!(boolean_dynamics_component(&g, &d, &n, "v", &[c, 1.0]).unwrap(), 1.0);
            assert_eq!(boolean_dynamics_component(&g, &d, &n, "v", &[c, 0.0]).unwrap(), 0.0);
        }
    }

    #[test]
    fn breaker_off_keeps_the_light_off() {
        let p = fixtures::lighting(1);
        let (n, d) = fixtures::lighting_affine();
        // fixture control on, breaker state failed
        let tuple = [1.0, 1.0, 0.0];
        let hood = p.neighborhood("fixture").unwrap();
        assert_eq!(hood, ["fixture", "breaker"]);
        assert_eq!(
            boolean_dynamics_component(&p.graph, &d, &n, "fixture", &tuple).unwrap(),
            0.0
        );
        let scheme = build_boolean_scheme(&p, &n, &d).unwrap();
        let sc = &scheme.vertices["fixture"];
        let oracle = p
            .model("fixture")
            .unwrap()
            .dynamics
            .apply(&sc.gamma.apply(&Point::from_f64(&tuple)));
        assert_eq!(n.get("fixture").unwrap().tau(oracle.0[0]), 0.0);
    }

    #[test]
    fn closed_form_matches_induced() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut instances = vec![(fixtures::lighting(1), fixtures::lighting_affine())];
        for k in 1..=4 {
            let (p, n, d) = fixtures::random_affine_instance(&mut rng, k, 1);
            instances.push((p, (n, d)));
        }
        for (p, (n, d)) in instances {
            let closed = build_boolean_scheme(&p, &n, &d).unwrap();
            let induced = induced_scheme(&p, &n).unwrap();
            for v in p.vertices() {
                let k = 1 + p.neighborhood(v).unwrap().len();
                for x in Space::<f64>::boolean(k).enumerate().unwrap() {
                    assert_eq!(
                        closed.vertices[v].f_tilde.apply(&x),
                        induced.vertices[v].f_tilde.apply(&x)
                    );
                }
            }
        }
    }

    #[test]
    fn nominal_round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for k in 1..=4 {
            let (p, n, d) = fixtures::random_affine_instance(&mut rng, k, 1);
            let scheme = build_boolean_scheme(&p, &n, &d).unwrap();
            for v in p.vertices() {
                let sc = &scheme.vertices[v];
                for x in p.model(v).unwrap().feasible.enumerate().unwrap() {
                    assert_eq!(sc.gamma.apply(&sc.sigma.apply(&x)), x);
                }
                for x in sc.feasible_tilde.enumerate().unwrap() {
                    assert_eq!(sc.sigma.apply(&sc.gamma.apply(&x)), x);
                }
                assert_eq!(omega2(&p, &scheme, v, 0).unwrap().0, 0.0);
                assert_eq!(omega1(&p, &scheme, v, 0).unwrap().0, 0.0);
                assert_eq!(thresholding_error_bound(&p, &scheme, v, 0).unwrap(), (0.0, 0.0));
            }
            assert!(error_budget(&p, &scheme, 0).unwrap().eps.abs() <= 1e-12);
        }
    }

    #[test]
    fn inconsistent_dynamics_rejected() {
        let p = fixtures::lighting(1);
        let (n, mut d) = fixtures::lighting_affine();
        d.h[0] += 1.0;
        assert!(matches!(
            build_boolean_scheme(&p, &n, &d),
            Err(Error::InconsistentDynamics { .. })
        ));
    }

    #[test]
    fn vectorized_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let (_, n, d) = fixtures::random_affine_instance(&mut rng, 4, 1);
        let vb = VectorizedBooleanDynamics::new(&d, &n).unwrap();
        for v in 0..4 {
            for w in 0..4 {
                assert!((vb.m1[v][w] - d.coef[v][w] * vb.d_s[w]).abs() <= 1e-12);
            }
            assert!((vb.m2[v] - d.b[v] * vb.d_c[v]).abs() <= 1e-12);
            let ah: f64 = (0..4).map(|w| d.coef[v][w] * vb.h_s[w]).sum();
            assert!((vb.y[v] - (ah + d.b[v] * vb.c0[v] + d.h[v] - vb.eta[v])).abs() <= 1e-12);
        }
        assert!(vb.apply(&[0.0; 3], &[0.0; 4]).is_err());
    }

    #[test]
    fn zero_matrices_give_ones() {
        let vb = VectorizedBooleanDynamics {
            m1: vec![vec![0.0; 2]; 2],
            m2: vec![0.0; 2],
            y: vec![0.0, 3.0],
            d_c: vec![1.0; 2],
            d_s: vec![1.0; 2],
            h_s: vec![0.0; 2],
            c0: vec![0.0; 2],
            eta: vec![0.5; 2],
        };
        assert_eq!(vb.apply(&[0.0, 1.0], &[1.0, 0.0]).unwrap(), vec![1.0, 1.0]);
    }

    #[test]
    fn fixed_point_thresholds() {
        // lighting with breaker on and both states operational is a fixed point
        let (n, d) = fixtures::lighting_affine();
        let vb = VectorizedBooleanDynamics::new(&d, &n).unwrap();
        let x = [120.0, 120.0];
        let u = [120.0, 0.0];
        assert_eq!(d.apply(&x, &u).unwrap(), x.to_vec());
        assert_eq!(vb.apply(&[1.0, 1.0], &[1.0, 0.0]).unwrap(), vb.t(&x));
    }

    #[test]
    fn gamma_vectorized_reorders() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let (p, n, d) = fixtures::random_affine_instance(&mut rng, 3, 1);
        let scheme = build_boolean_scheme(&p, &n, &d).unwrap();
        let vb = VectorizedBooleanDynamics::new(&d, &n).unwrap();
        let x = [1.0, 0.0, 1.0];
        let u = [0.0, 1.0, 1.0];
        let (xs, us) = vb.gamma(&x, &u);
        for (i, v) in d.vertices.iter().enumerate() {
            let mut tilde = vec![u[i]];
            for w in p.neighborhood(v).unwrap() {
                tilde.push(x[d.index(&w).unwrap()]);
            }
            let local = scheme.vertices[v].gamma.apply(&Point::from_f64(&tilde));
            assert_eq!(local.0[0], us[i]);
            assert_eq!(local.0[1], xs[i]);
        }
    }

    proptest! {
        #[test]
        fn vectorized_matches_components(seed in 0u64..10_000, k in 1usize..=4) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (p, n, d) = fixtures::random_affine_instance(&mut rng, k, 1);
            let vb = VectorizedBooleanDynamics::new(&d, &n).unwrap();
            for bits in 0u32..(1 << (2 * k)) {
                let x: Vec<f64> = (0..k).map(|i| f64::from((bits >> i) & 1)).collect();
                let u: Vec<f64> = (0..k).map(|i| f64::from((bits >> (k + i)) & 1)).collect();
                let out = vb.apply(&x, &u).unwrap();
                for (i, v) in d.vertices.iter().enumerate() {
                    let mut tuple = vec![u[i]];
                    for w in p.neighborhood(v).unwrap() {
                        tuple.push(x[d.index(&w).unwrap()]);
                    }
                    prop_assert_eq!(out[i], boolean_dynamics_component(&p.graph, &d, &n, v, &tuple).unwrap());
                }
            }
        }

        #[test]
        fn heaviside_round_trip(s_phi in -100.0f64..100.0, gap in 0.1f64..100.0, frac in 0.01f64..1.0) {
            let s_omega = s_phi + gap;
            let nom = Nominal { s_phi, s_omega, eta: s_phi + frac * gap, c0: 0.0, c1: 1.0 };
            prop_assert!(nom.check("v").is_ok());
            prop_assert_eq!(nom.tau(nom.rho(0.0)), 0.0);
            prop_assert_eq!(nom.tau(nom.rho(1.0)), 1.0);
            prop_assert!((nom.rho_affine(1.0) - s_omega).abs() <= 1e-12 * (1.0 + s_omega.abs()));
            prop_assert_eq!(nom.chi(nom.chi_inv(1.0)), 1.0);
        }
    }
}
