//! The single-step, objective, propagation, trajectory and full
//! optimal-control sheaves of a network problem.
//!
//! Diagrams of sheaves and morphisms are flattened into one sheaf on one
//! poset: a morphism component becomes the restriction along a new order
//! relation. Elements are named `t<k>/<layer>/<face>` where the layer is `N`
//! (network state), `L` (propagation target), `R` (objective value) or `Z`
//! (the zero sheaf) and the face is `U:v` or `v:v`.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::netmodel::{assemble_state, Labeling, NetworkProblem};
use crate::poset::{face_poset, FaceLabel, OrderMap, Poset};
use crate::scalar::Scalar;
use crate::sheaf::{self, Assignment, Sheaf, SheafBuilder, SheafMorphism};
use crate::space::{Point, Space, StalkMap};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Layer {
    N,
    L,
    R,
    Z,
}

impl fmt::Display for Layer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Layer::N => "N",
            Layer::L => "L",
            Layer::R => "R",
            Layer::Z => "Z",
        };
        f.write_str(s)
    }
}

/// Where a flattened element comes from.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ElementTag {
    pub step: usize,
    pub layer: Layer,
    pub face: FaceLabel,
}

impl ElementTag {
    pub fn name(&self) -> String {
        format!("t{}/{}/{}", self.step, self.layer, self.face.name())
    }

    pub fn parse(name: &str) -> Option<ElementTag> {
        let mut parts = name.splitn(3, '/');
        let step = parts.next()?.strip_prefix('t')?.parse().ok()?;
        let layer = match parts.next()? {
            "N" => Layer::N,
            "L" => Layer::L,
            "R" => Layer::R,
            "Z" => Layer::Z,
            _ => return None,
        };
        let face = FaceLabel::parse(parts.next()?)?;
        Some(ElementTag { step, layer, face })
    }
}

/// Indices of one time step's elements inside a flattened sheaf, each list in
/// the order of the corresponding single-step sheaf.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct StepLayout {
    pub n: Vec<usize>,
    pub r: Vec<usize>,
    pub z: Vec<usize>,
    pub l: Vec<usize>,
}

/// A flattened diagram together with its element bookkeeping.
#[derive(Clone, Debug)]
pub struct Flattened<S> {
    pub sheaf: Arc<Sheaf<S>>,
    pub tags: Vec<ElementTag>,
    /// One entry per step index that has elements, `L` copies included.
    pub steps: Vec<StepLayout>,
}

impl<S: Scalar> Flattened<S> {
    pub fn tag(&self, i: usize) -> &ElementTag {
        &self.tags[i]
    }

    pub fn index_of(&self, tag: &ElementTag) -> Option<usize> {
        self.sheaf.base().try_index_of(&tag.name())
    }
}

/// Every sheaf and morphism of the encoding. The single-step sheaves and the
/// standalone morphisms are shared by all time steps.
#[derive(Clone, Debug)]
pub struct EncodedProblem<S> {
    pub problem: Arc<NetworkProblem<S>>,
    pub faces: Vec<FaceLabel>,
    /// `𝒩` on the face poset (elements `U:v`, `v:v`).
    pub n: Arc<Sheaf<S>>,
    /// `ℒ` on the neighborhoods only.
    pub l: Arc<Sheaf<S>>,
    /// `ℝ̂` and `0̂` on the discrete order of the face elements.
    pub r_hat: Arc<Sheaf<S>>,
    pub zero_hat: Arc<Sheaf<S>>,
    /// `p, f : 𝒩 -> ℒ`, `J : 𝒩 -> ℝ̂`, `0̂ -> ℝ̂`.
    pub p: SheafMorphism<S>,
    pub f: SheafMorphism<S>,
    pub j: SheafMorphism<S>,
    pub zero: SheafMorphism<S>,
    /// `ℳ`: one step of `𝒩` with its objective layers.
    pub m: Flattened<S>,
    /// `𝒯`: `𝒩_0 … 𝒩_{H-1}` and `ℒ_0 … ℒ_H`.
    pub t: Flattened<S>,
    /// `𝒮`: `𝒯` with objective layers at every step.
    pub s: Flattened<S>,
}

/// `𝒩`: stalk `F_v` on `U:v`, `S_v` on `v:v`, projections between them.
pub fn build_n<S: Scalar>(p: &NetworkProblem<S>) -> Result<(Sheaf<S>, Vec<FaceLabel>)> {
    p.check_structure()?;
    let (poset, faces) = face_poset(&p.graph)?;
    let mut b = SheafBuilder::new(Arc::new(poset));
    for face in &faces {
        let m = p.model(face.vertex())?;
        let stalk = match face {
            FaceLabel::Neighborhood(_) => m.feasible.clone(),
            FaceLabel::Vertex(_) => m.state_space.clone(),
        };
        b.stalk(&face.name(), stalk)?;
    }
    for v in p.vertices() {
        for w in p.neighborhood(v)? {
            b.restriction(
                &FaceLabel::Neighborhood(v.clone()).name(),
                &FaceLabel::Vertex(w.clone()).name(),
                p.state_projection(v, &w)?,
            )?;
        }
    }
    Ok((b.build()?, faces))
}

/// `ℒ`: stalk `S_v` on each `U:v`, no restrictions.
pub fn build_l<S: Scalar>(p: &NetworkProblem<S>) -> Result<Sheaf<S>> {
    let names: Vec<String> = p
        .vertices()
        .map(|v| FaceLabel::Neighborhood(v.clone()).name())
        .collect();
    let mut b = SheafBuilder::new(Arc::new(Poset::discrete(&names)?));
    for v in p.vertices() {
        b.stalk(&FaceLabel::Neighborhood(v.clone()).name(), p.model(v)?.state_space.clone())?;
    }
    b.build()
}

fn discrete_sheaf<S: Scalar>(faces: &[FaceLabel], stalk: Space<S>) -> Result<Sheaf<S>> {
    let names: Vec<String> = faces.iter().map(FaceLabel::name).collect();
    let mut b = SheafBuilder::new(Arc::new(Poset::discrete(&names)?));
    for n in &names {
        b.stalk(n, stalk.clone())?;
    }
    b.build()
}

/// Component of `p` at `U:v`: `pr_{S_v}` on `F_v`.
fn p_component<S: Scalar>(p: &NetworkProblem<S>, v: &str) -> Result<StalkMap<S>> {
    p.state_projection(v, v)
}

/// Component of `f` at `U:v`: `f_v` on `F_v`.
fn f_component<S: Scalar>(p: &NetworkProblem<S>, v: &str) -> Result<StalkMap<S>> {
    let m = p.model(v)?;
    Ok(m.dynamics.restrict_domain(m.feasible.clone()).with_codomain(m.state_space.clone()))
}

/// Component of `J` at a face: `J_v` on `v:v`, `J'_v` on `U:v`.
fn j_component<S: Scalar>(p: &NetworkProblem<S>, face: &FaceLabel) -> Result<StalkMap<S>> {
    let m = p.model(face.vertex())?;
    Ok(match face {
        FaceLabel::Vertex(_) => m
            .objective_state
            .restrict_domain(m.state_space.clone())
            .with_codomain(Space::real(1)),
        FaceLabel::Neighborhood(_) => m
            .objective_control
            .restrict_domain(m.feasible.clone())
            .with_codomain(Space::real(1)),
    })
}

/// `ℳ`, with the morphisms `J : 𝒩 -> ℝ̂` and `0̂ -> ℝ̂`.
pub fn build_m<S: Scalar>(
    p: &NetworkProblem<S>,
) -> Result<(Flattened<S>, SheafMorphism<S>, SheafMorphism<S>)> {
    let enc = build_s_with_horizon(p, 1)?;
    Ok((enc.m, enc.j, enc.zero))
}

/// `𝒯`, with the morphisms `p, f : 𝒩 -> ℒ`.
pub fn build_t<S: Scalar>(
    p: &NetworkProblem<S>,
) -> Result<(Flattened<S>, SheafMorphism<S>, SheafMorphism<S>)> {
    let enc = build_s(p)?;
    Ok((enc.t, enc.p, enc.f))
}

/// The complete encoding over the problem's horizon.
pub fn build_s<S: Scalar>(p: &NetworkProblem<S>) -> Result<EncodedProblem<S>> {
    build_s_with_horizon(p, p.horizon)
}

fn build_s_with_horizon<S: Scalar>(p: &NetworkProblem<S>, horizon: usize) -> Result<EncodedProblem<S>> {
    if horizon == 0 {
        return Err(Error::InvalidProblem("horizon must be at least 1".into()));
    }
    let (n, faces) = build_n(p)?;
    let n = Arc::new(n);
    let l = Arc::new(build_l(p)?);
    let r_hat = Arc::new(discrete_sheaf(&faces, Space::real(1))?);
    let zero_hat = Arc::new(discrete_sheaf(&faces, Space::zero())?);

    let hoods: Vec<&String> = p.vertices().collect();
    let into_n = OrderMap::new(
        l.base().clone(),
        n.base().clone(),
        hoods
            .iter()
            .map(|v| n.base().index_of(&FaceLabel::Neighborhood((*v).clone()).name()))
            .collect::<Result<_>>()?,
    )?;
    let p_m = SheafMorphism::new(
        n.clone(),
        l.clone(),
        into_n.clone(),
        hoods.iter().map(|v| p_component(p, v)).collect::<Result<_>>()?,
        S::zero(),
    )?;
    let f_m = SheafMorphism::new(
        n.clone(),
        l.clone(),
        into_n,
        hoods.iter().map(|v| f_component(p, v)).collect::<Result<_>>()?,
        S::zero(),
    )?;
    // identity on element names, from the discrete order into the face order
    let trivial = OrderMap::new(r_hat.base().clone(), n.base().clone(), (0..faces.len()).collect())?;
    let j_m = SheafMorphism::new(
        n.clone(),
        r_hat.clone(),
        trivial,
        faces.iter().map(|f| j_component(p, f)).collect::<Result<_>>()?,
        S::zero(),
    )?;
    let zero_m = SheafMorphism::new(
        zero_hat.clone(),
        r_hat.clone(),
        OrderMap::identity(r_hat.base().clone()),
        faces
            .iter()
            .map(|_| StalkMap::zero(Space::zero(), Space::real(1)))
            .collect(),
        S::zero(),
    )?;

    let m = flatten(p, &faces, 1, true, false)?;
    let t = flatten(p, &faces, horizon, false, true)?;
    let s = flatten(p, &faces, horizon, true, true)?;
    Ok(EncodedProblem {
        problem: Arc::new(NetworkProblem {
            horizon,
            ..p.clone()
        }),
        faces,
        n,
        l,
        r_hat,
        zero_hat,
        p: p_m,
        f: f_m,
        j: j_m,
        zero: zero_m,
        m,
        t,
        s,
    })
}

/// Builds the glued diagram: `steps` copies of `𝒩`, optionally the `ℝ̂`/`0̂`
/// layers on each, optionally `ℒ_0 … ℒ_steps` with `p` and `f` edges.
fn flatten<S: Scalar>(
    p: &NetworkProblem<S>,
    faces: &[FaceLabel],
    steps: usize,
    objectives: bool,
    propagation: bool,
) -> Result<Flattened<S>> {
    let hoods: Vec<FaceLabel> = faces
        .iter()
        .filter(|f| matches!(f, FaceLabel::Neighborhood(_)))
        .cloned()
        .collect();
    let mut tags = Vec::new();
    let last = if propagation { steps + 1 } else { steps };
    for k in 0..last {
        let mut layers = Vec::new();
        if k < steps {
            layers.push(Layer::N);
            if objectives {
                layers.extend([Layer::R, Layer::Z]);
            }
        }
        for layer in layers {
            tags.extend(faces.iter().map(|face| ElementTag {
                step: k,
                layer,
                face: face.clone(),
            }));
        }
        if propagation {
            tags.extend(hoods.iter().map(|face| ElementTag {
                step: k,
                layer: Layer::L,
                face: face.clone(),
            }));
        }
    }
    let names: Vec<String> = tags.iter().map(ElementTag::name).collect();
    let tag = |step, layer, face: &FaceLabel| {
        ElementTag {
            step,
            layer,
            face: face.clone(),
        }
        .name()
    };

    let mut edges: Vec<(String, String)> = Vec::new();
    let mut maps: Vec<(String, String, StalkMap<S>)> = Vec::new();
    for k in 0..steps {
        for v in p.vertices() {
            let hood = FaceLabel::Neighborhood(v.clone());
            for w in p.neighborhood(v)? {
                maps.push((
                    tag(k, Layer::N, &hood),
                    tag(k, Layer::N, &FaceLabel::Vertex(w.clone())),
                    p.state_projection(v, &w)?,
                ));
            }
            if propagation {
                maps.push((tag(k, Layer::N, &hood), tag(k, Layer::L, &hood), p_component(p, v)?));
                maps.push((tag(k, Layer::N, &hood), tag(k + 1, Layer::L, &hood), f_component(p, v)?));
            }
        }
        if objectives {
            for face in faces {
                maps.push((tag(k, Layer::N, face), tag(k, Layer::R, face), j_component(p, face)?));
                maps.push((
                    tag(k, Layer::Z, face),
                    tag(k, Layer::R, face),
                    StalkMap::zero(Space::zero(), Space::real(1)),
                ));
            }
        }
    }
    for (a, b, _) in &maps {
        edges.push((a.clone(), b.clone()));
    }
    let base = Arc::new(Poset::new(&names, &edges)?);
    let mut b = SheafBuilder::new(base.clone());
    for t in &tags {
        let m = p.model(t.face.vertex())?;
        let stalk = match (t.layer, &t.face) {
            (Layer::N, FaceLabel::Neighborhood(_)) => m.feasible.clone(),
            (Layer::N, FaceLabel::Vertex(_)) | (Layer::L, _) => m.state_space.clone(),
            (Layer::R, _) => Space::real(1),
            (Layer::Z, _) => Space::zero(),
        };
        b.stalk(&t.name(), stalk)?;
    }
    for (x, y, map) in maps {
        b.restriction(&x, &y, map)?;
    }
    let sheaf = Arc::new(b.build()?);

    let mut layout = vec![StepLayout::default(); last];
    for (i, t) in tags.iter().enumerate() {
        let s = &mut layout[t.step];
        match t.layer {
            Layer::N => s.n.push(i),
            Layer::R => s.r.push(i),
            Layer::Z => s.z.push(i),
            Layer::L => s.l.push(i),
        }
    }
    Ok(Flattened {
        sheaf,
        tags,
        steps: layout,
    })
}

impl<S: Scalar> EncodedProblem<S> {
    pub fn horizon(&self) -> usize {
        self.problem.horizon
    }

    /// Global section of `𝒩` for a labeling, in `𝒩`'s element order.
    pub fn n_section(&self, lab: &Labeling<S>) -> Result<Vec<Point<S>>> {
        self.faces
            .iter()
            .map(|face| match face {
                FaceLabel::Neighborhood(v) => {
                    assemble_state(&self.problem, v, &lab.controls, &lab.states)
                }
                FaceLabel::Vertex(v) => lab
                    .states
                    .get(v)
                    .cloned()
                    .ok_or_else(|| Error::MissingValue(format!("state at {v}"))),
            })
            .collect()
    }

    /// Reads a labeling back from `𝒩` values: states from the vertex
    /// elements, controls from the first coordinates of the neighborhoods.
    pub fn labeling_of(&self, n_values: &[Point<S>]) -> Result<Labeling<S>> {
        let mut lab = Labeling {
            controls: BTreeMap::new(),
            states: BTreeMap::new(),
        };
        for (face, value) in self.faces.iter().zip(n_values) {
            match face {
                FaceLabel::Neighborhood(v) => {
                    let idx = self.problem.control_indices(v)?;
                    lab.controls.insert(v.clone(), value.select(&idx));
                }
                FaceLabel::Vertex(v) => {
                    lab.states.insert(v.clone(), value.clone());
                }
            }
        }
        Ok(lab)
    }

    /// Fills every non-`𝒩` element of a flattened diagram from its `𝒩`
    /// values: `R := J`-image, `Z := ()`, `ℒ_k := p`-image of `𝒩_k` for
    /// `k < H` and `ℒ_H := f`-image of `𝒩_{H-1}`.
    pub fn propagate(&self, flat: &Flattened<S>, a: &mut Assignment<S>) -> Result<()> {
        let sheaf = &flat.sheaf;
        for (k, layout) in flat.steps.iter().enumerate() {
            for (slot, &i) in layout.r.iter().enumerate() {
                let ni = layout.n[slot];
                let v = a
                    .get(ni)
                    .ok_or_else(|| Error::MissingValue(sheaf.base().name(ni).to_owned()))?;
                let image = sheaf.restrict(ni, i, v);
                a.set(i, image);
            }
            for &i in &layout.z {
                a.set(i, Point::empty());
            }
            for &i in &layout.l {
                let from_p = flat.steps[k]
                    .n
                    .iter()
                    .copied()
                    .find(|&x| x != i && sheaf.base().le(x, i));
                let source = match from_p {
                    Some(x) => x,
                    None => flat.steps[k - 1]
                        .n
                        .iter()
                        .copied()
                        .find(|&x| sheaf.base().le(x, i))
                        .expect("ℒ_H lies above 𝒩_{H-1}"),
                };
                let v = a
                    .get(source)
                    .ok_or_else(|| Error::MissingValue(sheaf.base().name(source).to_owned()))?;
                let image = sheaf.restrict(source, i, v);
                a.set(i, image);
            }
        }
        Ok(())
    }

    /// The assignment of a flattened diagram determined by one labeling per
    /// `𝒩` copy, other layers filled by [`EncodedProblem::propagate`].
    pub fn assignment_from_labelings(
        &self,
        flat: &Flattened<S>,
        labs: &[Labeling<S>],
    ) -> Result<Assignment<S>> {
        let copies = flat.steps.iter().filter(|s| !s.n.is_empty()).count();
        if labs.len() != copies {
            return Err(Error::DimensionMismatch {
                expected: copies,
                got: labs.len(),
            });
        }
        let mut a = Assignment::empty(flat.sheaf.len());
        for (k, lab) in labs.iter().enumerate() {
            for (&i, v) in flat.steps[k].n.iter().zip(self.n_section(lab)?) {
                a.set(i, v);
            }
        }
        self.propagate(flat, &mut a)?;
        Ok(a)
    }

    /// Labelings of a trajectory: states at step `k+1` are `f_v` of the
    /// assembled step-`k` tuple.
    pub fn trajectory(
        &self,
        initial: &BTreeMap<String, Point<S>>,
        controls: &[BTreeMap<String, Point<S>>],
    ) -> Result<Vec<Labeling<S>>> {
        let mut states = initial.clone();
        let mut out = Vec::with_capacity(controls.len());
        for c in controls {
            let mut next = BTreeMap::new();
            for v in self.problem.vertices() {
                let x = assemble_state(&self.problem, v, c, &states)?;
                next.insert(v.clone(), self.problem.model(v)?.dynamics.apply(&x));
            }
            out.push(Labeling {
                controls: c.clone(),
                states: std::mem::replace(&mut states, next),
            });
        }
        Ok(out)
    }

    /// `𝒩_k`'s elements inside `𝒮`.
    pub fn n_elements(&self, step: usize) -> &[usize] {
        &self.s.steps[step].n
    }

    /// Local consistency radius of `a` on every `𝒩_k` copy of `𝒮`.
    pub fn local_cr_n(&self, a: &Assignment<S>) -> Result<Vec<S>> {
        (0..self.horizon())
            .map(|k| {
                let mut mask = vec![false; self.s.sheaf.len()];
                for &i in self.n_elements(k) {
                    mask[i] = true;
                }
                sheaf::local_consistency_radius_mask(&self.s.sheaf, a, &mask)
            })
            .collect()
    }

    /// `a` restricted to `𝒩_k`, indexed like [`EncodedProblem::n`].
    pub fn n_part(&self, a: &Assignment<S>, step: usize) -> Assignment<S> {
        a.restrict_to(self.n_elements(step))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::netmodel::DirectedGraph;
    use crate::netmodel::VertexModel;
    use crate::sheaf::{consistency_radius, is_global_section, morphism_defect};
    use crate::space::{Coord, Lipschitz};

    fn one_vertex(states: &[f64], j: fn(&[f64]) -> Vec<f64>) -> NetworkProblem<f64> {
        let g = DirectedGraph::new(["v"], [("v", "v")]).unwrap();
        let r = Space::real(2);
        let feasible = Space::finite(
            vec![Coord::Real; 2],
            states.iter().map(|&s| Point::from_f64(&[0.0, s])).collect(),
        )
        .unwrap();
        let s_space = Space::finite(
            vec![Coord::Real],
            states.iter().map(|&s| Point::from_f64(&[s])).collect(),
        )
        .unwrap();
        let model = VertexModel {
            state_space: s_space,
            control_space: Space::finite(vec![Coord::Real], vec![Point::from_f64(&[0.0])]).unwrap(),
            dynamics: StalkMap::projection(&r, &[1]).unwrap(),
            objective_state: StalkMap::new(Space::real(1), Space::real(1), j)
                .with_lipschitz(Lipschitz::Exact(1.0)),
            objective_control: StalkMap::zero(r, Space::real(1)),
            feasible,
        };
        NetworkProblem::new(g, [("v".to_string(), model)].into(), 1).unwrap()
    }

    #[test]
    fn names_round_trip() {
        let t = ElementTag {
            step: 12,
            layer: Layer::R,
            face: FaceLabel::Vertex("breaker".into()),
        };
        assert_eq!(t.name(), "t12/R/v:breaker");
        assert_eq!(ElementTag::parse(&t.name()), Some(t));
        assert_eq!(ElementTag::parse("t1/Q/U:v"), None);
    }

    #[test]
    fn one_vertex_shapes() {
        let p = one_vertex(&[1.0, 2.0, 3.0], |s| vec![(s[0] - 2.0).abs()]);
        let (n, _) = build_n(&p).unwrap();
        assert_eq!(n.len(), 2);
        assert_eq!(n.restrictions().count(), 1);
        let enc = build_s(&p).unwrap();
        // horizon 1: 2 𝒩 elements and two single-element ℒ copies
        assert_eq!(enc.t.sheaf.len(), 4);
        assert_eq!(enc.s.sheaf.len(), 2 + 2 + 2 + 2);
        assert_eq!(enc.m.sheaf.len(), 6);
    }

    #[test]
    fn two_vertex_restrictions() {
        let p = fixtures::lighting(1);
        let (n, _) = build_n(&p).unwrap();
        let mut pairs: Vec<(String, String)> = n
            .restrictions()
            .map(|((x, y), _)| (n.base().name(x).to_owned(), n.base().name(y).to_owned()))
            .collect();
        pairs.sort();
        assert_eq!(
            pairs,
            vec![
                ("U:breaker".to_string(), "v:breaker".to_string()),
                ("U:fixture".to_string(), "v:breaker".to_string()),
                ("U:fixture".to_string(), "v:fixture".to_string()),
            ]
        );
    }

    #[test]
    fn objective_radius_is_j() {
        let p = one_vertex(&[1.0, 2.0, 3.0], |s| vec![s[0].abs()]);
        let enc = build_s(&p).unwrap();
        let lab = Labeling {
            controls: [("v".to_string(), Point::from_f64(&[0.0]))].into(),
            states: [("v".to_string(), Point::from_f64(&[3.0]))].into(),
        };
        let a = enc.assignment_from_labelings(&enc.m, &[lab]).unwrap();
        assert_eq!(consistency_radius(&enc.m.sheaf, &a).unwrap(), 3.0);
    }

    #[test]
    fn morphisms_are_exact() {
        let enc = build_s(&fixtures::lighting(2)).unwrap();
        for m in [&enc.p, &enc.f, &enc.j, &enc.zero] {
            assert!(morphism_defect(m, 64, 0).unwrap() <= 1e-12);
        }
    }

    #[test]
    fn trajectories_are_sections_of_t() {
        let enc = build_s(&fixtures::lighting(3)).unwrap();
        let init: BTreeMap<String, Point<f64>> = [
            ("breaker".to_string(), Point::from_f64(&[0.0])),
            ("fixture".to_string(), Point::from_f64(&[120.0])),
        ]
        .into();
        let on = |b: f64| -> BTreeMap<String, Point<f64>> {
            [
                ("breaker".to_string(), Point::from_f64(&[b])),
                ("fixture".to_string(), Point::from_f64(&[0.0])),
            ]
            .into()
        };
        let labs = enc.trajectory(&init, &[on(120.0), on(0.0), on(120.0)]).unwrap();
        let a = enc.assignment_from_labelings(&enc.t, &labs).unwrap();
        assert!(is_global_section(&enc.t.sheaf, &a, 1e-12));

        // break one step: the state at step 1 no longer follows the dynamics
        let mut bad = labs.clone();
        bad[1].states.insert("fixture".into(), Point::from_f64(&[120.0]));
        bad[1].states.insert("breaker".into(), Point::from_f64(&[0.0]));
        let b = enc.assignment_from_labelings(&enc.t, &bad).unwrap();
        assert!(!is_global_section(&enc.t.sheaf, &b, 1e-9));
    }

    #[test]
    fn every_element_has_one_tag() {
        let enc = build_s(&fixtures::lighting(2)).unwrap();
        for flat in [&enc.m, &enc.t, &enc.s] {
            assert_eq!(flat.tags.len(), flat.sheaf.len());
            for (i, t) in flat.tags.iter().enumerate() {
                assert_eq!(flat.index_of(t), Some(i));
            }
            let mut all: Vec<usize> = flat
                .steps
                .iter()
                .flat_map(|s| s.n.iter().chain(&s.r).chain(&s.z).chain(&s.l).copied())
                .collect();
            all.sort();
            assert_eq!(all, (0..flat.sheaf.len()).collect::<Vec<_>>());
        }
    }
}
