//! Finite partial orders.
//!
//! A [`Poset`] is built from any generating relation; construction computes the
//! reflexive-transitive closure, rejects cycles, and keeps the transitive
//! reduction as the Hasse diagram. Everything is computed eagerly and the value
//! is immutable afterwards.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::netmodel::DirectedGraph;

#[derive(Clone, PartialEq, Eq)]
pub struct Poset {
    elements: Vec<String>,
    index: HashMap<String, usize>,
    // le[x * n + y] is true iff x <= y
    le: Vec<bool>,
    hasse: Vec<(usize, usize)>,
    relation: Vec<(usize, usize)>,
}

impl fmt::Debug for Poset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Poset")
            .field("elements", &self.elements)
            .field("hasse", &self.hasse_names())
            .finish()
    }
}

/// Reflexive-transitive closure of `edges` over `elements`, as name pairs.
pub fn closure<A: AsRef<str>, B: AsRef<str>>(
    elements: &[A],
    edges: &[(B, B)],
) -> Result<BTreeSet<(String, String)>> {
    let p = Poset::new(elements, edges)?;
    Ok(p
        .relations()
        .map(|(x, y)| (p.elements[x].clone(), p.elements[y].clone()))
        .collect())
}

impl Poset {
    pub fn new<A: AsRef<str>, B: AsRef<str>>(elements: &[A], edges: &[(B, B)]) -> Result<Self> {
        let elements: Vec<String> = elements.iter().map(|e| e.as_ref().to_owned()).collect();
        let mut index = HashMap::with_capacity(elements.len());
        for (i, e) in elements.iter().enumerate() {
            if index.insert(e.clone(), i).is_some() {
                return Err(Error::Cycle(e.clone(), e.clone()));
            }
        }
        let n = elements.len();
        let mut le = vec![false; n * n];
        for i in 0..n {
            le[i * n + i] = true;
        }
        for (x, y) in edges {
            let xi = *index
                .get(x.as_ref())
                .ok_or_else(|| Error::UnknownElement(x.as_ref().to_owned()))?;
            let yi = *index
                .get(y.as_ref())
                .ok_or_else(|| Error::UnknownElement(y.as_ref().to_owned()))?;
            le[xi * n + yi] = true;
        }
        // Warshall
        for k in 0..n {
            for i in 0..n {
                if !le[i * n + k] {
                    continue;
                }
                for j in 0..n {
                    if le[k * n + j] {
                        le[i * n + j] = true;
                    }
                }
            }
        }
        for i in 0..n {
            for j in (i + 1)..n {
                if le[i * n + j] && le[j * n + i] {
                    return Err(Error::Cycle(elements[i].clone(), elements[j].clone()));
                }
            }
        }
        let mut relation = Vec::new();
        let mut hasse = Vec::new();
        for x in 0..n {
            for y in 0..n {
                if !le[x * n + y] {
                    continue;
                }
                relation.push((x, y));
                if x != y {
                    let covered =
                        (0..n).any(|z| z != x && z != y && le[x * n + z] && le[z * n + y]);
                    if !covered {
                        hasse.push((x, y));
                    }
                }
            }
        }
        Ok(Poset {
            elements,
            index,
            le,
            hasse,
            relation,
        })
    }

    /// The trivial order on `elements`: `x <= y` iff `x == y`.
    pub fn discrete<A: AsRef<str>>(elements: &[A]) -> Result<Self> {
        Poset::new::<A, &str>(elements, &[])
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn elements(&self) -> &[String] {
        &self.elements
    }

    pub fn name(&self, i: usize) -> &str {
        &self.elements[i]
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.index
            .get(name)
            .copied()
            .ok_or_else(|| Error::UnknownElement(name.to_owned()))
    }

    pub fn try_index_of(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn le(&self, x: usize, y: usize) -> bool {
        self.le[x * self.len() + y]
    }

    pub fn le_names(&self, x: &str, y: &str) -> Result<bool> {
        Ok(self.le(self.index_of(x)?, self.index_of(y)?))
    }

    /// Every related pair `(x, y)` with `x <= y`, reflexive pairs included,
    /// in lexicographic index order.
    pub fn relations(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.relation.iter().copied()
    }

    pub fn relation_count(&self) -> usize {
        self.relation.len()
    }

    /// Strict relations `x < y`.
    pub fn strict_relations(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.relation.iter().copied().filter(|(x, y)| x != y)
    }

    pub fn hasse_edges(&self) -> &[(usize, usize)] {
        &self.hasse
    }

    pub fn hasse_names(&self) -> Vec<(&str, &str)> {
        self.hasse
            .iter()
            .map(|&(x, y)| (self.name(x), self.name(y)))
            .collect()
    }

    /// `↑x`: every element above `x`, including `x`.
    pub fn up_set(&self, x: &str) -> Result<BTreeSet<&str>> {
        let xi = self.index_of(x)?;
        Ok((0..self.len())
            .filter(|&y| self.le(xi, y))
            .map(|y| self.name(y))
            .collect())
    }

    pub fn up_set_indices(&self, x: usize) -> Vec<usize> {
        (0..self.len()).filter(|&y| self.le(x, y)).collect()
    }

    /// Sub-poset on a subset of elements with the induced order.
    pub fn induced(&self, subset: &[usize]) -> Poset {
        let names: Vec<&str> = subset.iter().map(|&i| self.name(i)).collect();
        let edges: Vec<(&str, &str)> = subset
            .iter()
            .flat_map(|&x| subset.iter().map(move |&y| (x, y)))
            .filter(|&(x, y)| x != y && self.le(x, y))
            .map(|(x, y)| (self.name(x), self.name(y)))
            .collect();
        Poset::new(&names, &edges).expect("induced order of a poset is a poset")
    }
}

/// What a face-poset element stands for in the network.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FaceLabel {
    /// The 1-hop neighborhood `U_v`.
    Neighborhood(String),
    /// The vertex `v` itself.
    Vertex(String),
}

impl FaceLabel {
    pub fn vertex(&self) -> &str {
        match self {
            FaceLabel::Neighborhood(v) | FaceLabel::Vertex(v) => v,
        }
    }

    pub fn name(&self) -> String {
        match self {
            FaceLabel::Neighborhood(v) => format!("U:{v}"),
            FaceLabel::Vertex(v) => format!("v:{v}"),
        }
    }

    pub fn parse(name: &str) -> Option<FaceLabel> {
        if let Some(v) = name.strip_prefix("U:") {
            Some(FaceLabel::Neighborhood(v.to_owned()))
        } else {
            name.strip_prefix("v:").map(|v| FaceLabel::Vertex(v.to_owned()))
        }
    }
}

/// Two-level order with one `U:v` element per neighborhood below one `v:w`
/// element per vertex, and `U:v <= v:w` whenever `w` is in `U_v`.
pub fn face_poset(graph: &DirectedGraph) -> Result<(Poset, Vec<FaceLabel>)> {
    for v in graph.vertices() {
        if !graph.has_edge(v, v) {
            return Err(Error::MissingSelfEdge(v.clone()));
        }
    }
    let mut labels: Vec<FaceLabel> = graph
        .vertices()
        .iter()
        .map(|v| FaceLabel::Neighborhood(v.clone()))
        .collect();
    labels.extend(graph.vertices().iter().map(|v| FaceLabel::Vertex(v.clone())));
    let names: Vec<String> = labels.iter().map(FaceLabel::name).collect();
    let mut edges = Vec::new();
    for v in graph.vertices() {
        for w in graph.neighborhood(v)? {
            edges.push((FaceLabel::Neighborhood(v.clone()).name(), FaceLabel::Vertex(w).name()));
        }
    }
    Ok((Poset::new(&names, &edges)?, labels))
}

/// An order-preserving candidate map between two posets.
#[derive(Clone, Debug)]
pub struct OrderMap {
    pub source: Arc<Poset>,
    pub target: Arc<Poset>,
    /// `mapping[x]` is the target index of source element `x`.
    pub mapping: Vec<usize>,
}

impl OrderMap {
    pub fn new(source: Arc<Poset>, target: Arc<Poset>, mapping: Vec<usize>) -> Result<Self> {
        if mapping.len() != source.len() {
            return Err(Error::DimensionMismatch {
                expected: source.len(),
                got: mapping.len(),
            });
        }
        if let Some(&bad) = mapping.iter().find(|&&m| m >= target.len()) {
            return Err(Error::UnknownElement(format!("target index {bad}")));
        }
        Ok(OrderMap {
            source,
            target,
            mapping,
        })
    }

    pub fn from_names(
        source: Arc<Poset>,
        target: Arc<Poset>,
        pairs: &[(&str, &str)],
    ) -> Result<Self> {
        let mut mapping = vec![usize::MAX; source.len()];
        for (s, t) in pairs {
            mapping[source.index_of(s)?] = target.index_of(t)?;
        }
        if let Some(x) = mapping.iter().position(|&m| m == usize::MAX) {
            return Err(Error::MissingValue(source.name(x).to_owned()));
        }
        OrderMap::new(source, target, mapping)
    }

    pub fn identity(p: Arc<Poset>) -> Self {
        let mapping = (0..p.len()).collect();
        OrderMap {
            source: p.clone(),
            target: p,
            mapping,
        }
    }

    pub fn is_order_preserving(&self) -> bool {
        self.source
            .relations()
            .all(|(x, y)| self.target.le(self.mapping[x], self.mapping[y]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diamond() -> Poset {
        Poset::new(
            &["a", "b", "c", "d"],
            &[("a", "b"), ("a", "c"), ("b", "d"), ("c", "d")],
        )
        .unwrap()
    }

    // Independent closure: repeat relational composition until nothing changes.
    fn brute_closure(elems: &[&str], edges: &[(&str, &str)]) -> BTreeSet<(String, String)> {
        let mut rel: BTreeSet<(String, String)> =
            elems.iter().map(|e| (e.to_string(), e.to_string())).collect();
        rel.extend(edges.iter().map(|(a, b)| (a.to_string(), b.to_string())));
        loop {
            let mut next = rel.clone();
            for (a, b) in &rel {
                for (c, d) in &rel {
                    if b == c {
                        next.insert((a.clone(), d.clone()));
                    }
                }
            }
            if next == rel {
                return rel;
            }
            rel = next;
        }
    }

    #[test]
    fn diamond_closure_has_nine_pairs() {
        let edges = [("a", "b"), ("a", "c"), ("b", "d"), ("c", "d")];
        let rel = closure(&["a", "b", "c", "d"], &edges).unwrap();
        assert_eq!(rel.len(), 9);
        assert!(rel.contains(&("a".into(), "d".into())));
        assert_eq!(rel, brute_closure(&["a", "b", "c", "d"], &edges));
    }

    #[test]
    fn singleton_closure_is_reflexive_pair() {
        let rel = closure::<_, &str>(&["a"], &[]).unwrap();
        assert_eq!(rel.into_iter().collect::<Vec<_>>(), vec![("a".into(), "a".into())]);
    }

    #[test]
    fn two_cycle_is_rejected() {
        let err = Poset::new(&["a", "b"], &[("a", "b"), ("b", "a")]).unwrap_err();
        assert!(matches!(err, Error::Cycle(..)));
    }

    #[test]
    fn unknown_edge_endpoint() {
        let err = Poset::new(&["a"], &[("a", "z")]).unwrap_err();
        assert_eq!(err, Error::UnknownElement("z".into()));
    }

    #[test]
    fn hasse_is_transitive_reduction() {
        let p = Poset::new(
            &["a", "b", "c", "d"],
            &[("a", "b"), ("a", "c"), ("b", "d"), ("c", "d"), ("a", "d")],
        )
        .unwrap();
        assert_eq!(
            p.hasse_names(),
            vec![("a", "b"), ("a", "c"), ("b", "d"), ("c", "d")]
        );
    }

    #[test]
    fn up_sets_of_diamond() {
        let p = diamond();
        assert_eq!(p.up_set("a").unwrap(), ["a", "b", "c", "d"].into_iter().collect());
        assert_eq!(p.up_set("d").unwrap(), ["d"].into_iter().collect());
        assert_eq!(p.up_set("b").unwrap(), ["b", "d"].into_iter().collect());
        assert_eq!(p.up_set("q").unwrap_err(), Error::UnknownElement("q".into()));
    }

    #[test]
    fn order_maps() {
        let p = Arc::new(diamond());
        assert!(OrderMap::identity(p.clone()).is_order_preserving());

        let trivial = Arc::new(Poset::discrete(&["a", "b", "c", "d"]).unwrap());
        let id = OrderMap::new(trivial, p.clone(), vec![0, 1, 2, 3]).unwrap();
        assert!(id.is_order_preserving());

        let swap = OrderMap::new(p.clone(), p, vec![3, 1, 2, 0]).unwrap();
        assert!(!swap.is_order_preserving());
    }

    #[test]
    fn face_poset_examples() {
        let g = DirectedGraph::new(["v"], [("v", "v")]).unwrap();
        let (p, labels) = face_poset(&g).unwrap();
        assert_eq!(p.elements(), ["U:v", "v:v"]);
        assert_eq!(p.hasse_names(), vec![("U:v", "v:v")]);
        assert_eq!(labels[0], FaceLabel::Neighborhood("v".into()));

        let g = DirectedGraph::new(["v", "w"], [("w", "v"), ("v", "v"), ("w", "w")]).unwrap();
        let (p, _) = face_poset(&g).unwrap();
        let mut h = p.hasse_names();
        h.sort();
        assert_eq!(h, vec![("U:v", "v:v"), ("U:v", "v:w"), ("U:w", "v:w")]);

        let g = DirectedGraph::new(["v", "w"], [("w", "v"), ("w", "w")]).unwrap();
        assert_eq!(face_poset(&g).unwrap_err(), Error::MissingSelfEdge("v".into()));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        // Random DAGs: only edges i -> j with i < j.
        fn dag() -> impl Strategy<Value = (usize, Vec<(usize, usize)>)> {
            (1usize..7).prop_flat_map(|n| {
                let pairs = proptest::collection::vec((0..n, 0..n), 0..12);
                (Just(n), pairs)
            })
        }

        fn build(n: usize, raw: &[(usize, usize)]) -> Poset {
            let names: Vec<String> = (0..n).map(|i| format!("e{i}")).collect();
            let edges: Vec<(String, String)> = raw
                .iter()
                .filter(|(a, b)| a < b)
                .map(|&(a, b)| (names[a].clone(), names[b].clone()))
                .collect();
            Poset::new(&names, &edges).unwrap()
        }

        proptest! {
            #[test]
            fn up_set_contains_and_is_monotone((n, raw) in dag()) {
                let p = build(n, &raw);
                for (x, y) in p.relations() {
                    let ux = p.up_set(p.name(x)).unwrap();
                    let uy = p.up_set(p.name(y)).unwrap();
                    prop_assert!(ux.contains(p.name(x)));
                    prop_assert!(uy.is_subset(&ux));
                }
            }

            #[test]
            fn closure_is_idempotent((n, raw) in dag()) {
                let p = build(n, &raw);
                let rel: Vec<(String, String)> = p
                    .relations()
                    .map(|(x, y)| (p.name(x).to_owned(), p.name(y).to_owned()))
                    .collect();
                let again = closure(p.elements(), &rel).unwrap();
                prop_assert_eq!(again, rel.into_iter().collect::<BTreeSet<_>>());
            }

            #[test]
            fn hasse_edges_are_minimal((n, raw) in dag()) {
                let p = build(n, &raw);
                let hasse: Vec<(&str, &str)> = p.hasse_names();
                for skip in 0..hasse.len() {
                    let fewer: Vec<_> = hasse
                        .iter()
                        .enumerate()
                        .filter(|&(i, _)| i != skip)
                        .map(|(_, e)| *e)
                        .collect();
                    let q = Poset::new(p.elements(), &fewer).unwrap();
                    prop_assert!(q.relation_count() < p.relation_count());
                }
            }

            #[test]
            fn face_poset_is_two_ranked(
                n in 1usize..5,
                raw in proptest::collection::vec((0usize..5, 0usize..5), 0..10)
            ) {
                let names: Vec<String> = (0..n).map(|i| format!("x{i}")).collect();
                let mut edges: Vec<(String, String)> =
                    names.iter().map(|v| (v.clone(), v.clone())).collect();
                edges.extend(
                    raw.iter()
                        .filter(|(a, b)| *a < n && *b < n)
                        .map(|&(a, b)| (names[a].clone(), names[b].clone())),
                );
                let g = DirectedGraph::new(names.iter(), edges.iter().map(|(a, b)| (a, b))).unwrap();
                let (p, _) = face_poset(&g).unwrap();
                prop_assert_eq!(p.len(), 2 * n);
                for (x, y) in p.strict_relations() {
                    for z in 0..p.len() {
                        prop_assert!(!(z != x && z != y && p.le(x, z) && p.le(z, y)));
                    }
                }
            }
        }
    }
}
