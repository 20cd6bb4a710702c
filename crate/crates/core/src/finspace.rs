//! Finite topological spaces.
//!
//! Points carry opaque string labels; everything internal is indexed by dense
//! integers. Opens are stored explicitly, sorted by cardinality (so `∅` is
//! always id 0 and the whole space is the last id) and the Hasse diagram of
//! `⊆` is computed once at construction.

use std::collections::hash_map::DefaultHasher;
use std::collections::HashMap;
use std::fmt;
use std::hash::{Hash, Hasher};

use fixedbitset::FixedBitSet;
use thiserror::Error;

/// A subset of the points of a space.
pub type PointSet = FixedBitSet;

/// Handle of an open set inside a [`FiniteSpace`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct OpenId(pub usize);

impl fmt::Display for OpenId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// Identifies the point universe a cover or filtration lives on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SpaceId {
    pub fingerprint: u64,
    pub n_points: usize,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TopologyError {
    #[error("open list is empty")]
    NoOpens,
    #[error("unknown point label `{0}`")]
    UnknownPoint(String),
    #[error("duplicate point label `{0}`")]
    DuplicatePoint(String),
    #[error("the empty set and the whole space must both be open")]
    MissingEmptyOrWhole,
    #[error("not closed under union: {0} ∪ {1} is not open")]
    NotClosedUnderUnion(String, String),
    #[error("not closed under intersection: {0} ∩ {1} is not open")]
    NotClosedUnderIntersection(String, String),
    #[error("Alexandrov topology has more than {cap} opens")]
    CapExceeded { cap: usize },
    #[error("covers live on different spaces")]
    SpaceMismatch,
    #[error("open id {0} out of range")]
    UnknownOpen(usize),
    #[error("point index {0} out of range")]
    PointOutOfRange(usize),
}

/// How a preorder is turned into an Alexandrov topology.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Orientation {
    /// `x ≤ y` means `x` lies in every open containing `y`: opens are down-sets
    /// and `star{y} = ↓y`.
    #[default]
    DownSets,
    /// Opens are up-sets and `star{y} = ↑y`.
    UpSets,
}

/// An open set together with its handle.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OpenSet {
    pub id: OpenId,
    pub members: PointSet,
}

#[derive(Clone, Debug)]
pub struct FiniteSpace {
    points: Vec<String>,
    opens: Vec<PointSet>,
    index: HashMap<PointSet, OpenId>,
    /// Covering relations `(smaller, larger)`.
    hasse: Vec<(OpenId, OpenId)>,
    /// For each open, the ids of all opens it contains (itself included), ascending.
    contained: Vec<Vec<OpenId>>,
    fingerprint: u64,
}

impl FiniteSpace {
    /// Builds a space from an explicit list of opens, checking the axioms.
    pub fn explicit<S: AsRef<str>>(
        points: &[S],
        open_list: &[Vec<S>],
    ) -> Result<Self, TopologyError> {
        let labels = check_labels(points)?;
        if open_list.is_empty() {
            return Err(TopologyError::NoOpens);
        }
        let lookup: HashMap<&str, usize> =
            labels.iter().enumerate().map(|(i, p)| (p.as_str(), i)).collect();
        let n = labels.len();
        let mut sets = Vec::with_capacity(open_list.len());
        for open in open_list {
            let mut set = PointSet::with_capacity(n);
            for p in open {
                let i = *lookup
                    .get(p.as_ref())
                    .ok_or_else(|| TopologyError::UnknownPoint(p.as_ref().to_string()))?;
                set.insert(i);
            }
            sets.push(set);
        }
        Self::from_sets(labels, sets, true)
    }

    /// Builds the Alexandrov topology of a preorder given by `leq_pairs`
    /// (reflexive-transitive closure is taken). Fails with `CapExceeded` rather
    /// than truncating when more than `cap` opens would be generated.
    pub fn alexandrov<S: AsRef<str>>(
        points: &[S],
        leq_pairs: &[(S, S)],
        cap: usize,
        orientation: Orientation,
    ) -> Result<Self, TopologyError> {
        let labels = check_labels(points)?;
        let lookup: HashMap<&str, usize> =
            labels.iter().enumerate().map(|(i, p)| (p.as_str(), i)).collect();
        let n = labels.len();
        let mut leq = vec![vec![false; n]; n];
        for (i, row) in leq.iter_mut().enumerate() {
            row[i] = true;
        }
        for (x, y) in leq_pairs {
            let xi = *lookup
                .get(x.as_ref())
                .ok_or_else(|| TopologyError::UnknownPoint(x.as_ref().to_string()))?;
            let yi = *lookup
                .get(y.as_ref())
                .ok_or_else(|| TopologyError::UnknownPoint(y.as_ref().to_string()))?;
            leq[xi][yi] = true;
        }
        for k in 0..n {
            for i in 0..n {
                if leq[i][k] {
                    for j in 0..n {
                        if leq[k][j] {
                            leq[i][j] = true;
                        }
                    }
                }
            }
        }
        // below[y] = points forced into any open containing y
        let below: Vec<PointSet> = (0..n)
            .map(|y| {
                let mut s = PointSet::with_capacity(n);
                for x in 0..n {
                    let forced = match orientation {
                        Orientation::DownSets => leq[x][y],
                        Orientation::UpSets => leq[y][x],
                    };
                    if forced {
                        s.insert(x);
                    }
                }
                s
            })
            .collect();
        let sets = enumerate_closed_sets(&below, cap)?;
        Self::from_sets(labels, sets, false)
    }

    fn from_sets(
        points: Vec<String>,
        mut sets: Vec<PointSet>,
        validate: bool,
    ) -> Result<Self, TopologyError> {
        let n = points.len();
        sets.sort_by(|a, b| {
            a.count_ones(..)
                .cmp(&b.count_ones(..))
                .then_with(|| a.ones().cmp(b.ones()))
        });
        sets.dedup();
        let index: HashMap<PointSet, OpenId> =
            sets.iter().cloned().enumerate().map(|(i, s)| (s, OpenId(i))).collect();
        if validate {
            let describe = |s: &PointSet| describe_set(&points, s);
            for i in 0..sets.len() {
                for j in (i + 1)..sets.len() {
                    let mut u = sets[i].clone();
                    u.union_with(&sets[j]);
                    if !index.contains_key(&u) {
                        return Err(TopologyError::NotClosedUnderUnion(
                            describe(&sets[i]),
                            describe(&sets[j]),
                        ));
                    }
                    let mut x = sets[i].clone();
                    x.intersect_with(&sets[j]);
                    if !index.contains_key(&x) {
                        return Err(TopologyError::NotClosedUnderIntersection(
                            describe(&sets[i]),
                            describe(&sets[j]),
                        ));
                    }
                }
            }
        }
        let empty = PointSet::with_capacity(n);
        let mut whole = PointSet::with_capacity(n);
        whole.insert_range(..);
        if sets.first() != Some(&empty) || sets.last() != Some(&whole) {
            return Err(TopologyError::MissingEmptyOrWhole);
        }
        // ids are sorted by cardinality, so a subset always has a smaller-or-equal id
        let contained: Vec<Vec<OpenId>> = (0..sets.len())
            .map(|v| {
                (0..=v)
                    .filter(|&u| sets[u].is_subset(&sets[v]))
                    .map(OpenId)
                    .collect()
            })
            .collect();
        let mut hasse = Vec::new();
        for (v, subs) in contained.iter().enumerate() {
            let strict: Vec<usize> = subs.iter().map(|u| u.0).filter(|&u| u != v).collect();
            for &u in &strict {
                let covered = strict
                    .iter()
                    .any(|&w| w != u && sets[u].is_subset(&sets[w]));
                if !covered {
                    hasse.push((OpenId(u), OpenId(v)));
                }
            }
        }
        let mut h = DefaultHasher::new();
        points.hash(&mut h);
        for s in &sets {
            s.ones().collect::<Vec<_>>().hash(&mut h);
        }
        Ok(Self {
            points,
            opens: sets,
            index,
            hasse,
            contained,
            fingerprint: h.finish(),
        })
    }

    pub fn points(&self) -> &[String] {
        &self.points
    }

    pub fn n_points(&self) -> usize {
        self.points.len()
    }

    pub fn n_opens(&self) -> usize {
        self.opens.len()
    }

    pub fn point_index(&self, label: &str) -> Option<usize> {
        self.points.iter().position(|p| p == label)
    }

    pub fn open_ids(&self) -> impl Iterator<Item = OpenId> + '_ {
        (0..self.opens.len()).map(OpenId)
    }

    pub fn members(&self, id: OpenId) -> &PointSet {
        &self.opens[id.0]
    }

    pub fn open(&self, id: OpenId) -> OpenSet {
        OpenSet { id, members: self.opens[id.0].clone() }
    }

    pub fn empty(&self) -> OpenId {
        OpenId(0)
    }

    pub fn whole(&self) -> OpenId {
        OpenId(self.opens.len() - 1)
    }

    /// Looks up the open with exactly these members.
    pub fn open_id(&self, members: &PointSet) -> Option<OpenId> {
        self.index.get(members).copied()
    }

    /// Convenience lookup by point labels.
    pub fn open_by_labels<S: AsRef<str>>(&self, labels: &[S]) -> Option<OpenId> {
        let mut set = PointSet::with_capacity(self.n_points());
        for l in labels {
            set.insert(self.point_index(l.as_ref())?);
        }
        self.open_id(&set)
    }

    /// Covering relations of `⊆`, as `(smaller, larger)` pairs.
    pub fn hasse(&self) -> &[(OpenId, OpenId)] {
        &self.hasse
    }

    pub fn is_hasse_edge(&self, smaller: OpenId, larger: OpenId) -> bool {
        self.hasse.contains(&(smaller, larger))
    }

    /// All opens contained in `id` (including `id` itself), ascending.
    pub fn subopens(&self, id: OpenId) -> &[OpenId] {
        &self.contained[id.0]
    }

    pub fn is_subset(&self, u: OpenId, v: OpenId) -> bool {
        self.opens[u.0].is_subset(&self.opens[v.0])
    }

    /// All pairs `(U, V)` with `U ⊆ V`, including `U = V`.
    pub fn inclusion_pairs(&self) -> impl Iterator<Item = (OpenId, OpenId)> + '_ {
        self.contained
            .iter()
            .enumerate()
            .flat_map(|(v, subs)| subs.iter().map(move |&u| (u, OpenId(v))))
    }

    pub fn id(&self) -> SpaceId {
        SpaceId { fingerprint: self.fingerprint, n_points: self.points.len() }
    }

    /// Smallest open set containing `subset`.
    pub fn star(&self, subset: &PointSet) -> OpenId {
        let mut acc = self.opens.last().cloned().expect("space has opens");
        for s in &self.opens {
            if subset.is_subset(s) {
                acc.intersect_with(s);
            }
        }
        self.open_id(&acc)
            .expect("finite intersections of opens are open")
    }

    pub fn star_of_point(&self, point: usize) -> OpenId {
        let mut s = PointSet::with_capacity(self.n_points());
        s.insert(point);
        self.star(&s)
    }

    pub fn label(&self, id: OpenId) -> String {
        describe_set(&self.points, &self.opens[id.0])
    }

    /// Preimage of a point set under a point map `f` from this space.
    pub fn preimage(map: &[usize], target: &PointSet) -> PointSet {
        let mut s = PointSet::with_capacity(map.len());
        for (x, &y) in map.iter().enumerate() {
            if target.contains(y) {
                s.insert(x);
            }
        }
        s
    }

    /// Whether the point map `map` (indexed by points of `self`) is continuous
    /// into `codomain`.
    pub fn is_continuous(&self, codomain: &FiniteSpace, map: &[usize]) -> bool {
        if map.len() != self.n_points() || map.iter().any(|&y| y >= codomain.n_points()) {
            return false;
        }
        codomain
            .opens
            .iter()
            .all(|v| self.open_id(&Self::preimage(map, v)).is_some())
    }
}

fn check_labels<S: AsRef<str>>(points: &[S]) -> Result<Vec<String>, TopologyError> {
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::with_capacity(points.len());
    for p in points {
        let p = p.as_ref().to_string();
        if !seen.insert(p.clone()) {
            return Err(TopologyError::DuplicatePoint(p));
        }
        out.push(p);
    }
    Ok(out)
}

pub(crate) fn describe_set(points: &[String], set: &PointSet) -> String {
    let names: Vec<&str> = set.ones().map(|i| points[i].as_str()).collect();
    format!("{{{}}}", names.join(","))
}

/// All subsets `S` with `below[x] ⊆ S` for every `x ∈ S`.
fn enumerate_closed_sets(below: &[PointSet], cap: usize) -> Result<Vec<PointSet>, TopologyError> {
    let n = below.len();
    // points in order of increasing |below|, so forced points are decided first
    // (equivalent points have equal closures and are decided together)
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&x| (below[x].count_ones(..), x));
    let mut out = Vec::new();
    let mut current = PointSet::with_capacity(n);
    let mut excluded = PointSet::with_capacity(n);
    fn recurse(
        pos: usize,
        order: &[usize],
        below: &[PointSet],
        current: &mut PointSet,
        excluded: &mut PointSet,
        out: &mut Vec<PointSet>,
        cap: usize,
    ) -> Result<(), TopologyError> {
        if pos == order.len() {
            if out.len() >= cap {
                return Err(TopologyError::CapExceeded { cap });
            }
            out.push(current.clone());
            return Ok(());
        }
        let x = order[pos];
        if current.contains(x) || excluded.contains(x) {
            return recurse(pos + 1, order, below, current, excluded, out, cap);
        }
        // include x: everything below x must be includable
        if below[x].is_disjoint(excluded) {
            let saved = current.clone();
            current.union_with(&below[x]);
            recurse(pos + 1, order, below, current, excluded, out, cap)?;
            *current = saved;
        }
        // exclude x: everything above x is excluded as well
        let saved = excluded.clone();
        let mut ok = true;
        for (y, b) in below.iter().enumerate() {
            if b.contains(x) {
                if current.contains(y) {
                    ok = false;
                    break;
                }
                excluded.insert(y);
            }
        }
        if ok {
            recurse(pos + 1, order, below, current, excluded, out, cap)?;
        }
        *excluded = saved;
        Ok(())
    }
    recurse(0, &order, below, &mut current, &mut excluded, &mut out, cap)?;
    Ok(out)
}

/// A finite family of point sets on one space; it need not cover the space.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PartialCover {
    space: SpaceId,
    members: Vec<PointSet>,
}

impl PartialCover {
    /// Cover made of opens of `space`.
    pub fn from_opens(space: &FiniteSpace, ids: &[OpenId]) -> Result<Self, TopologyError> {
        let members = ids
            .iter()
            .map(|id| {
                space
                    .opens
                    .get(id.0)
                    .cloned()
                    .ok_or(TopologyError::UnknownOpen(id.0))
            })
            .collect::<Result<_, _>>()?;
        Ok(Self { space: space.id(), members })
    }

    /// Cover of arbitrary point sets on a universe identified by `space`.
    pub fn from_sets(space: SpaceId, members: Vec<PointSet>) -> Result<Self, TopologyError> {
        for m in &members {
            if let Some(p) = m.ones().find(|&p| p >= space.n_points) {
                return Err(TopologyError::PointOutOfRange(p));
            }
        }
        let members = members
            .into_iter()
            .map(|mut m| {
                m.grow(space.n_points);
                m
            })
            .collect();
        Ok(Self { space, members })
    }

    pub fn empty(space: SpaceId) -> Self {
        Self { space, members: Vec::new() }
    }

    pub fn space(&self) -> SpaceId {
        self.space
    }

    pub fn members(&self) -> &[PointSet] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// True iff every member of `self` lies inside some member of `coarser`.
    pub fn refines(&self, coarser: &PartialCover) -> Result<bool, TopologyError> {
        if self.space != coarser.space {
            return Err(TopologyError::SpaceMismatch);
        }
        Ok(self
            .members
            .iter()
            .all(|v| coarser.members.iter().any(|u| v.is_subset(u))))
    }

    /// `{ f⁻¹(U) : U ∈ self }` for a point map `f` into this cover's space.
    pub fn preimage(&self, domain: SpaceId, map: &[usize]) -> Self {
        Self {
            space: domain,
            members: self
                .members
                .iter()
                .map(|u| FiniteSpace::preimage(map, u))
                .collect(),
        }
    }

    /// Members as sorted point-index lists.
    pub fn member_points(&self) -> Vec<Vec<usize>> {
        self.members.iter().map(|m| m.ones().collect()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn abc() -> FiniteSpace {
        FiniteSpace::explicit(
            &["A", "B", "C"],
            &[vec![], vec!["A"], vec!["A", "B"], vec!["A", "C"], vec!["A", "B", "C"]],
        )
        .unwrap()
    }

    fn set(space: &FiniteSpace, labels: &[&str]) -> PointSet {
        let mut s = PointSet::with_capacity(space.n_points());
        for l in labels {
            s.insert(space.point_index(l).unwrap());
        }
        s
    }

    #[test]
    fn worked_example_topology() {
        let x = abc();
        assert_eq!(x.n_opens(), 5);
        let id = |l: &[&str]| x.open_by_labels(l).unwrap();
        let mut edges: Vec<_> = x.hasse().to_vec();
        edges.sort();
        let mut expected = vec![
            (id(&[]), id(&["A"])),
            (id(&["A"]), id(&["A", "B"])),
            (id(&["A"]), id(&["A", "C"])),
            (id(&["A", "B"]), id(&["A", "B", "C"])),
            (id(&["A", "C"]), id(&["A", "B", "C"])),
        ];
        expected.sort();
        assert_eq!(edges, expected);
        assert_eq!(x.empty(), id(&[]));
        assert_eq!(x.whole(), id(&["A", "B", "C"]));
    }

    #[test]
    fn minimal_topology() {
        let x = FiniteSpace::explicit(&["p"], &[vec![], vec!["p"]]).unwrap();
        assert_eq!(x.n_opens(), 2);
        assert_eq!(x.hasse().len(), 1);
    }

    #[test]
    fn union_witness() {
        let err = FiniteSpace::explicit(&["A", "B"], &[vec![], vec!["A"], vec!["B"]]).unwrap_err();
        assert_eq!(err, TopologyError::NotClosedUnderUnion("{A}".into(), "{B}".into()));
        let err = FiniteSpace::explicit(&["A", "B"], &[vec!["A"], vec!["A", "B"]]).unwrap_err();
        assert_eq!(err, TopologyError::MissingEmptyOrWhole);
        let err = FiniteSpace::explicit(
            &["A", "B", "C"],
            &[vec![], vec!["A", "B"], vec!["B", "C"], vec!["A", "B", "C"]],
        )
        .unwrap_err();
        assert!(matches!(err, TopologyError::NotClosedUnderIntersection(_, _)));
        // duplicates in the list collapse
        let x = FiniteSpace::explicit(&["A"], &[vec![], vec!["A"], vec!["A", "A"]]).unwrap();
        assert_eq!(x.n_opens(), 2);
    }

    #[test]
    fn alexandrov_chain_and_antichain() {
        let chain =
            FiniteSpace::alexandrov(&["a", "b"], &[("a", "b")], 100, Orientation::DownSets).unwrap();
        assert_eq!(chain.n_opens(), 3);
        assert!(chain.open_by_labels(&["a"]).is_some());
        assert!(chain.open_by_labels(&["b"]).is_none());
        let up = FiniteSpace::alexandrov(&["a", "b"], &[("a", "b")], 100, Orientation::UpSets).unwrap();
        assert!(up.open_by_labels(&["b"]).is_some());

        let anti = FiniteSpace::alexandrov::<&str>(&["a", "b"], &[], 100, Orientation::DownSets).unwrap();
        assert_eq!(anti.n_opens(), 4);

        let labels: Vec<String> = (0..20).map(|i| format!("p{i}")).collect();
        let err = FiniteSpace::alexandrov::<String>(&labels, &[], 1000, Orientation::DownSets)
            .unwrap_err();
        assert_eq!(err, TopologyError::CapExceeded { cap: 1000 });
    }

    #[test]
    fn alexandrov_with_equivalent_points() {
        // a ≤ b ≤ a: a and b are indistinguishable
        let x = FiniteSpace::alexandrov(
            &["a", "b", "c"],
            &[("a", "b"), ("b", "a")],
            100,
            Orientation::DownSets,
        )
        .unwrap();
        assert_eq!(x.n_opens(), 4);
        assert!(x.open_by_labels(&["a"]).is_none());
    }

    #[test]
    fn stars() {
        let x = abc();
        let b = set(&x, &["B"]);
        assert_eq!(x.star(&b), x.open_by_labels(&["A", "B"]).unwrap());
        assert_eq!(x.star(&set(&x, &["A"])), x.open_by_labels(&["A"]).unwrap());
        assert_eq!(x.star(&set(&x, &[])), x.empty());
        assert_eq!(x.star(&set(&x, &["B", "C"])), x.whole());
    }

    #[test]
    fn refinement_examples() {
        let x = abc();
        let id = |l: &[&str]| x.open_by_labels(l).unwrap();
        let a = PartialCover::from_opens(&x, &[id(&["A"])]).unwrap();
        let mid = PartialCover::from_opens(&x, &[id(&["A", "B"]), id(&["A", "C"])]).unwrap();
        let top = PartialCover::from_opens(&x, &[id(&["A", "B", "C"])]).unwrap();
        assert!(a.refines(&mid).unwrap());
        assert!(mid.refines(&top).unwrap());
        let ab = PartialCover::from_opens(&x, &[id(&["A", "B"])]).unwrap();
        let ac = PartialCover::from_opens(&x, &[id(&["A", "C"])]).unwrap();
        assert!(!ab.refines(&ac).unwrap());

        let other = FiniteSpace::explicit(&["p"], &[vec![], vec!["p"]]).unwrap();
        let foreign = PartialCover::from_opens(&other, &[other.whole()]).unwrap();
        assert_eq!(a.refines(&foreign), Err(TopologyError::SpaceMismatch));
    }

    #[test]
    fn continuity() {
        let x = abc();
        assert!(x.is_continuous(&x, &[0, 1, 2]));
        // swapping B and C is a homeomorphism
        assert!(x.is_continuous(&x, &[0, 2, 1]));
        // constant map onto C: preimage of {A,C} is everything, of {A} is empty
        assert!(x.is_continuous(&x, &[2, 2, 2]));

        let discrete =
            FiniteSpace::explicit(&["u", "v"], &[vec![], vec!["u"], vec!["v"], vec!["u", "v"]])
                .unwrap();
        let sierpinski = FiniteSpace::explicit(&["o", "c"], &[vec![], vec!["o"], vec!["o", "c"]])
            .unwrap();
        // any map out of a discrete space is continuous
        assert!(discrete.is_continuous(&sierpinski, &[1, 0]));
        // identity-like map Sierpinski -> discrete: preimage of {c} = {c} is not open
        assert!(!sierpinski.is_continuous(&discrete, &[0, 1]));
    }
}
