//! The JSON problem file: a finite space, a sheaf on it, an assignment and
//! solver options, all in one document.
//!
//! Opens are named by their points joined with commas (`"A,B"`); `""` is the
//! empty open and `"*"` the whole space. Restrictions are keyed `"V>U"` for
//! the Hasse edge `U ⊆ V` and matrices are row-major.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use sheaflens::cech::FieldKind;
use sheaflens::extend::Objective;
use sheaflens::sheaf::COMMUTATIVITY_TOL;
use sheaflens::{
    Assignment, FiniteSpace, MetricSheaf, Norm, OpenId, Orientation, PseudometricSpace, StalkMap, TopologyError, Value,
};

use crate::CliError;

pub const VERSION: &str = "sheaflens/1";
/// Default limit on the number of opens generated from a poset.
pub const DEFAULT_OPENS_CAP: usize = 2000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub space: Option<SpaceBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub poset: Option<PosetBlock>,
    pub sheaf: SheafBlock,
    #[serde(default, skip_serializing_if = "AssignmentBlock::is_empty")]
    pub assignment: AssignmentBlock,
    #[serde(default, skip_serializing_if = "Options::is_default")]
    pub options: Options,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceBlock {
    pub points: Vec<String>,
    pub opens: Vec<Vec<String>>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OrientationSpec {
    #[default]
    Down,
    Up,
}

impl OrientationSpec {
    fn is_default(&self) -> bool {
        *self == OrientationSpec::Down
    }
}

/// A preorder whose Alexandrov topology is the space. `leq` lists pairs
/// `[x, y]` with `x ≤ y`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PosetBlock {
    pub points: Vec<String>,
    #[serde(default)]
    pub leq: Vec<(String, String)>,
    #[serde(default, skip_serializing_if = "OrientationSpec::is_default")]
    pub orientation: OrientationSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum StalkSpec {
    Euclidean {
        dim: usize,
        #[serde(default, skip_serializing_if = "is_linf")]
        metric: Norm,
    },
    Table {
        labels: Vec<String>,
        dist: Vec<Vec<f64>>,
    },
    Point,
}

fn is_linf(n: &Norm) -> bool {
    *n == Norm::Linf
}

/// A generator restriction. Tables list, for each source label in order, the
/// label it is sent to.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RestrictionSpec {
    Matrix(Vec<Vec<f64>>),
    Scalar(f64),
    Table(Vec<String>),
    Identity,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SheafBlock {
    /// Stalk for every nonempty open not listed in `stalks`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default_stalk: Option<StalkSpec>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub stalks: BTreeMap<String, StalkSpec>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub restrictions: BTreeMap<String, RestrictionSpec>,
    /// Used on Hasse edges not listed in `restrictions`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default_restriction: Option<RestrictionSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ValueSpec {
    Scalar(f64),
    Vector(Vec<f64>),
    Label(String),
    Point(()),
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssignmentBlock {
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub values: BTreeMap<String, ValueSpec>,
    /// Opens whose values are used; all keys of `values` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub support: Option<Vec<String>>,
}

impl AssignmentBlock {
    fn is_empty(&self) -> bool {
        self.values.is_empty() && self.support.is_none()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObjectiveSpec {
    #[default]
    Linf,
    L2,
}

impl From<ObjectiveSpec> for Objective {
    fn from(o: ObjectiveSpec) -> Self {
        match o {
            ObjectiveSpec::Linf => Objective::Linf,
            ObjectiveSpec::L2 => Objective::L2,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Options {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<FieldKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objective: Option<ObjectiveSpec>,
    /// Solver tolerance for extensions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degree_cap: Option<usize>,
    /// Largest number of opens generated from a poset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cap: Option<usize>,
}

impl Options {
    fn is_default(&self) -> bool {
        *self == Options::default()
    }
}

impl ProblemFile {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let file: ProblemFile = serde_json::from_str(text).map_err(|e| CliError::Schema(e.to_string()))?;
        if file.version != VERSION {
            return Err(CliError::Schema(format!("unsupported version `{}`, expected `{VERSION}`", file.version)));
        }
        Ok(file)
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        Self::from_json(&crate::read_file(path)?)
    }

    /// Pretty JSON with sorted map keys.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("problem files always serialize")
    }

    /// Builds the space, the sheaf and the (possibly partial) assignment.
    /// `cap` overrides the poset open limit from the options.
    pub fn build(&self, cap: Option<usize>) -> Result<Problem, CliError> {
        let space = Arc::new(self.build_space(cap.or(self.options.cap).unwrap_or(DEFAULT_OPENS_CAP))?);
        let sheaf = Arc::new(self.sheaf.build(space)?);
        let assignment = self.assignment.build(&sheaf)?;
        Ok(Problem { sheaf, assignment })
    }

    fn build_space(&self, cap: usize) -> Result<FiniteSpace, CliError> {
        match (&self.space, &self.poset) {
            (Some(s), None) => FiniteSpace::explicit(&s.points, &s.opens).map_err(topology),
            (None, Some(p)) => {
                let orientation = match p.orientation {
                    OrientationSpec::Down => Orientation::DownSets,
                    OrientationSpec::Up => Orientation::UpSets,
                };
                FiniteSpace::alexandrov(&p.points, &p.leq, cap, orientation).map_err(topology)
            }
            _ => Err(CliError::Schema("exactly one of `space` and `poset` must be given".into())),
        }
    }
}

fn topology(e: TopologyError) -> CliError {
    match e {
        TopologyError::CapExceeded { .. } => CliError::Cap(e.to_string()),
        e => CliError::Schema(e.to_string()),
    }
}

/// A validated problem.
#[derive(Clone, Debug)]
pub struct Problem {
    pub sheaf: Arc<MetricSheaf>,
    pub assignment: Assignment,
}

/// Resolves an open name to its id.
pub fn parse_open(space: &FiniteSpace, name: &str) -> Result<OpenId, CliError> {
    let name = name.trim();
    match name {
        "" | "∅" => return Ok(space.empty()),
        "*" => return Ok(space.whole()),
        _ => {}
    }
    let labels: Vec<&str> = name.split(',').map(str::trim).collect();
    if let Some(bad) = labels.iter().find(|l| space.point_index(l).is_none()) {
        return Err(CliError::Schema(format!("open `{name}` names unknown point `{bad}`")));
    }
    space.open_by_labels(&labels).ok_or_else(|| CliError::Schema(format!("`{name}` is not an open set")))
}

/// The canonical name of an open: its points in space order.
pub fn open_name(space: &FiniteSpace, id: OpenId) -> String {
    space.members(id).ones().map(|i| space.points()[i].as_str()).collect::<Vec<_>>().join(",")
}

impl StalkSpec {
    fn build(&self) -> Result<PseudometricSpace, CliError> {
        let schema = |e: sheaflens::metric::MetricError| CliError::Schema(e.to_string());
        match self {
            StalkSpec::Euclidean { dim, metric } => PseudometricSpace::euclidean(*dim, *metric).map_err(schema),
            StalkSpec::Table { labels, dist } => PseudometricSpace::table(labels.clone(), dist.clone()).map_err(schema),
            StalkSpec::Point => Ok(PseudometricSpace::OnePoint),
        }
    }
}

impl RestrictionSpec {
    fn build(&self, source: &PseudometricSpace, target: &PseudometricSpace, edge: &str) -> Result<StalkMap, CliError> {
        let bad = |why: String| CliError::Schema(format!("restriction `{edge}`: {why}"));
        match self {
            RestrictionSpec::Matrix(rows) => StalkMap::from_rows(rows).map_err(|e| bad(e.to_string())),
            RestrictionSpec::Scalar(x) => Ok(StalkMap::scalar(*x)),
            RestrictionSpec::Identity => Ok(StalkMap::identity(source)),
            RestrictionSpec::Table(images) => {
                let PseudometricSpace::Table { labels, .. } = target else {
                    return Err(bad("tables need a table stalk on the smaller open".into()));
                };
                images
                    .iter()
                    .map(|l| labels.iter().position(|t| t == l).ok_or_else(|| bad(format!("unknown label `{l}`"))))
                    .collect::<Result<_, _>>()
                    .map(StalkMap::Table)
            }
        }
    }
}

impl SheafBlock {
    fn build(&self, space: Arc<FiniteSpace>) -> Result<MetricSheaf, CliError> {
        let mut given: HashMap<OpenId, &StalkSpec> = HashMap::new();
        for (name, spec) in &self.stalks {
            let id = parse_open(&space, name)?;
            if given.insert(id, spec).is_some() {
                return Err(CliError::Schema(format!("stalk over `{name}` is given twice")));
            }
        }
        let stalks = space
            .open_ids()
            .map(|id| match given.get(&id).copied().or(self.default_stalk.as_ref()) {
                _ if id == space.empty() => match given.get(&id) {
                    None | Some(StalkSpec::Point) => Ok(PseudometricSpace::OnePoint),
                    Some(_) => Err(CliError::Schema("the stalk over the empty open must be a point".into())),
                },
                Some(spec) => spec.build(),
                None => Err(CliError::Schema(format!("no stalk given over `{}`", open_name(&space, id)))),
            })
            .collect::<Result<Vec<_>, _>>()?;

        let mut generators = HashMap::new();
        for (key, spec) in &self.restrictions {
            let (v, u) = key
                .split_once('>')
                .ok_or_else(|| CliError::Schema(format!("restriction key `{key}` is not of the form `V>U`")))?;
            let (v, u) = (parse_open(&space, v)?, parse_open(&space, u)?);
            if !space.is_hasse_edge(u, v) {
                return Err(CliError::Schema(format!("restriction `{key}` is not a Hasse edge")));
            }
            let map = spec.build(&stalks[v.0], &stalks[u.0], key)?;
            if generators.insert((u, v), map).is_some() {
                return Err(CliError::Schema(format!("restriction `{key}` is given twice")));
            }
        }
        if let Some(spec) = &self.default_restriction {
            for &(u, v) in space.hasse() {
                if u != space.empty() && !generators.contains_key(&(u, v)) {
                    let key = format!("{}>{}", open_name(&space, v), open_name(&space, u));
                    generators.insert((u, v), spec.build(&stalks[v.0], &stalks[u.0], &key)?);
                }
            }
        }
        MetricSheaf::new(space, stalks, generators, COMMUTATIVITY_TOL).map_err(|e| CliError::Schema(e.to_string()))
    }
}

impl ValueSpec {
    fn build(&self, stalk: &PseudometricSpace, open: &str) -> Result<Value, CliError> {
        let value = match (self, stalk) {
            (ValueSpec::Point(()), PseudometricSpace::OnePoint) => Some(Value::Point),
            (ValueSpec::Scalar(x), PseudometricSpace::Euclidean { dim: 1, .. }) => Some(Value::scalar(*x)),
            (ValueSpec::Vector(v), PseudometricSpace::Euclidean { .. }) => Some(Value::Vector(v.clone())),
            (ValueSpec::Label(l), PseudometricSpace::Table { labels, .. }) => {
                labels.iter().position(|t| t == l).map(Value::Label)
            }
            _ => None,
        }
        .filter(|v| stalk.contains(v));
        value.ok_or_else(|| {
            CliError::Schema(format!("value over `{open}` does not lie in its {} stalk", stalk.kind_name()))
        })
    }
}

impl AssignmentBlock {
    fn build(&self, sheaf: &MetricSheaf) -> Result<Assignment, CliError> {
        let space = sheaf.space();
        let keys: Vec<&String> = match &self.support {
            Some(support) => support.iter().collect(),
            None => self.values.keys().collect(),
        };
        let mut seen = HashMap::new();
        let mut values = Vec::with_capacity(keys.len());
        for key in keys {
            let id = parse_open(space, key)?;
            if let Some(prev) = seen.insert(id, key) {
                return Err(CliError::Schema(format!("`{prev}` and `{key}` name the same open")));
            }
            let spec = self
                .values
                .get(key)
                .ok_or_else(|| CliError::Schema(format!("support open `{key}` has no value")))?;
            values.push((id, spec.build(sheaf.stalk(id), key)?));
        }
        Assignment::partial(sheaf, values).map_err(|e| CliError::Schema(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const ABC: &str = r#"{
        "version": "sheaflens/1",
        "space": {"points": ["A", "B", "C"], "opens": [[], ["A"], ["A", "B"], ["A", "C"], ["A", "B", "C"]]},
        "sheaf": {
            "default_stalk": {"kind": "euclidean", "dim": 1},
            "restrictions": {"*>A,B": {"scalar": 2}, "*>A,C": {"scalar": 1}, "A,B>A": {"matrix": [[0.5]]}, "A,C>A": "identity"}
        },
        "assignment": {"values": {"A,B": 0, "A,C": [1]}}
    }"#;

    #[test]
    fn builds_the_abc_problem() {
        let p = ProblemFile::from_json(ABC).unwrap().build(None).unwrap();
        let x = p.sheaf.space();
        assert_eq!(x.n_opens(), 5);
        assert_eq!(p.sheaf.lipschitz(), 2.0);
        assert_eq!(p.assignment.support().len(), 2);
        assert_eq!(p.assignment.value(parse_open(x, "A,C").unwrap()), Some(&Value::scalar(1.0)));
    }

    #[test]
    fn round_trips() {
        let file = ProblemFile::from_json(ABC).unwrap();
        let again = ProblemFile::from_json(&file.to_json()).unwrap();
        assert_eq!(file, again);
        assert_eq!(file.to_json(), again.to_json());
    }

    #[test]
    fn open_names() {
        let p = ProblemFile::from_json(ABC).unwrap().build(None).unwrap();
        let x = p.sheaf.space();
        assert_eq!(parse_open(x, " C , A ").unwrap(), x.open_by_labels(&["A", "C"]).unwrap());
        assert_eq!(open_name(x, x.whole()), "A,B,C");
        assert_eq!(parse_open(x, "").unwrap(), x.empty());
        assert!(matches!(parse_open(x, "B"), Err(CliError::Schema(_))));
        assert!(matches!(parse_open(x, "A,Z"), Err(CliError::Schema(_))));
    }

    #[test]
    fn schema_errors() {
        let cases = [
            ABC.replace("sheaflens/1", "sheaflens/0"),
            ABC.replace("\"A,B\": 0", "\"A,B\": \"x\""),
            ABC.replace("[[0.5]]", "[[0.5, 1]]"),
            ABC.replace("\"*>A,B\"", "\"*>A\""),
            ABC.replace("\"default_stalk\"", "\"stalk\""),
            ABC.replace("\"A,B\": 0", "\"B\": 0"),
        ];
        for text in cases {
            let err = ProblemFile::from_json(&text).and_then(|f| f.build(None)).unwrap_err();
            assert!(matches!(err, CliError::Schema(_)), "{text}: {err:?}");
        }
    }

    #[test]
    fn posets_and_caps() {
        let text = r#"{
            "version": "sheaflens/1",
            "poset": {"points": ["a", "b", "c"], "leq": [["a", "b"], ["a", "c"]]},
            "sheaf": {"default_stalk": {"kind": "euclidean", "dim": 2, "metric": "l2"}, "default_restriction": "identity"}
        }"#;
        let file = ProblemFile::from_json(text).unwrap();
        // down-sets of a ≤ b, a ≤ c: ∅, {a}, {a,b}, {a,c}, {a,b,c}
        assert_eq!(file.build(None).unwrap().sheaf.space().n_opens(), 5);
        assert!(matches!(file.build(Some(3)), Err(CliError::Cap(_))));
        assert_eq!(ProblemFile::from_json(&file.to_json()).unwrap(), file);
    }

    #[test]
    fn table_stalks() {
        let text = r#"{
            "version": "sheaflens/1",
            "space": {"points": ["p", "q"], "opens": [[], ["p"], ["p", "q"]]},
            "sheaf": {
                "stalks": {
                    "p": {"kind": "table", "labels": ["lo", "hi"], "dist": [[0, 1], [1, 0]]},
                    "p,q": {"kind": "table", "labels": ["x", "y", "z"], "dist": [[0, 1, 2], [1, 0, 1], [2, 1, 0]]}
                },
                "restrictions": {"p,q>p": {"table": ["lo", "lo", "hi"]}}
            },
            "assignment": {"values": {"p": "hi", "p,q": "x"}}
        }"#;
        let p = ProblemFile::from_json(text).unwrap().build(None).unwrap();
        assert_eq!(p.sheaf.consistency_radius(&p.assignment).unwrap(), 1.0);
    }
}
