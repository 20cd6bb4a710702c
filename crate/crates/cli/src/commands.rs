//! The four subcommands. Each returns a report that renders either as JSON or
//! as human-readable tables.

use std::path::Path;

use serde::Deserialize;
use serde_json::{json, Value as Json};

use sheaflens::cech::{bottleneck, cech_ranks, filtration_barcode, CechError, FieldKind, PersistenceDiagram};
use sheaflens::extend::{extend_minimize, ExtendError, ExtendOptions, Method};
use sheaflens::filtration::{consistency_filtration, interleaving_upper_bound, CoarseningFiltration, FiltrationError};
use sheaflens::pointcloud::{
    cloud_consistency_filtration, cross_check, oracle_barcode, CloudError, PointCloud, StarCheck, DEFAULT_OPENS_CAP,
    DEFAULT_POINT_CAP,
};
use sheaflens::{Assignment, FiniteSpace, MetricSheaf, PartialCover, PseudometricSpace, SheafError, TopologyError, Value};

use crate::output::{bar_table, fmt_num, plot_csv, table, NumFormat};
use crate::schema::{Problem, ProblemFile};
use crate::CliError;

/// Tolerance for comparing barcodes and checking the stability verdict.
pub const COMPARE_TOL: f64 = 1e-9;
/// Point clouds up to this size also get the star cross-check.
pub const CROSS_CHECK_POINTS: usize = 4;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Settings {
    pub extend: bool,
    pub persist: bool,
    pub plot_data: bool,
    pub json: bool,
    pub exact: bool,
    pub field: Option<FieldKind>,
    pub tol: Option<f64>,
    pub cap: Option<usize>,
}

impl Settings {
    pub fn format(&self) -> NumFormat {
        NumFormat { exact: self.exact }
    }
}

fn sheaf_error(e: SheafError) -> CliError {
    match e {
        SheafError::PartialAssignment { open } => CliError::Partial { open },
        e => CliError::Failure(e.to_string()),
    }
}

fn filtration_error(e: FiltrationError) -> CliError {
    match e {
        FiltrationError::Sheaf(e) => sheaf_error(e),
        FiltrationError::SpaceMismatch => CliError::SpaceMismatch,
        e => CliError::Failure(e.to_string()),
    }
}

fn cloud_error(e: CloudError) -> CliError {
    match e {
        CloudError::CapExceeded { .. } | CloudError::Topology(TopologyError::CapExceeded { .. }) => {
            CliError::Cap(e.to_string())
        }
        CloudError::EmptyInput | CloudError::DimensionMismatch { .. } | CloudError::NonFinite { .. } => {
            CliError::Schema(e.to_string())
        }
        e => CliError::Failure(e.to_string()),
    }
}

fn cech_error(e: CechError) -> CliError {
    CliError::Failure(e.to_string())
}

/// An open's value in a report.
#[derive(Clone, Debug, PartialEq)]
pub enum ValueOut {
    Point,
    Vector(Vec<f64>),
    Label(String),
}

impl ValueOut {
    fn new(stalk: &PseudometricSpace, v: &Value) -> Self {
        match (v, stalk) {
            (Value::Vector(x), _) => ValueOut::Vector(x.clone()),
            (Value::Label(i), PseudometricSpace::Table { labels, .. }) => ValueOut::Label(labels[*i].clone()),
            (Value::Label(i), _) => ValueOut::Label(i.to_string()),
            (Value::Point, _) => ValueOut::Point,
        }
    }

    fn json(&self, f: &NumFormat) -> Json {
        match self {
            ValueOut::Point => Json::Null,
            ValueOut::Vector(x) => f.nums(x),
            ValueOut::Label(l) => Json::String(l.clone()),
        }
    }

    fn text(&self) -> String {
        match self {
            ValueOut::Point => "•".into(),
            ValueOut::Vector(x) if x.len() == 1 => fmt_num(x[0]),
            ValueOut::Vector(x) => format!("({})", x.iter().map(|&v| fmt_num(v)).collect::<Vec<_>>().join(", ")),
            ValueOut::Label(l) => l.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExtensionSummary {
    pub method: &'static str,
    pub iterations: usize,
    /// `(open, value, supported)` for every nonempty open.
    pub values: Vec<(String, ValueOut, bool)>,
}

/// A problem with its assignment made total.
struct Resolved {
    sheaf: std::sync::Arc<MetricSheaf>,
    assignment: Assignment,
    extension: Option<ExtensionSummary>,
    degree_cap: usize,
    field: FieldKind,
}

fn method_name(m: Method) -> &'static str {
    match m {
        Method::Direct => "direct",
        Method::LinearProgram => "linear program",
        Method::LeastSquares => "least squares",
        Method::Subgradient => "subgradient",
    }
}

fn resolve(file: &ProblemFile, settings: &Settings) -> Result<Resolved, CliError> {
    let Problem { sheaf, assignment } = file.build(settings.cap)?;
    let degree_cap = file.options.degree_cap.unwrap_or(1);
    let field = settings.field.or(file.options.field).unwrap_or_default();
    if assignment.is_total() {
        return Ok(Resolved { sheaf, assignment, extension: None, degree_cap, field });
    }
    if !settings.extend {
        let open = assignment.first_missing().map_or_else(String::new, |id| sheaf.space().label(id));
        return Err(CliError::Partial { open });
    }
    let mut opts = ExtendOptions::default();
    if let Some(o) = file.options.objective {
        opts.objective = o.into();
    }
    if let Some(tol) = settings.tol.or(file.options.tol) {
        opts.tol = tol;
    }
    let ext = extend_minimize(&sheaf, &assignment, &opts).map_err(|e| match e {
        ExtendError::NoSupport => CliError::Partial { open: "every open".into() },
        ExtendError::EnumerationTooLarge { .. } => CliError::Cap(e.to_string()),
        ExtendError::Sheaf(e) => sheaf_error(e),
        e => CliError::Failure(e.to_string()),
    })?;
    let space = sheaf.space();
    let values = space
        .open_ids()
        .filter(|&id| id != space.empty())
        .map(|id| {
            let v = ext.assignment.value(id).expect("extensions are total");
            (space.label(id), ValueOut::new(sheaf.stalk(id), v), assignment.support().contains(&id))
        })
        .collect();
    let extension = ExtensionSummary {
        method: method_name(ext.diagnostics.method),
        iterations: ext.diagnostics.iterations,
        values,
    };
    Ok(Resolved { sheaf, assignment: ext.assignment, extension: Some(extension), degree_cap, field })
}

fn extension_json(e: &ExtensionSummary, f: &NumFormat) -> Json {
    let values: serde_json::Map<String, Json> = e.values.iter().map(|(open, v, _)| (open.clone(), v.json(f))).collect();
    let supported: Vec<&String> = e.values.iter().filter(|(_, _, s)| *s).map(|(o, _, _)| o).collect();
    json!({ "method": e.method, "iterations": e.iterations, "values": values, "support": supported })
}

fn extension_text(e: &ExtensionSummary) -> String {
    let rows: Vec<Vec<String>> = e
        .values
        .iter()
        .map(|(open, v, s)| vec![open.clone(), v.text(), if *s { "given" } else { "extended" }.into()])
        .collect();
    format!("extension ({}, {} iterations)\n{}", e.method, e.iterations, table(&["open", "value", "source"], &rows))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Threshold {
    pub lower: String,
    pub upper: String,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RadiusReport {
    pub radius: f64,
    pub l2_radius: f64,
    pub diameter: f64,
    pub lipschitz: f64,
    /// `c / (1 + K)`: no global section is closer to the assignment.
    pub section_lower_bound: f64,
    pub thresholds: Vec<Threshold>,
    pub extension: Option<ExtensionSummary>,
}

impl RadiusReport {
    pub fn to_json(&self, f: &NumFormat) -> Json {
        let thresholds: Vec<Json> = self
            .thresholds
            .iter()
            .map(|t| json!({ "lower": t.lower, "upper": t.upper, "value": f.num(t.value) }))
            .collect();
        let mut out = json!({
            "consistency_radius": f.num(self.radius),
            "l2_radius": f.num(self.l2_radius),
            "diameter": f.num(self.diameter),
            "lipschitz": f.num(self.lipschitz),
            "section_lower_bound": f.num(self.section_lower_bound),
            "thresholds": thresholds,
        });
        if let Some(e) = &self.extension {
            out["extension"] = extension_json(e, f);
        }
        out
    }

    pub fn to_text(&self) -> String {
        let summary = table(
            &["quantity", "value"],
            &[
                vec!["consistency radius".into(), fmt_num(self.radius)],
                vec!["L2 radius".into(), fmt_num(self.l2_radius)],
                vec!["diameter".into(), fmt_num(self.diameter)],
                vec!["Lipschitz constant K".into(), fmt_num(self.lipschitz)],
                vec!["section lower bound c/(1+K)".into(), fmt_num(self.section_lower_bound)],
            ],
        );
        let rows: Vec<Vec<String>> =
            self.thresholds.iter().map(|t| vec![t.lower.clone(), t.upper.clone(), fmt_num(t.value)]).collect();
        let mut out = format!("{summary}\ncritical thresholds\n{}", table(&["lower", "upper", "threshold"], &rows));
        if let Some(e) = &self.extension {
            out.push('\n');
            out.push_str(&extension_text(e));
        }
        out
    }
}

pub fn cmd_radius(file: &ProblemFile, settings: &Settings) -> Result<RadiusReport, CliError> {
    let r = resolve(file, settings)?;
    let (s, a) = (&r.sheaf, &r.assignment);
    let space = s.space();
    let radius = s.consistency_radius(a).map_err(sheaf_error)?;
    let lipschitz = s.lipschitz();
    let thresholds = s
        .critical_thresholds(a)
        .map_err(sheaf_error)?
        .into_iter()
        .map(|(u, v, value)| Threshold { lower: space.label(u), upper: space.label(v), value })
        .collect();
    Ok(RadiusReport {
        radius,
        l2_radius: s.consistency_radius_l2(a).map_err(sheaf_error)?,
        diameter: s.consistency_diameter(a).map_err(sheaf_error)?,
        lipschitz,
        section_lower_bound: radius / (1.0 + lipschitz),
        thresholds,
        extension: r.extension,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoverOut {
    /// The cover holds for thresholds in `(lower, upper]`.
    pub lower: f64,
    pub upper: f64,
    pub members: Vec<Vec<String>>,
    /// Čech cohomology ranks by degree, when persistence was requested.
    pub ranks: Option<Vec<usize>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FiltrationReport {
    pub radius: f64,
    pub breakpoints: Vec<f64>,
    pub covers: Vec<CoverOut>,
    pub local_radii: Vec<(String, f64)>,
    pub field: FieldKind,
    pub barcode: Option<PersistenceDiagram>,
    pub extension: Option<ExtensionSummary>,
}

fn cover_members(space: &FiniteSpace, cover: &PartialCover) -> Vec<Vec<String>> {
    cover.member_points().iter().map(|m| m.iter().map(|&p| space.points()[p].clone()).collect()).collect()
}

fn covers_out(
    f: &CoarseningFiltration,
    names: impl Fn(&PartialCover) -> Vec<Vec<String>>,
    ranks: Option<(FieldKind, usize)>,
) -> Vec<CoverOut> {
    let bp = f.breakpoints();
    f.covers()
        .iter()
        .enumerate()
        .map(|(i, c)| CoverOut {
            lower: if i == 0 { 0.0 } else { bp[i - 1] },
            upper: bp.get(i).copied().unwrap_or(f64::INFINITY),
            members: names(c),
            ranks: ranks.map(|(field, cap)| cech_ranks(c, field, cap)),
        })
        .collect()
}

fn covers_json(covers: &[CoverOut], f: &NumFormat) -> Json {
    Json::Array(
        covers
            .iter()
            .map(|c| {
                let mut out = json!({ "lower": f.num(c.lower), "upper": f.num(c.upper), "members": c.members });
                if let Some(r) = &c.ranks {
                    out["ranks"] = json!(r);
                }
                out
            })
            .collect(),
    )
}

fn covers_text(covers: &[CoverOut]) -> String {
    let with_ranks = covers.iter().any(|c| c.ranks.is_some());
    let rows: Vec<Vec<String>> = covers
        .iter()
        .map(|c| {
            let members: Vec<String> = c.members.iter().map(|m| format!("{{{}}}", m.join(","))).collect();
            let mut row = vec![format!("({}, {}]", fmt_num(c.lower), fmt_num(c.upper)), members.join(" ")];
            if let Some(r) = &c.ranks {
                row.push(r.iter().map(usize::to_string).collect::<Vec<_>>().join(" "));
            }
            row
        })
        .collect();
    let header: &[&str] = if with_ranks { &["interval", "cover", "ranks"] } else { &["interval", "cover"] };
    table(header, &rows)
}

impl FiltrationReport {
    pub fn to_json(&self, f: &NumFormat) -> Json {
        let radii: serde_json::Map<String, Json> =
            self.local_radii.iter().map(|(open, r)| (open.clone(), f.num(*r))).collect();
        let mut out = json!({
            "consistency_radius": f.num(self.radius),
            "breakpoints": f.nums(&self.breakpoints),
            "covers": covers_json(&self.covers, f),
            "local_radii": radii,
        });
        if let Some(d) = &self.barcode {
            out["field"] = json!(self.field);
            out["barcode"] = f.diagram(d);
        }
        if let Some(e) = &self.extension {
            out["extension"] = extension_json(e, f);
        }
        out
    }

    pub fn to_text(&self) -> String {
        let bp: Vec<String> = self.breakpoints.iter().map(|&b| fmt_num(b)).collect();
        let radii: Vec<Vec<String>> = self.local_radii.iter().map(|(o, r)| vec![o.clone(), fmt_num(*r)]).collect();
        let mut out = format!(
            "consistency radius  {}\nbreakpoints  {}\n\n{}\nlocal radii\n{}",
            fmt_num(self.radius),
            if bp.is_empty() { "none".into() } else { bp.join(" ") },
            covers_text(&self.covers),
            table(&["open", "radius"], &radii),
        );
        if let Some(d) = &self.barcode {
            let field = match self.field {
                FieldKind::F2 => "F2",
                FieldKind::Q => "Q",
            };
            out.push_str(&format!("\nbarcode over {field}\n{}", bar_table(d)));
        }
        if let Some(e) = &self.extension {
            out.push('\n');
            out.push_str(&extension_text(e));
        }
        out
    }
}

pub fn cmd_filtration(file: &ProblemFile, settings: &Settings) -> Result<FiltrationReport, CliError> {
    let r = resolve(file, settings)?;
    let (s, a) = (&r.sheaf, &r.assignment);
    let space = s.space();
    let f = consistency_filtration(s, a).map_err(filtration_error)?;
    let persist = settings.persist || settings.plot_data;
    let barcode = if persist { Some(filtration_barcode(&f, r.field, r.degree_cap).map_err(cech_error)?) } else { None };
    let local_radii = s.local_radii(a).map_err(sheaf_error)?;
    Ok(FiltrationReport {
        radius: s.consistency_radius(a).map_err(sheaf_error)?,
        breakpoints: f.breakpoints().to_vec(),
        covers: covers_out(&f, |c| cover_members(space, c), persist.then_some((r.field, r.degree_cap))),
        local_radii: space.open_ids().filter(|&id| id != space.empty()).map(|id| (space.label(id), local_radii[id.0])).collect(),
        field: r.field,
        barcode,
        extension: r.extension,
    })
}

#[derive(Deserialize)]
#[serde(untagged)]
enum CloudFile {
    Bare(Vec<Vec<f64>>),
    Wrapped { points: Vec<Vec<f64>> },
}

/// Reads a point cloud: JSON (`[[x, y], ...]` or `{"points": ...}`) when the
/// extension is `.json`, otherwise CSV with one point per line.
pub fn load_cloud(path: &Path) -> Result<PointCloud, CliError> {
    let text = crate::read_file(path)?;
    let points = if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
        match serde_json::from_str(&text).map_err(|e| CliError::Schema(e.to_string()))? {
            CloudFile::Bare(p) | CloudFile::Wrapped { points: p } => p,
        }
    } else {
        parse_csv(&text)?
    };
    PointCloud::new(points).map_err(cloud_error)
}

fn parse_csv(text: &str) -> Result<Vec<Vec<f64>>, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut points = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| CliError::Schema(e.to_string()))?;
        if record.iter().all(str::is_empty) {
            continue;
        }
        let line = record.position().map_or(0, |p| p.line());
        let point = record
            .iter()
            .map(|c| c.parse::<f64>().map_err(|_| CliError::Schema(format!("line {line}: `{c}` is not a number"))))
            .collect::<Result<Vec<_>, _>>()?;
        points.push(point);
    }
    Ok(points)
}

#[derive(Clone, Debug, PartialEq)]
pub struct PointCloudReport {
    pub n_points: usize,
    pub dim: usize,
    pub field: FieldKind,
    pub breakpoints: Vec<f64>,
    pub covers: Vec<CoverOut>,
    pub pipeline: PersistenceDiagram,
    pub oracle: PersistenceDiagram,
    pub equal: bool,
    pub cross_check: Option<Vec<StarCheck>>,
}

impl PointCloudReport {
    pub fn to_json(&self, f: &NumFormat) -> Json {
        let mut out = json!({
            "points": self.n_points,
            "dim": self.dim,
            "field": self.field,
            "breakpoints": f.nums(&self.breakpoints),
            "covers": covers_json(&self.covers, f),
            "pipeline": f.diagram(&self.pipeline),
            "oracle": f.diagram(&self.oracle),
            "equal": self.equal,
        });
        if let Some(rows) = &self.cross_check {
            out["cross_check"] = rows
                .iter()
                .map(|c| json!({ "simplex": c.simplex, "ball_radius": f.num(c.ball_radius), "local_radius": f.num(c.local_radius) }))
                .collect();
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "{} points in dimension {}\n\ncover filtration\n{}\npipeline barcode\n{}\noracle barcode\n{}\nbarcodes agree  {}\n",
            self.n_points,
            self.dim,
            covers_text(&self.covers),
            bar_table(&self.pipeline),
            bar_table(&self.oracle),
            if self.equal { "yes" } else { "NO" },
        );
        if let Some(rows) = &self.cross_check {
            let rows: Vec<Vec<String>> = rows
                .iter()
                .map(|c| {
                    let s: Vec<String> = c.simplex.iter().map(|p| format!("x{p}")).collect();
                    vec![s.join(","), fmt_num(c.ball_radius), fmt_num(c.local_radius)]
                })
                .collect();
            out.push_str(&format!("\nstar cross-check\n{}", table(&["simplex", "ball radius", "local radius"], &rows)));
        }
        out
    }
}

pub fn cmd_pointcloud(cloud: &PointCloud, settings: &Settings) -> Result<PointCloudReport, CliError> {
    let field = settings.field.unwrap_or_default();
    let f = cloud_consistency_filtration(cloud, settings.cap.unwrap_or(DEFAULT_POINT_CAP)).map_err(cloud_error)?;
    let pipeline = filtration_barcode(&f, field, 1).map_err(cech_error)?;
    let oracle = oracle_barcode(cloud, 1);
    let names = |c: &PartialCover| -> Vec<Vec<String>> {
        c.member_points().iter().map(|m| m.iter().map(|p| format!("x{p}")).collect()).collect()
    };
    let cross_check = if cloud.len() <= CROSS_CHECK_POINTS {
        Some(cross_check(cloud, DEFAULT_OPENS_CAP).map_err(cloud_error)?)
    } else {
        None
    };
    Ok(PointCloudReport {
        n_points: cloud.len(),
        dim: cloud.dim(),
        field,
        breakpoints: f.breakpoints().to_vec(),
        covers: covers_out(&f, names, None),
        equal: pipeline.approx_eq(&oracle, COMPARE_TOL),
        pipeline,
        oracle,
        cross_check,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct InterleaveReport {
    pub radius_a: f64,
    pub radius_b: f64,
    pub bound: f64,
    pub field: FieldKind,
    /// Bottleneck distance per degree; infinite when the numbers of
    /// infinite bars differ.
    pub bottleneck: Vec<f64>,
    pub stable: bool,
}

impl InterleaveReport {
    pub fn to_json(&self, f: &NumFormat) -> Json {
        json!({
            "consistency_radius": [f.num(self.radius_a), f.num(self.radius_b)],
            "interleaving_bound": f.num(self.bound),
            "field": self.field,
            "bottleneck": f.nums(&self.bottleneck),
            "stable": self.stable,
        })
    }

    pub fn to_text(&self) -> String {
        let mut rows = vec![
            vec!["consistency radius (first)".into(), fmt_num(self.radius_a)],
            vec!["consistency radius (second)".into(), fmt_num(self.radius_b)],
            vec!["interleaving bound".into(), fmt_num(self.bound)],
        ];
        for (k, d) in self.bottleneck.iter().enumerate() {
            rows.push(vec![format!("bottleneck, degree {k}"), fmt_num(*d)]);
        }
        rows.push(vec!["bottleneck ≤ bound".into(), if self.stable { "yes" } else { "NO" }.into()]);
        table(&["quantity", "value"], &rows)
    }
}

pub fn cmd_interleave(a: &ProblemFile, b: &ProblemFile, settings: &Settings) -> Result<InterleaveReport, CliError> {
    let (ra, rb) = (resolve(a, settings)?, resolve(b, settings)?);
    if ra.sheaf.space().id() != rb.sheaf.space().id() {
        return Err(CliError::SpaceMismatch);
    }
    let fa = consistency_filtration(&ra.sheaf, &ra.assignment).map_err(filtration_error)?;
    let fb = consistency_filtration(&rb.sheaf, &rb.assignment).map_err(filtration_error)?;
    let bound = interleaving_upper_bound(&fa, &fb).map_err(filtration_error)?;
    let cap = ra.degree_cap.max(rb.degree_cap);
    let da = filtration_barcode(&fa, ra.field, cap).map_err(cech_error)?;
    let db = filtration_barcode(&fb, ra.field, cap).map_err(cech_error)?;
    let bottleneck: Vec<f64> = (0..=cap)
        .map(|k| match bottleneck(&da, &db, k) {
            Ok(d) => Ok(d),
            Err(CechError::InfiniteMismatch { .. }) => Ok(f64::INFINITY),
            Err(e) => Err(cech_error(e)),
        })
        .collect::<Result<_, _>>()?;
    Ok(InterleaveReport {
        radius_a: ra.sheaf.consistency_radius(&ra.assignment).map_err(sheaf_error)?,
        radius_b: rb.sheaf.consistency_radius(&rb.assignment).map_err(sheaf_error)?,
        stable: bottleneck.iter().all(|&d| d <= bound + COMPARE_TOL),
        bound,
        field: ra.field,
        bottleneck,
    })
}

/// Renders a report per the settings: plot CSV, JSON or tables.
pub fn render(json: Json, text: String, plot: Option<&PersistenceDiagram>, settings: &Settings) -> String {
    match plot {
        Some(d) if settings.plot_data => plot_csv(d),
        _ if settings.json => serde_json::to_string_pretty(&json).expect("reports serialize") + "\n",
        _ => text,
    }
}

/// Loads a problem file from disk.
pub fn load_problem(path: &Path) -> Result<ProblemFile, CliError> {
    ProblemFile::read(path)
}
