//! JSON scenario files.
//!
//! Matrices are nested arrays, row-major. Vertex numbers are 1-based with
//! followers first: agents `1..=followers` are followers and the rest are
//! leaders.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::locate::{locate, Seg};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub dynamics: Dynamics,
    pub network: NetworkSpec,
    /// One row per agent.
    pub initial_states: Vec<Vec<f64>>,
    pub trigger: TriggerSpec,
    #[serde(default)]
    pub solver: SolverSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dynamics {
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    pub b: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    pub agents: usize,
    pub followers: usize,
    /// `[from, to, weight]`: `to` receives from `from`.
    #[serde(default)]
    pub follower_edges: Vec<(usize, usize, f64)>,
    /// `[follower, leader, weight]`
    #[serde(default)]
    pub leader_couplings: Vec<(usize, usize, f64)>,
}

/// A number, one number per follower, or a rule such as `"auto:0.9"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Policy {
    Value(f64),
    List(Vec<f64>),
    Rule(String),
}

impl Policy {
    /// Fraction `f` of `"auto:f"`, if this is such a rule.
    pub fn auto_fraction(&self) -> Option<Result<f64, String>> {
        match self {
            Policy::Rule(s) => Some(
                s.strip_prefix("auto:")
                    .and_then(|f| f.trim().parse::<f64>().ok())
                    .ok_or_else(|| {
                        format!("expected a number, a list or \"auto:<fraction>\", got \"{s}\"")
                    }),
            ),
            _ => None,
        }
    }

    /// Expands to one value per follower; `None` for rules.
    pub fn expand(&self, m: usize) -> Option<Result<Vec<f64>, String>> {
        match self {
            Policy::Value(v) => Some(Ok(vec![*v; m])),
            Policy::List(v) if v.len() == m => Some(Ok(v.clone())),
            Policy::List(v) => Some(Err(format!(
                "needs {m} entries (one per follower), got {}",
                v.len()
            ))),
            Policy::Rule(_) => None,
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Policy::Value(v) => write!(f, "{v}"),
            Policy::List(v) => write!(f, "{v:?}"),
            Policy::Rule(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TriggerSpec {
    /// `setc`, `setc-inst` or `detc`.
    pub mode: String,
    pub k: Policy,
    pub beta: f64,
    pub sigma: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detc: Option<DetcSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetcSpec {
    pub mu: Policy,
    pub xi: Policy,
    pub theta: Policy,
    pub phi0: Policy,
    #[serde(rename = "Theta")]
    pub phi_cap: Policy,
}

/// A number or a named rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Weight {
    Value(f64),
    Rule(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    /// `"auto"` selects `ς_R = η`.
    #[serde(default = "auto_weight")]
    pub varsigma_r: Weight,
    #[serde(default = "default_delta")]
    pub delta: f64,
    /// `"half"` selects half of the available margin.
    #[serde(default = "half_weight")]
    pub v1: Weight,
    #[serde(default = "default_step")]
    pub step: f64,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
}

fn auto_weight() -> Weight {
    Weight::Rule("auto".into())
}
fn half_weight() -> Weight {
    Weight::Rule("half".into())
}
fn default_delta() -> f64 {
    0.05
}
fn default_step() -> f64 {
    1e-3
}
fn default_horizon() -> f64 {
    30.0
}
fn default_decimation() -> usize {
    10
}

impl Default for SolverSpec {
    fn default() -> Self {
        Self {
            varsigma_r: auto_weight(),
            delta: default_delta(),
            v1: half_weight(),
            step: default_step(),
            horizon: default_horizon(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
    #[serde(default = "default_decimation")]
    pub decimation: usize,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            dir: None,
            decimation: default_decimation(),
        }
    }
}

/// A parsed file together with its text, for locating errors.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub file: ScenarioFile,
    pub origin: String,
    pub source: String,
}

impl Loaded {
    /// A validation error pointing at `path` in the source text.
    pub fn error(&self, path: &[Seg], message: impl Into<String>) -> CliError {
        CliError::Validation {
            file: self.origin.clone(),
            line: locate(&self.source, path),
            path: Seg::render(path),
            message: message.into(),
        }
    }
}

pub fn parse(origin: &str, source: &str) -> Result<Loaded, CliError> {
    let file: ScenarioFile = serde_json::from_str(source).map_err(|e| CliError::Parse {
        file: origin.to_string(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let loaded = Loaded {
        file,
        origin: origin.to_string(),
        source: source.to_string(),
    };
    validate(&loaded)?;
    Ok(loaded)
}

pub fn load(path: &Path) -> Result<Loaded, CliError> {
    let source = std::fs::read_to_string(path).map_err(|e| CliError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse(&path.display().to_string(), &source)
}

/// Canonical text of a scenario; reloads to an identical value.
pub fn to_json(file: &ScenarioFile) -> String {
    let mut s = serde_json::to_string_pretty(file).expect("scenario serializes");
    s.push('\n');
    s
}

fn key(k: &'static str) -> Seg {
    Seg::Key(k.to_string())
}

fn check_matrix(
    l: &Loaded,
    path: &[Seg],
    m: &[Vec<f64>],
    rows: Option<usize>,
    what: &str,
) -> Result<usize, CliError> {
    if m.is_empty() || m[0].is_empty() {
        return Err(l.error(path, format!("{what} must be a non-empty nested array")));
    }
    if let Some(r) = rows {
        if m.len() != r {
            return Err(l.error(path, format!("{what} needs {r} rows, got {}", m.len())));
        }
    }
    let cols = m[0].len();
    for (i, row) in m.iter().enumerate() {
        let mut p = path.to_vec();
        p.push(Seg::Index(i));
        if row.len() != cols {
            return Err(l.error(
                &p,
                format!("row has {} entries, expected {cols}", row.len()),
            ));
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(l.error(&p, "entries must be finite"));
        }
    }
    Ok(cols)
}

fn check_policy(
    l: &Loaded,
    path: &[Seg],
    p: &Policy,
    m: usize,
    lower_open: bool,
    allow_auto: bool,
) -> Result<(), CliError> {
    if let Some(frac) = p.auto_fraction() {
        let f = frac.map_err(|e| l.error(path, e))?;
        if !allow_auto {
            return Err(l.error(path, "\"auto\" is not available for this parameter"));
        }
        if !(f > 0.0 && f <= 1.0) {
            return Err(l.error(path, format!("auto fraction must lie in (0, 1], got {f}")));
        }
        return Ok(());
    }
    let values = p
        .expand(m)
        .expect("not a rule")
        .map_err(|e| l.error(path, e))?;
    for v in values {
        let ok = if lower_open { v > 0.0 } else { v >= 0.0 };
        if !ok || !v.is_finite() {
            let bound = if lower_open {
                "positive"
            } else {
                "nonnegative"
            };
            return Err(l.error(path, format!("must be {bound} and finite, got {v}")));
        }
    }
    Ok(())
}

/// Structural checks that need no numerics beyond the file itself.
pub fn validate(l: &Loaded) -> Result<(), CliError> {
    let f = &l.file;
    let n = check_matrix(l, &[key("dynamics"), key("A")], &f.dynamics.a, None, "A")?;
    if f.dynamics.a.len() != n {
        return Err(l.error(
            &[key("dynamics"), key("A")],
            format!("A must be square, got {} x {n}", f.dynamics.a.len()),
        ));
    }
    check_matrix(l, &[key("dynamics"), key("B")], &f.dynamics.b, Some(n), "B")?;

    let net = &f.network;
    if net.followers == 0 || net.agents <= net.followers {
        return Err(l.error(
            &[key("network"), key("followers")],
            "need at least one follower and one leader",
        ));
    }
    for (i, &(from, to, w)) in net.follower_edges.iter().enumerate() {
        let p = [key("network"), key("follower_edges"), Seg::Index(i)];
        if from == 0 || to == 0 || from > net.followers || to > net.followers {
            return Err(l.error(
                &p,
                format!("follower edges join followers 1..={}", net.followers),
            ));
        }
        if from == to {
            return Err(l.error(&p, "self-loops are not allowed"));
        }
        if !(w > 0.0 && w.is_finite()) {
            return Err(l.error(&p, "weights must be positive"));
        }
    }
    for (i, &(fo, le, w)) in net.leader_couplings.iter().enumerate() {
        let p = [key("network"), key("leader_couplings"), Seg::Index(i)];
        if fo == 0 || fo > net.followers || le <= net.followers || le > net.agents {
            return Err(l.error(
                &p,
                format!(
                    "couplings are [follower in 1..={}, leader in {}..={}, weight]",
                    net.followers,
                    net.followers + 1,
                    net.agents
                ),
            ));
        }
        if !(w > 0.0 && w.is_finite()) {
            return Err(l.error(&p, "weights must be positive"));
        }
    }

    let p = [key("initial_states")];
    check_matrix(l, &p, &f.initial_states, Some(net.agents), "initial_states")?;
    if f.initial_states[0].len() != n {
        return Err(l.error(&p, format!("each initial state needs {n} entries")));
    }

    let m = net.followers;
    let t = &f.trigger;
    if t.mode.parse::<etc_stab::sim::TriggerMode>().is_err() {
        return Err(l.error(
            &[key("trigger"), key("mode")],
            format!(
                "unknown mode \"{}\" (expected setc, setc-inst or detc)",
                t.mode
            ),
        ));
    }
    check_policy(l, &[key("trigger"), key("k")], &t.k, m, false, true)?;
    if let Some(Ok(frac)) = t.k.auto_fraction() {
        if frac >= 1.0 {
            return Err(l.error(
                &[key("trigger"), key("k")],
                "auto fraction for k must be below 1",
            ));
        }
    }
    if !(t.beta >= 0.0 && t.beta.is_finite()) {
        return Err(l.error(&[key("trigger"), key("beta")], "must be nonnegative"));
    }
    if !(t.sigma > 0.0 && t.sigma.is_finite()) {
        return Err(l.error(&[key("trigger"), key("sigma")], "must be positive"));
    }
    if let Some(d) = &t.detc {
        let base = [key("trigger"), key("detc")];
        let at = |k: &'static str| {
            let mut p = base.to_vec();
            p.push(key(k));
            p
        };
        check_policy(l, &at("mu"), &d.mu, m, true, false)?;
        check_policy(l, &at("xi"), &d.xi, m, true, true)?;
        check_policy(l, &at("theta"), &d.theta, m, true, false)?;
        check_policy(l, &at("phi0"), &d.phi0, m, true, false)?;
        check_policy(l, &at("Theta"), &d.phi_cap, m, true, false)?;
        let phi0 = d.phi0.expand(m).unwrap().unwrap();
        let cap = d.phi_cap.expand(m).unwrap().unwrap();
        if let Some(i) = (0..m).find(|&i| !(cap[i] > phi0[i])) {
            return Err(l.error(
                &at("Theta"),
                format!("follower {}: Theta must exceed phi0", i + 1),
            ));
        }
    } else if t.mode == "detc" {
        return Err(l.error(&[key("trigger")], "mode detc needs a \"detc\" section"));
    }

    let s = &f.solver;
    let sp = |k: &'static str| [key("solver"), key(k)];
    match &s.varsigma_r {
        Weight::Value(v) if !(*v > 0.0 && v.is_finite()) => {
            return Err(l.error(&sp("varsigma_r"), format!("must be positive, got {v}")));
        }
        Weight::Rule(r) if r != "auto" => {
            return Err(l.error(
                &sp("varsigma_r"),
                format!("expected a number or \"auto\", got \"{r}\""),
            ));
        }
        _ => {}
    }
    match &s.v1 {
        Weight::Value(v) if !(*v > 0.0 && v.is_finite()) => {
            return Err(l.error(&sp("v1"), format!("must be positive, got {v}")));
        }
        Weight::Rule(r) if r != "half" => {
            return Err(l.error(
                &sp("v1"),
                format!("expected a number or \"half\", got \"{r}\""),
            ));
        }
        _ => {}
    }
    if !(s.delta > 0.0 && s.delta.is_finite()) {
        return Err(l.error(&sp("delta"), "must be positive"));
    }
    if !(s.horizon > 0.0 && s.horizon.is_finite()) {
        return Err(l.error(&sp("horizon"), "must be positive"));
    }
    if !(s.step > 0.0 && s.step <= s.horizon) {
        return Err(l.error(&sp("step"), "must be positive and not exceed the horizon"));
    }
    if f.output.decimation == 0 {
        return Err(l.error(&[key("output"), key("decimation")], "must be at least 1"));
    }
    Ok(())
}
