//! Run configuration (flat `namespace.key = value` text) and the CSV/JSON
//! output schemas.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::io::Write;

use serde::{Serialize, Serializer};
use serde_json::value::RawValue;

use crate::error::{Error, Result};
use crate::invariants::CompositeReport;
use crate::lab::{BccVerdict, RobustnessStats, ScanGrid, TrajectoryPoint};
use crate::model::{Basis, BasisLabel, ModelParams, Protocol};
use crate::spectral::Spectrum;

pub const SPECTRUM_HEADER: &str = "index,quasienergy,ipr";
pub const MODES_HEADER: &str = "cell_x,sub_x,cell_y,sub_y,probability,re,im";
pub const TRAJECTORY_HEADER: &str = "point,segment,theta,phi,index,quasienergy,ipr";
pub const TRAJECTORY_SUMMARY_HEADER: &str = "point,segment,theta,phi,max_ipr,n0,npi,gap0,gap_pi";

/// Float with 17 significant digits; non-finite values become `nan`/`inf`.
pub fn fmt17(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// JSON number written with 17 significant digits (`null` if not finite).
#[derive(Clone, Copy, Debug)]
pub struct F(pub f64);

impl Serialize for F {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if !self.0.is_finite() {
            return s.serialize_none();
        }
        let raw = RawValue::from_string(format!("{:.16e}", self.0)).map_err(serde::ser::Error::custom)?;
        raw.serialize(s)
    }
}

// ---------------------------------------------------------------- numbers

/// Parses a real number, accepting multiples of pi: `0.75pi`, `-pi`,
/// `3pi/4`, `pi/2`, `1.5*pi`.
pub fn parse_real(raw: &str) -> Result<f64> {
    let s: String = raw.trim().chars().filter(|c| !c.is_whitespace()).collect();
    let bad = || Error::InvalidInput(format!("cannot parse number '{raw}'"));
    let Some(pos) = s.find("pi") else {
        let v: f64 = s.parse().map_err(|_| bad())?;
        return if v.is_finite() { Ok(v) } else { Err(bad()) };
    };
    let (head, tail) = (&s[..pos], &s[pos + 2..]);
    let head = head.strip_suffix('*').unwrap_or(head);
    let coef = match head {
        "" | "+" => 1.0,
        "-" => -1.0,
        h => h.parse::<f64>().map_err(|_| bad())?,
    };
    let div = match tail {
        "" => 1.0,
        t => t.strip_prefix('/').ok_or_else(bad)?.parse::<f64>().map_err(|_| bad())?,
    };
    let v = coef * PI / div;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(bad())
    }
}

// ---------------------------------------------------------------- config

/// Flat key-value configuration. Keys are `namespace.key`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RunConfig {
    pub entries: BTreeMap<String, String>,
}

pub const KNOWN_KEYS: &[&str] = &[
    "run.command",
    "run.out",
    "run.vectors",
    "model.protocol",
    "model.theta",
    "model.phi",
    "model.jx0",
    "model.jx1",
    "model.jy0",
    "model.jy1",
    "model.jx1p",
    "lattice.lx",
    "lattice.ly",
    "lattice.bc",
    "tol.eps",
    "tol.ipr_min",
    "scan.kind",
    "scan.a",
    "scan.b",
    "scan.centered",
    "trajectory.samples",
    "trajectory.bc",
    "trajectory.waypoints",
    "bcc.points",
    "robust.lambda",
    "robust.realizations",
    "robust.seed",
    "robust.deltas",
    "robust.target",
    "modes.target",
    "modes.place",
    "code.version",
];

impl RunConfig {
    pub fn parse(text: &str) -> Result<RunConfig> {
        let mut entries = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(Error::InvalidInput(format!("config line {}: expected key = value", n + 1)));
            };
            let (k, v) = (k.trim(), v.trim());
            if !KNOWN_KEYS.contains(&k) {
                return Err(Error::InvalidInput(format!("config line {}: unknown key '{k}'", n + 1)));
            }
            if entries.insert(k.to_string(), v.to_string()).is_some() {
                return Err(Error::InvalidInput(format!("config line {}: duplicate key '{k}'", n + 1)));
            }
        }
        Ok(RunConfig { entries })
    }

    /// Sorted `key = value` lines.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) -> Result<()> {
        if !KNOWN_KEYS.contains(&key) {
            return Err(Error::InvalidInput(format!("unknown key '{key}'")));
        }
        let value = value.into();
        if value.contains('#') || value.contains('\n') {
            return Err(Error::InvalidInput(format!("value for '{key}' contains '#' or a newline")));
        }
        self.entries.insert(key.to_string(), value);
        Ok(())
    }

    /// Sets `key` only when absent.
    pub fn set_default(&mut self, key: &str, value: impl Into<String>) -> Result<()> {
        if !self.entries.contains_key(key) {
            self.set(key, value)?;
        }
        Ok(())
    }

    /// Overlays every entry of `other`.
    pub fn merge(&mut self, other: &RunConfig) {
        for (k, v) in &other.entries {
            self.entries.insert(k.clone(), v.clone());
        }
    }

    pub fn real(&self, key: &str) -> Result<Option<f64>> {
        self.get(key).map(parse_real).transpose()
    }

    pub fn usize(&self, key: &str) -> Result<Option<usize>> {
        self.get(key)
            .map(|v| v.parse::<usize>().map_err(|_| Error::InvalidInput(format!("{key}: '{v}' is not a count"))))
            .transpose()
    }

    pub fn u64(&self, key: &str) -> Result<Option<u64>> {
        self.get(key)
            .map(|v| v.parse::<u64>().map_err(|_| Error::InvalidInput(format!("{key}: '{v}' is not an integer"))))
            .transpose()
    }

    pub fn bool(&self, key: &str) -> Result<Option<bool>> {
        self.get(key)
            .map(|v| match v {
                "true" => Ok(true),
                "false" => Ok(false),
                _ => Err(Error::InvalidInput(format!("{key}: '{v}' is not true/false"))),
            })
            .transpose()
    }

    /// Comma-separated reals.
    pub fn reals(&self, key: &str) -> Result<Option<Vec<f64>>> {
        self.get(key).map(|v| v.split(',').map(parse_real).collect()).transpose()
    }
}

/// Model parameters from the `model.*` keys. The x couplings come either
/// from `theta` or from `jx0`/`jx1`, the y couplings from `phi` or
/// `jy0`/`jy1`; `jx1p` belongs to kicked_v2 only.
pub fn parse_params(cfg: &RunConfig) -> Result<ModelParams> {
    let protocol = match cfg.get("model.protocol") {
        None => Protocol::KickedV1,
        Some(s) => Protocol::parse(s).ok_or_else(|| Error::InvalidInput(format!("unknown protocol '{s}'")))?,
    };
    let pick = |angle: &str, a: &str, b: &str, x_dir: bool| -> Result<(f64, f64)> {
        let ang = cfg.real(&format!("model.{angle}"))?;
        let (ja, jb) = (cfg.real(&format!("model.{a}"))?, cfg.real(&format!("model.{b}"))?);
        match (ang, ja, jb) {
            (Some(t), None, None) => {
                let q = ModelParams::from_angles(t, t, protocol);
                Ok(if x_dir { (q.jx0, q.jx1) } else { (q.jy0, q.jy1) })
            }
            (None, Some(u), Some(v)) => Ok((u, v)),
            (Some(_), _, _) => Err(Error::InvalidInput(format!("{angle} given together with {a}/{b}"))),
            (None, None, None) => Err(Error::InvalidInput(format!("need {angle} or both {a} and {b}"))),
            _ => Err(Error::InvalidInput(format!("need both {a} and {b}"))),
        }
    };
    let (jx0, jx1) = pick("theta", "jx0", "jx1", true)?;
    let (jy0, jy1) = pick("phi", "jy0", "jy1", false)?;
    let jx1p = cfg.real("model.jx1p")?;
    let p = match (protocol, jx1p) {
        (Protocol::KickedV2, Some(k)) => ModelParams::kicked_v2(jx0, jx1, k, jy0, jy1),
        (Protocol::KickedV2, None) => return Err(Error::InvalidInput("kicked_v2 needs jx1p".into())),
        (_, Some(_)) => return Err(Error::InvalidInput("jx1p applies to kicked_v2 only".into())),
        (_, None) => ModelParams::new(protocol, jx0, jx1, jy0, jy1),
    };
    p.validate()?;
    Ok(p)
}

/// Manifest text: the resolved config, the code version, and the resolved
/// couplings as comments.
pub fn manifest(cfg: &RunConfig, p: Option<&ModelParams>) -> String {
    let mut c = cfg.clone();
    c.entries.insert("code.version".into(), env!("CARGO_PKG_VERSION").into());
    let mut out = String::from("# floq run manifest; rerun with: floq <command> --config <this file>\n");
    if let Some(p) = p {
        let _ = writeln!(
            out,
            "# resolved: protocol={} jx0={} jx1={} jy0={} jy1={} jx1p={}",
            p.protocol.name(),
            fmt17(p.jx0),
            fmt17(p.jx1),
            fmt17(p.jy0),
            fmt17(p.jy1),
            fmt17(p.jx1p)
        );
    }
    out.push_str(&c.render());
    out
}

// ---------------------------------------------------------------- csv

pub fn write_spectrum_csv(w: &mut impl Write, spec: &Spectrum) -> Result<()> {
    writeln!(w, "{SPECTRUM_HEADER}")?;
    for (i, (e, r)) in spec.values.iter().zip(&spec.iprs).enumerate() {
        writeln!(w, "{i},{},{}", fmt17(*e), fmt17(*r))?;
    }
    Ok(())
}

/// Mode vectors stacked in blocks of `basis.len()` rows, in the given order.
/// Chain bases leave the y columns empty.
pub fn write_modes_csv(w: &mut impl Write, basis: &Basis, vectors: &[faer::Col<faer::c64>]) -> Result<()> {
    writeln!(w, "{MODES_HEADER}")?;
    for v in vectors {
        if v.nrows() != basis.len() {
            return Err(Error::InvalidInput(format!("vector length {} vs basis {}", v.nrows(), basis.len())));
        }
        for (i, z) in v.iter().enumerate() {
            let (cx, sx, cy, sy) = match basis.label(i) {
                BasisLabel::Plane { cell_x, sub_x, cell_y, sub_y } => {
                    (cell_x.to_string(), sub_x.name(), cell_y.to_string(), sub_y.name())
                }
                BasisLabel::Chain { cell, sub } => (cell.to_string(), sub.name(), String::new(), ""),
            };
            writeln!(w, "{cx},{sx},{cy},{sy},{},{},{}", fmt17(z.norm_sqr()), fmt17(z.re), fmt17(z.im))?;
        }
    }
    Ok(())
}

pub fn scan_header(grid: &ScanGrid) -> String {
    let (a, b) = grid.spec.kind.axis_names();
    format!("{a},{b},omega_0,omega_pi,gap0,gap_pi")
}

pub fn write_scan_csv(w: &mut impl Write, grid: &ScanGrid) -> Result<()> {
    writeln!(w, "{}", scan_header(grid))?;
    for p in &grid.points {
        writeln!(w, "{},{},{},{},{},{}", fmt17(p.a), fmt17(p.b), p.label.0, p.label.1, fmt17(p.gaps.gap0), fmt17(p.gaps.gap_pi))?;
    }
    Ok(())
}

/// Boundary edges with the located critical point and its invariants.
pub fn write_boundaries_csv(w: &mut impl Write, grid: &ScanGrid) -> Result<()> {
    let (a, b) = grid.spec.kind.axis_names();
    writeln!(w, "{a},{b},omega_0,omega_pi,left_omega_0,left_omega_pi,right_omega_0,right_omega_pi")?;
    for e in &grid.boundaries {
        let (l, r) = (grid.points[e.from].label, grid.points[e.to].label);
        let (pa, pb) = e.at.map(|(x, y)| (fmt17(x), fmt17(y))).unwrap_or(("nan".into(), "nan".into()));
        let (c0, cp) = e.critical.map(|c| (c.0.to_string(), c.1.to_string())).unwrap_or_default();
        writeln!(w, "{pa},{pb},{c0},{cp},{},{},{},{}", l.0, l.1, r.0, r.1)?;
    }
    Ok(())
}

pub fn write_trajectory_csv(w: &mut impl Write, pts: &[TrajectoryPoint]) -> Result<()> {
    writeln!(w, "{TRAJECTORY_HEADER}")?;
    for (n, p) in pts.iter().enumerate() {
        let (th, ph) = (fmt17(p.theta), fmt17(p.phi));
        for (i, (e, r)) in p.spectrum.values.iter().zip(&p.spectrum.iprs).enumerate() {
            writeln!(w, "{n},{},{th},{ph},{i},{},{}", p.segment, fmt17(*e), fmt17(*r))?;
        }
    }
    Ok(())
}

pub fn write_trajectory_summary_csv(w: &mut impl Write, pts: &[TrajectoryPoint]) -> Result<()> {
    writeln!(w, "{TRAJECTORY_SUMMARY_HEADER}")?;
    for (n, p) in pts.iter().enumerate() {
        writeln!(
            w,
            "{n},{},{},{},{},{},{},{},{}",
            p.segment,
            fmt17(p.theta),
            fmt17(p.phi),
            fmt17(p.max_ipr),
            p.n0,
            p.npi,
            fmt17(p.gaps.gap0),
            fmt17(p.gaps.gap_pi)
        )?;
    }
    Ok(())
}

// ---------------------------------------------------------------- json

#[derive(Serialize)]
pub struct ParamsJson {
    pub protocol: &'static str,
    pub jx0: F,
    pub jx1: F,
    pub jy0: F,
    pub jy1: F,
    pub jx1p: F,
}

impl From<&ModelParams> for ParamsJson {
    fn from(p: &ModelParams) -> Self {
        ParamsJson { protocol: p.protocol.name(), jx0: F(p.jx0), jx1: F(p.jx1), jy0: F(p.jy0), jy1: F(p.jy1), jx1p: F(p.jx1p) }
    }
}

#[derive(Serialize)]
pub struct InvariantsJson {
    pub params: ParamsJson,
    pub w_pair: [F; 2],
    pub w_y: F,
    pub omega_x: [i32; 2],
    pub omega_y: i32,
    pub omega_pair: [i32; 2],
    pub closing_flag: &'static str,
    pub closing_y: &'static str,
    pub gap0: F,
    pub gap_pi: F,
    pub predicted: [usize; 2],
    pub observed: Option<[usize; 2]>,
    pub pass: Option<bool>,
    pub note: Option<String>,
}

impl InvariantsJson {
    pub fn new(c: &CompositeReport, observed: Option<(usize, usize)>) -> Self {
        InvariantsJson {
            params: (&c.params).into(),
            w_pair: [F(c.x.w_pair.0), F(c.x.w_pair.1)],
            w_y: F(c.w_y),
            omega_x: [c.x.omega_pair.0, c.x.omega_pair.1],
            omega_y: c.omega_y,
            omega_pair: [c.omega_pair.0, c.omega_pair.1],
            closing_flag: c.x.closing.name(),
            closing_y: c.closing_y.name(),
            gap0: F(c.x.gap_report.gap0),
            gap_pi: F(c.x.gap_report.gap_pi),
            predicted: [c.predicted.0, c.predicted.1],
            observed: observed.map(|o| [o.0, o.1]),
            pass: observed.map(|o| o == c.predicted),
            note: c.x.note.clone(),
        }
    }
}

#[derive(Serialize)]
pub struct VerdictJson {
    pub params: ParamsJson,
    pub omega_pair: [i32; 2],
    pub predicted: [usize; 2],
    pub observed: [usize; 2],
    pub pass: bool,
}

impl From<&BccVerdict> for VerdictJson {
    fn from(v: &BccVerdict) -> Self {
        VerdictJson {
            params: (&v.params).into(),
            omega_pair: [v.omega_pair.0, v.omega_pair.1],
            predicted: [v.predicted.0, v.predicted.1],
            observed: [v.observed.0, v.observed.1],
            pass: v.pass,
        }
    }
}

#[derive(Serialize)]
pub struct RealizationJson {
    pub seed: Option<u64>,
    pub count: usize,
    pub quasienergies: Vec<F>,
    pub mode_iprs: Vec<F>,
    pub median_ipr: F,
    pub corner_fraction: F,
    pub peak_site: Option<[String; 4]>,
}

#[derive(Serialize)]
pub struct RobustnessJson {
    pub params: ParamsJson,
    pub target: &'static str,
    pub retained_fraction: F,
    pub realizations: Vec<RealizationJson>,
}

impl RobustnessJson {
    pub fn new(p: &ModelParams, target: &'static str, s: &RobustnessStats) -> Self {
        let realizations = s
            .realizations
            .iter()
            .map(|r| RealizationJson {
                seed: r.seed,
                count: r.count,
                quasienergies: r.quasienergies.iter().map(|&x| F(x)).collect(),
                mode_iprs: r.mode_iprs.iter().map(|&x| F(x)).collect(),
                median_ipr: F(r.median_ipr),
                corner_fraction: F(r.corner_fraction),
                peak_site: r.peak_site.and_then(|l| match l {
                    BasisLabel::Plane { cell_x, sub_x, cell_y, sub_y } => Some([
                        cell_x.to_string(),
                        sub_x.name().to_string(),
                        cell_y.to_string(),
                        sub_y.name().to_string(),
                    ]),
                    BasisLabel::Chain { .. } => None,
                }),
            })
            .collect();
        RobustnessJson { params: p.into(), target, retained_fraction: F(s.retained_fraction), realizations }
    }
}

pub fn to_json<T: Serialize>(v: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| Error::InvalidInput(format!("json: {e}")))?;
    s.push('\n');
    Ok(s)
}
