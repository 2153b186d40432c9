//! Command execution. Outputs are written into a staging directory next to
//! `run.out` and moved into place only when the command succeeds.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use floq::invariants::composite_invariants;
use floq::io::{self, parse_params, parse_real, RunConfig, F};
use floq::lab::{self, Axis, Perturbation, RobustnessSpec, ScanKind, ScanSpec, TrajectorySpec};
use floq::model::{
    floquet_x_realspace, realspace_h, Boundary, ChainModel, Deltas, ModelParams, Protocol,
};
use floq::modes::{self, Place, Target};
use floq::spectral::default_ipr_min;

use crate::Failure;

type Res<T> = Result<T, Failure>;

fn invalid(msg: impl Into<String>) -> Failure {
    Failure::Validation(msg.into())
}

struct Stage {
    dir: PathBuf,
    out: PathBuf,
    files: Vec<String>,
}

impl Stage {
    fn new(out: &Path) -> Res<Stage> {
        let name = out.file_name().and_then(|n| n.to_str()).unwrap_or("out");
        let parent = out.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
        let dir = parent.join(format!(".{name}.staging-{}", std::process::id()));
        fs::create_dir_all(&dir).map_err(|e| Failure::Internal(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Stage { dir, out: out.to_path_buf(), files: vec![] })
    }

    fn create(&mut self, name: &str) -> Res<BufWriter<File>> {
        let f = File::create(self.dir.join(name)).map_err(|e| Failure::Internal(format!("{name}: {e}")))?;
        self.files.push(name.to_string());
        Ok(BufWriter::new(f))
    }

    fn text(&mut self, name: &str, body: &str) -> Res<()> {
        let mut w = self.create(name)?;
        w.write_all(body.as_bytes()).map_err(io_fail)?;
        w.flush().map_err(io_fail)
    }

    fn commit(self) -> Res<()> {
        fs::create_dir_all(&self.out).map_err(io_fail)?;
        for f in &self.files {
            fs::rename(self.dir.join(f), self.out.join(f)).map_err(io_fail)?;
        }
        fs::remove_dir_all(&self.dir).map_err(io_fail)
    }

    fn abandon(self) {
        let _ = fs::remove_dir_all(&self.dir);
    }
}

fn io_fail(e: std::io::Error) -> Failure {
    Failure::Internal(format!("write failed: {e}"))
}

fn flush(mut w: BufWriter<File>) -> Res<()> {
    w.flush().map_err(io_fail)
}

pub fn execute(mut cfg: RunConfig) -> Res<()> {
    cfg.set_default("run.out", "out")?;
    let out = PathBuf::from(cfg.get("run.out").unwrap_or("out"));
    let mut stage = Stage::new(&out)?;
    match dispatch(&mut cfg, &mut stage) {
        Ok(p) => {
            stage.text("manifest.cfg", &io::manifest(&cfg, p.as_ref()))?;
            stage.commit()
        }
        Err(e) => {
            stage.abandon();
            Err(e)
        }
    }
}

fn dispatch(cfg: &mut RunConfig, stage: &mut Stage) -> Res<Option<ModelParams>> {
    let command = cfg.get("run.command").unwrap_or("").to_string();
    match command.as_str() {
        "spectrum" => spectrum(cfg, stage).map(Some),
        "invariants" => invariants(cfg, stage).map(Some),
        "phase-diagram" => phase_diagram(cfg, stage).map(|_| None),
        "corner-modes" => corner_modes(cfg, stage).map(Some),
        "analytic-modes" => analytic_modes(cfg, stage).map(Some),
        "verify-bcc" => verify_bcc(cfg, stage),
        "trajectory" => trajectory(cfg, stage).map(|_| None),
        "disorder-sweep" => disorder_sweep(cfg, stage).map(Some),
        other => Err(invalid(format!("unknown command '{other}'"))),
    }
}

// ---------------------------------------------------------------- options

fn lengths(cfg: &mut RunConfig, default: usize) -> Res<(usize, usize)> {
    cfg.set_default("lattice.lx", default.to_string())?;
    cfg.set_default("lattice.ly", default.to_string())?;
    let lx = cfg.usize("lattice.lx")?.unwrap_or(default);
    let ly = cfg.usize("lattice.ly")?.unwrap_or(default);
    if lx < 2 || ly < 2 {
        return Err(invalid(format!("lattice lengths ({lx}, {ly}) must be at least 2 cells")));
    }
    Ok((lx, ly))
}

fn parse_bc(s: &str) -> Res<(Boundary, Boundary)> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    match parts.as_slice() {
        [x, y] => match (Boundary::parse(x), Boundary::parse(y)) {
            (Some(x), Some(y)) => Ok((x, y)),
            _ => Err(invalid(format!("bad boundary pair '{s}'"))),
        },
        _ => Err(invalid(format!("boundary conditions need the form x,y: '{s}'"))),
    }
}

fn bc(cfg: &mut RunConfig) -> Res<(Boundary, Boundary)> {
    cfg.set_default("lattice.bc", "open,open")?;
    parse_bc(cfg.get("lattice.bc").unwrap_or("open,open"))
}

fn eps(cfg: &mut RunConfig, default: &str) -> Res<f64> {
    cfg.set_default("tol.eps", default)?;
    let e = cfg.real("tol.eps")?.unwrap_or(1e-8);
    if !(e > 0.0) {
        return Err(invalid("tol.eps must be positive"));
    }
    Ok(e)
}

fn ipr_min(cfg: &RunConfig, spec: &floq::spectral::Spectrum) -> Res<f64> {
    Ok(cfg.real("tol.ipr_min")?.unwrap_or_else(|| default_ipr_min(spec)))
}

fn target(cfg: &mut RunConfig, key: &str) -> Res<Target> {
    cfg.set_default(key, "0")?;
    match cfg.get(key).unwrap_or("0") {
        "0" | "zero" => Ok(Target::Zero),
        "pi" | "π" => Ok(Target::Pi),
        t => Err(invalid(format!("{key}: target must be 0 or pi, got '{t}'"))),
    }
}

fn angle_pairs(s: &str) -> Res<Vec<(f64, f64)>> {
    s.split(';')
        .filter(|t| !t.trim().is_empty())
        .map(|t| match t.split_once(':') {
            Some((a, b)) => Ok((parse_real(a)?, parse_real(b)?)),
            None => Err(invalid(format!("expected theta:phi, got '{t}'"))),
        })
        .collect()
}

fn summary(msg: String) {
    println!("{msg}");
}

// ---------------------------------------------------------------- commands

fn spectrum(cfg: &mut RunConfig, stage: &mut Stage) -> Res<ModelParams> {
    let p = parse_params(cfg)?;
    let l = lengths(cfg, 40)?;
    let bc = bc(cfg)?;
    let eps = eps(cfg, "1e-8")?;
    let spec = lab::clean_spectrum(&p, l, bc)?;
    let mut w = stage.create("spectrum.csv")?;
    io::write_spectrum_csv(&mut w, &spec)?;
    flush(w)?;
    if cfg.bool("run.vectors")?.unwrap_or(false) {
        let op = lab::clean_operator(&p, l, bc)?;
        let vecs = (0..spec.len())
            .map(|i| spec.vector(i).ok_or_else(|| invalid("eigenvectors are not available for mixed boundaries")))
            .collect::<Res<Vec<_>>>()?;
        let mut w = stage.create("vectors.csv")?;
        io::write_modes_csv(&mut w, op.basis(), &vecs)?;
        flush(w)?;
    }
    let imin = ipr_min(cfg, &spec)?;
    let n0 = floq::spectral::count_modes(&spec, 0.0, eps, imin);
    let npi = floq::spectral::count_modes(&spec, std::f64::consts::PI, eps, imin);
    summary(format!("{} states; localized modes near 0: {n0}, near pi: {npi}", spec.len()));
    Ok(p)
}

fn invariants(cfg: &mut RunConfig, stage: &mut Stage) -> Res<ModelParams> {
    let p = parse_params(cfg)?;
    let l = lengths(cfg, 40)?;
    let eps = eps(cfg, "1e-8")?;
    let c = composite_invariants(&p)?;
    let spec = lab::clean_spectrum(&p, l, (Boundary::Open, Boundary::Open))?;
    let observed = match cfg.real("tol.ipr_min")? {
        Some(m) => (
            floq::spectral::count_modes(&spec, 0.0, eps, m),
            if p.protocol.is_kicked() { floq::spectral::count_modes(&spec, std::f64::consts::PI, eps, m) } else { 0 },
        ),
        None => lab::observed_counts(&spec, &p, eps),
    };
    stage.text("invariants.json", &io::to_json(&io::InvariantsJson::new(&c, Some(observed)))?)?;
    summary(format!("omega = {:?}, predicted N = {:?}, observed N = {observed:?}", c.omega_pair, c.predicted));
    Ok(p)
}

fn parse_axis(s: &str, centered: bool) -> Res<Axis> {
    let parts: Vec<&str> = s.split(':').collect();
    let [lo, hi, n] = parts.as_slice() else {
        return Err(invalid(format!("axis must be lo:hi:n, got '{s}'")));
    };
    let n: usize = n.trim().parse().map_err(|_| invalid(format!("axis count '{n}'")))?;
    let (lo, hi) = (parse_real(lo)?, parse_real(hi)?);
    if n == 0 || !(hi > lo) {
        return Err(invalid(format!("axis '{s}' needs n >= 1 and hi > lo")));
    }
    Ok(if centered { Axis::centered(lo, hi, n) } else { Axis::endpoints(lo, hi, n) })
}

fn phase_diagram(cfg: &mut RunConfig, stage: &mut Stage) -> Res<()> {
    cfg.set_default("scan.kind", "theta-phi")?;
    cfg.set_default("scan.centered", "false")?;
    let centered = cfg.bool("scan.centered")?.unwrap_or(false);
    let kind_name = cfg.get("scan.kind").unwrap_or("theta-phi").to_string();
    let need = |cfg: &mut RunConfig, key: &str, default: &str| -> Res<f64> {
        cfg.set_default(key, default)?;
        Ok(cfg.real(key)?.unwrap_or(0.0))
    };
    let (kind, da, db) = match kind_name.as_str() {
        "theta-phi" => (ScanKind::ThetaPhi, "0:2pi:101", "0:2pi:101"),
        "jx1-phi" => {
            let jx0 = need(cfg, "model.jx0", "pi/2")?;
            let jx1p = need(cfg, "model.jx1p", "pi/2")?;
            (ScanKind::Jx1Phi { jx0, jx1p }, "0:3pi:121", "0:2pi:101")
        }
        "jx0-jx1" => {
            cfg.set_default("model.protocol", "kicked_v1")?;
            let protocol = Protocol::parse(cfg.get("model.protocol").unwrap_or(""))
                .filter(|p| *p != Protocol::KickedV2)
                .ok_or_else(|| invalid("jx0-jx1 scans take protocol static or kicked_v1"))?;
            let jy0 = need(cfg, "model.jy0", "pi/4")?;
            let jy1 = need(cfg, "model.jy1", "3pi/4")?;
            (ScanKind::Jx0Jx1 { protocol, jy0, jy1 }, "0:2pi:101", "0:2pi:101")
        }
        "static" => {
            let jx0 = need(cfg, "model.jx0", "0.5")?;
            let jy0 = need(cfg, "model.jy0", "0.5")?;
            (ScanKind::StaticJx1Jy1 { jx0, jy0 }, "-2:2:81", "-2:2:81")
        }
        k => return Err(invalid(format!("unknown scan kind '{k}'"))),
    };
    cfg.set_default("scan.a", da)?;
    cfg.set_default("scan.b", db)?;
    let a = parse_axis(cfg.get("scan.a").unwrap_or(da), centered)?;
    let b = parse_axis(cfg.get("scan.b").unwrap_or(db), centered)?;
    let grid = lab::scan_phase_diagram(&ScanSpec { kind, a, b })?;
    let mut w = stage.create("scan.csv")?;
    io::write_scan_csv(&mut w, &grid)?;
    flush(w)?;
    let mut w = stage.create("boundaries.csv")?;
    io::write_boundaries_csv(&mut w, &grid)?;
    flush(w)?;
    let regions = grid.components.iter().max().map_or(0, |m| m + 1);
    summary(format!(
        "labels {:?}; {regions} connected regions; {} boundary edges; {} sandwich violations",
        grid.labels(),
        grid.boundaries.len(),
        grid.sandwich_violations().len()
    ));
    Ok(())
}

#[derive(serde::Serialize)]
struct CornerModesJson {
    target: &'static str,
    count: usize,
    predicted: usize,
    ipr_min: F,
    quasienergies: Vec<F>,
    iprs: Vec<F>,
    corner_fractions: Vec<F>,
}

fn corner_modes(cfg: &mut RunConfig, stage: &mut Stage) -> Res<ModelParams> {
    let p = parse_params(cfg)?;
    let l = lengths(cfg, 40)?;
    let bcs = bc(cfg)?;
    if bcs != (Boundary::Open, Boundary::Open) {
        return Err(invalid("corner modes need open boundaries in both directions"));
    }
    let eps = eps(cfg, "1e-8")?;
    let t = target(cfg, "modes.target")?;
    let op = lab::clean_operator(&p, l, bcs)?;
    let spec = floq::spectral::eig(&op)?;
    let imin = ipr_min(cfg, &spec)?;
    let tv = if p.protocol.is_kicked() { t.value() } else { 0.0 };
    let idx = spec.select(tv, eps, imin);
    let vecs: Vec<_> = idx.iter().filter_map(|&i| spec.vector(i)).collect();
    let mut w = stage.create("modes.csv")?;
    io::write_modes_csv(&mut w, op.basis(), &vecs)?;
    flush(w)?;
    let mut w = stage.create("spectrum.csv")?;
    io::write_spectrum_csv(&mut w, &spec)?;
    flush(w)?;
    let c = composite_invariants(&p)?;
    let predicted = if t == Target::Zero { c.predicted.0 } else { c.predicted.1 };
    let body = CornerModesJson {
        target: t.name(),
        count: idx.len(),
        predicted,
        ipr_min: F(imin),
        quasienergies: idx.iter().map(|&i| F(spec.values[i])).collect(),
        iprs: idx.iter().map(|&i| F(spec.iprs[i])).collect(),
        corner_fractions: vecs.iter().map(|v| F(lab::corner_fraction(v, op.basis()))).collect(),
    };
    stage.text("corner_modes.json", &io::to_json(&body)?)?;
    summary(format!("{} corner modes at {} (predicted {predicted})", idx.len(), t.name()));
    Ok(p)
}

#[derive(serde::Serialize)]
struct AnalyticJson {
    place: &'static str,
    target: &'static str,
    decay_x: Option<F>,
    decay_y: Option<F>,
    normalizable: bool,
}

#[derive(serde::Serialize)]
struct AnalyticSetJson {
    modes: Vec<AnalyticJson>,
    /// Smallest singular value of the overlap with the numeric eigenspace.
    overlap: Option<F>,
}

fn parse_place(s: &str) -> Res<Option<Place>> {
    Ok(Some(match s {
        "corners" => return Ok(None),
        "L" => Place::L,
        "R" => Place::R,
        "B" => Place::B,
        "T" => Place::T,
        "LB" => Place::LB,
        "LT" => Place::LT,
        "RB" => Place::RB,
        "RT" => Place::RT,
        _ => return Err(invalid(format!("unknown place '{s}'"))),
    }))
}

fn analytic_modes(cfg: &mut RunConfig, stage: &mut Stage) -> Res<ModelParams> {
    let p = parse_params(cfg)?;
    let l = lengths(cfg, 40)?;
    let t = target(cfg, "modes.target")?;
    cfg.set_default("modes.place", "corners")?;
    let place = parse_place(cfg.get("modes.place").unwrap_or("corners"))?;
    let eps = eps(cfg, "1e-8")?;
    let kicked = p.protocol.is_kicked();
    let (built, basis) = match place {
        None | Some(Place::LB | Place::LT | Place::RB | Place::RT) => {
            let places: Vec<Place> = place.map_or(Place::CORNERS.to_vec(), |q| vec![q]);
            let built = places.iter().map(|&q| modes::corner_mode(q, t, &p, l)).collect::<floq::Result<Vec<_>>>()?;
            (built, *lab::clean_operator(&p, l, (Boundary::Open, Boundary::Open))?.basis())
        }
        Some(side @ (Place::L | Place::R)) => {
            let m = if kicked {
                modes::kicked_edge_mode(side, t, &p, l.0)?
            } else {
                modes::static_edge_mode(ChainModel::Cl, side, &p, l.0)?
            };
            let basis = if kicked {
                *floquet_x_realspace(l.0, Boundary::Open, &p)?.basis()
            } else {
                *realspace_h(ChainModel::Cl, l.0, Boundary::Open, &p)?.basis()
            };
            (vec![m], basis)
        }
        Some(side) => {
            if t != Target::Zero {
                return Err(invalid("SSH edge modes sit at zero energy"));
            }
            let m = modes::static_edge_mode(ChainModel::Ssh, side, &p, l.1)?;
            (vec![m], *realspace_h(ChainModel::Ssh, l.1, Boundary::Open, &p)?.basis())
        }
    };
    let vecs: Vec<_> = built.iter().map(|(_, v)| v.clone()).collect();
    let mut w = stage.create("modes.csv")?;
    io::write_modes_csv(&mut w, &basis, &vecs)?;
    flush(w)?;
    let corners = place.is_none();
    let overlap = if corners && built.iter().all(|(m, _)| m.normalizable) {
        let spec = lab::clean_spectrum(&p, l, (Boundary::Open, Boundary::Open))?;
        let q = modes::orthonormalize(&vecs)?;
        let tv = if kicked { t.value() } else { 0.0 };
        Some(F(modes::subspace_overlap(&q, &spec, tv, eps)?))
    } else {
        None
    };
    let body = AnalyticSetJson {
        modes: built
            .iter()
            .map(|(m, _)| AnalyticJson {
                place: m.place.name(),
                target: m.target.name(),
                decay_x: m.decay_x.map(F),
                decay_y: m.decay_y.map(F),
                normalizable: m.normalizable,
            })
            .collect(),
        overlap,
    };
    stage.text("analytic_modes.json", &io::to_json(&body)?)?;
    summary(format!(
        "{} analytic modes, normalizable: {}",
        built.len(),
        built.iter().all(|(m, _)| m.normalizable)
    ));
    Ok(p)
}

#[derive(serde::Serialize)]
struct BccJson {
    cells: [usize; 2],
    verdict: io::VerdictJson,
    decay_bound: F,
}

fn verify_bcc(cfg: &mut RunConfig, stage: &mut Stage) -> Res<Option<ModelParams>> {
    cfg.set_default("bcc.points", "table")?;
    let base = lengths(cfg, 40)?;
    let eps = eps(cfg, "1e-8")?;
    let spec = cfg.get("bcc.points").unwrap_or("table").to_string();
    let (points, single) = match spec.as_str() {
        "table" => (
            lab::table_points().into_iter().map(|(t, f)| ModelParams::from_angles(t, f, Protocol::KickedV1)).collect(),
            None,
        ),
        "current" => {
            let p = parse_params(cfg)?;
            (vec![p], Some(p))
        }
        list => (
            angle_pairs(list)?.into_iter().map(|(t, f)| ModelParams::from_angles(t, f, Protocol::KickedV1)).collect(),
            None,
        ),
    };
    let mut rows = vec![];
    let mut failed = vec![];
    for p in &points {
        // grow the lattice until the slowest corner-mode tail is negligible
        let decay = lab::decay_bound(p)?;
        let lx = lab::required_length(decay, base.0, 1e-8);
        let ly = lab::required_length(decay, base.1, 1e-8);
        let v = lab::verify_one(p, (lx, ly), eps)?;
        if !v.pass {
            failed.push(format!("{:?}: predicted {:?}, observed {:?}", v.params, v.predicted, v.observed));
        }
        rows.push(BccJson { cells: [lx, ly], verdict: (&v).into(), decay_bound: F(decay) });
    }
    stage.text("bcc.json", &io::to_json(&rows)?)?;
    if !failed.is_empty() {
        return Err(Failure::Internal(format!("bulk-corner correspondence fails at {}", failed.join("; "))));
    }
    summary(format!("{} points, all pass", rows.len()));
    Ok(single)
}

fn trajectory(cfg: &mut RunConfig, stage: &mut Stage) -> Res<()> {
    let l = lengths(cfg, 40)?;
    cfg.set_default("trajectory.samples", "20")?;
    cfg.set_default("trajectory.bc", "all")?;
    let samples = cfg.usize("trajectory.samples")?.unwrap_or(20);
    if samples == 0 {
        return Err(invalid("trajectory.samples must be positive"));
    }
    let mut spec = TrajectorySpec { samples_per_segment: samples, ..Default::default() };
    if let Some(w) = cfg.get("trajectory.waypoints") {
        spec.waypoints = angle_pairs(w)?;
        if spec.waypoints.len() < 2 {
            return Err(invalid("a trajectory needs at least two waypoints"));
        }
    }
    let combos = match cfg.get("trajectory.bc").unwrap_or("all") {
        "all" => lab::BC_COMBOS.to_vec(),
        s => vec![parse_bc(s)?],
    };
    for bc in combos {
        let pts = lab::trajectory_spectra(&spec, bc, l)?;
        let tag = format!("{}_{}", bc.0.name(), bc.1.name());
        let mut w = stage.create(&format!("trajectory_{tag}.csv"))?;
        io::write_trajectory_csv(&mut w, &pts)?;
        flush(w)?;
        let mut w = stage.create(&format!("trajectory_{tag}_summary.csv"))?;
        io::write_trajectory_summary_csv(&mut w, &pts)?;
        flush(w)?;
        let localized = pts.iter().filter(|p| p.n0 + p.npi > 0).count();
        summary(format!("{tag}: {} points, {localized} with localized modes at 0 or pi", pts.len()));
    }
    Ok(())
}

fn disorder_sweep(cfg: &mut RunConfig, stage: &mut Stage) -> Res<ModelParams> {
    let p = parse_params(cfg)?;
    let l = lengths(cfg, 20)?;
    let eps = eps(cfg, "1e-2")?;
    let t = target(cfg, "robust.target")?;
    let perturbation = match (cfg.get("robust.deltas"), cfg.get("robust.lambda")) {
        (Some(_), Some(_)) => return Err(invalid("give robust.deltas or robust.lambda, not both")),
        (None, None) => return Err(invalid("give robust.deltas or robust.lambda")),
        (Some(_), None) => {
            let d = cfg.reals("robust.deltas")?.unwrap_or_default();
            let [dx, dy, d1, d2] = d.as_slice() else {
                return Err(invalid("robust.deltas must be dx,dy,d1,d2"));
            };
            Perturbation::Deltas(Deltas { dx: *dx, dy: *dy, d1: *d1, d2: *d2 })
        }
        (None, Some(_)) => {
            cfg.set_default("robust.realizations", "10")?;
            cfg.set_default("robust.seed", "0")?;
            Perturbation::Disorder {
                lambda: cfg.real("robust.lambda")?.unwrap_or(0.0),
                realizations: cfg.usize("robust.realizations")?.unwrap_or(10),
                seed: cfg.u64("robust.seed")?.unwrap_or(0),
            }
        }
    };
    let stats = lab::robustness_experiment(&RobustnessSpec { base: p, target: t, perturbation, lengths: l, eps_tol: eps })?;
    stage.text("robustness.json", &io::to_json(&io::RobustnessJson::new(&p, t.name(), &stats))?)?;
    let counts: Vec<usize> = stats.realizations.iter().map(|r| r.count).collect();
    summary(format!("mode counts {counts:?}; retained fraction {}", stats.retained_fraction));
    Ok(p)
}
