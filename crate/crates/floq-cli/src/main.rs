//! `floq`: command-line driver. Every command resolves its flags and an
//! optional config file into one flat configuration, runs, and writes its
//! outputs plus a manifest into `--out`.

mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use floq::io::RunConfig;

#[derive(Parser)]
#[command(name = "floq", version, about = "Floquet higher-order topology in the kicked Creutz-ladder/SSH lattice")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Quasienergy (or energy) spectrum with IPRs.
    Spectrum(Common),
    /// Phase-diagram scan with region labels and boundaries.
    PhaseDiagram(ScanArgs),
    /// Winding numbers, generalized invariants and predicted corner-mode counts.
    Invariants(Common),
    /// Numeric corner modes at 0 or pi.
    CornerModes(ModeArgs),
    /// Predicted against observed corner-mode counts over a set of points.
    VerifyBcc(BccArgs),
    /// Spectra along a path of critical lines under the four boundary combinations.
    Trajectory(TrajArgs),
    /// Corner modes under symmetry-breaking couplings or hopping disorder.
    DisorderSweep(RobustArgs),
    /// Closed-form edge and corner modes.
    AnalyticModes(ModeArgs),
}

#[derive(Args, Default)]
struct Common {
    /// Config file (`namespace.key = value`); flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<String>,
    #[arg(long)]
    protocol: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    theta: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    phi: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    jx0: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    jx1: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    jy0: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    jy1: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    jx1p: Option<String>,
    /// Cells in both directions.
    #[arg(long = "L")]
    l: Option<String>,
    #[arg(long)]
    lx: Option<String>,
    #[arg(long)]
    ly: Option<String>,
    /// Boundary conditions `x,y`, each `open` or `periodic`.
    #[arg(long)]
    bc: Option<String>,
    /// Quasienergy tolerance for mode counting.
    #[arg(long)]
    eps_tol: Option<String>,
    /// IPR threshold for mode counting (default: ten times the median).
    #[arg(long)]
    ipr_min: Option<String>,
    /// Also write eigenvectors.
    #[arg(long)]
    vectors: bool,
}

#[derive(Args)]
struct ScanArgs {
    #[command(flatten)]
    common: Common,
    /// theta-phi, jx1-phi, jx0-jx1 or static.
    #[arg(long)]
    kind: Option<String>,
    /// First axis `lo:hi:n`.
    #[arg(long, allow_hyphen_values = true)]
    a: Option<String>,
    /// Second axis `lo:hi:n`.
    #[arg(long, allow_hyphen_values = true)]
    b: Option<String>,
    /// Cell-centred grid points instead of endpoint-inclusive ones.
    #[arg(long)]
    centered: bool,
}

#[derive(Args)]
struct ModeArgs {
    #[command(flatten)]
    common: Common,
    /// `0` or `pi`.
    #[arg(long)]
    target: Option<String>,
    /// Edge or corner: L, R, B, T, LB, LT, RB, RT, or `corners`.
    #[arg(long)]
    place: Option<String>,
}

#[derive(Args)]
struct BccArgs {
    #[command(flatten)]
    common: Common,
    /// `table`, `current`, or `theta:phi;theta:phi;...`.
    #[arg(long)]
    points: Option<String>,
}

#[derive(Args)]
struct TrajArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    samples: Option<String>,
    /// `theta:phi;theta:phi;...`.
    #[arg(long)]
    waypoints: Option<String>,
    /// Boundary combination `x,y`, or `all`.
    #[arg(long = "trajectory-bc")]
    trajectory_bc: Option<String>,
}

#[derive(Args)]
struct RobustArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    lambda: Option<String>,
    /// `dx,dy,d1,d2`.
    #[arg(long)]
    deltas: Option<String>,
    #[arg(long)]
    realizations: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    target: Option<String>,
}

enum Failure {
    Validation(String),
    Internal(String),
}

impl From<floq::Error> for Failure {
    fn from(e: floq::Error) -> Self {
        if e.is_validation() {
            Failure::Validation(e.to_string())
        } else {
            Failure::Internal(e.to_string())
        }
    }
}

fn common_config(c: &Common, command: &str) -> Result<RunConfig, Failure> {
    let mut cfg = match &c.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::Validation(format!("cannot read {}: {e}", path.display())))?;
            RunConfig::parse(&text)?
        }
        None => RunConfig::default(),
    };
    cfg.entries.remove("code.version");
    if let Some(prev) = cfg.get("run.command") {
        if prev != command {
            return Err(Failure::Validation(format!("config is for '{prev}', not '{command}'")));
        }
    }
    cfg.set("run.command", command)?;
    let pairs = [
        ("run.out", &c.out),
        ("model.protocol", &c.protocol),
        ("model.theta", &c.theta),
        ("model.phi", &c.phi),
        ("model.jx0", &c.jx0),
        ("model.jx1", &c.jx1),
        ("model.jy0", &c.jy0),
        ("model.jy1", &c.jy1),
        ("model.jx1p", &c.jx1p),
        ("lattice.lx", &c.l),
        ("lattice.ly", &c.l),
        ("lattice.bc", &c.bc),
        ("tol.eps", &c.eps_tol),
        ("tol.ipr_min", &c.ipr_min),
    ];
    for (k, v) in pairs {
        if let Some(v) = v {
            cfg.set(k, v.as_str())?;
        }
    }
    for (k, v) in [("lattice.lx", &c.lx), ("lattice.ly", &c.ly)] {
        if let Some(v) = v {
            cfg.set(k, v.as_str())?;
        }
    }
    if c.vectors {
        cfg.set("run.vectors", "true")?;
    }
    Ok(cfg)
}

fn set_opt(cfg: &mut RunConfig, pairs: &[(&str, &Option<String>)]) -> Result<(), Failure> {
    for (k, v) in pairs {
        if let Some(v) = v {
            cfg.set(k, v.as_str())?;
        }
    }
    Ok(())
}

fn resolve(cmd: &Cmd) -> Result<RunConfig, Failure> {
    Ok(match cmd {
        Cmd::Spectrum(c) => common_config(c, "spectrum")?,
        Cmd::Invariants(c) => common_config(c, "invariants")?,
        Cmd::PhaseDiagram(s) => {
            let mut cfg = common_config(&s.common, "phase-diagram")?;
            set_opt(&mut cfg, &[("scan.kind", &s.kind), ("scan.a", &s.a), ("scan.b", &s.b)])?;
            if s.centered {
                cfg.set("scan.centered", "true")?;
            }
            cfg
        }
        Cmd::CornerModes(m) | Cmd::AnalyticModes(m) => {
            let name = if matches!(cmd, Cmd::CornerModes(_)) { "corner-modes" } else { "analytic-modes" };
            let mut cfg = common_config(&m.common, name)?;
            set_opt(&mut cfg, &[("modes.target", &m.target), ("modes.place", &m.place)])?;
            cfg
        }
        Cmd::VerifyBcc(b) => {
            let mut cfg = common_config(&b.common, "verify-bcc")?;
            set_opt(&mut cfg, &[("bcc.points", &b.points)])?;
            cfg
        }
        Cmd::Trajectory(t) => {
            let mut cfg = common_config(&t.common, "trajectory")?;
            set_opt(
                &mut cfg,
                &[
                    ("trajectory.samples", &t.samples),
                    ("trajectory.waypoints", &t.waypoints),
                    ("trajectory.bc", &t.trajectory_bc),
                ],
            )?;
            cfg
        }
        Cmd::DisorderSweep(r) => {
            let mut cfg = common_config(&r.common, "disorder-sweep")?;
            set_opt(
                &mut cfg,
                &[
                    ("robust.lambda", &r.lambda),
                    ("robust.deltas", &r.deltas),
                    ("robust.realizations", &r.realizations),
                    ("robust.seed", &r.seed),
                    ("robust.target", &r.target),
                ],
            )?;
            cfg
        }
    })
}

fn configure_threads() -> Result<(), Failure> {
    if let Ok(v) = std::env::var("FLOQ_THREADS") {
        let n: usize = v
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| Failure::Validation(format!("FLOQ_THREADS='{v}' is not a positive integer")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Internal(format!("thread pool: {e}")))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|_| resolve(&cli.cmd)).and_then(run::execute);
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(m)) => {
            eprintln!("floq: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Internal(m)) => {
            eprintln!("floq: {m}");
            ExitCode::from(3)
        }
    }
}
