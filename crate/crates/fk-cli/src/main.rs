//! `fk` — stationary (p,q)-configurations of multiharmonic standard-type
//! maps: enumeration and classification, action contours, gradient-flow
//! runs, unstable-manifold traces, and symmetry-breaking parameter scans.
//!
//! Every command emits byte-stable CSV/JSON into `--out`; the run manifest
//! is echoed into each output so results are reproducible from the files
//! alone. Exit codes: 0 success (and audit pass), 1 input/model/IO error,
//! 2 audit violation.

mod output;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use fk_core::configspace::Configuration;
use fk_core::flow::{self, StepControl, TraceOptions};
use fk_core::model::{GeneratingModel, PotentialSpec, Preset};
use fk_core::stationary::{self, AnalysisOptions};
use fk_core::twistmap::{self, ScanOptions};
use output::{fmt_f64, Csv, OutDir, RunManifest};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "fk", version, about = "Stationary (p,q)-configuration toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Enumerate, classify, locate and audit the stationary states.
    Stationary(StationaryArgs),
    /// Sample the action on a coordinate window (q = 2) with an overlay of
    /// stationary states.
    Contour(ContourArgs),
    /// Integrate the gradient flow from a start configuration.
    Flow(FlowArgs),
    /// Trace the unstable manifold of an index-1 state to its two limits.
    Heteroclinic(HeteroclinicArgs),
    /// Lift a stationary configuration to its (p,q)-periodic map orbit.
    Orbit(OrbitArgs),
    /// Sweep a model family in epsilon and record each orbit family.
    Scan(ScanArgs),
}

#[derive(Args)]
struct ModelArgs {
    /// Preset model: standard:EPS, threeharmonic:EPS or example4.
    #[arg(long)]
    preset: Option<String>,
    /// JSON model file {"harmonics": [{"k": 1, "c": ...}, ...]};
    /// overrides --preset.
    #[arg(long)]
    model: Option<PathBuf>,
}

impl ModelArgs {
    fn resolve(&self) -> Result<(GeneratingModel, String)> {
        if let Some(path) = &self.model {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("cannot read model file {}", path.display()))?;
            let potential: PotentialSpec =
                serde_json::from_str(&text).context("invalid model file")?;
            return Ok((GeneratingModel::new(potential), format!("file:{}", path.display())));
        }
        if let Some(token) = &self.preset {
            let preset = Preset::parse(token)?;
            return Ok((preset.model(), token.clone()));
        }
        bail!("either --preset or --model is required");
    }
}

#[derive(Args)]
struct StationaryArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(short)]
    p: i64,
    #[arg(short)]
    q: usize,
    /// Seeds per unit interval of the multistart grid.
    #[arg(long, default_value_t = 32)]
    density: usize,
    /// Order-comparison tie tolerance.
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct ContourArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(short, default_value_t = 1)]
    p: i64,
    #[arg(short, default_value_t = 2)]
    q: usize,
    /// x0min,x0max,x1min,x1max
    #[arg(long, default_value = "0,1,0,1", value_parser = parse_window)]
    window: Window,
    /// Samples per axis.
    #[arg(long, default_value_t = 101)]
    resolution: usize,
    #[arg(long, default_value_t = 32)]
    density: usize,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug)]
struct Window([f64; 4]);

fn parse_window(s: &str) -> Result<Window, String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| e.to_string()))
        .collect::<Result<_, _>>()?;
    if parts.len() != 4 {
        return Err("window needs four comma-separated numbers".into());
    }
    if parts[0] >= parts[1] || parts[2] >= parts[3] {
        return Err("window bounds must be increasing per axis".into());
    }
    Ok(Window([parts[0], parts[1], parts[2], parts[3]]))
}

/// Comma-separated coordinate list so clap treats it as one argument.
#[derive(Clone, Debug)]
struct CoordList(Vec<f64>);

impl std::str::FromStr for CoordList {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        s.split(',')
            .map(|t| t.trim().parse::<f64>().map_err(|e| e.to_string()))
            .collect::<Result<Vec<f64>, String>>()
            .map(CoordList)
    }
}

#[derive(Args)]
struct FlowArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(short, default_value_t = 1)]
    p: i64,
    #[arg(short, default_value_t = 2)]
    q: usize,
    /// Start coordinates, comma separated.
    #[arg(long)]
    from: CoordList,
    /// Final time.
    #[arg(short = 'T', long = "time")]
    t_final: f64,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct HeteroclinicArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(short, default_value_t = 1)]
    p: i64,
    #[arg(short, default_value_t = 2)]
    q: usize,
    /// Seed coordinates of the index-1 state, comma separated.
    #[arg(long)]
    at: CoordList,
    /// Offset along the unstable eigenvector.
    #[arg(long, default_value_t = 1e-6)]
    offset: f64,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct OrbitArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(short, default_value_t = 1)]
    p: i64,
    #[arg(short, default_value_t = 2)]
    q: usize,
    /// Seed coordinates, refined before lifting.
    #[arg(long)]
    at: CoordList,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct ScanArgs {
    /// Model family: standard or threeharmonic.
    #[arg(long)]
    family: String,
    #[arg(short, default_value_t = 1)]
    p: i64,
    #[arg(short, default_value_t = 2)]
    q: usize,
    /// start:stop:step — grid points in (start, stop].
    #[arg(long)]
    eps: String,
    #[arg(long, default_value_t = 24)]
    density: usize,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

fn parse_eps_grid(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<f64> = spec
        .split(':')
        .map(|t| t.parse::<f64>().map_err(|e| anyhow!("bad eps grid: {e}")))
        .collect::<Result<_>>()?;
    let [start, stop, step] = parts[..] else {
        bail!("--eps needs start:stop:step");
    };
    if step <= 0.0 || stop <= start {
        bail!("--eps needs stop > start and step > 0");
    }
    let n = ((stop - start) / step).round() as usize;
    let grid: Vec<f64> = (1..=n)
        .map(|i| start + step * i as f64)
        .filter(|&e| e <= stop + 1e-12)
        .collect();
    if grid.is_empty() {
        bail!("--eps grid is empty");
    }
    Ok(grid)
}

fn configure_threads() -> Result<()> {
    if let Ok(raw) = std::env::var("FK_THREADS") {
        let n: usize = raw.parse().context("FK_THREADS must be a positive integer")?;
        if n == 0 {
            bail!("FK_THREADS must be a positive integer");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("thread pool already configured")?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        eprintln!("error: {e:#}");
        return ExitCode::from(1);
    }
    let run = match cli.command {
        Command::Stationary(args) => cmd_stationary(args),
        Command::Contour(args) => cmd_contour(args),
        Command::Flow(args) => cmd_flow(args),
        Command::Heteroclinic(args) => cmd_heteroclinic(args),
        Command::Orbit(args) => cmd_orbit(args),
        Command::Scan(args) => cmd_scan(args),
    };
    match run {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn audit_exit_code(all_pass: bool) -> u8 {
    if all_pass {
        0
    } else {
        2
    }
}

fn cmd_stationary(args: StationaryArgs) -> Result<u8> {
    let (model, source) = args.model.resolve()?;
    let mut opts = AnalysisOptions::default();
    opts.classify.order_tol = args.tol;
    let analysis = stationary::analyze(&model, args.p, args.q, args.density, &opts)?;

    let mut manifest = RunManifest::new("stationary", &source);
    manifest.p = Some(args.p);
    manifest.q = Some(args.q);
    manifest.density = Some(args.density);
    manifest.tol = Some(args.tol);

    let out = OutDir::create(&args.out)?;
    out.write_json("manifest.json", &manifest)?;
    out.write_json("records.json", &analysis.records)?;
    out.write_json("audit.json", &analysis.report)?;

    let n_min = analysis.context.minimizers().len();
    let n_mmx = analysis.context.minimaximizers().len();
    println!(
        "{} stationary states ({} minimizers, {} minimaximizers); audit {}",
        analysis.records.len(),
        n_min,
        n_mmx,
        if analysis.report.all_pass { "PASS" } else { "FAIL" }
    );
    Ok(audit_exit_code(analysis.report.all_pass))
}

fn cmd_contour(args: ContourArgs) -> Result<u8> {
    if args.q != 2 {
        bail!("contour grids are defined for q = 2 only (got q = {})", args.q);
    }
    let (model, source) = args.model.resolve()?;
    let Window([x0min, x0max, x1min, x1max]) = args.window;
    if args.resolution < 2 {
        bail!("--resolution must be at least 2");
    }

    let mut manifest = RunManifest::new("contour", &source);
    manifest.p = Some(args.p);
    manifest.q = Some(2);
    manifest.window = Some([x0min, x0max, x1min, x1max]);
    manifest.resolution = Some(args.resolution);
    manifest.density = Some(args.density);
    manifest.tol = Some(args.tol);

    let mut csv = Csv::new(&manifest, &["X0", "X1", "W"]);
    let n = args.resolution;
    for i in 0..n {
        let x0 = x0min + (x0max - x0min) * i as f64 / (n - 1) as f64;
        for j in 0..n {
            let x1 = x1min + (x1max - x1min) * j as f64 / (n - 1) as f64;
            let c = Configuration::new(args.p, 2, vec![x0, x1])?;
            csv.row_f64(&[x0, x1, fk_core::action::action(&model, &c)]);
        }
    }

    let mut opts = AnalysisOptions::default();
    opts.classify.order_tol = args.tol;
    let analysis = stationary::analyze(&model, args.p, 2, args.density, &opts)?;
    let mut overlay = Vec::new();
    for rec in &analysis.records {
        let (a, b) = (rec.config.coords()[0], rec.config.coords()[1]);
        let j_lo = (x0min - a).ceil() as i64;
        let j_hi = (x0max - a).floor() as i64;
        for j in j_lo..=j_hi {
            let (x0, x1) = (a + j as f64, b + j as f64);
            if x0 >= x0min && x0 <= x0max && x1 >= x1min && x1 <= x1max {
                let mut shifted = rec.clone();
                shifted.config = rec.config.translate(0, j);
                overlay.push(shifted);
            }
        }
    }
    overlay.sort_by(|a, b| {
        a.config.coords()[0].partial_cmp(&b.config.coords()[0]).expect("finite").then(
            a.config.coords()[1].partial_cmp(&b.config.coords()[1]).expect("finite"),
        )
    });

    let out = OutDir::create(&args.out)?;
    out.write_json("manifest.json", &manifest)?;
    out.write("contour.csv", &csv.finish())?;
    out.write_json("overlay.json", &overlay)?;
    println!(
        "{}x{} grid on [{x0min},{x0max}]x[{x1min},{x1max}], {} overlay states",
        n,
        n,
        overlay.len()
    );
    Ok(0)
}

fn flow_csv(manifest: &RunManifest, model: &GeneratingModel, path: &flow::FlowPath) -> String {
    let q = path.samples[0].1.q();
    let mut cols = vec!["t".to_string()];
    cols.extend((0..q).map(|k| format!("x{k}")));
    cols.push("W".to_string());
    let col_refs: Vec<&str> = cols.iter().map(|s| s.as_str()).collect();
    let mut csv = Csv::new(manifest, &col_refs);
    for (t, c) in &path.samples {
        let mut row = vec![*t];
        row.extend(c.coords());
        row.push(fk_core::action::action(model, c));
        csv.row_f64(&row);
    }
    csv.finish()
}

fn cmd_flow(args: FlowArgs) -> Result<u8> {
    let (model, source) = args.model.resolve()?;
    let start = Configuration::new(args.p, args.q, args.from.0.clone())?;
    let path = flow::evolve(&model, &start, args.t_final, &StepControl::default())?;

    let mut manifest = RunManifest::new("flow", &source);
    manifest.p = Some(args.p);
    manifest.q = Some(args.q);
    manifest.start = Some(args.from.0.clone());
    manifest.t_final = Some(args.t_final);

    let out = OutDir::create(&args.out)?;
    out.write("flow.csv", &flow_csv(&manifest, &model, &path))?;
    let status = match &path.status {
        flow::FlowStatus::ReachedTime => "reached final time".to_string(),
        flow::FlowStatus::Converged(limit) => {
            format!("converged to {:?}", limit.coords())
        }
        flow::FlowStatus::StepFailure => "step failure".to_string(),
    };
    println!("{} samples; {status}", path.samples.len());
    if path.status == flow::FlowStatus::StepFailure {
        bail!("integration failed before the final time");
    }
    Ok(0)
}

fn cmd_heteroclinic(args: HeteroclinicArgs) -> Result<u8> {
    let (model, source) = args.model.resolve()?;
    let seed = Configuration::new(args.p, args.q, args.at.0.clone())?;
    let saddle = stationary::refine(&model, &seed, &Default::default())
        .map_err(|e| anyhow!("seed does not refine to a stationary state: {e}"))?;
    let trace_opts = TraceOptions { offset: args.offset, ..Default::default() };
    let pair = flow::trace_unstable(&model, &saddle.config, &trace_opts)?;

    let mut manifest = RunManifest::new("heteroclinic", &source);
    manifest.p = Some(args.p);
    manifest.q = Some(args.q);
    manifest.start = Some(args.at.0.clone());
    manifest.offset = Some(args.offset);

    let out = OutDir::create(&args.out)?;
    out.write_json("manifest.json", &manifest)?;
    out.write("heteroclinic_lower.csv", &flow_csv(&manifest, &model, &pair.descending))?;
    out.write("heteroclinic_upper.csv", &flow_csv(&manifest, &model, &pair.ascending))?;
    out.write_json("limits.json", &vec![&pair.lower_limit, &pair.upper_limit])?;
    println!(
        "limits: {:?} (index {}) and {:?} (index {})",
        pair.lower_limit.config.coords(),
        pair.lower_limit.index,
        pair.upper_limit.config.coords(),
        pair.upper_limit.index
    );
    Ok(0)
}

fn cmd_orbit(args: OrbitArgs) -> Result<u8> {
    let (model, source) = args.model.resolve()?;
    let seed = Configuration::new(args.p, args.q, args.at.0.clone())?;
    let rec = stationary::refine(&model, &seed, &Default::default())
        .map_err(|e| anyhow!("seed does not refine to a stationary state: {e}"))?;
    let orbit = twistmap::orbit_from_config(&model, &rec.config, 1e-10)?;
    let residue = twistmap::residue(&model, &orbit);

    let mut manifest = RunManifest::new("orbit", &source);
    manifest.p = Some(args.p);
    manifest.q = Some(args.q);
    manifest.start = Some(args.at.0.clone());

    let mut csv = Csv::new(&manifest, &["k", "x", "y"]);
    for (k, &(x, y)) in orbit.points.iter().enumerate() {
        csv.row(&[k.to_string(), fmt_f64(x), fmt_f64(y)]);
    }
    let out = OutDir::create(&args.out)?;
    out.write("orbit.csv", &csv.finish())?;
    println!(
        "orbit of index-{} state, residue {}, closure defect {:.3e}",
        rec.index,
        fmt_f64(residue),
        orbit.closure_defect(&model)
    );
    Ok(0)
}

fn cmd_scan(args: ScanArgs) -> Result<u8> {
    let family: Box<dyn Fn(f64) -> GeneratingModel> = match args.family.as_str() {
        "standard" => Box::new(GeneratingModel::standard),
        "threeharmonic" => Box::new(GeneratingModel::three_harmonic),
        other => bail!("unknown family `{other}` (use standard or threeharmonic)"),
    };
    let grid = parse_eps_grid(&args.eps)?;
    let opts = ScanOptions { density: args.density, ..Default::default() };
    let outcome = twistmap::rimmer_scan(&*family, args.p, args.q, &grid, &opts);

    let mut manifest = RunManifest::new("scan", &args.family);
    manifest.p = Some(args.p);
    manifest.q = Some(args.q);
    manifest.density = Some(args.density);
    manifest.eps = Some(args.eps.clone());

    let mut csv = Csv::new(&manifest, &["eps", "family", "y0", "x0", "residue", "index", "symmetric"]);
    for r in &outcome.records {
        csv.row(&[
            fmt_f64(r.eps),
            r.family.to_string(),
            fmt_f64(r.y0),
            fmt_f64(r.x0),
            fmt_f64(r.residue),
            r.index.to_string(),
            r.symmetric.to_string(),
        ]);
    }

    #[derive(serde::Serialize)]
    struct Summary<'a> {
        first_asymmetric: Option<f64>,
        families: usize,
        failures: &'a Vec<(f64, String)>,
    }
    let families = outcome.records.iter().map(|r| r.family).max().map_or(0, |m| m + 1);
    let summary = Summary {
        first_asymmetric: outcome.first_asymmetric,
        families,
        failures: &outcome.failures,
    };

    let out = OutDir::create(&args.out)?;
    out.write_json("manifest.json", &manifest)?;
    out.write("scan.csv", &csv.finish())?;
    out.write_json("scan_summary.json", &summary)?;
    match outcome.first_asymmetric {
        Some(e) => println!(
            "{} records over {} grid points; first asymmetric pair at eps = {e}",
            outcome.records.len(),
            grid.len()
        ),
        None => println!(
            "{} records over {} grid points; no asymmetric pair detected",
            outcome.records.len(),
            grid.len()
        ),
    }
    Ok(0)
}
