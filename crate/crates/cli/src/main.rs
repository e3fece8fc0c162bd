use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use fcmqem::bench::{stability_report, CalibrationSource};
use fcmqem::calibration::{calibrate, read_count_records, CALIBRATION_SCHEMA_VERSION};
use fcmqem::circuit::ideal_distribution;
use fcmqem::config::{resolve_circuit, ToolConfig};
use fcmqem::linalg::Matrix;
use fcmqem::matrices::{CalibrationMatrix, MatrixDocument, MitigationMatrix};
use fcmqem::rng::TAG_SIMULATE;
use fcmqem::{
    invert_calibration, mitigate, run_benchmark, sample_noisy_counts, CalibrationRun, DatasetSource, Error,
    OutcomeCounts, Result, StreamSeed,
};

/// Readout-error mitigation with Fuzzy C-Means calibration.
///
/// Exit codes: 0 success, 2 usage or configuration error, 3 numerical failure.
#[derive(Parser)]
#[command(name = "fcmqem", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the calibration matrix M and mitigation matrix S.
    Calibrate(CalibrateArgs),
    /// Apply a mitigation matrix to measured counts.
    Mitigate(MitigateArgs),
    /// Ideal distribution of a circuit, or sampled counts under noise.
    Simulate(SimulateArgs),
    /// Run the validation benchmark.
    Bench(BenchArgs),
}

#[derive(Args)]
struct Common {
    /// JSON config file, or an artifact with an embedded config.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dotted override, e.g. `fcm.maxiter=20`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Master seed, or `auto` to draw one from the clock.
    #[arg(long)]
    seed: Option<String>,
    /// Noise preset name or path to a noise model file.
    #[arg(long)]
    noise: Option<String>,
}

#[derive(Args)]
struct CalibrateArgs {
    #[command(flatten)]
    common: Common,
    /// Experiments per basis state.
    #[arg(long)]
    t: Option<usize>,
    #[arg(long)]
    shots: Option<u64>,
    /// Imported count records instead of the simulator.
    #[arg(long)]
    records: Option<PathBuf>,
    /// Record wall-clock time in the matrix provenance.
    #[arg(long)]
    stamp: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MitigateArgs {
    #[command(flatten)]
    common: Common,
    /// Calibration artifact or matrix document.
    #[arg(long)]
    calibration: PathBuf,
    /// Counts file: `{"register": [...], "counts": [...]}` or a bare array.
    #[arg(long)]
    counts: PathBuf,
    /// clip-renormalize, simplex-projection or raw-only.
    #[arg(long)]
    policy: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: Common,
    /// Circuit file or built-in circuit name.
    #[arg(long)]
    circuit: String,
    /// Initial basis state, e.g. `10`.
    #[arg(long)]
    state: String,
    #[arg(long, default_value_t = 760)]
    shots: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    common: Common,
    /// Circuit selection, e.g. `only:cnot` or `only:cnot,h-cnot`.
    #[arg(long)]
    circuits: Option<String>,
    /// Reuse a persisted calibration instead of calibrating afresh.
    #[arg(long)]
    calibration: Option<PathBuf>,
    #[arg(long)]
    repetitions: Option<usize>,
    #[arg(long)]
    shots: Option<u64>,
    #[arg(long)]
    t: Option<usize>,
    /// Recalibrate before every repetition.
    #[arg(long)]
    recalibrate: bool,
    /// Worker threads; results do not depend on it.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Calibrate(a) => cmd_calibrate(a),
        Command::Mitigate(a) => cmd_mitigate(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Bench(a) => cmd_bench(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 3 } else { 2 })
        }
    }
}

fn load_config(common: &Common, mut extra: Vec<String>) -> Result<ToolConfig> {
    let base = match &common.config {
        Some(path) => ToolConfig::read(path)?,
        None => ToolConfig::default(),
    };
    let mut overrides = common.overrides.clone();
    if let Some(seed) = &common.seed {
        let seed = if seed == "auto" {
            SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_nanos() as u64)
        } else {
            seed.parse::<u64>().map_err(|_| Error::Config(format!("seed {seed:?} is not an integer or `auto`")))?
        };
        overrides.push(format!("seed={seed}"));
    }
    if let Some(noise) = &common.noise {
        overrides.extend(noise_overrides(noise)?);
    }
    overrides.append(&mut extra);
    let cfg = base.with_overrides(&overrides)?;
    cfg.validate()?;
    Ok(cfg)
}

fn noise_overrides(noise: &str) -> Result<Vec<String>> {
    let path = Path::new(noise);
    if path.is_file() {
        let model: Value = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        Ok(vec!["noise.preset=null".into(), format!("noise.model={model}")])
    } else {
        Ok(vec![format!("noise.preset={}", json!(noise)), "noise.model=null".into()])
    }
}

fn write_or_print(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            std::fs::write(path, text)?;
            eprintln!("wrote {}", path.display());
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn pretty(value: &Value) -> Result<String> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    Ok(text)
}

fn format_matrix(m: &Matrix) -> String {
    (0..m.rows())
        .map(|i| m.row(i).iter().map(|x| format!("{x:>10.6}")).collect::<Vec<_>>().join(" "))
        .collect::<Vec<_>>()
        .join("\n")
}

fn cmd_calibrate(args: CalibrateArgs) -> Result<()> {
    let mut extra = Vec::new();
    if let Some(t) = args.t {
        extra.push(format!("calibration.t={t}"));
    }
    if let Some(s) = args.shots {
        extra.push(format!("calibration.shots={s}"));
    }
    if let Some(r) = &args.records {
        extra.push(format!("calibration.records={}", json!(r)));
    }
    let cfg = load_config(&args.common, extra)?;
    let source = match &cfg.calibration.records {
        Some(path) => DatasetSource::Imported(read_count_records(path)?),
        None => DatasetSource::Simulator(cfg.noise.resolve(&cfg.register)?),
    };
    let mut run = calibrate(
        &cfg.register,
        &source,
        cfg.calibration.t,
        cfg.calibration.shots,
        &cfg.fcm,
        StreamSeed::new(cfg.seed),
        cfg.conventions.inversion,
    )?;
    if args.stamp {
        let mut provenance = run.calibration.provenance().clone();
        let secs = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
        provenance.timestamp = Some(format!("unix:{secs}"));
        run.calibration = run.calibration.clone().with_provenance(provenance);
    }
    run.config = cfg.to_value();

    println!("M =\n{}", format_matrix(run.calibration.matrix()));
    println!("S =\n{}", format_matrix(run.mitigation.matrix()));
    println!("condition number (1-norm): {}", run.mitigation.condition_number());
    for (d, (c, j)) in run.datasets.iter().zip(run.chosen_c.iter().zip(&run.selected_indices)) {
        println!("|{}>: C = {c}, selected instance {j}", d.basis_state());
    }
    let out = args.out.unwrap_or_else(|| cfg.io.out_dir.join("calibration.json"));
    write_or_print(&run.to_json()?, Some(&out))
}

/// Accepts a calibration artifact, a calibration matrix document, or a
/// mitigation matrix document.
fn load_mitigation(path: &Path, cfg: &ToolConfig) -> Result<MitigationMatrix> {
    let value: Value = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    if value.get("schema_version").is_some() {
        if value["schema_version"] != json!(CALIBRATION_SCHEMA_VERSION) {
            return Err(Error::Import(format!("unsupported calibration schema_version {}", value["schema_version"])));
        }
        return Ok(CalibrationRun::read(path)?.mitigation);
    }
    let doc: MatrixDocument = serde_json::from_value(value)?;
    if doc.provenance.get("condition_number").is_some() {
        return Ok(serde_json::from_value(serde_json::to_value(doc)?)?);
    }
    let m: CalibrationMatrix = serde_json::from_value(serde_json::to_value(doc)?)?;
    invert_calibration(&m, cfg.conventions.inversion)
}

fn cmd_mitigate(args: MitigateArgs) -> Result<()> {
    let mut extra = Vec::new();
    if let Some(p) = &args.policy {
        extra.push(format!("conventions.negativity={}", json!(p)));
    }
    let cfg = load_config(&args.common, extra)?;
    let s = load_mitigation(&args.calibration, &cfg)?;
    let value: Value = serde_json::from_str(&std::fs::read_to_string(&args.counts)?)?;
    let counts: OutcomeCounts = match value {
        Value::Array(_) => OutcomeCounts::new(s.register().clone(), serde_json::from_value(value)?)?,
        other => serde_json::from_value(other)?,
    };
    let noisy = counts.to_probability()?;
    let result = mitigate(&noisy, &s, cfg.conventions.negativity)?;
    let out = json!({
        "schema_version": 1,
        "config": cfg.to_value(),
        "register": s.register(),
        "counts": counts.counts(),
        "shots": counts.shots(),
        "condition_number": s.condition_number(),
        "policy": result.policy,
        "raw_quasi": result.raw_quasi.values(),
        "normalized": result.normalized.as_ref().map(|p| p.values()),
        "negativity": result.negativity,
    });
    write_or_print(&pretty(&out)?, args.out.as_deref())
}

fn cmd_simulate(args: SimulateArgs) -> Result<()> {
    let with_noise = args.common.noise.is_some();
    let cfg = load_config(&args.common, Vec::new())?;
    let circuit = resolve_circuit(&args.circuit)?;
    let ideal = ideal_distribution(&circuit, &args.state)?;
    let mut out = json!({
        "schema_version": 1,
        "config": cfg.to_value(),
        "circuit": circuit,
        "initial_state": args.state.trim_start_matches('|').trim_end_matches('>'),
        "register": circuit.register(),
        "ideal": ideal.values(),
    });
    if with_noise {
        let noise = cfg.noise.resolve(circuit.register())?;
        let seed = StreamSeed::new(cfg.seed).child(TAG_SIMULATE, 0);
        let counts = sample_noisy_counts(&ideal, &noise, args.shots, seed)?;
        out["shots"] = json!(args.shots);
        out["seed"] = json!(seed);
        out["counts"] = json!(counts.counts());
    }
    write_or_print(&pretty(&out)?, args.out.as_deref())
}

fn cmd_bench(args: BenchArgs) -> Result<()> {
    let mut extra = Vec::new();
    if let Some(sel) = &args.circuits {
        let names: Vec<&str> = sel.strip_prefix("only:").unwrap_or(sel).split(',').filter(|s| !s.is_empty()).collect();
        extra.push(format!("benchmark.circuits={}", json!(names)));
    }
    if let Some(path) = &args.calibration {
        extra.push(format!("benchmark.calibration={}", json!(CalibrationSource::Reuse { path: path.clone() })));
    }
    if let Some(r) = args.repetitions {
        extra.push(format!("benchmark.repetitions={r}"));
    }
    if let Some(s) = args.shots {
        extra.push(format!("benchmark.shots={s}"));
    }
    if let Some(t) = args.t {
        extra.push(format!("calibration.t={t}"));
    }
    if args.recalibrate {
        extra.push("benchmark.recalibrate_per_repetition=true".into());
    }
    let cfg = load_config(&args.common, extra)?;
    let plan = cfg.benchmark_plan()?;
    let mut result = run_benchmark(&plan, args.jobs)?;
    result.summary.config = cfg.to_value();

    let dir = args.out.unwrap_or_else(|| cfg.io.out_dir.clone());
    let mut written = result.write_to(&dir)?;
    if plan.calibration == CalibrationSource::Fresh {
        for (i, run) in result.calibration_runs.iter_mut().enumerate() {
            run.config = cfg.to_value();
            let name = if i == 0 { "calibration.json".to_string() } else { format!("calibration_{i}.json") };
            let path = dir.join(name);
            run.write(&path)?;
            written.push(path);
        }
        let path = dir.join("stability.json");
        std::fs::write(&path, pretty(&serde_json::to_value(stability_report(&result.calibration_runs[0].datasets, plan.calibration_shots))?)?)?;
        written.push(path);
    }
    print!("{}", result.table());
    for path in written {
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}
