use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use loadflow_core::datagen::{
    export_csv, generate_dataset, read_dataset, sample_injections, sample_rng, write_dataset, SamplingRanges,
};
use loadflow_core::experiments::{
    aggregate_boxplots, benchmark_inference, export_curves, load_runs, rank_runs, run_sweep, table2_csv, table2_text,
    BenchConfig, BoxStats, Hyperparameter, SweepGrid, SweepOptions, RUNS_FILE,
};
use loadflow_core::grid::{load_grid_case, GridCase};
use loadflow_core::powerflow::{solve, InjectionSet, SolverSettings};
use loadflow_core::surrogates::{extract_targets, Architecture, ModelKind, TargetLayout, TrainedSurrogate};
use loadflow_core::training::{evaluate, split_dataset, train_model_with, ModelData, SplitSpec, TrainConfig};

#[derive(Parser)]
#[command(name = "loadflow", version, about = "AC load flow solver and learned surrogates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one load flow with Newton-Raphson and print the bus states.
    Solve(SolveArgs),
    /// Sample injections, solve them and write a dataset file.
    Generate(GenerateArgs),
    /// Train one surrogate on a dataset and save a checkpoint.
    Train(TrainArgs),
    /// Run a checkpoint on injection sets or score it on a dataset.
    Predict(PredictArgs),
    /// Run the hyperparameter sweep, resuming from an existing output directory.
    Sweep(SweepArgs),
    /// Summarize a sweep directory: ranking table, boxplot statistics, loss curves.
    Report(ReportArgs),
    /// Time surrogate inference against the Newton-Raphson solver.
    Bench(BenchArgs),
}

#[derive(Args)]
struct CaseArg {
    /// Case file (JSON). Defaults to the bundled modified IEEE 5-bus case.
    #[arg(long)]
    case: Option<PathBuf>,
}

impl CaseArg {
    fn load(&self) -> Result<GridCase> {
        match &self.case {
            Some(p) => load_grid_case(p).with_context(|| format!("loading case {}", p.display())),
            None => Ok(GridCase::ieee5_modified()),
        }
    }
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    case: CaseArg,
    /// Injection set (JSON). Without it a random set is drawn with `--seed`.
    #[arg(long)]
    inj: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1e-8)]
    tolerance: f64,
    #[arg(long, default_value_t = 50)]
    max_iterations: usize,
}

#[derive(Args)]
struct GenerateArgs {
    #[command(flatten)]
    case: CaseArg,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Also write the samples as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    arch: ModelKind,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[arg(long, default_value_t = 32)]
    bs: usize,
    #[arg(long, default_value_t = 50)]
    epochs: usize,
    /// Train on the first N rows of the training split.
    #[arg(long)]
    subset: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Hidden width (MLP) or embedding size (GNN).
    #[arg(long)]
    width: Option<usize>,
    /// Propagation steps (GNN only).
    #[arg(long)]
    k: Option<usize>,
    /// Checkpoint path.
    #[arg(long)]
    out: PathBuf,
    /// Per-epoch losses as CSV.
    #[arg(long)]
    history: Option<PathBuf>,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    ckpt: PathBuf,
    /// An injection set or a JSON array of them; predictions are compared with N-R.
    #[arg(long, conflicts_with = "data")]
    inj: Option<PathBuf>,
    /// A dataset file; prints the standardized-space MSE over all samples.
    #[arg(long)]
    data: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    data: PathBuf,
    /// Sweep grid (JSON). Defaults to the desk-scale grid.
    #[arg(long, conflicts_with = "full")]
    grid: Option<PathBuf>,
    /// Use the full grid with training sizes up to 500,000.
    #[arg(long)]
    full: bool,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    no_checkpoints: bool,
}

#[derive(Args)]
struct ReportArgs {
    /// Sweep output directory.
    #[arg(long)]
    runs: PathBuf,
    /// Write table2.csv and print the per-architecture ranking.
    #[arg(long)]
    table2: bool,
    /// Write boxplots.csv with test MSE quartiles per hyperparameter value.
    #[arg(long)]
    boxplots: bool,
    /// Write per-run loss curves under <runs>/curves.
    #[arg(long)]
    curves: bool,
    #[arg(long, default_value_t = 3)]
    top_k: usize,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    case: CaseArg,
    /// Directory of `.ckpt` files; every checkpoint found is timed.
    #[arg(long)]
    ckpts: PathBuf,
    #[arg(long, value_delimiter = ',', default_values_t = [10, 100, 1000, 10000])]
    counts: Vec<usize>,
    #[arg(long, default_value_t = 5)]
    reps: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Directory for bench.json and bench.csv.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Solve(a) => cmd_solve(a),
        Command::Generate(a) => cmd_generate(a),
        Command::Train(a) => cmd_train(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Report(a) => cmd_report(a),
        Command::Bench(a) => cmd_bench(a),
    }
}

/// Writes to stdout; a closed pipe (e.g. `| head`) ends output quietly.
fn emit(text: &str) -> Result<()> {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn cmd_solve(a: SolveArgs) -> Result<()> {
    let grid = a.case.load()?;
    let inj = match &a.inj {
        Some(p) => read_json(p)?,
        None => sample_injections(&mut sample_rng(a.seed, 0), &grid, &SamplingRanges::default()),
    };
    let settings = SolverSettings {
        tolerance: a.tolerance,
        max_iterations: a.max_iterations,
        ..SolverSettings::default()
    };
    let sol = solve(&grid, &inj, &settings)?;
    emit(&format!(
        "{}\n",
        serde_json::to_string_pretty(&json!({ "injections": inj, "solution": sol }))?
    ))?;
    Ok(())
}

fn cmd_generate(a: GenerateArgs) -> Result<()> {
    let grid = a.case.load()?;
    let ds = generate_dataset(
        &grid,
        a.n,
        a.seed,
        &SamplingRanges::default(),
        &SolverSettings::default(),
    )?;
    write_dataset(&ds, &a.out)?;
    log::info!(
        "wrote {} samples to {} ({} draws discarded)",
        ds.len(),
        a.out.display(),
        ds.discarded
    );
    if let Some(csv) = &a.csv {
        let file = fs::File::create(csv).with_context(|| format!("creating {}", csv.display()))?;
        export_csv(&ds, std::io::BufWriter::new(file))?;
    }
    Ok(())
}

fn architecture(kind: ModelKind, width: Option<usize>, k: Option<usize>) -> Result<Architecture> {
    let mut arch = Architecture::default_for(kind);
    match &mut arch {
        Architecture::Mlp(c) => {
            if k.is_some() {
                bail!("--k applies to GNN models only");
            }
            if let Some(w) = width {
                c.hidden_width = w;
            }
        }
        Architecture::Gnn1(c) | Architecture::Gnn2(c) => {
            if let Some(w) = width {
                c.d = w;
            }
            if let Some(k) = k {
                c.k_steps = k;
            }
        }
    }
    Ok(arch)
}

fn cmd_train(a: TrainArgs) -> Result<()> {
    let ds = read_dataset(&a.data)?;
    let split = split_dataset(&ds, &SplitSpec::default())?;
    let cfg = TrainConfig {
        learning_rate: a.lr,
        batch_size: a.bs,
        max_epochs: a.epochs,
        training_subset_size: a.subset,
        seed: a.seed,
    };
    let arch = architecture(a.arch, a.width, a.k)?;
    let out = train_model_with(arch, &ds.grid, &split.train, &split.val, &cfg, |e| {
        log::info!(
            "epoch {:>3}  train {:.4e}  val {:.4e}  ({:.2}s)",
            e.epoch,
            e.train_mse,
            e.val_mse,
            e.seconds
        );
    })?;
    let test = evaluate(&out.model, &split.test)?;
    out.model.save(&a.out)?;
    if let Some(path) = &a.history {
        let mut csv = String::from("epoch,train_mse,val_mse,seconds\n");
        for e in &out.history {
            csv.push_str(&format!("{},{},{},{}\n", e.epoch, e.train_mse, e.val_mse, e.seconds));
        }
        fs::write(path, csv)?;
    }
    emit(&format!(
        "{}\n",
        serde_json::to_string_pretty(&json!({
            "architecture": arch,
            "best_epoch": out.best_epoch,
            "best_val_mse": out.best_val_mse(),
            "final": out.final_record(),
            "test_mse": test,
            "checkpoint": a.out,
        }))?
    ))?;
    Ok(())
}

fn cmd_predict(a: PredictArgs) -> Result<()> {
    let model = TrainedSurrogate::load(&a.ckpt)?;
    if let Some(path) = &a.data {
        let ds = read_dataset(path)?;
        let data = ModelData::from_samples(&model.grid, &ds.samples)?;
        let mse = evaluate(&model, &data)?;
        return emit(&format!(
            "{}\n",
            json!({ "model": model.kind().name(), "samples": data.len(), "mse": mse })
        ));
    }
    let Some(path) = &a.inj else {
        bail!("pass --inj or --data");
    };
    let value: serde_json::Value = read_json(path)?;
    let inputs: Vec<InjectionSet> = if value.is_array() {
        serde_json::from_value(value)?
    } else {
        vec![serde_json::from_value(value)?]
    };
    let pred = model.predict_injections(&inputs)?;
    let names = TargetLayout::for_grid(&model.grid).column_names();
    let mut rows = Vec::with_capacity(inputs.len());
    for (i, inj) in inputs.iter().enumerate() {
        let reference = solve(&model.grid, inj, &SolverSettings::default())
            .ok()
            .and_then(|s| extract_targets(&s, &model.grid).ok());
        let cols: Vec<_> = names
            .iter()
            .enumerate()
            .map(|(c, name)| {
                json!({
                    "target": name,
                    "predicted": pred.get(i, c),
                    "newton_raphson": reference.as_ref().map(|r| r[c]),
                })
            })
            .collect();
        rows.push(cols);
    }
    emit(&format!("{}\n", serde_json::to_string_pretty(&rows)?))?;
    Ok(())
}

fn cmd_sweep(a: SweepArgs) -> Result<()> {
    let grid = match (&a.grid, a.full) {
        (Some(p), _) => read_json(p)?,
        (None, true) => SweepGrid::full(),
        (None, false) => SweepGrid::desk(),
    };
    let ds = read_dataset(&a.data)?;
    let options = SweepOptions {
        split: SplitSpec::default(),
        save_checkpoints: !a.no_checkpoints,
    };
    let outcome = run_sweep(&grid, &ds, &options, &a.out)?;
    for s in &outcome.skipped {
        log::warn!(
            "skipped {} size {}: {}",
            s.cell.architecture.kind(),
            s.cell.training_size,
            s.reason
        );
    }
    let diverged = outcome.records.iter().filter(|r| r.diverged).count();
    emit(&format!(
        "{} runs ({} resumed, {} diverged, {} skipped) in {}\n",
        outcome.records.len(),
        outcome.resumed,
        diverged,
        outcome.skipped.len(),
        a.out.join(RUNS_FILE).display()
    ))
}

fn cmd_report(a: ReportArgs) -> Result<()> {
    let records = load_runs(a.runs.join(RUNS_FILE))?;
    if records.is_empty() {
        bail!("no runs found in {}", a.runs.display());
    }
    let everything = !(a.table2 || a.boxplots || a.curves);
    if a.table2 || everything {
        let ranking = rank_runs(&records, a.top_k);
        fs::write(a.runs.join("table2.csv"), table2_csv(&ranking))?;
        fs::write(a.runs.join("table2.json"), serde_json::to_string_pretty(&ranking)?)?;
        emit(&table2_text(&ranking))?;
    }
    if a.boxplots || everything {
        let stats = aggregate_boxplots(&records);
        let mut csv = format!("{}\n", BoxStats::CSV_HEADER);
        for s in &stats {
            csv.push_str(&s.csv_row());
            csv.push('\n');
        }
        fs::write(a.runs.join("boxplots.csv"), csv)?;
        fs::write(a.runs.join("boxplots.json"), serde_json::to_string_pretty(&stats)?)?;
        let mut text = String::from("divergence rate by learning rate:\n");
        for s in stats
            .iter()
            .filter(|s| s.hyperparameter == Hyperparameter::LearningRate)
        {
            text.push_str(&format!(
                "  {:<5} lr {:<7} {:>5.1}% of {}\n",
                s.kind.display_name(),
                s.value,
                100.0 * s.divergence_rate(),
                s.n + s.diverged
            ));
        }
        emit(&text)?;
    }
    if a.curves || everything {
        let entries = export_curves(&records, a.runs.join("curves"))?;
        log::info!("wrote {} loss curves", entries.len());
    }
    Ok(())
}

fn cmd_bench(a: BenchArgs) -> Result<()> {
    let grid = a.case.load()?;
    let mut paths: Vec<PathBuf> = fs::read_dir(&a.ckpts)
        .with_context(|| format!("listing {}", a.ckpts.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "ckpt"))
        .collect();
    paths.sort();
    let mut models = Vec::with_capacity(paths.len());
    for p in &paths {
        models.push(TrainedSurrogate::load(p).with_context(|| format!("loading {}", p.display()))?);
    }
    models.sort_by_key(|m| ModelKind::ALL.iter().position(|&k| k == m.kind()));
    if models.windows(2).any(|w| w[0].kind() == w[1].kind()) {
        bail!("{} holds more than one checkpoint per architecture", a.ckpts.display());
    }
    let cfg = BenchConfig {
        counts: a.counts,
        repetitions: a.reps,
        seed: a.seed,
        ..BenchConfig::default()
    };
    let report = benchmark_inference(&models, &grid, &cfg)?;
    emit(&report.to_csv())?;
    if let Some(dir) = &a.out {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("bench.csv"), report.to_csv())?;
        fs::write(dir.join("bench.json"), serde_json::to_string_pretty(&report)?)?;
    }
    Ok(())
}
