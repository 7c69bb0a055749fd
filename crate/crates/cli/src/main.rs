//! `rfsep`: dataset generation, augmentation, training, evaluation and
//! comparison from one JSON config.
//!
//! Exit status: 0 on success, 1 on a runtime error (message on stderr),
//! 2 on invalid usage.

mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use rfsep::autodiff::{grad_check, Graph, NodeId, PaddingPolicy, Tensor};
use rfsep::datagen::{augment_batch, generate_dataset, generate_examples, read_sigpack, write_sigpack, MixtureExample, Split};
use rfsep::eval::{emit_report, evaluate, Comparison, EvalResult, ModelSeparator, NullSeparator};
use rfsep::rng::{derive_seed, Rng};
use rfsep::train::train;
use rfsep::wavenet::{load_checkpoint, WaveNetModel};
use rfsep::{Error, Result};

use config::RunConfig;

#[derive(Parser)]
#[command(name = "rfsep", version, about = "RF co-channel separation with learnable dilations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON config; missing sections take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one config value, e.g. `--set train.lr=5e-4`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output directory; nothing is written outside it.
    #[arg(long)]
    out: PathBuf,
    /// Worker threads (falls back to RFSEP_THREADS, then all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a dataset from the `dataset` section.
    Gen {
        #[command(flatten)]
        common: Common,
    },
    /// Resynthesize the comm-surrogate interference of a sigpack file.
    Augment {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
    },
    /// Train a model. Without --train/--val, both sets are generated from the
    /// `dataset` section with the train and val splits.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        train: Option<PathBuf>,
        #[arg(long)]
        val: Option<PathBuf>,
    },
    /// BER/MSE curves of a checkpoint and of the unprocessed mixture.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Test set; generated from the `dataset` section (test split) if absent.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Compare two checkpoints at a target BER.
    Compare {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        baseline: PathBuf,
        #[arg(long)]
        candidate: PathBuf,
        #[arg(long)]
        target_ber: Option<f64>,
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Finite-difference check of the fractional-dilation convolution.
    Gradcheck {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 50)]
        cases: usize,
    },
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Gen { common }
            | Command::Augment { common, .. }
            | Command::Train { common, .. }
            | Command::Eval { common, .. }
            | Command::Compare { common, .. }
            | Command::Gradcheck { common, .. } => common,
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Command::Gen { .. } => "gen",
            Command::Augment { .. } => "augment",
            Command::Train { .. } => "train",
            Command::Eval { .. } => "eval",
            Command::Compare { .. } => "compare",
            Command::Gradcheck { .. } => "gradcheck",
        }
    }
}

/// Files read and written by one run, for the run manifest.
#[derive(Default)]
struct Io {
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
    extra: serde_json::Map<String, serde_json::Value>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn setup_threads(requested: Option<usize>) -> Result<()> {
    let env = std::env::var("RFSEP_THREADS").ok();
    let n = match (requested, env) {
        (Some(n), _) => Some(n),
        (None, Some(v)) => Some(
            v.parse()
                .map_err(|_| Error::Config(format!("RFSEP_THREADS must be an integer, got {v:?}")))?,
        ),
        (None, None) => None,
    };
    if let Some(n) = n {
        if n == 0 {
            return Err(Error::Config("thread count must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    Ok(())
}

fn run(command: &Command) -> Result<()> {
    let common = command.common();
    setup_threads(common.threads)?;
    let config = RunConfig::load(common.config.as_deref(), &common.overrides)?;
    let out = &common.out;
    std::fs::create_dir_all(out).map_err(Error::io(out))?;
    let echo = out.join("config.json");
    config.write(&echo)?;

    let start = Instant::now();
    let mut io = Io::default();
    io.inputs.extend(common.config.clone());
    match command {
        Command::Gen { .. } => cmd_gen(&config, out, &mut io)?,
        Command::Augment { data, .. } => cmd_augment(data, out, &mut io)?,
        Command::Train { train, val, .. } => cmd_train(&config, train.as_deref(), val.as_deref(), out, &mut io)?,
        Command::Eval { checkpoint, data, .. } => cmd_eval(&config, checkpoint, data.as_deref(), out, &mut io)?,
        Command::Compare {
            baseline,
            candidate,
            target_ber,
            data,
            ..
        } => cmd_compare(&config, baseline, candidate, *target_ber, data.as_deref(), out, &mut io)?,
        Command::Gradcheck { cases, .. } => cmd_gradcheck(*cases, out, &mut io)?,
    }
    io.outputs.insert(0, echo);
    write_run_manifest(command.name(), &config, &io, start.elapsed().as_secs_f64(), out)
}

fn write_run_manifest(name: &str, config: &RunConfig, io: &Io, wall: f64, out: &Path) -> Result<()> {
    let hashes = |paths: &[PathBuf]| -> Result<serde_json::Map<String, serde_json::Value>> {
        paths
            .iter()
            .map(|p| Ok((p.display().to_string(), json!(config::sha256_file(p)?))))
            .collect()
    };
    let manifest = json!({
        "subcommand": name,
        "argv": std::env::args().collect::<Vec<_>>(),
        "config_sha256": config.sha256(),
        "seeds": {
            "dataset_master_seed": config.dataset.master_seed,
            "model_seed": config.model_seed,
            "train_seed": config.train.seed,
        },
        "inputs": hashes(&io.inputs)?,
        "outputs": hashes(&io.outputs)?,
        "results": io.extra,
        "wall_time_s": wall,
    });
    let path = out.join("run_manifest.json");
    std::fs::write(&path, serde_json::to_string_pretty(&manifest).expect("json") + "\n").map_err(Error::io(&path))
}

fn cmd_gen(config: &RunConfig, out: &Path, io: &mut Io) -> Result<()> {
    let path = out.join("dataset.sigpack");
    let manifest = generate_dataset(&config.dataset, &path)?;
    io.outputs.push(path.clone());
    io.outputs.push(rfsep::datagen::manifest_path(&path));
    io.extra.insert("count".into(), json!(manifest.count));
    println!("wrote {} examples to {}", manifest.count, path.display());
    Ok(())
}

fn cmd_augment(data: &Path, out: &Path, io: &mut Io) -> Result<()> {
    io.inputs.push(data.to_path_buf());
    let (examples, spec) = read_sigpack(data)?;
    let (accepted, rejected) = augment_batch(&examples)?;
    let path = out.join("augmented.sigpack");
    write_sigpack(&accepted, spec.as_ref(), &path)?;
    io.outputs.push(path.clone());
    io.extra.insert("accepted".into(), json!(accepted.len()));
    io.extra.insert("rejected".into(), json!(rejected));
    println!("accepted {} / rejected {}; wrote {}", accepted.len(), rejected, path.display());
    Ok(())
}

/// Examples from `path`, or generated from the config's dataset spec with
/// `split`.
fn load_or_generate(config: &RunConfig, path: Option<&Path>, split: Split, io: &mut Io) -> Result<Vec<MixtureExample>> {
    match path {
        Some(p) => {
            io.inputs.push(p.to_path_buf());
            Ok(read_sigpack(p)?.0)
        }
        None => {
            let mut spec = config.dataset.clone();
            spec.split = split;
            generate_examples(&spec)
        }
    }
}

fn cmd_train(config: &RunConfig, train_path: Option<&Path>, val_path: Option<&Path>, out: &Path, io: &mut Io) -> Result<()> {
    let train_set = load_or_generate(config, train_path, Split::Train, io)?;
    let val_set = load_or_generate(config, val_path, Split::Val, io)?;
    let model = WaveNetModel::new(config.model.clone(), config.model_seed)?;
    let mut tc = config.train.clone();
    let name = tc
        .checkpoint_path
        .as_ref()
        .and_then(|p| p.file_name())
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("model.ckpt"));
    let ckpt = out.join(name);
    tc.checkpoint_path = Some(ckpt.clone());
    let (best, history) = train(model, &train_set, &val_set, &tc)?;
    let hist = out.join("history.jsonl");
    history.write_jsonl(&hist)?;
    io.outputs.push(ckpt.clone());
    io.outputs.push(hist);
    io.extra.insert("best_val".into(), json!(history.best_val));
    io.extra.insert("best_epoch".into(), json!(history.best_epoch));
    io.extra.insert("stop_reason".into(), json!(history.stop_reason));
    io.extra.insert("dilations".into(), json!(best.dilations()));
    println!(
        "best val {} at epoch {}; checkpoint {}",
        history.best_val,
        history.best_epoch,
        ckpt.display()
    );
    Ok(())
}

fn report_outputs(out: &Path, labels: &[&str], io: &mut Io) {
    for label in labels {
        for suffix in ["ber", "mse"] {
            io.outputs.push(out.join(format!("{label}.{suffix}.csv")));
        }
    }
    io.outputs.push(out.join("summary.json"));
}

fn load_model(path: &Path, label: &str, io: &mut Io) -> Result<ModelSeparator> {
    io.inputs.push(path.to_path_buf());
    let (model, _) = load_checkpoint(path)?;
    Ok(ModelSeparator {
        label: label.to_string(),
        model,
    })
}

fn cmd_eval(config: &RunConfig, checkpoint: &Path, data: Option<&Path>, out: &Path, io: &mut Io) -> Result<()> {
    let test = load_or_generate(config, data, Split::Test, io)?;
    let model = load_model(checkpoint, "model", io)?;
    let mut results = Vec::new();
    for sep in [&model as &dyn rfsep::eval::Separator, &NullSeparator] {
        let (ber, mse) = evaluate(sep, &test)?;
        results.push(EvalResult { ber, mse });
    }
    let cmp = [Comparison {
        baseline: "null".into(),
        candidate: "model".into(),
    }];
    emit_report(&results, &cmp, config.eval.target_ber, out)?;
    report_outputs(out, &["model", "null"], io);
    println!("wrote report to {}", out.display());
    Ok(())
}

fn cmd_compare(
    config: &RunConfig,
    baseline: &Path,
    candidate: &Path,
    target_ber: Option<f64>,
    data: Option<&Path>,
    out: &Path,
    io: &mut Io,
) -> Result<()> {
    let test = load_or_generate(config, data, Split::Test, io)?;
    let base = load_model(baseline, "baseline", io)?;
    let cand = load_model(candidate, "candidate", io)?;
    let mut results = Vec::new();
    for sep in [&base as &dyn rfsep::eval::Separator, &cand] {
        let (ber, mse) = evaluate(sep, &test)?;
        results.push(EvalResult { ber, mse });
    }
    let cmp = [Comparison {
        baseline: "baseline".into(),
        candidate: "candidate".into(),
    }];
    let target = target_ber.unwrap_or(config.eval.target_ber);
    let summary = emit_report(&results, &cmp, target, out)?;
    report_outputs(out, &["baseline", "candidate"], io);
    let c = &summary.comparisons[0];
    match c.improvement_pct {
        Some(p) => println!("improvement at BER {target}: {p:.2}%"),
        None => println!("improvement at BER {target}: n/a ({})", c.note.as_deref().unwrap_or("")),
    }
    println!("grid-mean MSE improvement: {:.2}%", c.mse_improvement_pct);
    Ok(())
}

fn random_tensor(rng: &mut Rng, shape: &[usize]) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| rng.gaussian()).collect()).expect("shape matches")
}

fn cmd_gradcheck(cases: usize, out: &Path, io: &mut Io) -> Result<()> {
    const DILATIONS: [f64; 3] = [1.3, 1.5, 2.7];
    const TOLERANCE: f64 = 1e-4;
    let mut reports = Vec::new();
    for case in 0..cases {
        let mut rng = Rng::new(derive_seed(0x4743, case as u64));
        let (c_in, c_out, len) = (1 + rng.below(3), 1 + rng.below(3), 8 + rng.below(17));
        let d = DILATIONS[case % DILATIONS.len()];
        let mut k = [1, 3, 5][rng.below(3)];
        // central differences are meaningless where a tap crosses a sample
        while PaddingPolicy::Same.has_kink(k, d) {
            k -= 2;
        }
        let inputs = [
            random_tensor(&mut rng, &[c_in, len]).requires_grad(true),
            random_tensor(&mut rng, &[c_out, c_in, k]).requires_grad(true),
            Tensor::scalar(d).requires_grad(true),
            random_tensor(&mut rng, &[c_out, len]),
        ];
        let op = |g: &mut Graph, ids: &[NodeId]| {
            let y = g.conv1d_frac(ids[0], ids[1], ids[2], PaddingPolicy::Same)?;
            g.mse_loss(y, ids[3])
        };
        reports.push(grad_check(op, &inputs, TOLERANCE));
    }
    let failed = reports.iter().filter(|r| !r.passed).count();
    let worst = reports.iter().map(|r| r.max_rel_error).fold(0.0, f64::max);
    let path = out.join("gradcheck.json");
    let body = json!({ "cases": cases, "failed": failed, "max_rel_error": worst, "reports": reports });
    std::fs::write(&path, serde_json::to_string_pretty(&body).expect("json") + "\n").map_err(Error::io(&path))?;
    io.outputs.push(path);
    io.extra.insert("failed".into(), json!(failed));
    io.extra.insert("max_rel_error".into(), json!(worst));
    println!("{cases} cases, {failed} failed, max relative error {worst:e}");
    if failed > 0 {
        return Err(Error::Eval(format!("{failed} of {cases} gradient checks failed")));
    }
    Ok(())
}
