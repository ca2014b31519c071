//! `roiattn` command-line front end.
//!
//! Commands: `synth`, `train`, `eval`, `ablate`, `gradcheck`. Each writes a
//! `<command>.manifest.json` into `--out-dir` holding the fully resolved
//! configuration. Exit codes: 0 success, 1 validation error, 2 runtime failure.

pub mod ablate;
pub mod config;
pub mod manifest;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::data::{generate_synthetic, load_dataset, write_dataset, ImageRecord};
use crate::error::{Error, Result};
use crate::loss::LossConfig;
use crate::model::{load_checkpoint, save_checkpoint, ModelConfig, Readout};
use crate::train::{evaluate, gradcheck, split_indices, train, Fault, TrainConfig};

use ablate::{run_ablation, Variant};
use config::RunConfig;
use manifest::RunManifest;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "roiattn", version, about = "RoI attention classifier: data, training, evaluation")]
pub struct Cli {
    /// Seed for data generation, initialization and shuffling.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// TOML or JSON config file (a run manifest also works).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a planted-signal dataset.
    Synth(SynthArgs),
    /// Train a model and write the best-validation checkpoint.
    Train(TrainArgs),
    /// Score a dataset with a checkpoint and print metrics as JSON.
    Eval(EvalArgs),
    /// Train each ablation variant and compare them.
    Ablate(AblateArgs),
    /// Compare analytic gradients against finite differences.
    Gradcheck(GradcheckArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub a: Option<usize>,
    /// Planted signal strength.
    #[arg(long)]
    pub mu: Option<f64>,
    /// Embedding noise standard deviation.
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub positive_rate: Option<f64>,
}

#[derive(Debug, Args, Default)]
pub struct ModelArgs {
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub heads: Option<usize>,
    #[arg(long)]
    pub layers: Option<usize>,
    #[arg(long)]
    pub mlp_ratio: Option<usize>,
    #[arg(long)]
    pub rope_base: Option<f64>,
    #[arg(long)]
    pub rope_scale: Option<f64>,
    /// anchor, meanpool or maxpool.
    #[arg(long)]
    pub readout: Option<Readout>,
    #[arg(long)]
    pub no_rope: bool,
    /// Bypass the transformer blocks.
    #[arg(long)]
    pub no_attention: bool,
}

#[derive(Debug, Args, Default)]
pub struct TrainFlags {
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub lambda_rep: Option<f64>,
    #[arg(long)]
    pub val_fraction: Option<f64>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub train: TrainFlags,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Held-out set; without it a stratified 20% of `--data` is held out.
    #[arg(long)]
    pub test: Option<PathBuf>,
    /// Comma-separated subset of maxpool, anchor, anchor-rope,
    /// anchor-rope-rcl, anchor-probe.
    #[arg(long, value_delimiter = ',')]
    pub variants: Option<Vec<Variant>>,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub train: TrainFlags,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    /// Number of consecutive seeds starting at `--seed`.
    #[arg(long)]
    pub seeds: Option<usize>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, hide = true)]
    pub fault_inject: Option<String>,
}

impl ModelArgs {
    fn apply(&self, m: &mut ModelConfig) {
        set(&mut m.d, self.d);
        set(&mut m.heads, self.heads);
        set(&mut m.layers, self.layers);
        set(&mut m.mlp_ratio, self.mlp_ratio);
        set(&mut m.rope_base, self.rope_base);
        set(&mut m.rope_scale, self.rope_scale);
        set(&mut m.readout, self.readout);
        if self.no_rope {
            m.use_rope = false;
        }
        if self.no_attention {
            m.attention = false;
        }
    }
}

impl TrainFlags {
    fn apply(&self, t: &mut TrainConfig) {
        set(&mut t.lr, self.lr);
        set(&mut t.batch_size, self.batch_size);
        set(&mut t.epochs, self.epochs);
        set(&mut t.patience, self.patience);
        set(&mut t.lambda_rep, self.lambda_rep);
        set(&mut t.val_fraction, self.val_fraction);
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Io { .. } | Error::NonFinite(_) | Error::Json(_) => EXIT_RUNTIME,
        _ => EXIT_VALIDATION,
    }
}

struct Outcome {
    artifacts: BTreeMap<String, PathBuf>,
    code: i32,
}

impl Outcome {
    fn ok() -> Self {
        Outcome {
            artifacts: BTreeMap::new(),
            code: EXIT_OK,
        }
    }

    fn with(mut self, key: &str, path: &Path) -> Self {
        self.artifacts.insert(key.to_string(), path.to_path_buf());
        self
    }
}

fn load_records(path: &Path) -> Result<Vec<ImageRecord>> {
    let records = load_dataset(path)?;
    if records.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(records)
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

fn cmd_synth(args: &SynthArgs, cfg: &mut RunConfig, out_dir: &Path) -> Result<Outcome> {
    let s = &mut cfg.synth;
    set(&mut s.n, args.n);
    set(&mut s.k, args.k);
    set(&mut s.a, args.a);
    set(&mut s.signal_strength, args.mu);
    set(&mut s.noise_std, args.sigma);
    set(&mut s.positive_rate, args.positive_rate);
    s.validate()?;
    let records = generate_synthetic(s)?;
    let path = match &args.output {
        Some(p) => p.clone(),
        None => {
            ensure_dir(out_dir)?;
            out_dir.join("synth.jsonl")
        }
    };
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        ensure_dir(parent)?;
    }
    write_dataset(&records, &path)?;
    eprintln!("wrote {} records to {}", records.len(), path.display());
    Ok(Outcome::ok().with("dataset", &path))
}

fn cmd_train(args: &TrainArgs, cfg: &mut RunConfig, out_dir: &Path) -> Result<Outcome> {
    args.model.apply(&mut cfg.model);
    args.train.apply(&mut cfg.train);
    let records = load_records(&args.data)?;
    cfg.model.a = records[0].dim();
    let (params, report) = train(&records, &cfg.model, &cfg.train)?;
    ensure_dir(out_dir)?;
    let ckpt = out_dir.join("checkpoint.json");
    let report_path = out_dir.join("train_report.json");
    save_checkpoint(&ckpt, &cfg.model, &params)?;
    write_json(&report_path, &report)?;
    eprintln!(
        "epochs run: {}, best epoch: {:?}, best val AUC: {:?}",
        report.val_auc.len(),
        report.best_epoch,
        report.best_val_auc
    );
    Ok(Outcome::ok().with("checkpoint", &ckpt).with("report", &report_path))
}

fn cmd_eval(args: &EvalArgs, cfg: &mut RunConfig) -> Result<Outcome> {
    let (model, params) = load_checkpoint(&args.checkpoint)?;
    let records = load_records(&args.data)?;
    if records[0].dim() != model.a {
        return Err(Error::DimMismatch {
            expected: model.a,
            found: records[0].dim(),
        });
    }
    cfg.model = model.clone();
    let report = evaluate(&records, &params, &model)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(Outcome::ok().with("checkpoint", &args.checkpoint).with("data", &args.data))
}

fn cmd_ablate(args: &AblateArgs, cfg: &mut RunConfig, out_dir: &Path) -> Result<Outcome> {
    args.model.apply(&mut cfg.model);
    args.train.apply(&mut cfg.train);
    let records = load_records(&args.data)?;
    cfg.model.a = records[0].dim();
    let (train_set, test_set) = match &args.test {
        Some(p) => (records, load_records(p)?),
        None => {
            let (tr, te) = split_indices(&records, 0.2, cfg.train.seed ^ 0x7465_7374);
            (
                tr.iter().map(|&i| records[i].clone()).collect(),
                te.iter().map(|&i| records[i].clone()).collect::<Vec<_>>(),
            )
        }
    };
    let variants = args.variants.clone().unwrap_or_else(|| Variant::ALL.to_vec());
    let table = run_ablation(&variants, &train_set, &test_set, &cfg.model, &cfg.train);
    ensure_dir(out_dir)?;
    let json_path = out_dir.join("ablation.json");
    let text_path = out_dir.join("ablation.txt");
    write_json(&json_path, &table)?;
    let text = table.render();
    fs::write(&text_path, &text).map_err(|e| Error::io(&text_path, e))?;
    print!("{text}");
    for row in table.rows.iter().filter(|r| r.error.is_some()) {
        eprintln!("variant {} failed: {}", row.variant, row.error.as_deref().unwrap_or(""));
    }
    let mut out = Outcome::ok().with("table_json", &json_path).with("table_text", &text_path);
    if table.any_failed() {
        out.code = EXIT_RUNTIME;
    }
    Ok(out)
}

fn cmd_gradcheck(args: &GradcheckArgs, cfg: &mut RunConfig, seed: u64) -> Result<Outcome> {
    let g = &mut cfg.gradcheck;
    set(&mut g.seeds, args.seeds);
    set(&mut g.k, args.k);
    let fault = match args.fault_inject.as_deref() {
        None => None,
        Some("sign-flip") => Some(Fault::SignFlip),
        Some(other) => return Err(Error::config("fault_inject", format!("unknown fault {other:?}"))),
    };
    let loss = LossConfig {
        lambda_rep: g.lambda_rep,
        ..LossConfig::default()
    };
    let mut all_pass = true;
    for s in seed..seed + g.seeds.max(1) as u64 {
        let report = gradcheck(&g.model, &loss, g.k, s, fault)?;
        println!("{}", serde_json::to_string(&report)?);
        eprintln!(
            "seed {s}: max relative error {:.3e} at {} -> {}",
            report.max_rel_error,
            report.worst_param,
            if report.passed { "pass" } else { "FAIL" }
        );
        all_pass &= report.passed;
    }
    let mut out = Outcome::ok();
    if !all_pass {
        out.code = EXIT_VALIDATION;
    }
    Ok(out)
}

/// Parses `argv`, runs the command and returns the process exit code.
pub fn run(argv: Vec<String>) -> i32 {
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
        }
    };
    let start = Instant::now();
    let mut cfg = match &cli.config {
        Some(p) => match RunConfig::load(p) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("error: {e}");
                return exit_code(&e);
            }
        },
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.set_seed(seed);
    }
    let seed = cli.seed.unwrap_or(cfg.train.seed);
    let (name, result) = match &cli.command {
        Command::Synth(a) => ("synth", cmd_synth(a, &mut cfg, &cli.out_dir)),
        Command::Train(a) => ("train", cmd_train(a, &mut cfg, &cli.out_dir)),
        Command::Eval(a) => ("eval", cmd_eval(a, &mut cfg)),
        Command::Ablate(a) => ("ablate", cmd_ablate(a, &mut cfg, &cli.out_dir)),
        Command::Gradcheck(a) => ("gradcheck", cmd_gradcheck(a, &mut cfg, seed)),
    };
    let (artifacts, code) = match result {
        Ok(o) => (o.artifacts, o.code),
        Err(e) => {
            eprintln!("error: {e}");
            (BTreeMap::new(), exit_code(&e))
        }
    };
    let manifest = RunManifest {
        command: name.to_string(),
        argv,
        config: cfg,
        seed,
        artifacts,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        duration_secs: start.elapsed().as_secs_f64(),
        exit_code: code,
    };
    if let Err(e) = manifest.write(&cli.out_dir) {
        eprintln!("error: writing manifest: {e}");
        return code.max(EXIT_RUNTIME);
    }
    code
}

pub fn main() -> i32 {
    run(std::env::args().collect())
}
