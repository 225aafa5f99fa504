//! `robcomp` command-line front end.
//!
//! Every command writes one report (JSON or CSV) to `--out` or stdout. On
//! failure the report is an error object and the exit code is 2 for invalid
//! input or configuration and 3 for unreadable or malformed files.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Map, Value};

use robcomp::attack::{evaluate_robustness, evaluate_uae, AlignmentProbe, AttackConfig};
use robcomp::bounds::{
    bound_opnorm_2_detail, bound_opnorm_inf_detail, bound_report_with_risk, lipschitz_bound, BoundConfig,
    KConfig, SearchConfig, ShapePolicy,
};
use robcomp::compress::{default_k, profile, StructureKind};
use robcomp::data::{generate_synthetic, DatasetSource, DatasetSpec, LabelMap};
use robcomp::io::{dataset_to_csv, dataset_to_string, load_dataset, load_model, save_model, ModelMetadata};
use robcomp::nn::{evaluate, train, Network, RegularizerKind, RegularizerSpec, TrainConfig};
use robcomp::prune::{
    default_eps_grid, eps_targeted_global_prune, layerwise_prune, retention_eval, PruneKind, PruneMethod,
};
use robcomp::report::{config_digest, render, to_json_pretty, OutputFormat};
use robcomp::{Error, NormKind, Result};

#[derive(Parser, Serialize)]
#[command(name = "robcomp", version, about = "Compressibility, Lipschitz bounds, attacks and pruning for ReLU networks")]
struct Cli {
    /// Seed for every random choice the command makes.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Report path; stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
enum Format {
    Json,
    Csv,
}

impl From<Format> for OutputFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Json => OutputFormat::Json,
            Format::Csv => OutputFormat::Csv,
        }
    }
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
enum Norm {
    Two,
    Inf,
}

impl From<Norm> for NormKind {
    fn from(n: Norm) -> Self {
        match n {
            Norm::Two => NormKind::Two,
            Norm::Inf => NormKind::Inf,
        }
    }
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
enum Kind {
    Rows,
    Spectral,
}

impl From<Kind> for PruneKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Rows => PruneKind::Rows,
            Kind::Spectral => PruneKind::Spectral,
        }
    }
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
enum Method {
    Layerwise,
    Global,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
enum Source {
    GaussianBlobs,
    TwoMoons,
    MnistIdx,
}

#[derive(Subcommand, Serialize)]
enum Command {
    /// Compressibility profiles and per-layer operator-norm bounds.
    Audit(AuditArgs),
    /// Lipschitz bound, and the adversarial risk bound when data is given.
    Bound(BoundArgs),
    /// Train a network and save it.
    Train(TrainArgs),
    /// PGD robustness (and optionally a universal perturbation).
    Attack(AttackArgs),
    /// Prune a network and report accuracy retention.
    Prune(PruneArgs),
    /// Generate or convert a dataset.
    GenData(GenDataArgs),
}

#[derive(Args, Serialize)]
struct AuditArgs {
    #[arg(long)]
    model: PathBuf,
    /// Retained count; defaults to ceil(0.1·rows) per layer.
    #[arg(long)]
    k: Option<usize>,
    /// Allow non-square layers (uses h = max(rows, cols)).
    #[arg(long)]
    permissive: bool,
}

#[derive(Args, Serialize)]
struct BoundArgs {
    #[arg(long)]
    model: PathBuf,
    /// Binary dataset for the risk bound.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Norm::Two)]
    norm: Norm,
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    permissive: bool,
    /// Enumerate all activation patterns up to this support size.
    #[arg(long, default_value_t = 14)]
    exact_threshold: usize,
    #[arg(long, default_value_t = 16)]
    restarts: usize,
}

#[derive(Args, Serialize)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    /// Where to write the trained model.
    #[arg(long)]
    model_out: PathBuf,
    /// Full training configuration as JSON; flags below fill the rest.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 64)]
    width: usize,
    #[arg(long, default_value_t = 1)]
    depth: usize,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    nuclear: Option<f64>,
    #[arg(long)]
    group_lasso: Option<f64>,
    /// Frobenius norm every hidden layer is projected onto after each step.
    #[arg(long)]
    frobenius: Option<f64>,
}

#[derive(Args, Serialize)]
struct AttackArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum, default_value_t = Norm::Two)]
    norm: Norm,
    #[arg(long)]
    delta: f64,
    #[arg(long, default_value_t = 40)]
    steps: usize,
    #[arg(long, default_value_t = 5)]
    restarts: usize,
    #[arg(long)]
    step_size: Option<f64>,
    /// Keep attacked inputs inside [lo, hi].
    #[arg(long, num_args = 2, value_names = ["LO", "HI"])]
    clip: Option<Vec<f64>>,
    /// Also fit a universal perturbation on the data for this many epochs.
    #[arg(long)]
    uae_epochs: Option<usize>,
    /// Include per-example outcomes in the report.
    #[arg(long)]
    examples: bool,
}

#[derive(Args, Serialize)]
struct PruneArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, value_enum, default_value_t = Kind::Rows)]
    kind: Kind,
    #[arg(long, value_enum, default_value_t = Method::Layerwise)]
    method: Method,
    /// Retained parameter ratios to evaluate.
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.2,0.3,0.5,0.7,1.0")]
    ratios: Vec<f64>,
    /// Dataset for the retention curve.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Save the model pruned at the first ratio.
    #[arg(long)]
    model_out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct GenDataArgs {
    /// Dataset spec as JSON; overrides the flags below.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Source::GaussianBlobs)]
    source: Source,
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    #[arg(long, default_value_t = 2)]
    dim: usize,
    #[arg(long, default_value_t = 2)]
    classes: usize,
    #[arg(long, default_value_t = 3.0)]
    separation: f64,
    #[arg(long, default_value_t = 0.5)]
    noise: f64,
    #[arg(long)]
    images: Option<PathBuf>,
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long)]
    limit: Option<usize>,
    /// Map labels below the threshold to 0 and the rest to 1.
    #[arg(long)]
    binary_threshold: Option<usize>,
}

/// A report body plus the array CSV output should tabulate.
struct Report {
    body: Value,
    table: Option<&'static str>,
}

fn report<T: Serialize>(value: &T, table: Option<&'static str>) -> Result<Report> {
    Ok(Report {
        body: serde_json::to_value(value)?,
        table,
    })
}

fn bad(msg: impl Into<String>) -> Error {
    Error::BadConfig(msg.into())
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

fn bound_config(k: Option<usize>, permissive: bool, exact_threshold: usize, restarts: usize, seed: u64) -> BoundConfig {
    BoundConfig {
        k: k.map_or(KConfig::Default, KConfig::Shared),
        search: SearchConfig {
            exact_threshold,
            restarts,
            seed,
        },
        policy: if permissive {
            ShapePolicy::Permissive
        } else {
            ShapePolicy::Strict
        },
    }
}

fn audit(a: &AuditArgs) -> Result<Report> {
    let (net, _) = load_model(&a.model)?;
    let policy = if a.permissive {
        ShapePolicy::Permissive
    } else {
        ShapePolicy::Strict
    };
    let mut layers = Vec::new();
    for (i, w) in net.hidden().iter().enumerate() {
        let k = a.k.unwrap_or_else(|| default_k(w.rows()));
        let mut row = Map::new();
        row.insert("layer".into(), json!(i));
        row.insert("rows".into(), json!(w.rows()));
        row.insert("cols".into(), json!(w.cols()));
        row.insert("k".into(), json!(k));
        for (name, kind) in [
            ("row", StructureKind::Row),
            ("spectral", StructureKind::Spectral),
            ("within_row", StructureKind::WithinRow),
            ("unstructured", StructureKind::Unstructured),
        ] {
            let kk = k.min(kind.vector(w)?.len());
            let p = profile(w, kind, kk)?;
            row.insert(format!("eps_{name}"), json!(p.epsilon));
            row.insert(format!("beta_{name}"), json!(p.beta));
        }
        row.insert("row_norm_bound".into(), serde_json::to_value(bound_opnorm_inf_detail(w, k, k, policy)?)?);
        let ks = k.min(w.rows().min(w.cols()));
        row.insert("spectral_norm_bound".into(), serde_json::to_value(bound_opnorm_2_detail(w, ks, policy)?)?);
        layers.push(Value::Object(row));
    }
    Ok(Report {
        body: json!({ "depth": net.depth(), "layers": layers }),
        table: Some("layers"),
    })
}

fn bound(a: &BoundArgs, seed: u64) -> Result<Report> {
    let (net, _) = load_model(&a.model)?;
    let cfg = bound_config(a.k, a.permissive, a.exact_threshold, a.restarts, seed);
    let r = match &a.data {
        Some(p) => bound_report_with_risk(&net, &load_dataset(p)?, a.delta, a.norm.into(), &cfg)?,
        None => lipschitz_bound(&net, a.norm.into(), &cfg)?,
    };
    report(&r, Some("per_layer"))
}

fn train_cmd(a: &TrainArgs, seed: u64) -> Result<Report> {
    let data = load_dataset(&a.data)?;
    let mut cfg: TrainConfig = match &a.config {
        Some(p) => read_json(p)?,
        None => TrainConfig::default(),
    };
    cfg.seed = seed;
    if let Some(v) = a.lr {
        cfg.learning_rate = v;
    }
    if let Some(v) = a.epochs {
        cfg.max_epochs = v;
    }
    if let Some(v) = a.batch_size {
        cfg.batch_size = v;
    }
    if let Some(v) = a.nuclear {
        cfg.regularizers.push(RegularizerSpec::new(RegularizerKind::Nuclear, v));
    }
    if let Some(v) = a.group_lasso {
        cfg.regularizers.push(RegularizerSpec::new(RegularizerKind::GroupLasso, v));
    }
    if let Some(v) = a.frobenius {
        cfg.frobenius_targets = vec![Some(v); a.depth];
    }
    if a.width == 0 || a.depth == 0 {
        return Err(bad("width and depth must be ≥ 1"));
    }
    let outputs = if data.num_classes == 2 { 1 } else { data.num_classes };
    let init = Network::random(data.dim(), a.width, a.depth, outputs, seed);
    let (net, history) = train(&init, &data, &cfg)?;
    let meta = ModelMetadata {
        seed,
        config_digest: config_digest(&cfg)?,
        created_unix: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
    };
    save_model(&a.model_out, &net, &meta)?;
    let (loss, acc) = evaluate(&net, &data);
    Ok(Report {
        body: json!({
            "model": a.model_out.display().to_string(),
            "train_config": cfg,
            "train_config_digest": meta.config_digest,
            "final_loss": loss,
            "final_accuracy": acc,
            "best_epoch": history.best_epoch,
            "stopped_early": history.stopped_early,
            "epochs": history.epochs,
        }),
        table: Some("epochs"),
    })
}

fn attack_cmd(a: &AttackArgs, seed: u64) -> Result<Report> {
    let (net, _) = load_model(&a.model)?;
    let data = load_dataset(&a.data)?;
    let mut cfg = AttackConfig::new(a.norm.into(), a.delta);
    cfg.steps = a.steps;
    cfg.restarts = a.restarts;
    cfg.step_size = a.step_size;
    cfg.seed = seed;
    cfg.clip = a.clip.as_ref().map(|c| [c[0], c[1]]);
    cfg.validate()?;
    let probe = net.hidden().first().map(|w| AlignmentProbe {
        layer: 0,
        k: default_k(w.rows().min(w.cols())),
    });
    let mut outcome = evaluate_robustness(&net, &data, &cfg, probe)?;
    if !a.examples {
        outcome.examples.clear();
    }
    let mut body = serde_json::to_value(&outcome)?;
    if let Some(epochs) = a.uae_epochs {
        let mut u = evaluate_uae(&net, &data, &data, &cfg, epochs, 32)?;
        u.perturbation.clear();
        body["uae"] = serde_json::to_value(&u)?;
    }
    body["attack_config"] = serde_json::to_value(&cfg)?;
    Ok(Report {
        body,
        table: Some("examples"),
    })
}

fn prune_cmd(a: &PruneArgs) -> Result<Report> {
    let (net, meta) = load_model(&a.model)?;
    let kind: PruneKind = a.kind.into();
    let grid = default_eps_grid();
    let first = *a.ratios.first().ok_or_else(|| bad("at least one ratio is required"))?;
    let (pruned, plan) = match a.method {
        Method::Layerwise => layerwise_prune(&net, kind, first)?,
        Method::Global => eps_targeted_global_prune(&net, kind, first, &grid)?,
    };
    if let Some(p) = &a.model_out {
        save_model(p, &pruned, &meta)?;
    }
    let method = match a.method {
        Method::Layerwise => PruneMethod::Layerwise,
        Method::Global => PruneMethod::Global,
    };
    let retention = match &a.data {
        Some(p) => retention_eval(&net, kind, method, &a.ratios, &load_dataset(p)?, None, &grid)?,
        None => Vec::new(),
    };
    Ok(Report {
        body: json!({ "plan": plan, "retention": retention }),
        table: Some("retention"),
    })
}

fn gen_data(a: &GenDataArgs, seed: u64, format: Format) -> Result<String> {
    let spec: DatasetSpec = match &a.spec {
        Some(p) => read_json(p)?,
        None => DatasetSpec {
            source: match a.source {
                Source::GaussianBlobs => DatasetSource::GaussianBlobs {
                    samples: a.samples,
                    dim: a.dim,
                    classes: a.classes,
                    separation: a.separation,
                    noise: a.noise,
                },
                Source::TwoMoons => DatasetSource::TwoMoons {
                    samples: a.samples,
                    noise: a.noise,
                },
                Source::MnistIdx => DatasetSource::MnistIdx {
                    images: path_arg(&a.images, "--images")?,
                    labels: path_arg(&a.labels, "--labels")?,
                    limit: a.limit,
                },
            },
            seed,
            label_map: a.binary_threshold.map(|threshold| LabelMap::Binary { threshold }),
        },
    };
    let d = generate_synthetic(&spec)?;
    match format {
        Format::Json => dataset_to_string(&d),
        Format::Csv => dataset_to_csv(&d),
    }
}

fn path_arg(p: &Option<PathBuf>, flag: &str) -> Result<String> {
    p.as_ref()
        .map(|p| p.display().to_string())
        .ok_or_else(|| bad(format!("{flag} is required for IDX input")))
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Audit(_) => "audit",
        Command::Bound(_) => "bound",
        Command::Train(_) => "train",
        Command::Attack(_) => "attack",
        Command::Prune(_) => "prune",
        Command::GenData(_) => "gen-data",
    }
}

/// Runs the command and returns the text to emit.
fn execute(cli: &Cli) -> Result<String> {
    let r = match &cli.command {
        Command::GenData(a) => return gen_data(a, cli.seed, cli.format),
        Command::Audit(a) => audit(a)?,
        Command::Bound(a) => bound(a, cli.seed)?,
        Command::Train(a) => train_cmd(a, cli.seed)?,
        Command::Attack(a) => attack_cmd(a, cli.seed)?,
        Command::Prune(a) => prune_cmd(a)?,
    };
    let mut top = Map::new();
    top.insert("command".into(), json!(command_name(&cli.command)));
    top.insert("seed".into(), json!(cli.seed));
    top.insert("config_digest".into(), json!(config_digest(&cli.command)?));
    match r.body {
        Value::Object(m) => top.extend(m),
        other => {
            top.insert("result".into(), other);
        }
    }
    render(&Value::Object(top), cli.format.into(), r.table)
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => println!("{}", text.trim_end()),
    }
    Ok(())
}

fn error_report(cli: &Cli, e: &Error, code: u8) -> String {
    let body = json!({
        "command": command_name(&cli.command),
        "seed": cli.seed,
        "error": {
            "kind": if code == 3 { "io_or_format" } else { "validation" },
            "message": e.to_string(),
            "exit_code": code,
        },
    });
    match cli.format {
        Format::Json => to_json_pretty(&body).unwrap_or_else(|_| body.to_string()),
        Format::Csv => render(&body, OutputFormat::Csv, None).unwrap_or_else(|_| body.to_string()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = execute(&cli).and_then(|text| emit(cli.out.as_deref(), &text));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let code = if e.is_io_or_format() { 3 } else { 2 };
            let text = error_report(&cli, &e, code);
            eprintln!("error: {e}");
            if emit(cli.out.as_deref(), &text).is_err() {
                eprintln!("{text}");
            }
            ExitCode::from(code)
        }
    }
}
