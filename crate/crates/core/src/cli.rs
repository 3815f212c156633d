//! Command-line front end. Settings come from an optional flat TOML file and
//! from flags; a flag wins over the same key in the file.

use std::ffi::OsString;
use std::fmt;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use crate::corered::{CorrelationBatch, Eq7Form};
use crate::encoder::{Backbone, EncoderConfig};
use crate::graphdata::{self, DataError, Dataset, SbmParams};
use crate::ndiff::Checkpoint;
use crate::trainer::{self, Ablation, TrainConfig, TrainError};

pub const EXIT_OK: u8 = 0;
pub const EXIT_CHECK_FAILED: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_RUNTIME: u8 = 3;

/// Largest relative error accepted by `gradcheck`.
pub const GRADCHECK_TOLERANCE: f64 = 1e-4;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Runtime(m) => f.write_str(m),
        }
    }
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Config(_) | TrainError::Data(_) => CliError::Usage(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        CliError::Usage(e.to_string())
    }
}

/// Correlation batch given as a node count or `"all"`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(try_from = "BatchRepr")]
pub struct BatchArg(pub CorrelationBatch);

#[derive(Deserialize)]
#[serde(untagged)]
enum BatchRepr {
    Count(usize),
    Name(String),
}

impl TryFrom<BatchRepr> for BatchArg {
    type Error = String;

    fn try_from(r: BatchRepr) -> Result<Self, String> {
        match r {
            BatchRepr::Count(n) => Ok(BatchArg(CorrelationBatch::Size(n))),
            BatchRepr::Name(s) => s.parse(),
        }
    }
}

impl FromStr for BatchArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "all" {
            return Ok(BatchArg(CorrelationBatch::All));
        }
        s.parse::<usize>()
            .map(|n| BatchArg(CorrelationBatch::Size(n)))
            .map_err(|_| format!("correlation_batch must be a node count or \"all\", got {s:?}"))
    }
}

fn parse_from_str<T: FromStr<Err = String>>(s: &str) -> Result<T, String> {
    s.parse()
}

/// Every tunable setting. Doubles as the schema of the config file and as
/// the flag set, so the two cannot drift apart.
#[derive(Args, Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct CliConfig {
    /// Dataset name; `sbm` generates a synthetic graph, anything else is
    /// loaded from `data_dir` (default `data/<name>`).
    #[arg(long)]
    pub dataset: Option<String>,
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
    /// Comma-separated SBM block sizes.
    #[arg(long, value_delimiter = ',')]
    pub sbm_blocks: Option<Vec<usize>>,
    #[arg(long)]
    pub sbm_pin: Option<f64>,
    #[arg(long)]
    pub sbm_pout: Option<f64>,
    #[arg(long)]
    pub sbm_feature_dim: Option<usize>,
    #[arg(long)]
    pub sbm_feature_shift: Option<f64>,
    #[arg(long)]
    pub sbm_seed: Option<u64>,

    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub weight_decay: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub runs: Option<usize>,
    #[arg(long, value_parser = parse_from_str::<BatchArg>)]
    pub correlation_batch: Option<BatchArg>,
    #[arg(long, value_parser = parse_from_str::<Ablation>)]
    pub ablation: Option<Ablation>,
    #[arg(long, value_parser = parse_from_str::<Eq7Form>)]
    pub eq7_form: Option<Eq7Form>,

    #[arg(long)]
    pub hidden_dim: Option<usize>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub ppr_alpha: Option<f64>,
    #[arg(long)]
    pub dropout: Option<f64>,
    #[arg(long, value_parser = parse_from_str::<Backbone>)]
    pub backbone: Option<Backbone>,
}

macro_rules! overlay {
    ($base:expr, $top:expr, $($field:ident),+) => {
        $( if $top.$field.is_some() { $base.$field = $top.$field.clone(); } )+
    };
}

impl CliConfig {
    pub fn from_toml(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.message().trim().to_string())
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))
    }

    /// `self` with every key set in `top` replaced.
    pub fn overlay(mut self, top: &CliConfig) -> Self {
        overlay!(
            self,
            top,
            dataset,
            data_dir,
            sbm_blocks,
            sbm_pin,
            sbm_pout,
            sbm_feature_dim,
            sbm_feature_shift,
            sbm_seed,
            lambda,
            alpha,
            lr,
            epochs,
            weight_decay,
            seed,
            runs,
            correlation_batch,
            ablation,
            eq7_form,
            hidden_dim,
            k,
            ppr_alpha,
            dropout,
            backbone
        );
        self
    }

    pub fn dataset_name(&self) -> &str {
        self.dataset.as_deref().unwrap_or("sbm")
    }

    pub fn sbm_params(&self) -> SbmParams {
        let d = SbmParams::default();
        SbmParams {
            block_sizes: self.sbm_blocks.clone().unwrap_or(d.block_sizes),
            p_in: self.sbm_pin.unwrap_or(d.p_in),
            p_out: self.sbm_pout.unwrap_or(d.p_out),
            feature_dim: self.sbm_feature_dim.unwrap_or(d.feature_dim),
            feature_shift: self.sbm_feature_shift.unwrap_or(d.feature_shift),
            seed: self.sbm_seed.unwrap_or(d.seed),
        }
    }

    pub fn load_dataset(&self) -> Result<Dataset, CliError> {
        let name = self.dataset_name();
        if name == "sbm" && self.data_dir.is_none() {
            return Ok(graphdata::generate_sbm(&self.sbm_params())?);
        }
        let dir = self.data_dir.clone().unwrap_or_else(|| Path::new("data").join(name));
        let mut ds = graphdata::load_dataset(&dir)?;
        ds.name = name.to_string();
        Ok(ds)
    }

    pub fn train_config(&self) -> Result<TrainConfig, CliError> {
        let d = TrainConfig::default();
        let e = EncoderConfig::default();
        let cfg = TrainConfig {
            lambda: self.lambda.unwrap_or(d.lambda),
            alpha: self.alpha.unwrap_or(d.alpha),
            lr: self.lr.unwrap_or_else(|| trainer::default_learning_rate(self.dataset_name())),
            epochs: self.epochs.unwrap_or(d.epochs),
            weight_decay: self.weight_decay.unwrap_or(d.weight_decay),
            encoder: EncoderConfig {
                hidden_dim: self.hidden_dim.unwrap_or(e.hidden_dim),
                k: self.k.unwrap_or(e.k),
                ppr_alpha: self.ppr_alpha.unwrap_or(e.ppr_alpha),
                dropout: self.dropout.unwrap_or(e.dropout),
                backbone: self.backbone.unwrap_or(e.backbone),
            },
            seed: self.seed.unwrap_or(d.seed),
            runs: self.runs.unwrap_or(d.runs),
            correlation_batch: self.correlation_batch.map_or(d.correlation_batch, |b| b.0),
            ablation: self.ablation.unwrap_or(d.ablation),
            eq7_form: self.eq7_form.unwrap_or(d.eq7_form),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args, Clone, Debug)]
pub struct Settings {
    /// TOML file with the same keys as the flags (underscored).
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub flags: CliConfig,
}

impl Settings {
    pub fn resolve(&self) -> Result<CliConfig, CliError> {
        let base = match &self.config {
            Some(path) => CliConfig::load(path)?,
            None => CliConfig::default(),
        };
        Ok(base.overlay(&self.flags))
    }
}

#[derive(Parser, Debug)]
#[command(name = "mgcn", version, about = "Mixed graph contrastive network for node classification")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Train over several seeds; writes metrics and checkpoints, prints the
    /// test accuracy summary.
    Train {
        #[command(flatten)]
        settings: Settings,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
    /// Run the four ablation variants and write `variant,mean,std,runs`.
    Ablate {
        #[command(flatten)]
        settings: Settings,
        #[arg(long, default_value = "ablation.csv")]
        out: PathBuf,
    },
    /// Finite-difference check of the full loss on a random 12-node graph.
    Gradcheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-4)]
        eps: f64,
        /// Scale analytic gradients by 1.5 before comparing.
        #[arg(long)]
        corrupt_grad: bool,
    },
    /// Similarity and embedding exports from a saved checkpoint.
    Export {
        #[command(flatten)]
        settings: Settings,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        similarity: Option<PathBuf>,
        #[arg(long)]
        embeddings: Option<PathBuf>,
    },
    /// Accuracy over a grid of `alpha` or `lambda` values, as `value,mean,std`.
    Sweep {
        #[command(flatten)]
        settings: Settings,
        #[arg(long)]
        param: String,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[arg(long, default_value = "sweep.csv")]
        out: PathBuf,
    },
    /// Write a synthetic block-model dataset directory.
    SbmGen {
        #[command(flatten)]
        settings: Settings,
        #[arg(long)]
        out: PathBuf,
    },
    /// Convert a LINQS `.content`/`.cites` pair into a dataset directory.
    ImportLinqs {
        #[arg(long)]
        content: PathBuf,
        #[arg(long)]
        cites: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn write_out(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| CliError::Runtime(format!("{}: {e}", parent.display())))?;
    }
    fs::write(path, text).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

fn cmd_train(settings: &Settings, out_dir: &Path) -> Result<String, CliError> {
    let cfg = settings.resolve()?;
    let train_cfg = cfg.train_config()?;
    let ds = cfg.load_dataset()?;
    let result = trainer::run_multi(&ds, &train_cfg)?;
    write_out(&out_dir.join("metrics.jsonl"), &trainer::metrics_jsonl(&result.runs))?;
    for r in &result.runs {
        write_out(&out_dir.join(format!("run{}.checkpoint.json", r.run)), &r.checkpoint().to_json())?;
    }
    Ok(format!("test_acc {:.4}±{:.4} over {} runs", result.mean, result.std, result.runs.len()))
}

fn cmd_ablate(settings: &Settings, out: &Path) -> Result<String, CliError> {
    let cfg = settings.resolve()?;
    let train_cfg = cfg.train_config()?;
    let ds = cfg.load_dataset()?;
    let rows = trainer::run_ablation(&ds, &train_cfg)?;
    let csv = trainer::ablation_csv(&rows);
    write_out(out, &csv)?;
    Ok(csv.trim_end().to_string())
}

fn cmd_gradcheck(seed: u64, eps: f64, corrupt: bool) -> Result<(String, bool), CliError> {
    let scale = if corrupt { 1.5 } else { 1.0 };
    let report = trainer::gradcheck_full_model(seed, eps, scale)?;
    let ok = report.max_rel_error < GRADCHECK_TOLERANCE;
    let line = format!(
        "max_rel_error {} over {} coordinates (worst: {}[{}]) {}",
        report.max_rel_error,
        report.coordinates,
        report.param,
        report.index,
        if ok { "PASS" } else { "FAIL" }
    );
    Ok((line, ok))
}

fn cmd_export(
    settings: &Settings,
    checkpoint: &Path,
    sim: Option<&Path>,
    emb: Option<&Path>,
) -> Result<String, CliError> {
    if sim.is_none() && emb.is_none() {
        return Err(CliError::Usage("export needs --similarity and/or --embeddings".into()));
    }
    let cfg = settings.resolve()?;
    let train_cfg = cfg.train_config()?;
    let ds = cfg.load_dataset()?;
    let ck = Checkpoint::load(checkpoint).map_err(|e| CliError::Usage(e.to_string()))?;
    let mut params = crate::encoder::init_for(&train_cfg.encoder, ds.feature_dim(), ds.num_classes, 0);
    ck.restore_into(&mut params).map_err(|e| CliError::Usage(e.to_string()))?;
    let mut written = Vec::new();
    if let Some(path) = sim {
        let side = trainer::export_similarity(&params, &ds, &train_cfg.encoder, path)?;
        written.push(path.display().to_string());
        written.push(side.display().to_string());
    }
    if let Some(path) = emb {
        trainer::export_embeddings(&params, &ds, &train_cfg.encoder, path)?;
        written.push(path.display().to_string());
    }
    Ok(format!("wrote {}", written.join(", ")))
}

fn cmd_sweep(settings: &Settings, param: &str, values: &[f64], out: &Path) -> Result<String, CliError> {
    if param != "alpha" && param != "lambda" {
        return Err(CliError::Usage(format!("unknown sweep parameter {param:?} (expected alpha or lambda)")));
    }
    let cfg = settings.resolve()?;
    let base = cfg.train_config()?;
    let ds = cfg.load_dataset()?;
    let mut csv = String::from("value,mean,std\n");
    for &v in values {
        let mut c = base.clone();
        if param == "alpha" {
            c.alpha = v;
        } else {
            c.lambda = v;
        }
        let r = trainer::run_multi(&ds, &c)?;
        csv += &format!("{v},{},{}\n", r.mean, r.std);
    }
    write_out(out, &csv)?;
    Ok(csv.trim_end().to_string())
}

fn cmd_sbm_gen(settings: &Settings, out: &Path) -> Result<String, CliError> {
    let cfg = settings.resolve()?;
    let ds = graphdata::generate_sbm(&cfg.sbm_params())?;
    ds.save(out).map_err(|e| CliError::Runtime(e.to_string()))?;
    Ok(format!(
        "wrote {} ({} nodes, {} edges, {} classes)",
        out.display(),
        ds.num_nodes(),
        ds.graph.num_edges(),
        ds.num_classes
    ))
}

fn cmd_import(content: &Path, cites: &Path, out: &Path) -> Result<String, CliError> {
    let ds = graphdata::import_linqs(content, cites)?;
    ds.save(out).map_err(|e| CliError::Runtime(e.to_string()))?;
    Ok(format!(
        "wrote {} ({} nodes, {} edges, {} features, {} classes)",
        out.display(),
        ds.num_nodes(),
        ds.graph.num_edges(),
        ds.feature_dim(),
        ds.num_classes
    ))
}

/// Executes a parsed command, printing its report; returns the exit code.
pub fn execute(cli: Cli) -> u8 {
    let outcome = match &cli.command {
        Command::Train { settings, out_dir } => cmd_train(settings, out_dir).map(|s| (s, true)),
        Command::Ablate { settings, out } => cmd_ablate(settings, out).map(|s| (s, true)),
        Command::Gradcheck { seed, eps, corrupt_grad } => cmd_gradcheck(*seed, *eps, *corrupt_grad),
        Command::Export { settings, checkpoint, similarity, embeddings } => {
            cmd_export(settings, checkpoint, similarity.as_deref(), embeddings.as_deref()).map(|s| (s, true))
        }
        Command::Sweep { settings, param, values, out } => cmd_sweep(settings, param, values, out).map(|s| (s, true)),
        Command::SbmGen { settings, out } => cmd_sbm_gen(settings, out).map(|s| (s, true)),
        Command::ImportLinqs { content, cites, out } => cmd_import(content, cites, out).map(|s| (s, true)),
    };
    match outcome {
        Ok((report, ok)) => {
            let _ = writeln!(std::io::stdout(), "{report}");
            if ok {
                EXIT_OK
            } else {
                EXIT_CHECK_FAILED
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.code()
        }
    }
}

/// Parses `args` (program name first) and executes the command.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => ExitCode::from(execute(cli)),
        Err(e) => {
            let _ = e.print();
            ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { EXIT_OK })
        }
    }
}

#[cfg(test)]
mod tests {
    use clap::CommandFactory;

    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("mgcn").chain(args.iter().copied())).unwrap()
    }

    fn settings_of(cli: &Cli) -> &Settings {
        match &cli.command {
            Command::Train { settings, .. } => settings,
            _ => panic!("not train"),
        }
    }

    #[test]
    fn clap_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn toml_keys_and_unknown_key_rejection() {
        let cfg = CliConfig::from_toml(
            "dataset = \"sbm\"\nsbm_blocks = [5, 5]\nsbm_pin = 1.0\nlambda = 0.8\ncorrelation_batch = 64\nablation = \"B+C\"\neq7_form = \"mean_square\"\nbackbone = \"gcn2\"\n",
        )
        .unwrap();
        assert_eq!(cfg.sbm_blocks, Some(vec![5, 5]));
        assert_eq!(cfg.correlation_batch, Some(BatchArg(CorrelationBatch::Size(64))));
        assert_eq!(cfg.ablation, Some(Ablation::BC));
        assert_eq!(cfg.eq7_form, Some(Eq7Form::MeanSquare));
        assert_eq!(cfg.backbone, Some(Backbone::Gcn2));
        let all = CliConfig::from_toml("correlation_batch = \"all\"").unwrap();
        assert_eq!(all.correlation_batch, Some(BatchArg(CorrelationBatch::All)));
        let err = CliConfig::from_toml("lamda = 0.5").unwrap_err();
        assert!(err.contains("lamda"), "{err}");
    }

    #[test]
    fn flags_override_file_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        fs::write(&path, "lambda = 0.7\nalpha = 0.3\nepochs = 12\n").unwrap();
        let cli = parse(&["train", "--config", path.to_str().unwrap(), "--alpha", "0.9"]);
        let cfg = settings_of(&cli).resolve().unwrap().train_config().unwrap();
        assert_eq!((cfg.lambda, cfg.alpha, cfg.epochs), (0.7, 0.9, 12));
    }

    #[test]
    fn learning_rate_follows_dataset_unless_given() {
        let cli = parse(&["train", "--dataset", "citeseer"]);
        assert_eq!(settings_of(&cli).resolve().unwrap().train_config().unwrap().lr, 1e-3);
        let cli = parse(&["train", "--dataset", "citeseer", "--lr", "0.5"]);
        assert_eq!(settings_of(&cli).resolve().unwrap().train_config().unwrap().lr, 0.5);
    }

    #[test]
    fn invalid_values_are_usage_errors() {
        let cli = parse(&["train", "--lambda", "1.2"]);
        let err = settings_of(&cli).resolve().unwrap().train_config().unwrap_err();
        assert_eq!(err.code(), EXIT_USAGE);
        assert!(err.to_string().contains("lambda"));
        assert!(Cli::try_parse_from(["mgcn", "train", "--ablation", "B+Z"]).is_err());
        assert!(Cli::try_parse_from(["mgcn", "train", "--correlation-batch", "some"]).is_err());
    }
}
