//! The `fjd` command-line interface.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or format error,
//! 3 numerical failure.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::embedders::{n_hot, one_hot, pca_fit};
use crate::embedding::EmbeddingSet;
use crate::error::{FjdError, Result};
use crate::frechet::{FrechetResult, Parallelism};
use crate::harness::{
    run_experiment_streaming, swap_steps, ExperimentConfig, ExperimentKind, ResultTable, DEFAULT_SAMPLES,
    DEFAULT_SWAP_FRACTION,
};
use crate::io::{
    format_f64, read_embeddings, read_manifest, regenerate, results_to_csv, results_to_json, write_dataset,
    write_embeddings, GeneratorConfig, Perturbation, ResultFormat,
};
use crate::joint::{calibrate_alpha, sweep_alpha, JointConfig, JointEvaluator, PairedEmbeddings, ScoreMetadata};
use crate::synth::dataset::{CondType, Factor, GroupLayout};
use crate::synth::perturb::DiversityConfig;
use crate::synth::sprite::Shape;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "fjd", version, about = "FID and Frechet Joint Distance over embedding files")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// FID and FJD between a reference and a generated paired set.
    Compute(ComputeArgs),
    /// Print the auto-calibrated alpha for a reference set.
    CalibrateAlpha(RefArgs),
    /// FJD at each alpha in a list.
    SweepAlpha(SweepAlphaArgs),
    /// Generate a synthetic sprite corpus.
    #[command(subcommand)]
    Synth(SynthCommand),
    /// Closed-form demonstrations.
    #[command(subcommand)]
    Demo(DemoCommand),
    /// Turn raw inputs into FJDE embedding files.
    #[command(subcommand)]
    Embed(EmbedCommand),
    /// Run a full sensitivity sweep and emit a result table.
    Experiment(ExperimentArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum OutFormat {
    Json,
    Csv,
}

impl From<OutFormat> for ResultFormat {
    fn from(f: OutFormat) -> Self {
        match f {
            OutFormat::Json => ResultFormat::Json,
            OutFormat::Csv => ResultFormat::Csv,
        }
    }
}

#[derive(Args, Debug)]
struct RefArgs {
    #[arg(long)]
    ref_img: PathBuf,
    #[arg(long)]
    ref_cond: PathBuf,
}

#[derive(Args, Debug)]
struct PairArgs {
    #[command(flatten)]
    reference: RefArgs,
    #[arg(long)]
    gen_img: PathBuf,
    #[arg(long)]
    gen_cond: PathBuf,
    /// Identifier reported for the image embedding.
    #[arg(long, default_value = "precomputed")]
    image_embedder_id: String,
    /// Identifier reported for the conditioning embedding.
    #[arg(long, default_value = "precomputed")]
    cond_embedder_id: String,
}

#[derive(Args, Debug)]
struct ComputeArgs {
    #[command(flatten)]
    pair: PairArgs,
    /// `auto` or a non-negative number.
    #[arg(long, default_value = "auto")]
    alpha: String,
    #[arg(long, value_enum, default_value = "json")]
    out: OutFormat,
    /// Worker threads for covariance accumulation; 0 or 1 runs sequentially.
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

#[derive(Args, Debug)]
struct SweepAlphaArgs {
    #[command(flatten)]
    pair: PairArgs,
    /// Comma-separated alpha values.
    #[arg(long, value_delimiter = ',', required = true)]
    alphas: Vec<f64>,
    #[arg(long, value_enum, default_value = "json")]
    out: OutFormat,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum CliCondType {
    Class,
    Bbox,
    Mask,
    Attributes,
}

impl From<CliCondType> for CondType {
    fn from(c: CliCondType) -> Self {
        match c {
            CliCondType::Class => CondType::Class,
            CliCondType::Bbox => CondType::BBox,
            CliCondType::Mask => CondType::Mask,
            CliCondType::Attributes => CondType::Attributes,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum CliFactor {
    Shape,
    Scale,
    Orientation,
    XPos,
    YPos,
}

impl From<CliFactor> for Factor {
    fn from(f: CliFactor) -> Self {
        match f {
            CliFactor::Shape => Factor::Shape,
            CliFactor::Scale => Factor::Scale,
            CliFactor::Orientation => Factor::Orientation,
            CliFactor::XPos => Factor::XPos,
            CliFactor::YPos => Factor::YPos,
        }
    }
}

#[derive(Args, Debug)]
struct CorpusArgs {
    #[arg(long, value_enum, default_value = "class")]
    cond_type: CliCondType,
    #[arg(long, default_value_t = DEFAULT_SAMPLES)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory for images.fjde, conds.fjde and manifest.json.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand, Debug)]
enum SynthCommand {
    /// Unperturbed corpus.
    Make(CorpusArgs),
    /// Pixel noise.
    Noise {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long)]
        sigma: f64,
    },
    /// Conditioning swaps between rows differing in one factor.
    Consistency {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long, value_enum)]
        attribute: CliFactor,
        /// Pixels, or degrees for orientation.
        #[arg(long)]
        offset: f64,
        #[arg(long, default_value_t = DEFAULT_SWAP_FRACTION)]
        fraction: f64,
    },
    /// Reduced texture variety within strata of one factor.
    Diversity {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long, value_enum)]
        stratify_by: CliFactor,
        #[arg(long)]
        score: f64,
    },
    /// Attribute-vector swaps at a target mean Hamming distance.
    Hamming {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long)]
        target: f64,
    },
}

#[derive(Subcommand, Debug)]
enum DemoCommand {
    /// The two-dimensional Gaussian pair with equal image marginals.
    Gaussian {
        /// Use the analytic parameters instead of samples.
        #[arg(long)]
        exact: bool,
        #[arg(long, default_value_t = DEFAULT_SAMPLES)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "json")]
        out: OutFormat,
    },
}

#[derive(Subcommand, Debug)]
enum EmbedCommand {
    /// One label per line.
    Onehot {
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        output: PathBuf,
    },
    /// Comma-separated labels per line; blank lines are empty sets.
    Nhot {
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        output: PathBuf,
    },
    /// Flattened pixels of a corpus regenerated from its manifest.
    Pixels {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Project rows onto principal components fitted on another file.
    Pca {
        #[arg(long)]
        fit: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        dim: usize,
        #[arg(long)]
        output: PathBuf,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum CliExperiment {
    Noise,
    Consistency,
    Diversity,
    Hamming,
    AlphaSweep,
    Gaussian,
}

#[derive(Args, Debug)]
struct ExperimentArgs {
    #[arg(value_enum)]
    kind: CliExperiment,
    #[arg(long, value_enum, default_value = "class")]
    cond_type: CliCondType,
    #[arg(long, default_value_t = DEFAULT_SAMPLES)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Swapped factor for consistency, stratifying factor for diversity.
    #[arg(long, value_enum, default_value = "x-pos")]
    factor: CliFactor,
    /// Restrict consistency corpora to one shape.
    #[arg(long)]
    shape: Option<String>,
    /// Sweep values; defaults to the standard grid for the experiment.
    #[arg(long, value_delimiter = ',')]
    values: Option<Vec<f64>>,
    /// Gaussian experiment with analytic parameters.
    #[arg(long)]
    exact: bool,
    #[arg(long, value_enum, default_value = "csv")]
    format: OutFormat,
    /// Result file, rewritten after every sweep point; stdout if absent.
    #[arg(long)]
    output: Option<PathBuf>,
}

/// One pair of scores plus the settings needed to reproduce them.
#[derive(Serialize)]
struct ScoreReport {
    fid: f64,
    fjd: f64,
    clamped_count: usize,
    metadata: ScoreMetadata,
}

impl ScoreReport {
    fn new(fid: &FrechetResult, fjd: &FrechetResult, metadata: ScoreMetadata) -> Self {
        Self {
            fid: fid.value,
            fjd: fjd.value,
            clamped_count: fid.clamped_eigenvalues + fjd.clamped_eigenvalues,
            metadata,
        }
    }

    fn csv(&self) -> String {
        let m = &self.metadata;
        format!(
            "fid,fjd,alpha,alpha_mode,image_embedder_id,cond_embedder_id,reference_id,seed,clamped_count\n{},{},{},{},{},{},{},{},{}\n",
            format_f64(self.fid),
            format_f64(self.fjd),
            m.alpha_6dp,
            serde_json::to_value(m.alpha_mode).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default(),
            m.image_embedder_id,
            m.cond_embedder_id,
            m.reference_id,
            m.seed.map(|s| s.to_string()).unwrap_or_default(),
            self.clamped_count
        )
    }

    fn render(&self, format: OutFormat) -> Result<String> {
        Ok(match format {
            OutFormat::Json => serde_json::to_string_pretty(self)? + "\n",
            OutFormat::Csv => self.csv(),
        })
    }
}

fn load_pair(img: &Path, cond: &Path) -> Result<PairedEmbeddings> {
    PairedEmbeddings::new(read_embeddings(img)?, read_embeddings(cond)?)
}

fn joint_config(alpha: &str, pair: &PairArgs) -> Result<JointConfig> {
    let ids = (
        pair.image_embedder_id.clone(),
        pair.cond_embedder_id.clone(),
        pair.reference.ref_img.display().to_string(),
    );
    if alpha == "auto" {
        return Ok(JointConfig::auto(ids.0, ids.1, ids.2));
    }
    let value: f64 = alpha
        .parse()
        .map_err(|_| FjdError::InvalidArgument(format!("--alpha must be `auto` or a number, got {alpha:?}")))?;
    JointConfig::fixed(value, ids.0, ids.1, ids.2)
}

fn compute(args: &ComputeArgs) -> Result<String> {
    let reference = load_pair(&args.pair.reference.ref_img, &args.pair.reference.ref_cond)?;
    let generated = load_pair(&args.pair.gen_img, &args.pair.gen_cond)?;
    let par = if args.threads > 1 {
        Parallelism::Threads(args.threads)
    } else {
        Parallelism::Sequential
    };
    let eval = JointEvaluator::new(&reference, &joint_config(&args.alpha, &args.pair)?, par)?;
    let (fid, fjd) = eval.score(&generated)?;
    ScoreReport::new(&fid, &fjd, eval.config().metadata(None)).render(args.out)
}

#[derive(Serialize)]
struct AlphaReport {
    alpha: f64,
    alpha_6dp: String,
    reference_id: String,
}

fn calibrate(args: &RefArgs) -> Result<String> {
    let alpha = calibrate_alpha(&load_pair(&args.ref_img, &args.ref_cond)?)?;
    let report = AlphaReport {
        alpha,
        alpha_6dp: format!("{alpha:.6}"),
        reference_id: args.ref_img.display().to_string(),
    };
    Ok(serde_json::to_string_pretty(&report)? + "\n")
}

#[derive(Serialize)]
struct SweepRow {
    alpha: f64,
    fjd: f64,
}

#[derive(Serialize)]
struct SweepReport {
    rows: Vec<SweepRow>,
    metadata: ScoreMetadata,
}

fn sweep(args: &SweepAlphaArgs) -> Result<String> {
    let reference = load_pair(&args.pair.reference.ref_img, &args.pair.reference.ref_cond)?;
    let generated = load_pair(&args.pair.gen_img, &args.pair.gen_cond)?;
    let rows: Vec<SweepRow> = sweep_alpha(&reference, &generated, &args.alphas)?
        .into_iter()
        .map(|(alpha, fjd)| SweepRow { alpha, fjd })
        .collect();
    let mut meta = joint_config("0", &args.pair)?.metadata(None);
    meta.alpha_6dp = args
        .alphas
        .iter()
        .map(|a| format!("{a:.6}"))
        .collect::<Vec<_>>()
        .join(";");
    Ok(match args.out {
        OutFormat::Json => serde_json::to_string_pretty(&SweepReport { rows, metadata: meta })? + "\n",
        OutFormat::Csv => {
            let mut s = String::from("alpha,fjd\n");
            for r in rows {
                s.push_str(&format!("{},{}\n", format_f64(r.alpha), format_f64(r.fjd)));
            }
            s
        }
    })
}

fn synth(cmd: &SynthCommand) -> Result<String> {
    let (corpus, layout, perturbation) = match cmd {
        SynthCommand::Make(c) => (c, None, None),
        SynthCommand::Noise { corpus, sigma } => (
            corpus,
            None,
            Some(Perturbation::Noise {
                sigma: *sigma,
                seed: corpus.seed,
            }),
        ),
        SynthCommand::Consistency {
            corpus,
            attribute,
            offset,
            fraction,
        } => {
            let attribute = Factor::from(*attribute);
            let steps = swap_steps(attribute, &[*offset]).max(1);
            (
                corpus,
                Some(GroupLayout::for_steps(attribute, steps, None)),
                Some(Perturbation::Swap {
                    attribute,
                    offset: *offset,
                    fraction: *fraction,
                }),
            )
        }
        SynthCommand::Diversity {
            corpus,
            stratify_by,
            score,
        } => (
            corpus,
            None,
            Some(Perturbation::Diversity {
                config: DiversityConfig::new((*stratify_by).into(), *score),
                seed: corpus.seed,
            }),
        ),
        SynthCommand::Hamming { corpus, target } => (
            corpus,
            None,
            Some(Perturbation::AttributeSwap {
                target: *target,
                seed: corpus.seed,
            }),
        ),
    };
    let generator = GeneratorConfig {
        cond_type: corpus.cond_type.into(),
        n: corpus.n,
        seed: corpus.seed,
        layout,
        perturbations: perturbation.into_iter().collect(),
    };
    let manifest = write_dataset(&generator, &corpus.out)?;
    Ok(serde_json::to_string_pretty(&manifest)? + "\n")
}

fn demo(cmd: &DemoCommand) -> Result<String> {
    let DemoCommand::Gaussian { exact, n, seed, out } = cmd;
    let cfg = ExperimentConfig::new(ExperimentKind::GaussianDemo { exact: *exact }, CondType::Class)
        .with_samples(*n)
        .with_seed(*seed);
    let table = run_experiment_streaming(&cfg, |_| Ok(()))?;
    let r = &table.rows[0];
    let report = ScoreReport {
        fid: r.fid,
        fjd: r.fjd,
        clamped_count: r.clamped_count,
        metadata: table.metadata.clone(),
    };
    report.render(*out)
}

fn read_label_lines(path: &Path) -> Result<Vec<Vec<usize>>> {
    std::fs::read_to_string(path)?
        .lines()
        .map(|line| {
            line.split(',')
                .map(str::trim)
                .filter(|t| !t.is_empty())
                .map(|t| {
                    t.parse::<usize>()
                        .map_err(|_| FjdError::InvalidArgument(format!("bad label {t:?}")))
                })
                .collect()
        })
        .collect()
}

fn embed(cmd: &EmbedCommand) -> Result<String> {
    let (set, output) = match cmd {
        EmbedCommand::Onehot { labels, k, output } => {
            let rows = read_label_lines(labels)?
                .into_iter()
                .map(|ls| match ls.as_slice() {
                    [l] => one_hot(*l, *k),
                    _ => Err(FjdError::InvalidArgument(
                        "one-hot input needs exactly one label per line".into(),
                    )),
                })
                .collect::<Result<Vec<_>>>()?;
            (EmbeddingSet::from_rows(&rows)?, output)
        }
        EmbedCommand::Nhot { labels, k, output } => {
            let rows = read_label_lines(labels)?
                .into_iter()
                .map(|ls| n_hot(&ls, *k))
                .collect::<Result<Vec<_>>>()?;
            (EmbeddingSet::from_rows(&rows)?, output)
        }
        EmbedCommand::Pixels { manifest, output } => {
            let ds = regenerate(&read_manifest(manifest)?)?;
            (crate::io::raw_embeddings(&ds)?.0, output)
        }
        EmbedCommand::Pca {
            fit,
            input,
            dim,
            output,
        } => {
            let model = pca_fit(&read_embeddings(fit)?, *dim)?;
            (model.encode_set(&read_embeddings(input)?)?, output)
        }
    };
    write_embeddings(&set, output)?;
    Ok(format!(
        "wrote {} x {} to {}\n",
        set.rows(),
        set.cols(),
        output.display()
    ))
}

fn experiment(args: &ExperimentArgs) -> Result<String> {
    let factor = Factor::from(args.factor);
    let kind = match args.kind {
        CliExperiment::Noise => ExperimentKind::Noise,
        CliExperiment::Consistency => ExperimentKind::Consistency { attribute: factor },
        CliExperiment::Diversity => ExperimentKind::Diversity { stratify_by: factor },
        CliExperiment::Hamming => ExperimentKind::Hamming,
        CliExperiment::AlphaSweep => ExperimentKind::AlphaSweep,
        CliExperiment::Gaussian => ExperimentKind::GaussianDemo { exact: args.exact },
    };
    let mut cfg = ExperimentConfig::new(kind, args.cond_type.into())
        .with_samples(args.n)
        .with_seed(args.seed);
    if let Some(v) = &args.values {
        cfg = cfg.with_sweep(v.clone());
    }
    if let Some(s) = &args.shape {
        cfg = cfg.with_shape(s.parse::<Shape>()?);
    }
    let render = |t: &ResultTable| -> Result<String> {
        match ResultFormat::from(args.format) {
            ResultFormat::Csv => Ok(results_to_csv(t)),
            ResultFormat::Json => results_to_json(t),
        }
    };
    let table = run_experiment_streaming(&cfg, |partial| {
        if let Some(path) = &args.output {
            std::fs::write(path, render(partial)?)?;
        }
        Ok(())
    })?;
    match &args.output {
        Some(path) => Ok(format!("wrote {} rows to {}\n", table.rows.len(), path.display())),
        None => render(&table),
    }
}

fn dispatch(cli: &Cli) -> Result<String> {
    match &cli.command {
        Command::Compute(a) => compute(a),
        Command::CalibrateAlpha(a) => calibrate(a),
        Command::SweepAlpha(a) => sweep(a),
        Command::Synth(c) => synth(c),
        Command::Demo(c) => demo(c),
        Command::Embed(c) => embed(c),
        Command::Experiment(a) => experiment(a),
    }
}

pub fn exit_code(err: &FjdError) -> i32 {
    match err {
        e if e.is_numerical() => EXIT_NUMERICAL,
        FjdError::InvalidArgument(_) => EXIT_USAGE,
        _ => EXIT_DATA,
    }
}

/// Parses `argv` (including the program name), runs the command and
/// returns the process exit code.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            if code == EXIT_OK {
                let _ = write!(out, "{e}");
            } else {
                let _ = write!(err, "{e}");
            }
            return code;
        }
    };
    match dispatch(&cli) {
        Ok(text) => {
            let _ = out.write_all(text.as_bytes());
            EXIT_OK
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_args(args: &[&str]) -> (i32, String, String) {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = run(std::iter::once("fjd").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn exact_demo_prints_scores() {
        let (code, out, _) = run_args(&["demo", "gaussian", "--exact"]);
        assert_eq!(code, 0);
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["fid"].as_f64().unwrap(), 0.0);
        assert!((v["fjd"].as_f64().unwrap() - 0.6789).abs() < 1e-3);
        assert_eq!(v["metadata"]["alpha_6dp"], "1.000000");
    }

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(run_args(&["frobnicate"]).0, EXIT_USAGE);
        assert_eq!(run_args(&["compute", "--ref-img", "a"]).0, EXIT_USAGE);
        assert_eq!(run_args(&["--help"]).0, EXIT_OK);
    }

    #[test]
    fn missing_files_exit_two() {
        let (code, _, err) = run_args(&[
            "compute",
            "--ref-img",
            "/nonexistent/a",
            "--ref-cond",
            "b",
            "--gen-img",
            "c",
            "--gen-cond",
            "d",
        ]);
        assert_eq!(code, EXIT_DATA);
        assert!(err.starts_with("error:"));
    }

    #[test]
    fn error_classes() {
        assert_eq!(exit_code(&FjdError::EigenFailure), EXIT_NUMERICAL);
        assert_eq!(
            exit_code(&FjdError::NotPsd {
                eigenvalue: -1.0,
                tolerance: 0.0
            }),
            EXIT_NUMERICAL
        );
        assert_eq!(exit_code(&FjdError::NotFjde), EXIT_DATA);
        assert_eq!(exit_code(&FjdError::InvalidArgument("x".into())), EXIT_USAGE);
    }
}
