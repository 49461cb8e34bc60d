//! The `cad` command line: `generate`, `train`, `segment`, `eval` and
//! `recognize`, driven by one JSON config plus flag overrides.
//!
//! Usage and configuration problems exit with 2, runtime failures with 1.
//! Either way a single JSON line `{"error": kind, "message": ...}` goes to
//! stderr.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::data::{read_corpus, write_corpus, generate_corpus, Corpus, CorpusSpec};
use crate::error::CadError;
use crate::inference::{InferConfig, Labeling, NPrime, SegmentMode};
use crate::losses::LossConfig;
use crate::matching::{
    f1_corpus, kl_action_distribution, kl_prototype_sharing, match_at_level, mean_over_videos,
    prototype_distributions, KlMatrix, LevelReport, Scope, SegmentScore,
};
use crate::model::{Activation, ModelConfig};
use crate::numerics::DistanceKind;
use crate::pipeline;
use crate::trainer::{load_checkpoint, save_checkpoint, trace_tsv, Checkpoint, TrainConfig, Trainer};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    /// Embedding width; derived from the input width when absent.
    pub d: Option<usize>,
    #[serde(rename = "N")]
    pub n: usize,
    pub activation: Activation,
    pub distance: DistanceKind,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            d: None,
            n: 10,
            activation: Activation::Relu,
            distance: DistanceKind::Euclidean,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub scope: Scope,
    pub kl: bool,
    pub f1: bool,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            scope: Scope::Global,
            kl: true,
            f1: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsSection {
    pub manifest: PathBuf,
    pub out_dir: PathBuf,
    pub checkpoint: PathBuf,
}

impl Default for PathsSection {
    fn default() -> Self {
        Self {
            manifest: PathBuf::from("data/manifest.json"),
            out_dir: PathBuf::from("out"),
            checkpoint: PathBuf::from("out/model.cadc"),
        }
    }
}

/// Held-out split: `train` uses the remaining videos, `recognize` and
/// `segment`/`eval` can be pointed at either side.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    pub test_fraction: f64,
    pub split_seed: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSection,
    pub loss: LossConfig,
    pub train: TrainConfig,
    pub infer: InferConfig,
    pub eval: EvalSection,
    pub paths: PathsSection,
    pub generate: CorpusSpec,
    pub data: DataSection,
}

impl RunConfig {
    pub fn validate(&self) -> crate::Result<()> {
        self.loss.validate()?;
        self.train.validate()?;
        self.infer.validate()?;
        self.generate.validate()?;
        if self.model.n == 0 || self.model.d == Some(0) {
            return Err(CadError::Config("model.N and model.d must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.data.test_fraction) {
            return Err(CadError::Config(format!(
                "data.test_fraction {} must be in [0, 1)",
                self.data.test_fraction
            )));
        }
        Ok(())
    }

    pub fn model_config(&self, input_dim: usize, classes: usize) -> ModelConfig {
        let mut m = ModelConfig::new(input_dim, self.model.n, classes);
        if let Some(d) = self.model.d {
            m.embed_dim = d;
        }
        m.activation = self.model.activation;
        m.distance = self.model.distance;
        m
    }
}

#[derive(Debug, Parser)]
#[command(name = "cad", version, about = "Action prototype discovery from complex-activity labels")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic corpus next to the configured manifest path.
    Generate(Overrides),
    /// Train a model and write the checkpoint and loss trace.
    Train(Overrides),
    /// Write per-video frame labelings.
    Segment(Overrides),
    /// Match labelings to ground truth and write metrics.
    Eval(Overrides),
    /// Predict the activity of every video.
    Recognize(Overrides),
}

#[derive(Debug, Default, Args)]
pub struct Overrides {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long, value_parser = parse_scope)]
    pub scope: Option<Scope>,
    /// `global` or `activity`.
    #[arg(long, value_parser = parse_mode)]
    pub mode: Option<SegmentMode>,
    #[arg(long)]
    pub sigma: Option<f64>,
    /// A prototype count per activity, or `gt` for the ground-truth action count.
    #[arg(long, value_parser = parse_nprime)]
    pub nprime: Option<NPrime>,
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Seeds both training and corpus generation.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub prototypes: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
    #[arg(long)]
    pub no_decode: bool,
    #[arg(long)]
    pub no_smooth: bool,
    #[arg(long)]
    pub wp: Option<f64>,
    #[arg(long)]
    pub wg: Option<f64>,
    /// Run `segment`, `eval` or `recognize` on the held-out videos only.
    #[arg(long)]
    pub held_out: bool,
}

fn parse_scope(s: &str) -> Result<Scope, String> {
    s.parse().map_err(|e: CadError| e.to_string())
}

fn parse_mode(s: &str) -> Result<SegmentMode, String> {
    match s {
        "global" => Ok(SegmentMode::Global),
        "activity" => Ok(SegmentMode::Activity),
        _ => Err(format!("unknown mode {s:?} (global or activity)")),
    }
}

fn parse_nprime(s: &str) -> Result<NPrime, String> {
    if s == "gt" || s == "max" {
        return Ok(NPrime::PerActivityGt);
    }
    s.parse::<usize>()
        .map(NPrime::Fixed)
        .map_err(|_| format!("--nprime takes a count or `gt`, got {s:?}"))
}

impl Overrides {
    pub fn apply(&self, cfg: &mut RunConfig) {
        let set = |dst: &mut f64, v: Option<f64>| {
            if let Some(v) = v {
                *dst = v;
            }
        };
        if let Some(p) = &self.manifest {
            cfg.paths.manifest = p.clone();
        }
        if let Some(p) = &self.out_dir {
            cfg.paths.out_dir = p.clone();
        }
        if let Some(p) = &self.checkpoint {
            cfg.paths.checkpoint = p.clone();
        }
        if let Some(s) = self.scope {
            cfg.eval.scope = s;
        }
        if let Some(m) = self.mode {
            cfg.infer.mode = m;
        }
        if let Some(n) = self.nprime {
            cfg.infer.nprime = n;
        }
        set(&mut cfg.infer.sigma, self.sigma);
        set(&mut cfg.infer.eta, self.eta);
        set(&mut cfg.infer.wp, self.wp);
        set(&mut cfg.infer.wg, self.wg);
        set(&mut cfg.loss.alpha, self.alpha);
        set(&mut cfg.loss.lambda, self.lambda);
        if let Some(s) = self.seed {
            cfg.train.seed = s;
            cfg.generate.seed = s;
        }
        if let Some(e) = self.epochs {
            cfg.train.epochs = e;
        }
        if let Some(n) = self.prototypes {
            cfg.model.n = n;
        }
        if self.no_decode {
            cfg.infer.decode = false;
        }
        if self.no_smooth {
            cfg.infer.smooth = false;
        }
    }
}

/// Failure of a command, with the process exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub kind: &'static str,
    pub message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            kind: "usage",
            message: message.into(),
        }
    }

    /// The single-line JSON form written to stderr.
    pub fn to_json_line(&self) -> String {
        serde_json::json!({ "error": self.kind, "message": self.message }).to_string()
    }
}

impl From<CadError> for CliError {
    fn from(e: CadError) -> Self {
        let (code, kind) = match &e {
            CadError::Config(_) => (2, "config"),
            CadError::InvalidInput(_) => (1, "invalid_input"),
            CadError::Shape { .. } => (1, "shape"),
            CadError::NonFinite(_) => (1, "non_finite"),
            CadError::Io { .. } => (1, "io"),
            CadError::Parse { .. } => (1, "parse"),
            CadError::Version { .. } => (1, "version"),
            CadError::Data { .. } => (1, "data"),
            CadError::Generation(_) => (1, "generation"),
        };
        Self {
            code,
            kind,
            message: e.to_string(),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Parses `args` (including the program name), runs the command and returns
/// the exit code. Help and version output go to stdout with code 0.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("usage error").trim_start_matches("error: ");
            eprintln!("{}", CliError::usage(first).to_json_line());
            return 2;
        }
    };
    match execute(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", e.to_json_line());
            e.code
        }
    }
}

pub fn execute(command: &Command) -> CliResult<()> {
    let (name, ov) = match command {
        Command::Generate(o) => ("generate", o),
        Command::Train(o) => ("train", o),
        Command::Segment(o) => ("segment", o),
        Command::Eval(o) => ("eval", o),
        Command::Recognize(o) => ("recognize", o),
    };
    let cfg = load_config(ov)?;
    match name {
        "generate" => cmd_generate(&cfg),
        "train" => cmd_train(&cfg, ov.threads),
        "segment" => cmd_segment(&cfg, ov.threads, ov.held_out),
        "eval" => cmd_eval(&cfg, ov.threads, ov.held_out),
        _ => cmd_recognize(&cfg, ov.threads, ov.held_out),
    }
}

pub fn load_config(ov: &Overrides) -> CliResult<RunConfig> {
    let mut cfg = match &ov.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::from(CadError::Config(format!("{}: {e}", path.display()))))?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::from(CadError::Config(format!("{}: {e}", path.display()))))?
        }
        None => RunConfig::default(),
    };
    ov.apply(&mut cfg);
    cfg.validate()?;
    if ov.threads == 0 {
        return Err(CliError::usage("--threads must be >= 1"));
    }
    Ok(cfg)
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CadError::Io {
        path: path.to_path_buf(),
        source: e,
    }
    .into()
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
    }
    fs::write(path, text).map_err(|e| io_err(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    write_text(path, &text)
}

fn echo_config(cfg: &RunConfig, command: &str) -> CliResult<()> {
    let value = serde_json::json!({ "command": command, "config": cfg });
    write_json(&cfg.paths.out_dir.join("effective_config.json"), &value)
}

fn require(path: &Path, what: &str) -> CliResult<()> {
    if !path.exists() {
        return Err(CadError::Config(format!("{what} {} does not exist", path.display())).into());
    }
    Ok(())
}

/// Loads the corpus, restricted to the train or held-out side of the split.
fn load_corpus(cfg: &RunConfig, held_out: bool) -> CliResult<Corpus> {
    require(&cfg.paths.manifest, "manifest")?;
    let corpus = read_corpus(&cfg.paths.manifest)?;
    if cfg.data.test_fraction == 0.0 {
        if held_out {
            return Err(CadError::Config("--held-out needs data.test_fraction > 0".into()).into());
        }
        return Ok(corpus);
    }
    let (train, test) = corpus.split_indices(cfg.data.test_fraction, cfg.data.split_seed);
    Ok(corpus.subset(if held_out { &test } else { &train }))
}

fn load_model(cfg: &RunConfig, corpus: &Corpus) -> CliResult<Checkpoint> {
    require(&cfg.paths.checkpoint, "checkpoint")?;
    let ck = load_checkpoint(&cfg.paths.checkpoint)?;
    let m = ck.params.config;
    if m.input_dim != corpus.feature_dim() || m.classes != corpus.classes() {
        return Err(CadError::Config(format!(
            "checkpoint expects {} dims / {} activities, corpus has {} / {}",
            m.input_dim,
            m.classes,
            corpus.feature_dim(),
            corpus.classes()
        ))
        .into());
    }
    Ok(ck)
}

fn cmd_generate(cfg: &RunConfig) -> CliResult<()> {
    let dir = cfg
        .paths
        .manifest
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    if cfg.paths.manifest.file_name() != Some("manifest.json".as_ref()) {
        return Err(CadError::Config("paths.manifest must end in manifest.json for generate".into()).into());
    }
    let (corpus, truth) = generate_corpus(&cfg.generate)?;
    let manifest = write_corpus(&corpus, dir)?;
    write_json(&dir.join("generator_truth.json"), &truth)?;
    echo_config(cfg, "generate")?;
    println!(
        "wrote {} videos ({} activities) to {}",
        corpus.videos.len(),
        corpus.classes(),
        manifest.display()
    );
    Ok(())
}

fn cmd_train(cfg: &RunConfig, threads: usize) -> CliResult<()> {
    let corpus = load_corpus(cfg, false)?;
    let model = cfg.model_config(corpus.feature_dim(), corpus.classes());
    let out = Trainer::new(model, cfg.train, cfg.loss).threads(threads).run(&corpus)?;
    save_checkpoint(&out.checkpoint, &cfg.paths.checkpoint)?;
    write_text(&cfg.paths.out_dir.join("loss_trace.tsv"), &trace_tsv(&out.trace))?;
    echo_config(cfg, "train")?;
    let last = out.trace.last().expect("at least one epoch");
    println!(
        "trained {} epochs on {} videos, final loss {:.6}, checkpoint {}",
        out.checkpoint.epoch,
        corpus.videos.len(),
        last.total,
        cfg.paths.checkpoint.display()
    );
    Ok(())
}

fn segments_dir(cfg: &RunConfig) -> PathBuf {
    cfg.paths.out_dir.join("segments")
}

/// One line per frame: `frame  prototype  matched_action`, all 1-based with
/// `-1` for background or not yet matched.
pub fn format_labeling(labeling: &Labeling, matched: Option<&[Option<usize>]>) -> String {
    let mut out = String::with_capacity(16 * labeling.frames());
    for t in 0..labeling.frames() {
        let proto = if labeling.is_background(t) {
            -1
        } else {
            labeling.labels[t] as i64 + 1
        };
        let action = matched.and_then(|m| m[t]).map_or(-1, |a| a as i64 + 1);
        let _ = writeln!(out, "{t}\t{proto}\t{action}");
    }
    out
}

pub fn parse_labeling(path: &Path, text: &str) -> crate::Result<Labeling> {
    let mut labels = Vec::new();
    let mut background = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let bad = |msg: String| CadError::Data {
            path: path.to_path_buf(),
            msg: format!("line {}: {msg}", i + 1),
        };
        let mut parts = line.split('\t');
        let t: usize = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad("bad frame index".into()))?;
        if t != i {
            return Err(bad(format!("frame {t} out of order")));
        }
        let p: i64 = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad("bad prototype index".into()))?;
        match p {
            -1 => {
                labels.push(0);
                background.push(true);
            }
            p if p >= 1 => {
                labels.push(p as usize - 1);
                background.push(false);
            }
            p => return Err(bad(format!("prototype index {p}"))),
        }
    }
    let any_bg = background.iter().any(|&b| b);
    Ok(Labeling {
        labels,
        background: any_bg.then_some(background),
    })
}

#[derive(Serialize)]
struct PlanOut {
    activity: usize,
    kept: Vec<usize>,
    ordering: Vec<usize>,
}

fn cmd_segment(cfg: &RunConfig, threads: usize, held_out: bool) -> CliResult<()> {
    let corpus = load_corpus(cfg, held_out)?;
    let ck = load_model(cfg, &corpus)?;
    let aff = pipeline::corpus_affinities(&corpus, &ck.params, threads)?;
    let seg = pipeline::segment_corpus(&corpus, &aff, &cfg.infer)?;
    let dir = segments_dir(cfg);
    for (v, lab) in corpus.videos.iter().zip(&seg.labelings) {
        write_text(&dir.join(format!("{}.txt", v.video_id)), &format_labeling(lab, None))?;
    }
    let plans: Vec<PlanOut> = seg
        .plans
        .iter()
        .map(|p| PlanOut {
            activity: p.activity + 1,
            kept: p.kept.iter().map(|k| k + 1).collect(),
            ordering: p.ordering.iter().map(|k| k + 1).collect(),
        })
        .collect();
    write_json(&cfg.paths.out_dir.join("activity_plans.json"), &plans)?;
    echo_config(cfg, "segment")?;
    println!("wrote {} labelings to {}", seg.labelings.len(), dir.display());
    Ok(())
}

#[derive(Serialize)]
struct UnitOut {
    unit: String,
    /// `[prototype, action]`, 1-based.
    assignment: Vec<[usize; 2]>,
    frames: u64,
    mof: f64,
    mop: f64,
    moc: f64,
}

#[derive(Serialize)]
struct RecognitionOut {
    accuracy: f64,
    prototype_head: f64,
    visual_head: f64,
    mov: f64,
}

#[derive(Serialize)]
struct MetricsOut {
    scope: Scope,
    videos: usize,
    frames: u64,
    mof: f64,
    mop: f64,
    moc: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    f1: Option<SegmentScore>,
    recognition: RecognitionOut,
    #[serde(skip_serializing_if = "Option::is_none")]
    kl_actions: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    kl_prototypes: Option<KlMatrix>,
    units: Vec<UnitOut>,
}

fn cmd_eval(cfg: &RunConfig, threads: usize, held_out: bool) -> CliResult<()> {
    let corpus = load_corpus(cfg, held_out)?;
    let ck = load_model(cfg, &corpus)?;
    let dir = segments_dir(cfg);
    require(&dir, "segments directory (run `cad segment` first)")?;
    let mut labelings = Vec::with_capacity(corpus.videos.len());
    for v in &corpus.videos {
        let path = dir.join(format!("{}.txt", v.video_id));
        require(&path, "labeling")?;
        let text = fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
        let lab = parse_labeling(&path, &text)?;
        if lab.frames() != v.frames() {
            return Err(CadError::Data {
                path,
                msg: format!("{} frames, video has {}", lab.frames(), v.frames()),
            }
            .into());
        }
        labelings.push(lab);
    }
    let videos = pipeline::eval_videos(&corpus, &labelings)?;
    let report = match_at_level(&videos, cfg.eval.scope)?;

    let mapped: Vec<Vec<Option<usize>>> = videos
        .iter()
        .enumerate()
        .map(|(i, v)| report.mapped(i, v).into_iter().map(Option::flatten).collect())
        .collect();
    let matched_dir = cfg.paths.out_dir.join("matched");
    let mut tsv = String::from("video\tactivity\tframes\tmof\n");
    for ((v, lab), m) in corpus.videos.iter().zip(&labelings).zip(&mapped) {
        write_text(&matched_dir.join(format!("{}.txt", v.video_id)), &format_labeling(lab, Some(m)))?;
        let (frames, correct) = video_mof(m, v.gt_actions.as_deref().unwrap_or(&[]));
        let mof = if frames == 0 { 0.0 } else { correct as f64 / frames as f64 };
        let _ = writeln!(tsv, "{}\t{}\t{}\t{}", v.video_id, v.activity + 1, frames, mof);
    }
    write_text(&cfg.paths.out_dir.join("per_video_mof.tsv"), &tsv)?;

    let f1 = if cfg.eval.f1 { Some(f1_corpus(&videos, &report)?) } else { None };
    let (kl_actions, kl_prototypes) = if cfg.eval.kl {
        let (a, p) = kl_reports(&corpus, &ck, &videos, &mapped, threads)?;
        (Some(a), Some(p))
    } else {
        (None, None)
    };
    let recs = pipeline::recognize_corpus(&corpus, &ck.params, cfg.infer.wp, cfg.infer.wg, threads)?;
    let (acc, accp, accg) = pipeline::recognition_accuracy(&recs);
    let pred: Vec<usize> = recs.iter().map(|r| r.combined).collect();
    let truth: Vec<usize> = recs.iter().map(|r| r.truth).collect();

    let out = MetricsOut {
        scope: cfg.eval.scope,
        videos: videos.len(),
        frames: report.frames,
        mof: report.mof,
        mop: report.mop,
        moc: report.moc,
        f1,
        recognition: RecognitionOut {
            accuracy: acc,
            prototype_head: accp,
            visual_head: accg,
            mov: mean_over_videos(&pred, &truth)?,
        },
        kl_actions,
        kl_prototypes,
        units: units_out(&report),
    };
    write_json(&cfg.paths.out_dir.join("metrics.json"), &out)?;
    echo_config(cfg, "eval")?;
    println!(
        "{} scope: MoF {:.4}  MoP {:.4}  MoC {:.4}",
        cfg.eval.scope, report.mof, report.mop, report.moc
    );
    Ok(())
}

fn units_out(report: &LevelReport) -> Vec<UnitOut> {
    report
        .units
        .iter()
        .map(|u| UnitOut {
            unit: u.unit.clone(),
            assignment: u.assignment.iter().map(|&(c, a)| [c + 1, a + 1]).collect(),
            frames: u.frames,
            mof: u.mof,
            mop: u.mop,
            moc: u.moc,
        })
        .collect()
}

fn video_mof(mapped: &[Option<usize>], gt: &[Option<usize>]) -> (u64, u64) {
    let mut frames = 0;
    let mut correct = 0;
    for (m, g) in mapped.iter().zip(gt) {
        if let Some(g) = g {
            frames += 1;
            if *m == Some(*g) {
                correct += 1;
            }
        }
    }
    (frames, correct)
}

fn kl_reports(
    corpus: &Corpus,
    ck: &Checkpoint,
    videos: &[crate::matching::EvalVideo],
    mapped: &[Vec<Option<usize>>],
    threads: usize,
) -> CliResult<(Vec<f64>, KlMatrix)> {
    let classes = corpus.classes();
    let mut per_activity = Vec::with_capacity(classes);
    for c in 0..classes {
        let members: Vec<usize> = (0..videos.len()).filter(|&i| videos[i].activity == c).collect();
        let mut actions: Vec<usize> = members
            .iter()
            .flat_map(|&i| videos[i].gt.iter().flatten().copied())
            .collect();
        actions.sort_unstable();
        actions.dedup();
        let pairs: Vec<(&[Option<usize>], &[Option<usize>])> =
            members.iter().map(|&i| (&mapped[i][..], &videos[i].gt[..])).collect();
        per_activity.push(if actions.is_empty() { 0.0 } else { kl_action_distribution(&pairs, &actions)? });
    }
    let aff = pipeline::corpus_affinities(corpus, &ck.params, threads)?;
    let naive: Vec<Vec<usize>> = aff.iter().map(|a| a.argmax_rows()).collect();
    let labelled: Vec<(usize, &[usize])> = corpus
        .videos
        .iter()
        .zip(&naive)
        .map(|(v, l)| (v.activity, &l[..]))
        .collect();
    let dists = prototype_distributions(&labelled, classes, ck.params.config.prototypes);
    Ok((per_activity, kl_prototype_sharing(&dists)?))
}

fn cmd_recognize(cfg: &RunConfig, threads: usize, held_out: bool) -> CliResult<()> {
    let corpus = load_corpus(cfg, held_out)?;
    let ck = load_model(cfg, &corpus)?;
    let recs = pipeline::recognize_corpus(&corpus, &ck.params, cfg.infer.wp, cfg.infer.wg, threads)?;
    let mut tsv = String::from("video\tactivity\tpredicted\tprototype_head\tvisual_head\n");
    for r in &recs {
        let _ = writeln!(
            tsv,
            "{}\t{}\t{}\t{}\t{}",
            r.video_id,
            r.truth + 1,
            r.combined + 1,
            r.prototype_head + 1,
            r.visual_head + 1
        );
    }
    write_text(&cfg.paths.out_dir.join("recognition.tsv"), &tsv)?;
    let (acc, accp, accg) = pipeline::recognition_accuracy(&recs);
    let pred: Vec<usize> = recs.iter().map(|r| r.combined).collect();
    let truth: Vec<usize> = recs.iter().map(|r| r.truth).collect();
    let summary = RecognitionOut {
        accuracy: acc,
        prototype_head: accp,
        visual_head: accg,
        mov: mean_over_videos(&pred, &truth)?,
    };
    write_json(&cfg.paths.out_dir.join("recognition.json"), &summary)?;
    echo_config(cfg, "recognize")?;
    println!(
        "accuracy {:.4} (prototype head {:.4}, visual head {:.4}) on {} videos",
        acc,
        accp,
        accg,
        recs.len()
    );
    Ok(())
}
