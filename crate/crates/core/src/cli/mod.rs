//! The `mmdl` command line: `synth`, `train`, `predict`, `evaluate` and
//! `baseline`, sharing one TOML configuration and a few global overrides.

mod config;

pub use config::{DataConfig, EvaluateConfig, FusionConfig, RunConfig, DEFAULT_OUT, OUT_ENV};

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::atomic::write_atomic;
use crate::baselines::{BaselineModel, ClassifierKind, FeatureRecipe};
use crate::dataset::{synth_set, write_dataset, Label, Manifest, ManifestEntry};
use crate::error::{Error, Result, StageExt};
use crate::eval::{evaluate_baseline, evaluate_bundle, evaluate_outputs, kfold_indices, stratified_split, Report};
use crate::fusion::{apply_strategy, FusionStrategy};
use crate::pipeline::{image_sets, input_spec, load_clips, train_mmdl, PatternNetSettings};
use crate::zoo::{EnsembleBundle, LabeledImages};

pub const BUNDLE_DIR: &str = "bundle";
pub const TEST_MANIFEST_FILE: &str = "test_manifest.csv";
pub const BASELINE_DIR: &str = "baseline";

#[derive(Debug, Parser)]
#[command(name = "mmdl", version, about = "Right whale up-call detection with a fused CNN/SAE ensemble")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

/// Flags that override the matching configuration keys.
#[derive(Debug, Clone, Default, Args)]
pub struct GlobalArgs {
    /// TOML run configuration
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output root (default: $MMDL_OUT, else ./mmdl-out)
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads, 0 for all cores
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// vote, average or patternnet
    #[arg(long, global = true)]
    pub strategy: Option<String>,
    /// PatternNet hidden-width multiplier
    #[arg(long, global = true)]
    pub k: Option<usize>,
    #[arg(long, global = true)]
    pub n_cnn: Option<usize>,
    #[arg(long, global = true)]
    pub n_sae: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic labeled dataset (WAVs plus manifest.csv)
    Synth {
        #[arg(long)]
        n_upcall: Option<usize>,
        #[arg(long)]
        n_noise: Option<usize>,
    },
    /// Train the ensemble and its fusion net
    Train {
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Score audio files with a trained bundle; prints `label,score` per file
    Predict {
        #[arg(long)]
        bundle: PathBuf,
        /// Also write `path,label,score` rows here
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(required = true)]
        audio: Vec<PathBuf>,
    },
    /// Score a bundle on a labeled manifest, or cross-validate with --k-folds
    Evaluate {
        #[arg(long)]
        bundle: Option<PathBuf>,
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        k_folds: Option<usize>,
    },
    /// Train and score a feature-based SVM or KNN baseline
    Baseline {
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        test_manifest: Option<PathBuf>,
        /// `mfcc` or `dwt:<wavelet>:<stages>+mfcc`
        #[arg(long)]
        recipe: Option<String>,
        /// svm or knn
        #[arg(long)]
        classifier: Option<String>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Synth { .. } => "synth",
            Command::Train { .. } => "train",
            Command::Predict { .. } => "predict",
            Command::Evaluate { .. } => "evaluate",
            Command::Baseline { .. } => "baseline",
        }
    }
}

/// Written next to every command's outputs as `run_<command>.json`.
#[derive(Debug, Serialize)]
pub struct RunRecord {
    pub command: String,
    pub version: String,
    pub seed: u64,
    pub config: RunConfig,
    pub timings_s: BTreeMap<String, f64>,
    pub artifacts: Vec<PathBuf>,
}

struct Timer {
    start: Instant,
    timings: BTreeMap<String, f64>,
}

impl Timer {
    fn new() -> Self {
        Timer {
            start: Instant::now(),
            timings: BTreeMap::new(),
        }
    }

    fn lap(&mut self, name: &str) {
        let now = Instant::now();
        self.timings.insert(name.to_string(), (now - self.start).as_secs_f64());
        self.start = now;
    }
}

fn log(stage: &str, msg: &str) {
    eprintln!("[{stage}] {msg}");
}

/// Config file (if any) with the global flags applied on top, validated.
pub fn resolve_config(g: &GlobalArgs) -> Result<RunConfig> {
    let mut cfg = match &g.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    if let Some(o) = &g.out {
        cfg.out = Some(o.clone());
    }
    if let Some(j) = g.jobs {
        cfg.jobs = j;
    }
    if let Some(s) = &g.strategy {
        let parsed: FusionStrategy = s.parse()?;
        cfg.fusion.strategy = parsed.name().to_string();
    }
    if let Some(k) = g.k {
        cfg.fusion.k = k;
    }
    if let Some(n) = g.n_cnn {
        cfg.ensemble.n_cnn = n;
    }
    if let Some(n) = g.n_sae {
        cfg.ensemble.n_sae = n;
    }
    cfg.ensemble.master_seed = cfg.seed;
    cfg.baseline.seed = cfg.seed;
    cfg.validate()?;
    Ok(cfg)
}

fn manifest_path(flag: Option<PathBuf>, cfg: &RunConfig) -> Result<PathBuf> {
    flag.or_else(|| cfg.data.manifest.clone())
        .ok_or_else(|| Error::InvalidInput("no manifest given (use --manifest or data.manifest)".into()))
}

fn check_classes(m: &Manifest, what: &str) -> Result<()> {
    for c in Label::ALL {
        if m.count(c) == 0 {
            return Err(Error::InvalidInput(format!("{what} has no {c} clips")));
        }
    }
    Ok(())
}

fn subset(m: &Manifest, idx: &[usize]) -> Manifest {
    Manifest {
        entries: idx.iter().map(|&i| m.entries[i].clone()).collect::<Vec<ManifestEntry>>(),
    }
}

fn write_record(out: &Path, command: &str, cfg: &RunConfig, timer: Timer, artifacts: Vec<PathBuf>) -> Result<PathBuf> {
    let rec = RunRecord {
        command: command.to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: cfg.seed,
        config: cfg.clone(),
        timings_s: timer.timings,
        artifacts,
    };
    let path = out.join(format!("run_{command}.json"));
    let text = serde_json::to_string_pretty(&rec).expect("run record serializes");
    write_atomic(&path, text.as_bytes())?;
    Ok(path)
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn cmd_synth(cfg: &mut RunConfig, n_upcall: Option<usize>, n_noise: Option<usize>) -> Result<()> {
    let mut timer = Timer::new();
    if let Some(n) = n_upcall {
        cfg.synth.n_upcall = n;
    }
    if let Some(n) = n_noise {
        cfg.synth.n_noise = n;
    }
    cfg.synth.validate()?;
    let out = cfg.out_dir();
    create_dir(&out)?;
    log("synth", &format!("{} up-calls, {} noise clips", cfg.synth.n_upcall, cfg.synth.n_noise));
    let clips = synth_set(&cfg.synth, cfg.seed).stage("synth")?;
    timer.lap("synthesize");
    let manifest = write_dataset(&out, &clips).stage("write dataset")?;
    timer.lap("write");
    log("synth", &format!("wrote {} clips to {}", manifest.len(), out.display()));
    write_record(&out, "synth", cfg, timer, vec![out.join(crate::dataset::MANIFEST_FILE)])?;
    Ok(())
}

fn patternnet_settings(cfg: &RunConfig, strategy: FusionStrategy) -> Option<PatternNetSettings> {
    match strategy {
        FusionStrategy::PatternNet { k } => Some(PatternNetSettings {
            k,
            scg: cfg.fusion.scg.clone(),
            holdout_fraction: cfg.data.fusion_fraction,
        }),
        _ => None,
    }
}

fn load_images(cfg: &RunConfig, m: &Manifest, timer: &mut Timer) -> Result<(LabeledImages, LabeledImages)> {
    let (clips, labels) = load_clips(m, cfg.data.sample_rate_hz, cfg.data.duration_s).stage("load audio")?;
    timer.lap("load audio");
    let input = input_spec(cfg.data.sample_rate_hz, cfg.data.duration_s, &cfg.features);
    let sets = image_sets(&input, &clips, &labels).stage("images")?;
    timer.lap("images");
    log("features", &format!("{} image pairs", labels.len()));
    Ok(sets)
}

fn cmd_train(cfg: &RunConfig, manifest: Option<PathBuf>) -> Result<()> {
    let mut timer = Timer::new();
    let strategy = cfg.fusion.strategy()?;
    let mpath = manifest_path(manifest, cfg)?;
    let full = Manifest::load(&mpath).stage("manifest")?;
    check_classes(&full, "training manifest")?;
    let out = cfg.out_dir();
    create_dir(&out)?;
    let mut artifacts = Vec::new();
    let train_m = if cfg.data.test_fraction > 0.0 {
        let (tr, te) = stratified_split(&full.labels(), cfg.data.test_fraction, cfg.seed).stage("test split")?;
        let test_path = out.join(TEST_MANIFEST_FILE);
        subset(&full, &te).save(&test_path)?;
        log("train", &format!("{} clips held out in {}", te.len(), test_path.display()));
        artifacts.push(test_path);
        subset(&full, &tr)
    } else {
        full
    };
    let (spec, scal) = load_images(cfg, &train_m, &mut timer)?;
    log(
        "train",
        &format!("{} cnn + {} sae members, strategy {}", cfg.ensemble.n_cnn, cfg.ensemble.n_sae, strategy.name()),
    );
    let pn = patternnet_settings(cfg, strategy);
    let mut bundle = train_mmdl(&cfg.ensemble, pn.as_ref(), &spec, &scal, &|m| log("train", m))?;
    bundle.input = Some(input_spec(cfg.data.sample_rate_hz, cfg.data.duration_s, &cfg.features));
    timer.lap("train");

    // Build in a scratch directory so a failure never leaves a half bundle.
    let final_dir = out.join(BUNDLE_DIR);
    let partial = out.join(format!(".{BUNDLE_DIR}.partial"));
    let _ = fs::remove_dir_all(&partial);
    if let Err(e) = bundle.save(&partial) {
        let _ = fs::remove_dir_all(&partial);
        return Err(e).stage("save bundle");
    }
    if final_dir.exists() {
        fs::remove_dir_all(&final_dir).map_err(|e| Error::io(&final_dir, e))?;
    }
    fs::rename(&partial, &final_dir).map_err(|e| Error::io(&final_dir, e))?;
    timer.lap("save");
    log("train", &format!("bundle written to {}", final_dir.display()));
    artifacts.push(final_dir);
    write_record(&out, "train", cfg, timer, artifacts)?;
    Ok(())
}

fn load_bundle(path: &Path) -> Result<EnsembleBundle> {
    if !path.is_dir() {
        return Err(Error::InvalidInput(format!("bundle directory {} does not exist", path.display())));
    }
    EnsembleBundle::load(path).stage("load bundle")
}

/// The configured strategy, falling back to averaging when it needs a
/// PatternNet the bundle does not have.
fn bundle_strategy(cfg: &RunConfig, bundle: &EnsembleBundle, explicit: bool) -> Result<FusionStrategy> {
    let s = cfg.fusion.strategy()?;
    if matches!(s, FusionStrategy::PatternNet { .. }) {
        match &bundle.fusion {
            Some(f) => return Ok(FusionStrategy::PatternNet { k: f.k }),
            None if explicit => {
                return Err(Error::InvalidInput("bundle has no trained patternnet fusion net".into()))
            }
            None => return Ok(FusionStrategy::UnweightedAverage),
        }
    }
    Ok(s)
}

fn cmd_predict(cfg: &RunConfig, g: &GlobalArgs, bundle_dir: &Path, csv: Option<&Path>, audio: &[PathBuf]) -> Result<()> {
    let bundle = load_bundle(bundle_dir)?;
    let strategy = bundle_strategy(cfg, &bundle, g.strategy.is_some())?;
    let input = bundle
        .input
        .clone()
        .ok_or_else(|| Error::Format("bundle does not record its input settings".into()))?;
    let m = Manifest {
        entries: audio
            .iter()
            .map(|p| ManifestEntry {
                path: p.clone(),
                label: Label::Noise,
            })
            .collect(),
    };
    let (clips, labels) = load_clips(&m, input.sample_rate_hz, input.duration_s).stage("load audio")?;
    let (spec, scal) = image_sets(&input, &clips, &labels).stage("images")?;
    let outputs = bundle.member_outputs(&spec.images, &scal.images).stage("members")?;
    let mut table = String::from("path,label,score\n");
    println!("label,score");
    for (o, path) in outputs.iter().zip(audio) {
        let d = apply_strategy(o, strategy, bundle.fusion.as_ref()).stage("fusion")?;
        println!("{},{:.6}", d.label, d.upcall_score);
        table.push_str(&format!("{},{},{:.6}\n", path.display(), d.label, d.upcall_score));
    }
    if let Some(p) = csv {
        write_atomic(p, table.as_bytes())?;
    }
    Ok(())
}

fn evaluation_strategies(bundle: &EnsembleBundle) -> Vec<FusionStrategy> {
    let mut s = vec![FusionStrategy::MajorityVote, FusionStrategy::UnweightedAverage];
    if let Some(f) = &bundle.fusion {
        s.push(FusionStrategy::PatternNet { k: f.k });
    }
    s
}

fn finish_report(out: &Path, stem: &str, report: &Report, artifacts: &mut Vec<PathBuf>) -> Result<()> {
    print!("{}", report.summary());
    artifacts.extend(report.write(out, stem)?);
    Ok(())
}

fn cmd_evaluate(cfg: &RunConfig, bundle: Option<PathBuf>, manifest: Option<PathBuf>, k_folds: Option<usize>) -> Result<()> {
    let mut timer = Timer::new();
    let k = k_folds.unwrap_or(cfg.evaluate.k_folds);
    if k == 1 {
        return Err(Error::InvalidInput("--k-folds must be 0 or >= 2".into()));
    }
    let out = cfg.out_dir();
    create_dir(&out)?;
    let mut artifacts = Vec::new();
    if k >= 2 {
        let m = Manifest::load(&manifest_path(manifest, cfg)?).stage("manifest")?;
        check_classes(&m, "manifest")?;
        let report = cross_validate(cfg, &m, k, &mut timer)?;
        finish_report(&out, "report", &report, &mut artifacts)?;
    } else {
        let bdir = bundle.unwrap_or_else(|| out.join(BUNDLE_DIR));
        let b = load_bundle(&bdir)?;
        let mpath = match manifest.or_else(|| cfg.data.manifest.clone()) {
            Some(p) => p,
            None => out.join(TEST_MANIFEST_FILE),
        };
        let m = Manifest::load(&mpath).stage("manifest")?;
        check_classes(&m, "test manifest")?;
        let input = b
            .input
            .clone()
            .ok_or_else(|| Error::Format("bundle does not record its input settings".into()))?;
        let (clips, labels) = load_clips(&m, input.sample_rate_hz, input.duration_s).stage("load audio")?;
        let (spec, scal) = image_sets(&input, &clips, &labels).stage("images")?;
        timer.lap("images");
        let report =
            evaluate_bundle(&b, &spec.images, &scal.images, &labels, &evaluation_strategies(&b)).stage("evaluate")?;
        timer.lap("evaluate");
        finish_report(&out, "report", &report, &mut artifacts)?;
    }
    write_record(&out, "evaluate", cfg, timer, artifacts)?;
    Ok(())
}

/// Stratified k-fold: members and fusion net are retrained on every fold.
/// One row per fold (scope `fold_<i>`) for the configured strategy, then
/// their summed counts as `aggregate`. Images are computed once.
fn cross_validate(cfg: &RunConfig, m: &Manifest, k: usize, timer: &mut Timer) -> Result<Report> {
    let strategy = cfg.fusion.strategy()?;
    let (spec, scal) = load_images(cfg, m, timer)?;
    let folds = kfold_indices(&spec.labels, k, cfg.seed).stage("folds")?;
    let mut report = Report::default();
    let mut totals: BTreeMap<String, crate::eval::ConfusionCounts> = BTreeMap::new();
    for f in 0..k {
        let (tr, te) = folds.split(f);
        let mut ens = cfg.ensemble.clone();
        ens.master_seed = cfg.seed.wrapping_add(f as u64);
        let pn = patternnet_settings(cfg, strategy);
        let bundle = train_mmdl(&ens, pn.as_ref(), &spec.select(&tr), &scal.select(&tr), &|msg| {
            log(&format!("fold {f}"), msg)
        })?;
        let (ts, tc) = (spec.select(&te), scal.select(&te));
        let outputs = bundle.member_outputs(&ts.images, &tc.images).stage("members")?;
        let fold = evaluate_outputs(&outputs, &ts.labels, bundle.n_cnn(), &[strategy], bundle.fusion.as_ref())
            .stage("evaluate")?;
        timer.lap(&format!("fold {f}"));
        for row in fold.rows.into_iter().filter(|r| r.scope == "ensemble") {
            let t = totals.entry(row.strategy.clone()).or_default();
            t.tp += row.counts.tp;
            t.tn += row.counts.tn;
            t.fp += row.counts.fp;
            t.fn_ += row.counts.fn_;
            report.push(format!("fold_{f}"), row.strategy, row.counts)?;
        }
    }
    for (s, c) in totals {
        report.push("aggregate", s, c)?;
    }
    Ok(report)
}

fn cmd_baseline(
    cfg: &mut RunConfig,
    manifest: Option<PathBuf>,
    test_manifest: Option<PathBuf>,
    recipe: Option<String>,
    classifier: Option<String>,
) -> Result<()> {
    let mut timer = Timer::new();
    if let Some(r) = recipe {
        cfg.baseline.recipe = r.parse::<FeatureRecipe>()?;
    }
    if let Some(c) = classifier {
        cfg.baseline.classifier = c.parse::<ClassifierKind>()?;
    }
    let full = Manifest::load(&manifest_path(manifest, cfg)?).stage("manifest")?;
    check_classes(&full, "manifest")?;
    let (train_m, test_m) = match test_manifest.or_else(|| cfg.data.test_manifest.clone()) {
        Some(p) => (full, Manifest::load(&p).stage("test manifest")?),
        None => {
            if cfg.data.test_fraction == 0.0 {
                return Err(Error::InvalidInput("baseline needs a test manifest or data.test_fraction > 0".into()));
            }
            let (tr, te) = stratified_split(&full.labels(), cfg.data.test_fraction, cfg.seed).stage("test split")?;
            (subset(&full, &tr), subset(&full, &te))
        }
    };
    check_classes(&test_m, "test manifest")?;
    let rate = cfg.data.sample_rate_hz;
    let dur = cfg.data.duration_s;
    let (train_clips, train_labels) = load_clips(&train_m, rate, dur).stage("load audio")?;
    let (test_clips, test_labels) = load_clips(&test_m, rate, dur).stage("load audio")?;
    timer.lap("load audio");
    let b = &cfg.baseline;
    let train_x = b.recipe.extract_all(&train_clips, &train_labels, &b.mfcc).stage("features")?;
    let test_x = b.recipe.extract_all(&test_clips, &test_labels, &b.mfcc).stage("features")?;
    timer.lap("features");
    log("baseline", &format!("{} on {} ({} features)", b.classifier, b.recipe, train_x.dim()));
    let model = BaselineModel::fit(b, &train_x).stage("fit baseline")?;
    timer.lap("fit");
    let report = evaluate_baseline(&model, &test_x).stage("evaluate")?;
    let out = cfg.out_dir();
    create_dir(&out)?;
    let mdir = out.join(BASELINE_DIR);
    model.save(&mdir)?;
    let mut artifacts = vec![mdir];
    finish_report(&out, "baseline_report", &report, &mut artifacts)?;
    write_record(&out, "baseline", cfg, timer, artifacts)?;
    Ok(())
}

pub fn run(cli: Cli) -> Result<()> {
    let mut cfg = resolve_config(&cli.global)?;
    if cfg.jobs > 0 {
        // Fails only if a pool already exists, which is fine to ignore.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cfg.jobs).build_global();
    }
    let name = cli.command.name();
    let res = match cli.command {
        Command::Synth { n_upcall, n_noise } => cmd_synth(&mut cfg, n_upcall, n_noise),
        Command::Train { manifest } => cmd_train(&cfg, manifest),
        Command::Predict { bundle, csv, audio } => cmd_predict(&cfg, &cli.global, &bundle, csv.as_deref(), &audio),
        Command::Evaluate {
            bundle,
            manifest,
            k_folds,
        } => cmd_evaluate(&cfg, bundle, manifest, k_folds),
        Command::Baseline {
            manifest,
            test_manifest,
            recipe,
            classifier,
        } => cmd_baseline(&mut cfg, manifest, test_manifest, recipe, classifier),
    };
    res.map_err(|e| match e {
        Error::Stage { .. } => e,
        other => Error::Stage {
            stage: name.to_string(),
            source: Box::new(other),
        },
    })
}

/// Exit status: 0 on success, 2 for invalid configuration or arguments,
/// 1 for failures while running.
pub fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 2 } else { 1 })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_config() {
        let cli = Cli::try_parse_from(["mmdl", "--seed", "9", "--n-cnn", "3", "--strategy", "vote", "train"]).unwrap();
        let cfg = resolve_config(&cli.global).unwrap();
        assert_eq!((cfg.seed, cfg.ensemble.master_seed, cfg.ensemble.n_cnn), (9, 9, 3));
        assert_eq!(cfg.fusion.strategy().unwrap(), FusionStrategy::MajorityVote);
    }

    #[test]
    fn bad_strategy_is_validation_error() {
        let cli = Cli::try_parse_from(["mmdl", "--strategy", "median", "train"]).unwrap();
        assert!(resolve_config(&cli.global).unwrap_err().is_validation());
        let cli = Cli::try_parse_from(["mmdl", "--k", "0", "train"]).unwrap();
        assert!(resolve_config(&cli.global).unwrap_err().is_validation());
    }

    #[test]
    fn predict_needs_audio() {
        assert!(Cli::try_parse_from(["mmdl", "predict", "--bundle", "b"]).is_err());
    }
}
