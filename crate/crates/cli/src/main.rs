//! `rubicon`: file-based front end to the annotation toolkit.
//!
//! Exit codes: 0 success, 1 diagnostics found under `--strict`, 2 fatal error.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rubicon_core::consistency::{
    export_boxplot_data, export_instances, export_pairs, summarize, SchemeSelector, BOXPLOT_HEADER,
};
use rubicon_core::diagnostics::{Diagnostic, DiagnosticCode};
use rubicon_core::harness::{augment, export_report, make_folds, score, training_pool, FoldSplit, SegmentRegistry};
use rubicon_core::io::{
    detect_csv_kind, parse_annotations, parse_folds, parse_generated, parse_predictions, parse_videos,
    serialize_annotations, serialize_folds, serialize_generated, serialize_predictions, CsvKind, Prediction,
    ProjectConfig,
};
use rubicon_core::model::{check_video_bounds, AnnotationRecord, VideoIndex, VideoMeta};
use rubicon_core::perturb::{descriptor_bins, generate_all, GeneratedSegment};
use rubicon_core::synth::{
    generate_dataset, run_benchmark, serialize_features, BenchmarkOutput, BenchmarkSettings, Sampling,
};

#[derive(Parser)]
#[command(name = "rubicon", version, about = "Temporal-bound annotation toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// Project configuration JSON; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Input files. CSV kind is detected from the header; `.json` files are video metadata.
    #[arg(long, short = 'i')]
    input: Vec<PathBuf>,
    /// Output directory.
    #[arg(long, short = 'o')]
    output: Option<PathBuf>,
    /// Exit with code 1 when any diagnostic is reported.
    #[arg(long)]
    strict: bool,
    /// Overrides every seed in the configuration.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Check annotation files and report diagnostics.
    Validate(Common),
    /// Inter-annotator agreement per instance, class and pooled.
    Consistency {
        #[command(flatten)]
        common: Common,
        /// Schemes to analyze (conventional, rb_full, rb_pre, rb_act); default is every scheme with data.
        #[arg(long)]
        scheme: Vec<SchemeSelector>,
    },
    /// Boundary-perturbed segments around each annotation.
    Generate(Common),
    /// Seeded k-fold split of the annotations.
    Folds(Common),
    /// Training sets enlarged with generated segments, per fold.
    Augment {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        fold: Option<usize>,
    },
    /// Score predictions on ground-truth and generated segments.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        fold: Option<usize>,
    },
    /// Write a synthetic dataset: annotations, videos and per-stream features.
    Synth(Common),
    /// Run the synthetic benchmark end to end and write reports.
    SynthEval(Common),
    /// Serve a project directory over HTTP.
    Serve {
        /// Project directory with config.json, videos.json, tasks.json.
        #[arg(long)]
        project: PathBuf,
        /// Overrides service.bind from the project configuration.
        #[arg(long)]
        bind: Option<String>,
    },
}

/// Every input file, sorted by kind.
#[derive(Default)]
struct Inputs {
    records: Vec<AnnotationRecord>,
    predictions: Vec<Prediction>,
    generated: Vec<GeneratedSegment>,
    folds: Option<FoldSplit>,
    videos: Vec<VideoMeta>,
    diagnostics: usize,
    seen_annotations: bool,
}

impl Inputs {
    fn report(&mut self, path: &Path, diags: &[Diagnostic]) {
        for d in diags {
            eprintln!("{}: {d}", path.display());
        }
        self.diagnostics += diags.len();
    }

    fn load(paths: &[PathBuf]) -> Result<Self> {
        let mut inputs = Inputs::default();
        let mut ids = BTreeSet::new();
        for path in paths {
            let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
            if path.extension().is_some_and(|e| e == "json") {
                inputs
                    .videos
                    .extend(parse_videos(&bytes).with_context(|| format!("parsing {}", path.display()))?);
                continue;
            }
            let ctx = || format!("parsing {}", path.display());
            match detect_csv_kind(&bytes) {
                Some(CsvKind::Annotations) => {
                    let parsed = parse_annotations(&bytes).with_context(ctx)?;
                    let mut diags = parsed.diagnostics;
                    for r in parsed.records {
                        if ids.insert(r.annotation_id.clone()) {
                            inputs.records.push(r);
                        } else {
                            diags.push(Diagnostic::new(
                                DiagnosticCode::DuplicateId,
                                format!("annotation id {} already read from an earlier file", r.annotation_id),
                            ));
                        }
                    }
                    inputs.report(path, &diags);
                    inputs.seen_annotations = true;
                }
                Some(CsvKind::Predictions) => {
                    let parsed = parse_predictions(&bytes).with_context(ctx)?;
                    inputs.report(path, &parsed.diagnostics);
                    inputs.predictions.extend(parsed.predictions);
                }
                Some(CsvKind::Generated) => {
                    let parsed = parse_generated(&bytes).with_context(ctx)?;
                    inputs.report(path, &parsed.diagnostics);
                    inputs.generated.extend(parsed.segments);
                }
                Some(CsvKind::Folds) => {
                    if inputs.folds.is_some() {
                        bail!("{}: only one folds file may be given", path.display());
                    }
                    let (split, diags) = parse_folds(&bytes).with_context(ctx)?;
                    inputs.report(path, &diags);
                    inputs.folds = Some(split);
                }
                None => bail!("{}: unrecognized CSV header", path.display()),
            }
        }
        Ok(inputs)
    }

    fn video_index(&self) -> Result<VideoIndex> {
        VideoIndex::new(self.videos.clone()).context("video metadata")
    }

    fn require_annotations(&self) -> Result<()> {
        if !self.seen_annotations {
            bail!("no annotation file among --input");
        }
        Ok(())
    }
}

fn load_config(common: &Common) -> Result<ProjectConfig> {
    let mut cfg = match &common.config {
        Some(p) => {
            let bytes = fs::read(p).with_context(|| format!("reading {}", p.display()))?;
            ProjectConfig::from_json(&bytes).with_context(|| format!("parsing {}", p.display()))?
        }
        None => ProjectConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.override_seed(seed);
    }
    cfg.validate().context("invalid configuration")?;
    Ok(cfg)
}

fn output_dir(common: &Common) -> Result<&Path> {
    let dir = common
        .output
        .as_deref()
        .context("--output is required for this subcommand")?;
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

fn write(dir: &Path, name: &str, bytes: &[u8]) -> Result<()> {
    let path = dir.join(name);
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn status(common: &Common, diagnostics: usize) -> u8 {
    u8::from(common.strict && diagnostics > 0)
}

fn validate(common: &Common) -> Result<u8> {
    let mut inputs = Inputs::load(&common.input)?;
    inputs.require_annotations()?;
    let videos = inputs.video_index()?;
    if !videos.is_empty() {
        let bounds: Vec<Diagnostic> = inputs
            .records
            .iter()
            .filter_map(|r| check_video_bounds(r, &videos))
            .collect();
        inputs.report(Path::new("<videos>"), &bounds);
    }
    println!("{} records, {} diagnostics", inputs.records.len(), inputs.diagnostics);
    Ok(status(common, inputs.diagnostics))
}

fn consistency(common: &Common, schemes: &[SchemeSelector]) -> Result<u8> {
    let mut inputs = Inputs::load(&common.input)?;
    inputs.require_annotations()?;
    let out = output_dir(common)?;
    let schemes: Vec<SchemeSelector> = if schemes.is_empty() {
        SchemeSelector::ALL
            .into_iter()
            .filter(|s| inputs.records.iter().any(|r| s.select(r).is_some()))
            .collect()
    } else {
        schemes.to_vec()
    };
    let mut aggregates = Vec::new();
    let mut instances = Vec::new();
    for scheme in schemes {
        let report = summarize(scheme, &inputs.records);
        inputs.report(Path::new(scheme.as_str()), &report.diagnostics);
        write(
            out,
            &format!("pairs_{}.csv", scheme.as_str()),
            &export_pairs(scheme, &report.pairs),
        )?;
        match &report.pooled {
            Some(p) => println!(
                "{}: {} pairs, mean {:.6}, std {:.6}",
                scheme.as_str(),
                p.pair_ious.len(),
                p.mean,
                p.std
            ),
            None => println!("{}: no multiply annotated instances", scheme.as_str()),
        }
        aggregates.extend(report.aggregates());
        instances.extend(report.instances);
    }
    let boxplot = if aggregates.is_empty() {
        format!("{}\n", BOXPLOT_HEADER.join(",")).into_bytes()
    } else {
        export_boxplot_data(&aggregates)?
    };
    write(out, "boxplot.csv", &boxplot)?;
    write(out, "instances.csv", &export_instances(&instances))?;
    Ok(status(common, inputs.diagnostics))
}

fn generate(common: &Common) -> Result<u8> {
    let cfg = load_config(common)?;
    let mut inputs = Inputs::load(&common.input)?;
    inputs.require_annotations()?;
    let out = output_dir(common)?;
    let (segments, diags) = generate_all(&inputs.records, &cfg.perturbation(), &inputs.video_index()?)?;
    inputs.report(Path::new("<generate>"), &diags);
    write(out, "generated.csv", &serialize_generated(&segments))?;
    println!("{} segments from {} annotations", segments.len(), inputs.records.len());
    Ok(status(common, inputs.diagnostics))
}

fn folds(common: &Common) -> Result<u8> {
    let cfg = load_config(common)?;
    let inputs = Inputs::load(&common.input)?;
    inputs.require_annotations()?;
    let out = output_dir(common)?;
    let split = make_folds(&inputs.records, cfg.folds.k, cfg.folds.seed, cfg.folds.stratified)?;
    write(out, "folds.csv", &serialize_folds(&split))?;
    println!("fold sizes {:?}", split.fold_sizes());
    Ok(status(common, inputs.diagnostics))
}

fn augment_cmd(common: &Common, fold: Option<usize>) -> Result<u8> {
    let cfg = load_config(common)?;
    let inputs = Inputs::load(&common.input)?;
    let split = inputs
        .folds
        .as_ref()
        .context("augment needs a folds file among --input")?;
    let out = output_dir(common)?;
    let folds: Vec<usize> = match fold {
        Some(f) if f < split.k() => vec![f],
        Some(f) => bail!("fold {f} out of range for k = {}", split.k()),
        None => (0..split.k()).collect(),
    };
    for f in folds {
        let train = split.train_ids(f);
        let pool = training_pool(split, f, &inputs.generated);
        let set = augment(
            &train,
            &pool,
            cfg.augmentation.factor,
            cfg.augmentation.seed.wrapping_add(f as u64),
        )?;
        let mut csv = String::from("segment_id,kind\n");
        for id in &set.ground_truth {
            csv.push_str(&format!("{id},ground_truth\n"));
        }
        for id in &set.generated {
            csv.push_str(&format!("{id},generated\n"));
        }
        write(out, &format!("augment_fold{f}.csv"), csv.as_bytes())?;
        println!(
            "fold {f}: {} ground truth + {} generated",
            set.ground_truth.len(),
            set.generated.len()
        );
    }
    Ok(status(common, inputs.diagnostics))
}

fn evaluate(common: &Common, fold: Option<usize>) -> Result<u8> {
    let cfg = load_config(common)?;
    let mut inputs = Inputs::load(&common.input)?;
    inputs.require_annotations()?;
    let out = output_dir(common)?;
    let bins = descriptor_bins(&cfg.perturbation())?;
    let (registry, diags) = SegmentRegistry::build(&inputs.records, &inputs.generated, inputs.folds.as_ref(), bins);
    inputs.report(Path::new("<registry>"), &diags);
    let (report, diags) = score(&inputs.predictions, &registry, fold);
    inputs.report(Path::new("<predictions>"), &diags);
    for (name, bytes) in export_report(&report) {
        write(out, name, &bytes)?;
    }
    print_accuracy(&report);
    Ok(status(common, inputs.diagnostics))
}

fn print_accuracy(report: &rubicon_core::harness::EvaluationReport) {
    let pct = |x: Option<f64>| x.map_or("n/a".to_string(), |v| format!("{:.2}%", 100.0 * v));
    println!(
        "gt accuracy {}, generated accuracy {}, generated IoU in (0.5, 0.7] {}",
        pct(report.overall_gt_accuracy),
        pct(report.overall_gen_accuracy),
        pct(report.pooled_bucket_accuracy(0.5, 0.7))
    );
}

fn synth(common: &Common) -> Result<u8> {
    let cfg = load_config(common)?;
    let out = output_dir(common)?;
    let ds = generate_dataset(&cfg.synthetic)?;
    write(out, "annotations.csv", &serialize_annotations(&ds.records()))?;
    let mut videos = serde_json::to_vec_pretty(&ds.videos())?;
    videos.push(b'\n');
    write(out, "videos.json", &videos)?;
    for inst in &ds.instances {
        write(
            out,
            &format!("features/{}.csv", inst.record.video_id),
            &serialize_features(&inst.stream),
        )?;
    }
    println!("{} instances of {} classes", ds.instances.len(), ds.classes.len());
    Ok(0)
}

fn write_benchmark(dir: &Path, out: &BenchmarkOutput) -> Result<()> {
    for (name, bytes) in export_report(&out.report) {
        write(dir, name, &bytes)?;
    }
    write(dir, "predictions.csv", &serialize_predictions(&out.predictions))?;
    write(dir, "folds.csv", &serialize_folds(&out.split))?;
    write(dir, "generated.csv", &serialize_generated(&out.generated))
}

fn synth_eval(common: &Common) -> Result<u8> {
    let cfg = load_config(common)?;
    let out = output_dir(common)?;
    let ds = generate_dataset(&cfg.synthetic)?;
    let mut settings = BenchmarkSettings {
        perturbation: cfg.perturbation(),
        k_folds: cfg.folds.k,
        fold_seed: cfg.folds.seed,
        stratified: cfg.folds.stratified,
        augmentation_factor: 1.0,
        augmentation_seed: cfg.augmentation.seed,
        sampling: Sampling::AllFrames,
    };
    let baseline = run_benchmark(&ds, &settings)?;
    write_benchmark(&out.join("baseline"), &baseline)?;
    print!("baseline: ");
    print_accuracy(&baseline.report);
    let mut diagnostics = baseline.diagnostics.len();
    if cfg.augmentation.factor > 1.0 {
        settings.augmentation_factor = cfg.augmentation.factor;
        let augmented = run_benchmark(&ds, &settings)?;
        write_benchmark(&out.join("augmented"), &augmented)?;
        print!("augmented x{}: ", cfg.augmentation.factor);
        print_accuracy(&augmented.report);
        diagnostics += augmented.diagnostics.len();
    }
    Ok(status(common, diagnostics))
}

fn serve(project: &Path, bind: Option<&str>) -> Result<u8> {
    let runtime = tokio::runtime::Runtime::new().context("starting async runtime")?;
    runtime.block_on(rubicon_service::serve(project, bind))?;
    Ok(0)
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Validate(c) => validate(&c),
        Command::Consistency { common, scheme } => consistency(&common, &scheme),
        Command::Generate(c) => generate(&c),
        Command::Folds(c) => folds(&c),
        Command::Augment { common, fold } => augment_cmd(&common, fold),
        Command::Evaluate { common, fold } => evaluate(&common, fold),
        Command::Synth(c) => synth(&c),
        Command::SynthEval(c) => synth_eval(&c),
        Command::Serve { project, bind } => serve(&project, bind.as_deref()),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
