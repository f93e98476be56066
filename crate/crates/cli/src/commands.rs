use std::fs;
use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use prnu_core::dataset::{decode_image, load_manifest, ImageSource, Manifest};
use prnu_core::eval::{
    fleiss_kappa, mixing_sensitivity, paired_score_matrices, run_experiment, threshold_sweep, trial_seeds,
    write_mixing_csv, write_sweep_csv, ExperimentKind,
};
use prnu_core::fingerprint::{estimate_camera_fingerprint, CameraFingerprint};
use prnu_core::image::{ExposureType, Image, ImageMeta};
use prnu_core::matching::{PeakSearch, PreparedQuery};
use prnu_core::sim::{render_corpus, Protocol};
use serde::Serialize;

use crate::config::ConfigFile;

#[derive(Debug, Parser)]
#[command(name = "prnu", version, about = "Source-camera identification from sensor pattern noise")]
pub struct Cli {
    /// TOML file overriding algorithm and corpus parameters.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (results do not depend on this).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Render a synthetic corpus to PNG files plus a manifest.
    Simulate(SimulateArgs),
    /// Estimate a camera fingerprint from images.
    Fingerprint(FingerprintArgs),
    /// Score a questioned image against a fingerprint.
    Match(MatchArgs),
    /// Run multi-trial experiments and write reports and curves.
    Evaluate(EvaluateArgs),
    /// Fleiss' kappa over a subjects-by-raters CSV of labels.
    Kappa(KappaArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ProtocolArg {
    SameScene,
    UniqueScene,
}

#[derive(Debug, Args)]
struct CorpusArgs {
    #[arg(long)]
    cameras: Option<usize>,
    /// Scenes per camera.
    #[arg(long)]
    scenes: Option<usize>,
    /// Square image side; use --height/--width for other shapes.
    #[arg(long, conflicts_with_all = ["height", "width"])]
    size: Option<usize>,
    #[arg(long, requires = "width")]
    height: Option<usize>,
    #[arg(long, requires = "height")]
    width: Option<usize>,
    #[arg(long)]
    k_strength: Option<f64>,
    #[arg(long, value_enum)]
    protocol: Option<ProtocolArg>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    corpus: CorpusArgs,
}

#[derive(Debug, Args)]
struct FingerprintArgs {
    /// Output fingerprint file.
    #[arg(long)]
    out: PathBuf,
    /// Explicit image list.
    #[arg(long, num_args = 1.., conflicts_with = "manifest", required_unless_present = "manifest")]
    images: Vec<PathBuf>,
    /// Take the camera's images from a manifest instead.
    #[arg(long, requires = "camera")]
    manifest: Option<PathBuf>,
    /// Camera id (selects manifest rows, or labels an image list).
    #[arg(long)]
    camera: Option<String>,
    #[arg(long)]
    camera_model: Option<String>,
    #[arg(long, default_value = "auto", value_parser = parse_exposure)]
    exposure: ExposureType,
    /// Use at most this many manifest images (in scene order).
    #[arg(long)]
    count: Option<usize>,
}

#[derive(Debug, Args)]
struct MatchArgs {
    #[arg(long)]
    image: PathBuf,
    #[arg(long)]
    fingerprint: PathBuf,
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long, value_enum)]
    peak_search: Option<PeakArg>,
    /// Also write the JSON result here (plus a run record beside it).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PeakArg {
    ZeroShift,
    FullPlane,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, conflicts_with = "synthetic", required_unless_present = "synthetic")]
    manifest: Option<PathBuf>,
    /// Evaluate on an in-memory synthetic corpus.
    #[arg(long)]
    synthetic: bool,
    #[arg(long)]
    corpus_seed: Option<u64>,
    #[command(flatten)]
    corpus: CorpusArgs,
    /// Experiment to run; repeatable. Defaults to auto_auto unless only --mixing is asked for.
    #[arg(long, value_parser = parse_experiment)]
    experiment: Vec<ExperimentKind>,
    #[arg(long, default_value_t = 5)]
    trials: usize,
    /// Base seed; trial seeds are derived from it.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    resamples: Option<usize>,
    #[arg(long)]
    threshold: Option<f64>,
    /// Images per camera for fingerprints.
    #[arg(long)]
    fingerprint_count: Option<usize>,
    /// Questioned images per camera.
    #[arg(long)]
    questioned_count: Option<usize>,
    /// Integer threshold range `lo:hi` for a sweep of each experiment's first trial.
    #[arg(long, value_parser = parse_range)]
    sweep: Option<RangeInclusive<i64>>,
    /// Off-nominal exposure for a 101-point mixing curve against auto questioned images.
    #[arg(long, value_parser = parse_exposure)]
    mixing: Option<ExposureType>,
}

#[derive(Debug, Args)]
struct KappaArgs {
    /// CSV with one row per subject and one column per rater.
    #[arg(long)]
    ratings: PathBuf,
    /// The first line is data, not a header.
    #[arg(long)]
    no_header: bool,
}

fn parse_exposure(s: &str) -> Result<ExposureType, String> {
    s.parse().map_err(|e: prnu_core::Error| e.to_string())
}

fn parse_experiment(s: &str) -> Result<ExperimentKind, String> {
    s.parse().map_err(|e: prnu_core::Error| e.to_string())
}

fn parse_range(s: &str) -> Result<RangeInclusive<i64>, String> {
    let (a, b) = s.split_once(':').ok_or("expected lo:hi")?;
    let lo: i64 = a.trim().parse().map_err(|_| format!("bad lower bound '{a}'"))?;
    let hi: i64 = b.trim().parse().map_err(|_| format!("bad upper bound '{b}'"))?;
    if lo > hi {
        return Err(format!("empty range {lo}:{hi}"));
    }
    Ok(lo..=hi)
}

#[derive(Debug)]
pub struct Failure {
    pub kind: String,
    pub message: String,
    pub code: u8,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Failure {
            kind: "usage".into(),
            message: message.into(),
            code: 2,
        }
    }

    pub fn domain(kind: &str, message: impl Into<String>) -> Self {
        Failure {
            kind: kind.into(),
            message: message.into(),
            code: 1,
        }
    }
}

impl From<prnu_core::Error> for Failure {
    fn from(e: prnu_core::Error) -> Self {
        Failure::domain(e.kind(), e.to_string())
    }
}

type CliResult<T = ()> = Result<T, Failure>;

/// Resolved inputs of a run, written as `run.json` so the run can be replayed.
#[derive(Serialize)]
struct RunRecord<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    config: &'a ConfigFile,
    seeds: Vec<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    manifest_hash: Option<String>,
    inputs: Vec<String>,
}

impl RunRecord<'_> {
    fn write(&self, path: &Path) -> CliResult {
        let mut text = serde_json::to_string_pretty(self).map_err(|e| Failure::domain("json", e.to_string()))?;
        text.push('\n');
        write_file(path, text)
    }
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> CliResult {
    fs::write(path, contents).map_err(|e| Failure::domain("io", format!("{}: {e}", path.display())))
}

fn create_dir(path: &Path) -> CliResult {
    fs::create_dir_all(path).map_err(|e| Failure::domain("io", format!("{}: {e}", path.display())))
}

fn record_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".run.json");
    out.with_file_name(name)
}

pub fn run(cli: Cli) -> CliResult {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(Failure::usage("--jobs must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| Failure::domain("internal", e.to_string()))?;
    }
    let mut config = ConfigFile::load(cli.config.as_deref())?;
    match cli.command {
        Command::Simulate(args) => simulate(args, &mut config),
        Command::Fingerprint(args) => fingerprint(args, &config),
        Command::Match(args) => match_image(args, &mut config),
        Command::Evaluate(args) => evaluate(args, &mut config),
        Command::Kappa(args) => kappa(args),
    }
}

fn apply_corpus_args(args: &CorpusArgs, config: &mut ConfigFile) {
    let c = &mut config.corpus;
    if let Some(n) = args.cameras {
        c.n_cameras = n;
    }
    if let Some(n) = args.scenes {
        c.scenes_per_camera = n;
    }
    if let Some(s) = args.size {
        c.shape = (s, s);
    }
    if let (Some(h), Some(w)) = (args.height, args.width) {
        c.shape = (h, w);
    }
    if let Some(k) = args.k_strength {
        c.k_strength = k;
    }
    if let Some(p) = args.protocol {
        c.protocol = match p {
            ProtocolArg::SameScene => Protocol::SameScene,
            ProtocolArg::UniqueScene => Protocol::UniqueScene,
        };
    }
}

fn simulate(args: SimulateArgs, config: &mut ConfigFile) -> CliResult {
    apply_corpus_args(&args.corpus, config);
    if let Some(seed) = args.seed {
        config.corpus.seed = seed;
    }
    let corpus = render_corpus(&config.corpus)?;
    create_dir(&args.out)?;
    let manifest = corpus.write_to_dir(&args.out)?;
    RunRecord {
        tool: "prnu",
        version: env!("CARGO_PKG_VERSION"),
        command: "simulate",
        config,
        seeds: vec![config.corpus.seed],
        manifest_hash: Some(manifest.content_hash()),
        inputs: Vec::new(),
    }
    .write(&args.out.join("run.json"))?;
    println!("wrote {} images and manifest.csv to {}", manifest.len(), args.out.display());
    Ok(())
}

fn load_image_list(paths: &[PathBuf], camera: Option<&str>, model: Option<&str>) -> CliResult<Vec<Image>> {
    let meta = ImageMeta {
        camera_id: camera.unwrap_or("unknown").to_string(),
        camera_model: model.unwrap_or("unknown").to_string(),
        ..ImageMeta::unknown()
    };
    let mut images = Vec::with_capacity(paths.len());
    for p in paths {
        let img = decode_image(p, meta.clone())?;
        if let Some(first) = images.first().map(Image::shape) {
            if img.shape() != first {
                return Err(Failure::domain(
                    "shape_mismatch",
                    format!(
                        "{} is {}x{} but {} is {}x{}",
                        p.display(),
                        img.width(),
                        img.height(),
                        paths[0].display(),
                        first.1,
                        first.0
                    ),
                ));
            }
        }
        images.push(img);
    }
    Ok(images)
}

fn fingerprint(args: FingerprintArgs, config: &ConfigFile) -> CliResult {
    let (images, inputs, manifest_hash) = if let Some(mpath) = &args.manifest {
        let manifest = load_manifest(mpath)?;
        let camera = args.camera.as_deref().expect("clap requires --camera with --manifest");
        let mut rows: Vec<usize> = (0..manifest.len())
            .filter(|&i| {
                let m = &manifest.rows()[i].meta;
                m.camera_id == camera && m.exposure_type == args.exposure
            })
            .collect();
        rows.sort_by(|&a, &b| manifest.rows()[a].meta.scene_id.cmp(&manifest.rows()[b].meta.scene_id));
        if let Some(n) = args.count {
            rows.truncate(n);
        }
        let images = rows.iter().map(|&r| manifest.load(r)).collect::<Result<Vec<_>, _>>()?;
        let inputs = rows.iter().map(|&r| manifest.resolve(r).display().to_string()).collect();
        (images, inputs, Some(manifest.content_hash()))
    } else {
        let images = load_image_list(&args.images, args.camera.as_deref(), args.camera_model.as_deref())?;
        (images, args.images.iter().map(|p| p.display().to_string()).collect(), None)
    };
    if images.len() < 2 {
        return Err(Failure::domain(
            "insufficient_images",
            format!("fingerprint estimation needs n >= 2 images, got {}", images.len()),
        ));
    }
    let fp = estimate_camera_fingerprint(&images, &config.denoise, &config.nua, &config.saturation)?;
    fp.save(&args.out)?;
    RunRecord {
        tool: "prnu",
        version: env!("CARGO_PKG_VERSION"),
        command: "fingerprint",
        config,
        seeds: Vec::new(),
        manifest_hash,
        inputs,
    }
    .write(&record_path(&args.out))?;
    println!(
        "fingerprint of {} from {} images ({}x{}) written to {}",
        fp.camera_id,
        fp.n_images(),
        fp.shape().1,
        fp.shape().0,
        args.out.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct MatchOutput<'a> {
    image: String,
    fingerprint: String,
    camera_id: &'a str,
    camera_model: &'a str,
    pce: f64,
    decision: bool,
    threshold: f64,
    peak_search: PeakSearch,
    peak_location: (usize, usize),
    correlation_peak: f64,
}

fn match_image(args: MatchArgs, config: &mut ConfigFile) -> CliResult {
    if let Some(t) = args.threshold {
        config.matching.threshold = t;
    }
    if let Some(p) = args.peak_search {
        config.matching.peak_search = match p {
            PeakArg::ZeroShift => PeakSearch::ZeroShiftOnly,
            PeakArg::FullPlane => PeakSearch::FullPlane,
        };
    }
    let fp = CameraFingerprint::load(&args.fingerprint)?;
    let image = decode_image(&args.image, ImageMeta::unknown())?;
    let query = PreparedQuery::new(&image, &config.denoise, &config.nua)?;
    let result = query.score(&fp, &config.matching)?;
    let out = MatchOutput {
        image: args.image.display().to_string(),
        fingerprint: args.fingerprint.display().to_string(),
        camera_id: &fp.camera_id,
        camera_model: &fp.camera_model,
        pce: result.pce,
        decision: result.decision,
        threshold: result.threshold,
        peak_search: config.matching.peak_search,
        peak_location: result.peak_location,
        correlation_peak: result.correlation_peak,
    };
    let json = serde_json::to_string_pretty(&out).map_err(|e| Failure::domain("json", e.to_string()))?;
    println!("{json}");
    if let Some(path) = &args.out {
        write_file(path, format!("{json}\n"))?;
        RunRecord {
            tool: "prnu",
            version: env!("CARGO_PKG_VERSION"),
            command: "match",
            config,
            seeds: Vec::new(),
            manifest_hash: None,
            inputs: vec![out.image.clone(), out.fingerprint.clone()],
        }
        .write(&record_path(path))?;
    }
    Ok(())
}

fn evaluate(args: EvaluateArgs, config: &mut ConfigFile) -> CliResult {
    apply_corpus_args(&args.corpus, config);
    if let Some(seed) = args.corpus_seed {
        config.corpus.seed = seed;
    }
    if let Some(r) = args.resamples {
        config.n_resamples = r;
    }
    if let Some(t) = args.threshold {
        config.matching.threshold = t;
    }
    if let Some(n) = args.fingerprint_count {
        config.sizes.fingerprint = n;
    }
    if let Some(n) = args.questioned_count {
        config.sizes.questioned = n;
    }
    if args.trials == 0 {
        return Err(Failure::usage("--trials must be at least 1"));
    }
    if args.mixing == Some(ExposureType::Auto) {
        return Err(Failure::usage("--mixing takes over or under"));
    }
    let mut experiments = args.experiment.clone();
    if experiments.is_empty() && args.mixing.is_none() {
        experiments.push(ExperimentKind::AutoAuto);
    }
    experiments.dedup();

    let source: Box<dyn ImageSource> = match &args.manifest {
        Some(path) => Box::new(load_manifest(path)?),
        None => Box::new(render_corpus(&config.corpus)?),
    };
    let manifest: &Manifest = source.manifest();
    let eval_cfg = config.eval();
    let seeds = trial_seeds(args.seed, args.trials);
    create_dir(&args.out)?;

    for kind in &experiments {
        let run = run_experiment(*kind, source.as_ref(), &seeds, &eval_cfg)?;
        run.report.save(&args.out)?;
        if let Some(range) = &args.sweep {
            let points = threshold_sweep(&run.matrices[0], range.clone())?;
            write_sweep_csv(&points, args.out.join(format!("{kind}_sweep.csv")))?;
        }
        let a = &run.report.aggregate;
        println!(
            "{kind}: tpr={:.4} tnr={:.4} accuracy={:.4} zero_fpr_threshold={:.1}",
            a.tpr, a.tnr, a.accuracy, a.zero_fpr_threshold_mean
        );
    }
    if let Some(off) = args.mixing {
        let (nominal, offnominal) =
            paired_score_matrices(source.as_ref(), ExposureType::Auto, ExposureType::Auto, off, seeds[0], &eval_cfg)?;
        let curve = mixing_sensitivity(
            &nominal,
            &offnominal,
            eval_cfg.matching.threshold,
            101,
            eval_cfg.n_resamples,
            seeds[0],
        )?;
        write_mixing_csv(&curve, args.out.join(format!("mixing_{off}.csv")))?;
        let (first, last) = (curve[0], curve[curve.len() - 1]);
        println!("mixing {off}: tpr {:.4} -> {:.4} over {} points", first.tpr, last.tpr, curve.len());
    }

    let inputs = args.manifest.iter().map(|p| p.display().to_string()).collect();
    RunRecord {
        tool: "prnu",
        version: env!("CARGO_PKG_VERSION"),
        command: "evaluate",
        config,
        seeds,
        manifest_hash: Some(manifest.content_hash()),
        inputs,
    }
    .write(&args.out.join("run.json"))
}

fn kappa(args: KappaArgs) -> CliResult {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(!args.no_header)
        .from_path(&args.ratings)
        .map_err(|e| Failure::domain("csv", format!("{}: {e}", args.ratings.display())))?;
    let mut ratings = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| Failure::domain("csv", e.to_string()))?;
        ratings.push(rec.iter().map(|f| f.trim().to_string()).collect::<Vec<_>>());
    }
    let result = fleiss_kappa(&ratings)?;
    let json = serde_json::to_string_pretty(&result).map_err(|e| Failure::domain("json", e.to_string()))?;
    println!("{json}");
    Ok(())
}
