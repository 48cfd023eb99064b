//! Command-line interface: tracking, filter training, evaluation, synthetic
//! data, and model inspection.
//!
//! All subcommands are pure functions of their inputs plus `--seed`, so a
//! repeated invocation writes byte-identical outputs.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::eval::{evaluate, EvalCounts};
use crate::features::TimedBox;
use crate::filter::TransFilterModel;
use crate::geometry::BoundingBox;
use crate::io::cmc::read_cmc;
use crate::io::config::{read_tracker_config, read_train_config, TrainFileConfig};
use crate::io::embeddings::read_embeddings;
use crate::io::model_file::{inspect_model, load_model, save_model};
use crate::io::mot::{read_detections, read_mot_file, tracks_by_id, write_results, MotRecord};
use crate::io::seqinfo::read_seqinfo;
use crate::rng::substream;
use crate::synth::{generate, read_scenario, write_sequence};
use crate::tracker::{run_sequence, FilterKind, SequenceData, TrackerConfig};
use crate::training::{fit_window_stats, make_training_set, train};

/// RNG stream tag for model weight initialization.
const STREAM_INIT: u64 = 0;

#[derive(Debug, Parser)]
#[command(
    name = "deepmovesort",
    version,
    about = "Multi-object tracking with buffered measurements and learned motion prediction"
)]
pub struct Cli {
    /// Seed for stochastic stages (weight init, shuffling, synthesis).
    /// Overrides any seed found in configuration files.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Report wall-clock timings of the major stages on stderr.
    #[arg(long, global = true)]
    pub timing: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the tracker over detections and write result rows.
    Track(TrackArgs),
    /// Train the transformer motion filter on ground-truth tracks.
    TrainFilter(TrainFilterArgs),
    /// Score tracking results against ground truth.
    Eval(EvalArgs),
    /// Generate a synthetic sequence from a scenario file.
    Synth(SynthArgs),
    /// Print a saved model's architecture and tensor shapes.
    InspectModel(InspectModelArgs),
}

#[derive(Debug, Args)]
pub struct TrackArgs {
    /// Detection input: a detection file, a sequence directory (containing
    /// det/det.txt), or a directory of sequence directories.
    #[arg(long)]
    pub dets: PathBuf,
    /// Appearance embeddings for the detections (single-sequence input
    /// only; sequence directories load their own embeddings.bin).
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Per-frame camera transforms (single-sequence input only).
    #[arg(long)]
    pub cmc: Option<PathBuf>,
    /// Trained motion model; omitting it selects the Kalman filter.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Tracker configuration file (defaults apply when omitted).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output file, or output directory when the input is a directory of
    /// sequences.
    #[arg(long)]
    pub out: PathBuf,
    /// Also render one overlay image per frame into this directory.
    #[arg(long)]
    pub overlay_dir: Option<PathBuf>,
    /// Image width in pixels (required for bare detection files; overrides
    /// seqinfo.ini otherwise).
    #[arg(long)]
    pub img_width: Option<u32>,
    /// Image height in pixels (see --img-width).
    #[arg(long)]
    pub img_height: Option<u32>,
}

#[derive(Debug, Args)]
pub struct TrainFilterArgs {
    /// A sequence directory (containing gt/gt.txt) or a directory of them.
    #[arg(long)]
    pub gt_dir: PathBuf,
    /// Training configuration file (defaults apply when omitted).
    #[arg(long)]
    pub train_config: Option<PathBuf>,
    /// Where to save the trained model. Per-epoch losses go to
    /// `<out-model>.loss.txt`.
    #[arg(long)]
    pub out_model: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Ground truth: a file, or a directory of sequence directories.
    #[arg(long)]
    pub gt: PathBuf,
    /// Results: a file, or a directory of `<sequence>.txt` files.
    #[arg(long)]
    pub results: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Scenario description (TOML).
    #[arg(long)]
    pub scenario: PathBuf,
    /// The sequence is written to `<out-dir>/<scenario name>/`.
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct InspectModelArgs {
    #[arg(long)]
    pub model: PathBuf,
}

/// Parse and run, as the binary does; lets tests and tools drive the CLI
/// in-process. The iterator must include the program name.
pub fn run_from<I, T>(args: I) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| Error::Cli(e.to_string()))?;
    run(cli)
}

pub fn run(cli: Cli) -> Result<()> {
    let timer = Timings::new(cli.timing);
    match cli.command {
        Command::Track(args) => cmd_track(args, &timer),
        Command::TrainFilter(args) => cmd_train_filter(args, cli.seed, &timer),
        Command::Eval(args) => cmd_eval(args),
        Command::Synth(args) => cmd_synth(args, cli.seed),
        Command::InspectModel(args) => cmd_inspect_model(args),
    }
}

struct Timings {
    enabled: bool,
    start: Instant,
}

impl Timings {
    fn new(enabled: bool) -> Self {
        Timings { enabled, start: Instant::now() }
    }

    fn lap(&self, stage: &str) {
        if self.enabled {
            eprintln!("timing: {stage} done at {:.1}ms", self.start.elapsed().as_secs_f64() * 1e3);
        }
    }
}

// ---------------------------------------------------------------- track --

/// How the --dets argument names its input.
enum DetsInput {
    /// A bare detection file; geometry must come from the flags.
    File(PathBuf),
    /// One sequence directory with det/det.txt and friends.
    SeqDir(PathBuf),
    /// A directory of sequence directories.
    Root(Vec<PathBuf>),
}

fn classify_dets(path: &Path) -> Result<DetsInput> {
    if path.is_file() {
        return Ok(DetsInput::File(path.to_path_buf()));
    }
    if !path.is_dir() {
        return Err(Error::Config(format!("--dets {}: no such file or directory", path.display())));
    }
    if path.join("det").join("det.txt").is_file() {
        return Ok(DetsInput::SeqDir(path.to_path_buf()));
    }
    let mut seqs = Vec::new();
    let entries = std::fs::read_dir(path).map_err(|e| Error::io(path, e))?;
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(path, e))?;
        let p = entry.path();
        if p.is_dir() && p.join("det").join("det.txt").is_file() {
            seqs.push(p);
        }
    }
    if seqs.is_empty() {
        return Err(Error::Config(format!(
            "--dets {}: neither a detection file, a sequence directory (det/det.txt), \
             nor a directory of sequence directories",
            path.display()
        )));
    }
    seqs.sort();
    Ok(DetsInput::Root(seqs))
}

fn seq_name(dir: &Path) -> String {
    dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| "sequence".into())
}

/// Assemble a sequence's inputs from a sequence directory, with flag
/// overrides for geometry.
fn load_seq_dir(dir: &Path, args: &TrackArgs) -> Result<SequenceData> {
    let detections = read_detections(&dir.join("det").join("det.txt"))?;
    let info = match read_seqinfo(&dir.join("seqinfo.ini")) {
        Ok(info) => Some(info),
        Err(Error::Io { .. }) => None,
        Err(e) => return Err(e),
    };
    let (width, height) = match (args.img_width.or(info.as_ref().map(|i| i.image_width)),
                                 args.img_height.or(info.as_ref().map(|i| i.image_height))) {
        (Some(w), Some(h)) => (w, h),
        _ => {
            return Err(Error::Config(format!(
                "{}: no seqinfo.ini; pass --img-width and --img-height",
                dir.display()
            )))
        }
    };
    let max_frame = detections.keys().next_back().copied().unwrap_or(-1);
    let num_frames = (max_frame + 1).max(info.as_ref().map(|i| i.seq_length as i64).unwrap_or(0));
    let emb_path = dir.join("embeddings.bin");
    let embeddings = if emb_path.is_file() { Some(read_embeddings(&emb_path)?) } else { None };
    let cmc_path = dir.join("cmc.txt");
    let cmc = if cmc_path.is_file() { Some(read_cmc(&cmc_path)?) } else { None };
    Ok(SequenceData {
        detections,
        embeddings,
        cmc,
        image_width: width as f64,
        image_height: height as f64,
        num_frames,
    })
}

/// Assemble a sequence from a bare detection file plus flags.
fn load_det_file(path: &Path, args: &TrackArgs) -> Result<SequenceData> {
    let detections = read_detections(path)?;
    let (width, height) = match (args.img_width, args.img_height) {
        (Some(w), Some(h)) => (w, h),
        _ => {
            return Err(Error::Config(
                "a bare detection file has no geometry; pass --img-width and --img-height".into(),
            ))
        }
    };
    let max_frame = detections.keys().next_back().copied().unwrap_or(-1);
    let embeddings = args.embeddings.as_deref().map(read_embeddings).transpose()?;
    let cmc = args.cmc.as_deref().map(read_cmc).transpose()?;
    Ok(SequenceData {
        detections,
        embeddings,
        cmc,
        image_width: width as f64,
        image_height: height as f64,
        num_frames: max_frame + 1,
    })
}

/// The configuration weights appearance, so running without embeddings
/// would silently degrade; refuse instead.
fn require_embeddings(cfg: &TrackerConfig, data: &SequenceData, what: &str) -> Result<()> {
    if cfg.ha.appearance_weight > 0.0 && data.embeddings.is_none() {
        return Err(Error::Config(format!(
            "appearance has weight {} (ha.reid.weight) but {what} provides no embeddings; \
             pass --embeddings / provide embeddings.bin, or set ha.reid.weight = 0",
            cfg.ha.appearance_weight
        )));
    }
    Ok(())
}

fn cmd_track(args: TrackArgs, timer: &Timings) -> Result<()> {
    let config = match &args.config {
        Some(path) => read_tracker_config(path)?,
        None => TrackerConfig::default(),
    };
    let filters = match &args.model {
        Some(path) => FilterKind::Transformer(Arc::new(load_model(path)?)),
        None => FilterKind::Kalman,
    };
    let input = classify_dets(&args.dets)?;
    timer.lap("load");

    match input {
        DetsInput::File(path) => {
            let data = load_det_file(&path, &args)?;
            require_embeddings(&config, &data, "the input")?;
            let records = run_sequence(&config, filters, &data)?;
            timer.lap("track");
            write_output(&args.out, &records)?;
            if let Some(dir) = &args.overlay_dir {
                render_overlays(dir, &records, &data)?;
            }
            timer.lap("write");
            println!("wrote {} rows to {}", records.len(), args.out.display());
        }
        DetsInput::SeqDir(dir) => {
            let mut data = load_seq_dir(&dir, &args)?;
            if let Some(path) = &args.embeddings {
                data.embeddings = Some(read_embeddings(path)?);
            }
            if let Some(path) = &args.cmc {
                data.cmc = Some(read_cmc(path)?);
            }
            require_embeddings(&config, &data, "the sequence")?;
            let records = run_sequence(&config, filters, &data)?;
            timer.lap("track");
            write_output(&args.out, &records)?;
            if let Some(odir) = &args.overlay_dir {
                render_overlays(odir, &records, &data)?;
            }
            timer.lap("write");
            println!("wrote {} rows to {}", records.len(), args.out.display());
        }
        DetsInput::Root(seqs) => {
            if args.embeddings.is_some() || args.cmc.is_some() {
                return Err(Error::Config(
                    "--embeddings/--cmc apply to single-sequence input; sequence \
                     directories load their own embeddings.bin and cmc.txt"
                        .into(),
                ));
            }
            std::fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;
            let lines: Vec<String> = seqs
                .par_iter()
                .map(|dir| -> Result<String> {
                    let name = seq_name(dir);
                    let data = load_seq_dir(dir, &args)?;
                    require_embeddings(&config, &data, &format!("sequence {name}"))?;
                    let records = run_sequence(&config, filters.clone(), &data)?;
                    let out = args.out.join(format!("{name}.txt"));
                    write_output(&out, &records)?;
                    if let Some(odir) = &args.overlay_dir {
                        render_overlays(&odir.join(&name), &records, &data)?;
                    }
                    Ok(format!("wrote {} rows to {}", records.len(), out.display()))
                })
                .collect::<Result<Vec<String>>>()?;
            timer.lap("track");
            for line in lines {
                println!("{line}");
            }
        }
    }
    Ok(())
}

fn write_output(path: &Path, records: &[MotRecord]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    write_results(path, records)
}

// ------------------------------------------------------------- overlays --

/// Track colors, cycled by id.
const PALETTE: [[u8; 3]; 8] = [
    [230, 80, 60],
    [70, 170, 240],
    [90, 200, 90],
    [240, 200, 60],
    [190, 110, 230],
    [80, 220, 200],
    [240, 140, 40],
    [230, 120, 170],
];

/// One binary PPM (P6) per frame with each track's box outlined in its
/// id's color.
fn render_overlays(dir: &Path, records: &[MotRecord], data: &SequenceData) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let (w, h) = (data.image_width as usize, data.image_height as usize);
    let mut frames: BTreeMap<i64, Vec<&MotRecord>> = BTreeMap::new();
    for r in records {
        frames.entry(r.frame).or_default().push(r);
    }
    for frame in 0..data.num_frames {
        let mut pixels = vec![20u8; w * h * 3];
        if let Some(rows) = frames.get(&frame) {
            for r in rows {
                let color = PALETTE[(r.id as usize) % PALETTE.len()];
                draw_rect(&mut pixels, w, h, &r.bbox, color);
            }
        }
        let path = dir.join(format!("frame_{:06}.ppm", frame + 1));
        let mut bytes = format!("P6\n{w} {h}\n255\n").into_bytes();
        bytes.extend_from_slice(&pixels);
        std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

fn draw_rect(pixels: &mut [u8], w: usize, h: usize, b: &BoundingBox, color: [u8; 3]) {
    if w == 0 || h == 0 {
        return;
    }
    let clamp_x = |v: f64| -> usize { (v.round().max(0.0) as usize).min(w - 1) };
    let clamp_y = |v: f64| -> usize { (v.round().max(0.0) as usize).min(h - 1) };
    let (x0, x1) = (clamp_x(b.x), clamp_x(b.x + b.w));
    let (y0, y1) = (clamp_y(b.y), clamp_y(b.y + b.h));
    let mut put = |x: usize, y: usize| {
        let i = (y * w + x) * 3;
        pixels[i..i + 3].copy_from_slice(&color);
    };
    for x in x0..=x1 {
        put(x, y0);
        put(x, y1);
    }
    for y in y0..=y1 {
        put(x0, y);
        put(x1, y);
    }
}

// --------------------------------------------------------- train-filter --

/// Ground-truth tracks of one sequence directory, in normalized
/// coordinates, ordered by track id.
fn load_gt_tracks(dir: &Path) -> Result<Vec<Vec<TimedBox>>> {
    let gt_path = dir.join("gt").join("gt.txt");
    let records = read_mot_file(&gt_path)?;
    let info = read_seqinfo(&dir.join("seqinfo.ini")).map_err(|e| {
        Error::Config(format!(
            "{}: training needs seqinfo.ini for image dimensions ({e})",
            dir.display()
        ))
    })?;
    let (sx, sy) = (1.0 / info.image_width as f64, 1.0 / info.image_height as f64);
    let by_id = tracks_by_id(&records)?;
    Ok(by_id
        .into_values()
        .map(|track| {
            track
                .into_iter()
                .map(|tb| TimedBox::new(tb.frame, tb.bbox.scaled(sx, sy)))
                .collect()
        })
        .collect())
}

fn gt_sequence_dirs(root: &Path) -> Result<Vec<PathBuf>> {
    if root.join("gt").join("gt.txt").is_file() {
        return Ok(vec![root.to_path_buf()]);
    }
    let mut seqs = Vec::new();
    let entries = std::fs::read_dir(root).map_err(|e| Error::io(root, e))?;
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(root, e))?;
        let p = entry.path();
        if p.is_dir() && p.join("gt").join("gt.txt").is_file() {
            seqs.push(p);
        }
    }
    if seqs.is_empty() {
        return Err(Error::Config(format!(
            "--gt-dir {}: no gt/gt.txt here or in any subdirectory",
            root.display()
        )));
    }
    seqs.sort();
    Ok(seqs)
}

fn cmd_train_filter(args: TrainFilterArgs, seed: Option<u64>, timer: &Timings) -> Result<()> {
    let TrainFileConfig { train: mut train_cfg, arch } = match &args.train_config {
        Some(path) => read_train_config(path)?,
        None => TrainFileConfig::default(),
    };
    if train_cfg.epochs == 0 {
        return Err(Error::Config("epochs = 0 would train nothing; set epochs >= 1".into()));
    }
    if let Some(s) = seed {
        train_cfg.seed = s;
    }

    let mut tracks = Vec::new();
    for dir in gt_sequence_dirs(&args.gt_dir)? {
        tracks.extend(load_gt_tracks(&dir)?);
    }
    let windows = make_training_set(&tracks, arch.history_len, arch.m_max, train_cfg.stride);
    if windows.is_empty() {
        return Err(Error::Config(format!(
            "no usable training windows: {} tracks are all shorter than two observations",
            tracks.len()
        )));
    }
    let stats = fit_window_stats(&windows)?;
    timer.lap("load");

    let mut init_rng = substream(train_cfg.seed, STREAM_INIT, 0);
    let mut model = TransFilterModel::new(arch, stats, &mut init_rng)?;
    let report = train(&mut model, &windows, &train_cfg)?;
    timer.lap("train");

    for (epoch, loss) in report.epoch_losses.iter().enumerate() {
        println!("epoch {:>3}: loss {loss:.6}", epoch + 1);
    }
    save_model(&args.out_model, &model)?;
    let loss_path = PathBuf::from(format!("{}.loss.txt", args.out_model.display()));
    let loss_text: String =
        report.epoch_losses.iter().map(|l| format!("{l:.9}\n")).collect();
    std::fs::write(&loss_path, loss_text).map_err(|e| Error::io(&loss_path, e))?;
    timer.lap("write");
    println!(
        "trained on {} windows from {} tracks; saved {} (losses: {})",
        report.windows,
        tracks.len(),
        args.out_model.display(),
        loss_path.display()
    );
    Ok(())
}

// ---------------------------------------------------------------- eval --

fn cmd_eval(args: EvalArgs) -> Result<()> {
    let pairs: Vec<(String, PathBuf, PathBuf)> = if args.gt.is_file() {
        if !args.results.is_file() {
            return Err(Error::Config(format!(
                "--gt is a file, so --results must be a file too (got {})",
                args.results.display()
            )));
        }
        vec![("all".to_string(), args.gt.clone(), args.results.clone())]
    } else {
        let mut pairs = Vec::new();
        for dir in gt_sequence_dirs(&args.gt)? {
            let name = seq_name(&dir);
            let results = args.results.join(format!("{name}.txt"));
            if !results.is_file() {
                return Err(Error::Config(format!(
                    "no results for sequence {name}: expected {}",
                    results.display()
                )));
            }
            pairs.push((name, dir.join("gt").join("gt.txt"), results));
        }
        pairs
    };

    let mut total = EvalCounts::default();
    println!(
        "{:<20} {:>8} {:>8} {:>6} {:>6} {:>6} {:>8} {:>8}",
        "sequence", "MOTA", "IDF1", "IDSW", "FP", "FN", "GT", "mIoU"
    );
    for (name, gt_path, res_path) in &pairs {
        let gt = read_mot_file(gt_path)?;
        let pred = read_mot_file(res_path)?;
        let counts = evaluate(&gt, &pred)?;
        println!(
            "{:<20} {:>8.4} {:>8.4} {:>6} {:>6} {:>6} {:>8} {:>8.4}",
            name,
            counts.mota(),
            counts.idf1(),
            counts.id_switches,
            counts.false_positives,
            counts.false_negatives,
            counts.gt_total,
            counts.mean_matched_iou()
        );
        total.merge(&counts);
    }
    if pairs.len() > 1 {
        println!(
            "{:<20} {:>8.4} {:>8.4} {:>6} {:>6} {:>6} {:>8} {:>8.4}",
            "TOTAL",
            total.mota(),
            total.idf1(),
            total.id_switches,
            total.false_positives,
            total.false_negatives,
            total.gt_total,
            total.mean_matched_iou()
        );
    }
    println!();
    println!("mota={:.6}", total.mota());
    println!("idf1={:.6}", total.idf1());
    println!("id_switches={}", total.id_switches);
    println!("false_positives={}", total.false_positives);
    println!("false_negatives={}", total.false_negatives);
    println!("gt_total={}", total.gt_total);
    println!("matched_iou={:.6}", total.mean_matched_iou());
    Ok(())
}

// --------------------------------------------------------------- synth --

fn cmd_synth(args: SynthArgs, seed: Option<u64>) -> Result<()> {
    let mut scenario = read_scenario(&args.scenario)?;
    if let Some(s) = seed {
        scenario.seed = s;
    }
    let seq = generate(&scenario)?;
    let dir = args.out_dir.join(&scenario.name);
    write_sequence(&dir, &seq)?;
    println!(
        "wrote sequence {} ({} frames, {} objects, {} detections) to {}",
        scenario.name,
        scenario.num_frames,
        scenario.objects.len(),
        seq.detections.len(),
        dir.display()
    );
    Ok(())
}

// ------------------------------------------------------- inspect-model --

fn cmd_inspect_model(args: InspectModelArgs) -> Result<()> {
    let info = inspect_model(&args.model)?;
    let h = &info.hyper;
    println!("file: {}", args.model.display());
    println!(
        "architecture: d_model={} n_heads={} n_layers={} history_len={} m_max={}",
        h.d_model, h.n_heads, h.n_layers, h.history_len, h.m_max
    );
    println!("feature layout: {}", info.feature_layout);
    println!("tensors: {} ({} parameters)", info.tensors.len(), info.param_count());
    for (name, rows, cols) in &info.tensors {
        println!("  {name:<28} {rows}x{cols}");
    }
    Ok(())
}
