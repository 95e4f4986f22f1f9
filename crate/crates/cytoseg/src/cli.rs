//! Batch front end: `segment` runs the pipeline on an image or focus stack,
//! `evaluate` scores predicted cells against ground truth, `phantom` emits a
//! synthetic specimen with its ground truth.
//!
//! Mask-directory layout (shared by all three): `clumps.png` and
//! `nuclei.png` as 16-bit label maps, `cells/cell_0001.png` .. as 8-bit
//! binary masks numbered contiguously, and `provenance.txt` holding the
//! config snapshot, which can be fed back via --config to reproduce a run.
//! Directories are written to a temp sibling and renamed into place, so a
//! failed run never leaves a partial output.
//!
//! Exit codes: 0 success, 2 input or layout error, 3 config or spec error.

use crate::error::{Error, Result};
use crate::io::{
    load_grayscale, load_mask, save_grayscale, save_labels, save_mask,
};
use crate::metrics;
use crate::morphology::{boundary, connected_components};
use crate::phantom::{generate_phantom, PhantomSpec};
use crate::pipeline::{edf_fuse, run_pipeline, PipelineConfig, SegmentationResult};
use crate::raster::{GrayImage, LabelMap, Mask};
use clap::{ArgGroup, Args, Parser, Subcommand};
use std::fs;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(
    name = "cytoseg",
    version,
    about = "Unsupervised segmentation of overlapping cell cytoplasm"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Segment an image (or focus stack) into clumps, nuclei, and cells
    Segment(SegmentArgs),
    /// Score predicted cell masks against ground-truth cell masks
    Evaluate(EvaluateArgs),
    /// Generate a synthetic specimen plus its ground-truth masks
    Phantom(PhantomArgs),
}

#[derive(Args)]
#[command(group(ArgGroup::new("source").required(true).args(["input", "stack"])))]
struct SegmentArgs {
    /// Input grayscale image (PNG or PGM)
    #[arg(long)]
    input: Option<PathBuf>,
    /// Directory of same-sized focal-plane images, fused before segmenting
    #[arg(long)]
    stack: Option<PathBuf>,
    /// Config file overriding defaults (key = value lines, # comments)
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output mask directory
    #[arg(long)]
    out: PathBuf,
    /// Also write overlay.png with cell and nucleus boundaries burned in
    #[arg(long)]
    overlay: bool,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Mask directory holding predicted cells
    #[arg(long)]
    pred: PathBuf,
    /// Mask directory holding ground-truth cells
    #[arg(long)]
    gt: PathBuf,
    /// Where to write the metric report
    #[arg(long)]
    report: PathBuf,
}

#[derive(Args)]
struct PhantomArgs {
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 3)]
    cells: usize,
    /// 0 = disjoint cells, 1 = tightly stacked
    #[arg(long, default_value_t = 0.3)]
    overlap: f64,
    /// Output directory (image.png plus ground-truth mask directory)
    #[arg(long)]
    out: PathBuf,
}

/// Parses CLI arguments from the process environment, dispatches, and
/// returns the exit code, with one-line diagnostics on stderr.
pub fn run() -> i32 {
    let cli = Cli::parse();
    let outcome = match cli.cmd {
        Command::Segment(args) => cmd_segment(&args),
        Command::Evaluate(args) => cmd_evaluate(&args),
        Command::Phantom(args) => cmd_phantom(&args),
    };
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config { .. }
        | Error::InvalidParam(_)
        | Error::UnstableTimeStep(_)
        | Error::PhantomPlacement(_) => 3,
        _ => 2,
    }
}

const CONFIG_KEYS: [&str; 19] = [
    "median_kernel",
    "ahe_tiles",
    "ahe_clip",
    "hmax_h",
    "min_clump_area",
    "nucleus_prior",
    "min_nucleus_area",
    "init_disc_margin",
    "drlse_mu",
    "drlse_dt",
    "drlse_lambda",
    "drlse_balloon",
    "drlse_epsilon",
    "drlse_c0",
    "drlse_sigma",
    "drlse_max_iters",
    "drlse_check_every",
    "drlse_converge_frac",
    "edf_window",
];

/// Parses `key = value` lines over the defaults. `#` starts a comment,
/// blank lines are skipped, unknown keys and bad values are rejected with
/// their line number. The result is validated as a whole.
pub fn parse_config(text: &str) -> Result<PipelineConfig> {
    let mut cfg = PipelineConfig::default();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(Error::Config {
                line,
                reason: "expected `key = value`".into(),
            });
        };
        let (key, value) = (key.trim(), value.trim());
        set_key(&mut cfg, key, value).map_err(|reason| Error::Config { line, reason })?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn set_key(cfg: &mut PipelineConfig, key: &str, value: &str) -> std::result::Result<(), String> {
    fn num<T: std::str::FromStr>(key: &str, value: &str) -> std::result::Result<T, String> {
        value
            .parse::<T>()
            .map_err(|_| format!("cannot parse `{value}` as a value for {key}"))
    }
    match key {
        "median_kernel" => cfg.median_kernel = num(key, value)?,
        "ahe_tiles" => cfg.ahe_tiles = num(key, value)?,
        "ahe_clip" => cfg.ahe_clip = num(key, value)?,
        "hmax_h" => cfg.hmax_h = num(key, value)?,
        "min_clump_area" => cfg.min_clump_area = num(key, value)?,
        "nucleus_prior" => cfg.nucleus_prior = num(key, value)?,
        "min_nucleus_area" => cfg.min_nucleus_area = num(key, value)?,
        "init_disc_margin" => cfg.init_disc_margin = num(key, value)?,
        "drlse_mu" => cfg.drlse.mu = num(key, value)?,
        "drlse_dt" => cfg.drlse.dt = num(key, value)?,
        "drlse_lambda" => cfg.drlse.lambda = num(key, value)?,
        "drlse_balloon" => cfg.drlse.balloon = num(key, value)?,
        "drlse_epsilon" => cfg.drlse.epsilon = num(key, value)?,
        "drlse_c0" => cfg.drlse.c0 = num(key, value)?,
        "drlse_sigma" => cfg.drlse.sigma = num(key, value)?,
        "drlse_max_iters" => cfg.drlse.max_iters = num(key, value)?,
        "drlse_check_every" => cfg.drlse.check_every = num(key, value)?,
        "drlse_converge_frac" => cfg.drlse.converge_frac = num(key, value)?,
        "edf_window" => cfg.edf_window = num(key, value)?,
        _ => return Err(format!("unknown key `{key}`")),
    }
    Ok(())
}

/// Writes every key in a fixed order; output parses back to an equal config.
pub fn serialize_config(cfg: &PipelineConfig) -> String {
    let mut s = String::new();
    for key in CONFIG_KEYS {
        let value = match key {
            "median_kernel" => cfg.median_kernel.to_string(),
            "ahe_tiles" => cfg.ahe_tiles.to_string(),
            "ahe_clip" => cfg.ahe_clip.to_string(),
            "hmax_h" => cfg.hmax_h.to_string(),
            "min_clump_area" => cfg.min_clump_area.to_string(),
            "nucleus_prior" => cfg.nucleus_prior.to_string(),
            "min_nucleus_area" => cfg.min_nucleus_area.to_string(),
            "init_disc_margin" => cfg.init_disc_margin.to_string(),
            "drlse_mu" => cfg.drlse.mu.to_string(),
            "drlse_dt" => cfg.drlse.dt.to_string(),
            "drlse_lambda" => cfg.drlse.lambda.to_string(),
            "drlse_balloon" => cfg.drlse.balloon.to_string(),
            "drlse_epsilon" => cfg.drlse.epsilon.to_string(),
            "drlse_c0" => cfg.drlse.c0.to_string(),
            "drlse_sigma" => cfg.drlse.sigma.to_string(),
            "drlse_max_iters" => cfg.drlse.max_iters.to_string(),
            "drlse_check_every" => cfg.drlse.check_every.to_string(),
            "drlse_converge_frac" => cfg.drlse.converge_frac.to_string(),
            "edf_window" => cfg.edf_window.to_string(),
            _ => unreachable!(),
        };
        s.push_str(key);
        s.push_str(" = ");
        s.push_str(&value);
        s.push('\n');
    }
    s
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// All files of one output directory, staged before the atomic rename.
struct MaskDirContents<'a> {
    clumps: &'a LabelMap,
    nuclei: &'a LabelMap,
    cells: &'a [Mask],
    provenance: String,
    /// (file name, image) extras such as overlay.png or image.png
    images: Vec<(String, &'a GrayImage)>,
}

fn write_mask_directory(out: &Path, contents: &MaskDirContents) -> Result<()> {
    let parent = match out.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&parent).map_err(|e| io_err(&parent, e))?;
    let tmp = tempfile::Builder::new()
        .prefix(".cytoseg-staging-")
        .tempdir_in(&parent)
        .map_err(|e| io_err(&parent, e))?;
    let root = tmp.path();

    save_labels(contents.clumps, &root.join("clumps.png"))?;
    save_labels(contents.nuclei, &root.join("nuclei.png"))?;
    let cells_dir = root.join("cells");
    fs::create_dir(&cells_dir).map_err(|e| io_err(&cells_dir, e))?;
    for (i, cell) in contents.cells.iter().enumerate() {
        save_mask(cell, &cells_dir.join(format!("cell_{:04}.png", i + 1)))?;
    }
    let prov_path = root.join("provenance.txt");
    fs::write(&prov_path, &contents.provenance).map_err(|e| io_err(&prov_path, e))?;
    for (name, img) in &contents.images {
        save_grayscale(img, &root.join(name))?;
    }

    if out.exists() {
        fs::remove_dir_all(out).map_err(|e| io_err(out, e))?;
    }
    let staged = tmp.keep();
    fs::rename(&staged, out).map_err(|e| io_err(out, e))?;
    Ok(())
}

/// Reads `cells/cell_0001.png` .. from a mask directory, enforcing the
/// contiguous numbering and uniform dimensions of the layout.
pub fn read_cell_masks(dir: &Path) -> Result<Vec<Mask>> {
    let cells_dir = dir.join("cells");
    if !cells_dir.is_dir() {
        return Err(Error::Layout(format!(
            "{}: missing cells/ directory",
            dir.display()
        )));
    }
    let mut names: Vec<String> = Vec::new();
    let entries = fs::read_dir(&cells_dir).map_err(|e| io_err(&cells_dir, e))?;
    for entry in entries {
        let entry = entry.map_err(|e| io_err(&cells_dir, e))?;
        names.push(entry.file_name().to_string_lossy().into_owned());
    }
    let mut cells = Vec::new();
    loop {
        let name = format!("cell_{:04}.png", cells.len() + 1);
        let path = cells_dir.join(&name);
        if !path.is_file() {
            break;
        }
        cells.push(load_mask(&path)?);
    }
    for name in &names {
        if name.starts_with("cell_") && !cell_index_in_range(name, cells.len()) {
            return Err(Error::Layout(format!(
                "{}: {} breaks the contiguous cell_0001.. numbering",
                cells_dir.display(),
                name
            )));
        }
    }
    if let Some(first) = cells.first() {
        for (i, c) in cells.iter().enumerate() {
            if !c.same_dims(first) {
                return Err(Error::Layout(format!(
                    "{}: cell_{:04}.png dimensions differ from cell_0001.png",
                    cells_dir.display(),
                    i + 1
                )));
            }
        }
    }
    Ok(cells)
}

fn cell_index_in_range(name: &str, count: usize) -> bool {
    let Some(stem) = name.strip_prefix("cell_").and_then(|s| s.strip_suffix(".png")) else {
        return false;
    };
    match stem.parse::<usize>() {
        Ok(i) => i >= 1 && i <= count && stem.len() == 4,
        Err(_) => false,
    }
}

fn load_stack(dir: &Path) -> Result<Vec<GrayImage>> {
    let entries = fs::read_dir(dir).map_err(|e| io_err(dir, e))?;
    let mut files: Vec<PathBuf> = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| io_err(dir, e))?;
        let path = entry.path();
        let hidden = path
            .file_name()
            .is_none_or(|n| n.to_string_lossy().starts_with('.'));
        if path.is_file() && !hidden {
            files.push(path);
        }
    }
    files.sort();
    if files.is_empty() {
        return Err(Error::Layout(format!(
            "{}: focus-stack directory holds no files",
            dir.display()
        )));
    }
    files.iter().map(|p| load_grayscale(p)).collect()
}

fn burn_overlay(base: &GrayImage, result: &SegmentationResult) -> GrayImage {
    let mut overlay = base.clone();
    for cell in &result.cells {
        for (px, &on) in overlay.data.iter_mut().zip(&boundary(cell).data) {
            if on {
                *px = overlay.l_max;
            }
        }
    }
    for label in 1..=result.nuclei.n_labels {
        let nb = boundary(&result.nuclei.mask_of(label));
        for (px, &on) in overlay.data.iter_mut().zip(&nb.data) {
            if on {
                *px = 0;
            }
        }
    }
    overlay
}

fn cmd_segment(args: &SegmentArgs) -> Result<()> {
    let cfg = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
            parse_config(&text)?
        }
        None => PipelineConfig::default(),
    };
    let stack: Vec<GrayImage> = match (&args.input, &args.stack) {
        (Some(path), None) => vec![load_grayscale(path)?],
        (None, Some(dir)) => load_stack(dir)?,
        _ => unreachable!("clap enforces exactly one source"),
    };
    let result = run_pipeline(&stack, &cfg)?;

    let overlay = if args.overlay {
        let fused = if stack.len() == 1 {
            stack[0].clone()
        } else {
            edf_fuse(&stack, cfg.edf_window)?
        };
        Some(burn_overlay(&fused, &result))
    } else {
        None
    };
    let mut images: Vec<(String, &GrayImage)> = Vec::new();
    if let Some(ov) = &overlay {
        images.push(("overlay.png".into(), ov));
    }
    write_mask_directory(
        &args.out,
        &MaskDirContents {
            clumps: &result.clumps,
            nuclei: &result.nuclei,
            cells: &result.cells,
            provenance: serialize_config(&cfg),
            images,
        },
    )
}

fn cmd_evaluate(args: &EvaluateArgs) -> Result<()> {
    let pred = read_cell_masks(&args.pred)?;
    let gt = read_cell_masks(&args.gt)?;
    let report = metrics::evaluate(&pred, &gt)?;
    let text = report.to_text();
    if let Some(parent) = args.report.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
        }
    }
    fs::write(&args.report, &text).map_err(|e| io_err(&args.report, e))?;
    println!("dc_mean={:.4}", report.dc_mean);
    Ok(())
}

fn cmd_phantom(args: &PhantomArgs) -> Result<()> {
    let spec = PhantomSpec {
        n_cells: args.cells,
        overlap_level: args.overlap,
        seed: args.seed,
        ..PhantomSpec::default()
    };
    let (image, cells, nuclei) = generate_phantom(&spec)?;
    let (w, h) = (image.width, image.height);

    let mut union = Mask::new(w, h);
    for c in &cells {
        union.union_with(c);
    }
    let clumps = connected_components(&union, 8)?;
    let mut nuclei_map = LabelMap::new(w, h);
    for (i, nm) in nuclei.iter().enumerate() {
        for (g, &on) in nuclei_map.data.iter_mut().zip(&nm.data) {
            if on {
                *g = (i + 1) as u32;
            }
        }
    }
    nuclei_map.n_labels = nuclei.len() as u32;

    let mut provenance = format!(
        "# phantom seed = {}\n# phantom cells = {}\n# phantom overlap = {}\n",
        spec.seed, spec.n_cells, spec.overlap_level
    );
    provenance.push_str(&serialize_config(&PipelineConfig::default()));

    write_mask_directory(
        &args.out,
        &MaskDirContents {
            clumps: &clumps,
            nuclei: &nuclei_map,
            cells: &cells,
            provenance,
            images: vec![("image.png".into(), &image)],
        },
    )
}
