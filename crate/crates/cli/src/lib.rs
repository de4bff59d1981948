//! Command implementations behind the `sca` binary.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use sca_core::eval::{self, BaseImage, NamedDetector, WorkItem};
use sca_core::io::{self as cio, ManifestRow};
use sca_core::synth::{self, SynthFixture};
use sca_core::transforms::{self, enumerate_specs, Family};
use sca_core::{detect_with_id, DetectorParams, EvalReport, GrayImage, Mode};

/// Corpus indices used by `--smoke`: one polygon, one star, one blob.
pub const SMOKE_FIXTURES: [usize; 3] = [0, 11, 19];

/// A fatal problem with the inputs; the binary exits with code 2.
#[derive(Debug)]
pub struct InputError(pub String);

impl std::fmt::Display for InputError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for InputError {}

fn input_error(msg: impl Into<String>) -> anyhow::Error {
    InputError(msg.into()).into()
}

/// How a command finished when it did not fail outright.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Success,
    /// Some items failed; details are in the diagnostics file.
    Partial,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// Settings from the config file. Every field is optional; `[sca]` and `[cpda]` override
/// individual fields of the corresponding default parameters.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ConfigFile {
    seed: Option<u64>,
    match_radius: Option<f64>,
    detectors: Option<Vec<Mode>>,
    out: Option<PathBuf>,
    formats: Option<Vec<Format>>,
    dataset: Option<PathBuf>,
    manifest: Option<PathBuf>,
    sca: Option<toml::Table>,
    cpda: Option<toml::Table>,
}

/// Resolved configuration: file values with command-line overrides applied.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub match_radius: f64,
    pub detectors: Vec<Mode>,
    pub sca: DetectorParams,
    pub cpda: DetectorParams,
    pub out: Option<PathBuf>,
    pub formats: Vec<Format>,
    pub dataset: Option<PathBuf>,
    pub manifest: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            match_radius: eval::MATCH_RADIUS,
            detectors: vec![Mode::Sca, Mode::Cpda],
            sca: DetectorParams::sca(),
            cpda: DetectorParams::cpda(),
            out: None,
            formats: vec![Format::Csv, Format::Json],
            dataset: None,
            manifest: None,
        }
    }
}

fn overlay(base: DetectorParams, patch: Option<toml::Table>, mode: Mode) -> Result<DetectorParams> {
    let Some(patch) = patch else {
        return Ok(base);
    };
    let mut table = toml::Table::try_from(&base)?;
    table.extend(patch);
    let mut params: DetectorParams = table.try_into()?;
    params.mode = mode;
    Ok(params)
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let file: ConfigFile = toml::from_str(text)?;
        let d = Self::default();
        Ok(Self {
            seed: file.seed.unwrap_or(d.seed),
            match_radius: file.match_radius.unwrap_or(d.match_radius),
            detectors: file.detectors.unwrap_or(d.detectors),
            sca: overlay(d.sca, file.sca, Mode::Sca)?,
            cpda: overlay(d.cpda, file.cpda, Mode::Cpda)?,
            out: file.out,
            formats: file.formats.unwrap_or(d.formats),
            dataset: file.dataset,
            manifest: file.manifest,
        })
    }

    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = fs::read_to_string(p)
                    .map_err(|e| input_error(format!("cannot read config {}: {e}", p.display())))?;
                Self::from_toml(&text)
                    .map_err(|e| input_error(format!("invalid config {}: {e:#}", p.display())))
            }
        }
    }

    pub fn params(&self, mode: Mode) -> &DetectorParams {
        match mode {
            Mode::Sca => &self.sca,
            Mode::Cpda => &self.cpda,
        }
    }

    pub fn named_detectors(&self) -> Vec<NamedDetector> {
        self.detectors
            .iter()
            .map(|&m| NamedDetector::new(m.name(), self.params(m).clone()))
            .collect()
    }

    fn validate(&self) -> Result<()> {
        if self.detectors.is_empty() {
            return Err(input_error("no detector selected"));
        }
        for &m in &self.detectors {
            self.params(m)
                .validate()
                .map_err(|e| input_error(format!("{}: {e}", m.name())))?;
        }
        if !(self.match_radius > 0.0) {
            return Err(input_error("match radius must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "sca",
    version,
    about = "Contour corner detection and repeatability benchmark"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Detector(s) to run; repeat or separate with commas.
    #[arg(long, value_delimiter = ',', global = true)]
    pub detector: Vec<Mode>,
    /// Chord length(s) for the selected detectors.
    #[arg(long, value_delimiter = ',', global = true)]
    pub chord: Vec<usize>,
    #[arg(long, global = true)]
    pub curvature_threshold: Option<f64>,
    /// Degrees.
    #[arg(long, global = true)]
    pub angle_threshold: Option<f64>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output file (detect, sweep) or directory (synth, transform, evaluate).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, global = true)]
    pub format: Option<Format>,
}

impl CommonArgs {
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::load(self.config.as_deref())?;
        if !self.detector.is_empty() {
            cfg.detectors = self.detector.clone();
        }
        for m in cfg.detectors.clone() {
            let p = match m {
                Mode::Sca => &mut cfg.sca,
                Mode::Cpda => &mut cfg.cpda,
            };
            if !self.chord.is_empty() {
                p.chord_lengths = self.chord.clone();
            }
            if let Some(t) = self.curvature_threshold {
                p.curvature_threshold = t;
            }
            if let Some(a) = self.angle_threshold {
                p.angle_threshold = a;
            }
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(o) = &self.out {
            cfg.out = Some(o.clone());
        }
        if let Some(f) = self.format {
            cfg.formats = vec![f];
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Detect corners in one image and write them as CSV or JSON.
    Detect(DetectArgs),
    /// Write the synthetic corpus as graymaps plus a ground-truth corner CSV.
    Synth(SynthArgs),
    /// Materialize transformed copies of a directory of base images, with a manifest.
    Transform(TransformArgs),
    /// Evaluate repeatability and localization error over a manifest or the synthetic corpus.
    Evaluate(EvaluateArgs),
    /// Grid-evaluate the single-chord detector over chord, curvature and angle thresholds.
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    pub image: PathBuf,
    /// Write a copy of the input with a cross at every corner.
    #[arg(long)]
    pub overlay: Option<PathBuf>,
    /// Image id written to the CSV; defaults to the file stem.
    #[arg(long)]
    pub id: Option<String>,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct TransformArgs {
    /// Directory of base images; falls back to `dataset` in the config.
    pub dataset: Option<PathBuf>,
    /// Families to generate; all benchmark families when omitted.
    #[arg(long, value_delimiter = ',')]
    pub family: Vec<Family>,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SourceArgs {
    /// Dataset manifest; falls back to `manifest` in the config.
    #[arg(long, conflicts_with = "synth")]
    pub manifest: Option<PathBuf>,
    /// Generate the synthetic corpus and its transforms in memory.
    #[arg(long)]
    pub synth: bool,
    /// Three images and one spec per family.
    #[arg(long)]
    pub smoke: bool,
    /// Restrict to these families.
    #[arg(long, value_delimiter = ',')]
    pub family: Vec<Family>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Chord lengths: a list `7,15,31` or a range `start:end[:step]`.
    #[arg(long)]
    pub chords: Option<String>,
    /// Curvature thresholds: a list or a range `start:end:step`.
    #[arg(long)]
    pub thresholds: Option<String>,
    /// Angle thresholds in degrees: a list or a range `start:end:step`.
    #[arg(long)]
    pub angles: Option<String>,
    #[command(flatten)]
    pub source: SourceArgs,
    #[command(flatten)]
    pub common: CommonArgs,
}

pub fn run(cli: Cli) -> Result<Outcome> {
    match cli.command {
        Command::Detect(a) => cmd_detect(&a),
        Command::Synth(a) => cmd_synth(&a),
        Command::Transform(a) => cmd_transform(&a),
        Command::Evaluate(a) => cmd_evaluate(&a),
        Command::Sweep(a) => cmd_sweep(&a),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn out_dir(cfg: &RunConfig, default: &str) -> Result<PathBuf> {
    let dir = cfg.out.clone().unwrap_or_else(|| PathBuf::from(default));
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

fn write_diagnostics(path: &Path, failures: &[String]) -> Result<Outcome> {
    if failures.is_empty() {
        return Ok(Outcome::Success);
    }
    let mut w = create(path)?;
    for f in failures {
        writeln!(w, "{f}")?;
    }
    w.flush()?;
    eprintln!("{} item(s) failed; see {}", failures.len(), path.display());
    Ok(Outcome::Partial)
}

fn load_image(path: &Path) -> Result<GrayImage<f64>> {
    cio::read_image(path)
        .map_err(|e| input_error(format!("cannot read image {}: {e}", path.display())))
}

/// Marks every point with a 7-pixel cross drawn in the contrasting extreme.
pub fn draw_crosses(img: &GrayImage<f64>, points: &[(f64, f64)]) -> GrayImage<f64> {
    let mut out = img.clone();
    let (w, h) = img.dimensions();
    for &(x, y) in points {
        let (cx, cy) = (x.round() as i64, y.round() as i64);
        for d in -3i64..=3 {
            for (px, py) in [(cx + d, cy), (cx, cy + d)] {
                if px >= 0 && py >= 0 && (px as usize) < w && (py as usize) < h {
                    let (px, py) = (px as usize, py as usize);
                    let v = if img.get(px, py) < 0.5 { 1.0 } else { 0.0 };
                    out.set(px, py, v);
                }
            }
        }
    }
    out
}

pub fn cmd_detect(args: &DetectArgs) -> Result<Outcome> {
    let mut common = args.common.clone();
    if common.detector.is_empty() {
        common.detector = vec![Mode::Sca];
    }
    let cfg = common.resolve()?;
    let img = load_image(&args.image)?;
    let id = args.id.clone().unwrap_or_else(|| {
        args.image
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default()
    });
    let mut rows = Vec::new();
    for &m in &cfg.detectors {
        let det = detect_with_id(&img, cfg.params(m), &id)?;
        rows.extend(cio::corner_rows(&det.corners, m.name()));
    }
    let format = common.format.unwrap_or(Format::Csv);
    let mut sink: Box<dyn Write> = match &cfg.out {
        Some(p) => Box::new(create(p)?),
        None => Box::new(std::io::stdout().lock()),
    };
    match format {
        Format::Csv => cio::write_corner_csv(&rows, &mut sink)?,
        Format::Json => {
            serde_json::to_writer_pretty(&mut sink, &rows)?;
            writeln!(sink)?;
        }
    }
    sink.flush()?;
    if let Some(path) = &args.overlay {
        let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.x, r.y)).collect();
        let marked = draw_crosses(&img, &pts);
        cio::write_pgm(&marked, path).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(Outcome::Success)
}

pub fn cmd_synth(args: &SynthArgs) -> Result<Outcome> {
    let cfg = args.common.resolve()?;
    let dir = out_dir(&cfg, "synth")?;
    let fixtures = synth::corpus::<f64>(cfg.seed);
    let mut rows = Vec::new();
    for fx in &fixtures {
        cio::write_pgm(&fx.image, dir.join(format!("{}.pgm", fx.id)))?;
        rows.extend(cio::ground_truth_rows(fx));
    }
    cio::write_corner_csv(&rows, create(&dir.join("ground_truth.csv"))?)?;
    let params: Vec<FixtureInfo> = fixtures.iter().map(FixtureInfo::from).collect();
    let mut w = create(&dir.join("fixtures.json"))?;
    serde_json::to_writer_pretty(&mut w, &params)?;
    writeln!(w)?;
    w.flush()?;
    Ok(Outcome::Success)
}

#[derive(Serialize)]
struct FixtureInfo {
    id: String,
    shape_kind: synth::ShapeKind,
    params: synth::ShapeParams,
    corners: usize,
}

impl From<&SynthFixture<f64>> for FixtureInfo {
    fn from(fx: &SynthFixture<f64>) -> Self {
        Self {
            id: fx.id.clone(),
            shape_kind: fx.shape_kind,
            params: fx.params.clone(),
            corners: fx.true_corners.len(),
        }
    }
}

fn is_raster(p: &Path) -> bool {
    matches!(
        p.extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase)
            .as_deref(),
        Some("pgm" | "pnm" | "png" | "bmp" | "tif" | "tiff")
    )
}

fn families_or_all(f: &[Family]) -> Vec<Family> {
    if f.is_empty() {
        Family::BENCHMARK.to_vec()
    } else {
        f.to_vec()
    }
}

pub fn cmd_transform(args: &TransformArgs) -> Result<Outcome> {
    let cfg = args.common.resolve()?;
    let src = args
        .dataset
        .clone()
        .or(cfg.dataset.clone())
        .ok_or_else(|| input_error("no dataset directory given"))?;
    let entries = fs::read_dir(&src).map_err(|e| {
        input_error(format!(
            "cannot read dataset directory {}: {e}",
            src.display()
        ))
    })?;
    let mut bases: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && is_raster(p))
        .collect();
    bases.sort();
    if bases.is_empty() {
        return Err(input_error(format!("no images in {}", src.display())));
    }
    let dir = out_dir(&cfg, "dataset")?;
    let specs: Vec<_> = families_or_all(&args.family)
        .into_iter()
        .flat_map(enumerate_specs)
        .map(|s| s.with_seed(cfg.seed))
        .collect();

    let results: Vec<(Vec<ManifestRow>, Vec<String>)> = bases
        .par_iter()
        .map(|base| {
            let id = base
                .file_stem()
                .unwrap_or_default()
                .to_string_lossy()
                .into_owned();
            let base_str = fs::canonicalize(base)
                .unwrap_or(base.clone())
                .to_string_lossy()
                .into_owned();
            let img: GrayImage<f64> = match cio::read_image(base) {
                Ok(i) => i,
                Err(e) => return (Vec::new(), vec![format!("{}: {e}", base.display())]),
            };
            let mut rows = Vec::new();
            let mut failures = Vec::new();
            if let Err(e) = fs::create_dir_all(dir.join(&id)) {
                return (rows, vec![format!("{id}: {e}")]);
            }
            for spec in &specs {
                let rel = format!("{id}/{}.pgm", spec.label());
                let res = transforms::apply(&img, spec, &id)
                    .and_then(|t| cio::write_pgm(&t, dir.join(&rel)));
                match res {
                    Ok(()) => rows.push(ManifestRow::new(&id, spec, &base_str, &rel)),
                    Err(e) => failures.push(format!("{id} {}: {e}", spec.label())),
                }
            }
            (rows, failures)
        })
        .collect();
    let (rows, failures): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    let rows: Vec<ManifestRow> = rows.into_iter().flatten().collect();
    let failures: Vec<String> = failures.into_iter().flatten().collect();
    cio::write_manifest(&rows, create(&dir.join("manifest.csv"))?)?;
    write_diagnostics(&dir.join("diagnostics.txt"), &failures)
}

fn resolve_path(root: &Path, p: &str) -> PathBuf {
    let p = Path::new(p);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        root.join(p)
    }
}

/// Items and base images to evaluate, plus failures found while loading.
struct Workload {
    bases: Vec<BaseImage<f64>>,
    items: Vec<WorkItem>,
    /// Transformed image path per item; `None` means generate in memory.
    paths: Vec<Option<PathBuf>>,
    failures: Vec<String>,
}

fn smoke_filter(items: &mut Vec<WorkItem>, paths: &mut Vec<Option<PathBuf>>) {
    let mut keep_ids: Vec<String> = Vec::new();
    for it in items.iter() {
        if !keep_ids.contains(&it.image_id) && keep_ids.len() < 3 {
            keep_ids.push(it.image_id.clone());
        }
    }
    let mut labels: Vec<(Family, Vec<String>)> = Vec::new();
    for it in items.iter() {
        let l = it.spec.label();
        match labels.iter_mut().find(|(f, _)| *f == it.spec.family) {
            Some((_, v)) => {
                if !v.contains(&l) {
                    v.push(l)
                }
            }
            None => labels.push((it.spec.family, vec![l])),
        }
    }
    let chosen: Vec<String> = labels
        .iter()
        .map(|(f, v)| {
            let preferred: Vec<String> = eval::smoke_specs()
                .iter()
                .filter(|s| s.family == *f)
                .map(|s| s.label())
                .collect();
            v.iter()
                .find(|l| preferred.contains(l))
                .unwrap_or(&v[v.len() / 2])
                .clone()
        })
        .collect();
    let keep: Vec<bool> = items
        .iter()
        .map(|it| keep_ids.contains(&it.image_id) && chosen.contains(&it.spec.label()))
        .collect();
    let mut k = keep.iter();
    items.retain(|_| *k.next().unwrap());
    let mut k = keep.iter();
    paths.retain(|_| *k.next().unwrap());
}

fn load_workload(src: &SourceArgs, cfg: &RunConfig) -> Result<Workload> {
    let families = families_or_all(&src.family);
    if src.synth {
        let fixtures = synth::corpus::<f64>(cfg.seed);
        let fixtures: Vec<SynthFixture<f64>> = if src.smoke {
            SMOKE_FIXTURES
                .iter()
                .map(|&i| fixtures[i].clone())
                .collect()
        } else {
            fixtures
        };
        let bases: Vec<BaseImage<f64>> = fixtures
            .into_iter()
            .map(|f| BaseImage {
                id: f.id,
                image: f.image,
            })
            .collect();
        let specs: Vec<_> = if src.smoke {
            eval::smoke_specs()
                .into_iter()
                .filter(|s| families.contains(&s.family))
                .collect()
        } else {
            families.iter().flat_map(|&f| enumerate_specs(f)).collect()
        };
        let items = eval::work_items(&bases, &specs);
        let paths = vec![None; items.len()];
        return Ok(Workload {
            bases,
            items,
            paths,
            failures: Vec::new(),
        });
    }
    let manifest = src
        .manifest
        .clone()
        .or(cfg.manifest.clone())
        .ok_or_else(|| input_error("give --manifest or --synth"))?;
    let file = File::open(&manifest)
        .map_err(|e| input_error(format!("cannot read manifest {}: {e}", manifest.display())))?;
    let rows = cio::read_manifest(file)
        .map_err(|e| input_error(format!("invalid manifest {}: {e}", manifest.display())))?;
    let root = manifest.parent().unwrap_or(Path::new("")).to_path_buf();
    let mut items = Vec::new();
    let mut paths = Vec::new();
    let mut failures = Vec::new();
    let mut base_paths: Vec<(String, PathBuf)> = Vec::new();
    for (n, r) in rows.iter().enumerate() {
        // A manifest lists what was generated; only an explicit --family narrows it.
        if !src.family.is_empty() && !src.family.contains(&r.family) {
            continue;
        }
        match r.spec() {
            Ok(spec) => {
                items.push(WorkItem {
                    image_id: r.image_id.clone(),
                    spec,
                });
                paths.push(Some(resolve_path(&root, &r.output_path)));
                if !base_paths.iter().any(|(id, _)| id == &r.image_id) {
                    base_paths.push((r.image_id.clone(), resolve_path(&root, &r.base_path)));
                }
            }
            Err(e) => failures.push(format!("manifest row {}: {e}", n + 1)),
        }
    }
    if src.smoke {
        smoke_filter(&mut items, &mut paths);
    }
    let mut bases = Vec::new();
    for (id, path) in base_paths {
        if !items.iter().any(|it| it.image_id == id) {
            continue;
        }
        match cio::read_image(&path) {
            Ok(image) => bases.push(BaseImage { id, image }),
            Err(e) => failures.push(format!("{id} base {}: {e}", path.display())),
        }
    }
    Ok(Workload {
        bases,
        items,
        paths,
        failures,
    })
}

fn run_workload(w: &Workload, detectors: &[NamedDetector], cfg: &RunConfig) -> EvalReport {
    eval::run_experiment_with(
        &w.bases,
        detectors,
        &w.items,
        cfg.match_radius,
        |n, base, item| match &w.paths[n] {
            Some(p) => cio::read_image(p),
            None => transforms::apply(&base.image, &item.spec.with_seed(cfg.seed), &base.id),
        },
    )
}

pub fn cmd_evaluate(args: &EvaluateArgs) -> Result<Outcome> {
    let cfg = args.common.resolve()?;
    let work = load_workload(&args.source, &cfg)?;
    let report = run_workload(&work, &cfg.named_detectors(), &cfg);
    let dir = out_dir(&cfg, "report")?;
    if cfg.formats.contains(&Format::Csv) {
        eval::write_report_csv(&report, create(&dir.join("report.csv"))?)?;
        eval::write_plot_csv(&report, create(&dir.join("plot.csv"))?)?;
    }
    if cfg.formats.contains(&Format::Json) {
        eval::write_summary_json(&report, create(&dir.join("summary.json"))?)?;
    }
    let mut failures = work.failures;
    failures.extend(report.failures());
    write_diagnostics(&dir.join("diagnostics.txt"), &failures)
}

/// Parses `a,b,c` or `start:end[:step]` (inclusive). A range with `start > end` is empty.
pub fn parse_grid(text: &str, default_step: Option<f64>) -> Result<Vec<f64>> {
    let text = text.trim();
    if text.contains(':') {
        let parts: Vec<f64> = text
            .split(':')
            .map(|p| p.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| input_error(format!("bad range `{text}`: {e}")))?;
        let (start, end, step) = match parts.as_slice() {
            [a, b] => (
                *a,
                *b,
                default_step.ok_or_else(|| input_error(format!("range `{text}` needs a step")))?,
            ),
            [a, b, s] => (*a, *b, *s),
            _ => bail!(InputError(format!("bad range `{text}`"))),
        };
        if !(step > 0.0) {
            bail!(InputError(format!(
                "range step must be positive in `{text}`"
            )));
        }
        let n = ((end - start) / step + 1e-9).floor();
        if n < 0.0 {
            return Ok(Vec::new());
        }
        return Ok((0..=n as usize).map(|i| start + i as f64 * step).collect());
    }
    text.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|e| input_error(format!("bad value `{p}`: {e}")))
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub chord: usize,
    pub curvature_threshold: f64,
    pub angle_threshold: f64,
    pub average_repeatability: Option<f64>,
    pub localization_error: Option<f64>,
    pub corner_count: usize,
    pub corner_count_all: usize,
    pub undefined_items: usize,
    pub failed_items: usize,
}

pub fn cmd_sweep(args: &SweepArgs) -> Result<Outcome> {
    let mut common = args.common.clone();
    common.detector = vec![Mode::Sca];
    let cfg = common.resolve()?;
    let chords: Vec<usize> = match &args.chords {
        Some(t) => parse_grid(t, Some(1.0))?
            .into_iter()
            .map(|v| {
                if v.fract() == 0.0 && v >= 0.0 {
                    Ok(v as usize)
                } else {
                    Err(input_error(format!(
                        "chord length {v} is not a whole number"
                    )))
                }
            })
            .collect::<Result<_>>()?,
        None => cfg.sca.chord_lengths.clone(),
    };
    let thresholds = match &args.thresholds {
        Some(t) => parse_grid(t, None)?,
        None => vec![cfg.sca.curvature_threshold],
    };
    let angles = match &args.angles {
        Some(t) => parse_grid(t, Some(1.0))?,
        None => vec![cfg.sca.angle_threshold],
    };
    if chords.is_empty() || thresholds.is_empty() || angles.is_empty() {
        return Err(input_error("empty parameter grid"));
    }
    let mut detectors = Vec::new();
    for &l in &chords {
        for &t in &thresholds {
            for &a in &angles {
                let params = DetectorParams {
                    chord_lengths: vec![l],
                    curvature_threshold: t,
                    angle_threshold: a,
                    ..cfg.sca.clone()
                };
                params
                    .validate()
                    .map_err(|e| input_error(format!("L={l} T={t} angle={a}: {e}")))?;
                detectors.push(NamedDetector::new(format!("sca_L{l}_t{t}_a{a}"), params));
            }
        }
    }
    let work = load_workload(&args.source, &cfg)?;
    let report = run_workload(&work, &detectors, &cfg);
    let summary = report.summary();
    let rows: Vec<SweepRow> = detectors
        .iter()
        .zip(&summary.detectors)
        .map(|(d, s)| SweepRow {
            chord: d.params.chord_lengths[0],
            curvature_threshold: d.params.curvature_threshold,
            angle_threshold: d.params.angle_threshold,
            average_repeatability: s.average_repeatability,
            localization_error: s.localization_error,
            corner_count: s.corner_count,
            corner_count_all: s.corner_count_all,
            undefined_items: s.undefined_items,
            failed_items: s.failed_items,
        })
        .collect();
    let mut sink: Box<dyn Write> = match &cfg.out {
        Some(p) => Box::new(create(p)?),
        None => Box::new(std::io::stdout().lock()),
    };
    match common.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(&mut sink);
            for r in &rows {
                w.serialize(r)?;
            }
            w.flush()?;
        }
        Format::Json => {
            serde_json::to_writer_pretty(&mut sink, &rows)?;
            writeln!(sink)?;
        }
    }
    sink.flush()?;
    let mut failures = work.failures;
    failures.extend(report.failures());
    let diag = match &cfg.out {
        Some(p) => p.with_extension("diagnostics.txt"),
        None => PathBuf::from("sweep.diagnostics.txt"),
    };
    write_diagnostics(&diag, &failures)
}
