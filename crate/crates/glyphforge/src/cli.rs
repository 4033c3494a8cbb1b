// Copyright 2026 the Glyphforge Authors
// SPDX-License-Identifier: Apache-2.0

//! The `glyphforge` command line.
//!
//! Exit codes: 0 on success, 1 on usage errors, 2 on runtime failures.
//! Every subcommand first prints its effective configuration, with all
//! defaults resolved, as `# key = value` lines.

use std::collections::{BTreeMap, BTreeSet};
use std::ffi::OsString;
use std::fmt::Display;
use std::path::{Path, PathBuf};

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use glyphforge_core::analysis::{
    build_rdm, delta_rdm, match_matrix, matching_accuracy, mean_paired_cosine, residual_query, rsa_permutation,
    spearman_upper, top_k_retrieve, zero_shot_classify, EmbeddingSet, Rdm, Tally,
};
use glyphforge_core::encoder::{encoder_gradcheck, Embedding, Encoder, OrientedEnergyEncoder};
use glyphforge_core::geometry::{Canvas, SketchSpec, VectorSketch};
use glyphforge_core::init::SamplerConfig;
use glyphforge_core::optim::{full_pipeline, OptimizeConfig, UpdateRule};
use glyphforge_core::raster::{gradcheck_errors, render, GradcheckReport, RasterConfig, RasterImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bridge::BridgeClient;
use crate::cache::EmbeddingCache;
use crate::corpus::{filter_records, load_manifest, CorpusRecord, RecordFilter, RecordKind, WritingSystem};
use crate::error::{io_err, Error, Result};
use crate::fsutil::atomic_write;
use crate::imageio::{load_image, save_png};
use crate::svg::write_svg;
use crate::tensor::Tensor;
use crate::BRIDGE_ENV;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EncoderSelector {
    BuiltinSemantic,
    BuiltinPerceptual,
    Bridge(String),
}

impl EncoderSelector {
    pub fn parse(s: &str) -> std::result::Result<Self, String> {
        match s {
            "builtin-semantic" => Ok(EncoderSelector::BuiltinSemantic),
            "builtin-perceptual" => Ok(EncoderSelector::BuiltinPerceptual),
            "bridge" => match std::env::var(BRIDGE_ENV) {
                Ok(addr) if !addr.is_empty() => Ok(EncoderSelector::Bridge(addr)),
                _ => Err(format!(
                    "`bridge` needs an address, either `bridge:<address>` or {BRIDGE_ENV}"
                )),
            },
            _ => match s.strip_prefix("bridge:") {
                Some(addr) if !addr.is_empty() => Ok(EncoderSelector::Bridge(addr.to_string())),
                _ => Err(format!(
                    "unknown encoder `{s}` (expected builtin-semantic, builtin-perceptual, or bridge:<address>)"
                )),
            },
        }
    }

    pub fn open(&self) -> Result<Box<dyn Encoder>> {
        Ok(match self {
            EncoderSelector::BuiltinSemantic => Box::new(OrientedEnergyEncoder::semantic()),
            EncoderSelector::BuiltinPerceptual => Box::new(OrientedEnergyEncoder::perceptual()),
            EncoderSelector::Bridge(addr) => Box::new(BridgeClient::connect(addr)?),
        })
    }
}

impl Display for EncoderSelector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EncoderSelector::BuiltinSemantic => f.write_str("builtin-semantic"),
            EncoderSelector::BuiltinPerceptual => f.write_str("builtin-perceptual"),
            EncoderSelector::Bridge(a) => write!(f, "bridge:{a}"),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "glyphforge",
    version,
    about = "Sketch images with Bezier strokes and analyze sketch embeddings"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Turn an image into a vector sketch.
    Sketch(SketchArgs),
    /// Embed the files of a manifest into an embedding cache.
    Embed(EmbedArgs),
    /// Zero-shot classification of sketch embeddings.
    Classify(ClassifyArgs),
    /// RDMs, their rank correlation, and paired cosine between images and sketches.
    Rsa(RsaArgs),
    /// Match sketches to pictographs and tabulate category accuracy.
    Match(MatchArgs),
    /// Rank signs against residualized category queries.
    Retrieve(RetrieveArgs),
    /// Check rasterizer and encoder gradients against finite differences.
    Gradcheck(GradcheckArgs),
}

#[derive(Debug, Clone, Args)]
pub struct EncoderArg {
    /// builtin-semantic, builtin-perceptual, bridge:<address>, or bridge (address from GLYPHFORGE_BRIDGE).
    #[arg(long, default_value = "builtin-semantic", value_parser = EncoderSelector::parse)]
    pub encoder: EncoderSelector,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Optimizer {
    Adam,
    Sgd,
}

#[derive(Debug, Args)]
pub struct SketchArgs {
    /// PNG or .tensor image.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = 16)]
    pub strokes: usize,
    #[arg(long, default_value_t = 1500)]
    pub iters: usize,
    #[command(flatten)]
    pub encoder: EncoderArg,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 3.0)]
    pub stroke_width: f64,
    #[arg(long, default_value_t = 0.3)]
    pub temperature: f64,
    #[arg(long, default_value_t = 5.0)]
    pub suppression_sigma: f64,
    /// Defaults to 2% of the shorter canvas side.
    #[arg(long)]
    pub border_margin: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    pub step_size: f64,
    #[arg(long, value_enum, default_value_t = Optimizer::Adam)]
    pub optimizer: Optimizer,
    #[arg(long, default_value_t = 250)]
    pub checkpoint_every: usize,
    #[arg(long, default_value_t = 64)]
    pub flatten_samples: usize,
}

#[derive(Debug, Clone, Args, Default)]
pub struct FilterArgs {
    #[arg(long = "kind", value_enum)]
    pub kinds: Vec<KindArg>,
    #[arg(long = "category")]
    pub categories: Vec<String>,
    #[arg(long = "system", value_enum)]
    pub systems: Vec<SystemArg>,
    #[arg(long)]
    pub min_sketchability: Option<u8>,
    #[arg(long)]
    pub max_sketchability: Option<u8>,
    /// Drop records whose sign name starts with this prefix (repeatable).
    #[arg(long = "exclude-prefix")]
    pub exclude_prefixes: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Image,
    Sketch,
    Pictograph,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SystemArg {
    Hieroglyph,
    Oracle,
    Protocuneiform,
}

impl FilterArgs {
    pub fn to_filter(&self) -> RecordFilter {
        fn non_empty<T: Ord>(v: BTreeSet<T>) -> Option<BTreeSet<T>> {
            (!v.is_empty()).then_some(v)
        }
        RecordFilter {
            categories: non_empty(self.categories.iter().cloned().collect()),
            kinds: non_empty(
                self.kinds
                    .iter()
                    .map(|k| match k {
                        KindArg::Image => RecordKind::Image,
                        KindArg::Sketch => RecordKind::Sketch,
                        KindArg::Pictograph => RecordKind::Pictograph,
                    })
                    .collect(),
            ),
            systems: non_empty(
                self.systems
                    .iter()
                    .map(|s| match s {
                        SystemArg::Hieroglyph => WritingSystem::Hieroglyph,
                        SystemArg::Oracle => WritingSystem::Oracle,
                        SystemArg::Protocuneiform => WritingSystem::Protocuneiform,
                    })
                    .collect(),
            ),
            min_sketchability: self.min_sketchability,
            max_sketchability: self.max_sketchability,
            exclude_prefixes: self.exclude_prefixes.clone(),
        }
    }
}

#[derive(Debug, Args)]
pub struct EmbedArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Cache file to write.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub encoder: EncoderArg,
    #[command(flatten)]
    pub filter: FilterArgs,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    /// Cache of sketch embeddings.
    #[arg(long)]
    pub sketches: PathBuf,
    /// Manifest(s) giving category and sketchability per sketch id.
    #[arg(long = "manifest", required = true)]
    pub manifests: Vec<PathBuf>,
    /// Cache of label embeddings keyed by category name. Without it, labels
    /// are prompt embeddings from the encoder.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Label vocabulary; defaults to the categories of the sketches.
    #[arg(long = "class")]
    pub classes: Vec<String>,
    #[command(flatten)]
    pub encoder: EncoderArg,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RsaArgs {
    #[arg(long)]
    pub images: PathBuf,
    #[arg(long)]
    pub sketches: PathBuf,
    #[arg(long, default_value_t = 5000)]
    pub perms: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct MatchArgs {
    #[arg(long)]
    pub sketches: PathBuf,
    #[arg(long)]
    pub pictographs: PathBuf,
    /// Manifest(s) giving categories for sketch and pictograph ids.
    #[arg(long = "manifest", required = true)]
    pub manifests: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RetrieveArgs {
    #[arg(long)]
    pub sketches: PathBuf,
    #[arg(long)]
    pub signs: PathBuf,
    /// Manifest(s) giving sketch categories and sign names.
    #[arg(long = "manifest", required = true)]
    pub manifests: Vec<PathBuf>,
    #[arg(long, default_value_t = 40)]
    pub top: usize,
    /// Drop signs whose name starts with this prefix (repeatable).
    #[arg(long = "exclude-prefix")]
    pub exclude_prefixes: Vec<String>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    /// Random sketches for the rasterizer check.
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[arg(long, default_value_t = 4)]
    pub max_strokes: usize,
    /// Pixels sampled for the encoder check; 0 skips it.
    #[arg(long, default_value_t = 200)]
    pub encoder_samples: usize,
    #[command(flatten)]
    pub encoder: EncoderArg,
    #[arg(long)]
    pub seed: u64,
    /// Optional CSV report path.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parses `args` and runs the subcommand, returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return 0;
            }
            let _ = e.print();
            eprintln!("\n{}", Cli::command().render_help());
            return 1;
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

pub fn execute(command: Command) -> Result<()> {
    match command {
        Command::Sketch(a) => sketch(a),
        Command::Embed(a) => embed(a),
        Command::Classify(a) => classify(a),
        Command::Rsa(a) => rsa(a),
        Command::Match(a) => match_cmd(a),
        Command::Retrieve(a) => retrieve(a),
        Command::Gradcheck(a) => gradcheck_cmd(a),
    }
}

/// Ordered `key = value` pairs describing a run.
struct Header(Vec<(String, String)>);

impl Header {
    fn new(command: &str) -> Self {
        Header(vec![("command".into(), command.into())])
    }

    fn add(&mut self, key: &str, value: impl Display) -> &mut Self {
        self.0.push((key.into(), value.to_string()));
        self
    }

    fn render(&self) -> String {
        self.0.iter().map(|(k, v)| format!("# {k} = {v}\n")).collect()
    }

    fn print(&self) {
        print!("{}", self.render());
    }
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(io_err(path))
}

fn csv_bytes<R: AsRef<[String]>>(header: &[&str], rows: &[R]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let fail = |e: csv::Error| Error::Format(e.to_string());
    w.write_record(header).map_err(fail)?;
    for r in rows {
        w.write_record(r.as_ref()).map_err(fail)?;
    }
    w.into_inner().map_err(|e| Error::Format(e.to_string()))
}

fn write_csv<R: AsRef<[String]>>(path: &Path, header: &[&str], rows: &[R]) -> Result<()> {
    atomic_write(path, &csv_bytes(header, rows)?)
}

fn warn(message: impl Display) {
    eprintln!("warning: {message}");
}

fn sketch(a: SketchArgs) -> Result<()> {
    let raster_cfg = RasterConfig {
        flatten_samples: a.flatten_samples,
        ..Default::default()
    };
    let image = load_image(&a.input, &raster_cfg)?;
    let canvas = Canvas::new(image.height(), image.width());
    let spec = SketchSpec {
        n_strokes: a.strokes,
        canvas,
        stroke_width: a.stroke_width,
    };
    let sampler = SamplerConfig {
        temperature: a.temperature,
        suppression_sigma: a.suppression_sigma,
        border_margin: a.border_margin,
        ..Default::default()
    };
    let opt = OptimizeConfig {
        iterations: a.iters,
        step_size: a.step_size,
        checkpoint_every: a.checkpoint_every,
        seed: a.seed,
        rule: match a.optimizer {
            Optimizer::Adam => UpdateRule::Adam,
            Optimizer::Sgd => UpdateRule::Sgd,
        },
        ..Default::default()
    };
    let mut header = Header::new("sketch");
    header
        .add("input", a.input.display())
        .add("canvas", format!("{}x{}", canvas.height, canvas.width))
        .add("encoder", &a.encoder.encoder)
        .add("seed", a.seed)
        .add("strokes", spec.n_strokes)
        .add("control_points", spec.k_points())
        .add("stroke_width", spec.stroke_width)
        .add("temperature", sampler.temperature)
        .add("suppression_sigma", sampler.suppression_sigma)
        .add("border_margin", sampler.border_margin_for(canvas))
        .add("window_side", sampler.window_side_for(canvas))
        .add("walk_step", sampler.walk_step)
        .add("flatten_samples", raster_cfg.flatten_samples)
        .add("aa_halfwidth", raster_cfg.aa_halfwidth)
        .add("iterations", opt.iterations)
        .add("optimizer", format!("{:?}", opt.rule).to_lowercase())
        .add("step_size", opt.step_size)
        .add("beta1", opt.beta1)
        .add("beta2", opt.beta2)
        .add("epsilon", opt.epsilon)
        .add("checkpoint_every", opt.checkpoint_every)
        .add("out", a.out.display());
    header.print();

    let encoder = a.encoder.encoder.open()?;
    let out = full_pipeline(&image, &spec, encoder.as_ref(), &sampler, &raster_cfg, &opt)?;
    for w in &out.trace.warnings {
        warn(w);
    }
    if out.init.starts.random_fill > 0 {
        warn(format!(
            "activation map ran out of mass; {} start points were drawn at random",
            out.init.starts.random_fill
        ));
    }

    create_dir(&a.out)?;
    let checkpoints = a.out.join("checkpoints");
    create_dir(&checkpoints)?;
    atomic_write(&a.out.join("config.txt"), header.render().as_bytes())?;
    write_svg(&out.init.sketch, &a.out.join("init.svg"))?;
    write_svg(&out.sketch, &a.out.join("sketch.svg"))?;
    save_png(&render(&out.sketch, &raster_cfg)?, &a.out.join("sketch.png"))?;
    let mut trace = String::from("iteration\tloss\n");
    for (i, l) in out.trace.losses.iter().enumerate() {
        trace.push_str(&format!("{i}\t{l}\n"));
    }
    atomic_write(&a.out.join("trace.tsv"), trace.as_bytes())?;
    for (i, s) in &out.trace.checkpoints {
        write_svg(s, &checkpoints.join(format!("iter_{i:05}.svg")))?;
    }
    println!("initial_loss = {}", out.trace.initial_loss());
    println!("final_loss = {}", out.trace.final_loss());
    Ok(())
}

fn embed(a: EmbedArgs) -> Result<()> {
    let manifest = load_manifest(&a.manifest)?;
    for w in &manifest.warnings {
        warn(w);
    }
    let records = filter_records(&manifest.records, &a.filter.to_filter());
    let mut header = Header::new("embed");
    header
        .add("manifest", a.manifest.display())
        .add("records", records.len())
        .add("encoder", &a.encoder.encoder)
        .add("filter", format!("{:?}", a.filter.to_filter()))
        .add("out", a.out.display());
    header.print();
    let encoder = a.encoder.encoder.open()?;
    let d = encoder.descriptor();
    let raster_cfg = RasterConfig::default();
    let mut cache = EmbeddingCache::new(d.name.clone(), d.embedding_dim);
    for r in &records {
        let image = load_image(&manifest.resolve(r), &raster_cfg)?;
        let e = encoder.embed_image(&image)?;
        if e.degenerate {
            warn(format!("`{}` has an all-zero embedding", r.path));
        }
        cache.push(r.id(), e.values.iter().map(|&v| v as f32).collect())?;
    }
    cache.save(&a.out)?;
    println!("embedded = {}", cache.len());
    Ok(())
}

/// Records from all manifests keyed by id. An image and its sketch share an
/// id, so an id may repeat as long as category and sketchability agree.
fn record_index(paths: &[PathBuf]) -> Result<BTreeMap<String, CorpusRecord>> {
    let mut index: BTreeMap<String, CorpusRecord> = BTreeMap::new();
    for p in paths {
        let m = load_manifest(p)?;
        for w in &m.warnings {
            warn(format!("{}: {w}", p.display()));
        }
        for r in m.records {
            let id = r.id();
            match index.get(&id) {
                Some(prev) if (&prev.category, prev.sketchability) != (&r.category, r.sketchability) => {
                    return Err(Error::Format(format!("id `{id}` is listed with conflicting metadata")));
                }
                Some(_) => {}
                None => {
                    index.insert(id, r);
                }
            }
        }
    }
    Ok(index)
}

fn lookup<'a>(index: &'a BTreeMap<String, CorpusRecord>, id: &str) -> Result<&'a CorpusRecord> {
    index
        .get(id)
        .ok_or_else(|| Error::Format(format!("`{id}` is not listed in any manifest")))
}

/// "A sketch of a bird", "A sketch of an eye".
pub fn prompt(class: &str) -> String {
    let article = match class.chars().next().map(|c| c.to_ascii_lowercase()) {
        Some('a' | 'e' | 'i' | 'o' | 'u') => "an",
        _ => "a",
    };
    format!("A sketch of {article} {class}")
}

fn level_name(level: Option<u8>) -> String {
    level.map_or_else(|| "na".into(), |l| l.to_string())
}

fn classify(a: ClassifyArgs) -> Result<()> {
    let sketches = EmbeddingCache::load(&a.sketches)?.to_set()?;
    let index = record_index(&a.manifests)?;
    let classes: Vec<String> = if a.classes.is_empty() {
        let mut set = BTreeSet::new();
        for e in sketches.embeddings() {
            set.insert(lookup(&index, &e.id)?.category.clone());
        }
        set.into_iter().collect()
    } else {
        a.classes.clone()
    };
    let mut header = Header::new("classify");
    header
        .add("sketches", a.sketches.display())
        .add("classes", classes.join(","))
        .add(
            "labels",
            a.labels.as_ref().map_or_else(
                || format!("prompts via {}", a.encoder.encoder),
                |p| p.display().to_string(),
            ),
        )
        .add("out", a.out.display());
    header.print();

    let labels = match &a.labels {
        Some(p) => {
            let cache = EmbeddingCache::load(p)?;
            let mut out = Vec::new();
            for c in &classes {
                let r = cache
                    .get(c)
                    .ok_or_else(|| Error::Format(format!("label cache has no entry `{c}`")))?;
                out.push(Embedding::new(
                    c.clone(),
                    r.values.iter().map(|&v| f64::from(v)).collect(),
                ));
            }
            out
        }
        None => {
            let encoder = a.encoder.encoder.open()?;
            let mut out = Vec::new();
            for c in &classes {
                let mut e = encoder.embed_text(&prompt(c))?;
                e.id = c.clone();
                out.push(e);
            }
            out
        }
    };
    let labels = EmbeddingSet::new(labels)?;
    let k = labels.len().min(3);

    let mut per_row = Vec::new();
    let mut table: BTreeMap<(String, String), (usize, usize, usize)> = BTreeMap::new();
    for s in sketches.embeddings() {
        let r = lookup(&index, &s.id)?;
        let ranked = zero_shot_classify(s, &labels, k)?;
        let hit1 = ranked.first().is_some_and(|x| x.id == r.category);
        let hit3 = ranked.iter().any(|x| x.id == r.category);
        for key in [
            (r.category.clone(), level_name(r.sketchability)),
            (r.category.clone(), "all".into()),
            ("all".into(), level_name(r.sketchability)),
            ("all".into(), "all".into()),
        ] {
            let t = table.entry(key).or_default();
            t.0 += 1;
            t.1 += usize::from(hit1);
            t.2 += usize::from(hit3);
        }
        let mut row = vec![s.id.clone(), r.category.clone(), level_name(r.sketchability)];
        row.extend((0..3).map(|i| ranked.get(i).map_or_else(String::new, |x| x.id.clone())));
        row.push(u8::from(hit1).to_string());
        row.push(u8::from(hit3).to_string());
        per_row.push(row);
    }
    create_dir(&a.out)?;
    write_csv(
        &a.out.join("classify_predictions.csv"),
        &[
            "sketch_id",
            "category",
            "sketchability",
            "rank1",
            "rank2",
            "rank3",
            "top1",
            "top3",
        ],
        &per_row,
    )?;
    let summary: Vec<Vec<String>> = table
        .iter()
        .map(|((c, l), (n, h1, h3))| {
            vec![
                c.clone(),
                l.clone(),
                n.to_string(),
                (*h1 as f64 / *n as f64).to_string(),
                (*h3 as f64 / *n as f64).to_string(),
            ]
        })
        .collect();
    write_csv(
        &a.out.join("classify_summary.csv"),
        &["category", "sketchability", "n", "top1_accuracy", "top3_accuracy"],
        &summary,
    )?;
    if let Some((n, h1, h3)) = table.get(&("all".to_string(), "all".to_string())) {
        println!("top1 = {}", *h1 as f64 / *n as f64);
        println!("top3 = {}", *h3 as f64 / *n as f64);
    }
    Ok(())
}

/// Reorders `other` to follow the ids of `reference`.
fn align(reference: &EmbeddingSet, other: &EmbeddingSet) -> Result<EmbeddingSet> {
    let by_id: BTreeMap<&str, &Embedding> = other.embeddings().iter().map(|e| (e.id.as_str(), e)).collect();
    if by_id.len() != reference.len() {
        return Err(Error::Format(format!(
            "caches hold {} and {} entries",
            reference.len(),
            other.len()
        )));
    }
    let mut out = Vec::with_capacity(reference.len());
    for e in reference.embeddings() {
        let m = by_id
            .get(e.id.as_str())
            .ok_or_else(|| Error::Format(format!("`{}` has no counterpart", e.id)))?;
        out.push((*m).clone());
    }
    Ok(EmbeddingSet::new(out)?)
}

fn rdm_tensor(rdm: &Rdm) -> Result<Tensor> {
    Tensor::from_f64(vec![rdm.n(), rdm.n()], rdm.data())
}

fn rsa(a: RsaArgs) -> Result<()> {
    let images = EmbeddingCache::load(&a.images)?.to_set()?;
    let sketches = align(&images, &EmbeddingCache::load(&a.sketches)?.to_set()?)?;
    let mut header = Header::new("rsa");
    header
        .add("images", a.images.display())
        .add("sketches", a.sketches.display())
        .add("items", images.len())
        .add("permutations", a.perms)
        .add("seed", a.seed)
        .add("out", a.out.display());
    header.print();

    let image_rdm = build_rdm(&images)?;
    let sketch_rdm = build_rdm(&sketches)?;
    let rho = spearman_upper(&sketch_rdm, &image_rdm)?;
    let test = rsa_permutation(&sketch_rdm, &image_rdm, a.perms, a.seed)?;
    let (mean, paired) = mean_paired_cosine(&images, &sketches, a.perms, a.seed)?;
    let delta = delta_rdm(&sketch_rdm, &image_rdm)?;

    create_dir(&a.out)?;
    rdm_tensor(&image_rdm)?.write(&a.out.join("rdm_images.tensor"))?;
    rdm_tensor(&sketch_rdm)?.write(&a.out.join("rdm_sketches.tensor"))?;
    Tensor::from_f64(vec![delta.rows, delta.cols], &delta.data)?.write(&a.out.join("delta_rdm.tensor"))?;
    let ids: String = image_rdm.ids().iter().map(|i| format!("{i}\n")).collect();
    atomic_write(&a.out.join("rdm_ids.txt"), ids.as_bytes())?;
    write_csv(
        &a.out.join("rsa.csv"),
        &["statistic", "value", "p_value", "permutations", "seed"],
        &[
            vec![
                "spearman_rho".to_string(),
                rho.to_string(),
                test.p_value.to_string(),
                a.perms.to_string(),
                a.seed.to_string(),
            ],
            vec![
                "mean_paired_cosine".to_string(),
                mean.to_string(),
                paired.p_value.to_string(),
                a.perms.to_string(),
                a.seed.to_string(),
            ],
        ],
    )?;
    println!("rho = {rho}");
    println!("rho_p = {}", test.p_value);
    println!("mean_paired_cosine = {mean}");
    println!("mean_paired_cosine_p = {}", paired.p_value);
    Ok(())
}

fn tally_row(category: &str, level: &str, t: &Tally) -> Vec<String> {
    vec![
        category.to_string(),
        level.to_string(),
        t.matches.to_string(),
        t.total.to_string(),
        t.accuracy().to_string(),
    ]
}

fn match_cmd(a: MatchArgs) -> Result<()> {
    let sketches = EmbeddingCache::load(&a.sketches)?.to_set()?;
    let pictographs = EmbeddingCache::load(&a.pictographs)?.to_set()?;
    let index = record_index(&a.manifests)?;
    let mut header = Header::new("match");
    header
        .add("sketches", a.sketches.display())
        .add("pictographs", a.pictographs.display())
        .add("rows", sketches.len())
        .add("columns", pictographs.len())
        .add("out", a.out.display());
    header.print();

    let m = match_matrix(&sketches, &pictographs)?;
    let sketch_records = sketches
        .embeddings()
        .iter()
        .map(|e| lookup(&index, &e.id))
        .collect::<Result<Vec<_>>>()?;
    let sketch_cats: Vec<&str> = sketch_records.iter().map(|r| r.category.as_str()).collect();
    let pict_cats = pictographs
        .embeddings()
        .iter()
        .map(|e| lookup(&index, &e.id).map(|r| r.category.as_str()))
        .collect::<Result<Vec<_>>>()?;
    let levels: Option<Vec<u8>> = sketch_records.iter().map(|r| r.sketchability).collect();
    if levels.is_none() {
        warn("some sketches have no sketchability rating; per-level tables are skipped");
    }
    let acc = matching_accuracy(&m, &sketch_cats, &pict_cats, levels.as_deref())?;

    create_dir(&a.out)?;
    Tensor::from_f64(vec![m.rows, m.cols], &m.data)?.write(&a.out.join("match_matrix.tensor"))?;
    atomic_write(
        &a.out.join("match_rows.txt"),
        m.row_ids
            .iter()
            .map(|i| format!("{i}\n"))
            .collect::<String>()
            .as_bytes(),
    )?;
    atomic_write(
        &a.out.join("match_cols.txt"),
        m.col_ids
            .iter()
            .map(|i| format!("{i}\n"))
            .collect::<String>()
            .as_bytes(),
    )?;
    let mut rows = Vec::new();
    for (c, t) in &acc.per_category {
        rows.push(tally_row(c, "all", t));
    }
    for ((c, l), t) in &acc.per_category_sketchability {
        rows.push(tally_row(c, &l.to_string(), t));
    }
    for (l, t) in &acc.per_sketchability {
        rows.push(tally_row("all", &l.to_string(), t));
    }
    rows.push(tally_row("all", "all", &acc.overall));
    write_csv(
        &a.out.join("match_accuracy.csv"),
        &["category", "sketchability", "matches", "total", "accuracy"],
        &rows,
    )?;
    let best: Vec<Vec<String>> = (0..m.rows)
        .map(|r| {
            let c = acc.best_column[r];
            vec![
                m.row_ids[r].clone(),
                sketch_cats[r].to_string(),
                m.col_ids[c].clone(),
                pict_cats[c].to_string(),
                m.get(r, c).to_string(),
                u8::from(sketch_cats[r] == pict_cats[c]).to_string(),
            ]
        })
        .collect();
    write_csv(
        &a.out.join("match_best.csv"),
        &[
            "sketch_id",
            "category",
            "best_pictograph",
            "pictograph_category",
            "similarity",
            "match",
        ],
        &best,
    )?;
    println!("accuracy = {}", acc.overall.accuracy());
    Ok(())
}

fn retrieve(a: RetrieveArgs) -> Result<()> {
    let sketches = EmbeddingCache::load(&a.sketches)?.to_set()?;
    let signs = EmbeddingCache::load(&a.signs)?.to_set()?;
    let index = record_index(&a.manifests)?;
    let sign_name = |id: &str| -> String {
        index
            .get(id)
            .and_then(|r| r.sign_name.clone())
            .unwrap_or_else(|| id.to_string())
    };
    let kept: Vec<Embedding> = signs
        .embeddings()
        .iter()
        .filter(|e| {
            let name = sign_name(&e.id);
            !a.exclude_prefixes.iter().any(|p| name.starts_with(p.as_str()))
        })
        .cloned()
        .collect();
    let mut header = Header::new("retrieve");
    header
        .add("sketches", a.sketches.display())
        .add("signs", a.signs.display())
        .add("signs_kept", kept.len())
        .add("top", a.top)
        .add("exclude_prefixes", a.exclude_prefixes.join(","))
        .add("out", a.out.display());
    header.print();
    let signs = EmbeddingSet::new(kept)?;
    let labelled = sketches
        .embeddings()
        .iter()
        .map(|e| Ok(e.clone().with_category(lookup(&index, &e.id)?.category.clone())))
        .collect::<Result<Vec<_>>>()?;
    let queries = residual_query(&EmbeddingSet::new(labelled)?)?;
    let mut rows = Vec::new();
    for q in &queries {
        for r in top_k_retrieve(q, &signs, a.top)? {
            rows.push(vec![
                q.category.clone(),
                r.rank.to_string(),
                r.id.clone(),
                sign_name(&r.id),
                r.score.to_string(),
            ]);
        }
    }
    create_dir(&a.out)?;
    write_csv(
        &a.out.join("retrieval.csv"),
        &["category", "rank", "sign_id", "sign_name", "similarity"],
        &rows,
    )?;
    println!("queries = {}", queries.len());
    Ok(())
}

/// Pass fraction over `trials` seeded random sketches of 1 to `max_strokes`
/// strokes, one gradcheck trial each.
pub fn rasterizer_gradcheck(trials: usize, max_strokes: usize, seed: u64) -> Result<GradcheckReport> {
    let canvas = Canvas::new(224, 224);
    let cfg = RasterConfig::default();
    let mut errors = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for trial in 0..trials {
        let n = rng.gen_range(1..=max_strokes.max(1));
        let sketch = VectorSketch::random(&mut rng, canvas, n, 3.0)?;
        errors.extend(gradcheck_errors(&sketch, &cfg, 1, seed.wrapping_add(trial as u64))?);
    }
    Ok(GradcheckReport::from_errors(
        errors,
        glyphforge_core::raster::GRADCHECK_TOLERANCE,
    ))
}

fn noise_image(seed: u64) -> Result<RasterImage> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..224 * 224 * 3).map(|_| rng.gen_range(0.05..0.95)).collect();
    Ok(RasterImage::new(224, 224, 3, data)?)
}

fn report_row(name: &str, r: &GradcheckReport) -> Vec<String> {
    vec![
        name.to_string(),
        r.checked.to_string(),
        r.passed.to_string(),
        r.pass_fraction.to_string(),
        r.max_rel_error.to_string(),
        r.median_rel_error.to_string(),
    ]
}

fn gradcheck_cmd(a: GradcheckArgs) -> Result<()> {
    let mut header = Header::new("gradcheck");
    header
        .add("trials", a.trials)
        .add("max_strokes", a.max_strokes)
        .add("encoder_samples", a.encoder_samples)
        .add("encoder", &a.encoder.encoder)
        .add("seed", a.seed)
        .add("step", glyphforge_core::raster::GRADCHECK_STEP)
        .add("tolerance", glyphforge_core::raster::GRADCHECK_TOLERANCE);
    header.print();
    let mut rows = vec![report_row(
        "rasterizer",
        &rasterizer_gradcheck(a.trials, a.max_strokes, a.seed)?,
    )];
    if a.encoder_samples > 0 {
        let encoder = a.encoder.encoder.open()?;
        let target = encoder.embed_image(&noise_image(a.seed.wrapping_add(1))?)?;
        let r = encoder_gradcheck(
            encoder.as_ref(),
            &noise_image(a.seed)?,
            &target,
            a.encoder_samples,
            a.seed,
        )?;
        rows.push(report_row("encoder", &r));
    }
    for r in &rows {
        println!(
            "{} checked={} passed={} pass_fraction={} max_rel_error={} median_rel_error={}",
            r[0], r[1], r[2], r[3], r[4], r[5]
        );
    }
    if let Some(out) = &a.out {
        write_csv(
            out,
            &[
                "check",
                "checked",
                "passed",
                "pass_fraction",
                "max_rel_error",
                "median_rel_error",
            ],
            &rows,
        )?;
    }
    Ok(())
}
