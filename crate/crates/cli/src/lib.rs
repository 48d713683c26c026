//! The `gemset` command line: generate → features → train → prune →
//! render → evaluate, plus the annotation server.
//!
//! Exit codes: 0 on success, 1 on usage or validation errors, 2 on I/O errors.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use gemset::design::load_design_dir;
use gemset::gbt::{self, GbtModel, Loss, TrainConfig};
use gemset::generator::{GenParams, Generator};
use gemset::labels::read_jsonl;
use gemset::metrics::{like_coverage, symmetric_like_point, LabelMatrix};
use gemset::pruning::{self, Aggregation, Manifest, PruneMode};
use gemset::renderer::{render_svg, RenderStyle};
use gemset::{Catalog, ContainerSpec, Design, FeatureParams, FeatureVector};
use rayon::prelude::*;
use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] gemset::Error),
    #[error(transparent)]
    Server(#[from] gemset_server::ServerError),
    #[error("{0}")]
    Usage(String),
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if e.is_io() => 2,
            CliError::Server(gemset_server::ServerError::Io { .. }) => 2,
            CliError::Server(gemset_server::ServerError::Core(e)) if e.is_io() => 2,
            CliError::Io { .. } => 2,
            _ => 1,
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.to_path_buf(), source }
}

#[derive(Debug, Parser)]
#[command(name = "gemset", version, about = "Generative stone-jewelry design pipeline")]
pub struct Cli {
    /// Worker threads for batch steps; defaults to available parallelism.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Pack stones into a container, one design file per seed.
    Generate(GenerateArgs),
    /// Print the six aesthetic features of each design as JSON lines.
    Features(FeaturesArgs),
    /// Draw each design as SVG.
    Render(RenderArgs),
    /// Fit the pruning model on labeled designs.
    Train(TrainArgs),
    /// Score designs with a trained model and write manifest.json.
    Prune(PruneArgs),
    /// Print the like-coverage curve of a label log.
    Evaluate(EvaluateArgs),
    /// Run the annotation server.
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ContainerKind {
    Circle,
    Ellipse,
    Teardrop,
    Hexagon,
    Polygon,
}

#[derive(Debug, Args)]
pub struct CatalogArg {
    /// Stone catalog JSON; the built-in catalog when omitted.
    #[arg(long)]
    pub catalog: Option<PathBuf>,
}

impl CatalogArg {
    fn load(&self) -> Result<Catalog> {
        Ok(match &self.catalog {
            Some(p) => Catalog::load(p)?,
            None => Catalog::builtin(),
        })
    }
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, value_enum, default_value = "circle")]
    pub container: ContainerKind,
    #[arg(long)]
    pub diameter_mm: Option<f64>,
    #[arg(long)]
    pub width_mm: Option<f64>,
    #[arg(long)]
    pub height_mm: Option<f64>,
    #[arg(long)]
    pub length_mm: Option<f64>,
    /// Polygon container vertices, counter-clockwise: "x,y x,y ...".
    #[arg(long, allow_hyphen_values = true)]
    pub vertices: Option<String>,
    #[arg(long, default_value_t = 1)]
    pub count: usize,
    #[arg(long, short)]
    pub out: PathBuf,
    #[command(flatten)]
    pub catalog: CatalogArg,
    #[command(flatten)]
    pub params: GenParamArgs,
}

/// Generator knobs; each falls back to the library default.
#[derive(Debug, Args)]
pub struct GenParamArgs {
    #[arg(long)]
    pub cell_size: Option<f64>,
    #[arg(long)]
    pub orientations: Option<usize>,
    #[arg(long)]
    pub margin: Option<f64>,
    #[arg(long)]
    pub slack_area: Option<f64>,
    #[arg(long)]
    pub w_balance: Option<f64>,
    #[arg(long)]
    pub w_harmony_shape: Option<f64>,
    #[arg(long)]
    pub w_harmony_orientation: Option<f64>,
    #[arg(long)]
    pub w_proportion: Option<f64>,
    #[arg(long)]
    pub w_unity: Option<f64>,
    #[arg(long)]
    pub min_stones: Option<usize>,
    #[arg(long)]
    pub max_stones: Option<usize>,
    #[arg(long)]
    pub stop_free_fraction: Option<f64>,
    #[arg(long)]
    pub keep_probability: Option<f64>,
    /// Design i uses seed + i.
    #[arg(long)]
    pub seed: Option<u64>,
}

impl GenParamArgs {
    pub fn resolve(&self) -> GenParams {
        let mut p = GenParams::default();
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = self.$f { p.$f = v; } )* };
        }
        set!(
            cell_size,
            orientations,
            margin,
            w_balance,
            w_harmony_shape,
            w_harmony_orientation,
            w_proportion,
            w_unity,
            min_stones,
            max_stones,
            stop_free_fraction,
            keep_probability,
            seed
        );
        if self.slack_area.is_some() {
            p.slack_area = self.slack_area;
        }
        p
    }
}

impl GenerateArgs {
    fn container_spec(&self) -> Result<ContainerSpec> {
        let need = |v: Option<f64>, flag: &str| v.ok_or_else(|| CliError::Usage(format!("--{flag} is required for this container")));
        Ok(match self.container {
            ContainerKind::Circle => ContainerSpec::Circle { diameter_mm: need(self.diameter_mm, "diameter-mm")? },
            ContainerKind::Hexagon => ContainerSpec::Hexagon { diameter_mm: need(self.diameter_mm, "diameter-mm")? },
            ContainerKind::Ellipse => ContainerSpec::Ellipse {
                width_mm: need(self.width_mm, "width-mm")?,
                height_mm: need(self.height_mm, "height-mm")?,
            },
            ContainerKind::Teardrop => ContainerSpec::Teardrop {
                width_mm: need(self.width_mm, "width-mm")?,
                length_mm: need(self.length_mm, "length-mm")?,
            },
            ContainerKind::Polygon => {
                let text = self.vertices.as_deref().ok_or_else(|| CliError::Usage("--vertices is required for a polygon container".into()))?;
                ContainerSpec::Polygon { vertices: parse_vertices(text)? }
            }
        })
    }
}

fn parse_vertices(text: &str) -> Result<Vec<[f64; 2]>> {
    text.split_whitespace()
        .map(|pair| {
            let bad = || CliError::Usage(format!("bad vertex `{pair}`, expected x,y"));
            let (x, y) = pair.split_once(',').ok_or_else(bad)?;
            Ok([x.trim().parse().map_err(|_| bad())?, y.trim().parse().map_err(|_| bad())?])
        })
        .collect()
}

#[derive(Debug, Args)]
pub struct DesignsArg {
    /// Directory of design JSON files.
    #[arg(long)]
    pub designs: PathBuf,
    #[command(flatten)]
    pub catalog: CatalogArg,
    /// Bezel margin used by the generator; sets the neighbor threshold.
    #[arg(long, default_value_t = 0.5)]
    pub margin: f64,
}

impl DesignsArg {
    fn feature_params(&self) -> Result<FeatureParams> {
        if !(self.margin >= 0.0 && self.margin.is_finite()) {
            return Err(CliError::Usage("--margin must be ≥ 0".into()));
        }
        Ok(FeatureParams::from_margin(self.margin))
    }
}

#[derive(Debug, Args)]
pub struct FeaturesArgs {
    #[command(flatten)]
    pub input: DesignsArg,
    /// Output file; stdout when omitted.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    #[arg(long)]
    pub designs: PathBuf,
    #[arg(long, short)]
    pub out: PathBuf,
    #[command(flatten)]
    pub catalog: CatalogArg,
    /// mm
    #[arg(long, default_value_t = 0.35)]
    pub bezel_width: f64,
    /// Hex color such as #c0c0c0.
    #[arg(long, default_value = "#c0c0c0")]
    pub bezel_color: String,
    #[arg(long)]
    pub background: Option<String>,
    #[arg(long, default_value_t = 10.0)]
    pub px_per_mm: f64,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum LossArg {
    Logistic,
    Squared,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum AggregationArg {
    Majority,
    Any,
    All,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub input: DesignsArg,
    #[arg(long)]
    pub labels: PathBuf,
    #[arg(long, short)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 200)]
    pub n_trees: usize,
    #[arg(long, default_value_t = 3)]
    pub max_depth: usize,
    #[arg(long, default_value_t = 0.1)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 5)]
    pub min_samples_leaf: usize,
    #[arg(long, value_enum, default_value = "logistic")]
    pub loss: LossArg,
    /// How several judges' labels become one target.
    #[arg(long, value_enum, default_value = "majority")]
    pub aggregation: AggregationArg,
}

#[derive(Debug, Args)]
pub struct PruneArgs {
    #[command(flatten)]
    pub input: DesignsArg,
    #[arg(long)]
    pub model: PathBuf,
    /// Manifest path.
    #[arg(long, short)]
    pub out: PathBuf,
    /// Keep designs whose predicted like probability is at least this.
    #[arg(long, conflicts_with = "keep_fraction")]
    pub threshold: Option<f64>,
    /// Keep this top fraction of designs by score instead.
    #[arg(long)]
    pub keep_fraction: Option<f64>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub labels: PathBuf,
    /// Restrict to the designs kept by a prune manifest.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Spacing of the printed curve.
    #[arg(long, default_value_t = 0.05)]
    pub step: f64,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub designs: PathBuf,
    #[arg(long)]
    pub labels: PathBuf,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: std::net::IpAddr,
    /// Front-end bundle to serve at `/`.
    #[arg(long = "static")]
    pub static_dir: Option<PathBuf>,
    #[command(flatten)]
    pub catalog: CatalogArg,
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::new().filter_or("GEMSET_LOG", "warn")).try_init();
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: Cli) -> Result<()> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.jobs {
        if n == 0 {
            return Err(CliError::Usage("--jobs must be ≥ 1".into()));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| CliError::Usage(format!("worker pool: {e}")))?;
    pool.install(|| match cli.command {
        Command::Generate(a) => generate(a),
        Command::Features(a) => features(a),
        Command::Render(a) => render(a),
        Command::Train(a) => train(a),
        Command::Prune(a) => prune(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Serve(a) => serve(a),
    })
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(io_err(path))
}

pub fn design_id(seed: u64) -> String {
    format!("d-{seed:04}")
}

fn generate(a: GenerateArgs) -> Result<()> {
    let spec = a.container_spec()?;
    let params = a.params.resolve();
    let generator = Generator::new(a.catalog.load()?, params.clone())?;
    create_dir(&a.out)?;
    let results: Vec<_> = (0..a.count as u64)
        .into_par_iter()
        .map(|i| {
            let seed = params.seed.wrapping_add(i);
            generator.generate(&spec, &design_id(seed), seed)
        })
        .collect();
    let mut failed = 0;
    for r in results {
        match r {
            Ok(d) => {
                d.save_in(&a.out)?;
            }
            Err(gemset::Error::GenerationFailed { reason, partial }) => {
                log::warn!("{}: not written: {reason}", partial.design_id);
                failed += 1;
            }
            Err(e) => return Err(e.into()),
        }
    }
    log::info!("wrote {} designs to {}", a.count - failed, a.out.display());
    if failed > 0 {
        return Err(CliError::Usage(format!("{failed} of {} designs could not be generated", a.count)));
    }
    Ok(())
}

#[derive(Serialize)]
struct FeatureLine<'a> {
    design_id: &'a str,
    #[serde(flatten)]
    features: FeatureVector,
}

fn feature_vectors(designs: &[Design], catalog: &Catalog, params: &FeatureParams) -> Vec<gemset::Result<FeatureVector>> {
    designs.par_iter().map(|d| gemset::features::feature_vector(&d.layout(catalog)?, params)).collect()
}

fn features(a: FeaturesArgs) -> Result<()> {
    let catalog = a.input.catalog.load()?;
    let params = a.input.feature_params()?;
    let designs = load_design_dir(&a.input.designs)?;
    let mut out = String::new();
    for (d, fv) in designs.iter().zip(feature_vectors(&designs, &catalog, &params)) {
        match fv {
            Ok(features) => {
                out.push_str(&serde_json::to_string(&FeatureLine { design_id: &d.design_id, features }).expect("features serialize"));
                out.push('\n');
            }
            Err(e) => log::warn!("{}: skipped: {e}", d.design_id),
        }
    }
    match &a.out {
        Some(p) => write_file(p, &out),
        None => std::io::stdout().write_all(out.as_bytes()).map_err(io_err(Path::new("<stdout>"))),
    }
}

fn parse_color(s: &str) -> Result<[u8; 3]> {
    let h = s.strip_prefix('#').unwrap_or(s);
    let bad = || CliError::Usage(format!("bad color `{s}`, expected #rrggbb"));
    if h.len() != 6 || !h.is_ascii() {
        return Err(bad());
    }
    let byte = |i: usize| u8::from_str_radix(&h[i..i + 2], 16).map_err(|_| bad());
    Ok([byte(0)?, byte(2)?, byte(4)?])
}

fn render(a: RenderArgs) -> Result<()> {
    let style = RenderStyle {
        bezel_width: a.bezel_width,
        bezel_color: parse_color(&a.bezel_color)?,
        background: a.background.as_deref().map(parse_color).transpose()?,
        px_per_mm: a.px_per_mm,
    };
    style.validate()?;
    let catalog = a.catalog.load()?;
    let designs = load_design_dir(&a.designs)?;
    create_dir(&a.out)?;
    let svgs: Vec<_> = designs.par_iter().map(|d| render_svg(d, &catalog, &style)).collect();
    for (d, svg) in designs.iter().zip(svgs) {
        write_file(&a.out.join(format!("{}.svg", d.design_id)), &svg?)?;
    }
    Ok(())
}

fn train(a: TrainArgs) -> Result<()> {
    let cfg = TrainConfig {
        n_trees: a.n_trees,
        max_depth: a.max_depth,
        learning_rate: a.learning_rate,
        min_samples_leaf: a.min_samples_leaf,
        loss: match a.loss {
            LossArg::Logistic => Loss::Logistic,
            LossArg::Squared => Loss::Squared,
        },
    };
    cfg.validate()?;
    let scheme = match a.aggregation {
        AggregationArg::Majority => Aggregation::Majority,
        AggregationArg::Any => Aggregation::Any,
        AggregationArg::All => Aggregation::All,
    };
    let catalog = a.input.catalog.load()?;
    let params = a.input.feature_params()?;
    let designs = load_design_dir(&a.input.designs)?;
    let records = read_jsonl(&a.labels)?;
    let set = pruning::training_set(&designs, &records, scheme, &catalog, &params);
    if set.x.is_empty() {
        return Err(CliError::Usage("no labeled design with computable features".into()));
    }
    let model = gbt::train(&set.x, &set.y, &cfg)?;
    log::info!("trained {} trees on {} designs", model.trees.len(), set.x.len());
    model.save(&a.out)?;
    Ok(())
}

fn prune(a: PruneArgs) -> Result<()> {
    let mode = match a.keep_fraction {
        Some(q) => PruneMode::KeepFraction(q),
        None => PruneMode::Threshold(a.threshold.unwrap_or(0.5)),
    };
    mode.validate()?;
    let model = GbtModel::load(&a.model)?;
    let catalog = a.input.catalog.load()?;
    let params = a.input.feature_params()?;
    let designs = load_design_dir(&a.input.designs)?;
    let manifest: Manifest = pruning::prune(&designs, &catalog, &params, &model, mode)?;
    log::info!("kept {} of {} designs", manifest.kept.len(), designs.len());
    let mut text = manifest.to_json();
    text.push('\n');
    write_file(&a.out, &text)
}

/// The printed curve: `p` on a grid of `step`, then the symmetric point.
pub fn coverage_report(m: &LabelMatrix, step: f64) -> Result<String> {
    if !(step > 0.0 && step <= 1.0) {
        return Err(CliError::Usage("--step must be in (0, 1]".into()));
    }
    let n = (1.0 / step).round().max(1.0) as usize;
    let mut s = String::from("p\tlike_coverage\n");
    for k in 1..=n {
        let p = (k as f64 / n as f64).min(1.0);
        s.push_str(&format!("{p:.2}\t{:.4}\n", like_coverage(m, p)?));
    }
    s.push_str(&format!("symmetric_like_point\t{:.2}\n", symmetric_like_point(m)?));
    Ok(s)
}

fn evaluate(a: EvaluateArgs) -> Result<()> {
    let records = read_jsonl(&a.labels)?;
    let kept = match &a.manifest {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(io_err(p))?;
            let m: Manifest = serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?;
            Some(m.kept)
        }
        None => None,
    };
    let m = LabelMatrix::from_records(&records, kept.as_deref())?;
    print!("{}", coverage_report(&m, a.step)?);
    Ok(())
}

fn serve(a: ServeArgs) -> Result<()> {
    let mut cfg = gemset_server::config(&a.designs, &a.labels, a.catalog.load()?);
    cfg.static_dir = a.static_dir;
    let state = gemset_server::AppState::load(cfg)?;
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(io_err(Path::new("<runtime>")))?;
    rt.block_on(gemset_server::serve(state, std::net::SocketAddr::new(a.host, a.port)))?;
    Ok(())
}
