//! `sfgen`: generate scale-free graphs on simulated ranks and characterize them.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use sfgen_core::graph::EdgeList;
use sfgen_core::io::{self, Format};
use sfgen_core::metrics::{adjacency_raster, MetricsReport, Sources};
use sfgen_core::pba::{generate_pba, FactionConfig, PbaParams};
use sfgen_core::pk::{generate_pk, NoiseMode, PkParams};
use sfgen_core::rng::global_rng;
use sfgen_core::transport::write_traffic_csv;

const DEFAULT_SEED: u64 = 42;
const METRICS_STREAM: u64 = 0x6d65_7472;

#[derive(Parser)]
#[command(
    name = "sfgen",
    version,
    about = "Rank-parallel scale-free graph generator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Two-phase preferential attachment over factions of ranks.
    GeneratePba(PbaArgs),
    /// Stack-based Kronecker expansion of a seed graph.
    GeneratePk(PkArgs),
    /// Degree distribution, power-law fit and sampled path statistics.
    Metrics(MetricsArgs),
    /// Adjacency-matrix raster as a PGM image.
    Raster(RasterArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Number of simulated ranks; part of the output's identity.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    ranks: u64,
    /// Worker threads; never changes the output.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    workers: Option<u64>,
    /// Master random seed.
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(short, long)]
    output: PathBuf,
    #[arg(long, default_value = "binary")]
    format: Format,
    /// Sort and drop repeated edges before writing.
    #[arg(long)]
    dedupe: bool,
}

#[derive(Args)]
struct PbaArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    vertices_per_rank: u64,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    edges_per_vertex: u64,
    #[arg(long, default_value_t = 0.0, value_parser = parse_probability)]
    inter_faction_prob: f64,
    /// Faction file: one faction per line.
    #[arg(long, conflicts_with = "factions")]
    factions_file: Option<PathBuf>,
    /// `all` or `blocks:<m>`.
    #[arg(long)]
    factions: Option<String>,
    /// Per-message traffic log (phase,from,to,bytes).
    #[arg(long)]
    traffic_csv: Option<PathBuf>,
}

#[derive(Args)]
struct PkArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Seed matrix file: order on the first line, then `r c` per nonzero.
    #[arg(long)]
    seed_graph: PathBuf,
    /// Final iteration T; the graph has n0^(T+1) vertices.
    #[arg(long)]
    iterations: u32,
    /// `none`, `seed-perturb:<p>` or `er-flip:<count>`.
    #[arg(long, default_value = "none")]
    noise: NoiseMode,
}

#[derive(Args)]
struct MetricsArgs {
    input: PathBuf,
    /// Input format; sniffed from the file when omitted.
    #[arg(long)]
    format: Option<Format>,
    /// BFS sources: a count or `all`. Default max(32, |V|/1000).
    #[arg(long)]
    sources: Option<Sources>,
    /// Seed for source sampling.
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long)]
    degree_csv: Option<PathBuf>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    workers: Option<u64>,
}

#[derive(Args)]
struct RasterArgs {
    input: PathBuf,
    #[arg(long)]
    format: Option<Format>,
    #[arg(long, default_value_t = 512, value_parser = clap::value_parser!(u64).range(1..=65536))]
    resolution: u64,
    /// Plain-text P2 instead of binary P5.
    #[arg(long)]
    ascii: bool,
    #[arg(short, long)]
    output: PathBuf,
}

enum Failure {
    /// Bad configuration: exit code 2.
    Config(String),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

type CliResult<T> = Result<T, Failure>;

fn bad_flag(flag: &str) -> impl FnOnce(sfgen_core::Error) -> Failure + '_ {
    move |e| Failure::Config(format!("{flag}: {e}"))
}

fn parse_probability(s: &str) -> Result<f64, String> {
    let p: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if (0.0..=1.0).contains(&p) {
        Ok(p)
    } else {
        Err(format!("{p} is outside [0, 1]"))
    }
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn workers(flag: Option<u64>) -> usize {
    flag.map_or_else(default_workers, |w| w as usize)
}

/// Runs `f` on a pool of the requested size; the metrics passes use rayon
/// directly rather than the rank transport.
fn on_workers<T: Send>(flag: Option<u64>, f: impl FnOnce() -> T + Send) -> anyhow::Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers(flag))
        .build()?;
    Ok(pool.install(f))
}

fn write_graph(g: &EdgeList, common: &CommonArgs) -> CliResult<(EdgeList, u64)> {
    let g = if common.dedupe {
        g.deduped()
    } else {
        g.clone()
    };
    let bytes = io::write_edge_list_file(&g, common.format, &common.output)
        .with_context(|| format!("writing {}", common.output.display()))?;
    Ok((g, bytes))
}

fn print_summary(lines: &[(&str, String)]) {
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    for (key, value) in lines {
        let _ = writeln!(out, "{key}={value}");
    }
}

fn rank_counts(g: &EdgeList) -> String {
    g.rank_edge_counts()
        .iter()
        .map(|c| c.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

fn run_pba(args: PbaArgs) -> CliResult<()> {
    let start = Instant::now();
    let ranks = args.common.ranks as usize;
    let factions = match (&args.factions_file, &args.factions) {
        (Some(path), _) => {
            let bytes = std::fs::read(path).map_err(|e| {
                Failure::Config(format!("--factions-file: {}: {e}", path.display()))
            })?;
            FactionConfig::parse_file_contents(&bytes, ranks)
                .map_err(bad_flag("--factions-file"))?
        }
        (None, Some(spec)) => {
            FactionConfig::from_shorthand(spec, ranks).map_err(bad_flag("--factions"))?
        }
        (None, None) => FactionConfig::all(ranks).map_err(bad_flag("--ranks"))?,
    };
    let params = PbaParams {
        vertices_per_rank: args.vertices_per_rank,
        edges_per_vertex: args.edges_per_vertex,
        inter_faction_prob: args.inter_faction_prob,
        master_seed: args.common.seed,
    };
    params
        .validate(&factions)
        .map_err(bad_flag("--vertices-per-rank/--edges-per-vertex"))?;
    log::info!("generating PBA graph on {ranks} ranks");
    let run = generate_pba(ranks, workers(args.common.workers), &params, &factions)
        .context("PBA generation failed")?;
    if let Some(path) = &args.traffic_csv {
        let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
        let mut out = BufWriter::new(file);
        write_traffic_csv(&run.traffic, &mut out)
            .and_then(|()| out.flush().map_err(Into::into))
            .with_context(|| format!("writing {}", path.display()))?;
    }
    let (written, bytes) = write_graph(&run.graph, &args.common)?;
    print_summary(&[
        ("generator", "pba".into()),
        ("vertices", written.vertex_count().to_string()),
        ("edges", written.len().to_string()),
        ("ranks", ranks.to_string()),
        ("rank_edges", rank_counts(&run.graph)),
        ("messages", run.traffic.len().to_string()),
        ("bytes_written", bytes.to_string()),
        ("wall_time", format!("{:.3}", start.elapsed().as_secs_f64())),
    ]);
    Ok(())
}

fn run_pk(args: PkArgs) -> CliResult<()> {
    let start = Instant::now();
    let ranks = args.common.ranks as usize;
    let seed = io::read_seed_graph_file(&args.seed_graph).map_err(bad_flag("--seed-graph"))?;
    seed.vertex_count(args.iterations)
        .map_err(bad_flag("--iterations"))?;
    let params = PkParams {
        iterations: args.iterations,
        noise: args.noise,
        master_seed: args.common.seed,
    };
    log::info!(
        "expanding {}-vertex seed to T={} on {ranks} ranks",
        seed.order(),
        args.iterations
    );
    let run = generate_pk(ranks, workers(args.common.workers), &seed, &params)
        .context("PK generation failed")?;
    let (written, bytes) = write_graph(&run.graph, &args.common)?;
    print_summary(&[
        ("generator", "pk".into()),
        ("vertices", written.vertex_count().to_string()),
        ("edges", written.len().to_string()),
        ("ranks", ranks.to_string()),
        ("rank_edges", rank_counts(&run.graph)),
        ("max_stack_depth", run.max_stack_depth().to_string()),
        ("bytes_written", bytes.to_string()),
        ("wall_time", format!("{:.3}", start.elapsed().as_secs_f64())),
    ]);
    Ok(())
}

fn read_input(path: &Path, format: Option<Format>) -> CliResult<EdgeList> {
    Ok(io::read_edge_list_file(path, format)
        .with_context(|| format!("reading {}", path.display()))?)
}

fn run_metrics(args: MetricsArgs) -> CliResult<()> {
    let start = Instant::now();
    let g = read_input(&args.input, args.format)?;
    let sources = args
        .sources
        .unwrap_or_else(|| Sources::default_for(g.vertex_count() as usize));
    let mut rng = global_rng(args.seed, METRICS_STREAM);
    let (report, hist) = on_workers(args.workers, || {
        MetricsReport::compute(&g, sources, &mut rng)
    })?
    .context("metrics failed")?;
    if let Some(path) = &args.degree_csv {
        let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
        hist.write_csv(BufWriter::new(file))
            .with_context(|| format!("writing {}", path.display()))?;
    }
    print!("{report}");
    print_summary(&[("wall_time", format!("{:.3}", start.elapsed().as_secs_f64()))]);
    Ok(())
}

fn run_raster(args: RasterArgs) -> CliResult<()> {
    let g = read_input(&args.input, args.format)?;
    let raster =
        adjacency_raster(&g, args.resolution as usize).map_err(bad_flag("--resolution"))?;
    let file = File::create(&args.output)
        .with_context(|| format!("creating {}", args.output.display()))?;
    let mut out = BufWriter::new(file);
    raster
        .write_pgm(&mut out, args.ascii)
        .and_then(|()| out.flush().map_err(Into::into))
        .with_context(|| format!("writing {}", args.output.display()))?;
    print_summary(&[
        ("resolution", raster.resolution().to_string()),
        ("edges", g.len().to_string()),
        ("output", args.output.display().to_string()),
    ]);
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::GeneratePba(args) => run_pba(args),
        Command::GeneratePk(args) => run_pk(args),
        Command::Metrics(args) => run_metrics(args),
        Command::Raster(args) => run_raster(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
