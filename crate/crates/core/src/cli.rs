//! `emperor` command-line front end.
//!
//! Exit codes: 0 on success, 1 on usage errors (bad or missing flags), 2 on
//! data errors (unreadable or invalid input files, numerical failures).
//! Output files are written to a temporary file in the target directory and
//! renamed into place, so an interrupted run never leaves a partial file.

use std::ffi::OsString;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use crate::bench::{run_benchmark, BenchConfig};
use crate::descriptor::{emperor_descriptor, Descriptor, DescriptorConfig};
use crate::error::{Error, Result};
use crate::gmm1d::EmConfig;
use crate::model::{read_gmm_spec, read_pointset_csv, GmmSpec};
use crate::momentindex::{enumerate_multi_indices, MultiIndex};
use crate::moments::{
    carleman_partial_sum, hankel_psd_check, multivariate_gmm_moment_capped, univariate_gmm_moment, MomentSequence,
    MomentVector, DEFAULT_DEGREE_CAP,
};
use crate::reconstruct::{rate_study, recover_moments, RateMode, RateStudyConfig};
use crate::slicing::{generate_directions, DirectionScheme};

const FORMATS: &str = "\
FILE FORMATS
  PointSet CSV      one point per line, d comma-separated decimal floats;
                    lines starting with '#' and blank lines are skipped.
  GMM spec (JSON)   {\"weights\": [w..], \"means\": [[..]..], \"covariances\": [[[..]..]..]}
                    weights > 0 summing to 1; covariances symmetric positive definite.
  Descriptor (JSON) {\"format\": \"emperor-descriptor\", \"version\": 1, \"config\", \"directions\",
                    \"mixtures\": [{\"weights\", \"means\", \"stddevs\"}..], \"standardization\", \"metadata\"}
  Moment CSV        '# alpha_1,..,alpha_d,moment' header, then one row per multi-index in
                    graded reverse lexicographic order.
  Rates CSV         'L,trial,rmse' header, one row per (L, trial), then a final
                    '# summary,slope=<s>,excluded_smallest=<bool>,noise_sd=<v>' line.
  Bench CSV         'method,seed,train_acc,test_acc' header, one row per (method, seed).";

#[derive(Debug, Parser)]
#[command(name = "emperor", version, about = "Sliced Gaussian-mixture moment descriptors", after_help = FORMATS)]
struct Cli {
    /// Worker threads (results do not depend on this value).
    #[arg(long, global = true, value_parser = clap::value_parser!(u32).range(1..))]
    threads: Option<u32>,
    /// Significant digits for CSV and console numbers (default: full round-trip precision).
    #[arg(long, global = true, value_parser = clap::value_parser!(u32).range(1..=17))]
    precision: Option<u32>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// PointSet CSV -> descriptor JSON.
    #[command(after_help = FORMATS)]
    Describe(DescribeArgs),
    /// Descriptor JSON + degree -> moment CSV.
    #[command(after_help = FORMATS)]
    Reconstruct(ReconstructArgs),
    /// Analytic moments of a GMM spec.
    #[command(after_help = FORMATS)]
    Moments(MomentsArgs),
    /// Rate study (config JSON) -> CSV, slope on stdout, optional JSON summary.
    #[command(after_help = RATES_HELP)]
    Rates(RatesArgs),
    /// Pooling benchmark (config JSON) -> report CSV and table.
    #[command(after_help = BENCH_HELP)]
    Bench(BenchArgs),
    /// Emit a slice set as JSON or CSV.
    Directions(DirectionsArgs),
}

const RATES_HELP: &str = "\
CONFIG (JSON)
  {\"gmm\": <GMM spec>, \"degree\": k, \"slice_counts\": [L..], \"trials\": n,
   \"noise_scale\": tau, \"sample_size\": N, \"ridge\": 0, \"seed\": 0,
   \"mode\": \"noise_model\" | \"end_to_end\", \"em\": {..}}
OUTPUT
  CSV 'L,trial,rmse' plus a '# summary,slope=..' line; JSON summary with per-L
  rows {L, rmse_mean, rmse_std}, slope, excluded_smallest, lambda_min_estimate.";

const BENCH_HELP: &str = "\
CONFIG (JSON)
  {\"dataset\": {\"kind\": \"matched_moments\", \"dim\": 4, \"separation\": 0.9,
               \"sets_per_class\": 200, \"points_per_set\": 500}
             | {\"kind\": \"generators\", \"generators\": [<GMM spec>..], \"sets_per_class\", \"points_per_set\"},
   \"methods\": [\"GAP\", \"MAX\", \"GeM:3\", \"COV\", \"EMPEROR\"],
   \"descriptor\": {\"slices\": 32, \"components\": 2, ...}, \"seeds\": [0,1,2,3,4],
   \"train_fraction\": 0.7, \"train\": {\"l2\", \"epochs\", \"step\", \"seed\"}}
OUTPUT
  CSV 'method,seed,train_acc,test_acc'; a mean ± std table on stdout.";

#[derive(Debug, Args)]
struct DescribeArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value_t = 64, value_parser = clap::value_parser!(u32).range(1..))]
    slices: u32,
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u32).range(1..))]
    components: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// `iid` (uniform on the sphere) or `axis` (coordinate axes first).
    #[arg(long, default_value = "iid")]
    scheme: DirectionScheme,
    /// Fit each slice on z-scored projections (the affine map is stored).
    #[arg(long)]
    standardize: bool,
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u32).range(1..))]
    restarts: u32,
    #[arg(long, default_value_t = 200, value_parser = clap::value_parser!(u32).range(1..))]
    max_iters: u32,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    /// Also write the flattened 3·K·L vector as a one-row CSV.
    #[arg(long)]
    flat_csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ReconstructArgs {
    #[arg(long)]
    descriptor: PathBuf,
    #[arg(long)]
    degree: u32,
    #[arg(long)]
    output: PathBuf,
    /// Ridge λ ≥ 0 (default: 0 when L ≥ 2·M_k, else 1e-8·trace(ΦᵀΦ)/M_k).
    #[arg(long)]
    ridge: Option<f64>,
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("what").required(true).args(["alpha", "degree", "theta"])))]
struct MomentsArgs {
    #[arg(long)]
    gmm: PathBuf,
    /// Single multi-index, e.g. `2,0`.
    #[arg(long, value_delimiter = ',')]
    alpha: Option<Vec<u32>>,
    /// All moments of this total degree.
    #[arg(long)]
    degree: Option<u32>,
    /// Slice direction (normalized) for sliced moments plus Hankel/Carleman diagnostics.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    theta: Option<Vec<f64>>,
    /// Hankel size n for `--theta` (uses sliced moments 0..=2n).
    #[arg(long, default_value_t = 4)]
    hankel: u32,
    /// Cap on |alpha| for the pair-partition evaluation.
    #[arg(long, default_value_t = DEFAULT_DEGREE_CAP)]
    degree_cap: u32,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RatesArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[arg(long)]
    summary: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    output: PathBuf,
    /// Replaces the config seeds with `seed, seed+1, …` (same count).
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct DirectionsArgs {
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    dim: u32,
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    slices: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "iid")]
    scheme: DirectionScheme,
    /// `json` (slice-set document) or `csv` (one direction per row).
    #[arg(long, default_value = "json")]
    format: String,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RatesFile {
    gmm: GmmSpec,
    degree: u32,
    slice_counts: Vec<usize>,
    #[serde(default = "default_trials")]
    trials: usize,
    noise_scale: f64,
    sample_size: usize,
    #[serde(default)]
    ridge: f64,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    mode: RateMode,
    #[serde(default)]
    em: EmConfig,
}

fn default_trials() -> usize {
    50
}

struct Ctx {
    precision: Option<u32>,
}

impl Ctx {
    fn num(&self, v: f64) -> String {
        match self.precision {
            None => format!("{v:?}"),
            Some(p) => {
                let rounded: f64 = format!("{:.*e}", p as usize - 1, v).parse().unwrap_or(v);
                format!("{rounded}")
            }
        }
    }
}

/// Writes `contents` to `path` via a temporary file and an atomic rename.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let io = |e: std::io::Error| Error::Parse(format!("{}: {e}", path.display()));
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(io)?;
    tmp.write_all(contents.as_bytes()).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

fn moment_csv(ctx: &Ctx, m: &MomentVector) -> String {
    let d = m.basis().dim();
    let header: Vec<String> = (1..=d).map(|i| format!("alpha_{i}")).collect();
    let mut out = format!("# {},moment\n", header.join(","));
    for (alpha, v) in m.basis().iter().zip(m.values()) {
        let idx: Vec<String> = alpha.entries().iter().map(u32::to_string).collect();
        out.push_str(&format!("{},{}\n", idx.join(","), ctx.num(*v)));
    }
    out
}

fn emit(out: &mut dyn std::io::Write, path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => write_atomic(p, text),
        None => out
            .write_all(text.as_bytes())
            .map_err(|e| Error::Parse(format!("stdout: {e}"))),
    }
}

fn describe(a: &DescribeArgs) -> Result<()> {
    let points = read_pointset_csv(&a.input)?;
    let config = DescriptorConfig {
        slices: a.slices as usize,
        components: a.components as usize,
        em: EmConfig {
            max_iters: a.max_iters as usize,
            rel_tol: a.tol,
            restarts: a.restarts as usize,
            ..EmConfig::default()
        },
        scheme: a.scheme,
        seed: a.seed,
        standardize_slices: a.standardize,
    };
    let desc = emperor_descriptor(&points, &config).map_err(|e| Error::Parse(format!("{}: {e}", a.input.display())))?;
    write_atomic(&a.output, &desc.to_json())?;
    if let Some(p) = &a.flat_csv {
        write_atomic(p, &desc.flat_csv())?;
    }
    Ok(())
}

fn reconstruct(ctx: &Ctx, a: &ReconstructArgs) -> Result<()> {
    let desc = Descriptor::read(&a.descriptor)?;
    let m = recover_moments(&desc, a.degree, a.ridge)?;
    write_atomic(&a.output, &moment_csv(ctx, &m))
}

fn moments(ctx: &Ctx, a: &MomentsArgs, out: &mut dyn std::io::Write) -> Result<()> {
    let gmm = read_gmm_spec(&a.gmm)?;
    let text = if let Some(alpha) = &a.alpha {
        let alpha = MultiIndex::new(alpha.clone())?;
        format!(
            "{}\n",
            ctx.num(multivariate_gmm_moment_capped(&gmm, &alpha, a.degree_cap)?)
        )
    } else if let Some(k) = a.degree {
        let basis = enumerate_multi_indices(gmm.dim(), k)?;
        let values = basis
            .iter()
            .map(|al| multivariate_gmm_moment_capped(&gmm, al, a.degree_cap))
            .collect::<Result<Vec<_>>>()?;
        moment_csv(ctx, &MomentVector::new(basis, values)?)
    } else {
        let theta = a.theta.as_ref().expect("argument group requires one option");
        let norm = theta.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm > 0.0) {
            return Err(Error::InvalidArgument("--theta must be nonzero".into()));
        }
        let unit: Vec<f64> = theta.iter().map(|v| v / norm).collect();
        let slice = gmm.slice(&unit)?;
        let n = a.hankel as usize;
        let seq: Vec<f64> = (0..=2 * n as u32).map(|k| univariate_gmm_moment(&slice, k)).collect();
        let mut text = String::from("order,sliced_moment\n");
        for (k, v) in seq.iter().enumerate() {
            text.push_str(&format!("{k},{}\n", ctx.num(*v)));
        }
        let ms = MomentSequence::new(seq)?;
        let h = hankel_psd_check(&ms, n)?;
        text.push_str(&format!(
            "# hankel n={n} psd={} min_eigenvalue={}\n",
            h.is_psd,
            ctx.num(h.min_eigenvalue)
        ));
        if n > 0 {
            let c = carleman_partial_sum(&ms.even_moments(), n)?;
            text.push_str(&format!("# carleman terms={n} partial_sum={}\n", ctx.num(c)));
        }
        text
    };
    emit(out, a.output.as_deref(), &text)
}

fn rates(ctx: &Ctx, a: &RatesArgs, out: &mut dyn std::io::Write) -> Result<()> {
    let f: RatesFile = read_json(&a.config)?;
    let config = RateStudyConfig {
        gmm: f
            .gmm
            .to_gmm()
            .map_err(|e| Error::Parse(format!("{}: gmm: {e}", a.config.display())))?,
        degree: f.degree,
        slice_counts: f.slice_counts,
        trials: f.trials,
        noise_scale: f.noise_scale,
        sample_size: f.sample_size,
        ridge: f.ridge,
        seed: a.seed.unwrap_or(f.seed),
        mode: f.mode,
        em: f.em,
    };
    let report = rate_study(&config)?;
    write_atomic(&a.output, &report.to_csv())?;
    if let Some(p) = &a.summary {
        let mut s = serde_json::to_string_pretty(&report).expect("report serializes");
        s.push('\n');
        write_atomic(p, &s)?;
    }
    let slope = report.slope.map_or("nan".into(), |s| ctx.num(s));
    let mut text = String::from("L,rmse_mean,rmse_std\n");
    for r in &report.rows {
        text.push_str(&format!(
            "{},{},{}\n",
            r.slices,
            ctx.num(r.rmse_mean),
            ctx.num(r.rmse_std)
        ));
    }
    text.push_str(&format!("slope {slope}\n"));
    emit(out, None, &text)
}

fn bench(a: &BenchArgs, out: &mut dyn std::io::Write) -> Result<()> {
    let mut config: BenchConfig = read_json(&a.config)?;
    if let Some(s) = a.seed {
        let n = config.seeds.len() as u64;
        config.seeds = (s..s + n).collect();
    }
    let report = run_benchmark(&config)?;
    write_atomic(&a.output, &report.to_csv())?;
    emit(out, None, &report.table())
}

fn directions(ctx: &Ctx, a: &DirectionsArgs, out: &mut dyn std::io::Write) -> Result<()> {
    let s = generate_directions(a.dim as usize, a.slices as usize, a.seed, a.scheme)?;
    let text = match a.format.as_str() {
        "json" => {
            let mut t = serde_json::to_string_pretty(&s).expect("slice set serializes");
            t.push('\n');
            t
        }
        "csv" => s
            .iter()
            .map(|t| t.iter().map(|v| ctx.num(*v)).collect::<Vec<_>>().join(",") + "\n")
            .collect(),
        other => return Err(Error::InvalidArgument(format!("--format: unknown format `{other}`"))),
    };
    emit(out, a.output.as_deref(), &text)
}

fn dispatch(cli: &Cli, out: &mut dyn std::io::Write) -> Result<()> {
    let ctx = Ctx {
        precision: cli.precision,
    };
    match &cli.command {
        Command::Describe(a) => describe(a),
        Command::Reconstruct(a) => reconstruct(&ctx, a),
        Command::Moments(a) => moments(&ctx, a, out),
        Command::Rates(a) => rates(&ctx, a, out),
        Command::Bench(a) => bench(a, out),
        Command::Directions(a) => directions(&ctx, a, out),
    }
}

/// Runs the CLI with `args` (including the program name) and returns the exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let mut stdout = std::io::stdout().lock();
    run_cli_with_output(args, &mut stdout)
}

/// Like [`run_cli`] with console output sent to `out`.
pub fn run_cli_with_output<I, T>(args: I, out: &mut dyn std::io::Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let result = match cli.threads {
        Some(t) => match rayon::ThreadPoolBuilder::new().num_threads(t as usize).build() {
            Ok(pool) => {
                let mut buf = Vec::new();
                let r = pool.install(|| dispatch(&cli, &mut buf));
                let _ = out.write_all(&buf);
                r
            }
            Err(e) => Err(Error::Numerical(format!("thread pool: {e}"))),
        },
        None => dispatch(&cli, out),
    };
    match result {
        Ok(()) => 0,
        Err(e @ Error::InvalidArgument(_)) => {
            eprintln!("error: {e}");
            1
        }
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}
