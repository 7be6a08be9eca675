//! The `lllround` command line.
//!
//! Exit codes: 0 ok, 1 verification failure or internal fault, 2 usage or
//! malformed input, 3 infeasible input, 4 enumeration budget exceeded.
//! Every run that writes files also writes a [`RunManifest`] next to the
//! first of them; `lllround replay` re-runs it and compares digests.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::cip::{
    choose_alpha_beta, derandomize, derandomize_single, make_scheme, multicriteria_params, standard_round,
    CipResultFile, EstimatorState, RoundedSolution, DEFAULT_KMAX,
};
use crate::error::{Error, Result};
use crate::lp::{ingest_solution, solve_cip_lp, solve_mip_lp, solve_multi_cip_lp, LpReport, LpStatus, SolutionFile};
use crate::mip::{full_mip_pipeline, las_vegas_mip, BootstrapConfig, MipReportFile};
use crate::model::{
    gen_facility_location, gen_hypergraph_partition, gen_set_cover, parse_instance, serialize_instance,
    sparsity_stats_cip, CipInstance, FractionalSolution, Instance, MipInstance,
};
use crate::oracle::{
    replay_fixture, verify_anti_fkg, verify_branch_inequality, verify_delta_monotonicity, verify_extended_lll, verify_fkg,
    verify_phi_domination, verify_tail_domination, EnumerationBudget, Fixture, Verification, VerifyStatus,
};

/// Fixed bench CSV header.
pub const BENCH_HEADER: [&str; 12] = [
    "family", "size", "B", "seed", "m", "n", "a", "y_star", "value", "ratio", "envelope", "wall_ms",
];
/// Columns excluded from replay digests.
pub const BENCH_VOLATILE: [&str; 1] = ["wall_ms"];
pub const DEFAULT_ENVELOPE_CONST: f64 = 6.0;

#[derive(Debug, Parser)]
#[command(name = "lllround", version, about = "Randomized rounding for covering and minimax integer programs")]
pub struct Cli {
    /// Worker threads (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    pub workers: usize,
    /// Where to write the run manifest (default: next to the first output).
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a random instance.
    Gen(GenArgs),
    /// Solve the LP relaxation.
    Solve(SolveArgs),
    /// Round a fractional solution.
    Round(RoundArgs),
    /// Check inequalities by exhaustive enumeration.
    Verify(VerifyArgs),
    /// Seeded sweep writing one CSV row per instance.
    Bench(BenchArgs),
    /// Re-run a manifest and compare output digests.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    SetCover,
    Facility,
    Hypergraph,
}

impl Family {
    fn name(self) -> &'static str {
        match self {
            Family::SetCover => "set-cover",
            Family::Facility => "facility",
            Family::Hypergraph => "hypergraph",
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct GenParams {
    /// Elements (set cover), nodes (facility) or vertices (hypergraph).
    #[arg(long, default_value_t = 20)]
    pub size: usize,
    /// Demand B (CIP families).
    #[arg(long, default_value_t = 1)]
    pub demand: u32,
    /// Largest set; bounds the column sparsity of set cover.
    #[arg(long, default_value_t = 6)]
    pub max_set_size: usize,
    /// Number of sets (default: enough room for every element B+1 times).
    #[arg(long)]
    pub sets: Option<usize>,
    #[arg(long, default_value_t = 4)]
    pub max_in_degree: usize,
    /// Hyperedges (default: size).
    #[arg(long)]
    pub edges: Option<usize>,
    /// Vertex degree cap.
    #[arg(long, default_value_t = 4)]
    pub degree_cap: usize,
    #[arg(long, default_value_t = 2)]
    pub parts: usize,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, value_enum)]
    pub kind: Family,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub params: GenParams,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[arg(long)]
    pub instance: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Cost vector to minimise (CIP).
    #[arg(long, default_value_t = 0)]
    pub objective: usize,
    /// Minimise the largest of all objectives instead (CIP).
    #[arg(long)]
    pub multi: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Standard,
    Derandomize,
    Mip,
    Bootstrap,
}

#[derive(Debug, Args)]
pub struct RoundArgs {
    #[arg(long)]
    pub instance: PathBuf,
    #[arg(long, value_enum)]
    pub mode: Mode,
    /// Fractional solution file; the LP is solved when absent.
    #[arg(long)]
    pub solution: Option<PathBuf>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    /// Objective budgets, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub lambda: Option<Vec<f64>>,
    #[arg(long, default_value_t = DEFAULT_KMAX)]
    pub kmax: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 10_000)]
    pub max_tries: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, hide = true)]
    pub inject_fault: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Which {
    All,
    Phi,
    Fkg,
    Lll,
    Tail,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, conflicts_with = "fixture", required_unless_present = "fixture")]
    pub instance: Option<PathBuf>,
    /// Re-check a counterexample fixture.
    #[arg(long)]
    pub fixture: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Which::All)]
    pub which: Which,
    #[arg(long)]
    pub solution: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Random probability vectors / subsets per check.
    #[arg(long, default_value_t = 5)]
    pub samples: usize,
    #[arg(long, default_value_t = DEFAULT_KMAX)]
    pub kmax: usize,
    /// Directory for counterexample fixtures.
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    /// JSON report of every check.
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long, hide = true)]
    pub inject_fault: bool,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, value_enum)]
    pub family: Family,
    #[arg(long, value_delimiter = ',', default_value = "20")]
    pub sizes: Vec<usize>,
    /// `a..b` (half-open) or a comma list.
    #[arg(long, default_value = "0..5")]
    pub seeds: String,
    /// Demands B, comma separated (CIP families).
    #[arg(long, value_delimiter = ',', default_value = "1")]
    pub demands: Vec<u32>,
    #[arg(long, default_value_t = 6)]
    pub max_set_size: usize,
    #[arg(long, default_value_t = 4)]
    pub max_in_degree: usize,
    #[arg(long, default_value_t = 4)]
    pub degree_cap: usize,
    #[arg(long, default_value_t = 10_000)]
    pub max_tries: usize,
    #[arg(long, default_value_t = DEFAULT_ENVELOPE_CONST)]
    pub envelope_const: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    pub manifest_path: PathBuf,
}

/// One file written by a run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputRecord {
    pub path: String,
    pub sha256: String,
    /// CSV columns blanked before hashing (wall-clock values).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub volatile_columns: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// Arguments after the program name, without `--manifest`.
    pub argv: Vec<String>,
    pub seed: u64,
    pub workers: usize,
    pub instance_path: Option<String>,
    pub overrides: BTreeMap<String, String>,
    pub outputs: Vec<OutputRecord>,
    pub exit_code: i32,
    pub cwd: String,
    pub started_unix_ms: u64,
    pub finished_unix_ms: u64,
    pub version: String,
}

impl RunManifest {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(crate::model::json_error)
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Infeasible { .. } => 3,
        Error::Budget(_) => 4,
        Error::Internal(_) => 1,
        _ => 2,
    }
}

struct Output {
    path: PathBuf,
    volatile: Vec<String>,
}

#[derive(Default)]
struct Outcome {
    code: i32,
    outputs: Vec<Output>,
}

struct Io<'a> {
    out: &'a mut dyn Write,
    err: &'a mut dyn Write,
}

macro_rules! say {
    ($io:expr, $($t:tt)*) => { let _ = writeln!($io.out, $($t)*); };
}
macro_rules! warn {
    ($io:expr, $($t:tt)*) => { let _ = writeln!($io.err, $($t)*); };
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{text}");
                    0
                }
                _ => {
                    let _ = write!(err, "{text}");
                    2
                }
            };
        }
    };
    let argv = strip_manifest_flag(&args[1..]);
    let mut io = Io { out, err };
    if let Command::Replay(r) = &cli.command {
        return match replay(&r.manifest_path, &mut io) {
            Ok(code) => code,
            Err(e) => {
                warn!(io, "error: {e}");
                exit_code(&e)
            }
        };
    }
    let started = now_ms();
    let (workers, result) = match in_pool(cli.workers, |io| execute(&cli.command, io), &mut io) {
        Ok(v) => v,
        Err(e) => {
            warn!(io, "error: {e}");
            return 2;
        }
    };
    let outcome = match result {
        Ok(o) => o,
        Err(e) => {
            warn!(io, "error: {e}");
            return exit_code(&e);
        }
    };
    let target = cli
        .manifest
        .clone()
        .or_else(|| outcome.outputs.first().map(|o| manifest_path_for(&o.path)));
    if let Some(path) = target {
        let manifest = build_manifest(&cli.command, argv, workers, &outcome, started);
        match manifest.and_then(|m| write_file(&path, &(serde_json::to_string_pretty(&m).expect("manifest") + "\n"))) {
            Ok(()) => {}
            Err(e) => {
                warn!(io, "error writing manifest: {e}");
                return exit_code(&e);
            }
        }
    }
    outcome.code
}

fn strip_manifest_flag(args: &[OsString]) -> Vec<String> {
    let mut argv = Vec::new();
    let mut skip = false;
    for a in args {
        let s = a.to_string_lossy().into_owned();
        if skip {
            skip = false;
            continue;
        }
        if s == "--manifest" {
            skip = true;
            continue;
        }
        if s.starts_with("--manifest=") {
            continue;
        }
        argv.push(s);
    }
    argv
}

fn in_pool<T: Send>(
    workers: usize,
    f: impl FnOnce(&mut Io<'_>) -> T + Send,
    io: &mut Io<'_>,
) -> Result<(usize, T)> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Validation {
            field: "workers".into(),
            message: e.to_string(),
        })?;
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let result = pool.install(|| {
        f(&mut Io {
            out: &mut out,
            err: &mut err,
        })
    });
    let _ = io.out.write_all(&out);
    let _ = io.err.write_all(&err);
    Ok((pool.current_num_threads(), result))
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

pub fn manifest_path_for(output: &Path) -> PathBuf {
    let mut name = output.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".manifest.json");
    output.with_file_name(name)
}

fn build_manifest(cmd: &Command, argv: Vec<String>, workers: usize, outcome: &Outcome, started: u64) -> Result<RunManifest> {
    let (command, seed, instance_path, overrides) = describe(cmd);
    let outputs = outcome
        .outputs
        .iter()
        .map(|o| {
            Ok(OutputRecord {
                path: o.path.display().to_string(),
                sha256: digest_file(&o.path, &o.volatile)?,
                volatile_columns: o.volatile.clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RunManifest {
        command: command.into(),
        argv,
        seed,
        workers,
        instance_path: instance_path.map(|p| p.display().to_string()),
        overrides,
        outputs,
        exit_code: outcome.code,
        cwd: std::env::current_dir().map(|p| p.display().to_string()).unwrap_or_default(),
        started_unix_ms: started,
        finished_unix_ms: now_ms(),
        version: env!("CARGO_PKG_VERSION").into(),
    })
}

fn describe(cmd: &Command) -> (&'static str, u64, Option<&PathBuf>, BTreeMap<String, String>) {
    let mut o = BTreeMap::new();
    match cmd {
        Command::Gen(g) => {
            o.insert("kind".into(), g.kind.name().into());
            o.insert("size".into(), g.params.size.to_string());
            o.insert("demand".into(), g.params.demand.to_string());
            ("gen", g.seed, None, o)
        }
        Command::Solve(s) => ("solve", 0, Some(&s.instance), o),
        Command::Round(r) => {
            o.insert("mode".into(), format!("{:?}", r.mode).to_lowercase());
            if let Some(a) = r.alpha {
                o.insert("alpha".into(), a.to_string());
            }
            if let Some(b) = r.beta {
                o.insert("beta".into(), b.to_string());
            }
            if let Some(l) = &r.lambda {
                o.insert("lambda".into(), format!("{l:?}"));
            }
            o.insert("kmax".into(), r.kmax.to_string());
            ("round", r.seed, Some(&r.instance), o)
        }
        Command::Verify(v) => {
            o.insert("which".into(), format!("{:?}", v.which).to_lowercase());
            o.insert("samples".into(), v.samples.to_string());
            ("verify", v.seed, v.instance.as_ref().or(v.fixture.as_ref()), o)
        }
        Command::Bench(b) => {
            o.insert("family".into(), b.family.name().into());
            o.insert("seeds".into(), b.seeds.clone());
            ("bench", 0, None, o)
        }
        Command::Replay(_) => ("replay", 0, None, o),
    }
}

/// SHA-256 of the file, with `volatile` CSV columns blanked.
pub fn digest_file(path: &Path, volatile: &[String]) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let mut hasher = Sha256::new();
    if volatile.is_empty() {
        hasher.update(&bytes);
    } else {
        let mut reader = csv::Reader::from_reader(bytes.as_slice());
        let headers = reader.headers().map_err(csv_error)?.clone();
        let skip: Vec<bool> = headers.iter().map(|h| volatile.iter().any(|v| v == h)).collect();
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(&headers).map_err(csv_error)?;
        for rec in reader.records() {
            let rec = rec.map_err(csv_error)?;
            let row: Vec<&str> = rec.iter().zip(&skip).map(|(f, &s)| if s { "" } else { f }).collect();
            writer.write_record(&row).map_err(csv_error)?;
        }
        hasher.update(writer.into_inner().map_err(|e| Error::Io(e.to_string()))?);
    }
    Ok(hex::encode(hasher.finalize()))
}

fn csv_error(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

fn replay(path: &Path, io: &mut Io<'_>) -> Result<i32> {
    let manifest = RunManifest::parse(&read(path)?)?;
    let mut args = vec!["lllround".to_string()];
    args.extend(manifest.argv.iter().cloned());
    let cli = Cli::try_parse_from(&args).map_err(|e| Error::Validation {
        field: "argv".into(),
        message: e.to_string(),
    })?;
    if matches!(cli.command, Command::Replay(_)) {
        return Err(Error::Validation {
            field: "command".into(),
            message: "a manifest cannot replay another replay".into(),
        });
    }
    let (_, result) = in_pool(manifest.workers, |io| execute(&cli.command, io), io)?;
    let code = match result {
        Ok(o) => o.code,
        Err(e) => {
            warn!(io, "replayed command failed: {e}");
            exit_code(&e)
        }
    };
    let mut mismatches = 0;
    if code != manifest.exit_code {
        warn!(io, "exit code {code}, manifest recorded {}", manifest.exit_code);
        mismatches += 1;
    }
    for rec in &manifest.outputs {
        let now = digest_file(Path::new(&rec.path), &rec.volatile_columns)?;
        if now == rec.sha256 {
            say!(io, "match     {}", rec.path);
        } else {
            say!(io, "MISMATCH  {}", rec.path);
            mismatches += 1;
        }
    }
    Ok(if mismatches == 0 { 0 } else { 1 })
}

fn execute(cmd: &Command, io: &mut Io<'_>) -> Result<Outcome> {
    match cmd {
        Command::Gen(a) => cmd_gen(a, io),
        Command::Solve(a) => cmd_solve(a, io),
        Command::Round(a) => cmd_round(a, io),
        Command::Verify(a) => cmd_verify(a, io),
        Command::Bench(a) => cmd_bench(a, io),
        Command::Replay(_) => unreachable!("handled by run"),
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    let io_err = |e: std::io::Error| Error::Io(format!("{}: {e}", path.display()));
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err)?;
    }
    fs::write(path, text).map_err(io_err)
}

fn load_instance(path: &Path) -> Result<Instance> {
    parse_instance(&read(path)?)
}

fn default_sets(size: usize, demand: u32, max_set_size: usize) -> usize {
    let need = size * (demand as usize + 1);
    (need * 3)
        .div_ceil(2 * max_set_size.max(1))
        .max(size)
        .max(demand as usize + 1)
}

/// Instance of `family` built from `params` and `seed`.
pub fn generate(family: Family, params: &GenParams, seed: u64) -> Result<Instance> {
    Ok(match family {
        Family::SetCover => {
            let sets = params
                .sets
                .unwrap_or_else(|| default_sets(params.size, params.demand, params.max_set_size));
            Instance::Cip(gen_set_cover(params.size, sets, params.max_set_size, params.demand, seed)?)
        }
        Family::Facility => Instance::Cip(gen_facility_location(params.size, params.max_in_degree, params.demand, seed)?),
        Family::Hypergraph => Instance::Mip(gen_hypergraph_partition(
            params.size,
            params.edges.unwrap_or(params.size),
            params.degree_cap,
            params.parts,
            seed,
        )?),
    })
}

fn cmd_gen(a: &GenArgs, io: &mut Io<'_>) -> Result<Outcome> {
    let inst = generate(a.kind, &a.params, a.seed)?;
    write_file(&a.out, &(serialize_instance(&inst) + "\n"))?;
    let s = inst.sparsity_stats();
    let (m, n) = match &inst {
        Instance::Cip(c) => (c.rows(), c.cols()),
        Instance::Mip(m) => (m.rows(), m.cols()),
    };
    say!(io, "kind      {}", a.kind.name());
    say!(io, "m x n     {m} x {n}");
    say!(io, "a, g, t   {}, {}, {}", s.a, s.g, s.t);
    say!(io, "wrote     {}", a.out.display());
    Ok(Outcome {
        code: 0,
        outputs: vec![Output {
            path: a.out.clone(),
            volatile: vec![],
        }],
    })
}

fn require_optimal(report: LpReport, worst: impl FnOnce(&[f64]) -> (usize, f64)) -> Result<LpReport> {
    match report.status {
        LpStatus::Optimal => Ok(report),
        LpStatus::Infeasible => {
            let (row, violation) = worst(&report.x.x);
            Err(Error::Infeasible { row, violation })
        }
        other => Err(Error::Internal(format!("LP solver stopped with status {other:?}"))),
    }
}

fn cip_lp(inst: &CipInstance, multi: bool, objective: usize) -> Result<LpReport> {
    let r = if multi {
        solve_multi_cip_lp(inst)?
    } else {
        solve_cip_lp(inst, objective)?
    };
    require_optimal(r, |x| inst.worst_violation(x))
}

fn mip_lp(inst: &MipInstance) -> Result<LpReport> {
    require_optimal(solve_mip_lp(inst)?, |x| inst.worst_group_deviation(x))
}

fn cmd_solve(a: &SolveArgs, io: &mut Io<'_>) -> Result<Outcome> {
    let inst = load_instance(&a.instance)?;
    let r = match &inst {
        Instance::Cip(c) => cip_lp(c, a.multi, a.objective)?,
        Instance::Mip(m) => mip_lp(m)?,
    };
    let file = SolutionFile {
        x: r.x.x.clone(),
        objective: r.objective,
    };
    write_file(&a.out, &(file.to_json() + "\n"))?;
    say!(io, "status      optimal");
    say!(io, "y*          {:.9}", r.objective);
    say!(io, "iterations  {}", r.iterations);
    say!(io, "wrote       {}", a.out.display());
    Ok(Outcome {
        code: 0,
        outputs: vec![Output {
            path: a.out.clone(),
            volatile: vec![],
        }],
    })
}

fn fractional(inst: &Instance, solution: Option<&PathBuf>, multi: bool) -> Result<FractionalSolution> {
    if let Some(path) = solution {
        let file = SolutionFile::parse(&read(path)?)?;
        return ingest_solution(inst, &file.x);
    }
    Ok(match inst {
        Instance::Cip(c) => cip_lp(c, multi, 0)?.x,
        Instance::Mip(m) => mip_lp(m)?.x,
    })
}

fn need_cip(inst: &Instance, what: &str) -> Result<CipInstance> {
    match inst {
        Instance::Cip(c) => Ok(c.clone()),
        Instance::Mip(_) => Err(Error::Validation {
            field: "instance".into(),
            message: format!("{what} needs a CIP instance"),
        }),
    }
}

fn need_mip(inst: &Instance, what: &str) -> Result<MipInstance> {
    match inst {
        Instance::Mip(m) => Ok(m.clone()),
        Instance::Cip(_) => Err(Error::Validation {
            field: "instance".into(),
            message: format!("{what} needs a MIP instance"),
        }),
    }
}

fn ratio(value: f64, y_star: f64) -> f64 {
    if y_star > 0.0 {
        value / y_star
    } else if value <= 0.0 {
        1.0
    } else {
        f64::INFINITY
    }
}

fn cmd_round(a: &RoundArgs, io: &mut Io<'_>) -> Result<Outcome> {
    let inst = load_instance(&a.instance)?;
    let json = match a.mode {
        Mode::Standard | Mode::Derandomize => round_cip(a, &need_cip(&inst, "this mode")?, &inst, io)?,
        Mode::Mip | Mode::Bootstrap => round_mip(a, &need_mip(&inst, "this mode")?, &inst, io)?,
    };
    let mut outcome = Outcome::default();
    if let Some(out) = &a.out {
        write_file(out, &(json + "\n"))?;
        say!(io, "wrote       {}", out.display());
        outcome.outputs.push(Output {
            path: out.clone(),
            volatile: vec![],
        });
    }
    Ok(outcome)
}

fn round_cip(a: &RoundArgs, cip: &CipInstance, inst: &Instance, io: &mut Io<'_>) -> Result<String> {
    let ell = cip.criteria();
    let multi = ell > 1;
    let x = fractional(inst, a.solution.as_ref(), multi)?;
    let y: Vec<f64> = (0..ell).map(|i| cip.objective(i, &x.x)).collect();
    let stats = sparsity_stats_cip(cip);
    let (da, db) = choose_alpha_beta(stats.a, cip.min_demand());
    let (alpha, beta) = (a.alpha.unwrap_or(da), a.beta.unwrap_or(db));
    let default_lambdas = || -> Vec<f64> {
        (0..ell)
            .map(|i| alpha * beta * if i == 0 { y[0] } else { y[i].max(1.0) })
            .collect()
    };
    let lambdas = match &a.lambda {
        Some(l) if l.len() != ell => {
            return Err(Error::Dimension {
                expected: ell,
                actual: l.len(),
            })
        }
        Some(l) => l.clone(),
        None => default_lambdas(),
    };
    let sol: RoundedSolution = match a.mode {
        Mode::Standard => standard_round(cip, &make_scheme(cip, &x, alpha)?, a.seed),
        _ => {
            let use_multi = multi && a.alpha.is_none() && a.lambda.is_none() && a.beta.is_none();
            let (alpha, lambdas, ks) = if use_multi {
                let p = multicriteria_params(cip, &x)?;
                for w in &p.warnings {
                    warn!(io, "warning: {w}");
                }
                (p.alpha, p.lambdas, p.ks)
            } else {
                (alpha, lambdas.clone(), vec![1; ell])
            };
            let scheme = make_scheme(cip, &x, alpha)?;
            let mut state = EstimatorState::standard(cip, &scheme, lambdas.clone(), ks, a.kmax)?;
            if a.inject_fault {
                state = state.with_fault_injection();
            }
            let sol = derandomize(&mut state, None)?;
            report_cip(io, "derandomize", &y, &sol, &lambdas, alpha);
            return Ok(serde_json::to_string(&CipResultFile::new(&sol, lambdas)).expect("result"));
        }
    };
    report_cip(io, "standard", &y, &sol, &lambdas, alpha);
    Ok(serde_json::to_string(&CipResultFile::new(&sol, lambdas)).expect("result"))
}

fn report_cip(io: &mut Io<'_>, mode: &str, y: &[f64], sol: &RoundedSolution, lambdas: &[f64], alpha: f64) {
    say!(io, "mode        {mode}");
    say!(io, "alpha       {alpha:.6}");
    for (i, (yi, v)) in y.iter().zip(&sol.objective_values).enumerate() {
        say!(
            io,
            "objective {i}  y* = {yi:.6}  value = {v:.6}  target = {:.6}  ratio = {:.6}",
            lambdas[i],
            ratio(*v, *yi)
        );
    }
    say!(io, "feasible    {}", sol.feasible);
    if !sol.phi_trace.is_empty() {
        say!(io, "phi evals   {}", sol.phi_evaluations);
    }
}

fn round_mip(a: &RoundArgs, mip: &MipInstance, inst: &Instance, io: &mut Io<'_>) -> Result<String> {
    let x = fractional(inst, a.solution.as_ref(), false)?;
    let y = mip.max_load(&x.x);
    if a.mode == Mode::Mip {
        let lv = las_vegas_mip(mip, &x, a.max_tries, a.seed)?;
        say!(io, "mode        mip");
        say!(io, "y*          {y:.6}");
        say!(io, "value       {}", lv.best_value);
        say!(io, "target      {:.6}  (k = {}, t = {})", lv.target.target, lv.target.k, lv.target.t);
        say!(io, "ratio       {:.6}", ratio(lv.best_value, y));
        say!(io, "trials_used {}", lv.trials_used);
        if !lv.success {
            warn!(io, "warning: target not reached within {} trials", a.max_tries);
        }
        return Ok(json!({
            "value": lv.best_value,
            "y_star": y,
            "target": lv.target.target,
            "k": lv.target.k,
            "t": lv.target.t,
            "trials_used": lv.trials_used,
            "best_trial": lv.best_trial,
            "success": lv.success,
            "slots": lv.best.slots,
        })
        .to_string());
    }
    let r = full_mip_pipeline(mip, &x, &BootstrapConfig::default(), a.max_tries, a.seed)?;
    say!(io, "mode        bootstrap");
    say!(io, "y*          {y:.6}");
    say!(io, "value       {}", r.value);
    say!(io, "target      {:.6}", r.target_t42);
    say!(io, "reduced tgt {:.6}", r.target_t44);
    say!(io, "t trace     {:?}", r.t_trace);
    say!(io, "stop        {:?}", r.bootstrap.stop);
    say!(io, "trials_used {}", r.trials_used);
    if !r.success {
        warn!(io, "warning: target not reached within {} trials", a.max_tries);
    }
    let mut doc = serde_json::to_value(MipReportFile::from(&r)).expect("report");
    doc["slots"] = json!(r.selection.slots);
    Ok(doc.to_string())
}

fn random_subset(rng: &mut ChaCha8Rng, n: usize, max: usize) -> Vec<usize> {
    let size = rng.gen_range(0..=max.min(n));
    let mut all: Vec<usize> = (0..n).collect();
    for i in 0..size {
        let j = rng.gen_range(i..n);
        all.swap(i, j);
    }
    let mut s = all[..size].to_vec();
    s.sort_unstable();
    s
}

struct Checks<'a> {
    results: Vec<Verification>,
    out_dir: &'a Path,
    written: Vec<Output>,
}

impl Checks<'_> {
    fn push(&mut self, io: &mut Io<'_>, v: Verification) -> Result<()> {
        let label = match v.status {
            VerifyStatus::Holds => "ok",
            VerifyStatus::Fails => "FAIL",
            VerifyStatus::HypothesisUnmet => "hypothesis-unmet",
            VerifyStatus::Vacuous => "vacuous",
        };
        say!(io, "{:<20} {:<17} lhs = {:.12e}  rhs = {:.12e}", v.claim, label, v.lhs, v.rhs);
        if let Some(f) = &v.fixture {
            let path = self
                .out_dir
                .join(format!("counterexample-{}-{}.json", v.claim, self.written.len()));
            write_file(&path, &(f.to_json() + "\n"))?;
            warn!(io, "counterexample written to {}", path.display());
            self.written.push(Output { path, volatile: vec![] });
        }
        self.results.push(v);
        Ok(())
    }
}

fn cmd_verify(a: &VerifyArgs, io: &mut Io<'_>) -> Result<Outcome> {
    let budget = EnumerationBudget::from_env()?;
    let mut checks = Checks {
        results: Vec::new(),
        out_dir: &a.out_dir,
        written: Vec::new(),
    };
    if let Some(path) = &a.fixture {
        let f = Fixture::parse(&read(path)?)?;
        let mut v = replay_fixture(&f, &budget)?;
        // The input already is the fixture.
        v.fixture = None;
        checks.push(io, v)?;
    } else {
        let inst = load_instance(a.instance.as_ref().expect("clap requires one"))?;
        let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
        match &inst {
            Instance::Cip(cip) => {
                if a.which == Which::Lll {
                    need_mip(&inst, "--which lll")?;
                }
                verify_cip(a, cip, &inst, &budget, &mut rng, &mut checks, io)?;
            }
            Instance::Mip(mip) => {
                if matches!(a.which, Which::Phi | Which::Fkg) {
                    need_cip(&inst, "--which phi/fkg")?;
                }
                if matches!(a.which, Which::All | Which::Lll) {
                    let x = fractional(&inst, a.solution.as_ref(), false)?;
                    for k in 1..=3 {
                        checks.push(io, verify_extended_lll(mip, &x, k, &budget)?)?;
                    }
                }
            }
        }
        if matches!(a.which, Which::All | Which::Tail) {
            for _ in 0..a.samples {
                let n = rng.gen_range(1..=12);
                let values: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..=1.0)).collect();
                let probs: Vec<f64> = (0..n).map(|_| rng.gen_range(0.01..0.99)).collect();
                let delta = rng.gen_range(0.1..2.0);
                let (x, y) = verify_tail_domination(&values, &probs, delta, &budget)?;
                checks.push(io, x)?;
                checks.push(io, y)?;
            }
        }
    }
    let failed = checks.results.iter().filter(|v| v.status == VerifyStatus::Fails).count();
    say!(io, "checks      {}  failed {}", checks.results.len(), failed);
    let mut outputs = checks.written;
    if let Some(report) = &a.report {
        let rows: Vec<_> = checks
            .results
            .iter()
            .map(|v| json!({"claim": v.claim, "lhs": v.lhs, "rhs": v.rhs, "status": v.status}))
            .collect();
        write_file(report, &(serde_json::to_string_pretty(&rows).expect("report") + "\n"))?;
        outputs.insert(
            0,
            Output {
                path: report.clone(),
                volatile: vec![],
            },
        );
    }
    Ok(Outcome {
        code: if failed == 0 { 0 } else { 1 },
        outputs,
    })
}

fn verify_cip(
    a: &VerifyArgs,
    cip: &CipInstance,
    inst: &Instance,
    budget: &EnumerationBudget,
    rng: &mut ChaCha8Rng,
    checks: &mut Checks<'_>,
    io: &mut Io<'_>,
) -> Result<()> {
    let x = fractional(inst, a.solution.as_ref(), cip.criteria() > 1)?;
    let stats = sparsity_stats_cip(cip);
    let (alpha, beta) = choose_alpha_beta(stats.a, cip.min_demand());
    let scheme = make_scheme(cip, &x, alpha)?;
    let lambdas: Vec<f64> = (0..cip.criteria())
        .map(|i| {
            let y = cip.objective(i, &x.x);
            alpha * beta * if i == 0 { y } else { y.max(1.0) }
        })
        .collect();
    let ks = vec![1; cip.criteria()];
    let free: Vec<usize> = (0..cip.cols()).filter(|&j| scheme.frac[j] > 0.0).collect();
    if matches!(a.which, Which::All | Which::Phi) {
        let mut state = EstimatorState::standard(cip, &scheme, lambdas.clone(), ks.clone(), a.kmax)?;
        if a.inject_fault {
            state = state.with_fault_injection();
        }
        checks.push(io, verify_phi_domination(&state, budget)?)?;
        for &j in &free {
            checks.push(io, verify_branch_inequality(&state, j)?)?;
        }
        if let Some(&j) = free.first() {
            let all: Vec<usize> = (0..cip.rows()).collect();
            checks.push(io, verify_delta_monotonicity(&state, j, &all[..all.len() / 2], &all)?)?;
        }
        for _ in 0..a.samples {
            let mut p = scheme.frac.clone();
            for &j in &free {
                p[j] = match rng.gen_range(0..4) {
                    0 => 0.0,
                    1 => 1.0,
                    _ => rng.gen::<f64>(),
                };
            }
            let mut st = EstimatorState::new(cip, &scheme, p, lambdas.clone(), ks.clone(), a.kmax)?;
            if a.inject_fault {
                st = st.with_fault_injection();
            }
            checks.push(io, verify_phi_domination(&st, budget)?)?;
        }
    }
    if matches!(a.which, Which::All | Which::Fkg) {
        let m = cip.rows();
        for _ in 0..a.samples {
            let rows = random_subset(rng, m, m);
            let cut = rng.gen_range(0..=rows.len());
            let b3 = random_subset(rng, cip.cols(), 2);
            checks.push(io, verify_fkg(cip, &scheme, &scheme.frac, &rows[..cut], &rows[cut..], &b3, budget)?)?;
            let cols = random_subset(rng, free.len(), 3).into_iter().map(|i| free[i]).collect::<Vec<_>>();
            checks.push(io, verify_anti_fkg(cip, &scheme, &scheme.frac, &cols, budget)?)?;
        }
    }
    Ok(())
}

/// Seeds from `a..b` or `s1,s2,...`.
pub fn parse_seeds(text: &str) -> Result<Vec<u64>> {
    let bad = || Error::Validation {
        field: "seeds".into(),
        message: format!("`{text}` is neither a..b nor a comma list"),
    };
    if let Some((lo, hi)) = text.split_once("..") {
        let lo: u64 = lo.trim().parse().map_err(|_| bad())?;
        let hi: u64 = hi.trim().parse().map_err(|_| bad())?;
        return Ok((lo..hi).collect());
    }
    text.split(',').map(|s| s.trim().parse().map_err(|_| bad())).collect()
}

/// 1 + C·max{L, √L} with L = ln(a+1)/B.
pub fn gap_envelope(a: usize, demand: f64, c: f64) -> f64 {
    let l = ((a + 1) as f64).ln() / demand;
    1.0 + c * l.max(l.sqrt())
}

/// One bench row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub family: String,
    pub size: usize,
    #[serde(rename = "B")]
    pub demand: u32,
    pub seed: u64,
    pub m: usize,
    pub n: usize,
    pub a: usize,
    pub y_star: f64,
    pub value: f64,
    pub ratio: f64,
    pub envelope: f64,
    pub wall_ms: f64,
}

/// Runs the derandomizer (CIP families) or the Las Vegas loop (hypergraph)
/// on one generated instance.
pub fn bench_one(family: Family, params: &GenParams, seed: u64, max_tries: usize, envelope_const: f64) -> Result<BenchRow> {
    let start = Instant::now();
    let inst = generate(family, params, seed)?;
    let stats = inst.sparsity_stats();
    let (m, n, y, value, envelope) = match &inst {
        Instance::Cip(c) => {
            let x = cip_lp(c, false, 0)?.x;
            let (sol, sp) = derandomize_single(c, &x, None, None)?;
            (
                c.rows(),
                c.cols(),
                sp.y_star,
                sol.objective_values[0],
                gap_envelope(stats.a, c.min_demand(), envelope_const),
            )
        }
        Instance::Mip(mip) => {
            let x = mip_lp(mip)?.x;
            let y = mip.max_load(&x.x);
            let lv = las_vegas_mip(mip, &x, max_tries, seed)?;
            (mip.rows(), mip.cols(), y, lv.best_value, ratio(lv.target.target.ceil(), y))
        }
    };
    Ok(BenchRow {
        family: family.name().into(),
        size: params.size,
        demand: params.demand,
        seed,
        m,
        n,
        a: stats.a,
        y_star: y,
        value,
        ratio: ratio(value, y),
        envelope,
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

fn cmd_bench(a: &BenchArgs, io: &mut Io<'_>) -> Result<Outcome> {
    let seeds = parse_seeds(&a.seeds)?;
    let demands: &[u32] = if a.family == Family::Hypergraph { &[0] } else { &a.demands };
    let mut writer = csv::Writer::from_path(&a.out).map_err(csv_error)?;
    let mut by_b: BTreeMap<u32, (f64, usize)> = BTreeMap::new();
    for &size in &a.sizes {
        for &b in demands {
            for &seed in &seeds {
                let params = GenParams {
                    size,
                    demand: b.max(1),
                    max_set_size: a.max_set_size,
                    sets: None,
                    max_in_degree: a.max_in_degree.max(b as usize),
                    edges: None,
                    degree_cap: a.degree_cap,
                    parts: 2,
                };
                let mut row = bench_one(a.family, &params, seed, a.max_tries, a.envelope_const)?;
                row.demand = b;
                let e = by_b.entry(b).or_default();
                e.0 += row.ratio;
                e.1 += 1;
                writer.serialize(&row).map_err(csv_error)?;
            }
        }
    }
    writer.flush()?;
    say!(io, "{:>4}  {:>10}  {:>6}", "B", "mean ratio", "count");
    for (b, (sum, cnt)) in &by_b {
        say!(io, "{b:>4}  {:>10.6}  {cnt:>6}", sum / *cnt as f64);
    }
    say!(io, "wrote {}", a.out.display());
    Ok(Outcome {
        code: 0,
        outputs: vec![Output {
            path: a.out.clone(),
            volatile: BENCH_VOLATILE.iter().map(|s| s.to_string()).collect(),
        }],
    })
}
