use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use leafcert::bsp::{build_tree, BspTree, BuildConfig, SplitStrategy, DEFAULT_EPSILON};
use leafcert::engines::Engine;
use leafcert::family::{parse_complex, parse_generator};
use leafcert::pipeline::{certify_main, CertifyOptions};
use leafcert::plan::plan;
use leafcert::poly::{parse_system, PolynomialSystem};
use leafcert::stream::{
    write_csol, FileStream, GeneratorStream, InMemoryStream, PointLedger, SolutionStream, CSOL_MAGIC,
};
use num_complex::Complex64;

#[derive(Parser, Debug)]
#[command(name = "leafcert", version, about = "Leaf-by-leaf certification of polynomial system solutions")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build the tree and certify every leaf.
    Certify(CertifyArgs),
    /// Print the planned part size and memory for a run.
    Plan(PlanArgs),
    /// Build the tree and print its dump.
    Tree(TreeArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum OnOff {
    On,
    Off,
}

impl OnOff {
    fn on(self) -> bool {
        matches!(self, OnOff::On)
    }
}

#[derive(Args, Debug)]
struct Inputs {
    /// Polynomial system file. Optional when the generator carries one.
    #[arg(long)]
    system: Option<PathBuf>,
    /// Candidate file (CSOL or text), `-` for stdin.
    #[arg(long, conflicts_with = "generator")]
    candidates: Option<String>,
    /// Inline generator spec, e.g. `product:a=1..10,seed=7`.
    #[arg(long)]
    generator: Option<String>,
}

#[derive(Args, Debug)]
struct BuildArgs {
    #[arg(long = "part-size", default_value_t = 64)]
    part_size: u64,
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    epsilon: f64,
    #[arg(long, default_value = "mean")]
    strategy: SplitStrategy,
    #[arg(long, value_enum, default_value_t = OnOff::On)]
    bitmask: OnOff,
    /// Seed for the random strategy.
    #[arg(long)]
    seed: Option<u64>,
    /// Known split point of the root, skipping the survey pass.
    #[arg(long = "root-split", allow_hyphen_values = true)]
    root_split: Option<f64>,
    #[arg(long = "depth-cap", default_value_t = 64)]
    depth_cap: u32,
}

impl BuildArgs {
    fn config(&self) -> BuildConfig {
        let mut strategy = self.strategy.clone();
        if let (SplitStrategy::Random { seed }, Some(s)) = (&mut strategy, self.seed) {
            *seed = s;
        }
        BuildConfig {
            k: self.part_size,
            epsilon: self.epsilon,
            strategy,
            bitmask: self.bitmask.on(),
            depth_cap: self.depth_cap,
            root_split: self.root_split,
        }
    }
}

#[derive(Args, Debug)]
struct CertifyArgs {
    #[command(flatten)]
    inputs: Inputs,
    #[command(flatten)]
    build: BuildArgs,
    #[arg(long, default_value = "krawczyk")]
    engine: Engine,
    /// Leaf-certification workers; 0 uses every core.
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Leaves above this many candidates are skipped (default 16k).
    #[arg(long = "oversize-cap")]
    oversize_cap: Option<u64>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Append measured counters to the report.
    #[arg(long = "count-calls")]
    count_calls: bool,
}

#[derive(Args, Debug)]
struct PlanArgs {
    #[arg(long)]
    d: u64,
    #[arg(long)]
    n: u64,
    #[arg(long, default_value = "krawczyk")]
    engine: Engine,
    #[arg(long, value_enum, default_value_t = OnOff::On)]
    bitmask: OnOff,
}

#[derive(Args, Debug)]
struct TreeArgs {
    #[command(flatten)]
    inputs: Inputs,
    #[command(flatten)]
    build: BuildArgs,
    /// List candidate indices per leaf.
    #[arg(long)]
    members: bool,
    #[arg(long)]
    report: Option<PathBuf>,
}

struct Fail(String);

impl<E: std::fmt::Display> From<E> for Fail {
    fn from(e: E) -> Self {
        Fail(e.to_string())
    }
}

fn parse_text_candidates(text: &str) -> Result<(usize, Vec<Vec<Complex64>>), Fail> {
    let mut points = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let p = body
            .split_whitespace()
            .map(parse_complex)
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| Fail(format!("candidates line {}: {e}", i + 1)))?;
        if let Some(first) = points.first() {
            let first: &Vec<Complex64> = first;
            if first.len() != p.len() {
                return Err(Fail(format!("candidates line {}: expected {} coordinates", i + 1, first.len())));
            }
        }
        points.push(p);
    }
    let n = points.first().map_or(1, Vec::len);
    Ok((n, points))
}

/// Holds the spool file alive as long as the stream uses it.
struct Source {
    stream: Box<dyn SolutionStream>,
    system: Option<PolynomialSystem>,
    _spool: Option<tempfile::TempPath>,
}

fn open_file(path: &Path, ledger: &PointLedger) -> Result<Box<dyn SolutionStream>, Fail> {
    let mut magic = [0u8; 4];
    let is_csol = fs::File::open(path)
        .and_then(|mut f| f.read_exact(&mut magic))
        .map(|_| &magic == CSOL_MAGIC)
        .unwrap_or(false);
    if is_csol {
        return Ok(Box::new(FileStream::open_with(path, Some(ledger))?));
    }
    let text = fs::read_to_string(path).map_err(|e| Fail(format!("{}: {e}", path.display())))?;
    let (n, points) = parse_text_candidates(&text)?;
    Ok(Box::new(InMemoryStream::new(n, points)?.with_ledger(ledger)))
}

fn open_inputs(inputs: &Inputs, ledger: &PointLedger, need_system: bool) -> Result<Source, Fail> {
    let mut system = match &inputs.system {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Fail(format!("{}: {e}", p.display())))?;
            Some(parse_system(&text).map_err(|e| Fail(format!("{}: {e}", p.display())))?)
        }
        None => None,
    };
    let mut spool = None;
    let stream: Box<dyn SolutionStream> = match (&inputs.candidates, &inputs.generator) {
        (Some(c), _) if c == "-" => {
            // stdin cannot be replayed, so it goes to a CSOL file first
            let mut raw = Vec::new();
            io::stdin().read_to_end(&mut raw)?;
            let tmp = tempfile::NamedTempFile::new()?.into_temp_path();
            if raw.starts_with(CSOL_MAGIC) {
                fs::write(&tmp, &raw)?;
            } else {
                let text = String::from_utf8(raw).map_err(|_| Fail("stdin is neither CSOL nor text".into()))?;
                let (n, points) = parse_text_candidates(&text)?;
                write_csol(&tmp, n, &points)?;
            }
            let s = FileStream::open_with(&tmp, Some(ledger))?;
            spool = Some(tmp);
            Box::new(s)
        }
        (Some(c), _) => open_file(Path::new(c), ledger)?,
        (None, Some(g)) => {
            let fam = parse_generator(g)?;
            if system.is_none() {
                system = fam.system();
            }
            Box::new(GeneratorStream::new(Arc::clone(&fam)).with_ledger(ledger))
        }
        (None, None) => return Err(Fail("one of --candidates or --generator is required".into())),
    };
    if need_system && system.is_none() {
        return Err(Fail("--system is required for these candidates".into()));
    }
    Ok(Source {
        stream,
        system,
        _spool: spool,
    })
}

fn emit(text: &str, path: Option<&Path>) -> Result<(), Fail> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| Fail(format!("{}: {e}", p.display()))),
        None => {
            let mut out = io::stdout().lock();
            out.write_all(text.as_bytes())?;
            Ok(out.flush()?)
        }
    }
}

fn certify(args: &CertifyArgs) -> Result<u8, Fail> {
    let ledger = PointLedger::new();
    let mut src = open_inputs(&args.inputs, &ledger, true)?;
    let f = src.system.take().expect("checked above");
    let opts = CertifyOptions {
        engine: args.engine,
        oversize_cap: args.oversize_cap,
        threads: args.threads,
        ledger: Some(ledger),
    };
    let (report, _) = certify_main(src.stream.as_mut(), &f, &args.build.config(), &opts)?;
    emit(&report.render(args.count_calls), args.report.as_deref())?;
    Ok(if report.tally.failures.is_empty() { 0 } else { 2 })
}

fn tree(args: &TreeArgs) -> Result<u8, Fail> {
    let ledger = PointLedger::new();
    let mut src = open_inputs(&args.inputs, &ledger, false)?;
    if let Some(f) = &src.system {
        if f.n_vars() != src.stream.dim() {
            return Err(Fail(format!(
                "system has {} variables but candidates have {} coordinates",
                f.n_vars(),
                src.stream.dim()
            )));
        }
    }
    let t: BspTree = build_tree(src.stream.as_mut(), &args.build.config())?;
    let text = if args.members {
        let m = t.members(src.stream.as_mut())?;
        t.dump_with_members(Some(&m))
    } else {
        t.dump()
    };
    emit(&text, args.report.as_deref())?;
    Ok(0)
}

fn run(cli: Cli) -> Result<u8, Fail> {
    match cli.cmd {
        Command::Certify(a) => certify(&a),
        Command::Plan(a) => {
            emit(&plan(a.d, a.n, a.engine, a.bitmask.on()).render(), None)?;
            Ok(0)
        }
        Command::Tree(a) => tree(&a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let msg = e.to_string();
            let line = msg.lines().next().unwrap_or("invalid arguments");
            eprintln!("{}", line.trim());
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(Fail(msg)) => {
            eprintln!("error: {}", msg.lines().next().unwrap_or(""));
            ExitCode::from(1)
        }
    }
}
