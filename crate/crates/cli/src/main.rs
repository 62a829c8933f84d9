use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use wlbmc::bench::{self, BenchMode};
use wlbmc::bmc::{self, Backend, Options, Outcome, UnrollMode};
use wlbmc::btor2::{parse, print, validate, Model};
use wlbmc::eval::{run_enumerated, InputLayout};
use wlbmc::riscu::corpus::{self, Sample};
use wlbmc::riscu::{assemble, generate_model, simulate, MachineConfig};
use wlbmc::smt::{SolverConfig, DEFAULT_SOLVER};

#[derive(Parser)]
#[command(name = "wlbmc", version, about = "Bounded model checking of BTOR2 machine models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a BTOR2 model and manifest from RISC-U assembly.
    Gen(GenArgs),
    /// Exhaustively evaluate all inputs (at most two bytes).
    Eval(EvalArgs),
    /// Convert small arrays into bitvector states.
    Convert(ConvertArgs),
    /// Bounded model checking.
    Check(CheckArgs),
    /// Write the k-unrolled combinational model.
    Unroll(UnrollArgs),
    /// Generate the corpus and run the benchmark matrix.
    Bench(BenchArgs),
}

#[derive(Args)]
struct GenArgs {
    /// Assembly file.
    #[arg(required_unless_present = "corpus")]
    input: Option<PathBuf>,
    /// Output name; writes <name>.btor2 and <name>.json.
    #[arg(short = 'o')]
    output: Option<PathBuf>,
    /// Write the whole benchmark corpus into this directory instead.
    #[arg(long, conflicts_with = "input")]
    corpus: Option<PathBuf>,
    #[arg(long = "bytestoread", default_value_t = 1)]
    bytes_to_read: u64,
    #[arg(long = "heapallowance", default_value_t = 4096)]
    heap_allowance: u64,
    #[arg(long = "stackallowance", default_value_t = 2048)]
    stack_allowance: u64,
    #[arg(long = "virtualaddressspace", default_value_t = 32)]
    virtual_address_space: u32,
    #[arg(long = "Pnobadexitcode")]
    no_bad_exit_code: bool,
    #[arg(long = "Pnodivisionbyzero")]
    no_division_by_zero: bool,
    #[arg(long = "Pnodivisionoverflow")]
    no_division_overflow: bool,
    #[arg(long = "Pnoinvalidaddresses")]
    no_invalid_addresses: bool,
    #[arg(long = "Pnosegfaults")]
    no_segfaults: bool,
    /// Include the exhaustive-evaluation verdict in the manifest.
    #[arg(long)]
    oracle: bool,
}

#[derive(Args)]
struct EvalArgs {
    model: PathBuf,
    #[arg(long, default_value_t = 100)]
    kmax: u32,
    /// Symbolic input bytes (default: all input cells).
    #[arg(long = "bytestoread")]
    bytes_to_read: Option<usize>,
}

#[derive(Args)]
struct ConvertArgs {
    model: PathBuf,
    #[arg(long, default_value_t = 8)]
    array: u32,
    #[arg(long = "recursive-array")]
    recursive_array: bool,
    #[arg(short = 'o')]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct CheckArgs {
    model: PathBuf,
    #[arg(long, default_value_t = 0)]
    kmin: u32,
    #[arg(long, default_value_t = 100)]
    kmax: u32,
    #[arg(long, default_value_t = 8)]
    propagate: u32,
    #[arg(long = "use-ROABVDD", conflicts_with = "cflobvdd")]
    roabvdd: bool,
    /// CFLOBVDD with input blocks of this many bits.
    #[arg(long = "use-CFLOBVDD", num_args = 0..=1, default_missing_value = "8", value_name = "BITS")]
    cflobvdd: Option<u32>,
    #[arg(long, default_value_t = 0)]
    array: u32,
    #[arg(long = "recursive-array")]
    recursive_array: bool,
    #[arg(long = "check-termination")]
    check_termination: bool,
    #[arg(long = "unconstraining-bad")]
    unconstraining_bad: bool,
    #[arg(long)]
    branching: bool,
    #[arg(long = "print-pc")]
    print_pc: bool,
    #[arg(long = "print-transition")]
    print_transition: bool,
    /// Solver command line; empty for none.
    #[arg(long, default_value = DEFAULT_SOLVER)]
    solver: String,
    /// Overrides the satisfiability command sent to the solver.
    #[arg(long = "check-sat")]
    check_sat: Option<String>,
    /// Seconds; 0 disables the limit.
    #[arg(long, default_value_t = 900)]
    timeout: u64,
    /// Symbolic input bytes (default: the manifest next to the model, else
    /// all input cells).
    #[arg(long = "bytestoread")]
    bytes_to_read: Option<usize>,
    /// Write the JSON report here ("-" for standard output).
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct UnrollArgs {
    model: PathBuf,
    #[arg(short = 'k', long)]
    k: u32,
    #[arg(long)]
    duplication: bool,
    #[arg(short = 'o')]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Directory for the corpus and bench.tsv.
    #[arg(long, default_value = "bench-out")]
    out: PathBuf,
    /// Seconds per run.
    #[arg(long, default_value_t = 900)]
    timeout: u64,
    #[arg(long, default_value = DEFAULT_SOLVER)]
    solver: String,
    /// Only these samples (comma separated).
    #[arg(long, value_delimiter = ',')]
    samples: Vec<String>,
    /// Only these modes: p0, p1, roabvdd-p8, cflobvdd-p8.
    #[arg(long, value_delimiter = ',')]
    modes: Vec<String>,
    /// Only these array bounds.
    #[arg(long, value_delimiter = ',')]
    arrays: Vec<u32>,
}

/// Single-dash long options (`-kmax 5`, `-Pnosegfaults`) become `--` options.
fn normalize_args(args: impl IntoIterator<Item = String>) -> Vec<String> {
    args.into_iter()
        .enumerate()
        .map(|(i, a)| {
            let long = a.len() > 2
                && a.starts_with('-')
                && !a.starts_with("--")
                && a[1..].chars().next().is_some_and(|c| c.is_ascii_alphabetic());
            if i > 0 && long {
                format!("-{a}")
            } else {
                a
            }
        })
        .collect()
}

fn read_model(path: &Path) -> Result<Model> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let model = parse(&text).with_context(|| format!("parsing {}", path.display()))?;
    let diags = validate(&model);
    if let Some(d) = diags.first() {
        bail!("{}: node {}: {} ({} problems)", path.display(), d.id, d.message, diags.len());
    }
    Ok(model)
}

fn write_or_print(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn gen(a: GenArgs) -> Result<ExitCode> {
    if let Some(dir) = a.corpus {
        for m in corpus::write_corpus(&dir, a.oracle)? {
            println!("{}\tbytes={}\tkmax={}", m.name, m.bytes_to_read, m.kmax);
        }
        return Ok(ExitCode::SUCCESS);
    }
    let input = a.input.expect("required by clap");
    let source = std::fs::read_to_string(&input).with_context(|| format!("reading {}", input.display()))?;
    let program = assemble(&source)?;
    let mut config = MachineConfig {
        bytes_to_read: a.bytes_to_read,
        heap_allowance: a.heap_allowance,
        stack_allowance: a.stack_allowance,
        virtual_address_space: a.virtual_address_space,
        ..Default::default()
    };
    let p = &mut config.properties;
    p.bad_exit_code &= !a.no_bad_exit_code;
    p.division_by_zero &= !a.no_division_by_zero;
    p.division_overflow &= !a.no_division_overflow;
    p.invalid_addresses &= !a.no_invalid_addresses;
    p.segfaults &= !a.no_segfaults;
    let model = generate_model(&program, &config)?;
    let zeros = vec![0u8; config.bytes_to_read as usize];
    let trace = simulate(&program, &config, &zeros, 100_000)?;
    let name = a.output.unwrap_or_else(|| input.with_extension(""));
    let sample = Sample {
        name: name.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default(),
        source,
        program,
        config,
        kmax: trace.pcs.len() as u32 + 2,
    };
    let manifest = corpus::manifest(&sample, a.oracle);
    std::fs::write(name.with_extension("btor2"), print(&model))?;
    std::fs::write(name.with_extension("json"), serde_json::to_string_pretty(&manifest)?)?;
    println!("wrote {} ({} nodes)", name.with_extension("btor2").display(), model.len());
    Ok(ExitCode::SUCCESS)
}

fn eval(a: EvalArgs) -> Result<ExitCode> {
    let model = read_model(&a.model)?;
    let bytes = a.bytes_to_read.or_else(|| manifest_bytes(&a.model));
    let layout = InputLayout::new(&model, bytes)?;
    let table = run_enumerated(&model, &layout, a.kmax)?;
    print!("{}", table.to_tsv());
    Ok(ExitCode::SUCCESS)
}

fn convert(a: ConvertArgs) -> Result<ExitCode> {
    let model = read_model(&a.model)?;
    let out = wlbmc::arrays::convert_arrays(&model, a.array, a.recursive_array)?;
    write_or_print(a.output.as_deref(), &print(&out))?;
    Ok(ExitCode::SUCCESS)
}

/// `bytesToRead` from a generator manifest next to the model, if any.
fn manifest_bytes(model: &Path) -> Option<usize> {
    let text = std::fs::read_to_string(model.with_extension("json")).ok()?;
    let json: serde_json::Value = serde_json::from_str(&text).ok()?;
    json.get("bytesToRead")?.as_u64().map(|b| b as usize)
}

fn check(a: CheckArgs) -> Result<ExitCode> {
    let model = read_model(&a.model)?;
    let mut solver = SolverConfig::from_template(&a.solver);
    if let Some(c) = a.check_sat {
        solver.check = c;
    }
    let backend = match a.cflobvdd {
        Some(b) if !a.roabvdd => Backend::Cflobvdd { block_bits: b },
        _ => Backend::Roabvdd,
    };
    let opts = Options {
        kmin: a.kmin,
        kmax: a.kmax,
        propagate: a.propagate,
        backend,
        array_bits: a.array,
        recursive_array: a.recursive_array,
        check_termination: a.check_termination,
        unconstraining_bad: a.unconstraining_bad,
        branching: a.branching,
        print_pc: a.print_pc,
        print_transition: a.print_transition,
        solver,
        timeout: (a.timeout > 0).then(|| Duration::from_secs(a.timeout)),
        bytes_to_read: a.bytes_to_read.or_else(|| manifest_bytes(&a.model)),
    };
    let report = bmc::check(&model, &opts)?;
    for line in &report.trace {
        println!("{line}");
    }
    for e in &report.events {
        println!("{e}");
    }
    match &report.outcome {
        Outcome::Completed => {}
        Outcome::Terminated(k) => println!("terminated: no state change at k={k}"),
        Outcome::ConstraintsFail(k) => println!("stopped: constraints fail for all inputs at k={k}"),
        Outcome::Timeout => eprintln!("timeout after {:.1}s", report.elapsed.as_secs_f64()),
        Outcome::SolverFailure(m) => eprintln!("solver failure: {m}"),
    }
    if report.partial {
        eprintln!("branching depth cap reached; report is partial");
    }
    if let Some(path) = &a.json {
        let text = serde_json::to_string_pretty(&report.to_json())?;
        if path.as_os_str() == "-" {
            println!("{text}");
        } else {
            std::fs::write(path, text)?;
        }
    }
    Ok(if report.is_aborted() {
        ExitCode::from(3)
    } else if report.events.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn unroll(a: UnrollArgs) -> Result<ExitCode> {
    let model = read_model(&a.model)?;
    let mode = if a.duplication { UnrollMode::Duplication } else { UnrollMode::Substitution };
    write_or_print(a.output.as_deref(), &print(&bmc::unroll(&model, a.k, mode)))?;
    Ok(ExitCode::SUCCESS)
}

fn bench(a: BenchArgs) -> Result<ExitCode> {
    corpus::write_corpus(&a.out, false)?;
    let samples: Vec<Sample> =
        corpus::samples().into_iter().filter(|s| a.samples.is_empty() || a.samples.contains(&s.name)).collect();
    let modes: Vec<BenchMode> = BenchMode::ALL
        .into_iter()
        .filter(|m| a.modes.is_empty() || a.modes.iter().any(|n| n == m.name()))
        .collect();
    let arrays = if a.arrays.is_empty() { bench::ARRAY_BOUNDS.to_vec() } else { a.arrays.clone() };
    println!("{}", bench::TSV_HEADER);
    let rows = bench::run_matrix(
        &samples,
        &modes,
        &arrays,
        &SolverConfig::from_template(&a.solver),
        Duration::from_secs(a.timeout),
        |r| println!("{}", r.tsv()),
    );
    std::fs::write(a.out.join("bench.tsv"), bench::to_tsv(&rows))?;
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse_from(normalize_args(std::env::args())) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Gen(a) => gen(a),
        Command::Eval(a) => eval(a),
        Command::Convert(a) => convert(a),
        Command::Check(a) => check(a),
        Command::Unroll(a) => unroll(a),
        Command::Bench(a) => bench(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            log::error!("{e:#}");
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::normalize_args;

    #[test]
    fn single_dash_long_flags() {
        let v: Vec<String> = ["wlbmc", "check", "m.btor2", "-kmax", "5", "-o", "x", "-Pnosegfaults", "--json", "-"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        assert_eq!(
            normalize_args(v),
            ["wlbmc", "check", "m.btor2", "--kmax", "5", "-o", "x", "--Pnosegfaults", "--json", "-"]
        );
    }
}
