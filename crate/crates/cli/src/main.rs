use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use pdl_core::asm::{parse_overrides, Assembler, Overrides};
use pdl_core::cas::{cosim, Cas};
use pdl_core::decode::{build_decode_tree, Table};
use pdl_core::frontend::{self, SpecModel};
use pdl_core::ir::{build_all, export_dot, export_text};
use pdl_core::iss::{Isa, Iss, StopReason};
use pdl_core::mia::{report, resolve_named};
use pdl_core::patterns::emit_patterns;
use pdl_core::value::Value;

#[derive(Parser)]
#[command(name = "pdl", version, about = "Processor description toolkit")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Elaborate a specification and report its instruction count
    Check { spec: PathBuf },
    /// Print the specification after macro expansion
    Expand {
        spec: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Print the behavior graph of each instruction
    DumpIr {
        spec: PathBuf,
        /// Only this instruction
        #[arg(long)]
        instr: Option<String>,
        /// Graphviz output instead of text
        #[arg(long)]
        dot: bool,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Print the decoder table (name, mask, value)
    GenDecoder {
        spec: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Assemble one statement per line into a flat little-endian binary
    Asm {
        #[arg(long)]
        spec: PathBuf,
        input: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        /// Listing file (address, word, source line)
        #[arg(long)]
        listing: Option<PathBuf>,
        #[arg(long, value_parser = parse_num, default_value = "0")]
        base: u128,
        /// Per-instruction templates, `NAME = template` per line
        #[arg(long)]
        overrides: Option<PathBuf>,
    },
    /// Disassemble a flat binary
    Disasm {
        #[arg(long)]
        spec: PathBuf,
        bin: PathBuf,
        #[arg(long, value_parser = parse_num, default_value = "0")]
        base: u128,
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[arg(long)]
        overrides: Option<PathBuf>,
    },
    /// Run a program on the instruction-set simulator
    Run {
        #[command(flatten)]
        prog: Program,
        #[arg(long, default_value_t = 10_000_000)]
        max_steps: u64,
        /// Trace file, `-` for standard output
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Decode every instruction again instead of caching
        #[arg(long)]
        no_cache: bool,
    },
    /// Run a program on the cycle-accurate pipeline simulator
    Simulate {
        #[command(flatten)]
        prog: OptProgram,
        #[arg(long)]
        mia: String,
        #[arg(long, default_value_t = 10_000_000)]
        max_cycles: u64,
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Print cycles, retired, stalls and flushes as key=value lines
        #[arg(long)]
        stats: bool,
        /// Print the synthesized pipeline
        #[arg(long)]
        dump_pipeline: bool,
    },
    /// Compare pipeline and instruction-set simulator traces
    Cosim {
        #[command(flatten)]
        prog: Program,
        #[arg(long)]
        mia: String,
        #[arg(long, default_value_t = 10_000_000)]
        max_cycles: u64,
    },
    /// Emit instruction-selection tree patterns
    Patterns {
        spec: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Program {
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    bin: PathBuf,
    /// Load address; defaults to the start address
    #[arg(long, value_parser = parse_num)]
    base: Option<u128>,
    #[arg(long, value_parser = parse_num)]
    start: Option<u128>,
    #[arg(long, value_parser = parse_num)]
    stop: Option<u128>,
}

#[derive(Args)]
struct OptProgram {
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    bin: Option<PathBuf>,
    #[arg(long, value_parser = parse_num)]
    base: Option<u128>,
    #[arg(long, value_parser = parse_num)]
    start: Option<u128>,
    #[arg(long, value_parser = parse_num)]
    stop: Option<u128>,
}

fn parse_num(s: &str) -> Result<u128, String> {
    let t: String = s.chars().filter(|c| *c != '_' && *c != '\'').collect();
    let r = match t.strip_prefix("0x").or_else(|| t.strip_prefix("0X")) {
        Some(h) => u128::from_str_radix(h, 16),
        None => t.parse(),
    };
    r.map_err(|e| format!("invalid number `{s}`: {e}"))
}

/// A failed command: exit status and the lines to print.
struct Failure {
    code: u8,
    lines: Vec<String>,
}

fn fail(msg: impl std::fmt::Display) -> Failure {
    Failure { code: 1, lines: msg.to_string().lines().map(String::from).collect() }
}

type Res<T> = Result<T, Failure>;

fn load(path: &Path) -> Res<SpecModel> {
    let m = frontend::load_file(path).map_err(|e| Failure {
        code: 1,
        lines: e.diags.iter().map(|d| d.to_string()).collect(),
    })?;
    for w in &m.warnings {
        eprintln!("warning: {w}");
    }
    Ok(m)
}

fn read(path: &Path) -> Res<Vec<u8>> {
    std::fs::read(path).map_err(|e| fail(format!("cannot read `{}`: {e}", path.display())))
}

fn read_text(path: &Path) -> Res<String> {
    String::from_utf8(read(path)?).map_err(|_| fail(format!("`{}` is not UTF-8", path.display())))
}

/// Writes through a temporary file in the target directory and renames it.
fn write_atomic(path: &Path, data: &[u8]) -> Res<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let err = |e: &dyn std::fmt::Display| fail(format!("cannot write `{}`: {e}", path.display()));
    let mut f = tempfile::NamedTempFile::new_in(dir).map_err(|e| err(&e))?;
    f.write_all(data).map_err(|e| err(&e))?;
    f.persist(path).map_err(|e| err(&e.error))?;
    Ok(())
}

fn emit(output: Option<&Path>, text: &str) -> Res<()> {
    match output {
        Some(p) if p != Path::new("-") => write_atomic(p, text.as_bytes()),
        _ => {
            print!("{text}");
            Ok(())
        }
    }
}

fn overrides(path: Option<&Path>) -> Res<Overrides> {
    match path {
        Some(p) => parse_overrides(&read_text(p)?).map_err(|e| fail(format!("{}: {e}", p.display()))),
        None => Ok(Overrides::default()),
    }
}

fn assembler<'m>(m: &'m SpecModel, ov: Option<&Path>) -> Res<Assembler<'m>> {
    Assembler::with_overrides(m, &overrides(ov)?).map_err(fail)
}

struct Placement {
    image: Vec<u8>,
    base: u128,
    start: u128,
    stop: Option<u128>,
}

fn place(m: &SpecModel, bin: &Path, base: Option<u128>, start: Option<u128>, stop: Option<u128>) -> Res<Placement> {
    let p = m.processor.as_ref();
    let start = start.or(p.and_then(|p| p.start)).or(base).unwrap_or(0);
    Ok(Placement {
        image: read(bin)?,
        base: base.unwrap_or(start),
        start,
        stop: stop.or(p.and_then(|p| p.stop_pc)),
    })
}

fn run(cmd: Cmd) -> Res<()> {
    match cmd {
        Cmd::Check { spec } => {
            let m = load(&spec)?;
            let graphs = build_all(&m);
            build_decode_tree(&m).map_err(fail)?;
            for mia in &m.mias {
                resolve_named(&m, &mia.name, &graphs).map_err(|e| fail(format!("{}: {e}", mia.name)))?;
            }
            println!("ok: {} instructions", m.instructions.len());
        }
        Cmd::Expand { spec, output } => {
            let ast = frontend::parse_file(&spec).map_err(fail)?;
            let ex = frontend::expand_macros(&ast).map_err(|e| fail(e.with_file(&spec.display().to_string())))?;
            emit(output.as_deref(), &frontend::print::print_spec(&ex))?;
        }
        Cmd::DumpIr { spec, instr, dot, output } => {
            let m = load(&spec)?;
            let which = match &instr {
                Some(n) => Some(m.instruction(n).ok_or_else(|| fail(format!("unknown instruction `{n}`")))?),
                None => None,
            };
            let mut out = String::new();
            for g in build_all(&m).iter().filter(|g| which.is_none_or(|w| w == g.instr)) {
                out.push_str(&if dot { export_dot(&m, g) } else { export_text(&m, g) });
            }
            emit(output.as_deref(), &out)?;
        }
        Cmd::GenDecoder { spec, output } => {
            let m = load(&spec)?;
            let tree = build_decode_tree(&m).map_err(fail)?;
            emit(output.as_deref(), &Table(&m, &tree).to_string())?;
        }
        Cmd::Asm { spec, input, output, listing, base, overrides } => {
            let m = load(&spec)?;
            let a = assembler(&m, overrides.as_deref())?;
            let src = read_text(&input)?;
            let base = u64::try_from(base).map_err(|_| fail("base address does not fit in 64 bits"))?;
            let l = a.assemble_program(&src, base).map_err(|errs| Failure {
                code: 1,
                lines: errs.iter().map(|(n, e)| format!("{}:{n}: {e}", input.display())).collect(),
            })?;
            write_atomic(&output, &l.bytes())?;
            if let Some(p) = listing {
                write_atomic(&p, l.text().as_bytes())?;
            }
        }
        Cmd::Disasm { spec, bin, base, output, overrides } => {
            let m = load(&spec)?;
            let a = assembler(&m, overrides.as_deref())?;
            let bytes = read(&bin)?;
            let base = u64::try_from(base).map_err(|_| fail("base address does not fit in 64 bits"))?;
            emit(output.as_deref(), &a.disassemble_program(&bytes, base))?;
        }
        Cmd::Run { prog, max_steps, trace, no_cache } => {
            let m = load(&prog.spec)?;
            let pl = place(&m, &prog.bin, prog.base, prog.start, prog.stop)?;
            let isa = Isa::new(&m).map_err(fail)?;
            let mut iss = Iss::new(&isa, !no_cache);
            iss.load_program(&pl.image, pl.base).map_err(fail)?;
            iss.state.pc = Value::new(pl.start, iss.state.pc.width());
            let mut lines = String::new();
            let keep = trace.is_some();
            let r = iss.run(pl.stop, max_steps, &mut |t| {
                if keep {
                    lines.push_str(&t.render(&m));
                    lines.push('\n');
                }
            });
            if let Some(e) = r.error {
                return Err(fail(format!("after {} steps: {e}", r.steps)));
            }
            if r.reason == StopReason::MaxSteps && pl.stop.is_some() {
                return Err(fail(format!("stop address not reached after {max_steps} steps")));
            }
            emit_trace(trace.as_deref(), &lines)?;
            eprintln!("{}: {} steps", r.reason, r.steps);
        }
        Cmd::Simulate { prog, mia, max_cycles, trace, stats, dump_pipeline } => {
            let m = load(&prog.spec)?;
            let isa = Isa::new(&m).map_err(fail)?;
            let pm = resolve_named(&m, &mia, &isa.graphs).map_err(fail)?;
            for w in &pm.warnings {
                eprintln!("warning: {w}");
            }
            if dump_pipeline {
                print!("{}", report(&m, &isa.graphs, &pm));
            }
            let Some(bin) = prog.bin else {
                if dump_pipeline {
                    return Ok(());
                }
                return Err(fail("--bin is required unless only --dump-pipeline is given"));
            };
            let pl = place(&m, &bin, prog.base, prog.start, prog.stop)?;
            let mut cas = Cas::new(&isa, &pm);
            cas.load_program(&pl.image, pl.base).map_err(fail)?;
            let mut lines = String::new();
            let keep = trace.is_some();
            let r = cas.run(pl.start, pl.stop, max_cycles, &mut |t| {
                if keep {
                    lines.push_str(&t.render(&m));
                    lines.push('\n');
                }
            });
            if let Some(e) = r.error {
                return Err(fail(format!("at cycle {} after {} retired: {e}", r.stats.cycles, r.stats.retired)));
            }
            emit_trace(trace.as_deref(), &lines)?;
            if stats {
                let s = r.stats;
                println!("cycles={}\nretired={}\nstalls={}\nflushes={}", s.cycles, s.retired, s.stalls, s.flushes);
            }
        }
        Cmd::Cosim { prog, mia, max_cycles } => {
            let m = load(&prog.spec)?;
            let isa = Isa::new(&m).map_err(fail)?;
            let pm = resolve_named(&m, &mia, &isa.graphs).map_err(fail)?;
            let pl = place(&m, &prog.bin, prog.base, prog.start, prog.stop)?;
            let r = cosim(&isa, &pm, &pl.image, pl.base, pl.start, pl.stop, max_cycles).map_err(fail)?;
            if let Some(d) = &r.divergence {
                return Err(fail(d));
            }
            if let Some(e) = r.iss_error.as_ref().map(|e| e.to_string()).or(r.cas_error.as_ref().map(|e| e.to_string())) {
                return Err(fail(format!("after {} matching steps: {e}", r.steps)));
            }
            println!("ok: {} instructions retired identically in {} cycles", r.steps, r.stats.cycles);
        }
        Cmd::Patterns { spec, output } => {
            let m = load(&spec)?;
            emit(output.as_deref(), &emit_patterns(&m, &build_all(&m)))?;
        }
    }
    Ok(())
}

fn emit_trace(path: Option<&Path>, text: &str) -> Res<()> {
    match path {
        Some(p) => emit(Some(p), text),
        None => Ok(()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    std::panic::set_hook(Box::new(|info| {
        eprintln!("error: internal: {info}");
    }));
    match std::panic::catch_unwind(|| run(cli.cmd)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(f)) => {
            for l in &f.lines {
                eprintln!("error: {l}");
            }
            ExitCode::from(f.code)
        }
        Err(_) => ExitCode::from(2),
    }
}
