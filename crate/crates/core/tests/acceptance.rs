//! Acceptance run: every criterion is checked at its stated tolerance and
//! reported on one PASS/FAIL line.

mod common;

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::process::Command;
use std::time::{Duration, Instant};

use common::decode_ref::{field_values, linear_scan, reference_patterns};
use common::pattern_eval::{lines, parse, pattern_agrees};
use common::timing::pipeline_timing;
use common::{
    assemble, corpus, iss_trace, program_agrees, random_state_agrees, random_word, BASE, EXIT, MODELS, STOP,
};
use pdl_core::asm::{infer_grammar, operands_from_fields, Assembler, RuleSource};
use pdl_core::cas::{cosim, Cas};
use pdl_core::decode::build_decode_tree;
use pdl_core::frontend::model::Resource;
use pdl_core::frontend::{load_file, load_str, rv32i, RV32I};
use pdl_core::ir::{build_all, NodeKind};
use pdl_core::iss::Isa;
use pdl_core::mia::{resolve_named, MiaError};
use pdl_core::patterns::emit_patterns;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome, Option<Duration>);

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn spec_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("specs/rv32i.pdl")
}

/// The `pdl` binary next to this test executable, when the workspace build
/// produced one.
fn pdl_binary() -> Option<PathBuf> {
    let exe = std::env::current_exe().ok()?;
    let p = exe.parent()?.parent()?.join(format!("pdl{}", std::env::consts::EXE_SUFFIX));
    p.exists().then_some(p)
}

fn spec_corpus() -> Outcome {
    let m = load_file(&spec_path()).map_err(|e| e.to_string())?;
    let graphs = build_all(&m);
    build_decode_tree(&m).map_err(|e| e.to_string())?;
    for mia in &m.mias {
        resolve_named(&m, &mia.name, &graphs).map_err(|e| format!("{}: {e}", mia.name))?;
    }
    ensure(m.instructions.len() == 37, || format!("{} instructions", m.instructions.len()))?;
    match pdl_binary() {
        Some(bin) => {
            let out = Command::new(bin).arg("check").arg(spec_path()).output().map_err(|e| e.to_string())?;
            let text = String::from_utf8_lossy(&out.stdout).trim().to_string();
            ensure(out.status.success() && text == "ok: 37 instructions", || format!("check printed `{text}`"))?;
            Ok("37 instructions; `pdl check` prints `ok: 37 instructions`".into())
        }
        None => Ok("37 instructions (pdl binary not built, command output not checked)".into()),
    }
}

fn decode_correctness() -> Outcome {
    let m = rv32i();
    let isa = Isa::new(&m).map_err(|e| e.to_string())?;
    let ps = reference_patterns(&m);
    let mut rng = StdRng::seed_from_u64(0xdec0de);
    let mut shadowed = 0;
    for (i, &(mask, value)) in ps.iter().enumerate() {
        for _ in 0..1000 {
            let word = (rng.gen::<u32>() as u128 & !mask) | value;
            let d = isa.tree.decode(&m, word).ok_or_else(|| format!("{word:#010x} does not decode"))?;
            let want = linear_scan(&ps, word);
            ensure(Some(d.instr) == want, || format!("{word:#010x}: tree {} vs scan {want:?}", d.instr))?;
            if d.instr != i {
                // a more specific encoding owns this assignment
                shadowed += 1;
                continue;
            }
            let got: Vec<u128> = d.fields.iter().map(|v| v.bits()).collect();
            ensure(got == field_values(&m, i, word), || format!("{word:#010x}: fields {got:?}"))?;
        }
    }
    for _ in 0..100_000 {
        let word = rng.gen::<u32>() as u128;
        let got = isa.tree.decode(&m, word).map(|d| d.instr);
        ensure(got == linear_scan(&ps, word), || format!("{word:#010x}: tree {got:?}"))?;
    }
    Ok(format!("37 x 1000 round trips ({shadowed} owned by a more specific encoding), 100000 words agree"))
}

fn assembler_round_trips() -> Outcome {
    let m = rv32i();
    let isa = Isa::new(&m).map_err(|e| e.to_string())?;
    let asm = Assembler::new(&m).map_err(|e| e.to_string())?;
    let mut rng = StdRng::seed_from_u64(0xa55e);
    for i in 0..m.instructions.len() {
        for _ in 0..1000 {
            let d = isa.decode(random_word(&isa, i, &mut rng)).unwrap();
            let ops = operands_from_fields(&m, i, &d.fields);
            let text = asm.format(i, &ops).map_err(|e| e.to_string())?;
            let back = asm.parse(&text).map_err(|e| format!("`{text}`: {e}"))?;
            ensure(back == (i, ops.clone()), || format!("`{text}` parses to {back:?}"))?;
            let word = asm.assemble(i, &ops).map_err(|e| e.to_string())?;
            let d2 = isa.decode(word).ok_or_else(|| format!("{word:#x} from `{text}` does not decode"))?;
            ensure(d2.instr == i && operands_from_fields(&m, i, &d2.fields) == ops, || format!("`{text}` -> {word:#x}"))?;
            let dis = asm.disassemble(word).map_err(|e| e.to_string())?;
            ensure(dis == text, || format!("`{text}` disassembles as `{dis}`"))?;
        }
    }
    let inferred = (0..m.instructions.len())
        .filter(|&i| infer_grammar(&m, i).is_ok_and(|r| r.source != RuleSource::Override))
        .count();
    ensure(inferred == 37 && asm.inferred_count() == 37, || format!("{inferred} rules inferred"))?;
    Ok("37 x 1000 operand sets; 37/37 rules inferred, no overrides".into())
}

fn iss_cosimulation() -> Outcome {
    let m = rv32i();
    let isa = Isa::new(&m).map_err(|e| e.to_string())?;
    let mut rng = StdRng::seed_from_u64(0x155);
    for i in 0..m.instructions.len() {
        for _ in 0..10_000 {
            random_state_agrees(&isa, i, &mut rng)?;
        }
    }
    let progs = corpus();
    ensure(progs.len() >= 5 && progs.iter().any(|(n, _)| n == "selfmod"), || "corpus too small".into())?;
    let mut steps = 0;
    for (name, src) in &progs {
        let img = assemble(&m, src);
        steps += program_agrees(&isa, &img).map_err(|e| format!("{name}: {e}"))?;
        ensure(iss_trace(&isa, &img, true) == iss_trace(&isa, &img, false), || format!("{name}: cache changes trace"))?;
    }
    Ok(format!("37 x 10000 states; {} programs, {steps} steps; cache-transparent", progs.len()))
}

fn five_stage_without_writeback_write() -> String {
    let at = RV32I.find("micro architecture p5 implements").unwrap();
    let wb = at + RV32I[at..].find("stage WRITE_BACK").unwrap();
    let w = wb + RV32I[wb..].find("instr.write( @X )").unwrap();
    format!("{}{}", &RV32I[..w], &RV32I[w + "instr.write( @X )".len()..])
}

fn mia_synthesis() -> Outcome {
    let m = rv32i();
    let graphs = build_all(&m);
    for name in MODELS {
        let pm = resolve_named(&m, name, &graphs).map_err(|e| format!("{name}: {e}"))?;
        for (g, plan) in graphs.iter().zip(&pm.plans) {
            for &e in g.effects() {
                ensure(plan.stage_of[e].is_some(), || format!("{name}: unplaced effect"))?;
            }
        }
    }
    let broken = load_str(&five_stage_without_writeback_write()).map_err(|e| e.to_string())?;
    let gs = build_all(&broken);
    let writers: BTreeSet<String> = gs
        .iter()
        .filter(|g| g.nodes.iter().any(|n| n.kind == NodeKind::WriteFile(0)))
        .map(|g| broken.instructions[g.instr].name.clone())
        .collect();
    match resolve_named(&broken, "p5", &gs) {
        Err(MiaError::ResidualSemantics(r)) => {
            let named: BTreeSet<String> = r.iter().map(|(n, _)| n.clone()).collect();
            ensure(named == writers, || format!("names {named:?}, writers {writers:?}"))?;
            Ok(format!("5 models resolve; residual error names all {} X writers", writers.len()))
        }
        other => Err(format!("expected residual semantics, got {:?}", other.map(|p| p.name))),
    }
}

const THREE_READS: &str = "instruction set architecture T = {
    [littleEndian]
    memory M : Bits<32> -> Bits<8>
    program counter PC : Bits<32>
    register file X : Bits<5> -> Bits<32>
    format F : Bits<32> = { op : Bits<17>, rd : Bits<5>, rs1 : Bits<5>, rs2 : Bits<5> }
    instruction IND : F = X(rd) := X(rs1) + X(rs2) + X(X(rs1) as Bits<5>)
    encoding IND = { op = 1 }
    assembly IND = (mnemonic, \" \", register(rd), \", \", register(rs1), \", \", register(rs2))
  }
  micro architecture s implements T = {
    stage FETCH -> ( fr : FetchResult ) = { fr := fetchNext }
    stage DECODE -> ( ir : Instruction ) = {
      let instr = decode( FETCH.fr ) in { instr.read( @X ) ir := instr }
    }
    stage EXECUTE = {
      let instr = DECODE.ir in { instr.read( @X ) instr.compute instr.write( @X ) }
    }
  }";

fn port_inference() -> Outcome {
    let m = rv32i();
    let pm = resolve_named(&m, "p5", &build_all(&m)).map_err(|e| e.to_string())?;
    let x = pm.ports_of(Resource::File(0));
    let decode = pm.stages.iter().position(|s| s == "DECODE").unwrap();
    ensure(x.reads[decode] >= 2, || format!("p5 X read ports {:?}", x.reads))?;
    let t = load_str(THREE_READS).map_err(|e| e.to_string())?;
    let s = resolve_named(&t, "s", &build_all(&t)).map_err(|e| e.to_string())?;
    let sx = s.ports_of(Resource::File(0));
    ensure(sx.read_count() == 3, || format!("synthetic X read ports {:?}", sx.reads))?;
    Ok(format!("p5 DECODE has {} X read ports; synthetic case has 3", x.reads[decode]))
}

fn cas_timing() -> Outcome {
    let m = rv32i();
    let isa = Isa::new(&m).map_err(|e| e.to_string())?;
    let pms: Vec<_> = MODELS.iter().map(|n| resolve_named(&m, n, &isa.graphs).unwrap()).collect();
    for pm in &pms {
        let k = pm.depth() as u64;
        for n in [1u64, 10, 100] {
            let src: String = (0..n).map(|i| format!("addi x{}, x0, {i}\n", 1 + i % 30)).collect();
            let img = assemble(&m, &src);
            let mut cas = Cas::new(&isa, pm);
            cas.load_program(&img, BASE).map_err(|e| e.to_string())?;
            let r = cas.run(BASE, Some(BASE + 4 * n as u128), 100_000, &mut |_| {});
            ensure(r.error.is_none() && r.stats.cycles == n + k - 1, || {
                format!("{} N={n}: {} cycles, expected {}", pm.name, r.stats.cycles, n + k - 1)
            })?;
        }
    }
    let mut cases: Vec<String> = vec![
        "addi x1, x0, 1\naddi x2, x1, 1\n".into(),
        "addi x1, x0, 1\naddi x9, x0, 9\naddi x2, x1, 1\n".into(),
        "addi x1, x0, 1\naddi x9, x0, 9\naddi x8, x0, 8\naddi x2, x1, 1\n".into(),
        "lui x5, 0x80001\nlw x1, 0(x5)\nadd x2, x1, x1\n".into(),
        "lui x5, 0x80001\nlb x1, 0(x5)\nsw x1, 4(x5)\n".into(),
        "addi x1, x0, 1\nbeq x1, x1, 8\naddi x3, x0, 3\n".into(),
        "addi x1, x0, 1\nbne x1, x0, 12\naddi x3, x0, 3\naddi x4, x0, 4\n".into(),
        "jal x1, 8\naddi x3, x0, 3\naddi x4, x0, 4\n".into(),
    ];
    cases.extend(corpus().into_iter().filter(|(n, _)| n != "selfmod").map(|(_, s)| s.replace(EXIT, "")));
    let mut stalls = 0;
    let mut flushes = 0;
    for src in &cases {
        let img = assemble(&m, &format!("{src}{EXIT}"));
        for pm in &pms {
            let want = pipeline_timing(&isa, pm, &img, BASE, BASE, STOP);
            let mut cas = Cas::new(&isa, pm);
            cas.load_program(&img, BASE).map_err(|e| e.to_string())?;
            let r = cas.run(BASE, Some(STOP), 1_000_000, &mut |_| {});
            let got = (r.stats.cycles, r.stats.retired, r.stats.stalls, r.stats.flushes);
            ensure(r.error.is_none() && got == (want.cycles, want.retired, want.stalls, want.flushes), || {
                format!("{} on\n{src}: simulator {got:?}, oracle {want:?}", pm.name)
            })?;
            stalls += want.stalls;
            flushes += want.flushes;
        }
    }
    Ok(format!(
        "N+k-1 on {} models; {} programs match the timing oracle exactly ({stalls} stalls, {flushes} flushes)",
        pms.len(),
        cases.len()
    ))
}

fn cross_simulator() -> Outcome {
    let m = rv32i();
    let isa = Isa::new(&m).map_err(|e| e.to_string())?;
    let mut runs = 0;
    for (name, src) in corpus() {
        let img = assemble(&m, &src);
        for mia in MODELS {
            let pm = resolve_named(&m, mia, &isa.graphs).map_err(|e| e.to_string())?;
            let r = cosim(&isa, &pm, &img, BASE, BASE, Some(STOP), 1_000_000).map_err(|e| e.to_string())?;
            ensure(r.ok(), || format!("{name} on {mia}: {:?} {:?} {:?}", r.divergence, r.iss_error, r.cas_error))?;
            runs += 1;
        }
    }
    Ok(format!("{runs} program/model pairs retire identical traces"))
}

fn pattern_extraction() -> Outcome {
    let m = rv32i();
    let isa = Isa::new(&m).map_err(|e| e.to_string())?;
    let text = emit_patterns(&m, &isa.graphs);
    ensure(text == emit_patterns(&m, &isa.graphs), || "emission is not stable".into())?;
    let golden = include_str!("golden/rv32i.patterns");
    ensure(text == golden, || "differs from the golden file".into())?;
    let by_name = lines(&text);
    let add = &by_name["ADD"];
    ensure(add == "set(X:$rd, add(X:$rs1, X:$rs2))", || format!("ADD: {add}"))?;
    let mut rng = StdRng::seed_from_u64(0x9a7);
    let mut checked = 0;
    for (i, ins) in m.instructions.iter().enumerate() {
        let p = &by_name[&ins.name];
        if p.starts_with("NOT-A-TREE") {
            ensure(p.len() > "NOT-A-TREE ".len(), || format!("{}: no reason", ins.name))?;
            continue;
        }
        let pat = parse(p).map_err(|e| format!("{}: {e}", ins.name))?;
        for _ in 0..1000 {
            pattern_agrees(&isa, i, &pat, &mut rng)?;
        }
        checked += 1;
    }
    Ok(format!("ADD matches; {checked} patterns x 1000 bindings agree; golden file stable"))
}

#[test]
fn acceptance() {
    let criteria: [Criterion; 9] = [
        ("spec corpus", spec_corpus, Some(Duration::from_secs(1))),
        ("decode correctness", decode_correctness, Some(Duration::from_secs(10))),
        ("assembler round trips", assembler_round_trips, Some(Duration::from_secs(30))),
        ("ISS co-simulation", iss_cosimulation, Some(Duration::from_secs(60))),
        ("MiA synthesis", mia_synthesis, None),
        ("port inference", port_inference, None),
        ("CAS timing", cas_timing, Some(Duration::from_secs(60))),
        ("cross-simulator equivalence", cross_simulator, None),
        ("pattern extraction", pattern_extraction, None),
    ];
    let mut failed = Vec::new();
    for (n, (name, run, limit)) in criteria.into_iter().enumerate() {
        let t = Instant::now();
        let r = run();
        let dt = t.elapsed();
        let r = match (r, limit) {
            (Ok(_), Some(l)) if dt > l => Err(format!("took {:.2} s, limit {} s", dt.as_secs_f64(), l.as_secs())),
            (r, _) => r,
        };
        match &r {
            Ok(detail) => println!("PASS {}. {name}: {detail} [{:.2} s]", n + 1, dt.as_secs_f64()),
            Err(e) => {
                println!("FAIL {}. {name}: {e} [{:.2} s]", n + 1, dt.as_secs_f64());
                failed.push(n + 1);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
