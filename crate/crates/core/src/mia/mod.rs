//! Micro-architecture synthesis: the instruction progress graph, stage
//! placement, ports, pipeline registers and pipeline control.

mod ipg;
mod report;
mod resolve;

pub use ipg::{build_ipg, InstrSet, Ipg, IpgKind, IpgNode};
pub use report::report;
pub use resolve::{
    resolve, resolve_named, HazardRule, InstrPlan, MiaError, PipeReg, PipelineModel, Ports, ReadSite, WriteSite,
};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::model::Resource;
    use crate::frontend::{load_str, rv32i, RV32I};
    use crate::ir::build_all;

    fn isa_only() -> &'static str {
        &RV32I[..RV32I.find("// single stage").unwrap()]
    }

    #[test]
    fn bundled_models_resolve() {
        let m = rv32i();
        let gs = build_all(&m);
        for name in ["p1", "p2", "p3", "p5", "p5_fw"] {
            let pm = resolve_named(&m, name, &gs).unwrap_or_else(|e| panic!("{name}: {e}"));
            for (g, plan) in gs.iter().zip(&pm.plans) {
                for &e in g.effects() {
                    assert!(plan.stage_of[e].is_some());
                }
            }
            assert!(pm.warnings.is_empty(), "{name}: {:?}", pm.warnings);
        }
    }

    #[test]
    fn one_stage_has_no_registers() {
        let m = rv32i();
        let pm = resolve_named(&m, "p1", &build_all(&m)).unwrap();
        assert_eq!(pm.register_count(), 0);
        assert!(pm.plans.iter().all(|p| p.by_stage.len() == 1));
    }

    #[test]
    fn missing_register_write_is_residual() {
        let src = format!(
            "{}
            micro architecture q implements RV32I = {{
              stage FETCH -> ( fr : FetchResult ) = {{ fr := fetchNext }}
              stage DECODE -> ( ir : Instruction ) = {{
                let instr = decode( FETCH.fr ) in {{ instr.read( @X ) ir := instr }}
              }}
              stage EXECUTE -> ( ir : Instruction ) = {{
                let instr = DECODE.ir in {{
                  if ( instr.unknown ) then raise invalid
                  else {{ instr.compute instr.verify instr.write( @PC ) }}
                  ir := instr
                }}
              }}
              stage MEMORY -> ( ir : Instruction ) = {{
                let instr = EXECUTE.ir in {{ instr.write( @MEM ) instr.read( @MEM ) ir := instr }}
              }}
              stage WRITE_BACK = {{
                let instr = MEMORY.ir in {{ }}
              }}
            }}",
            isa_only()
        );
        let m = load_str(&src).unwrap();
        let gs = build_all(&m);
        let Err(MiaError::ResidualSemantics(r)) = resolve_named(&m, "q", &gs) else { panic!() };
        let writers: Vec<String> = gs
            .iter()
            .filter(|g| g.effects().iter().any(|&e| g.nodes[e].kind == crate::ir::NodeKind::WriteFile(0)))
            .map(|g| m.instructions[g.instr].name.clone())
            .collect();
        let named: Vec<String> = r.iter().map(|(n, _)| n.clone()).collect();
        assert_eq!(named, writers);
        assert!(named.len() > 25);
        assert!(r.iter().all(|(_, left)| left == &vec!["write X".to_string()]));
    }

    #[test]
    fn five_stage_reads_two_registers_in_decode() {
        let m = rv32i();
        let pm = resolve_named(&m, "p5", &build_all(&m)).unwrap();
        let x = pm.ports_of(Resource::File(0));
        assert_eq!(x.reads[1], 2);
        assert_eq!(x.read_count(), 2);
        assert_eq!(x.write_count(), 1);
        assert_eq!(pm.ports_of(Resource::Mem(0)).read_count(), 1);
    }

    #[test]
    fn three_read_ports_across_decode_and_execute() {
        let src = "instruction set architecture T = {
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
        let m = load_str(src).unwrap();
        let pm = resolve_named(&m, "s", &build_all(&m)).unwrap();
        let x = pm.ports_of(Resource::File(0));
        assert_eq!(x.reads, vec![0, 2, 1]);
        assert_eq!(x.read_count(), 3);
    }

    #[test]
    fn unified_memory_single_stage_conflicts() {
        let src = format!(
            "{}
            [ unifiedMemory ]
            micro architecture u implements RV32I = {{
              stage CPU = {{
                let instr = decode( fetchNext ) in {{
                  instr.read( @X ) instr.compute instr.write( @PC )
                  instr.write( @MEM ) instr.read( @MEM ) instr.write( @X )
                }}
              }}
            }}",
            isa_only()
        );
        let m = load_str(&src).unwrap();
        assert!(matches!(
            resolve_named(&m, "u", &build_all(&m)),
            Err(MiaError::PortConflict { kind: "read", count: 2, .. })
        ));
    }

    #[test]
    fn forwarding_and_branch_stages() {
        let m = rv32i();
        let gs = build_all(&m);
        let pm = resolve_named(&m, "p5_fw", &gs).unwrap();
        let add = m.instruction("ADD").unwrap();
        let lw = m.instruction("LB").unwrap();
        let beq = m.instruction("BEQ").unwrap();
        let xw = |i: usize| pm.plans[i].writes.iter().find(|w| w.res == Resource::File(0)).unwrap().clone();
        assert_eq!((xw(add).stage, xw(add).ready), (4, 2));
        assert_eq!((xw(lw).stage, xw(lw).ready), (4, 4));
        assert_eq!(pm.plans[beq].redirect, Some(2));
        assert!(pm.plans[add].reads.iter().all(|r| r.forward && r.stage == 1));
        let h = &pm.hazards[0];
        assert_eq!((h.consumer, h.producers.clone(), h.forward_from.clone()), (1, vec![2, 3, 4], vec![2, 3, 4]));
        let text = report(&m, &gs, &pm);
        assert!(text.contains("forward from EXECUTE MEMORY WRITE_BACK"), "{text}");
        assert!(text.contains("flush FETCH DECODE"), "{text}");
    }

    #[test]
    fn registers_shrink_by_merging() {
        let m = rv32i();
        let pm = resolve_named(&m, "p5", &build_all(&m)).unwrap();
        for (b, regs) in pm.registers.iter().enumerate() {
            let values: usize = regs.iter().map(|r| r.nodes.len()).sum();
            assert!(regs.len() <= values.max(2), "boundary {b}");
            for r in regs {
                for (x, (_, a)) in r.nodes.iter().enumerate() {
                    for (_, c) in &r.nodes[x + 1..] {
                        assert!(a.disjoint(c));
                    }
                }
            }
        }
        assert!(pm.registers[0].iter().all(|r| r.label.is_some()));
    }
}
