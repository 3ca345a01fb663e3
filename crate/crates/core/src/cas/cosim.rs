//! Lockstep comparison of the pipeline against the instruction-set simulator.

use super::{Cas, CasError, CasStats};
use crate::iss::{Isa, Iss, IssError, TraceRecord};
use crate::mia::PipelineModel;
use crate::value::Value;

/// First retirement at which the two traces disagree.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Divergence {
    /// Zero-based index of the retirement.
    pub step: usize,
    pub iss: Option<String>,
    pub cas: Option<String>,
    /// Up to four agreeing records before the mismatch.
    pub context: Vec<String>,
}

impl std::fmt::Display for Divergence {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "divergence at step {}", self.step)?;
        for c in &self.context {
            writeln!(f, "  = {c}")?;
        }
        writeln!(f, "  iss: {}", self.iss.as_deref().unwrap_or("<end of trace>"))?;
        write!(f, "  cas: {}", self.cas.as_deref().unwrap_or("<end of trace>"))
    }
}

#[derive(Clone, Debug)]
pub struct CosimReport {
    pub steps: usize,
    pub stats: CasStats,
    pub divergence: Option<Divergence>,
    pub iss_error: Option<IssError>,
    pub cas_error: Option<CasError>,
}

impl CosimReport {
    pub fn ok(&self) -> bool {
        self.divergence.is_none() && self.iss_error.is_none() && self.cas_error.is_none()
    }
}

/// Runs both simulators on the same image and compares retirement traces.
pub fn cosim(
    isa: &Isa<'_>,
    pm: &PipelineModel,
    image: &[u8],
    base: u128,
    start: u128,
    stop: Option<u128>,
    max_cycles: u64,
) -> Result<CosimReport, IssError> {
    let m = isa.model;
    let mut iss = Iss::new(isa, true);
    iss.load_program(image, base)?;
    iss.state.pc = Value::new(start, iss.state.pc.width());
    let mut it: Vec<String> = Vec::new();
    let ir = iss.run(stop, max_cycles, &mut |t: &TraceRecord| it.push(t.render(m)));

    let mut cas = Cas::new(isa, pm);
    cas.load_program(image, base)?;
    let mut ct: Vec<String> = Vec::new();
    let cr = cas.run(start, stop, max_cycles, &mut |t: &TraceRecord| ct.push(t.render(m)));

    let same = it.iter().zip(&ct).take_while(|(a, b)| a == b).count();
    let divergence = (same < it.len().max(ct.len())).then(|| Divergence {
        step: same,
        iss: it.get(same).cloned(),
        cas: ct.get(same).cloned(),
        context: it[same.saturating_sub(4)..same].to_vec(),
    });
    Ok(CosimReport {
        steps: same,
        stats: cr.stats,
        divergence,
        iss_error: ir.error,
        cas_error: cr.error,
    })
}
