use std::collections::{BTreeMap, HashMap};

use crate::frontend::model::{Endian, Memory, Resource, SpecModel};
use crate::ir::Effect;
use crate::value::{mask, Value};

/// Byte-addressed (unit-addressed) sparse memory.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SparseMem {
    pub unit_width: u32,
    pub addr_width: u32,
    pub endian: Endian,
    cells: HashMap<u64, u128>,
    /// Nonzero seeds give unwritten cells a pseudo-random value instead of 0.
    pub fill: u64,
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

impl SparseMem {
    pub fn new(m: &Memory) -> Self {
        SparseMem {
            unit_width: m.unit_width,
            addr_width: m.addr_width,
            endian: m.endian,
            cells: HashMap::new(),
            fill: 0,
        }
    }

    fn wrap(&self, a: u128) -> u64 {
        (a & mask(self.addr_width.min(64))) as u64
    }

    pub fn unit(&self, addr: u64) -> u128 {
        match self.cells.get(&addr) {
            Some(&v) => v,
            None if self.fill != 0 => splitmix(self.fill ^ addr) as u128 & mask(self.unit_width),
            None => 0,
        }
    }

    pub fn set_unit(&mut self, addr: u64, v: u128) {
        self.cells.insert(addr, v & mask(self.unit_width));
    }

    /// Addresses of the units of a `units`-wide access, in significance order
    /// from least significant.
    fn addrs(&self, addr: u128, units: u32) -> impl Iterator<Item = u64> + '_ {
        (0..units).map(move |k| {
            let off = match self.endian {
                Endian::Little => k,
                Endian::Big => units - 1 - k,
            };
            self.wrap(addr + off as u128)
        })
    }

    pub fn read(&self, addr: u128, units: u32) -> Value {
        let mut v = 0u128;
        for (k, a) in self.addrs(addr, units).enumerate() {
            v |= self.unit(a) << (k as u32 * self.unit_width);
        }
        Value::new(v, units * self.unit_width)
    }

    pub fn write(&mut self, addr: u128, units: u32, v: Value) {
        let w = self.unit_width;
        let addrs: Vec<u64> = self.addrs(addr, units).collect();
        for (k, a) in addrs.into_iter().enumerate() {
            self.set_unit(a, v.bits() >> (k as u32 * w));
        }
    }

    /// Written cells whose value is nonzero.
    pub fn cells(&self) -> BTreeMap<u64, u128> {
        self.cells.iter().filter(|(_, &v)| v != 0).map(|(&a, &v)| (a, v)).collect()
    }

    pub fn span_of(&self, addr: u128, units: u32) -> Vec<u64> {
        self.addrs(addr, units).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MachineState {
    pub pc: Value,
    pub files: Vec<Vec<Value>>,
    pub regs: Vec<Value>,
    pub mems: Vec<SparseMem>,
    pub retired: u64,
}

/// One architectural write as it appears in a trace.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Write {
    pub res: Resource,
    /// File index or memory address; 0 for the PC and registers.
    pub index: u128,
    pub value: Value,
}

impl MachineState {
    pub fn new(model: &SpecModel) -> Self {
        let pcw = model.pc.as_ref().map(|p| p.width).unwrap_or(32);
        MachineState {
            pc: Value::zero(pcw),
            files: model
                .files
                .iter()
                .map(|f| {
                    let mut v = vec![Value::zero(f.elem_width); f.size() as usize];
                    for (&i, &c) in &f.hardwired {
                        v[i as usize] = Value::new(c.bits(), f.elem_width);
                    }
                    v
                })
                .collect(),
            regs: model.registers.iter().map(|r| Value::zero(r.width)).collect(),
            mems: model.memories.iter().map(SparseMem::new).collect(),
            retired: 0,
        }
    }

    pub fn file(&self, f: usize, idx: Value) -> Value {
        let v = &self.files[f];
        v[(idx.bits() as usize) % v.len()]
    }

    /// Applies one effect. Returns the trace entry, or `None` for discarded
    /// writes to hardwired indices.
    pub fn apply(&mut self, model: &SpecModel, e: &Effect) -> Option<Write> {
        match *e {
            Effect::Pc(v) => {
                self.pc = Value::new(v.bits(), self.pc.width());
                Some(Write { res: Resource::Pc, index: 0, value: self.pc })
            }
            Effect::Reg(r, v) => {
                self.regs[r] = Value::new(v.bits(), self.regs[r].width());
                Some(Write { res: Resource::Reg(r), index: 0, value: self.regs[r] })
            }
            Effect::File(f, idx, v) => {
                let fd = &model.files[f];
                let i = idx.bits() & mask(fd.index_width);
                if fd.hardwired.contains_key(&i) {
                    return None;
                }
                let v = Value::new(v.bits(), fd.elem_width);
                self.files[f][i as usize] = v;
                Some(Write { res: Resource::File(f), index: i, value: v })
            }
            Effect::Mem { mem, units, addr, value } => {
                let m = &mut self.mems[mem];
                let a = addr.bits() & mask(m.addr_width);
                let v = Value::new(value.bits(), units * m.unit_width);
                m.write(a, units, v);
                Some(Write { res: Resource::Mem(mem), index: a, value: v })
            }
        }
    }

    /// Copies `image` into memory `mem` starting at `base`.
    pub fn load_image(&mut self, mem: usize, image: &[u8], base: u128) -> Result<(), super::IssError> {
        let m = &mut self.mems[mem];
        let end = base + image.len() as u128;
        if m.addr_width < 128 && end > 1u128 << m.addr_width {
            return Err(super::IssError::AddressOverflow { base, len: image.len() });
        }
        for (i, &b) in image.iter().enumerate() {
            m.set_unit((base + i as u128) as u64, b as u128);
        }
        Ok(())
    }
}

/// Renders writes as `name[index]=hex`, sorted by resource and index.
pub fn format_writes(model: &SpecModel, writes: &[Write]) -> String {
    let mut ws: Vec<&Write> = writes.iter().collect();
    ws.sort();
    ws.iter()
        .map(|w| {
            let name = model.resource_name(w.res);
            let v = crate::value::hex_padded(w.value.bits(), w.value.width());
            match w.res {
                Resource::Pc | Resource::Reg(_) => format!("{name}={v}"),
                Resource::File(_) => format!("{name}[{}]={v}", w.index),
                Resource::Mem(_) => format!("{name}[0x{:x}]={v}", w.index),
            }
        })
        .collect::<Vec<_>>()
        .join(", ")
}
