//! Per-instruction-class cycle cost model and speedup arithmetic.
//!
//! This is a deliberately simple serial model: every issued instruction
//! contributes its class cost, memory instructions additionally pay one
//! `per_element_mem` per active lane, and each unrolled loop iteration pays
//! a fixed control overhead. There is no cache hierarchy and no overlap
//! between instructions.

use crate::error::{Error, Result};
use crate::isa::{ExecStats, Program};

/// Cycle cost per instruction class. `vindexmac` is in the `valu` class
/// together with the other arithmetic ops: the indirect register read reuses
/// an existing register-file port and adds no latency.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CostModel {
    pub vload_base: u64,
    pub vstore_base: u64,
    pub per_element_mem: u64,
    /// vmacc.vx / vadd.vx / vindexmac.vx / vslide1down.
    pub valu: u64,
    pub vmv: u64,
    pub scalar_op: u64,
    pub setvl: u64,
    /// Applied once per unrolled-iteration boundary recorded in the program.
    pub loop_overhead: u64,
}

impl Default for CostModel {
    /// Loose calibration against an L2-backed vector engine: 8-cycle hit
    /// latency on the memory path, 3-cycle multiply-accumulate class.
    fn default() -> Self {
        Self {
            vload_base: 8,
            vstore_base: 8,
            per_element_mem: 1,
            valu: 3,
            vmv: 1,
            scalar_op: 1,
            setvl: 1,
            loop_overhead: 2,
        }
    }
}

impl CostModel {
    /// Memory must not be cheaper than a register-file operation.
    pub fn validate(&self) -> Result<()> {
        if self.vload_base < self.valu {
            return Err(Error::constraint(format!(
                "vload_base {} must be >= valu {}",
                self.vload_base, self.valu
            )));
        }
        Ok(())
    }
}

/// Total cycle estimate for a finished run: class counts times class costs,
/// plus the per-iteration loop overhead. A pure function of its inputs and
/// equal to the cycle counter the interpreter accumulates, plus overhead.
pub fn cycles_of(program: &Program, stats: &ExecStats, cost: &CostModel) -> u64 {
    let c = &stats.counts;
    c.setvl * cost.setvl
        + c.vload * cost.vload_base
        + c.vstore * cost.vstore_base
        + (c.load_elems + c.store_elems) * cost.per_element_mem
        + (c.vmacc + c.vadd + c.vslide + c.vindexmac) * cost.valu
        + c.vmv * cost.vmv
        + (c.sload + c.sadd) * cost.scalar_op
        + program.iterations * cost.loop_overhead
}

/// Execution-time ratio, baseline over optimized.
pub fn speedup(baseline_cycles: u64, optimized_cycles: u64) -> Result<f64> {
    if baseline_cycles == 0 || optimized_cycles == 0 {
        return Err(Error::constraint("speedup of a zero-cycle run"));
    }
    Ok(baseline_cycles as f64 / optimized_cycles as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::isa::{Instruction, MachineState, MemBase, Program, VReg, VectorConfig};

    #[test]
    fn zero_costs_zero_cycles() {
        let cost = CostModel {
            vload_base: 0,
            vstore_base: 0,
            per_element_mem: 0,
            valu: 0,
            vmv: 0,
            scalar_op: 0,
            setvl: 0,
            loop_overhead: 0,
        };
        let mut p = Program {
            iterations: 10,
            ..Default::default()
        };
        p.push(Instruction::SetVl { vl: 4 });
        p.push(Instruction::VLoad {
            vd: VReg::new(1),
            base: MemBase::Imm(0),
        });
        let mut st = MachineState::new(VectorConfig::default(), 16);
        let stats = crate::isa::run(&mut st, &p, &cost).unwrap();
        assert_eq!(cycles_of(&p, &stats, &cost), 0);
    }

    #[test]
    fn three_vloads_direct_formula() {
        let cost = CostModel {
            vload_base: 10,
            per_element_mem: 1,
            loop_overhead: 0,
            setvl: 0,
            ..CostModel::default()
        };
        let mut p = Program::default();
        p.push(Instruction::SetVl { vl: 16 });
        for i in 0..3 {
            p.push(Instruction::VLoad {
                vd: VReg::new(i),
                base: MemBase::Imm(0),
            });
        }
        let mut st = MachineState::new(VectorConfig::default(), 16);
        let stats = crate::isa::run(&mut st, &p, &cost).unwrap();
        assert_eq!(cycles_of(&p, &stats, &cost), 3 * (10 + 16));
    }

    #[test]
    fn cycles_of_matches_interpreter_counter_plus_overhead() {
        let cost = CostModel::default();
        let mut p = Program {
            iterations: 3,
            ..Default::default()
        };
        p.push(Instruction::SetVl { vl: 8 });
        p.push(Instruction::VLoad {
            vd: VReg::new(2),
            base: MemBase::Imm(0),
        });
        p.push(Instruction::VStore {
            vs: VReg::new(2),
            base: MemBase::Imm(8),
        });
        let mut st = MachineState::new(VectorConfig::default(), 16);
        let stats = crate::isa::run(&mut st, &p, &cost).unwrap();
        assert_eq!(
            cycles_of(&p, &stats, &cost),
            stats.cycles + 3 * cost.loop_overhead
        );
    }

    #[test]
    fn speedup_ratios() {
        assert_eq!(speedup(100, 100).unwrap(), 1.0);
        assert_eq!(speedup(200, 100).unwrap(), 2.0);
        assert!(speedup(0, 10).is_err());
        assert!(speedup(10, 0).is_err());
    }

    #[test]
    fn vindexmac_costed_like_vmacc() {
        let cost = CostModel::default();
        let mut st = MachineState::new(VectorConfig::default(), 0);
        st.step(
            &Instruction::VMaccVx {
                vd: VReg::new(1),
                rs: crate::isa::SReg::new(2),
                vs2: VReg::new(3),
            },
            &cost,
        )
        .unwrap();
        let macc_cycles = st.stats.cycles;
        st.step(
            &Instruction::VIndexMac {
                vd: VReg::new(1),
                vs2: VReg::new(3),
                rs: crate::isa::SReg::new(2),
            },
            &cost,
        )
        .unwrap();
        assert_eq!(st.stats.cycles, 2 * macc_cycles);
    }

    #[test]
    fn default_model_validates() {
        CostModel::default().validate().unwrap();
        let bad = CostModel {
            vload_base: 0,
            valu: 1,
            ..CostModel::default()
        };
        assert!(bad.validate().is_err());
    }
}
