// SPDX-License-Identifier: Apache-2.0

//! In-process co-simulation that replays a testbench plan on the bundled
//! event-driven simulator, reproducing the testbench's clocking exactly.

use std::time::{Duration, Instant};

use rtlopt_vsim::{compile, Logic, Simulator, VsimError};

use super::testbench::{xorshift64, TestbenchPlan};
use super::{SimStatus, SimulationResult, SimulatorAdapter};
use crate::error::Result;

#[derive(Debug, Default, Clone, Copy)]
pub struct BuiltinSimulator;

impl BuiltinSimulator {
    pub fn new() -> Self {
        BuiltinSimulator
    }
}

enum Stop {
    Mismatch(String),
    Timeout,
    Sim(VsimError),
}

impl From<VsimError> for Stop {
    fn from(e: VsimError) -> Self {
        Stop::Sim(e)
    }
}

struct Pair {
    a: Simulator,
    b: Simulator,
}

impl Pair {
    fn set(&mut self, port: &str, v: Logic) -> Result<(), Stop> {
        self.a.set(port, v)?;
        self.b.set(port, v)?;
        Ok(())
    }

    fn settle(&mut self) -> Result<(), Stop> {
        self.a.settle()?;
        self.b.settle()?;
        Ok(())
    }
}

impl SimulatorAdapter for BuiltinSimulator {
    fn name(&self) -> &str {
        "builtin"
    }

    fn run(&self, testbench: &str, designs: &[String], timeout: Duration) -> Result<SimulationResult> {
        let plan = TestbenchPlan::from_testbench(testbench)?;
        let [src_a, src_b] = designs else {
            return Ok(SimulationResult::failed(
                SimStatus::CompileFailed,
                format!("expected two designs, got {}", designs.len()),
            ));
        };
        let build = |src: &str, top: &str| compile(src, top).and_then(Simulator::new);
        let (a, b) = match (build(src_a, &plan.dut_a), build(src_b, &plan.dut_b)) {
            (Ok(a), Ok(b)) => (a, b),
            (Err(e), _) => {
                return Ok(SimulationResult::failed(
                    SimStatus::CompileFailed,
                    format!("dut_a: {e}"),
                ))
            }
            (_, Err(e)) => {
                return Ok(SimulationResult::failed(
                    SimStatus::CompileFailed,
                    format!("dut_b: {e}"),
                ))
            }
        };
        let mut pair = Pair { a, b };
        let started = Instant::now();
        match replay(&plan, &mut pair, started, timeout) {
            Ok(()) => Ok(SimulationResult::completed(vec!["PASS".into()])),
            Err(Stop::Mismatch(line)) => Ok(SimulationResult::completed(vec![line, "FAIL".into()])),
            Err(Stop::Timeout) => Ok(SimulationResult::failed(SimStatus::TimedOut, "simulation timed out")),
            Err(Stop::Sim(e)) => Ok(SimulationResult::failed(SimStatus::Crashed, e.to_string())),
        }
    }
}

fn draw(width: u32, rng: &mut u64) -> Logic {
    let mut value: u128 = 0;
    for w in 0..width.div_ceil(64) {
        *rng = xorshift64(*rng);
        if w < 2 {
            value |= (*rng as u128) << (64 * w);
        }
    }
    Logic::new(width, value)
}

fn replay(plan: &TestbenchPlan, pair: &mut Pair, started: Instant, timeout: Duration) -> Result<(), Stop> {
    let mut gcycle: u64 = 0;
    let clock = plan.clock.as_deref();
    if let Some(clk) = clock {
        pair.set(clk, Logic::bit(false))?;
    }
    for seq in 0..plan.sequences as usize {
        let mut rng = plan.seeds[seq];
        if let Some(clk) = clock {
            for p in &plan.inputs {
                pair.set(&p.name, Logic::zero(p.width))?;
            }
            for r in &plan.resets {
                pair.set(&r.name, Logic::bit(!r.active_low))?;
            }
            pair.settle()?;
            // `repeat (R) @(posedge)` then `@(negedge)` always spans at least one full period
            for _ in 0..plan.reset_cycles.max(1) {
                pair.set(clk, Logic::bit(true))?;
                pair.settle()?;
                pair.set(clk, Logic::bit(false))?;
                pair.settle()?;
            }
            for r in &plan.resets {
                pair.set(&r.name, Logic::bit(r.active_low))?;
            }
            for _ in 0..plan.cycles {
                if started.elapsed() > timeout {
                    return Err(Stop::Timeout);
                }
                for p in &plan.inputs {
                    pair.set(&p.name, draw(p.width, &mut rng))?;
                }
                pair.settle()?;
                pair.set(clk, Logic::bit(true))?;
                pair.settle()?;
                pair.set(clk, Logic::bit(false))?;
                pair.settle()?;
                compare(plan, pair, gcycle)?;
                gcycle += 1;
            }
        } else {
            for _ in 0..plan.cycles {
                if started.elapsed() > timeout {
                    return Err(Stop::Timeout);
                }
                for p in &plan.inputs {
                    pair.set(&p.name, draw(p.width, &mut rng))?;
                }
                pair.settle()?;
                compare(plan, pair, gcycle)?;
                gcycle += 1;
            }
        }
    }
    Ok(())
}

fn compare(plan: &TestbenchPlan, pair: &Pair, gcycle: u64) -> Result<(), Stop> {
    for o in &plan.outputs {
        let va = pair.a.get(&o.name);
        let vb = pair.b.get(&o.name);
        match (va, vb) {
            (Some(x), Some(y)) if x.case_eq(&y) => {}
            (Some(x), Some(y)) => {
                return Err(Stop::Mismatch(format!(
                    "MISMATCH {} {gcycle} {} {}",
                    o.name,
                    x.to_hex(),
                    y.to_hex()
                )))
            }
            _ => return Err(Stop::Sim(VsimError::Elab(format!("output '{}' missing", o.name)))),
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equiv::{check_equivalence, StimulusConfig};
    use crate::model::{RtlDesign, VerdictStatus};

    fn d(src: &str) -> RtlDesign {
        RtlDesign::new("t", src).unwrap()
    }

    fn quick() -> StimulusConfig {
        StimulusConfig {
            num_sequences: 2,
            cycles_per_sequence: 64,
            ..StimulusConfig::default()
        }
    }

    #[test]
    fn combinational_pair() {
        let a = d("module f(input [7:0] a, input [7:0] b, output [8:0] s); assign s = a + b; endmodule");
        let b = d("module f(input [7:0] a, input [7:0] b, output [8:0] s); assign s = b + a; endmodule");
        let c = d("module f(input [7:0] a, input [7:0] b, output [8:0] s); assign s = a - b; endmodule");
        let sim = BuiltinSimulator::new();
        assert_eq!(
            check_equivalence(&a, &b, &sim, &quick()).unwrap().status,
            VerdictStatus::Equivalent
        );
        let v = check_equivalence(&a, &c, &sim, &quick()).unwrap();
        assert_eq!(v.status, VerdictStatus::Inequivalent);
        assert!(v.detail.starts_with("output s differs at cycle 0: "), "{}", v.detail);
    }

    #[test]
    fn sequential_pair_with_reset() {
        let a = d("module c(input clk, input rst, input en, output reg [3:0] q);
                   always @(posedge clk) if (rst) q <= 0; else if (en) q <= q + 1; endmodule");
        let b = d("module c(input clk, input rst, input en, output reg [3:0] q);
                   always @(posedge clk) begin if (rst) q <= 4'd0; else q <= q + {3'b0, en}; end endmodule");
        let off = d("module c(input clk, input rst, input en, output reg [3:0] q);
                   always @(posedge clk) if (rst) q <= 1; else if (en) q <= q + 1; endmodule");
        let sim = BuiltinSimulator::new();
        assert_eq!(
            check_equivalence(&a, &b, &sim, &quick()).unwrap().status,
            VerdictStatus::Equivalent
        );
        assert_eq!(
            check_equivalence(&a, &off, &sim, &quick()).unwrap().status,
            VerdictStatus::Inequivalent
        );
    }

    #[test]
    fn rewrite_with_other_top_name_and_helpers() {
        let a = d("module f(input [3:0] a, output [3:0] y); assign y = ~a; endmodule");
        let b = d("module inv(input [3:0] i, output [3:0] o); assign o = ~i; endmodule
                   module g(input [3:0] a, output [3:0] y); inv u(.i(a), .o(y)); endmodule");
        let sim = BuiltinSimulator::new();
        assert_eq!(
            check_equivalence(&a, &b, &sim, &quick()).unwrap().status,
            VerdictStatus::Equivalent
        );
    }

    #[test]
    fn unparsable_rewrite_is_inconclusive_but_bad_original_is_error() {
        let good = d("module f(input a, output y); assign y = a; endmodule");
        let bad = d("module f(input a, output y); assign y = ; endmodule");
        let sim = BuiltinSimulator::new();
        assert_eq!(
            check_equivalence(&good, &bad, &sim, &quick()).unwrap().status,
            VerdictStatus::Inconclusive
        );
        let garbage = d("this is not verilog");
        assert!(check_equivalence(&garbage, &good, &sim, &quick()).is_err());
    }

    #[test]
    fn interface_mismatch_is_inconclusive() {
        let a = d("module f(input [3:0] a, output [3:0] y); assign y = a; endmodule");
        let b = d("module f(input [4:0] a, output [3:0] y); assign y = a[3:0]; endmodule");
        let sim = BuiltinSimulator::new();
        let v = check_equivalence(&a, &b, &sim, &quick()).unwrap();
        assert_eq!(v.status, VerdictStatus::Inconclusive);
        assert!(v.detail.contains("interface mismatch"));
    }

    #[test]
    fn identical_registers_match() {
        let a = d("module f(input clk, input d, output reg q); always @(posedge clk) q <= d; endmodule");
        let b = d("module f(input clk, input d, output reg q); always @(posedge clk) q <= d; endmodule");
        let sim = BuiltinSimulator::new();
        assert_eq!(
            check_equivalence(&a, &b, &sim, &quick()).unwrap().status,
            VerdictStatus::Equivalent
        );
    }
}
