// SPDX-License-Identifier: Apache-2.0

//! Comparison testbench generation.
//!
//! The first line of every testbench is a `// rtlopt-plan:` comment holding
//! the stimulus plan as JSON, so the built-in simulator can replay exactly
//! what the Verilog text describes without parsing the testbench itself.
//!
//! Stimulus: each sequence seeds a xorshift64 generator (shifts 13, 7, 17)
//! with `splitmix64(seed + (seq + 1) · 0x9E3779B97F4A7C15)`. Every cycle,
//! data inputs are drawn in declaration order, each taking `ceil(width/64)`
//! generator words, least significant word first.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::StimulusConfig;
use crate::error::{Error, Result};
use crate::verilog::{Direction, ModuleInterface};

pub const PLAN_PREFIX: &str = "// rtlopt-plan: ";
pub const HALF_PERIOD: u32 = 5;
const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Signal {
    pub name: String,
    pub width: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResetSignal {
    pub name: String,
    pub active_low: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestbenchPlan {
    pub dut_a: String,
    pub dut_b: String,
    pub clock: Option<String>,
    pub resets: Vec<ResetSignal>,
    /// Randomized inputs, in declaration order.
    pub inputs: Vec<Signal>,
    pub outputs: Vec<Signal>,
    pub sequences: u32,
    pub cycles: u32,
    pub reset_cycles: u32,
    pub settle: u32,
    pub seeds: Vec<u64>,
}

impl TestbenchPlan {
    pub fn from_testbench(tb: &str) -> Result<Self> {
        let first = tb.lines().next().unwrap_or_default();
        let json = first
            .strip_prefix(PLAN_PREFIX)
            .ok_or_else(|| Error::Parse("testbench has no plan header".into()))?;
        serde_json::from_str(json).map_err(|e| Error::Parse(format!("bad plan header: {e}")))
    }
}

pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn xorshift64(mut x: u64) -> u64 {
    x ^= x << 13;
    x ^= x >> 7;
    x ^= x << 17;
    x
}

/// Non-zero generator state for sequence `seq`.
pub fn sequence_seed(seed: u64, seq: u32) -> u64 {
    let s = splitmix64(seed.wrapping_add((seq as u64 + 1).wrapping_mul(GOLDEN)));
    if s == 0 {
        GOLDEN
    } else {
        s
    }
}

pub fn plan_for(iface: &ModuleInterface, cfg: &StimulusConfig, dut_a: &str, dut_b: &str) -> Result<TestbenchPlan> {
    cfg.validate()?;
    if let Some(p) = iface.ports.iter().find(|p| p.direction == Direction::Inout) {
        return Err(Error::Unsupported(format!("inout port '{}'", p.name)));
    }
    let outputs: Vec<Signal> = iface
        .outputs()
        .map(|p| Signal {
            name: p.name.clone(),
            width: p.width,
        })
        .collect();
    if outputs.is_empty() {
        return Err(Error::NoOutputs(iface.top_module.clone()));
    }
    let clock = iface.clock().map(|p| p.name.clone());
    let sequential = clock.is_some();
    let resets: Vec<ResetSignal> = if sequential {
        iface
            .resets()
            .map(|p| ResetSignal {
                name: p.name.clone(),
                active_low: p.reset_active_low,
            })
            .collect()
    } else {
        Vec::new()
    };
    let inputs = iface
        .inputs()
        .filter(|p| !p.is_clock && !(sequential && p.is_reset))
        .map(|p| Signal {
            name: p.name.clone(),
            width: p.width,
        })
        .collect();
    Ok(TestbenchPlan {
        dut_a: dut_a.to_string(),
        dut_b: dut_b.to_string(),
        clock,
        resets,
        inputs,
        outputs,
        sequences: cfg.num_sequences,
        cycles: cfg.cycles_per_sequence,
        reset_cycles: cfg.reset_cycles,
        settle: cfg.settle_time,
        seeds: (0..cfg.num_sequences).map(|s| sequence_seed(cfg.seed, s)).collect(),
    })
}

/// Emits the testbench for the DUT pair `<top>__a` / `<top>__b`.
pub fn generate_testbench(iface: &ModuleInterface, cfg: &StimulusConfig) -> Result<String> {
    let plan = plan_for(
        iface,
        cfg,
        &format!("{}__a", iface.top_module),
        &format!("{}__b", iface.top_module),
    )?;
    Ok(render(&plan))
}

fn range(width: u32) -> String {
    if width == 1 {
        String::new()
    } else {
        format!("[{}:0] ", width - 1)
    }
}

/// Renders the plan as a self-checking Verilog-2005 testbench.
pub fn render(plan: &TestbenchPlan) -> String {
    let mut s = String::new();
    let json = serde_json::to_string(plan).expect("plan serializes");
    let _ = writeln!(s, "{PLAN_PREFIX}{json}");
    s.push_str("`timescale 1ns/1ps\nmodule tb;\n");
    if plan.clock.is_some() {
        s.push_str("  reg tb_clk;\n");
    }
    for (i, _) in plan.resets.iter().enumerate() {
        let _ = writeln!(s, "  reg rs_{i};");
    }
    for (i, p) in plan.inputs.iter().enumerate() {
        let _ = writeln!(s, "  reg {}in_{i};", range(p.width));
    }
    for (i, p) in plan.outputs.iter().enumerate() {
        let _ = writeln!(s, "  wire {}oa_{i}, ob_{i};", range(p.width));
    }
    s.push_str("  reg [63:0] rng;\n  integer seq, cyc, gcycle;\n\n");

    for (dut, inst, prefix) in [(&plan.dut_a, "dut_a", "oa"), (&plan.dut_b, "dut_b", "ob")] {
        let mut conns = Vec::new();
        if let Some(c) = &plan.clock {
            conns.push(format!(".{c}(tb_clk)"));
        }
        for (i, r) in plan.resets.iter().enumerate() {
            conns.push(format!(".{}(rs_{i})", r.name));
        }
        for (i, p) in plan.inputs.iter().enumerate() {
            conns.push(format!(".{}(in_{i})", p.name));
        }
        for (i, p) in plan.outputs.iter().enumerate() {
            conns.push(format!(".{}({prefix}_{i})", p.name));
        }
        let _ = writeln!(s, "  {dut} {inst} (\n    {}\n  );", conns.join(",\n    "));
    }

    s.push_str(
        "\n  function [63:0] xorshift64;\n    input [63:0] st;\n    reg [63:0] x;\n    begin\n      \
         x = st;\n      x = x ^ (x << 13);\n      x = x ^ (x >> 7);\n      x = x ^ (x << 17);\n      \
         xorshift64 = x;\n    end\n  endfunction\n\n",
    );

    s.push_str("  task drive_inputs;\n    begin\n");
    for (i, p) in plan.inputs.iter().enumerate() {
        let words = p.width.div_ceil(64);
        for w in 0..words {
            let lo = w * 64;
            let hi = (lo + 64).min(p.width) - 1;
            let take = hi - lo + 1;
            let src = if take == 64 {
                "rng".to_string()
            } else {
                format!("rng[{}:0]", take - 1)
            };
            let dst = if words == 1 && p.width == take {
                format!("in_{i}")
            } else {
                format!("in_{i}[{hi}:{lo}]")
            };
            let _ = writeln!(s, "      rng = xorshift64(rng);\n      {dst} = {src};");
        }
    }
    s.push_str("    end\n  endtask\n\n");

    s.push_str("  task check_outputs;\n    begin\n");
    for (i, p) in plan.outputs.iter().enumerate() {
        let _ = writeln!(
            s,
            "      if (oa_{i} !== ob_{i}) begin\n        $display(\"MISMATCH %s %0d %h %h\", \"{}\", gcycle, oa_{i}, ob_{i});\n        \
             $display(\"FAIL\");\n        $finish;\n      end",
            p.name
        );
    }
    s.push_str("    end\n  endtask\n\n");

    if plan.clock.is_some() {
        let _ = writeln!(
            s,
            "  initial tb_clk = 1'b0;\n  always #{HALF_PERIOD} tb_clk = ~tb_clk;\n"
        );
    }

    s.push_str("  initial begin\n    gcycle = 0;\n");
    let _ = writeln!(s, "    for (seq = 0; seq < {}; seq = seq + 1) begin", plan.sequences);
    s.push_str("      case (seq)\n");
    for (i, seed) in plan.seeds.iter().enumerate() {
        let _ = writeln!(s, "        {i}: rng = 64'h{seed:016x};");
    }
    s.push_str("      endcase\n");
    if plan.clock.is_some() {
        for (i, _) in plan.inputs.iter().enumerate() {
            let _ = writeln!(s, "      in_{i} = 0;");
        }
        for (i, r) in plan.resets.iter().enumerate() {
            let _ = writeln!(s, "      rs_{i} = 1'b{};", if r.active_low { 0 } else { 1 });
        }
        let _ = writeln!(
            s,
            "      repeat ({}) @(posedge tb_clk);\n      @(negedge tb_clk);\n      #1;",
            plan.reset_cycles
        );
        for (i, r) in plan.resets.iter().enumerate() {
            let _ = writeln!(s, "      rs_{i} = 1'b{};", if r.active_low { 1 } else { 0 });
        }
        let _ = writeln!(
            s,
            "      for (cyc = 0; cyc < {}; cyc = cyc + 1) begin\n        drive_inputs;\n        \
             @(negedge tb_clk);\n        #1;\n        check_outputs;\n        gcycle = gcycle + 1;\n      end",
            plan.cycles
        );
    } else {
        let _ = writeln!(
            s,
            "      for (cyc = 0; cyc < {}; cyc = cyc + 1) begin\n        drive_inputs;\n        \
             #{};\n        check_outputs;\n        gcycle = gcycle + 1;\n      end",
            plan.cycles, plan.settle
        );
    }
    s.push_str("    end\n    $display(\"PASS\");\n    $finish;\n  end\nendmodule\n");
    s
}
