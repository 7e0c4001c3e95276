// SPDX-License-Identifier: Apache-2.0

//! Exhaustive comparison of small combinational designs: every input
//! assignment is applied to both designs and every output compared.

use rtlopt_vsim::{compile, Logic, Simulator};

use crate::error::{Error, Result};
use crate::model::RtlDesign;
use crate::verilog::{extract_interface, find_top};

/// A differing input assignment, as `(port, value)` pairs, plus the first
/// output that differs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Counterexample {
    pub inputs: Vec<(String, u128)>,
    pub output: String,
}

fn simulator(d: &RtlDesign) -> Result<Simulator> {
    let top = match &d.top_module {
        Some(t) => t.clone(),
        None => find_top(&d.source)?,
    };
    let design = compile(&d.source, &top).map_err(|e| Error::Input(format!("{}: {e}", d.design_id)))?;
    Simulator::new(design).map_err(|e| Error::Input(format!("{}: {e}", d.design_id)))
}

/// Compares `a` and `b` on all `2^bits` input assignments, where `bits` is
/// the total input width and must not exceed `max_bits`. Returns the first
/// counterexample in counting order, or `None` when the designs agree
/// everywhere (4-state exact comparison).
pub fn compare(a: &RtlDesign, b: &RtlDesign, max_bits: u32) -> Result<Option<Counterexample>> {
    let iface = extract_interface(a)?;
    if iface.is_sequential {
        return Err(Error::Unsupported(format!("{} is sequential", a.design_id)));
    }
    let inputs: Vec<(String, u32)> = iface.inputs().map(|p| (p.name.clone(), p.width)).collect();
    let outputs: Vec<String> = iface.outputs().map(|p| p.name.clone()).collect();
    let bits: u32 = inputs.iter().map(|(_, w)| *w).sum();
    if bits > max_bits || bits > 24 {
        return Err(Error::Domain(format!(
            "{bits} input bits exceed the limit of {max_bits}"
        )));
    }
    let mut sa = simulator(a)?;
    let mut sb = simulator(b)?;
    let sim_err = |e: rtlopt_vsim::VsimError| Error::Input(e.to_string());
    for word in 0u64..(1u64 << bits) {
        let mut shift = 0;
        let mut applied = Vec::with_capacity(inputs.len());
        for (name, w) in &inputs {
            let v = ((word >> shift) as u128) & ((1u128 << w) - 1);
            shift += w;
            sa.set(name, Logic::new(*w, v)).map_err(sim_err)?;
            sb.set(name, Logic::new(*w, v)).map_err(sim_err)?;
            applied.push((name.clone(), v));
        }
        sa.settle().map_err(sim_err)?;
        sb.settle().map_err(sim_err)?;
        for o in &outputs {
            let (va, vb) = (sa.get(o), sb.get(o));
            let same = match (&va, &vb) {
                (Some(x), Some(y)) => x.case_eq(y),
                _ => false,
            };
            if !same {
                return Ok(Some(Counterexample {
                    inputs: applied,
                    output: o.clone(),
                }));
            }
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(id: &str, src: &str) -> RtlDesign {
        RtlDesign::new(id, src).unwrap()
    }

    #[test]
    fn finds_the_single_differing_point() {
        let a = d("a", "module m(input [3:0] a, b, output y); assign y = a < b; endmodule");
        let b = d(
            "b",
            "module m(input [3:0] a, b, output y); assign y = a <= b; endmodule",
        );
        let cex = compare(&a, &b, 16).unwrap().unwrap();
        assert_eq!(cex.inputs, [("a".to_string(), 0), ("b".to_string(), 0)]);
        assert_eq!(cex.output, "y");
    }

    #[test]
    fn agrees_with_restructured_logic() {
        let a = d(
            "a",
            "module m(input [3:0] a, b, m, output [3:0] y); assign y = (a & m) | (b & ~m); endmodule",
        );
        let b = d(
            "b",
            "module m(input [3:0] a, b, m, output [3:0] y); assign y = b ^ ((a ^ b) & m); endmodule",
        );
        assert_eq!(compare(&a, &b, 16).unwrap(), None);
    }

    #[test]
    fn refuses_large_or_sequential_designs() {
        let wide = d("w", "module m(input [8:0] a, b, output y); assign y = a < b; endmodule");
        assert!(compare(&wide, &wide, 16).is_err());
        let seq = d(
            "s",
            "module m(input clk, input a, output reg q); always @(posedge clk) q <= a; endmodule",
        );
        assert!(matches!(compare(&seq, &seq, 16), Err(Error::Unsupported(_))));
    }
}
