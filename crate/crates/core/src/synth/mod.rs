// SPDX-License-Identifier: Apache-2.0

//! PPA measurement behind a common adapter, plus report parsing.

mod command;
pub mod mock;

use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

pub use command::{CommandSynthesizer, FlowCommands};

use crate::error::{Error, Result};
use crate::model::{PpaMetrics, RtlDesign, Target};
use crate::verilog::{find_top, unresolved_modules};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Flow {
    /// Elaborate and map only; used for filtering.
    Lightweight,
    #[default]
    Accurate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthesisConstraints {
    pub target_library: String,
    /// Clock period in ns; unconstrained when absent.
    pub clock_period: Option<f64>,
    pub flow: Flow,
}

impl Default for SynthesisConstraints {
    fn default() -> Self {
        SynthesisConstraints {
            target_library: "freepdk45".into(),
            clock_period: None,
            flow: Flow::Accurate,
        }
    }
}

impl SynthesisConstraints {
    pub fn validate(&self) -> Result<()> {
        match self.clock_period {
            Some(p) if !(p > 0.0 && p.is_finite()) => {
                Err(Error::Domain(format!("clock period must be positive, got {p}")))
            }
            _ => Ok(()),
        }
    }
}

pub trait SynthesisAdapter: Send + Sync {
    fn name(&self) -> &str;
    fn version(&self) -> String;
    /// Whether the design elaborates and maps without error. Unresolved
    /// module references make a design not synthesizable.
    fn check_synthesizable(&self, design: &RtlDesign) -> Result<bool>;
    /// Area, delay and power; the returned target is [`Target::Area`].
    fn synthesize(&self, design: &RtlDesign, constraints: &SynthesisConstraints) -> Result<PpaMetrics>;
}

/// Self-containedness check shared by adapters.
pub fn is_self_contained(design: &RtlDesign) -> bool {
    let top_ok = match &design.top_module {
        Some(t) => crate::verilog::module_names(&design.source).is_ok_and(|names| names.contains(t)),
        None => find_top(&design.source).is_ok(),
    };
    top_ok && unresolved_modules(&design.source).is_ok_and(|u| u.is_empty())
}

/// Deterministic proxy adapter; see [`mock`] for the cost model.
#[derive(Debug, Default, Clone, Copy)]
pub struct MockSynthesizer;

impl MockSynthesizer {
    pub fn new() -> Self {
        MockSynthesizer
    }

    pub fn report(&self, design: &RtlDesign) -> Result<String> {
        let top = match &design.top_module {
            Some(t) => t.clone(),
            None => find_top(&design.source)?,
        };
        Ok(mock::estimate(&design.source)?.report(&top))
    }
}

impl SynthesisAdapter for MockSynthesizer {
    fn name(&self) -> &str {
        "mock"
    }

    fn version(&self) -> String {
        "mock-1".into()
    }

    fn check_synthesizable(&self, design: &RtlDesign) -> Result<bool> {
        if !is_self_contained(design) {
            return Ok(false);
        }
        let top = match &design.top_module {
            Some(t) => t.clone(),
            None => find_top(&design.source)?,
        };
        Ok(rtlopt_vsim::compile(&design.source, &top).is_ok())
    }

    fn synthesize(&self, design: &RtlDesign, constraints: &SynthesisConstraints) -> Result<PpaMetrics> {
        constraints.validate()?;
        parse_report(&self.report(design)?, "mock")
    }
}

const NUM: &str = r"([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)";

static MOCK_LINE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(&format!(r"(?m)^\s*(area|delay|power)\s*:\s*{NUM}\s*$")).expect("valid regex"));
static CHIP_AREA: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(&format!(
        r"(?m)^\s*Chip area for (top module|module)\s+'?\\?([^':]*)'?\s*:\s*{NUM}\s*$"
    ))
    .expect("valid regex")
});
static ARRIVAL: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(&format!(r"(?m)^\s*{NUM}\s+data arrival time\s*$")).expect("valid regex"));
static POWER_TOTAL: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(&format!(r"(?m)^\s*Total\s+{NUM}\s+{NUM}\s+{NUM}\s+{NUM}")).expect("valid regex"));

fn number(s: &str) -> Result<f64> {
    s.parse::<f64>()
        .map_err(|_| Error::Parse(format!("bad number '{s}' in report")))
}

/// The single value in `values`, tolerating exact duplicates.
fn unique(metric: &'static str, values: &[f64]) -> Result<f64> {
    match values.split_first() {
        None => Err(Error::MissingMetric(metric)),
        Some((first, rest)) => {
            if let Some(other) = rest.iter().find(|v| *v != first) {
                return Err(Error::Parse(format!("conflicting {metric} values {first} and {other}")));
            }
            Ok(*first)
        }
    }
}

/// Extracts area (µm²), delay (ns) and power (mW) from tool output.
///
/// Schemas:
/// * `mock`: `area:`, `delay:` and `power:` lines.
/// * `open`: Yosys `Chip area for module` (a `top module` line wins when
///   present), the first positive OpenSTA `data arrival time`, and the
///   `Total` row of `report_power` with internal plus switching power in
///   watts.
pub fn parse_report(raw: &str, schema: &str) -> Result<PpaMetrics> {
    if raw.trim().is_empty() {
        return Err(Error::Parse("empty report".into()));
    }
    let (area, delay, power) = match schema {
        "mock" => {
            let mut by: [Vec<f64>; 3] = Default::default();
            for c in MOCK_LINE.captures_iter(raw) {
                let slot = match &c[1] {
                    "area" => 0,
                    "delay" => 1,
                    _ => 2,
                };
                by[slot].push(number(&c[2])?);
            }
            (
                unique("area", &by[0])?,
                unique("delay", &by[1])?,
                unique("power", &by[2])?,
            )
        }
        "open" | "yosys-sta" => {
            let mut top = Vec::new();
            let mut module = Vec::new();
            for c in CHIP_AREA.captures_iter(raw) {
                let v = number(&c[3])?;
                if &c[1] == "top module" {
                    top.push(v);
                } else {
                    module.push(v);
                }
            }
            let area = unique("area", if top.is_empty() { &module } else { &top })?;
            let mut arrivals = Vec::new();
            for c in ARRIVAL.captures_iter(raw) {
                arrivals.push(number(&c[1])?);
            }
            let delay = arrivals
                .iter()
                .copied()
                .find(|v| *v > 0.0)
                .or_else(|| arrivals.first().map(|v| v.abs()))
                .ok_or(Error::MissingMetric("delay"))?;
            let mut totals = Vec::new();
            for c in POWER_TOTAL.captures_iter(raw) {
                let internal = number(&c[1])?;
                let switching = number(&c[2])?;
                totals.push((internal + switching) * 1000.0);
            }
            (area, delay, unique("power", &totals)?)
        }
        other => return Err(Error::Parse(format!("unknown report schema '{other}'"))),
    };
    PpaMetrics::new(area, delay, power, Target::Area).map_err(|e| Error::Parse(e.to_string()))
}
