// SPDX-License-Identifier: Apache-2.0

use crate::equiv::{check_equivalence, SimulatorAdapter, StimulusConfig};
use crate::error::Result;
use crate::llm::{GenerationConfig, LlmAdapter};
use crate::model::{EquivalenceVerdict, PpaMetrics, RtlDesign, Target};
use crate::synth::{SynthesisAdapter, SynthesisConstraints};

/// The adapters and settings every pipeline stage needs.
#[derive(Clone, Copy)]
pub struct Toolchain<'a> {
    pub llm: &'a dyn LlmAdapter,
    pub synth: &'a dyn SynthesisAdapter,
    pub sim: &'a dyn SimulatorAdapter,
    pub stimulus: StimulusConfig,
    pub generation: GenerationConfig,
    pub constraints: &'a SynthesisConstraints,
    pub target: Target,
}

impl Toolchain<'_> {
    pub fn equivalence(&self, original: &RtlDesign, rewrite: &RtlDesign) -> Result<EquivalenceVerdict> {
        check_equivalence(original, rewrite, self.sim, &self.stimulus)
    }

    pub fn measure(&self, design: &RtlDesign) -> Result<PpaMetrics> {
        Ok(self.synth.synthesize(design, self.constraints)?.retarget(self.target))
    }
}
