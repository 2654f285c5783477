//! Layers 2–4: a per-pixel leaky integrate-and-fire network.
//!
//! Each pixel owns three neurons wired 1:1 along the pixel index:
//!
//! ```text
//!   diff ──c·w_p2i──▶ L2 ──w_syn──▶ L4
//!                      │             ▲
//!                      └─(1 step)──▶ L3 ──w_syn──┘
//! ```
//!
//! L2 spikes reach L4 in the same timestep and L3 one timestep later, so L4
//! responds both to the newest frame difference and to the one before it.
//!
//! Membrane dynamics follow `τ_m dV/dt = −(V − E_L) + R·I`, integrated with
//! the exact exponential update for a current held constant over `δt`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::{Plane, MIN_PAR_LEN};
use crate::subtraction::DiffFrame;

/// Injected current per pixel.
pub type CurrentField = Plane<f64>;
/// Binary spike flag per pixel.
pub type SpikeField = Plane<bool>;
/// L4 spikes per pixel over one frame.
pub type SpikeCountField = Plane<u32>;

/// Conversion constant from pixel intensity to current.
pub const DEFAULT_CONVERSION: f64 = 17.5;

/// LIF constants. Times in ms, potentials in mV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NeuronParams {
    pub tau_m: f64,
    /// Gain applied to the injected (dimensionless) current.
    pub resistance: f64,
    pub e_leak: f64,
    pub v_reset: f64,
    /// Floor of the membrane potential.
    pub v_min: f64,
    pub v_threshold: f64,
    pub t_ref: f64,
    pub dt: f64,
}

impl Default for NeuronParams {
    fn default() -> Self {
        NeuronParams {
            tau_m: 10.0,
            resistance: 1.0,
            e_leak: -70.0,
            v_reset: -70.0,
            v_min: -70.0,
            v_threshold: -55.0,
            t_ref: 2.0,
            dt: 10.0,
        }
    }
}

impl NeuronParams {
    // negated comparisons so that NaN fields are reported too
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn violations(&self, prefix: &str) -> Vec<String> {
        let mut out = Vec::new();
        let finite = [
            ("tau_m", self.tau_m),
            ("resistance", self.resistance),
            ("e_leak", self.e_leak),
            ("v_reset", self.v_reset),
            ("v_min", self.v_min),
            ("t_ref", self.t_ref),
            ("dt", self.dt),
        ];
        for (name, v) in finite {
            if !v.is_finite() {
                out.push(format!("{prefix}{name} ({v}) must be finite"));
            }
        }
        if self.v_threshold.is_nan() {
            out.push(format!("{prefix}v_threshold must not be NaN"));
        }
        if !(self.tau_m > 0.0) {
            out.push(format!("{prefix}tau_m ({}) must be positive", self.tau_m));
        }
        if !(self.dt > 0.0) {
            out.push(format!("{prefix}dt ({}) must be positive", self.dt));
        }
        if !(self.v_threshold > self.v_reset) {
            out.push(format!(
                "{prefix}v_threshold ({}) must exceed {prefix}v_reset ({})",
                self.v_threshold, self.v_reset
            ));
        }
        if !(self.v_min <= self.v_reset) {
            out.push(format!(
                "{prefix}v_min ({}) must not exceed {prefix}v_reset ({})",
                self.v_min, self.v_reset
            ));
        }
        if !(self.t_ref >= 0.0) {
            out.push(format!("{prefix}t_ref ({}) must be non-negative", self.t_ref));
        }
        out
    }

    fn validate(&self) -> Result<()> {
        let v = self.violations("");
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(v))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NeuronState {
    pub v: f64,
    /// Refractory time still to serve, in ms.
    pub refractory: f64,
    pub spiked: bool,
}

impl NeuronState {
    pub fn resting(p: &NeuronParams) -> Self {
        NeuronState {
            v: p.e_leak,
            refractory: 0.0,
            spiked: false,
        }
    }
}

/// Fixed synaptic gains.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynapseWeights {
    /// Gain on the encoded pixel current entering L2.
    pub p2i: f64,
    /// Spike-to-current weight on L2→L3, L2→L4 and L3→L4.
    pub syn: f64,
}

impl Default for SynapseWeights {
    fn default() -> Self {
        SynapseWeights {
            p2i: 8.0,
            syn: 1555.0,
        }
    }
}

impl SynapseWeights {
    pub fn violations(&self, prefix: &str) -> Vec<String> {
        [("p2i", self.p2i), ("syn", self.syn)]
            .into_iter()
            .filter(|(_, v)| !(v.is_finite() && *v > 0.0))
            .map(|(name, v)| format!("{prefix}{name} ({v}) must be finite and positive"))
            .collect()
    }
}

/// Parameters with the per-step decay factor precomputed.
#[derive(Clone, Debug)]
struct LifKernel {
    p: NeuronParams,
    decay: f64,
}

impl LifKernel {
    fn new(p: &NeuronParams) -> Self {
        LifKernel {
            p: p.clone(),
            decay: (-p.dt / p.tau_m).exp(),
        }
    }

    /// Advances one `dt` under constant `current`. Returns whether the
    /// neuron fired.
    ///
    /// Refractory time shorter than `dt` only eats the front of the step: the
    /// neuron integrates from `v_reset` for the remainder.
    #[inline]
    fn advance(&self, s: &mut NeuronState, current: f64) -> bool {
        let p = &self.p;
        let mut decay = self.decay;
        if s.refractory > 0.0 {
            if s.refractory >= p.dt {
                s.refractory -= p.dt;
                s.v = p.v_reset;
                s.spiked = false;
                return false;
            }
            decay = (-(p.dt - s.refractory) / p.tau_m).exp();
            s.refractory = 0.0;
            s.v = p.v_reset;
        }
        let target = p.e_leak + p.resistance * current;
        let v = (target + (s.v - target) * decay).max(p.v_min);
        if v >= p.v_threshold {
            s.v = p.v_reset;
            s.refractory = p.t_ref;
            s.spiked = true;
        } else {
            s.v = v;
            s.spiked = false;
        }
        s.spiked
    }
}

/// One integration step of a single neuron.
pub fn lif_step(state: NeuronState, current: f64, p: &NeuronParams) -> Result<(NeuronState, bool)> {
    if !current.is_finite() {
        return Err(Error::NonFiniteCurrent(current));
    }
    p.validate()?;
    let mut next = state;
    let spiked = LifKernel::new(p).advance(&mut next, current);
    Ok((next, spiked))
}

/// `i_c = I · c` per pixel.
pub fn encode_currents(diff: &DiffFrame, c: f64) -> CurrentField {
    diff.par_map(|&v| f64::from(v) * c)
}

/// Three per-pixel LIF layers plus the L3 input buffer.
#[derive(Clone, Debug)]
pub struct Network {
    width: usize,
    height: usize,
    kernel: LifKernel,
    weights: SynapseWeights,
    conversion: f64,
    l2: Vec<NeuronState>,
    l3: Vec<NeuronState>,
    l4: Vec<NeuronState>,
    /// L2 spikes of the previous timestep, consumed by L3.
    l3_buffer: Vec<bool>,
}

impl Network {
    pub fn new(
        width: usize,
        height: usize,
        params: &NeuronParams,
        weights: &SynapseWeights,
        conversion: f64,
    ) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidFrame(format!(
                "cannot build a network for a {width}x{height} frame"
            )));
        }
        let mut problems = params.violations("neuron.");
        problems.extend(weights.violations("snn.w_"));
        if !conversion.is_finite() {
            problems.push(format!("snn.c ({conversion}) must be finite"));
        }
        if !problems.is_empty() {
            return Err(Error::InvalidConfig(problems));
        }
        let n = width * height;
        let rest = NeuronState::resting(params);
        Ok(Network {
            width,
            height,
            kernel: LifKernel::new(params),
            weights: weights.clone(),
            conversion,
            l2: vec![rest; n],
            l3: vec![rest; n],
            l4: vec![rest; n],
            l3_buffer: vec![false; n],
        })
    }

    pub fn dimensions(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn neurons_per_layer(&self) -> usize {
        self.width * self.height
    }

    pub fn params(&self) -> &NeuronParams {
        &self.kernel.p
    }

    pub fn weights(&self) -> &SynapseWeights {
        &self.weights
    }

    pub fn conversion(&self) -> f64 {
        self.conversion
    }

    pub fn layer2(&self) -> &[NeuronState] {
        &self.l2
    }

    pub fn layer3(&self) -> &[NeuronState] {
        &self.l3
    }

    pub fn layer4(&self) -> &[NeuronState] {
        &self.l4
    }

    pub fn l3_buffer(&self) -> &[bool] {
        &self.l3_buffer
    }

    /// Spike flags of the last timestep for layer `2`, `3` or `4`.
    pub fn spike_plane(&self, layer: u8) -> SpikeField {
        let states = match layer {
            2 => &self.l2,
            3 => &self.l3,
            4 => &self.l4,
            _ => panic!("no layer {layer}"),
        };
        Plane::new(
            self.width,
            self.height,
            states.iter().map(|s| s.spiked).collect(),
        )
        .expect("layer matches network size")
    }

    fn check_size<T>(&self, field: &Plane<T>) -> Result<()> {
        if field.dimensions() != self.dimensions() {
            return Err(Error::DimensionMismatch {
                expected: self.dimensions(),
                actual: field.dimensions(),
            });
        }
        Ok(())
    }

    /// Advances every pixel column by one timestep and returns the L4 spikes.
    pub fn step(&mut self, currents: &CurrentField) -> Result<SpikeField> {
        self.check_size(currents)?;
        if let Some(&bad) = currents.data().iter().find(|c| !c.is_finite()) {
            return Err(Error::NonFiniteCurrent(bad));
        }
        let mut out = vec![false; self.l2.len()];
        self.step_into(currents.data(), |i, fired| out[i] = fired);
        Ok(Plane::new(self.width, self.height, out).expect("sized above"))
    }

    fn step_into(&mut self, currents: &[f64], mut sink: impl FnMut(usize, bool)) {
        let kernel = &self.kernel;
        let p2i = self.weights.p2i;
        let syn = self.weights.syn;
        let fired: Vec<bool> = (
            self.l2.par_iter_mut(),
            self.l3.par_iter_mut(),
            self.l4.par_iter_mut(),
            self.l3_buffer.par_iter_mut(),
            currents.par_iter(),
        )
            .into_par_iter()
            .with_min_len(MIN_PAR_LEN)
            .map(|(l2, l3, l4, buffered, &current)| {
                let s2 = kernel.advance(l2, p2i * current);
                let s3 = kernel.advance(l3, if *buffered { syn } else { 0.0 });
                let drive4 = syn * (f64::from(u8::from(s2)) + f64::from(u8::from(s3)));
                let s4 = kernel.advance(l4, drive4);
                *buffered = s2;
                s4
            })
            .collect();
        for (i, f) in fired.into_iter().enumerate() {
            sink(i, f);
        }
    }

    /// Simulates one frame: encodes `diff` once, holds the currents for
    /// `substeps` timesteps and counts L4 spikes per pixel.
    pub fn run_frame(&mut self, diff: &DiffFrame, substeps: usize) -> Result<SpikeCountField> {
        if substeps == 0 {
            return Err(Error::InvalidConfig(vec![
                "snn.substeps must be at least 1".into(),
            ]));
        }
        self.check_size(diff)?;
        let currents = encode_currents(diff, self.conversion);
        let mut counts = vec![0u32; self.l2.len()];
        for _ in 0..substeps {
            self.step_into(currents.data(), |i, fired| counts[i] += u32::from(fired));
        }
        Ok(Plane::new(self.width, self.height, counts).expect("sized above"))
    }
}
