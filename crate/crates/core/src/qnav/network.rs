use super::arena::DepthReading;
use super::QnavError;
use crate::macmodel::{quantize, BitWidth, EnergyParams, MacModel, Operand, OperandMatrix};
use crate::stochsyn::{drop_mask, DropMask, Lfsr, StochError};

/// Network operand width.
pub const NET_BITS: u8 = 6;

/// MAC model plus the energy coefficients it is metered with.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hardware {
    pub model: MacModel,
    pub params: EnergyParams,
}

impl Hardware {
    pub fn new(model: MacModel, params: EnergyParams) -> Self {
        Self { model, params }
    }
}

/// Fixed-point scales linking integer codes to real values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetScales {
    /// Real value of one input code step.
    pub input_lsb: f64,
    /// Weights are quantized over `[-weight_range, weight_range]`.
    pub weight_range: f64,
    /// Hidden activations are quantized over `[0, hidden_range]`.
    pub hidden_range: f64,
}

impl Default for NetScales {
    fn default() -> Self {
        Self { input_lsb: 0.125, weight_range: 1.0, hidden_range: 4.0 }
    }
}

impl NetScales {
    fn full(self) -> f64 {
        bits().max_magnitude() as f64
    }

    pub fn weight_lsb(self) -> f64 {
        self.weight_range / self.full()
    }

    pub fn hidden_lsb(self) -> f64 {
        self.hidden_range / self.full()
    }
}

fn bits() -> BitWidth {
    BitWidth::new(NET_BITS).expect("6 is a valid width")
}

/// Drop-connect masks for the two weight matrices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskPair {
    pub hidden: DropMask,
    pub output: DropMask,
}

impl MaskPair {
    pub fn draw(net: &QNetwork, p: f64, rng: Lfsr) -> Result<(MaskPair, Lfsr), StochError> {
        let (hidden, rng) = drop_mask(net.w1.shape(), p, rng)?;
        let (output, rng) = drop_mask(net.w2.shape(), p, rng)?;
        Ok((MaskPair { hidden, output }, rng))
    }

    pub fn all_drop(net: &QNetwork) -> MaskPair {
        let (h, i) = net.w1.shape();
        let (o, hh) = net.w2.shape();
        MaskPair { hidden: DropMask::all_drop(h, i), output: DropMask::all_drop(o, hh) }
    }
}

/// Rectifier network `inputs → hidden → outputs` over 6-bit sign-magnitude
/// weights.
///
/// The quantized codes drive the forward pass; the real-valued latent weights
/// accumulate gradient steps and are re-quantized after every update
/// (straight-through estimator), so sub-LSB updates are not lost.
#[derive(Debug, Clone, PartialEq)]
pub struct QNetwork {
    scales: NetScales,
    /// Hidden × input.
    w1: OperandMatrix,
    /// Output × hidden.
    w2: OperandMatrix,
    latent1: Vec<f64>,
    latent2: Vec<f64>,
}

/// Everything the update rule needs from one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardPass {
    pub qvalues: Vec<f64>,
    /// Integer output accumulators, before scaling.
    pub raw_outputs: Vec<i64>,
    pub hidden_codes: Vec<u32>,
    pub pre_activation: Vec<f64>,
    pub energy_pj: f64,
    pub macs: u64,
}

impl ForwardPass {
    pub fn argmax(&self) -> usize {
        argmax(&self.qvalues)
    }

    pub fn max_q(&self) -> f64 {
        self.qvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

impl QNetwork {
    pub const INPUTS: usize = 3;
    pub const HIDDEN: usize = 16;
    pub const OUTPUTS: usize = 4;

    /// Builds a network from latent weights (hidden × input, output × hidden;
    /// row-major).
    pub fn from_latent(
        sizes: (usize, usize, usize),
        latent1: Vec<f64>,
        latent2: Vec<f64>,
        scales: NetScales,
    ) -> Result<QNetwork, QnavError> {
        let (inputs, hidden, outputs) = sizes;
        if latent1.len() != inputs * hidden || latent2.len() != hidden * outputs {
            return Err(QnavError::Shape("latent weight lengths do not match layer sizes".into()));
        }
        let mut net = QNetwork {
            scales,
            w1: OperandMatrix::zeros(hidden, inputs),
            w2: OperandMatrix::zeros(outputs, hidden),
            latent1,
            latent2,
        };
        net.requantize()?;
        Ok(net)
    }

    /// Default-sized network with latent weights uniform in ±`init_range`·range.
    pub fn random(rng: &mut Lfsr, init_range: f64) -> QNetwork {
        let s = NetScales::default();
        let mut draw = |n: usize| -> Vec<f64> {
            (0..n).map(|_| (2.0 * rng.next_fraction() - 1.0) * init_range * s.weight_range).collect()
        };
        let l1 = draw(Self::INPUTS * Self::HIDDEN);
        let l2 = draw(Self::HIDDEN * Self::OUTPUTS);
        Self::from_latent((Self::INPUTS, Self::HIDDEN, Self::OUTPUTS), l1, l2, s).expect("default sizes")
    }

    pub fn zeros() -> QNetwork {
        let s = NetScales::default();
        Self::from_latent(
            (Self::INPUTS, Self::HIDDEN, Self::OUTPUTS),
            vec![0.0; Self::INPUTS * Self::HIDDEN],
            vec![0.0; Self::HIDDEN * Self::OUTPUTS],
            s,
        )
        .expect("default sizes")
    }

    pub fn scales(&self) -> NetScales {
        self.scales
    }

    pub fn hidden_weights(&self) -> &OperandMatrix {
        &self.w1
    }

    pub fn output_weights(&self) -> &OperandMatrix {
        &self.w2
    }

    pub fn latent_hidden(&self) -> &[f64] {
        &self.latent1
    }

    pub fn latent_output(&self) -> &[f64] {
        &self.latent2
    }

    pub fn inputs(&self) -> usize {
        self.w1.cols()
    }

    pub fn hidden(&self) -> usize {
        self.w1.rows()
    }

    pub fn outputs(&self) -> usize {
        self.w2.rows()
    }

    fn requantize(&mut self) -> Result<(), QnavError> {
        let b = bits();
        let r = self.scales.weight_range;
        for (code, &v) in self.w1.as_mut_slice().iter_mut().zip(&self.latent1) {
            *code = quantize(v, b, r)?;
        }
        for (code, &v) in self.w2.as_mut_slice().iter_mut().zip(&self.latent2) {
            *code = quantize(v, b, r)?;
        }
        Ok(())
    }

    /// Forward pass on raw input codes.
    pub fn forward_codes(
        &self,
        inputs: &[u32],
        mask: Option<&MaskPair>,
        hw: &Hardware,
    ) -> Result<ForwardPass, QnavError> {
        if inputs.len() != self.inputs() {
            return Err(QnavError::Shape(format!("expected {} inputs, got {}", self.inputs(), inputs.len())));
        }
        if let Some(m) = mask {
            if m.hidden.shape() != self.w1.shape() || m.output.shape() != self.w2.shape() {
                return Err(QnavError::Shape("drop mask shape does not match weights".into()));
            }
        }
        let b = bits();
        let s = self.scales;
        let kept1 = |j: usize, i: usize| mask.is_none_or(|m| m.hidden.kept(j, i));
        let kept2 = |k: usize, j: usize| mask.is_none_or(|m| m.output.kept(k, j));
        let mut energy = 0.0;
        let mut macs = 0u64;

        let mut hidden_codes = Vec::with_capacity(self.hidden());
        let mut pre_activation = Vec::with_capacity(self.hidden());
        for j in 0..self.hidden() {
            let mut acc = 0i64;
            for (i, &x) in inputs.iter().enumerate() {
                let w = if kept1(j, i) { self.w1.get(j, i) } else { Operand::ZERO };
                let r = hw.model.mac(Operand::pos(x), w, acc, &hw.params, b)?;
                acc = r.value;
                energy += r.energy_pj;
                macs += 1;
            }
            let pre = acc as f64 * s.input_lsb * s.weight_lsb();
            pre_activation.push(pre);
            hidden_codes.push(quantize(pre.max(0.0), b, s.hidden_range)?.magnitude);
        }

        let mut raw_outputs = Vec::with_capacity(self.outputs());
        for k in 0..self.outputs() {
            let mut acc = 0i64;
            for (j, &h) in hidden_codes.iter().enumerate() {
                let w = if kept2(k, j) { self.w2.get(k, j) } else { Operand::ZERO };
                let r = hw.model.mac(Operand::pos(h), w, acc, &hw.params, b)?;
                acc = r.value;
                energy += r.energy_pj;
                macs += 1;
            }
            raw_outputs.push(acc);
        }
        let q_lsb = s.hidden_lsb() * s.weight_lsb();
        let qvalues = raw_outputs.iter().map(|&o| o as f64 * q_lsb).collect();
        Ok(ForwardPass { qvalues, raw_outputs, hidden_codes, pre_activation, energy_pj: energy, macs })
    }

    /// One semi-gradient step on `0.5 (target - Q(s, action))^2`, taken on the
    /// latent weights and followed by re-quantization.
    ///
    /// Gradients flow through the rectifier where `0 < pre < hidden_range`;
    /// dropped connections receive no update.
    pub fn sgd_step(
        &mut self,
        inputs: &[u32],
        fwd: &ForwardPass,
        action: usize,
        target: f64,
        alpha: f64,
        mask: Option<&MaskPair>,
    ) -> Result<(), QnavError> {
        let s = self.scales;
        let delta = target - fwd.qvalues[action];
        let step = alpha * delta;
        if step == 0.0 {
            return Ok(());
        }
        let kept1 = |j: usize, i: usize| mask.is_none_or(|m| m.hidden.kept(j, i));
        let kept2 = |k: usize, j: usize| mask.is_none_or(|m| m.output.kept(k, j));
        let n_hidden = self.hidden();
        let n_in = self.inputs();
        let limit = s.weight_range;
        for j in 0..n_hidden {
            let w2 = if kept2(action, j) { self.w2.get(action, j).to_signed() as f64 * s.weight_lsb() } else { 0.0 };
            let pre = fwd.pre_activation[j];
            if kept2(action, j) {
                let h = fwd.hidden_codes[j] as f64 * s.hidden_lsb();
                let l = &mut self.latent2[action * n_hidden + j];
                *l = (*l + step * h).clamp(-limit, limit);
            }
            if pre > 0.0 && pre < s.hidden_range && w2 != 0.0 {
                for (i, &x) in inputs.iter().enumerate() {
                    if kept1(j, i) {
                        let l = &mut self.latent1[j * n_in + i];
                        *l = (*l + step * w2 * x as f64 * s.input_lsb).clamp(-limit, limit);
                    }
                }
            }
        }
        self.requantize()
    }
}

/// Action values for a depth reading.
pub fn q_forward(
    net: &QNetwork,
    s: &DepthReading,
    mask: Option<&MaskPair>,
    hw: &Hardware,
) -> Result<ForwardPass, QnavError> {
    let codes: Vec<u32> = s.codes().iter().map(|&c| c as u32).collect();
    net.forward_codes(&codes, mask, hw)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::macmodel::MacModel;
    use crate::stochsyn::DEFAULT_DROP_P;

    fn hw(model: MacModel) -> Hardware {
        Hardware::new(model, EnergyParams::default())
    }

    #[test]
    fn zero_weights_give_zero_values() {
        let net = QNetwork::zeros();
        let f = q_forward(&net, &DepthReading([3, 9, 40]), None, &hw(MacModel::Tdms)).unwrap();
        assert_eq!(f.qvalues, vec![0.0; 4]);
        assert_eq!(f.macs, 3 * 16 + 16 * 4);
    }

    #[test]
    fn all_drop_equals_zero_weights() {
        let mut rng = Lfsr::new(0x1D0C).unwrap();
        let net = QNetwork::random(&mut rng, 1.0);
        let s = DepthReading([5, 12, 2]);
        let m = MaskPair::all_drop(&net);
        for model in MacModel::ALL {
            let a = q_forward(&net, &s, Some(&m), &hw(model)).unwrap();
            let z = q_forward(&QNetwork::zeros(), &s, None, &hw(model)).unwrap();
            assert_eq!(a, z);
        }
    }

    /// Plain integer matrix-multiply reference, independent of the MAC models.
    fn reference_forward(net: &QNetwork, x: &[u32]) -> Vec<i64> {
        let s = net.scales();
        let w1 = net.hidden_weights();
        let w2 = net.output_weights();
        let hidden: Vec<i64> = (0..w1.rows())
            .map(|j| {
                let acc: i64 = (0..w1.cols()).map(|i| x[i] as i64 * w1.get(j, i).to_signed()).sum();
                let real = acc as f64 * s.input_lsb * s.weight_lsb();
                (real.max(0.0) / s.hidden_range * 63.0).round().min(63.0) as i64
            })
            .collect();
        (0..w2.rows()).map(|k| (0..w2.cols()).map(|j| hidden[j] * w2.get(k, j).to_signed()).sum()).collect()
    }

    #[test]
    fn matches_dense_reference() {
        let mut rng = Lfsr::new(0x7777).unwrap();
        for _ in 0..20 {
            let net = QNetwork::random(&mut rng, 1.0);
            let x: Vec<u32> = (0..3).map(|_| rng.next_bits(6)).collect();
            let expected = reference_forward(&net, &x);
            for model in MacModel::ALL {
                let f = net.forward_codes(&x, None, &hw(model)).unwrap();
                assert_eq!(f.raw_outputs, expected, "{model}");
            }
        }
    }

    #[test]
    fn digital_energy_is_input_invariant() {
        let mut rng = Lfsr::new(0x0BAD).unwrap();
        let net = QNetwork::random(&mut rng, 1.0);
        let e_of = |model, s: DepthReading| q_forward(&net, &s, None, &hw(model)).unwrap().energy_pj;
        let a = e_of(MacModel::Digital, DepthReading([1, 1, 1]));
        let b = e_of(MacModel::Digital, DepthReading([63, 40, 9]));
        assert_eq!(a, b);
        let a = e_of(MacModel::Tdms, DepthReading([1, 1, 1]));
        let b = e_of(MacModel::Tdms, DepthReading([63, 40, 9]));
        assert!(b > a);
    }

    #[test]
    fn mask_shape_checked() {
        let net = QNetwork::zeros();
        let bad = MaskPair { hidden: DropMask::all_keep(3, 16), output: DropMask::all_keep(4, 16) };
        assert!(q_forward(&net, &DepthReading::default(), Some(&bad), &hw(MacModel::Digital)).is_err());
        let (ok, _) = MaskPair::draw(&net, DEFAULT_DROP_P, Lfsr::new(9).unwrap()).unwrap();
        assert!(q_forward(&net, &DepthReading::default(), Some(&ok), &hw(MacModel::Digital)).is_ok());
    }

    #[test]
    fn argmax_breaks_ties_low() {
        assert_eq!(argmax(&[0.0, 3.0, 1.0, 2.0]), 1);
        assert_eq!(argmax(&[5.0, 5.0, 0.0, 0.0]), 0);
    }
}
