use super::SwarmError;
use crate::macmodel::{hdms_mac, quantize, BitWidth, EnergyParams, MacResult, Operand};

/// Dot product accumulated through HD-MS MACs.
pub fn lpu_dot(x: &[Operand], w: &[Operand], b: BitWidth, params: &EnergyParams) -> Result<MacResult, SwarmError> {
    if x.len() != w.len() {
        return Err(SwarmError::Length { x: x.len(), w: w.len() });
    }
    let mut out = MacResult { value: 0, energy_pj: 0.0, dco_cycles: 0, kernel_passes: 0 };
    for (&xi, &wi) in x.iter().zip(w) {
        let r = hdms_mac(xi, wi, out.value, params, b)?;
        out.value = r.value;
        out.energy_pj += r.energy_pj;
        out.dco_cycles += r.dco_cycles;
        out.kernel_passes += r.kernel_passes;
    }
    Ok(out)
}

/// Linear processing unit with an energy and MAC counter.
#[derive(Debug, Clone)]
pub struct Lpu {
    bits: BitWidth,
    params: EnergyParams,
    energy_pj: f64,
    macs: u64,
}

impl Lpu {
    pub fn new(bits: BitWidth, params: EnergyParams) -> Self {
        Self { bits, params, energy_pj: 0.0, macs: 0 }
    }

    pub fn bits(&self) -> BitWidth {
        self.bits
    }

    pub fn energy_pj(&self) -> f64 {
        self.energy_pj
    }

    pub fn macs(&self) -> u64 {
        self.macs
    }

    pub fn quantize(&self, v: f64, range: f64) -> Result<Operand, SwarmError> {
        Ok(quantize(v, self.bits, range)?)
    }

    /// Integer dot product, metered.
    pub fn dot(&mut self, x: &[Operand], w: &[Operand]) -> Result<i64, SwarmError> {
        let r = lpu_dot(x, w, self.bits, &self.params)?;
        self.energy_pj += r.energy_pj;
        self.macs += x.len() as u64;
        Ok(r.value)
    }

    /// Real-valued dot product: `x` quantized over `[-x_range, x_range]`,
    /// `w` over `[-w_range, w_range]`.
    pub fn dot_real(&mut self, x: &[f64], x_range: f64, w: &[f64], w_range: f64) -> Result<f64, SwarmError> {
        let xq = x.iter().map(|&v| self.quantize(v, x_range)).collect::<Result<Vec<_>, _>>()?;
        let wq = w.iter().map(|&v| self.quantize(v, w_range)).collect::<Result<Vec<_>, _>>()?;
        let m = self.bits.max_magnitude() as f64;
        Ok(self.dot(&xq, &wq)? as f64 * (x_range / m) * (w_range / m))
    }
}
