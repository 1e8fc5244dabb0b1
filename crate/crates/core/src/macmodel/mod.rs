//! Functional and energy models of multiply-accumulate units.
//!
//! Three hardware styles are modeled:
//!
//! * **digital**: a conventional array multiplier whose energy depends only on
//!   the operand width.
//! * **TD-MS** (time-domain mixed-signal): one operand is a pulse width that
//!   gates an up/down counter clocked by an oscillator whose rate is set by the
//!   weight code. The counter ends at the product, so energy grows with the
//!   number of oscillator cycles, i.e. with the size of the product.
//! * **HD-MS** (hybrid-digital mixed-signal): a 5-bit TD-MS kernel reused over
//!   operand chunks with digital shift-and-add to reach 6–8 bits.
//!
//! Operands are sign-magnitude; the counter direction is the XOR of the signs.
//! All three models return the same value for the same inputs.

mod calibrate;
mod surface;

pub use calibrate::{calibrate_energy, mean_energy, CalibrationAnchor, REFERENCE_ANCHORS};
pub use surface::{energy_surface, SurfacePoint};

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

/// Smallest value the 24-bit signed accumulator holds.
pub const ACC_MIN: i64 = -(1 << 23);
/// Largest value the 24-bit signed accumulator holds.
pub const ACC_MAX: i64 = (1 << 23) - 1;

/// Width of the TD-MS kernel inside the HD-MS unit.
pub const KERNEL_BITS: u8 = 5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MacError {
    #[error("bit width {0} outside supported range 3..=8")]
    BitWidth(u8),
    #[error("operand magnitude {magnitude} does not fit in {bits} bits")]
    OperandRange { magnitude: u32, bits: u8 },
    #[error("cannot quantize non-finite value {0}")]
    NonFinite(f64),
    #[error("quantization range must be positive, got {0}")]
    QuantRange(f64),
    #[error("accumulator overflow: {0} does not fit in 24 signed bits")]
    Overflow(i64),
    #[error("invalid energy parameters: {0}")]
    Params(String),
    #[error("calibration needs at least 2 anchors with positive targets")]
    Anchors,
    #[error("calibration failed, relative residuals {residuals:?}")]
    Calibration { residuals: Vec<f64> },
    #[error("unknown MAC model `{0}` (expected digital, tdms or hdms)")]
    UnknownModel(String),
}

/// Operand width in bits, 3 through 8.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct BitWidth(u8);

impl BitWidth {
    pub const MIN: u8 = 3;
    pub const MAX: u8 = 8;

    pub fn new(bits: u8) -> Result<Self, MacError> {
        if (Self::MIN..=Self::MAX).contains(&bits) {
            Ok(Self(bits))
        } else {
            Err(MacError::BitWidth(bits))
        }
    }

    pub fn bits(self) -> u8 {
        self.0
    }

    /// Largest representable magnitude, `2^bits - 1`.
    pub fn max_magnitude(self) -> u32 {
        (1u32 << self.0) - 1
    }

    /// Every supported width in ascending order.
    pub fn all() -> impl Iterator<Item = BitWidth> {
        (Self::MIN..=Self::MAX).map(BitWidth)
    }
}

impl TryFrom<u8> for BitWidth {
    type Error = MacError;
    fn try_from(bits: u8) -> Result<Self, MacError> {
        BitWidth::new(bits)
    }
}

impl From<BitWidth> for u8 {
    fn from(b: BitWidth) -> u8 {
        b.0
    }
}

impl fmt::Display for BitWidth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Sign {
    #[default]
    Pos,
    Neg,
}

impl Sign {
    pub fn xor(self, other: Sign) -> Sign {
        if self == other {
            Sign::Pos
        } else {
            Sign::Neg
        }
    }

    pub fn factor(self) -> i64 {
        match self {
            Sign::Pos => 1,
            Sign::Neg => -1,
        }
    }
}

/// Sign-magnitude operand.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Operand {
    pub magnitude: u32,
    pub sign: Sign,
}

impl Operand {
    pub const ZERO: Operand = Operand { magnitude: 0, sign: Sign::Pos };

    pub fn new(magnitude: u32, sign: Sign) -> Self {
        Self { magnitude, sign }
    }

    pub fn pos(magnitude: u32) -> Self {
        Self::new(magnitude, Sign::Pos)
    }

    /// Sign-magnitude encoding of a signed integer.
    pub fn from_signed(v: i64) -> Self {
        let sign = if v < 0 { Sign::Neg } else { Sign::Pos };
        Self::new(v.unsigned_abs() as u32, sign)
    }

    pub fn to_signed(self) -> i64 {
        self.sign.factor() * self.magnitude as i64
    }

    pub fn check(self, b: BitWidth) -> Result<Self, MacError> {
        if self.magnitude <= b.max_magnitude() {
            Ok(self)
        } else {
            Err(MacError::OperandRange { magnitude: self.magnitude, bits: b.bits() })
        }
    }
}

/// Outcome of one multiply-accumulate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MacResult {
    pub value: i64,
    pub energy_pj: f64,
    pub dco_cycles: u64,
    pub kernel_passes: u32,
}

/// Energy-model coefficients. Energies are in pJ at `v_ref` and scale with
/// `(v_supply / v_ref)^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergyParams {
    /// Digital energy, quadratic term in bit width.
    pub c_d2: f64,
    /// Digital energy, linear term in bit width.
    pub c_d1: f64,
    /// Digital energy, constant term.
    pub c_d0: f64,
    /// TD-MS fixed overhead per operation.
    pub e_0: f64,
    /// TD-MS energy per oscillator cycle.
    pub e_cyc: f64,
    /// TD-MS per-bit transition overhead.
    pub e_tr: f64,
    /// HD-MS shift-add energy per extra kernel pass.
    pub e_sa: f64,
    pub v_supply: f64,
    pub v_ref: f64,
}

impl EnergyParams {
    pub const V_MIN: f64 = 0.4;
    pub const V_MAX: f64 = 1.0;

    pub fn validate(&self) -> Result<(), MacError> {
        let coeffs = [
            ("c_d2", self.c_d2),
            ("c_d1", self.c_d1),
            ("c_d0", self.c_d0),
            ("e_0", self.e_0),
            ("e_cyc", self.e_cyc),
            ("e_tr", self.e_tr),
            ("e_sa", self.e_sa),
        ];
        for (name, v) in coeffs {
            if !(v.is_finite() && v >= 0.0) {
                return Err(MacError::Params(format!("{name} = {v} must be finite and >= 0")));
            }
        }
        for (name, v) in [("v_supply", self.v_supply), ("v_ref", self.v_ref)] {
            if !(Self::V_MIN..=Self::V_MAX).contains(&v) {
                return Err(MacError::Params(format!("{name} = {v} outside [0.4, 1.0] V")));
            }
        }
        Ok(())
    }

    /// Same coefficients at another supply voltage.
    pub fn at_supply(self, v_supply: f64) -> Result<Self, MacError> {
        let p = Self { v_supply, ..self };
        p.validate()?;
        Ok(p)
    }

    pub fn voltage_scale(&self) -> f64 {
        let r = self.v_supply / self.v_ref;
        r * r
    }

    /// Digital MAC energy at width `b`, before voltage scaling.
    pub(crate) fn digital_base(&self, b: BitWidth) -> f64 {
        let b = b.bits() as f64;
        self.c_d2 * b * b + self.c_d1 * b + self.c_d0
    }

    /// TD-MS energy for `cycles` oscillator cycles at width `bits`, before scaling.
    pub(crate) fn tdms_base(&self, cycles: u64, bits: u8) -> f64 {
        self.e_0 + self.e_cyc * cycles as f64 + self.e_tr * bits as f64
    }
}

impl Default for EnergyParams {
    /// Coefficients fitted to the reference anchors (see [`REFERENCE_ANCHORS`]).
    fn default() -> Self {
        calibrate_energy(&REFERENCE_ANCHORS).expect("reference anchors calibrate")
    }
}

/// Selects which hardware model executes a MAC.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MacModel {
    Digital,
    Tdms,
    Hdms,
}

impl MacModel {
    pub const ALL: [MacModel; 3] = [MacModel::Digital, MacModel::Tdms, MacModel::Hdms];

    pub fn name(self) -> &'static str {
        match self {
            MacModel::Digital => "digital",
            MacModel::Tdms => "tdms",
            MacModel::Hdms => "hdms",
        }
    }

    pub fn mac(
        self,
        x: Operand,
        w: Operand,
        acc: i64,
        params: &EnergyParams,
        b: BitWidth,
    ) -> Result<MacResult, MacError> {
        match self {
            MacModel::Digital => digital_mac(x, w, acc, params, b),
            MacModel::Tdms => tdms_mac(x, w, acc, params, b),
            MacModel::Hdms => hdms_mac(x, w, acc, params, b),
        }
    }
}

impl fmt::Display for MacModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MacModel {
    type Err = MacError;
    fn from_str(s: &str) -> Result<Self, MacError> {
        match s {
            "digital" => Ok(MacModel::Digital),
            "tdms" => Ok(MacModel::Tdms),
            "hdms" => Ok(MacModel::Hdms),
            other => Err(MacError::UnknownModel(other.to_string())),
        }
    }
}

/// Maps a real value onto a `b`-bit sign-magnitude code over `[-range, range]`.
/// Values beyond the range saturate.
pub fn quantize(x: f64, b: BitWidth, range: f64) -> Result<Operand, MacError> {
    if !x.is_finite() {
        return Err(MacError::NonFinite(x));
    }
    if !(range > 0.0 && range.is_finite()) {
        return Err(MacError::QuantRange(range));
    }
    let full = b.max_magnitude();
    let scaled = (x.abs() / range * full as f64).round();
    let magnitude = if scaled >= full as f64 { full } else { scaled as u32 };
    let sign = if x < 0.0 && magnitude > 0 { Sign::Neg } else { Sign::Pos };
    Ok(Operand::new(magnitude, sign))
}

pub fn dequantize(op: Operand, b: BitWidth, range: f64) -> f64 {
    op.to_signed() as f64 * range / b.max_magnitude() as f64
}

fn accumulate(acc: i64, product: i64) -> Result<i64, MacError> {
    let v = acc + product;
    if (ACC_MIN..=ACC_MAX).contains(&v) {
        Ok(v)
    } else {
        Err(MacError::Overflow(v))
    }
}

/// Up/down counter gated for `x` pulses at a rate of `w` counts per pulse.
fn count(x: Operand, w: Operand, acc: i64) -> Result<(i64, u64), MacError> {
    let cycles = x.magnitude as u64 * w.magnitude as u64;
    let dir = x.sign.xor(w.sign).factor();
    Ok((accumulate(acc, dir * cycles as i64)?, cycles))
}

pub fn tdms_mac(
    x: Operand,
    w: Operand,
    acc: i64,
    params: &EnergyParams,
    b: BitWidth,
) -> Result<MacResult, MacError> {
    x.check(b)?;
    w.check(b)?;
    let (value, cycles) = count(x, w, acc)?;
    Ok(MacResult {
        value,
        energy_pj: params.tdms_base(cycles, b.bits()) * params.voltage_scale(),
        dco_cycles: cycles,
        kernel_passes: 1,
    })
}

pub fn digital_mac(
    x: Operand,
    w: Operand,
    acc: i64,
    params: &EnergyParams,
    b: BitWidth,
) -> Result<MacResult, MacError> {
    x.check(b)?;
    w.check(b)?;
    let product = x.sign.xor(w.sign).factor() * (x.magnitude as i64 * w.magnitude as i64);
    Ok(MacResult {
        value: accumulate(acc, product)?,
        energy_pj: params.digital_base(b) * params.voltage_scale(),
        dco_cycles: 0,
        kernel_passes: 1,
    })
}

/// One operand chunk: `width` bits starting at bit `shift`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Chunk {
    pub shift: u8,
    pub width: u8,
}

impl Chunk {
    pub fn extract(self, magnitude: u32) -> u32 {
        (magnitude >> self.shift) & ((1u32 << self.width) - 1)
    }
}

/// How the HD-MS unit splits a `b`-bit multiply over its 5-bit kernel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HdmsPlan {
    pub chunk_width: u8,
    pub chunks: Vec<Chunk>,
    pub kernel_passes: u32,
}

impl HdmsPlan {
    /// Left shifts applied to each partial product, in pass order.
    pub fn pass_shifts(&self) -> Vec<u8> {
        let mut shifts = Vec::with_capacity(self.kernel_passes as usize);
        for xc in &self.chunks {
            for wc in &self.chunks {
                shifts.push(xc.shift + wc.shift);
            }
        }
        shifts
    }

    pub fn recombine(&self, magnitude: u32) -> u32 {
        self.chunks.iter().map(|c| c.extract(magnitude) << c.shift).sum()
    }
}

pub fn hdms_plan(b: BitWidth) -> HdmsPlan {
    let chunks = if b.bits() <= KERNEL_BITS {
        vec![Chunk { shift: 0, width: b.bits() }]
    } else {
        vec![
            Chunk { shift: 0, width: KERNEL_BITS },
            Chunk { shift: KERNEL_BITS, width: b.bits() - KERNEL_BITS },
        ]
    };
    let kernel_passes = (chunks.len() * chunks.len()) as u32;
    HdmsPlan { chunk_width: KERNEL_BITS, chunks, kernel_passes }
}

pub fn hdms_mac(
    x: Operand,
    w: Operand,
    acc: i64,
    params: &EnergyParams,
    b: BitWidth,
) -> Result<MacResult, MacError> {
    if b.bits() <= KERNEL_BITS {
        return tdms_mac(x, w, acc, params, b);
    }
    x.check(b)?;
    w.check(b)?;
    let plan = hdms_plan(b);
    let dir = x.sign.xor(w.sign).factor();
    let mut product: i64 = 0;
    let mut cycles: u64 = 0;
    let mut base = 0.0;
    for xc in &plan.chunks {
        for wc in &plan.chunks {
            let partial = xc.extract(x.magnitude) as u64 * wc.extract(w.magnitude) as u64;
            cycles += partial;
            base += params.tdms_base(partial, KERNEL_BITS);
            product += (partial as i64) << (xc.shift + wc.shift);
        }
    }
    base += (plan.kernel_passes - 1) as f64 * params.e_sa;
    Ok(MacResult {
        value: accumulate(acc, dir * product)?,
        energy_pj: base * params.voltage_scale(),
        dco_cycles: cycles,
        kernel_passes: plan.kernel_passes,
    })
}

/// Row-major matrix of quantized operands.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OperandMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Operand>,
}

impl OperandMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![Operand::ZERO; rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<Operand>) -> Option<Self> {
        (data.len() == rows * cols).then_some(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn get(&self, r: usize, c: usize) -> Operand {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: Operand) {
        self.data[r * self.cols + c] = v;
    }

    pub fn as_slice(&self) -> &[Operand] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [Operand] {
        &mut self.data
    }
}
