//! Stochastic synapses: a 16-bit Fibonacci LFSR and drop-connect masks.
//!
//! The register uses the maximal-length polynomial x^16 + x^14 + x^13 + x^11 + 1.
//! Shifting right, the output is bit 0 and the feedback (parity of bits 0, 2,
//! 3 and 5) enters at bit 15.

use crate::macmodel::{Operand, OperandMatrix};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StochError {
    #[error("LFSR state 0 is the lock-up state")]
    ZeroState,
    #[error("drop probability {0} outside [0, 1)")]
    Probability(f64),
    #[error("mask shape {mask:?} does not match weight shape {weights:?}")]
    Shape { mask: (usize, usize), weights: (usize, usize) },
}

/// Period of the maximal-length 16-bit sequence.
pub const LFSR_PERIOD: u32 = (1 << 16) - 1;

/// Default drop-connect probability.
pub const DEFAULT_DROP_P: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Lfsr {
    state: u16,
}

/// One LFSR step on a raw state: `(output bit, next state)`.
pub fn lfsr_next(state: u16) -> Result<(u8, u16), StochError> {
    if state == 0 {
        return Err(StochError::ZeroState);
    }
    let bit = state & 1;
    let feedback = (state ^ (state >> 2) ^ (state >> 3) ^ (state >> 5)) & 1;
    Ok((bit as u8, (state >> 1) | (feedback << 15)))
}

impl Lfsr {
    pub fn new(seed: u16) -> Result<Self, StochError> {
        if seed == 0 {
            Err(StochError::ZeroState)
        } else {
            Ok(Self { state: seed })
        }
    }

    /// Seed derived from an arbitrary value; zero maps to 0xACE1.
    pub fn from_seed_lossy(seed: u32) -> Self {
        let s = (seed ^ (seed >> 16)) as u16;
        Self { state: if s == 0 { 0xACE1 } else { s } }
    }

    pub fn state(self) -> u16 {
        self.state
    }

    /// Value-style step.
    pub fn step(self) -> (u8, Lfsr) {
        let (bit, state) = lfsr_next(self.state).expect("nonzero state is an invariant");
        (bit, Lfsr { state })
    }

    pub fn next_bit(&mut self) -> u8 {
        let (bit, next) = self.step();
        *self = next;
        bit
    }

    /// Next `n` (≤ 32) output bits, first bit most significant.
    pub fn next_bits(&mut self, n: u32) -> u32 {
        debug_assert!(n <= 32);
        (0..n).fold(0u32, |acc, _| (acc << 1) | self.next_bit() as u32)
    }

    /// Next 16 bits read as a fraction of 2^16, in `[0, 1)`.
    pub fn next_fraction(&mut self) -> f64 {
        self.next_bits(16) as f64 / 65536.0
    }

    /// Uniform index in `0..n` from 16 bits (small modulo bias is accepted).
    pub fn next_index(&mut self, n: usize) -> usize {
        debug_assert!(n > 0 && n <= 1 << 16);
        self.next_bits(16) as usize % n
    }
}

/// Drop-connect mask: `true` marks a kept connection.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DropMask {
    rows: usize,
    cols: usize,
    keep: Vec<bool>,
}

impl DropMask {
    pub fn all_keep(rows: usize, cols: usize) -> Self {
        Self { rows, cols, keep: vec![true; rows * cols] }
    }

    pub fn all_drop(rows: usize, cols: usize) -> Self {
        Self { rows, cols, keep: vec![false; rows * cols] }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn kept(&self, r: usize, c: usize) -> bool {
        self.keep[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, keep: bool) {
        self.keep[r * self.cols + c] = keep;
    }

    pub fn dropped_count(&self) -> usize {
        self.keep.iter().filter(|k| !**k).count()
    }

    pub fn drop_rate(&self) -> f64 {
        self.dropped_count() as f64 / self.keep.len().max(1) as f64
    }
}

/// Builds a mask entry by entry in row-major order, dropping an entry when
/// the next 16 LFSR bits (as a fraction of 2^16) fall below `p`.
pub fn drop_mask(shape: (usize, usize), p: f64, lfsr: Lfsr) -> Result<(DropMask, Lfsr), StochError> {
    if !(0.0..1.0).contains(&p) {
        return Err(StochError::Probability(p));
    }
    let (rows, cols) = shape;
    let mut rng = lfsr;
    let keep = (0..rows * cols).map(|_| rng.next_fraction() >= p).collect();
    Ok((DropMask { rows, cols, keep }, rng))
}

/// Zeroes the magnitudes of dropped connections.
pub fn masked_weights(weights: &OperandMatrix, mask: &DropMask) -> Result<OperandMatrix, StochError> {
    if weights.shape() != mask.shape() {
        return Err(StochError::Shape { mask: mask.shape(), weights: weights.shape() });
    }
    let mut out = weights.clone();
    for (w, keep) in out.as_mut_slice().iter_mut().zip(&mask.keep) {
        if !keep {
            *w = Operand::ZERO;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::macmodel::Sign;

    #[test]
    fn step_outputs_bit_zero() {
        assert_eq!(lfsr_next(0x0001).unwrap().0, 1);
        assert_eq!(lfsr_next(0x0002).unwrap().0, 0);
        assert_eq!(lfsr_next(0), Err(StochError::ZeroState));
        assert_eq!(Lfsr::new(0), Err(StochError::ZeroState));
    }

    #[test]
    fn known_first_state() {
        // 0xACE1: taps give 1^0^0^1 = 0, so the next state is 0xACE1 >> 1
        assert_eq!(lfsr_next(0xACE1).unwrap(), (1, 0x5670));
    }

    #[test]
    fn maximal_period_from_several_seeds() {
        for seed in [0x0001u16, 0xACE1, 0xFFFF, 0x8000, 0x1234] {
            let mut s = seed;
            let mut n = 0u32;
            loop {
                s = lfsr_next(s).unwrap().1;
                n += 1;
                assert_ne!(s, 0);
                if s == seed {
                    break;
                }
                assert!(n <= LFSR_PERIOD);
            }
            assert_eq!(n, LFSR_PERIOD, "seed {seed:#06x}");
        }
    }

    #[test]
    fn p_zero_keeps_everything() {
        let (m, _) = drop_mask((5, 7), 0.0, Lfsr::new(0xACE1).unwrap()).unwrap();
        assert_eq!(m, DropMask::all_keep(5, 7));
    }

    #[test]
    fn invalid_probability() {
        let l = Lfsr::new(1).unwrap();
        assert!(drop_mask((2, 2), 1.0, l).is_err());
        assert!(drop_mask((2, 2), -0.1, l).is_err());
        assert!(drop_mask((2, 2), f64::NAN, l).is_err());
    }

    /// Reference evaluation straight from the step definition, building each
    /// 16-bit word and comparing against the threshold in integers.
    fn reference_mask(rows: usize, cols: usize, p: f64, seed: u16) -> (Vec<bool>, u16) {
        let mut s = seed;
        let threshold = (p * 65536.0) as u32;
        let mut keep = Vec::new();
        for _ in 0..rows * cols {
            let mut word = 0u32;
            for _ in 0..16 {
                let (bit, n) = lfsr_next(s).unwrap();
                word = (word << 1) | bit as u32;
                s = n;
            }
            keep.push(word >= threshold);
        }
        (keep, s)
    }

    #[test]
    fn fixed_mask_for_seed_ace1() {
        let (mask, rng) = drop_mask((4, 4), 0.25, Lfsr::new(0xACE1).unwrap()).unwrap();
        let (keep, state) = reference_mask(4, 4, 0.25, 0xACE1);
        assert_eq!(mask.keep, keep);
        assert_eq!(rng.state(), state);
        let (again, _) = drop_mask((4, 4), 0.25, Lfsr::new(0xACE1).unwrap()).unwrap();
        assert_eq!(mask, again);
    }

    #[test]
    fn consumes_sixteen_steps_per_entry() {
        let start = Lfsr::new(0xBEEF).unwrap();
        let (_, after) = drop_mask((3, 5), 0.25, start).unwrap();
        let mut s = start;
        for _ in 0..3 * 5 * 16 {
            s = s.step().1;
        }
        assert_eq!(after, s);
    }

    #[test]
    fn large_mask_rate() {
        let (m, _) = drop_mask((100, 100), 0.25, Lfsr::new(0xACE1).unwrap()).unwrap();
        let rate = m.drop_rate();
        assert!((0.20..=0.30).contains(&rate), "{rate}");
    }

    #[test]
    fn masked_weights_pointwise() {
        let w = OperandMatrix::from_vec(
            2,
            2,
            vec![Operand::pos(3), Operand::new(4, Sign::Neg), Operand::pos(5), Operand::pos(6)],
        )
        .unwrap();
        assert_eq!(masked_weights(&w, &DropMask::all_keep(2, 2)).unwrap(), w);
        assert_eq!(masked_weights(&w, &DropMask::all_drop(2, 2)).unwrap(), OperandMatrix::zeros(2, 2));
        let mut m = DropMask::all_keep(2, 2);
        m.set(0, 0, false);
        let out = masked_weights(&w, &m).unwrap();
        assert_eq!(out.get(0, 0), Operand::ZERO);
        assert_eq!(&out.as_slice()[1..], &w.as_slice()[1..]);
        assert!(masked_weights(&w, &DropMask::all_keep(2, 3)).is_err());
    }
}
