//! Nonlinear function evaluator: uniform piecewise-linear chord tables with
//! optional range folding.

use super::SwarmError;
use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::str::FromStr;

pub const DEFAULT_SEGMENTS: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NfeFunction {
    /// `e^{-x}`
    ExpNeg,
    Sigmoid,
    Sine,
    /// `1/x`
    Recip,
}

impl NfeFunction {
    pub const ALL: [NfeFunction; 4] = [NfeFunction::ExpNeg, NfeFunction::Sigmoid, NfeFunction::Sine, NfeFunction::Recip];

    pub fn name(self) -> &'static str {
        match self {
            NfeFunction::ExpNeg => "exp_neg",
            NfeFunction::Sigmoid => "sigmoid",
            NfeFunction::Sine => "sine",
            NfeFunction::Recip => "recip",
        }
    }

    pub fn exact(self, x: f64) -> f64 {
        match self {
            NfeFunction::ExpNeg => (-x).exp(),
            NfeFunction::Sigmoid => 1.0 / (1.0 + (-x).exp()),
            NfeFunction::Sine => x.sin(),
            NfeFunction::Recip => 1.0 / x,
        }
    }

    /// Stored domain used by [`NfeTable::standard`].
    pub fn standard_domain(self) -> (f64, f64) {
        match self {
            NfeFunction::ExpNeg => (0.0, 2.5),
            NfeFunction::Sigmoid => (-4.0, 4.0),
            NfeFunction::Sine => (0.0, FRAC_PI_2),
            NfeFunction::Recip => (0.05, 1.0),
        }
    }
}

impl fmt::Display for NfeFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for NfeFunction {
    type Err = SwarmError;
    fn from_str(s: &str) -> Result<Self, SwarmError> {
        Self::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| SwarmError::Nfe(format!("unknown function `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Symmetry {
    None,
    Odd,
    Even,
}

/// Range-reduction tags applied by [`nfe_fold`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FoldTags {
    pub symmetry: Symmetry,
    pub period: Option<f64>,
    /// Half-wave reflection point: after the symmetry fold, `x > m` maps to
    /// `2m - x`.
    pub mirror: Option<f64>,
}

impl FoldTags {
    pub const NONE: FoldTags = FoldTags { symmetry: Symmetry::None, period: None, mirror: None };
}

#[derive(Debug, Clone, PartialEq)]
pub struct NfeTable {
    function: NfeFunction,
    breakpoints: Vec<f64>,
    values: Vec<f64>,
    tags: FoldTags,
}

fn domain_ok(function: NfeFunction, lo: f64, hi: f64) -> bool {
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return false;
    }
    match function {
        NfeFunction::Recip => lo > 0.0 || hi < 0.0,
        _ => true,
    }
}

/// Uniform chord table over `domain` with `n_segments` segments.
pub fn nfe_build(function: NfeFunction, domain: (f64, f64), n_segments: usize) -> Result<NfeTable, SwarmError> {
    let (lo, hi) = domain;
    if n_segments < 2 {
        return Err(SwarmError::Nfe(format!("need at least 2 segments, got {n_segments}")));
    }
    if !domain_ok(function, lo, hi) {
        return Err(SwarmError::Nfe(format!("invalid domain [{lo}, {hi}] for {function}")));
    }
    let h = (hi - lo) / n_segments as f64;
    let mut breakpoints: Vec<f64> = (0..=n_segments).map(|i| lo + i as f64 * h).collect();
    breakpoints[n_segments] = hi;
    let values = breakpoints.iter().map(|&x| function.exact(x)).collect();
    Ok(NfeTable { function, breakpoints, values, tags: FoldTags::NONE })
}

impl NfeTable {
    /// Table on the function's standard domain with its folding tags: sine
    /// is odd with period 2π and mirrored at π/2, recip is odd.
    pub fn standard(function: NfeFunction, n_segments: usize) -> Result<NfeTable, SwarmError> {
        let table = nfe_build(function, function.standard_domain(), n_segments)?;
        let tags = match function {
            NfeFunction::Sine => FoldTags { symmetry: Symmetry::Odd, period: Some(2.0 * PI), mirror: Some(FRAC_PI_2) },
            NfeFunction::Recip => FoldTags { symmetry: Symmetry::Odd, ..FoldTags::NONE },
            _ => FoldTags::NONE,
        };
        Ok(table.with_tags(tags))
    }

    pub fn with_tags(mut self, tags: FoldTags) -> Self {
        self.tags = tags;
        self
    }

    pub fn function(&self) -> NfeFunction {
        self.function
    }

    pub fn tags(&self) -> FoldTags {
        self.tags
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.breakpoints[0], *self.breakpoints.last().unwrap())
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn n_segments(&self) -> usize {
        self.breakpoints.len() - 1
    }

    /// `(slope, intercept)` of every segment.
    pub fn segments(&self) -> Vec<(f64, f64)> {
        (0..self.n_segments())
            .map(|i| {
                let (x0, x1) = (self.breakpoints[i], self.breakpoints[i + 1]);
                let (y0, y1) = (self.values[i], self.values[i + 1]);
                let slope = (y1 - y0) / (x1 - x0);
                (slope, y0 - slope * x0)
            })
            .collect()
    }

    /// Evaluates segment `i` at `x` as a convex combination of its endpoint
    /// values, so neighbouring segments agree exactly at shared breakpoints.
    pub fn eval_segment(&self, i: usize, x: f64) -> f64 {
        let (x0, x1) = (self.breakpoints[i], self.breakpoints[i + 1]);
        let t = (x - x0) / (x1 - x0);
        self.values[i] * (1.0 - t) + self.values[i + 1] * t
    }

    fn segment_of(&self, x: f64) -> usize {
        let n = self.n_segments();
        let (lo, hi) = self.domain();
        let i = ((x - lo) / (hi - lo) * n as f64).floor();
        let mut i = if i < 0.0 { 0 } else { (i as usize).min(n - 1) };
        // guard against rounding in the index estimate
        while i > 0 && x < self.breakpoints[i] {
            i -= 1;
        }
        while i + 1 < n && x >= self.breakpoints[i + 1] {
            i += 1;
        }
        i
    }
}

/// Table lookup without folding; arguments outside the domain clamp to the
/// nearest end.
pub fn nfe_eval(table: &NfeTable, x: f64) -> f64 {
    let (lo, hi) = table.domain();
    let x = x.clamp(lo, hi);
    table.eval_segment(table.segment_of(x), x)
}

/// Reduces `x` using the table's tags. Returns the folded argument and the
/// sign to apply to the table value.
pub fn nfe_fold(x: f64, table: &NfeTable) -> (f64, f64) {
    let tags = table.tags;
    let mut x = x;
    let mut sign = 1.0;
    if let Some(p) = tags.period {
        let half = p / 2.0;
        if !(-half..half).contains(&x) {
            x -= p * ((x + half) / p).floor();
        }
    }
    match tags.symmetry {
        Symmetry::Odd if x < 0.0 => {
            x = -x;
            sign = -1.0;
        }
        Symmetry::Even => x = x.abs(),
        _ => {}
    }
    if let Some(m) = tags.mirror {
        if x > m {
            x = 2.0 * m - x;
        }
    }
    (x, sign)
}

/// Folded evaluation: `sign * nfe_eval(table, folded)`.
pub fn nfe_apply(table: &NfeTable, x: f64) -> f64 {
    let (xf, sign) = nfe_fold(x, table);
    sign * nfe_eval(table, xf)
}
