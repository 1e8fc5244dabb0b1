//! Pose-cell attractor network on a wrapped (x, y, θ) grid.

use super::SlamError;
use std::f64::consts::TAU;

#[derive(Debug, Clone, PartialEq)]
pub struct PoseCellGrid {
    dims: [usize; 3],
    /// Index `(x * ny + y) * nθ + θ`.
    activity: Vec<f64>,
}

fn wrap(i: i64, n: usize) -> usize {
    i.rem_euclid(n as i64) as usize
}

/// Shortest signed distance from `a` to `b` on a ring of `n` cells.
pub fn ring_delta(a: f64, b: f64, n: usize) -> f64 {
    let n = n as f64;
    let d = (b - a).rem_euclid(n);
    if d > n / 2.0 {
        d - n
    } else {
        d
    }
}

impl PoseCellGrid {
    pub const DEFAULT_DIMS: [usize; 3] = [20, 20, 36];

    pub fn zeros(dims: [usize; 3]) -> Result<Self, SlamError> {
        if dims.contains(&0) {
            return Err(SlamError::Config(format!("pose-cell dimensions must be positive: {dims:?}")));
        }
        Ok(Self { dims, activity: vec![0.0; dims.iter().product()] })
    }

    pub fn uniform(dims: [usize; 3]) -> Result<Self, SlamError> {
        let mut g = Self::zeros(dims)?;
        let v = 1.0 / g.activity.len() as f64;
        g.activity.fill(v);
        Ok(g)
    }

    /// All mass on one (wrapped) cell.
    pub fn impulse(dims: [usize; 3], cell: [i64; 3]) -> Result<Self, SlamError> {
        let mut g = Self::zeros(dims)?;
        let i = g.index(cell);
        g.activity[i] = 1.0;
        Ok(g)
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn activity(&self) -> &[f64] {
        &self.activity
    }

    pub fn index(&self, cell: [i64; 3]) -> usize {
        let [nx, ny, nt] = self.dims;
        (wrap(cell[0], nx) * ny + wrap(cell[1], ny)) * nt + wrap(cell[2], nt)
    }

    pub fn get(&self, cell: [i64; 3]) -> f64 {
        self.activity[self.index(cell)]
    }

    pub fn add(&mut self, cell: [i64; 3], v: f64) {
        let i = self.index(cell);
        self.activity[i] += v;
    }

    pub fn total(&self) -> f64 {
        self.activity.iter().sum()
    }

    fn normalize(&mut self) -> Result<(), SlamError> {
        let s = self.total();
        if !(s > 0.0 && s.is_finite()) {
            return Err(SlamError::DeadNetwork);
        }
        self.activity.iter_mut().for_each(|a| *a /= s);
        Ok(())
    }

    fn coords(&self, i: usize) -> [usize; 3] {
        let [_, ny, nt] = self.dims;
        [i / (ny * nt), (i / nt) % ny, i % nt]
    }

    /// Fraction of activity within wrapped Euclidean distance `radius` (cells)
    /// of `center`.
    pub fn mass_within(&self, center: [f64; 3], radius: f64) -> f64 {
        let mut inside = 0.0;
        for (i, &a) in self.activity.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            let c = self.coords(i);
            let d2: f64 = (0..3).map(|k| ring_delta(center[k], c[k] as f64, self.dims[k]).powi(2)).sum();
            if d2 <= radius * radius {
                inside += a;
            }
        }
        inside / self.total()
    }
}

/// Separable difference-of-Gaussians connectivity.
#[derive(Debug, Clone, PartialEq)]
pub struct ExcitationKernel {
    pub sigma_exc: f64,
    pub sigma_inh: f64,
    pub radius: usize,
    pub exc_gain: f64,
    pub inh_gain: f64,
    /// Global inhibition subtracted from every cell each step.
    pub global_inhibition: f64,
    exc_taps: Vec<f64>,
    inh_taps: Vec<f64>,
}

fn gaussian_taps(sigma: f64, radius: usize) -> Vec<f64> {
    let r = radius as i64;
    let taps: Vec<f64> = (-r..=r).map(|d| (-(d * d) as f64 / (2.0 * sigma * sigma)).exp()).collect();
    let s: f64 = taps.iter().sum();
    taps.into_iter().map(|t| t / s).collect()
}

impl ExcitationKernel {
    /// Both Gaussians are normalized to unit sum, so equal gains give a
    /// balanced (zero-sum) kernel.
    pub fn new(sigma_exc: f64, sigma_inh: f64, radius: usize, exc_gain: f64, inh_gain: f64, global_inhibition: f64) -> Result<Self, SlamError> {
        if !(sigma_exc > 0.0 && sigma_exc < sigma_inh && radius > 0) {
            return Err(SlamError::Config("kernel needs 0 < sigma_exc < sigma_inh and radius > 0".into()));
        }
        if !(exc_gain >= 0.0 && inh_gain >= 0.0 && global_inhibition >= 0.0) {
            return Err(SlamError::Config("kernel gains and inhibition must be non-negative".into()));
        }
        Ok(Self {
            sigma_exc,
            sigma_inh,
            radius,
            exc_gain,
            inh_gain,
            global_inhibition,
            exc_taps: gaussian_taps(sigma_exc, radius),
            inh_taps: gaussian_taps(sigma_inh, radius),
        })
    }

    /// Weight at integer offset `d`.
    pub fn weight(&self, d: [i64; 3]) -> f64 {
        let r = self.radius as i64;
        if d.iter().any(|v| v.abs() > r) {
            return 0.0;
        }
        let g = |taps: &[f64]| d.iter().map(|&v| taps[(v + r) as usize]).product::<f64>();
        self.exc_gain * g(&self.exc_taps) - self.inh_gain * g(&self.inh_taps)
    }

    pub fn net_sum(&self) -> f64 {
        self.exc_gain - self.inh_gain
    }

    /// Multiply-accumulates per cell for one step (two separable Gaussians,
    /// three axes each).
    pub fn macs_per_cell(&self) -> u64 {
        2 * 3 * (2 * self.radius as u64 + 1)
    }
}

impl Default for ExcitationKernel {
    fn default() -> Self {
        Self::new(1.0, 2.0, 5, 1.0, 1.0, 0.00002).expect("default kernel is valid")
    }
}

/// Wrapped 1-D convolution along `axis`.
fn convolve_axis(src: &[f64], dims: [usize; 3], axis: usize, taps: &[f64]) -> Vec<f64> {
    let r = (taps.len() / 2) as i64;
    let n = dims[axis];
    let stride = match axis {
        0 => dims[1] * dims[2],
        1 => dims[2],
        _ => 1,
    };
    let mut out = vec![0.0; src.len()];
    for (i, o) in out.iter_mut().enumerate() {
        let pos = (i / stride) % n;
        let base = i - pos * stride;
        let mut acc = 0.0;
        for (k, &t) in taps.iter().enumerate() {
            let j = wrap(pos as i64 + k as i64 - r, n);
            acc += t * src[base + j * stride];
        }
        *o = acc;
    }
    out
}

fn separable(src: &[f64], dims: [usize; 3], taps: &[f64]) -> Vec<f64> {
    let a = convolve_axis(src, dims, 0, taps);
    let b = convolve_axis(&a, dims, 1, taps);
    convolve_axis(&b, dims, 2, taps)
}

/// One attractor update: wrapped convolution added to the activity, minus
/// global inhibition, clamped at zero and renormalized.
pub fn can_step(grid: &PoseCellGrid, kernel: &ExcitationKernel) -> Result<PoseCellGrid, SlamError> {
    let exc = separable(&grid.activity, grid.dims, &kernel.exc_taps);
    let inh = separable(&grid.activity, grid.dims, &kernel.inh_taps);
    let mut out = grid.clone();
    for (i, a) in out.activity.iter_mut().enumerate() {
        let v = *a + kernel.exc_gain * exc[i] - kernel.inh_gain * inh[i] - kernel.global_inhibition;
        *a = v.max(0.0);
    }
    out.normalize()?;
    Ok(out)
}

/// Moves activity along one axis by a real number of cells, splitting each
/// cell's mass between the two cells it lands between.
fn shift_axis(src: &[f64], dims: [usize; 3], axis: usize, shift: f64) -> Vec<f64> {
    if shift == 0.0 {
        return src.to_vec();
    }
    let whole = shift.floor();
    let frac = shift - whole;
    let n = dims[axis];
    let stride = match axis {
        0 => dims[1] * dims[2],
        1 => dims[2],
        _ => 1,
    };
    let mut out = vec![0.0; src.len()];
    for (i, &a) in src.iter().enumerate() {
        if a == 0.0 {
            continue;
        }
        let pos = (i / stride) % n;
        let base = i - pos * stride;
        let j0 = wrap(pos as i64 + whole as i64, n);
        let j1 = wrap(pos as i64 + whole as i64 + 1, n);
        out[base + j0 * stride] += a * (1.0 - frac);
        out[base + j1 * stride] += a * frac;
    }
    out
}

/// Translates activity by `v` cells along heading `theta` (radians) in x/y.
pub fn path_integrate(grid: &PoseCellGrid, v: f64, theta: f64) -> PoseCellGrid {
    if v == 0.0 {
        return grid.clone();
    }
    let a = shift_axis(&grid.activity, grid.dims, 0, v * theta.cos());
    let b = shift_axis(&a, grid.dims, 1, v * theta.sin());
    PoseCellGrid { dims: grid.dims, activity: b }
}

/// Rotates activity along θ by `dtheta` radians.
pub fn rotate_heading(grid: &PoseCellGrid, dtheta: f64) -> PoseCellGrid {
    let cells = dtheta / TAU * grid.dims[2] as f64;
    PoseCellGrid { dims: grid.dims, activity: shift_axis(&grid.activity, grid.dims, 2, cells) }
}

/// Adds `strength` at the wrapped cell nearest `pose` and renormalizes.
pub fn inject(grid: &PoseCellGrid, pose: [f64; 3], strength: f64) -> Result<PoseCellGrid, SlamError> {
    if !(strength > 0.0 && strength <= 1.0) {
        return Err(SlamError::Config(format!("injection strength {strength} outside (0, 1]")));
    }
    let mut out = grid.clone();
    out.add([pose[0].round() as i64, pose[1].round() as i64, pose[2].round() as i64], strength);
    out.normalize()?;
    Ok(out)
}

/// Activity-weighted circular mean along each axis, in cell coordinates.
pub fn packet_centroid(grid: &PoseCellGrid) -> Result<[f64; 3], SlamError> {
    let total = grid.total();
    if !(total > 0.0) {
        return Err(SlamError::DeadNetwork);
    }
    let mut sums = [[0.0f64; 2]; 3];
    for (i, &a) in grid.activity.iter().enumerate() {
        if a == 0.0 {
            continue;
        }
        let c = grid.coords(i);
        for k in 0..3 {
            let ang = TAU * c[k] as f64 / grid.dims[k] as f64;
            sums[k][0] += a * ang.cos();
            sums[k][1] += a * ang.sin();
        }
    }
    let mut out = [0.0; 3];
    for k in 0..3 {
        let n = grid.dims[k] as f64;
        let mut v = sums[k][1].atan2(sums[k][0]).rem_euclid(TAU) / TAU * n;
        // snap rounding noise near the seam back to zero
        if n - v < 1e-9 {
            v = 0.0;
        }
        out[k] = v;
    }
    Ok(out)
}

/// Digital head-direction ring.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadDirectionRing {
    n_cells: usize,
    heading: f64,
}

impl HeadDirectionRing {
    pub const DEFAULT_CELLS: usize = 36;

    pub fn new(n_cells: usize, heading: f64) -> Self {
        Self { n_cells: n_cells.max(1), heading: heading.rem_euclid(TAU) }
    }

    pub fn heading(&self) -> f64 {
        self.heading
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    /// Index of the cell closest to the decoded heading.
    pub fn active_cell(&self) -> usize {
        ((self.heading / TAU * self.n_cells as f64).round() as usize) % self.n_cells
    }

    pub fn rotate(&mut self, dtheta: f64) {
        let h = (self.heading + dtheta).rem_euclid(TAU);
        // rem_euclid can round up to exactly TAU
        self.heading = if h >= TAU { 0.0 } else { h };
    }
}
