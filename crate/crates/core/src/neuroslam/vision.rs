use super::SlamError;

/// 8-bit grayscale image, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntensityImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl IntensityImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self, SlamError> {
        if width == 0 || height == 0 || pixels.len() != width * height {
            return Err(SlamError::Image(format!("{width}x{height} image with {} pixels", pixels.len())));
        }
        Ok(Self { width, height, pixels })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Result<Self, SlamError> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: u8) {
        self.pixels[y * self.width + x] = v;
    }

    /// Circular horizontal shift: column `x` of the result is column
    /// `x - s (mod width)` of `self`.
    pub fn shifted(&self, s: i32) -> IntensityImage {
        let w = self.width as i32;
        let mut out = self.clone();
        for y in 0..self.height {
            for x in 0..self.width {
                let src = (x as i32 - s).rem_euclid(w) as usize;
                out.set(x, y, self.get(src, y));
            }
        }
        out
    }
}

/// Column means with the global mean removed.
pub fn profile(img: &IntensityImage) -> Vec<f64> {
    let h = img.height as f64;
    let cols: Vec<f64> = (0..img.width)
        .map(|x| (0..img.height).map(|y| img.get(x, y) as f64).sum::<f64>() / h)
        .collect();
    let mean = cols.iter().sum::<f64>() / cols.len() as f64;
    cols.into_iter().map(|c| c - mean).collect()
}

/// Mean absolute difference between `cur` and `prev` displaced by `s`
/// columns (`cur[i]` against `prev[i - s]`), over the overlapping columns.
pub fn shifted_difference(prev: &[f64], cur: &[f64], s: i32) -> f64 {
    let w = prev.len() as i32;
    let (lo, hi) = (s.max(0), (w + s).min(w));
    if hi <= lo {
        return f64::INFINITY;
    }
    let sum: f64 = (lo..hi).map(|i| (cur[i as usize] - prev[(i - s) as usize]).abs()).sum();
    sum / (hi - lo) as f64
}

/// Shift in `[-max_shift, max_shift]` minimizing the difference, searched in
/// the order 0, +1, −1, +2, … so ties go to the smallest magnitude.
pub fn best_shift(prev: &[f64], cur: &[f64], max_shift: usize) -> (i32, f64) {
    let mut best = (0, shifted_difference(prev, cur, 0));
    for m in 1..=max_shift as i32 {
        for s in [m, -m] {
            let d = shifted_difference(prev, cur, s);
            if d < best.1 {
                best = (s, d);
            }
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdometryEstimate {
    /// Rotation, radians, counter-clockwise positive.
    pub dtheta: f64,
    /// Forward speed, world units per frame.
    pub v: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VoConfig {
    pub fov: f64,
    pub max_shift: usize,
    /// Speed per unit of residual profile difference.
    pub speed_gain: f64,
    pub max_speed: f64,
}

impl VoConfig {
    pub fn new(fov: f64, width: usize) -> Self {
        Self { fov, max_shift: (width / 4).max(1), speed_gain: 1.0, max_speed: f64::INFINITY }
    }
}

/// Rotation from the best profile shift and speed from the remaining
/// difference.
pub fn vo_estimate(prev: &IntensityImage, cur: &IntensityImage, cfg: &VoConfig) -> Result<OdometryEstimate, SlamError> {
    if prev.width != cur.width || prev.height != cur.height {
        return Err(SlamError::Image(format!(
            "frame sizes differ: {}x{} vs {}x{}",
            prev.width, prev.height, cur.width, cur.height
        )));
    }
    vo_from_profiles(&profile(prev), &profile(cur), cfg)
}

pub(crate) fn vo_from_profiles(prev: &[f64], cur: &[f64], cfg: &VoConfig) -> Result<OdometryEstimate, SlamError> {
    let max_shift = cfg.max_shift.min(prev.len() - 1);
    let (s, d) = best_shift(prev, cur, max_shift);
    Ok(OdometryEstimate { dtheta: s as f64 * cfg.fov / prev.len() as f64, v: (cfg.speed_gain * d).min(cfg.max_speed) })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ViewTemplate {
    pub id: usize,
    pub profile: Vec<f64>,
    pub experience: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TemplateMatch {
    pub id: usize,
    pub new: bool,
    /// Best difference found, infinite for an empty store.
    pub difference: f64,
}

/// Best stored template under the minimum-over-shifts difference. A match
/// needs a difference below `threshold`; otherwise the profile is stored
/// as a new template.
pub fn template_match(
    p: &[f64],
    store: &mut Vec<ViewTemplate>,
    threshold: f64,
    max_shift: usize,
) -> Result<TemplateMatch, SlamError> {
    if !(threshold > 0.0) {
        return Err(SlamError::Config(format!("template threshold must be positive, got {threshold}")));
    }
    let max_shift = max_shift.min(p.len().saturating_sub(1));
    let mut best: Option<(usize, f64)> = None;
    for t in store.iter() {
        if t.profile.len() != p.len() {
            return Err(SlamError::Image(format!("profile length {} vs template {}", p.len(), t.profile.len())));
        }
        let d = best_shift(&t.profile, p, max_shift).1;
        if best.is_none_or(|(_, bd)| d < bd) {
            best = Some((t.id, d));
        }
    }
    match best {
        Some((id, d)) if d < threshold => Ok(TemplateMatch { id, new: false, difference: d }),
        other => {
            let id = store.len();
            store.push(ViewTemplate { id, profile: p.to_vec(), experience: None });
            Ok(TemplateMatch { id, new: true, difference: other.map_or(f64::INFINITY, |(_, d)| d) })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_image(w: usize, h: usize, seed: u64, max: u8) -> IntensityImage {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        IntensityImage::new(w, h, (0..w * h).map(|_| rng.gen_range(0..=max)).collect()).unwrap()
    }

    #[test]
    fn constant_image_profile_is_zero() {
        let p = profile(&IntensityImage::filled(16, 4, 77).unwrap());
        assert!(p.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn bright_column_peaks() {
        let mut img = IntensityImage::filled(10, 3, 20).unwrap();
        for y in 0..3 {
            img.set(6, y, 250);
        }
        let p = profile(&img);
        let peak = (0..10).max_by(|&a, &b| p[a].total_cmp(&p[b])).unwrap();
        assert_eq!(peak, 6);
    }

    #[test]
    fn shifted_image_gives_shifted_profile() {
        let img = random_image(32, 5, 1, 255);
        let p = profile(&img);
        for s in [-5, 1, 9] {
            let q = profile(&img.shifted(s));
            for x in 0..32 {
                let src = (x as i32 - s).rem_euclid(32) as usize;
                assert!((q[x] - p[src]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn vo_examples() {
        let img = random_image(64, 8, 2, 240);
        let cfg = VoConfig::new(90f64.to_radians(), 64);
        let same = vo_estimate(&img, &img, &cfg).unwrap();
        assert_eq!((same.dtheta, same.v), (0.0, 0.0));
        let turned = vo_estimate(&img, &img.shifted(4), &cfg).unwrap();
        assert!((turned.dtheta.to_degrees() - 5.625).abs() < 1e-12, "{}", turned.dtheta.to_degrees());
        assert_eq!(turned.v, 0.0);
        let brighter = IntensityImage::new(64, 8, img.pixels().iter().map(|&p| p + 10).collect()).unwrap();
        assert_eq!(vo_estimate(&img, &brighter, &cfg).unwrap().dtheta, 0.0);
        assert!(vo_estimate(&img, &random_image(32, 8, 3, 255), &cfg).is_err());
    }

    #[test]
    fn vo_recovers_every_shift_in_range() {
        let img = random_image(64, 4, 9, 255);
        let cfg = VoConfig::new(1.0, 64);
        for s in -(cfg.max_shift as i32)..=cfg.max_shift as i32 {
            let est = vo_estimate(&img, &img.shifted(s), &cfg).unwrap();
            assert_eq!(est.dtheta, s as f64 / 64.0, "shift {s}");
        }
    }

    #[test]
    fn template_store_behaviour() {
        let mut store = Vec::new();
        let a = profile(&random_image(32, 4, 5, 255));
        let m = template_match(&a, &mut store, 1.0, 8).unwrap();
        assert_eq!((m.id, m.new), (0, true));
        let m = template_match(&a, &mut store, 1.0, 8).unwrap();
        assert_eq!((m.id, m.new, m.difference), (0, false, 0.0));
        assert!(template_match(&a, &mut store, 0.0, 8).is_err());
    }

    #[test]
    fn random_profiles_do_not_match() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..100 {
            let a: Vec<f64> = (0..64).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let b: Vec<f64> = (0..64).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let rms = (a.iter().map(|v| v * v).sum::<f64>() / 64.0).sqrt();
            let mut store = vec![ViewTemplate { id: 0, profile: a, experience: None }];
            assert!(template_match(&b, &mut store, 0.1 * rms, 16).unwrap().new);
        }
    }
}
