//! Synthetic square room with striped walls, seen by a 1-D raycaster.

use super::{IntensityImage, Pose, SlamError};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use std::f64::consts::TAU;
use std::fmt::Write;

const STRIPE: f64 = 0.5;
const WALL_HEIGHT: f64 = 1.5;
const CEILING: f64 = 180.0;
const FLOOR: f64 = 70.0;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticWorld {
    /// Side of the square room `[0, room]²`.
    pub room: f64,
    /// Closed loop through these points, starting at the first.
    pub waypoints: Vec<(f64, f64)>,
    pub loops: usize,
    /// Forward motion per frame.
    pub speed: f64,
    /// In-place rotation per frame, radians.
    pub turn_rate: f64,
    pub texture_seed: u64,
    pub noise_sigma: f64,
    pub width: usize,
    pub height: usize,
    pub fov: f64,
}

impl Default for SyntheticWorld {
    fn default() -> Self {
        Self::square_loop()
    }
}

impl SyntheticWorld {
    /// 10 × 10 room, one counter-clockwise lap of a 6 × 6 square.
    pub fn square_loop() -> Self {
        Self {
            room: 10.0,
            waypoints: vec![(2.0, 2.0), (8.0, 2.0), (8.0, 8.0), (2.0, 8.0)],
            loops: 1,
            speed: 0.1,
            turn_rate: 10f64.to_radians(),
            texture_seed: 7,
            noise_sigma: 0.0,
            width: 64,
            height: 16,
            fov: 90f64.to_radians(),
        }
    }

    pub fn validate(&self) -> Result<(), SlamError> {
        let bad = |m: String| Err(SlamError::Config(m));
        if !(self.room > 0.0 && self.room.is_finite()) {
            return bad(format!("room size {}", self.room));
        }
        if self.waypoints.len() < 2 {
            return bad("need at least two waypoints".into());
        }
        if self.waypoints.iter().any(|&(x, y)| !(x > 0.0 && x < self.room && y > 0.0 && y < self.room)) {
            return bad("waypoints must lie strictly inside the room".into());
        }
        if !(self.speed > 0.0 && self.turn_rate > 0.0 && self.noise_sigma >= 0.0) {
            return bad("speed and turn rate must be positive, noise non-negative".into());
        }
        if self.width < 8 || self.height == 0 || !(self.fov > 0.0 && self.fov < std::f64::consts::PI) {
            return bad("camera needs width >= 8, height >= 1 and 0 < fov < pi".into());
        }
        Ok(())
    }

    /// Ground-truth pose per frame: turn in place toward the next waypoint,
    /// then drive to it; after the last lap, turn back to the initial heading.
    pub fn trajectory(&self) -> Vec<Pose> {
        let wp = &self.waypoints;
        let heading_to = |a: (f64, f64), b: (f64, f64)| (b.1 - a.1).atan2(b.0 - a.0).rem_euclid(TAU);
        let start_heading = heading_to(wp[0], wp[1]);
        let mut pose = Pose::new(wp[0].0, wp[0].1, start_heading);
        let mut out = vec![pose];
        let turn_to = |pose: &mut Pose, target: f64, out: &mut Vec<Pose>| {
            loop {
                let d = super::wrap_angle(target - pose.theta);
                if d.abs() < 1e-12 {
                    break;
                }
                let step = d.clamp(-self.turn_rate, self.turn_rate);
                pose.theta = (pose.theta + step).rem_euclid(TAU);
                out.push(*pose);
            }
        };
        for _ in 0..self.loops {
            for i in 0..wp.len() {
                let (a, b) = (wp[i], wp[(i + 1) % wp.len()]);
                turn_to(&mut pose, heading_to(a, b), &mut out);
                let len = (b.0 - a.0).hypot(b.1 - a.1);
                let n = (len / self.speed - 1e-9).ceil() as usize;
                for k in 1..=n {
                    let t = (k as f64 * self.speed / len).min(1.0);
                    pose.x = a.0 + t * (b.0 - a.0);
                    pose.y = a.1 + t * (b.1 - a.1);
                    out.push(pose);
                }
            }
        }
        turn_to(&mut pose, start_heading, &mut out);
        out
    }

    fn stripes(&self) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.texture_seed);
        let n = (self.room / STRIPE).ceil() as usize + 1;
        (0..4).map(|_| (0..n).map(|_| rng.gen_range(30..=225) as f64).collect()).collect()
    }

    /// Camera frame at `pose`. Column 0 looks `fov/2` to the left of the
    /// heading. `frame` seeds the pixel noise.
    pub fn render(&self, pose: Pose, frame: u64) -> IntensityImage {
        self.render_with(&self.stripes(), pose, frame)
    }

    fn render_with(&self, stripes: &[Vec<f64>], pose: Pose, frame: u64) -> IntensityImage {
        let (w, h) = (self.width, self.height);
        let focal = (w as f64 / 2.0) / (self.fov / 2.0).tan();
        let mut px = vec![0f64; w * h];
        for i in 0..w {
            let off = self.fov / 2.0 - (i as f64 + 0.5) * self.fov / w as f64;
            let phi = pose.theta + off;
            let (dx, dy) = (phi.cos(), phi.sin());
            let mut hit = (f64::INFINITY, 0usize, 0.0);
            let mut consider = |t: f64, wall: usize, u: f64| {
                if t > 0.0 && t < hit.0 {
                    hit = (t, wall, u);
                }
            };
            if dy < 0.0 {
                let t = -pose.y / dy;
                consider(t, 0, pose.x + t * dx);
            }
            if dx > 0.0 {
                let t = (self.room - pose.x) / dx;
                consider(t, 1, pose.y + t * dy);
            }
            if dy > 0.0 {
                let t = (self.room - pose.y) / dy;
                consider(t, 2, pose.x + t * dx);
            }
            if dx < 0.0 {
                let t = -pose.x / dx;
                consider(t, 3, pose.y + t * dy);
            }
            let (t, wall, u) = hit;
            let s = &stripes[wall];
            let pos = (u / STRIPE).clamp(0.0, (s.len() - 1) as f64);
            let k = (pos.floor() as usize).min(s.len() - 2);
            let tex = s[k] + (pos - k as f64) * (s[k + 1] - s[k]);
            // cylindrical camera: band height from ray length, so rotation is a pure column shift
            let band = focal * WALL_HEIGHT / t;
            let (top, bottom) = (h as f64 / 2.0 - band / 2.0, h as f64 / 2.0 + band / 2.0);
            for r in 0..h {
                let (r0, r1) = (r as f64, r as f64 + 1.0);
                let cover = (r1.min(bottom) - r0.max(top)).clamp(0.0, 1.0);
                let bg = if r1 <= h as f64 / 2.0 { CEILING } else { FLOOR };
                px[r * w + i] = cover * tex + (1.0 - cover) * bg;
            }
        }
        if self.noise_sigma > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(self.texture_seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ frame);
            let normal = Normal::new(0.0, self.noise_sigma).expect("sigma is finite and non-negative");
            for v in px.iter_mut() {
                *v += normal.sample(&mut rng);
            }
        }
        let pixels = px.into_iter().map(|v| v.round().clamp(0.0, 255.0) as u8).collect();
        IntensityImage::new(w, h, pixels).expect("dimensions are consistent")
    }

    /// All frames along the trajectory.
    pub fn frames(&self) -> Vec<(Pose, IntensityImage)> {
        let stripes = self.stripes();
        self.trajectory()
            .into_iter()
            .enumerate()
            .map(|(k, p)| (p, self.render_with(&stripes, p, k as u64)))
            .collect()
    }

    /// `key = value` lines; `waypoint = x y` may repeat. Angles are in
    /// degrees.
    pub fn parse(text: &str) -> Result<Self, SlamError> {
        let mut w = Self::square_loop();
        let mut waypoints = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let err = |msg: String| SlamError::World { line, msg };
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| err("expected `key = value`".into()))?;
            let (key, value) = (key.trim(), value.trim());
            let num = |v: &str| v.parse::<f64>().map_err(|e| err(format!("{key}: {e}")));
            let int = |v: &str| v.parse::<u64>().map_err(|e| err(format!("{key}: {e}")));
            match key {
                "room" => w.room = num(value)?,
                "waypoint" => {
                    let parts: Vec<&str> = value.split_whitespace().collect();
                    if parts.len() != 2 {
                        return Err(err("waypoint needs two coordinates".into()));
                    }
                    waypoints.push((num(parts[0])?, num(parts[1])?));
                }
                "loops" => w.loops = int(value)? as usize,
                "speed" => w.speed = num(value)?,
                "turn_rate_deg" => w.turn_rate = num(value)?.to_radians(),
                "texture_seed" => w.texture_seed = int(value)?,
                "noise_sigma" => w.noise_sigma = num(value)?,
                "width" => w.width = int(value)? as usize,
                "height" => w.height = int(value)? as usize,
                "fov_deg" => w.fov = num(value)?.to_radians(),
                other => return Err(err(format!("unknown key `{other}`"))),
            }
        }
        if !waypoints.is_empty() {
            w.waypoints = waypoints;
        }
        w.validate()?;
        Ok(w)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "room = {}", self.room);
        for (x, y) in &self.waypoints {
            let _ = writeln!(s, "waypoint = {x} {y}");
        }
        let _ = writeln!(s, "loops = {}", self.loops);
        let _ = writeln!(s, "speed = {}", self.speed);
        let _ = writeln!(s, "turn_rate_deg = {}", self.turn_rate.to_degrees());
        let _ = writeln!(s, "texture_seed = {}", self.texture_seed);
        let _ = writeln!(s, "noise_sigma = {}", self.noise_sigma);
        let _ = writeln!(s, "width = {}", self.width);
        let _ = writeln!(s, "height = {}", self.height);
        let _ = writeln!(s, "fov_deg = {}", self.fov.to_degrees());
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trajectory_closes() {
        let w = SyntheticWorld::square_loop();
        let t = w.trajectory();
        let (first, last) = (t[0], *t.last().unwrap());
        assert!(first.distance(last) < 1e-12);
        assert!(super::super::wrap_angle(first.theta - last.theta).abs() < 1e-9);
        // 4 sides of 60 steps, 4 right-angle turns of 9 frames
        assert_eq!(t.len(), 1 + 4 * 60 + 4 * 9);
    }

    #[test]
    fn rendering_is_deterministic_and_rotates() {
        let w = SyntheticWorld::square_loop();
        let p = Pose::new(5.0, 5.0, 0.3);
        assert_eq!(w.render(p, 1), w.render(p, 1));
        let a = w.render(p, 0);
        let step = w.fov / w.width as f64;
        let b = w.render(Pose { theta: p.theta + 3.0 * step, ..p }, 0);
        // turning left by three columns moves the scene three columns right
        for y in 0..w.height {
            for x in 3..w.width {
                assert!(a.get(x - 3, y).abs_diff(b.get(x, y)) <= 1, "({x}, {y})");
            }
        }
        let (s, _) = super::super::best_shift(&super::super::profile(&a), &super::super::profile(&b), 16);
        assert_eq!(s, 3);
    }

    #[test]
    fn noisy_rotation_within_one_column() {
        let w = SyntheticWorld { noise_sigma: 2.0, ..SyntheticWorld::square_loop() };
        let step = w.fov / w.width as f64;
        let cfg = super::super::VoConfig::new(w.fov, w.width);
        for (k, s) in [-9i32, -4, -1, 0, 2, 5, 11].into_iter().enumerate() {
            let p = Pose::new(3.0 + 0.5 * k as f64, 4.0, 0.4 * k as f64);
            let a = w.render(p, 2 * k as u64);
            let b = w.render(Pose { theta: p.theta + s as f64 * step, ..p }, 2 * k as u64 + 1);
            let est = super::super::vo_estimate(&a, &b, &cfg).unwrap();
            assert!((est.dtheta / step - s as f64).abs() <= 1.0 + 1e-9, "shift {s}: {}", est.dtheta / step);
        }
    }

    #[test]
    fn text_round_trip() {
        let w = SyntheticWorld { noise_sigma: 2.0, loops: 2, ..SyntheticWorld::square_loop() };
        let back = SyntheticWorld::parse(&w.to_text()).unwrap();
        assert_eq!(back.waypoints, w.waypoints);
        assert_eq!(back.to_text(), w.to_text());
        assert!(SyntheticWorld::parse("waypoint = 1\n").is_err());
        assert!(SyntheticWorld::parse("colour = 3\n").is_err());
        assert!(SyntheticWorld::parse("waypoint = 20 20\nwaypoint = 1 1\n").is_err());
    }
}
