//! Frame sequences stored as raw 8-bit grayscale files.

use super::{IntensityImage, Pose, SlamError, SlamInput};
use std::fmt::Write;
use std::path::Path;

pub const MANIFEST: &str = "manifest.txt";

/// Reads `dir/manifest.txt`: `width`, `height`, `fov_deg`, optional
/// `start = x y θ_deg`, then one `frame = <file>` line per frame in order.
/// Each file holds exactly `width * height` bytes, row-major.
pub fn load_raw_sequence(dir: &Path) -> Result<SlamInput, SlamError> {
    let io = |e: std::io::Error, p: &Path| SlamError::Io(format!("{}: {e}", p.display()));
    let mpath = dir.join(MANIFEST);
    let text = std::fs::read_to_string(&mpath).map_err(|e| io(e, &mpath))?;
    let (mut width, mut height, mut fov) = (None, None, None);
    let mut start = Pose::default();
    let mut files = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let err = |msg: String| SlamError::World { line: i + 1, msg };
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| err("expected `key = value`".into()))?;
        let (key, value) = (key.trim(), value.trim());
        let num = |v: &str| v.parse::<f64>().map_err(|e| err(format!("{key}: {e}")));
        match key {
            "width" => width = Some(value.parse::<usize>().map_err(|e| err(format!("width: {e}")))?),
            "height" => height = Some(value.parse::<usize>().map_err(|e| err(format!("height: {e}")))?),
            "fov_deg" => fov = Some(num(value)?.to_radians()),
            "start" => {
                let p: Vec<&str> = value.split_whitespace().collect();
                if p.len() != 3 {
                    return Err(err("start needs x y theta".into()));
                }
                start = Pose::new(num(p[0])?, num(p[1])?, num(p[2])?.to_radians());
            }
            "frame" => files.push(value.to_string()),
            other => return Err(err(format!("unknown key `{other}`"))),
        }
    }
    let missing = |k: &str| SlamError::Config(format!("manifest lacks `{k}`"));
    let (w, h) = (width.ok_or_else(|| missing("width"))?, height.ok_or_else(|| missing("height"))?);
    let fov = fov.ok_or_else(|| missing("fov_deg"))?;
    let mut frames = Vec::with_capacity(files.len());
    for f in &files {
        let p = dir.join(f);
        let bytes = std::fs::read(&p).map_err(|e| io(e, &p))?;
        frames.push(IntensityImage::new(w, h, bytes)?);
    }
    if frames.is_empty() {
        return Err(SlamError::Config("manifest lists no frames".into()));
    }
    Ok(SlamInput { frames, truth: None, start, fov })
}

/// Writes frames and a manifest that [`load_raw_sequence`] reads back.
pub fn save_raw_sequence(dir: &Path, input: &SlamInput) -> Result<(), SlamError> {
    let io = |e: std::io::Error| SlamError::Io(format!("{}: {e}", dir.display()));
    let first = input.frames.first().ok_or_else(|| SlamError::Config("no frames".into()))?;
    std::fs::create_dir_all(dir).map_err(io)?;
    let mut m = String::new();
    let _ = writeln!(m, "width = {}\nheight = {}\nfov_deg = {}", first.width(), first.height(), input.fov.to_degrees());
    let s = input.start;
    let _ = writeln!(m, "start = {} {} {}", s.x, s.y, s.theta.to_degrees());
    for (k, f) in input.frames.iter().enumerate() {
        let name = format!("frame_{k:05}.raw");
        std::fs::write(dir.join(&name), f.pixels()).map_err(io)?;
        let _ = writeln!(m, "frame = {name}");
    }
    std::fs::write(dir.join(MANIFEST), m).map_err(io)
}
