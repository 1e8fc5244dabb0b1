use super::{BitWidth, EnergyParams, MacError, MacModel, Operand};

/// One cell of a 2-D energy-per-MAC surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfacePoint {
    pub x: u32,
    pub w: u32,
    pub value: i64,
    pub energy_pj: f64,
    pub cycles: u64,
}

/// Energy of every positive operand pair at width `b`, `x` major.
pub fn energy_surface(
    b: BitWidth,
    model: MacModel,
    params: &EnergyParams,
) -> Result<Vec<SurfacePoint>, MacError> {
    let n = b.max_magnitude() + 1;
    let mut out = Vec::with_capacity((n * n) as usize);
    for x in 0..n {
        for w in 0..n {
            let r = model.mac(Operand::pos(x), Operand::pos(w), 0, params, b)?;
            out.push(SurfacePoint { x, w, value: r.value, energy_pj: r.energy_pj, cycles: r.dco_cycles });
        }
    }
    Ok(out)
}
