use super::lpu::Lpu;
use super::nfe::{nfe_apply, NfeTable};
use super::SwarmError;
use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

pub type Vec2 = Vector2<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialParams {
    pub k_att: f64,
    pub k_rep: f64,
    /// Repulsion influence radius.
    pub d0: f64,
    /// Step clamp on the force magnitude.
    pub v_max: f64,
}

impl Default for PotentialParams {
    fn default() -> Self {
        Self { k_att: 1.0, k_rep: 0.02, d0: 0.8, v_max: 0.1 }
    }
}

impl PotentialParams {
    pub fn validate(&self) -> Result<(), SwarmError> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if ok(self.k_att) && ok(self.k_rep) && ok(self.d0) && ok(self.v_max) {
            Ok(())
        } else {
            Err(SwarmError::Config(format!("potential parameters must be positive: {self:?}")))
        }
    }

    /// Range of the quantized force coefficients. Repulsion saturates here, at
    /// four times the step clamp, so it always dominates a clipped attraction.
    pub fn coefficient_range(&self) -> f64 {
        4.0 * self.v_max
    }
}

fn clamp_norm(f: Vec2, v_max: f64) -> Vec2 {
    let n = f.norm();
    if n > v_max {
        f * (v_max / n)
    } else {
        f
    }
}

/// Quadratic attraction to `goal` plus inverse-distance repulsion from every
/// obstacle closer than `d0`, clamped to `v_max`.
pub fn apf_force(pos: Vec2, goal: Vec2, obstacles: &[Vec2], params: &PotentialParams) -> Result<Vec2, SwarmError> {
    let mut f = params.k_att * (goal - pos);
    for &obs in obstacles {
        let diff = pos - obs;
        let d = diff.norm();
        if d == 0.0 {
            return Err(SwarmError::Singular);
        }
        if d < params.d0 {
            f += params.k_rep * (1.0 / d - 1.0 / params.d0) / (d * d) * (diff / d);
        }
    }
    Ok(clamp_norm(f, params.v_max))
}

/// Same field on the modeled hardware. Each contribution is written as a
/// non-negative coefficient times a unit direction; `1/d` comes from the NFE
/// reciprocal table, and the two force components are LPU dot products of
/// quantized coefficients with quantized direction components.
pub fn apf_force_hw(
    pos: Vec2,
    goal: Vec2,
    obstacles: &[Vec2],
    params: &PotentialParams,
    recip: &NfeTable,
    lpu: &mut Lpu,
) -> Result<Vec2, SwarmError> {
    let mut coef = Vec::with_capacity(obstacles.len() + 1);
    let mut ux = Vec::with_capacity(obstacles.len() + 1);
    let mut uy = Vec::with_capacity(obstacles.len() + 1);
    let to_goal = goal - pos;
    let dg = to_goal.norm();
    if dg > 0.0 {
        coef.push(params.k_att * dg);
        ux.push(to_goal.x / dg);
        uy.push(to_goal.y / dg);
    }
    let inv_d0 = 1.0 / params.d0;
    for &obs in obstacles {
        let diff = pos - obs;
        let d = diff.norm();
        if d == 0.0 {
            return Err(SwarmError::Singular);
        }
        if d >= params.d0 {
            continue;
        }
        let r = nfe_apply(recip, d);
        coef.push(params.k_rep * (r - inv_d0).max(0.0) * r * r);
        ux.push((diff.x * r).clamp(-1.0, 1.0));
        uy.push((diff.y * r).clamp(-1.0, 1.0));
    }
    if coef.is_empty() {
        return Ok(Vec2::zeros());
    }
    let range = params.coefficient_range();
    let fx = lpu.dot_real(&coef, range, &ux, 1.0)?;
    let fy = lpu.dot_real(&coef, range, &uy, 1.0)?;
    Ok(clamp_norm(Vec2::new(fx, fy), params.v_max))
}
