//! Single-integrator position updates: nearest-deficit pursuit, gradient
//! descent on the error field, and their density-weighted blend.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Point, ScalarField};

/// Gradients shorter than this are treated as zero.
pub const GRADIENT_EPS: f64 = 1e-12;

/// Both densities below this make the blend weight degenerate.
pub const DENSITY_EPS: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlMode {
    NearestOnly,
    GradientOnly,
    #[default]
    Blended,
}

impl ControlMode {
    pub fn label(self) -> &'static str {
        match self {
            ControlMode::NearestOnly => "nearest_only",
            ControlMode::GradientOnly => "gradient_only",
            ControlMode::Blended => "blended",
        }
    }
}

/// Direction taken along the error-field gradient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientSign {
    /// Move along `-grad(phi)`, towards deficits.
    #[default]
    Descent,
    /// Move along `+grad(phi)`.
    Literal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlConfig {
    pub v_max: f64,
    pub mode: ControlMode,
    pub gradient_sign: GradientSign,
}

impl Default for ControlConfig {
    fn default() -> Self {
        Self {
            v_max: 10.0,
            mode: ControlMode::Blended,
            gradient_sign: GradientSign::Descent,
        }
    }
}

impl ControlConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.v_max.is_finite() && self.v_max > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "v_max must be positive (got {})",
                self.v_max
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentState {
    pub id: usize,
    pub position: Point,
}

fn unit(d: Point) -> Option<Point> {
    let n = d.norm();
    (n > 0.0).then(|| Point::new(d.x / n, d.y / n))
}

/// Full-speed step towards `target`.
pub fn nearest_point_step(mu: Point, target: Point, v_max: f64) -> Result<Point> {
    let u = unit(target - mu).ok_or(Error::ZeroDirection)?;
    Ok(mu + u * v_max)
}

/// Unit step direction along the error-field gradient at `mu`, or `None`
/// where the gradient vanishes.
pub fn gradient_direction(
    phi: &ScalarField,
    mu: Point,
    sign: GradientSign,
) -> Result<Option<Point>> {
    let g = phi.gradient_at(mu)?;
    if g.norm() < GRADIENT_EPS {
        return Ok(None);
    }
    let g = match sign {
        GradientSign::Descent => g * -1.0,
        GradientSign::Literal => g,
    };
    Ok(unit(g))
}

/// Full-speed step along the gradient direction; stands still on a flat field.
pub fn gradient_step(
    mu: Point,
    phi: &ScalarField,
    v_max: f64,
    sign: GradientSign,
) -> Result<Point> {
    Ok(match gradient_direction(phi, mu, sign)? {
        Some(u) => mu + u * v_max,
        None => mu,
    })
}

/// Blend weight `rho_k / (rho_k + rho_star)` at the agent position.
///
/// Returns 0 when both densities are negligible.
pub fn blend_r(rho_k: f64, rho_star: f64) -> Result<f64> {
    if !(rho_k >= 0.0 && rho_star >= 0.0) || !rho_k.is_finite() || !rho_star.is_finite() {
        return Err(Error::InvalidDensity(format!(
            "densities must be finite and non-negative (rho_k = {rho_k}, rho_star = {rho_star})"
        )));
    }
    if rho_k < DENSITY_EPS && rho_star < DENSITY_EPS {
        return Ok(0.0);
    }
    Ok(rho_k / (rho_k + rho_star))
}

/// Blended update `mu + v_max (r u_near + (1 - r) u_grad)`, clamped into the
/// domain.
///
/// Without a target the step is pure gradient. When the gradient vanishes but
/// a target exists, the step is pure nearest-point. A target equal to `mu`
/// contributes no nearest-point direction.
pub fn blended_step(
    mu: Point,
    target: Option<Point>,
    phi: &ScalarField,
    r: f64,
    v_max: f64,
    sign: GradientSign,
) -> Result<Point> {
    if !(0.0..=1.0).contains(&r) {
        return Err(Error::InvalidDensity(format!(
            "blend weight {r} outside [0, 1]"
        )));
    }
    let u_grad = gradient_direction(phi, mu, sign)?;
    let u_near = target.and_then(|g| unit(g - mu));
    let r = match (target, u_grad) {
        (None, _) => 0.0,
        (Some(_), None) => 1.0,
        _ => r,
    };
    let zero = Point::new(0.0, 0.0);
    let dir = u_near.unwrap_or(zero) * r + u_grad.unwrap_or(zero) * (1.0 - r);
    Ok(phi.spec().clamp(mu + dir * v_max))
}
