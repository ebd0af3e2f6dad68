use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Numerical tolerance policy shared by every operation.
///
/// `rank` and `psd` are relative to the operator norm of the matrix they are
/// applied to; the rest are absolute.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    pub herm: f64,
    pub rank: f64,
    pub gap: f64,
    pub psd: f64,
    /// Jacobi stops once the off-diagonal Frobenius norm drops below `eig * ‖A‖_F`.
    pub eig: f64,
    /// Allowed sup-norm jump between consecutive path slices, relative to the endpoint norms.
    pub path_factor: f64,
    /// Eigenvalues below `noise_floor * ‖A‖` are treated as exact zeros by the trace-limit oracle.
    pub noise_floor: f64,
    /// Minimum singular value accepted when projecting a seed frame into a projection field.
    pub frame_floor: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            herm: 1e-10,
            rank: 1e-6,
            gap: 1e-8,
            psd: 1e-9,
            eig: 1e-12,
            path_factor: 0.05,
            noise_floor: 1e-12,
            frame_floor: 1e-4,
        }
    }
}

impl Tolerances {
    /// Override a single tolerance by name, as used by `--tolerance name=value`.
    pub fn set(&mut self, name: &str, value: f64) -> Result<()> {
        if !(value.is_finite() && value > 0.0) {
            return Err(Error::invalid(format!("tolerance {name} must be positive, got {value}")));
        }
        let slot = match name {
            "herm" | "tol_herm" => &mut self.herm,
            "rank" | "tol_rank" => &mut self.rank,
            "gap" | "tol_gap" => &mut self.gap,
            "psd" | "tol_psd" => &mut self.psd,
            "eig" | "tol_eig" => &mut self.eig,
            "path_factor" | "path_tol" => &mut self.path_factor,
            "noise_floor" => &mut self.noise_floor,
            "frame_floor" => &mut self.frame_floor,
            _ => return Err(Error::invalid(format!("unknown tolerance {name}"))),
        };
        *slot = value;
        Ok(())
    }

    /// Parse `name=value`.
    pub fn apply_override(&mut self, setting: &str) -> Result<()> {
        let (name, value) = setting
            .split_once('=')
            .ok_or_else(|| Error::invalid(format!("expected name=value, got {setting}")))?;
        let value: f64 = value
            .trim()
            .parse()
            .map_err(|_| Error::invalid(format!("cannot parse tolerance value in {setting}")))?;
        self.set(name.trim(), value)
    }
}
