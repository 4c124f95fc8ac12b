//! Analytic band-pass wavelet kernels evaluated at continuous frequencies.
//!
//! Both kernels are 1 on the interior of their support (disk B(0, 1/2) or
//! square [-1/2, 1/2]^2), fall to 0 across a cosine transition band of
//! width 2*tau, and vanish beyond the enlarged support.

use serde::{Deserialize, Serialize};

use crate::error::{EwtError, Result};

/// Kernel support shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    Disk,
    Square,
}

impl std::str::FromStr for KernelKind {
    type Err = EwtError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "disk" => Ok(KernelKind::Disk),
            "square" => Ok(KernelKind::Square),
            other => Err(EwtError::InvalidParameter(format!(
                "unknown kernel kind '{other}' (expected disk or square)"
            ))),
        }
    }
}

/// Band-pass kernel descriptor: shape and transition width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub kind: KernelKind,
    pub tau: f64,
}

impl KernelSpec {
    pub fn new(kind: KernelKind, tau: f64) -> Result<Self> {
        check_tau(tau)?;
        Ok(Self { kind, tau })
    }

    /// Kernel value at a 2D frequency in kernel units.
    pub fn eval(&self, xi: (f64, f64)) -> f64 {
        match self.kind {
            KernelKind::Disk => psi_disk(xi, self.tau).expect("tau validated at construction"),
            KernelKind::Square => psi_square(xi, self.tau).expect("tau validated at construction"),
        }
    }

    /// Radius of the enlarged support along each axis: the kernel is
    /// exactly zero whenever either |coordinate| (square) or the norm
    /// (disk) exceeds 1/2 + tau.
    pub fn outer_radius(&self) -> f64 {
        0.5 + self.tau
    }
}

fn check_tau(tau: f64) -> Result<()> {
    if !(tau > 0.0 && tau < 0.5) {
        return Err(EwtError::InvalidParameter(format!(
            "transition width tau must lie in (0, 0.5), got {tau}"
        )));
    }
    Ok(())
}

/// Degree-7 transition polynomial: beta(0) = 0, beta(1) = 1 and
/// beta(x) + beta(1 - x) = 1.
pub fn beta(x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(EwtError::InvalidParameter(format!(
            "beta argument must lie in [0, 1], got {x}"
        )));
    }
    Ok(x.powi(4) * (35.0 - 84.0 * x + 70.0 * x * x - 20.0 * x * x * x))
}

fn radial_profile(r: f64, tau: f64) -> f64 {
    debug_assert!(r >= 0.0);
    if r < 0.5 - tau {
        1.0
    } else if r <= 0.5 + tau {
        // The quotient can round marginally outside [0, 1] at the band
        // edges; clamp before the domain-checked transition polynomial.
        let a = ((tau - 0.5 + r) / (2.0 * tau)).clamp(0.0, 1.0);
        let b = beta(a).expect("argument clamped to [0,1]");
        // cos can round to ~-1e-16 just below the outer edge; the profile
        // is non-negative by definition.
        (std::f64::consts::FRAC_PI_2 * b).cos().max(0.0)
    } else {
        0.0
    }
}

/// 1D band-pass wavelet, mostly supported by [-1/2, 1/2].
pub fn psi_1d(xi: f64, tau: f64) -> Result<f64> {
    check_tau(tau)?;
    Ok(radial_profile(xi.abs(), tau))
}

/// Disk band-pass wavelet: the 1D profile applied to the Euclidean norm.
pub fn psi_disk(xi: (f64, f64), tau: f64) -> Result<f64> {
    check_tau(tau)?;
    Ok(radial_profile((xi.0 * xi.0 + xi.1 * xi.1).sqrt(), tau))
}

/// Square band-pass wavelet: separable product of 1D profiles.
pub fn psi_square(xi: (f64, f64), tau: f64) -> Result<f64> {
    check_tau(tau)?;
    Ok(radial_profile(xi.0.abs(), tau) * radial_profile(xi.1.abs(), tau))
}
