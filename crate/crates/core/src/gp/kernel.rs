use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SQRT_3: f64 = 1.732_050_807_568_877_2;
const SQRT_5: f64 = 2.236_067_977_499_79;

/// Smoothness of the Matérn covariance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaternOrder {
    /// ν = 1/2, the exponential kernel.
    Half,
    /// ν = 3/2.
    ThreeHalves,
    /// ν = 5/2.
    #[default]
    FiveHalves,
}

impl MaternOrder {
    /// Covariance at distance `r`; no input validation.
    #[inline]
    pub fn eval(self, r: f64, sigma_f2: f64, lengthscale: f64) -> f64 {
        let r = r.abs();
        match self {
            MaternOrder::Half => sigma_f2 * (-r / lengthscale).exp(),
            MaternOrder::ThreeHalves => {
                let z = SQRT_3 * r / lengthscale;
                sigma_f2 * (1.0 + z) * (-z).exp()
            }
            MaternOrder::FiveHalves => {
                let z = SQRT_5 * r / lengthscale;
                sigma_f2 * (1.0 + z + z * z / 3.0) * (-z).exp()
            }
        }
    }
}

/// Matérn-5/2 covariance σ_f²·(1 + √5 r/ℓ + 5r²/(3ℓ²))·exp(−√5 r/ℓ).
pub fn kernel_eval(r: f64, sigma_f2: f64, lengthscale: f64) -> Result<f64> {
    if !(r.is_finite() && sigma_f2.is_finite() && lengthscale.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "kernel arguments must be finite (r={r}, sigma_f2={sigma_f2}, lengthscale={lengthscale})"
        )));
    }
    if r < 0.0 || sigma_f2 <= 0.0 || lengthscale <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "kernel requires r >= 0 and positive variance/lengthscale (r={r}, sigma_f2={sigma_f2}, lengthscale={lengthscale})"
        )));
    }
    Ok(MaternOrder::FiveHalves.eval(r, sigma_f2, lengthscale))
}
