use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};

/// `Q` with `P[χ²_dof ≤ Q] = p`.
pub fn chi2_quantile(dof: usize, p: f64) -> Result<f64> {
    if dof == 0 {
        return Err(Error::invalid("chi-square degrees of freedom must be positive"));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::invalid(format!("quantile level {p} outside (0, 1)")));
    }
    let dist = ChiSquared::new(dof as f64).map_err(|e| Error::invalid(e.to_string()))?;
    Ok(dist.inverse_cdf(p))
}
