use crate::{Error, Result};

/// Arithmetic mean, computed relative to the first element so that constant
/// inputs come back exactly.
pub fn mean(values: &[f64]) -> Result<f64> {
    let first = *values
        .first()
        .ok_or_else(|| Error::Domain("mean of an empty list".into()))?;
    let shift: f64 = values.iter().map(|v| v - first).sum();
    Ok(first + shift / values.len() as f64)
}

/// Mean and Bessel-corrected variance.
pub fn sample_stats(values: &[f64]) -> Result<(f64, f64)> {
    if values.len() < 2 {
        return Err(Error::Domain(format!(
            "variance needs at least 2 values, got {}",
            values.len()
        )));
    }
    let m = mean(values)?;
    let ss: f64 = values.iter().map(|v| (v - m) * (v - m)).sum();
    Ok((m, ss / (values.len() - 1) as f64))
}

/// Modified Overlapped Area: `mean(oa) - coef · std(oa)`.
pub fn moa(per_d_oa: &[f64], coef: f64) -> Result<f64> {
    match per_d_oa.len() {
        0 => Err(Error::Domain("MOA of an empty list".into())),
        1 => Ok(per_d_oa[0]),
        _ => {
            let (m, var) = sample_stats(per_d_oa)?;
            Ok(m - coef * var.sqrt())
        }
    }
}

/// `|ideal - generated| / |ideal| × 100`.
pub fn percent_error(ideal: f64, generated: f64) -> Result<f64> {
    if ideal == 0.0 {
        return Err(Error::Domain("percent error is undefined for an ideal value of 0".into()));
    }
    Ok(((ideal - generated) / ideal).abs() * 100.0)
}

/// Weighted percent error, variance weighted 0.7 against 0.3 for the mean.
pub fn scaled_pe(pe_mean_avg: f64, pe_var_avg: f64) -> f64 {
    (pe_mean_avg * 0.3 + pe_var_avg * 0.7) / 2.0
}
