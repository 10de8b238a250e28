use crate::trace::TraceSequence;

use super::DataError;

/// Linear interpolation onto a uniform grid at `target_rate`.
///
/// The first sample is kept exactly; the output has
/// `round((len - 1) * target / source) + 1` samples.
pub fn resample_linear(trace: &TraceSequence, target_rate: f64) -> Result<TraceSequence, DataError> {
    if trace.len() < 2 {
        return Err(DataError::TooShort {
            what: "trace to resample",
            len: trace.len(),
        });
    }
    if !(target_rate > 0.0 && target_rate.is_finite()) {
        return Err(DataError::Invalid(format!("target rate {target_rate}")));
    }
    let src = trace.sample_rate;
    if src == target_rate {
        return Ok(trace.clone());
    }
    let last = trace.len() - 1;
    let out_len = (last as f64 * target_rate / src).round() as usize + 1;
    let ratio = src / target_rate;
    let v = &trace.values;
    let values = (0..out_len)
        .map(|i| {
            let pos = i as f64 * ratio;
            let lo = (pos.floor() as usize).min(last);
            let hi = (lo + 1).min(last);
            let frac = (pos - lo as f64).clamp(0.0, 1.0);
            if frac == 0.0 || lo == hi {
                v[lo]
            } else {
                v[lo] + (v[hi] - v[lo]) * frac
            }
        })
        .collect();
    Ok(TraceSequence {
        values,
        sample_rate: target_rate,
    })
}

/// Value of `v` (sampled at `rate`) at fractional time `t` seconds, linear
/// interpolation, held constant outside the sampled range.
pub(crate) fn interpolate_at(v: &[f64], rate: f64, t: f64) -> f64 {
    let pos = t * rate;
    if pos <= 0.0 {
        return v[0];
    }
    let last = v.len() - 1;
    if pos >= last as f64 {
        return v[last];
    }
    let lo = pos.floor() as usize;
    let frac = pos - lo as f64;
    v[lo] + (v[lo + 1] - v[lo]) * frac
}
