//! Frequency-to-physical-state conversion for FMCW radar cubes: fast-time
//! frequency to range, slow-time to radial velocity, spatial to azimuth.

use lse_core::tensor::FrequencyVector;

use crate::{HarnessError, Result};

/// Speed of light (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Waveform and array parameters of the radar.
#[derive(Debug, Clone)]
pub struct RadarParams {
    /// Carrier frequency f_c (Hz).
    pub f_c: f64,
    /// Chirp slope μ (Hz/s).
    pub mu: f64,
    /// Fast-time sampling interval T_s (s).
    pub t_s: f64,
    /// Pulse repetition interval T_r (s).
    pub t_r: f64,
    /// Antenna element spacing d (m).
    pub d: f64,
}

impl RadarParams {
    fn validate(&self) -> Result<()> {
        if [self.f_c, self.mu, self.t_s, self.t_r, self.d]
            .iter()
            .any(|&v| !(v > 0.0) || !v.is_finite())
        {
            return Err(HarnessError::Config(
                "radar parameters must be positive and finite".into(),
            ));
        }
        Ok(())
    }
}

/// Physical state of one detection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetState {
    /// Radial distance (m).
    pub range_m: f64,
    /// Radial velocity (m/s), negative toward the radar when the slow-time
    /// frequency is negative.
    pub velocity_mps: f64,
    /// Azimuth (rad).
    pub azimuth_rad: f64,
}

/// Folds a canonical `[0, 2π)` angle into `(−π, π]` for signed quantities.
fn signed_angle(omega: f64) -> f64 {
    if omega > std::f64::consts::PI {
        omega - 2.0 * std::f64::consts::PI
    } else {
        omega
    }
}

/// Inverts the fast-time/slow-time/spatial frequencies into range, radial
/// velocity and azimuth. The range frequency is treated as unsigned within
/// `[0, 2π)`; velocity and azimuth frequencies are folded into `(−π, π]`.
/// Missing trailing dimensions map to zero state components.
pub fn freq_to_state(freqs: &FrequencyVector<f64>, params: &RadarParams) -> Result<TargetState> {
    params.validate()?;
    let angles = freqs.angles();
    if angles.is_empty() || angles.len() > 3 {
        return Err(HarnessError::Config(format!(
            "expected 1 to 3 frequency components, got {}",
            angles.len()
        )));
    }
    let omega_x = angles[0];
    let range_m = SPEED_OF_LIGHT * omega_x / (4.0 * std::f64::consts::PI * params.mu * params.t_s);

    let velocity_mps = if angles.len() > 1 {
        let omega_y = signed_angle(angles[1]);
        SPEED_OF_LIGHT * omega_y / (4.0 * std::f64::consts::PI * params.f_c * params.t_r)
    } else {
        0.0
    };

    let azimuth_rad = if angles.len() > 2 {
        let omega_z = signed_angle(angles[2]);
        let arg =
            SPEED_OF_LIGHT * omega_z / (2.0 * std::f64::consts::PI * params.f_c * params.d);
        if arg.abs() > 1.0 {
            return Err(HarnessError::OutOfFieldOfView(format!(
                "spatial frequency maps to sin(theta) = {arg:.4}"
            )));
        }
        arg.asin()
    } else {
        0.0
    };

    Ok(TargetState {
        range_m,
        velocity_mps,
        azimuth_rad,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn params() -> RadarParams {
        // 77 GHz FMCW front end: 1798.92 MHz sweep over 60 us, 10 MHz
        // sampling, 160 us pulse interval, half-wavelength array
        RadarParams {
            f_c: 77.0e9,
            mu: 1798.92e6 / 60e-6,
            t_s: 1.0e-7,
            t_r: 160e-6,
            d: 0.5 * SPEED_OF_LIGHT / 77.0e9,
        }
    }

    #[test]
    fn zero_frequency_is_zero_state() {
        let s = freq_to_state(&FrequencyVector::new(vec![0.0, 0.0, 0.0]), &params()).unwrap();
        assert_eq!(s.range_m, 0.0);
        assert_eq!(s.velocity_mps, 0.0);
        assert_eq!(s.azimuth_rad, 0.0);
    }

    #[test]
    fn range_roundtrip_at_bench_distance() {
        let p = params();
        let r_true = 4.92;
        let omega_x = 4.0 * std::f64::consts::PI * p.mu * r_true * p.t_s / SPEED_OF_LIGHT;
        assert!(omega_x < 2.0 * std::f64::consts::PI);
        let s = freq_to_state(&FrequencyVector::new(vec![omega_x]), &p).unwrap();
        assert_abs_diff_eq!(s.range_m, r_true, epsilon = 1e-9);
    }

    #[test]
    fn negative_slow_time_frequency_is_approaching() {
        let p = params();
        let s = freq_to_state(&FrequencyVector::new(vec![0.5, -0.3, 0.0]), &p).unwrap();
        assert!(s.velocity_mps < 0.0);
        let s2 = freq_to_state(&FrequencyVector::new(vec![0.5, 0.3, 0.0]), &p).unwrap();
        assert_abs_diff_eq!(s.velocity_mps, -s2.velocity_mps, epsilon = 1e-12);
    }

    #[test]
    fn out_of_field_of_view_errors() {
        let mut p = params();
        p.d = p.d / 10.0; // tiny aperture: most angles unreachable
        let r = freq_to_state(&FrequencyVector::new(vec![0.5, 0.0, 3.0]), &p);
        assert!(matches!(r, Err(HarnessError::OutOfFieldOfView(_))));
    }

    #[test]
    fn rejects_nonpositive_params() {
        let mut p = params();
        p.mu = 0.0;
        assert!(freq_to_state(&FrequencyVector::new(vec![0.5]), &p).is_err());
    }
}
