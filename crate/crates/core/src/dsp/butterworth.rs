use std::f64::consts::PI;

use rustfft::num_complex::Complex64;

use super::BandSpec;
use crate::error::{Error, Result};

/// One second-order section, `a0` normalized to 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

impl Biquad {
    fn response(&self, z_inv: Complex64) -> Complex64 {
        let num = self.b[0] + z_inv * (self.b[1] + z_inv * self.b[2]);
        let den = 1.0 + z_inv * (self.a[0] + z_inv * self.a[1]);
        num / den
    }

    fn dc_gain(&self) -> f64 {
        (self.b[0] + self.b[1] + self.b[2]) / (1.0 + self.a[0] + self.a[1])
    }

    /// Steady-state transposed direct-form II state for a unit step input.
    fn step_state(&self) -> [f64; 2] {
        let [b0, b1, b2] = self.b;
        let [a1, a2] = self.a;
        // (I - A) zi = B with A the transposed companion matrix
        let rhs = [b1 - a1 * b0, b2 - a2 * b0];
        let det = (1.0 + a1) + a2;
        let z0 = (rhs[0] + rhs[1]) / det;
        let z1 = rhs[1] - a2 * z0;
        [z0, z1]
    }

    fn run(&self, x: &mut [f64], state: [f64; 2]) {
        let [b0, b1, b2] = self.b;
        let [a1, a2] = self.a;
        let [mut z0, mut z1] = state;
        for v in x.iter_mut() {
            let input = *v;
            let y = b0 * input + z0;
            z0 = b1 * input - a1 * y + z1;
            z1 = b2 * input - a2 * y;
            *v = y;
        }
    }
}

/// Digital Butterworth band-pass as a cascade of biquads.
#[derive(Debug, Clone, PartialEq)]
pub struct ButterworthBandpass {
    pub sections: Vec<Biquad>,
}

impl ButterworthBandpass {
    /// Designs the filter via analog prototype, low-pass to band-pass transform
    /// and a pre-warped bilinear transform. Gain is normalized to 1 at the
    /// band centre.
    pub fn design(band: &BandSpec, fps: f64) -> Result<Self> {
        band.validate(fps)?;
        let n = band.order / 2;
        let warp = |f: f64| 2.0 * fps * (PI * f / fps).tan();
        let w_lo = warp(band.low);
        let w_hi = warp(band.high);
        let bw = w_hi - w_lo;
        let w0_sq = w_lo * w_hi;
        let k2 = 2.0 * fps;

        let mut sections = Vec::with_capacity(n);
        for k in 1..=n {
            let theta = PI * (2 * k + n - 1) as f64 / (2 * n) as f64;
            let proto = Complex64::from_polar(1.0, theta);
            if proto.im < 1e-12 {
                continue;
            }
            // each prototype pole p maps to the roots of s^2 - p*bw*s + w0^2
            let pb = proto * bw;
            let disc = (pb * pb - 4.0 * w0_sq).sqrt();
            for s in [(pb + disc) / 2.0, (pb - disc) / 2.0] {
                let z = (k2 + s) / (k2 - s);
                sections.push(Biquad {
                    b: [1.0, 0.0, -1.0],
                    a: [-2.0 * z.re, z.norm_sqr()],
                });
            }
        }
        if n % 2 == 1 {
            // real prototype pole at -1
            let pb = Complex64::new(-bw, 0.0);
            let disc = (pb * pb - 4.0 * w0_sq).sqrt();
            let s1 = (pb + disc) / 2.0;
            let s2 = (pb - disc) / 2.0;
            let z1 = (k2 + s1) / (k2 - s1);
            let z2 = (k2 + s2) / (k2 - s2);
            let sum = z1 + z2;
            let prod = z1 * z2;
            sections.push(Biquad {
                b: [1.0, 0.0, -1.0],
                a: [-sum.re, prod.re],
            });
        }

        let mut filter = ButterworthBandpass { sections };
        let centre_analog = w0_sq.sqrt();
        let centre = fps / PI * (centre_analog / k2).atan();
        let gain = filter.gain_at(centre, fps);
        let scale = gain.recip().powf(1.0 / filter.sections.len() as f64);
        for sec in &mut filter.sections {
            for b in &mut sec.b {
                *b *= scale;
            }
        }
        Ok(filter)
    }

    /// Magnitude response of a single forward pass at `freq` Hz.
    pub fn gain_at(&self, freq: f64, fps: f64) -> f64 {
        let z_inv = Complex64::from_polar(1.0, -2.0 * PI * freq / fps);
        self.sections
            .iter()
            .map(|s| s.response(z_inv))
            .fold(Complex64::new(1.0, 0.0), |acc, h| acc * h)
            .norm()
    }

    fn pad_len(&self) -> usize {
        3 * (2 * self.sections.len() + 1)
    }

    /// Causal filtering with states initialized for a step of height `x[0]`.
    fn filter_from_steady_state(&self, x: &mut [f64]) {
        let Some(&x0) = x.first() else { return };
        let mut carried = 1.0;
        for sec in &self.sections {
            let zi = sec.step_state();
            let level = x0 * carried;
            sec.run(x, [zi[0] * level, zi[1] * level]);
            carried *= sec.dc_gain();
        }
    }

    /// Zero-phase forward-backward filtering with odd-extension padding.
    pub fn filtfilt(&self, signal: &[f64]) -> Vec<f64> {
        let n = signal.len();
        if n < 2 {
            return vec![0.0; n];
        }
        let pad = self.pad_len().min(n - 1);
        let first = signal[0];
        let last = signal[n - 1];
        let mut ext = Vec::with_capacity(n + 2 * pad);
        ext.extend((1..=pad).rev().map(|i| 2.0 * first - signal[i]));
        ext.extend_from_slice(signal);
        ext.extend((1..=pad).map(|i| 2.0 * last - signal[n - 1 - i]));

        self.filter_from_steady_state(&mut ext);
        ext.reverse();
        self.filter_from_steady_state(&mut ext);
        ext.reverse();
        ext[pad..pad + n].to_vec()
    }
}

/// Zero-phase Butterworth band-pass of one series.
pub fn bandpass(signal: &[f64], fps: f64, band: &BandSpec) -> Result<Vec<f64>> {
    let filter = ButterworthBandpass::design(band, fps)?;
    if signal.len() <= 3 * band.order {
        return Err(Error::TooShort(format!(
            "band-pass needs more than {} samples, got {}",
            3 * band.order,
            signal.len()
        )));
    }
    Ok(filter.filtfilt(signal))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tone(freq: f64, fps: f64, secs: f64) -> Vec<f64> {
        let n = (fps * secs) as usize;
        (0..n)
            .map(|i| (2.0 * PI * freq * i as f64 / fps).sin())
            .collect()
    }

    // least-squares fit of a*sin + b*cos on the middle half of the record
    fn fitted_amplitude(y: &[f64], freq: f64, fps: f64) -> f64 {
        let (lo, hi) = (y.len() / 4, 3 * y.len() / 4);
        let (mut ss, mut cc, mut sc, mut ys, mut yc) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (i, &v) in y.iter().enumerate().take(hi).skip(lo) {
            let ph = 2.0 * PI * freq * i as f64 / fps;
            let (s, c) = ph.sin_cos();
            ss += s * s;
            cc += c * c;
            sc += s * c;
            ys += v * s;
            yc += v * c;
        }
        let det = ss * cc - sc * sc;
        let a = (ys * cc - yc * sc) / det;
        let b = (yc * ss - ys * sc) / det;
        a.hypot(b)
    }

    #[test]
    fn unit_gain_at_band_centre() {
        let band = BandSpec::default();
        let f = ButterworthBandpass::design(&band, 30.0).unwrap();
        assert_eq!(f.sections.len(), 2);
        let centre = (0.75f64 * 2.5).sqrt();
        // centre is close to but not exactly the digital peak; gain stays ~1
        assert!((f.gain_at(centre, 30.0) - 1.0).abs() < 1e-3);
        // half-power at the (pre-warped) edges
        assert!((f.gain_at(0.75, 30.0) - 0.5f64.sqrt()).abs() < 1e-9);
        assert!((f.gain_at(2.5, 30.0) - 0.5f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn passband_tone_keeps_amplitude() {
        let x = tone(1.5, 30.0, 30.0);
        let y = bandpass(&x, 30.0, &BandSpec::default()).unwrap();
        let amp = fitted_amplitude(&y, 1.5, 30.0);
        assert!((0.9..=1.0).contains(&amp), "amp {amp}");
    }

    #[test]
    fn low_tone_attenuated_beyond_20db() {
        let x = tone(0.2, 30.0, 30.0);
        let y = bandpass(&x, 30.0, &BandSpec::default()).unwrap();
        let amp = fitted_amplitude(&y, 0.2, 30.0);
        assert!(20.0 * amp.log10() < -20.0, "amp {amp}");
    }

    #[test]
    fn rejects_dc() {
        let y = bandpass(&[3.7; 300], 30.0, &BandSpec::default()).unwrap();
        assert!(y.iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn nyquist_violation() {
        let err = bandpass(&[0.0; 100], 4.0, &BandSpec::default()).unwrap_err();
        assert!(matches!(err, Error::Nyquist { .. }));
    }

    #[test]
    fn odd_prototype_order_designs() {
        let band = BandSpec {
            order: 6,
            ..BandSpec::default()
        };
        let f = ButterworthBandpass::design(&band, 30.0).unwrap();
        assert_eq!(f.sections.len(), 3);
        assert!((f.gain_at(0.75, 30.0) - 0.5f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn output_length_matches() {
        let x = tone(1.0, 30.0, 1.0);
        assert_eq!(bandpass(&x, 30.0, &BandSpec::default()).unwrap().len(), 30);
        assert!(bandpass(&x[..12], 30.0, &BandSpec::default()).is_err());
    }
}
