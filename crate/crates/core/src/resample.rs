//! Windowed-sinc polyphase resampler.
//!
//! The kernel is a Kaiser-windowed sinc with [`HALF_ZERO_CROSSINGS`] zero
//! crossings on each side of the centre (measured at the filter cutoff) and
//! a cutoff of [`ROLLOFF`] times the lower of the two Nyquist frequencies.
//! Rates are reduced to `up / down` by their gcd and one filter phase is
//! precomputed per distinct output phase.

use serde::Serialize;

pub const HALF_ZERO_CROSSINGS: usize = 32;
pub const ROLLOFF: f64 = 0.945;
pub const KAISER_BETA: f64 = 8.6;

/// Resampler parameters as recorded in run manifests.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResamplerSpec {
    pub kind: &'static str,
    pub half_zero_crossings: usize,
    pub rolloff: f64,
    pub kaiser_beta: f64,
}

pub const RESAMPLER_SPEC: ResamplerSpec = ResamplerSpec {
    kind: "kaiser-windowed-sinc-polyphase",
    half_zero_crossings: HALF_ZERO_CROSSINGS,
    rolloff: ROLLOFF,
    kaiser_beta: KAISER_BETA,
};

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// Zeroth-order modified Bessel function of the first kind (power series).
fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let q = x * x / 4.0;
    for k in 1..200 {
        term *= q / (k as f64 * k as f64);
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}

#[derive(Debug, Clone)]
pub struct Resampler {
    from_hz: u32,
    to_hz: u32,
    up: u64,
    down: u64,
    half_taps: usize,
    /// `phases[p][j]` weights input sample `base - half_taps + 1 + j`.
    phases: Vec<Vec<f64>>,
}

impl Resampler {
    pub fn new(from_hz: u32, to_hz: u32) -> Self {
        assert!(from_hz > 0 && to_hz > 0, "sample rates must be positive");
        let g = gcd(from_hz as u64, to_hz as u64);
        let up = to_hz as u64 / g;
        let down = from_hz as u64 / g;
        if up == down {
            return Resampler {
                from_hz,
                to_hz,
                up,
                down,
                half_taps: 0,
                phases: Vec::new(),
            };
        }
        // cutoff in cycles per input sample, relative to input Nyquist
        let cutoff = ROLLOFF * (up as f64 / down as f64).min(1.0);
        let half_taps = (HALF_ZERO_CROSSINGS as f64 / cutoff).ceil() as usize;
        let norm = bessel_i0(KAISER_BETA);
        let span = half_taps as f64;
        let phases = (0..up)
            .map(|p| {
                let frac = p as f64 / up as f64;
                (0..2 * half_taps)
                    .map(|j| {
                        let offset = j as isize - half_taps as isize + 1;
                        let d = frac - offset as f64;
                        let r = d / span;
                        if r.abs() >= 1.0 {
                            0.0
                        } else {
                            let w = bessel_i0(KAISER_BETA * (1.0 - r * r).sqrt()) / norm;
                            cutoff * sinc(cutoff * d) * w
                        }
                    })
                    .collect()
            })
            .collect();
        Resampler {
            from_hz,
            to_hz,
            up,
            down,
            half_taps,
            phases,
        }
    }

    pub fn from_hz(&self) -> u32 {
        self.from_hz
    }

    pub fn to_hz(&self) -> u32 {
        self.to_hz
    }

    pub fn is_identity(&self) -> bool {
        self.up == self.down
    }

    /// Number of output samples produced for `n` input samples: `ceil(n * up / down)`.
    pub fn output_len(&self, n: usize) -> usize {
        ((n as u64 * self.up).div_ceil(self.down)) as usize
    }

    pub fn process(&self, input: &[f64]) -> Vec<f64> {
        if self.is_identity() {
            return input.to_vec();
        }
        let n_out = self.output_len(input.len());
        let len = input.len() as isize;
        let mut out = Vec::with_capacity(n_out);
        for n in 0..n_out as u64 {
            let pos = n * self.down;
            let base = (pos / self.up) as isize;
            let phase = &self.phases[(pos % self.up) as usize];
            let first = base - self.half_taps as isize + 1;
            let mut acc = 0.0;
            for (j, &w) in phase.iter().enumerate() {
                let idx = first + j as isize;
                if idx >= 0 && idx < len {
                    acc += w * input[idx as usize];
                }
            }
            out.push(acc);
        }
        out
    }
}
