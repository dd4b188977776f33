//! Sonar/leaf beampatterns, echo spectrum assembly, and impulse synthesis.
//!
//! Each in-band FFT bin `k` receives the superposition of every facet echo,
//! `y_k = sum_i A_ki (cos phi_ki + j sin phi_ki)`, with
//! `A_ki = S(az_i, el_i) * L(beta_i, a_i, f_k) * lambda_k / (2 pi r_i^2)`,
//! `lambda_k = v / f_k` and the round-trip delay phase `phi_ki = -2 pi f_k 2 r_i / v`.
//! Mirror bins hold the conjugates so the inverse transform is real.

use crate::num::Real;
use crate::scene::FacetObservation;
use num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AcousticsError {
    #[error("invalid acoustic config `{field}`: {reason}")]
    InvalidConfig {
        field: &'static str,
        reason: &'static str,
    },
    #[error("invalid beampattern: {0}")]
    InvalidBeampattern(&'static str),
    #[error("facet range must be positive, got {0}")]
    NonPositiveRange(f64),
    #[error("spectrum is not Hermitian at bin {bin}")]
    NotHermitian { bin: usize },
    #[error("spectrum has {got} bins, config expects {expected}")]
    LengthMismatch { expected: usize, got: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "T: Real")]
pub struct AcousticConfig<T> {
    /// Lower band edge, Hz.
    #[serde(default = "defaults::f_lo")]
    pub f_lo: T,
    /// Upper band edge, Hz.
    #[serde(default = "defaults::f_hi")]
    pub f_hi: T,
    /// Speed of sound, m/s.
    #[serde(default = "defaults::speed_of_sound")]
    pub speed_of_sound: T,
    /// Sample rate, Hz.
    #[serde(default = "defaults::sample_rate")]
    pub sample_rate: T,
    /// Signal length in samples; a power of two.
    #[serde(default = "defaults::n_samples")]
    pub n_samples: usize,
    /// Sonar amplitude `A1`.
    #[serde(default = "defaults::sonar_amplitude")]
    pub sonar_amplitude: T,
}

mod defaults {
    use crate::num::Real;
    pub fn f_lo<T: Real>() -> T {
        T::lit(60_000.0)
    }
    pub fn f_hi<T: Real>() -> T {
        T::lit(80_000.0)
    }
    pub fn speed_of_sound<T: Real>() -> T {
        T::lit(343.0)
    }
    pub fn sample_rate<T: Real>() -> T {
        T::lit(400_000.0)
    }
    pub fn n_samples() -> usize {
        16_384
    }
    pub fn sonar_amplitude<T: Real>() -> T {
        T::one()
    }
}

impl<T: Real> Default for AcousticConfig<T> {
    fn default() -> Self {
        Self {
            f_lo: defaults::f_lo(),
            f_hi: defaults::f_hi(),
            speed_of_sound: defaults::speed_of_sound(),
            sample_rate: defaults::sample_rate(),
            n_samples: defaults::n_samples(),
            sonar_amplitude: defaults::sonar_amplitude(),
        }
    }
}

impl<T: Real> AcousticConfig<T> {
    pub fn validate(&self) -> Result<(), AcousticsError> {
        let bad = |field, reason| Err(AcousticsError::InvalidConfig { field, reason });
        if !(self.sample_rate > T::zero() && self.sample_rate.is_finite()) {
            return bad("sample_rate", "must be positive and finite");
        }
        if !(self.f_lo > T::zero()) {
            return bad("f_lo", "must be positive");
        }
        if !(self.f_hi > self.f_lo) {
            return bad("f_hi", "must exceed f_lo");
        }
        if !(self.f_hi < self.sample_rate / T::lit(2.0)) {
            return bad("f_hi", "must be below the Nyquist frequency");
        }
        if !self.n_samples.is_power_of_two() || self.n_samples < 2 {
            return bad("n_samples", "must be a power of two >= 2");
        }
        if !(self.speed_of_sound > T::zero() && self.speed_of_sound.is_finite()) {
            return bad("speed_of_sound", "must be positive and finite");
        }
        if !(self.sonar_amplitude > T::zero() && self.sonar_amplitude.is_finite()) {
            return bad("sonar_amplitude", "must be positive and finite");
        }
        Ok(())
    }

    /// Frequency of FFT bin `k`: `k * fs / n`.
    pub fn bin_frequency(&self, k: usize) -> T {
        T::from_usize_lossy(k) * self.sample_rate / T::from_usize_lossy(self.n_samples)
    }

    /// Bins with `f_lo <= f_k <= f_hi`, all below Nyquist.
    pub fn band_bins(&self) -> impl Iterator<Item = usize> + '_ {
        (1..self.n_samples / 2).filter(move |&k| {
            let f = self.bin_frequency(k);
            f >= self.f_lo && f <= self.f_hi
        })
    }

    /// Longest one-way range whose echo fits in the signal window, meters.
    pub fn max_unaliased_range(&self) -> T {
        T::from_usize_lossy(self.n_samples) / self.sample_rate * self.speed_of_sound / T::lit(2.0)
    }
}

/// Gaussian sonar beampattern over `(az, el)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SonarBeampatternParams<T> {
    pub a: T,
    pub b: T,
    pub c: T,
    pub x0: T,
    pub y0: T,
    pub amplitude: T,
}

impl<T: Real> SonarBeampatternParams<T> {
    /// Circular pattern centred on boresight whose gain halves at `beamwidth / 2`:
    /// `b = 0`, `a = c = 4 ln 2 / BW^2`.
    pub fn from_beamwidth(beamwidth_rad: T, amplitude: T) -> Self {
        let a = T::lit(4.0) * T::LN_2() / (beamwidth_rad * beamwidth_rad);
        Self {
            a,
            b: T::zero(),
            c: a,
            x0: T::zero(),
            y0: T::zero(),
            amplitude,
        }
    }

    pub fn validate(&self) -> Result<(), AcousticsError> {
        if !(self.a > T::zero()
            && self.c > T::zero()
            && self.a * self.c - self.b * self.b > T::zero())
        {
            return Err(AcousticsError::InvalidBeampattern(
                "quadratic form must be positive definite",
            ));
        }
        if !(self.amplitude > T::zero()) {
            return Err(AcousticsError::InvalidBeampattern(
                "amplitude must be positive",
            ));
        }
        Ok(())
    }
}

pub fn sonar_beampattern<T: Real>(az: T, el: T, p: &SonarBeampatternParams<T>) -> T {
    let dx = az - p.x0;
    let dy = el - p.y0;
    let q = p.a * dx * dx + T::lit(2.0) * p.b * dx * dy + p.c * dy * dy;
    p.amplitude * (-q).exp()
}

/// A leaf-pattern coefficient as a function of `c = 2 pi a f / v`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged, bound = "T: Real")]
pub enum Coefficient<T> {
    Constant(T),
    /// `(c, value)` knots, increasing in `c`; linear between knots, clamped outside.
    Table(Vec<[T; 2]>),
}

impl<T: Real> Coefficient<T> {
    pub fn eval(&self, c: T) -> T {
        match self {
            Coefficient::Constant(v) => *v,
            Coefficient::Table(knots) => {
                let first = knots[0];
                let last = knots[knots.len() - 1];
                if c <= first[0] {
                    return first[1];
                }
                if c >= last[0] {
                    return last[1];
                }
                let j = knots.partition_point(|k| k[0] <= c);
                let (k0, k1) = (knots[j - 1], knots[j]);
                k0[1] + (k1[1] - k0[1]) * (c - k0[0]) / (k1[0] - k0[0])
            }
        }
    }

    fn validate(&self, name: &'static str) -> Result<(), AcousticsError> {
        let ok = match self {
            Coefficient::Constant(v) => *v > T::zero() && v.is_finite(),
            Coefficient::Table(knots) => {
                !knots.is_empty()
                    && knots
                        .iter()
                        .all(|k| k[1] > T::zero() && k[0].is_finite() && k[1].is_finite())
                    && knots.windows(2).all(|w| w[0][0] < w[1][0])
            }
        };
        if ok {
            Ok(())
        } else {
            Err(AcousticsError::InvalidBeampattern(name))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "T: Real")]
pub struct LeafBeampatternParams<T> {
    /// Amplitude scale `A(c)`.
    #[serde(rename = "A")]
    pub amplitude: Coefficient<T>,
    /// Lobe-width scale `B(c)`.
    #[serde(rename = "B")]
    pub width: Coefficient<T>,
}

impl<T: Real> Default for LeafBeampatternParams<T> {
    fn default() -> Self {
        Self {
            amplitude: Coefficient::Constant(T::one()),
            width: Coefficient::Constant(T::one()),
        }
    }
}

impl<T: Real> LeafBeampatternParams<T> {
    pub fn validate(&self) -> Result<(), AcousticsError> {
        self.amplitude
            .validate("leaf A(c) must be positive with increasing knots")?;
        self.width
            .validate("leaf B(c) must be positive with increasing knots")
    }
}

/// `max(0, A c cos(B c beta))`, zero from the first null of the cosine onward.
pub fn leaf_beampattern<T: Real>(
    beta: T,
    radius: T,
    frequency: T,
    params: &LeafBeampatternParams<T>,
    speed_of_sound: T,
) -> T {
    let c = T::TAU() * radius * frequency / speed_of_sound;
    let arg = params.width.eval(c) * c * beta;
    if arg >= T::FRAC_PI_2() {
        return T::zero();
    }
    (params.amplitude.eval(c) * c * arg.cos()).max(T::zero())
}

/// Echo amplitude law for given pattern gains: `S * L * (v / f) / (2 pi r^2)`.
pub fn echo_amplitude<T: Real>(
    sonar_gain: T,
    leaf_gain: T,
    frequency: T,
    range: T,
    speed_of_sound: T,
) -> T {
    let wavelength = speed_of_sound / frequency;
    sonar_gain * leaf_gain * wavelength / (T::TAU() * range * range)
}

pub fn facet_amplitude<T: Real>(
    obs: &FacetObservation<T>,
    frequency: T,
    cfg: &AcousticConfig<T>,
    sonar: &SonarBeampatternParams<T>,
    leaf: &LeafBeampatternParams<T>,
) -> Result<T, AcousticsError> {
    if !(obs.range > T::zero()) {
        return Err(AcousticsError::NonPositiveRange(obs.range.as_f64()));
    }
    let s = sonar_beampattern(obs.azimuth, obs.elevation, sonar);
    let l = leaf_beampattern(
        obs.incidence,
        obs.radius,
        frequency,
        leaf,
        cfg.speed_of_sound,
    );
    Ok(echo_amplitude(
        s,
        l,
        frequency,
        obs.range,
        cfg.speed_of_sound,
    ))
}

/// Round-trip delay phase `-2 pi f (2 r / v)`.
pub fn facet_phase<T: Real>(obs: &FacetObservation<T>, frequency: T, cfg: &AcousticConfig<T>) -> T {
    delay_phase(obs.range, frequency, cfg.speed_of_sound)
}

fn delay_phase<T: Real>(range: T, frequency: T, speed_of_sound: T) -> T {
    -T::TAU() * frequency * (T::lit(2.0) * range / speed_of_sound)
}

/// Complex spectrum on the FFT grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum<T> {
    pub coeffs: Vec<Complex<T>>,
}

impl<T: Real> Spectrum<T> {
    pub fn zeros(n: usize) -> Self {
        Self {
            coeffs: vec![Complex::new(T::zero(), T::zero()); n],
        }
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn add(&self, other: &Self) -> Self {
        Self {
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    fn peak(&self) -> T {
        self.coeffs.iter().map(|c| c.norm()).fold(T::zero(), T::max)
    }

    /// First bin violating `y_{n-k} = conj(y_k)` beyond `rel_tol * peak`.
    pub fn hermitian_violation(&self, rel_tol: T) -> Option<usize> {
        let n = self.coeffs.len();
        let tol = rel_tol * self.peak();
        if self.coeffs.first().is_some_and(|c| c.im.abs() > tol) {
            return Some(0);
        }
        (1..=n / 2).find(|&k| (self.coeffs[n - k] - self.coeffs[k].conj()).norm() > tol)
    }
}

/// Superposes the echoes of `observations` on the in-band bins of `cfg`.
pub fn assemble_spectrum<T: Real>(
    observations: &[FacetObservation<T>],
    cfg: &AcousticConfig<T>,
    sonar: &SonarBeampatternParams<T>,
    leaf: &LeafBeampatternParams<T>,
) -> Spectrum<T> {
    let n = cfg.n_samples;
    let mut spectrum = Spectrum::zeros(n);
    let v = cfg.speed_of_sound;
    let gains: Vec<T> = observations
        .iter()
        .map(|o| sonar_beampattern(o.azimuth, o.elevation, sonar))
        .collect();
    for k in cfg.band_bins() {
        let f = cfg.bin_frequency(k);
        let mut re = T::zero();
        let mut im = T::zero();
        for (o, &s) in observations.iter().zip(&gains) {
            let l = leaf_beampattern(o.incidence, o.radius, f, leaf, v);
            let amp = echo_amplitude(s, l, f, o.range, v);
            let (sin, cos) = delay_phase(o.range, f, v).sin_cos();
            re = re + amp * cos;
            im = im + amp * sin;
        }
        spectrum.coeffs[k] = Complex::new(re, im);
        spectrum.coeffs[n - k] = Complex::new(re, -im);
    }
    spectrum
}

/// Real time-domain echo; sample 0 is the emission instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpulseResponse<T> {
    pub samples: Vec<T>,
    pub sample_rate: T,
}

impl<T: Real> ImpulseResponse<T> {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn time(&self, i: usize) -> T {
        T::from_usize_lossy(i) / self.sample_rate
    }

    /// Index and value of the largest-magnitude sample.
    pub fn peak(&self) -> Option<(usize, T)> {
        self.samples
            .iter()
            .copied()
            .enumerate()
            .fold(None, |best: Option<(usize, T)>, (i, x)| match best {
                Some((_, b)) if x.abs() <= b.abs() => best,
                _ => Some((i, x)),
            })
    }

    pub fn is_silent(&self) -> bool {
        self.samples.iter().all(|x| *x == T::zero())
    }
}

/// Inverse transform with a cached FFT plan for one signal length.
pub struct Synthesizer<T: Real> {
    n: usize,
    sample_rate: T,
    inverse: Arc<dyn Fft<T>>,
    forward: Arc<dyn Fft<T>>,
}

impl<T: Real> Synthesizer<T> {
    pub fn new(cfg: &AcousticConfig<T>) -> Result<Self, AcousticsError> {
        cfg.validate()?;
        let mut planner = FftPlanner::new();
        Ok(Self {
            n: cfg.n_samples,
            sample_rate: cfg.sample_rate,
            inverse: planner.plan_fft_inverse(cfg.n_samples),
            forward: planner.plan_fft_forward(cfg.n_samples),
        })
    }

    /// Normalised inverse DFT, `x_t = (1/n) sum_k y_k e^{+j 2 pi k t / n}`.
    pub fn inverse_complex(
        &self,
        spectrum: &Spectrum<T>,
    ) -> Result<Vec<Complex<T>>, AcousticsError> {
        if spectrum.len() != self.n {
            return Err(AcousticsError::LengthMismatch {
                expected: self.n,
                got: spectrum.len(),
            });
        }
        let mut buf = spectrum.coeffs.clone();
        self.inverse.process(&mut buf);
        let scale = T::one() / T::from_usize_lossy(self.n);
        for x in &mut buf {
            *x = *x * scale;
        }
        Ok(buf)
    }

    pub fn synthesize(&self, spectrum: &Spectrum<T>) -> Result<ImpulseResponse<T>, AcousticsError> {
        if spectrum.len() != self.n {
            return Err(AcousticsError::LengthMismatch {
                expected: self.n,
                got: spectrum.len(),
            });
        }
        if let Some(bin) = spectrum.hermitian_violation(T::lit(1e-12)) {
            return Err(AcousticsError::NotHermitian { bin });
        }
        let samples = self
            .inverse_complex(spectrum)?
            .into_iter()
            .map(|c| c.re)
            .collect();
        Ok(ImpulseResponse {
            samples,
            sample_rate: self.sample_rate,
        })
    }

    /// Magnitude of the analytic signal (Hilbert envelope).
    pub fn envelope(&self, impulse: &ImpulseResponse<T>) -> Vec<T> {
        if impulse.samples.len() != self.n {
            return envelope(&impulse.samples);
        }
        analytic_magnitude(&impulse.samples, &*self.forward, &*self.inverse)
    }
}

fn analytic_magnitude<T: Real>(x: &[T], forward: &dyn Fft<T>, inverse: &dyn Fft<T>) -> Vec<T> {
    let n = x.len();
    let mut buf: Vec<Complex<T>> = x.iter().map(|&v| Complex::new(v, T::zero())).collect();
    forward.process(&mut buf);
    let two = T::lit(2.0);
    for (k, c) in buf.iter_mut().enumerate() {
        if k == 0 || (n.is_multiple_of(2) && k == n / 2) {
            continue;
        }
        *c = if k < n.div_ceil(2) {
            *c * two
        } else {
            Complex::new(T::zero(), T::zero())
        };
    }
    inverse.process(&mut buf);
    let scale = T::one() / T::from_usize_lossy(n);
    buf.iter().map(|c| c.norm() * scale).collect()
}

/// Hilbert envelope of an arbitrary-length real signal.
pub fn envelope<T: Real>(samples: &[T]) -> Vec<T> {
    if samples.is_empty() {
        return Vec::new();
    }
    let mut planner = FftPlanner::new();
    let n = samples.len();
    analytic_magnitude(
        samples,
        &*planner.plan_fft_forward(n),
        &*planner.plan_fft_inverse(n),
    )
}

/// One-shot synthesis; prefer [`Synthesizer`] when transforming many spectra.
pub fn synthesize_impulse<T: Real>(
    spectrum: &Spectrum<T>,
    cfg: &AcousticConfig<T>,
) -> Result<ImpulseResponse<T>, AcousticsError> {
    Synthesizer::new(cfg)?.synthesize(spectrum)
}
