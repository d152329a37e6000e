//! Observables of the outgoing beam: channel populations, per-channel spin, polarization
//! degree, Rabi-trace fitting and spin–momentum entanglement.

use std::f64::consts::PI;

use nalgebra::Matrix2;
use num_complex::Complex64 as C64;

use crate::bragg::{entropy_bits, BraggDensity, BraggState};
use crate::error::{Error, Result};
use crate::spinor::{bloch_from_moments, SpinorWavefunction};

/// Minimum channel population for which a polarization degree is defined.
pub const MIN_CHANNEL_POPULATION: f64 = 1e-6;

/// Population and spin of one outgoing momentum channel.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ChannelStats {
    /// Fraction of the total norm in this channel.
    pub population: f64,
    /// (⟨σx⟩, ⟨σy⟩, ⟨σz⟩) within the channel; zeros for an empty channel.
    pub bloch: [f64; 3],
}

impl ChannelStats {
    /// |⟨σ_y⟩| of the channel.
    pub fn polarization_degree(&self) -> Result<f64> {
        if self.population < MIN_CHANNEL_POPULATION {
            return Err(Error::EmptyChannel(self.population));
        }
        Ok(self.bloch[1].abs().min(1.0))
    }
}

/// Momentum-channel decomposition around ±2ħk.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelReport {
    /// p_z ≈ +2ħk.
    pub plus: ChannelStats,
    /// p_z ≈ −2ħk.
    pub minus: ChannelStats,
    /// Population outside both bins.
    pub unassigned: f64,
}

impl ChannelReport {
    /// Per-channel polarization degrees (plus, minus).
    pub fn polarization_degrees(&self) -> Result<(f64, f64)> {
        Ok((self.plus.polarization_degree()?, self.minus.polarization_degree()?))
    }

    pub fn total(&self) -> f64 {
        self.plus.population + self.minus.population + self.unassigned
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    uu: f64,
    dd: f64,
    ud: C64,
}

impl Moments {
    fn add(&mut self, up: C64, down: C64) {
        self.uu += up.norm_sqr();
        self.dd += down.norm_sqr();
        self.ud += up.conj() * down;
    }

    fn weight(&self) -> f64 {
        self.uu + self.dd
    }

    fn stats(&self, total: f64) -> ChannelStats {
        let w = self.weight();
        ChannelStats {
            population: w / total,
            bloch: if w > 0.0 { bloch_from_moments(self.uu, self.dd, self.ud) } else { [0.0; 3] },
        }
    }
}

/// Accumulates momentum-resolved spinor samples into a [`ChannelReport`].
#[derive(Debug, Clone)]
pub struct ChannelAccumulator {
    center: f64,
    half_width: f64,
    plus: Moments,
    minus: Moments,
    other: f64,
}

impl ChannelAccumulator {
    /// Bins of half-width `half_width` around ±2k. Requires `half_width < 2k`.
    pub fn new(k: f64, half_width: f64) -> Result<Self> {
        if !(half_width > 0.0 && half_width < 2.0 * k) {
            return Err(Error::InvalidParameter(format!(
                "bin half-width {half_width} must lie in (0, 2ħk = {})",
                2.0 * k
            )));
        }
        Ok(Self {
            center: 2.0 * k,
            half_width,
            plus: Moments::default(),
            minus: Moments::default(),
            other: 0.0,
        })
    }

    /// Add one momentum sample (amplitudes already carry their quadrature weight).
    pub fn add(&mut self, p: f64, up: C64, down: C64) {
        if (p - self.center).abs() <= self.half_width {
            self.plus.add(up, down);
        } else if (p + self.center).abs() <= self.half_width {
            self.minus.add(up, down);
        } else {
            self.other += up.norm_sqr() + down.norm_sqr();
        }
    }

    pub fn finish(&self) -> Result<ChannelReport> {
        let total = self.plus.weight() + self.minus.weight() + self.other;
        if !(total > 0.0) {
            return Err(Error::ZeroNorm);
        }
        Ok(ChannelReport {
            plus: self.plus.stats(total),
            minus: self.minus.stats(total),
            unassigned: self.other / total,
        })
    }
}

/// Integrates the momentum density of `psi` over bins [2ħk ± w] and [−2ħk ± w].
pub fn channel_report(psi: &SpinorWavefunction, k: f64, half_width: f64) -> Result<ChannelReport> {
    let mut acc = ChannelAccumulator::new(k, half_width)?;
    let (up, down) = psi.momentum_amplitudes();
    for (j, (u, d)) in up.iter().zip(&down).enumerate() {
        acc.add(psi.grid().momentum(j), *u, *d);
    }
    acc.finish()
}

/// Von Neumann entropy (bits) of the spin after tracing out the spatial degree of freedom.
///
/// For a normalized pure spinor wave function this is its spin–momentum entanglement.
pub fn spin_momentum_entanglement(psi: &SpinorWavefunction) -> Result<f64> {
    let r = psi.reduced_spin_density()?;
    let m = Matrix2::new(r[0][0], r[0][1], r[1][0], r[1][1]);
    Ok(entropy_bits(&m))
}

/// Entanglement entropy of a Bragg-subspace state given as a density matrix; the state must be pure.
pub fn bragg_entanglement(rho: &BraggDensity) -> Result<f64> {
    let m = rho.matrix();
    let purity = (m * m).trace().re;
    if (purity - 1.0).abs() > 1e-10 {
        return Err(Error::NotPure(format!("tr ρ² = {purity:.12}")));
    }
    // The column with the largest diagonal entry is proportional to the state vector.
    let (col, _) = (0..4)
        .map(|i| (i, m[(i, i)].re))
        .fold((0, f64::MIN), |a, b| if b.1 > a.1 { b } else { a });
    let v = m.column(col);
    let state = BraggState::new([v[0], v[1], v[2], v[3]])?;
    Ok(state.spin_entanglement_entropy())
}

/// Result of fitting P(t) = v·sin²(Ωt/2 + φ₀).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RabiFit {
    /// Oscillation angular frequency (generalized Rabi frequency) in internal units (eV/ħ).
    pub omega: f64,
    pub visibility: f64,
    pub phase: f64,
    /// Detuning implied by a reduced visibility, Ω·√(1−v) (two-level interpretation).
    pub detuning: f64,
    pub rms_residual: f64,
}

impl RabiFit {
    /// Bare coupling Ω·√v under the two-level interpretation.
    pub fn coupling(&self) -> f64 {
        self.omega * self.visibility.clamp(0.0, 1.0).sqrt()
    }
}

fn model(t: f64, v: f64, om: f64, ph: f64) -> f64 {
    let s = (0.5 * om * t + ph).sin();
    v * s * s
}

fn sse(times: &[f64], pops: &[f64], v: f64, om: f64, ph: f64) -> f64 {
    times.iter().zip(pops).map(|(&t, &p)| (model(t, v, om, ph) - p).powi(2)).sum()
}

/// Linear least squares of P ≈ c₀ + c₁cos(Ωt) + c₂sin(Ωt) at fixed Ω; returns (sse, v, φ₀).
fn linear_probe(times: &[f64], pops: &[f64], om: f64) -> (f64, f64, f64) {
    let mut ata = nalgebra::Matrix3::<f64>::zeros();
    let mut atb = nalgebra::Vector3::<f64>::zeros();
    for (&t, &p) in times.iter().zip(pops) {
        let row = nalgebra::Vector3::new(1.0, (om * t).cos(), (om * t).sin());
        ata += row * row.transpose();
        atb += row * p;
    }
    let Some(c) = ata.lu().solve(&atb) else {
        return (f64::INFINITY, 0.0, 0.0);
    };
    // v sin²(x) = v/2 − v/2 cos(2x), 2x = Ωt + 2φ₀ → c₁ = −(v/2)cos2φ₀, c₂ = (v/2)sin2φ₀
    let amp = (c[1] * c[1] + c[2] * c[2]).sqrt();
    let v = c[0] + amp;
    let ph = 0.5 * c[2].atan2(-c[1]);
    (sse(times, pops, v, om, ph), v, ph)
}

/// Least-squares fit of a Rabi trace. `times` must be increasing.
pub fn fit_rabi(times: &[f64], pops: &[f64]) -> Result<RabiFit> {
    if times.len() != pops.len() || times.len() < 8 {
        return Err(Error::FitFailed("need at least 8 samples of equal length".into()));
    }
    let span = times[times.len() - 1] - times[0];
    let (lo, hi) = pops.iter().fold((f64::MAX, f64::MIN), |(a, b), &p| (a.min(p), b.max(p)));
    if !(span > 0.0) || hi - lo < 1e-6 {
        return Err(Error::FitFailed("trace is not oscillatory".into()));
    }
    let dt_min = times.windows(2).map(|w| w[1] - w[0]).fold(f64::MAX, f64::min);
    // A half Rabi period spans at least π/Ω; search up to the sampling limit.
    let om_lo = 0.5 * PI / span;
    let om_hi = PI / dt_min;
    let n_scan = (((om_hi - om_lo) * span / PI) * 8.0).ceil().clamp(200.0, 200_000.0) as usize;
    let mut best = (f64::INFINITY, 0.0, 0.0, 0.0);
    for i in 0..=n_scan {
        let om = om_lo + (om_hi - om_lo) * i as f64 / n_scan as f64;
        let (e, v, ph) = linear_probe(times, pops, om);
        if e < best.0 {
            best = (e, om, v, ph);
        }
    }
    // Gauss–Newton / Levenberg–Marquardt polish on (v, Ω, φ₀).
    let (mut v, mut om, mut ph) = (best.2, best.1, best.3);
    let mut err = sse(times, pops, v, om, ph);
    let mut lambda = 1e-3;
    for _ in 0..200 {
        let mut jtj = nalgebra::Matrix3::<f64>::zeros();
        let mut jtr = nalgebra::Vector3::<f64>::zeros();
        for (&t, &p) in times.iter().zip(pops) {
            let x = 0.5 * om * t + ph;
            let (s, c) = x.sin_cos();
            let r = v * s * s - p;
            let g = nalgebra::Vector3::new(s * s, v * s * c * t, 2.0 * v * s * c);
            jtj += g * g.transpose();
            jtr += g * r;
        }
        let mut damped = jtj;
        for d in 0..3 {
            damped[(d, d)] *= 1.0 + lambda;
        }
        let Some(step) = damped.lu().solve(&jtr) else { break };
        let (nv, nom, nph) = (v - step[0], om - step[1], ph - step[2]);
        let nerr = sse(times, pops, nv, nom, nph);
        if nerr < err {
            let done = (err - nerr) <= 1e-15 * err.max(1e-300);
            v = nv;
            om = nom;
            ph = nph;
            err = nerr;
            lambda = (lambda * 0.3).max(1e-12);
            if done {
                break;
            }
        } else {
            lambda *= 10.0;
            if lambda > 1e12 {
                break;
            }
        }
    }
    if om < 0.0 {
        om = -om;
        ph = -ph;
    }
    if om * span < PI {
        return Err(Error::FitFailed(format!(
            "trace spans {:.3} of a Rabi period; need at least half",
            om * span / (2.0 * PI)
        )));
    }
    let rms = (err / times.len() as f64).sqrt();
    Ok(RabiFit {
        omega: om,
        visibility: v,
        phase: ph.rem_euclid(PI),
        detuning: om * (1.0 - v.min(1.0)).max(0.0).sqrt(),
        rms_residual: rms,
    })
}
