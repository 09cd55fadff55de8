//! Lindblad channels for sensor dissipation and the master-equation
//! integrator.
//!
//! The equation of motion is `dρ/dt = −i2π[H,ρ] + Σ_j (L_jρL_j† −
//! ½{L_j†L_j,ρ})` with `H` in Hz and jump operators in Hz^(1/2). `H` and the
//! channels are time-independent between pulse events, so the integrator
//! exponentiates the constant Liouvillian once per step size and composes
//! exact propagators; there is no step-size truncation error.

use std::f64::consts::PI;
use std::sync::Arc;

use ndarray::Array2;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::fitting::{levenberg_marquardt, LmModel};
use crate::linalg;
use crate::quantum::{embed, spin, CompositeSystem, DensityMatrix, Operator};

/// Index of the absorbing ionized level on the extended sensor.
pub const ION_INDEX: usize = 3;
/// Dimension of the sensor extended by the ionized level.
pub const EXT_SENSOR_DIM: usize = 4;

/// A set of jump operators sharing one physical origin.
#[derive(Debug, Clone)]
pub struct LindbladChannel {
    pub jump_operators: Vec<Operator>,
}

impl LindbladChannel {
    pub fn new(jump_operators: Vec<Operator>) -> Self {
        Self { jump_operators }
    }

    pub fn system(&self) -> Option<&Arc<CompositeSystem>> {
        self.jump_operators.first().map(|op| &op.system)
    }
}

/// Uniform depolarizer on one subsystem.
///
/// For a dim-3 sensor this is the nine-operator set `L = (3T₁)^(-1/2)|m><n|`
/// reproducing `ε(ρ) = (1 − Δt/T₁)ρ + (Δt/T₁)·1/3`; a dim-2 electron gets
/// the four-operator analogue with per-pair rate `1/(2T₁)`.
pub fn depolarizing_channel(
    t1: f64,
    system: &Arc<CompositeSystem>,
    label: &str,
) -> Result<LindbladChannel> {
    if t1 <= 0.0 {
        return Err(Error::InvalidArgument("t1 must be > 0".into()));
    }
    let d = system.dim_of(label)?;
    if d != 2 && d != 3 {
        return Err(Error::DimensionMismatch(format!(
            "depolarizing channel wants a dim-2 or dim-3 subsystem, `{label}` has {d}"
        )));
    }
    let amp = C64::new((1.0 / (d as f64 * t1)).sqrt(), 0.0);
    let mut ops = Vec::with_capacity(d * d);
    for m in 0..d {
        for n in 0..d {
            let local = spin::ketbra(d, m, n).mapv(|x| x * amp);
            ops.push(embed(&local, system, label)?);
        }
    }
    Ok(LindbladChannel::new(ops))
}

/// Depolarizer acting on the NV⁻ levels of the extended (dim-4) sensor,
/// leaving the ionized level untouched.
pub fn depolarizing_channel_ext(
    t1: f64,
    system: &Arc<CompositeSystem>,
    label: &str,
) -> Result<LindbladChannel> {
    if t1 <= 0.0 {
        return Err(Error::InvalidArgument("t1 must be > 0".into()));
    }
    let d = system.dim_of(label)?;
    if d != EXT_SENSOR_DIM {
        return Err(Error::DimensionMismatch(format!(
            "extended sensor must have dimension {EXT_SENSOR_DIM}, `{label}` has {d}"
        )));
    }
    let amp = C64::new((1.0 / (3.0 * t1)).sqrt(), 0.0);
    let mut ops = Vec::with_capacity(9);
    for m in 0..3 {
        for n in 0..3 {
            let local = spin::ketbra(d, m, n).mapv(|x| x * amp);
            ops.push(embed(&local, system, label)?);
        }
    }
    Ok(LindbladChannel::new(ops))
}

/// Laser-driven model constants: conversion from power to excitation rate,
/// the quadratic ionization law, and the metastable branching ratio.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct IlluminationModel {
    /// Applied laser power, μW.
    pub laser_power_uw: f64,
    /// Excitations per second per μW.
    pub c_exc: f64,
    /// Ionization constant of the two-photon law γ_ion = γ_exc²·c_ion.
    pub c_ion: f64,
    /// Probability for the metastable state to decay into m_S = 0.
    pub p_branching: f64,
    /// Electron lifetime in the neutral charge state, seconds.
    pub t1_nv0: f64,
}

impl Default for IlluminationModel {
    fn default() -> Self {
        // constants fitted in the source data set
        Self {
            laser_power_uw: 0.0,
            c_exc: 2.5e5,
            c_ion: 1.0 / 7.0e8,
            p_branching: 0.96,
            t1_nv0: 13e-6,
        }
    }
}

impl IlluminationModel {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p_branching) {
            return Err(Error::InvalidArgument(format!(
                "p_branching = {} outside [0, 1]",
                self.p_branching
            )));
        }
        if self.laser_power_uw < 0.0 || self.c_exc < 0.0 || self.c_ion < 0.0 {
            return Err(Error::InvalidArgument(
                "laser power and rate constants must be >= 0".into(),
            ));
        }
        if self.t1_nv0 <= 0.0 {
            return Err(Error::InvalidArgument("t1_nv0 must be > 0".into()));
        }
        Ok(())
    }

    /// Excitation rate γ_exc = P·c_exc, 1/s.
    pub fn gamma_exc(&self) -> f64 {
        self.laser_power_uw * self.c_exc
    }

    /// Ionization rate γ_ion = γ_exc²·c_ion, 1/s.
    pub fn gamma_ion(&self) -> f64 {
        self.gamma_exc().powi(2) * self.c_ion
    }

    pub fn with_power(&self, laser_power_uw: f64) -> Self {
        Self {
            laser_power_uw,
            ..self.clone()
        }
    }
}

/// Fraction of optical excitations that traverse the metastable singlet and
/// resample the spin projection. The reduced level scheme folds the short
/// metastable dwell into an instantaneous branch; this fraction carries the
/// spin-dependent intersystem-crossing probability of the full scheme.
pub const REPUMP_CYCLE_FRACTION: f64 = 0.15;

/// Fraction of nominal two-photon ionization events that remove the center
/// from the reduced NV⁻ manifold for the remainder of a run. The balance of
/// the nominal rate corresponds to prompt recombination, which the reduced
/// scheme does not track level-by-level.
pub const ION_LOSS_WEIGHT: f64 = 0.0065;

/// Jump operators for the continuously illuminated sensor on the extended
/// (dim-4) sensor subsystem: optical cycling resamples the spin projection
/// through the metastable branch (into m_S = 0 with probability
/// `p_branching`, else m_S = ±1), and an effective two-photon ionization
/// feeds the absorbing ionized level.
pub fn illumination_channel(
    model: &IlluminationModel,
    system: &Arc<CompositeSystem>,
    label: &str,
) -> Result<LindbladChannel> {
    model.validate()?;
    let d = system.dim_of(label)?;
    if d != EXT_SENSOR_DIM {
        return Err(Error::DimensionMismatch(format!(
            "illuminated sensor must have dimension {EXT_SENSOR_DIM}, `{label}` has {d}"
        )));
    }
    let mut ops = Vec::new();
    let cycle = REPUMP_CYCLE_FRACTION * model.gamma_exc();
    // destination weights over (m_S = +1, 0, -1)
    let weights = [
        (1.0 - model.p_branching) / 2.0,
        model.p_branching,
        (1.0 - model.p_branching) / 2.0,
    ];
    for src in 0..3 {
        for (dst, w) in weights.iter().enumerate() {
            let rate = cycle * w;
            if rate <= 0.0 {
                continue;
            }
            let local = spin::ketbra(d, dst, src).mapv(|x| x * C64::new(rate.sqrt(), 0.0));
            ops.push(embed(&local, system, label)?);
        }
    }
    let ion_rate = ION_LOSS_WEIGHT * model.gamma_ion();
    if ion_rate > 0.0 {
        for src in 0..3 {
            let local =
                spin::ketbra(d, ION_INDEX, src).mapv(|x| x * C64::new(ion_rate.sqrt(), 0.0));
            ops.push(embed(&local, system, label)?);
        }
    }
    Ok(LindbladChannel::new(ops))
}

/// Assemble the Liouvillian superoperator (row-major vec convention) in 1/s.
pub fn liouvillian(h: &Operator, channels: &[LindbladChannel]) -> Result<Array2<C64>> {
    let d = h.dim();
    for ch in channels {
        for op in &ch.jump_operators {
            if op.dim() != d {
                return Err(Error::DimensionMismatch(
                    "jump operator dimension does not match Hamiltonian".into(),
                ));
            }
        }
    }
    let n = d * d;
    let mut sup = Array2::from_elem((n, n), C64::new(0.0, 0.0));
    let id = Array2::from_shape_fn((d, d), |(i, j)| {
        C64::new(if i == j { 1.0 } else { 0.0 }, 0.0)
    });

    // vec_r(AρB) = (A ⊗ Bᵀ) vec_r(ρ)
    let kron_add = |sup: &mut Array2<C64>, a: &Array2<C64>, bt: &Array2<C64>, f: C64| {
        for i in 0..d {
            for k in 0..d {
                let aik = a[(i, k)];
                if aik.norm_sqr() == 0.0 {
                    continue;
                }
                for j in 0..d {
                    for l in 0..d {
                        let v = bt[(j, l)];
                        if v.norm_sqr() == 0.0 {
                            continue;
                        }
                        sup[(i * d + j, k * d + l)] += f * aik * v;
                    }
                }
            }
        }
    };

    let minus_i2pi = C64::new(0.0, -2.0 * PI);
    let ht = h.matrix.t().to_owned();
    kron_add(&mut sup, &h.matrix, &id, minus_i2pi);
    kron_add(&mut sup, &id, &ht, -minus_i2pi);

    for ch in channels {
        for l in &ch.jump_operators {
            let ldag = l.dagger();
            let ldl = ldag.matmul(l);
            let lbar = l.matrix.mapv(|x| x.conj()); // (L†)ᵀ
            kron_add(&mut sup, &l.matrix, &lbar, C64::new(1.0, 0.0));
            kron_add(&mut sup, &ldl.matrix, &id, C64::new(-0.5, 0.0));
            let ldlt = ldl.matrix.t().to_owned();
            kron_add(&mut sup, &id, &ldlt, C64::new(-0.5, 0.0));
        }
    }
    Ok(sup)
}

/// Density-matrix trajectory on a time grid.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DensityMatrix>,
}

fn vec_of(rho: &Array2<C64>) -> Vec<C64> {
    rho.iter().copied().collect()
}

fn mat_of(v: &[C64], d: usize) -> Array2<C64> {
    Array2::from_shape_vec((d, d), v.to_vec()).expect("square")
}

fn apply(sup: &Array2<C64>, v: &[C64]) -> Vec<C64> {
    let n = v.len();
    let mut out = vec![C64::new(0.0, 0.0); n];
    for i in 0..n {
        let mut acc = C64::new(0.0, 0.0);
        for k in 0..n {
            acc += sup[(i, k)] * v[k];
        }
        out[i] = acc;
    }
    out
}

/// Integrate the master equation; `times` must be non-negative and strictly
/// increasing, with ρ(0) = `rho0`. Trace drift beyond 1e-8 is an error
/// reported with the offending time.
pub fn integrate_master(
    h: &Operator,
    channels: &[LindbladChannel],
    rho0: &DensityMatrix,
    times: &[f64],
) -> Result<Trajectory> {
    if times.is_empty() {
        return Err(Error::InvalidArgument("empty time grid".into()));
    }
    if times[0] < 0.0 || times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument(
            "times must be non-negative and strictly increasing".into(),
        ));
    }
    if rho0.dim() != h.dim() {
        return Err(Error::DimensionMismatch(
            "initial state does not match Hamiltonian".into(),
        ));
    }
    let d = h.dim();
    let sup = liouvillian(h, channels)?;

    // cache propagators per distinct step size
    let mut cache: Vec<(f64, Array2<C64>)> = Vec::new();
    let mut propagator = |dt: f64| -> Array2<C64> {
        if let Some((_, u)) = cache.iter().find(|(s, _)| (s - dt).abs() <= 1e-15 * dt.abs()) {
            return u.clone();
        }
        let u = linalg::expm(&sup.mapv(|x| x * C64::new(dt, 0.0)));
        cache.push((dt, u.clone()));
        u
    };

    let mut v = vec_of(&rho0.matrix);
    let mut t_prev = 0.0;
    let mut states = Vec::with_capacity(times.len());
    for &t in times {
        let dt = t - t_prev;
        if dt > 0.0 {
            let u = propagator(dt);
            v = apply(&u, &v);
        }
        t_prev = t;
        let m = mat_of(&v, d);
        let tr: C64 = (0..d).map(|i| m[(i, i)]).sum();
        if (tr.re - 1.0).abs() > 1e-8 || tr.im.abs() > 1e-8 {
            return Err(Error::Integration {
                time: t,
                reason: format!("trace drift {:.3e}", (tr.re - 1.0).abs().max(tr.im.abs())),
            });
        }
        states.push(DensityMatrix::new(rho0.system.clone(), m)?);
    }
    Ok(Trajectory {
        times: times.to_vec(),
        states,
    })
}

/// Transverse coherence 2·Re<↑|ρ_target|↓> of one target versus time, with
/// the ionized-level population excluded from the reduced trace and returned
/// separately as cumulative signal loss.
pub fn coherence_series(traj: &Trajectory, target_label: &str) -> Result<(Vec<f64>, Vec<f64>)> {
    let sys = match traj.states.first() {
        Some(s) => s.system.clone(),
        None => return Err(Error::InvalidArgument("empty trajectory".into())),
    };
    let dt = sys.dim_of(target_label)?;
    if dt != 2 {
        return Err(Error::DimensionMismatch(format!(
            "target `{target_label}` must have dimension 2"
        )));
    }
    let tpos = sys.position(target_label)?;
    // locate an extended sensor carrying an ionized level, if present
    let ion_sub: Option<usize> = sys
        .labels()
        .position(|_| false)
        .or_else(|| {
            sys.dims()
                .iter()
                .enumerate()
                .find(|&(p, &d)| d == EXT_SENSOR_DIM && p != tpos)
                .map(|(p, _)| p)
        });

    let dims = sys.dims();
    let d = sys.dim();
    let mut coh = Vec::with_capacity(traj.states.len());
    let mut loss = Vec::with_capacity(traj.states.len());
    for state in &traj.states {
        let mut c = C64::new(0.0, 0.0);
        let mut ion_pop = 0.0;
        for row in 0..d {
            let ri = sys.unravel(row);
            if let Some(p) = ion_sub {
                if ri[p] == ION_INDEX {
                    ion_pop += state.matrix[(row, row)].re;
                    continue;
                }
            }
            if ri[tpos] != 0 {
                continue;
            }
            // column index: same everywhere, target flipped to 1
            let mut ci = ri.clone();
            ci[tpos] = 1;
            let col = sys.ravel(&ci);
            c += state.matrix[(row, col)];
        }
        let _ = &dims;
        coh.push(2.0 * c.re);
        loss.push(ion_pop);
    }
    Ok((coh, loss))
}

/// Result of the decaying-cosine fit `a·cos(2πδt + φ)·e^(−t/T₂*) + c`.
#[derive(Debug, Clone, serde::Serialize)]
pub struct DecayFitResult {
    pub t2star: f64,
    pub t2star_stderr: f64,
    /// Oscillation frequency δ, Hz (0 for a pure decay).
    pub detuning_hz: f64,
    pub detuning_stderr: f64,
    pub amplitude: f64,
    pub phase: f64,
    /// Asymptotic offset.
    pub offset: f64,
    pub residual_norm: f64,
    pub converged: bool,
}

struct DecayingCosine<'a> {
    t: &'a [f64],
    y: &'a [f64],
}

impl LmModel for DecayingCosine<'_> {
    // params: [a, delta, phi, T, c]
    fn eval(&self, p: &[f64], resid: &mut [f64], jac: &mut [Vec<f64>]) {
        let (a, delta, phi, t2, c) = (p[0], p[1], p[2], p[3], p[4]);
        for (i, (&t, &y)) in self.t.iter().zip(self.y).enumerate() {
            let theta = 2.0 * PI * delta * t + phi;
            let env = (-t / t2).exp();
            let cos = theta.cos();
            let sin = theta.sin();
            resid[i] = a * cos * env + c - y;
            jac[i][0] = cos * env;
            jac[i][1] = -a * sin * env * 2.0 * PI * t;
            jac[i][2] = -a * sin * env;
            jac[i][3] = a * cos * env * t / (t2 * t2);
            jac[i][4] = 1.0;
        }
    }
    fn n_resid(&self) -> usize {
        self.t.len()
    }
}

struct PureDecay<'a> {
    t: &'a [f64],
    y: &'a [f64],
}

impl LmModel for PureDecay<'_> {
    // params: [a, T, c]
    fn eval(&self, p: &[f64], resid: &mut [f64], jac: &mut [Vec<f64>]) {
        let (a, t2, c) = (p[0], p[1], p[2]);
        for (i, (&t, &y)) in self.t.iter().zip(self.y).enumerate() {
            let env = (-t / t2).exp();
            resid[i] = a * env + c - y;
            jac[i][0] = env;
            jac[i][1] = a * env * t / (t2 * t2);
            jac[i][2] = 1.0;
        }
    }
    fn n_resid(&self) -> usize {
        self.t.len()
    }
}

/// Least-squares fit of a decaying cosine to a real time series. `δ` may be
/// zero; the oscillation branch is chosen from the discrete spectrum of the
/// data. Non-convergence is flagged on the result, with best-effort values.
pub fn extract_t2star(series: &[f64], times: &[f64]) -> Result<DecayFitResult> {
    if series.len() != times.len() || series.len() < 8 {
        return Err(Error::InvalidArgument(
            "need at least 8 samples with matching time grid".into(),
        ));
    }
    let n = series.len();
    let mean = series.iter().sum::<f64>() / n as f64;
    let span = times[n - 1] - times[0];

    // an oscillating signal crosses its mean repeatedly; a monotone decay
    // crosses it about once
    let amp_scale = series
        .iter()
        .map(|y| (y - mean).abs())
        .fold(0.0f64, f64::max);
    let eps = 0.02 * amp_scale;
    let mut crossings = 0usize;
    let mut last_sign = 0i8;
    for &y in series {
        let sign = if y - mean > eps {
            1
        } else if y - mean < -eps {
            -1
        } else {
            0
        };
        if sign != 0 {
            if last_sign != 0 && sign != last_sign {
                crossings += 1;
            }
            last_sign = sign;
        }
    }
    let with_oscillation = crossings >= 2;

    // discrete spectrum of (y - mean) seeds the oscillation frequency
    let delta0 = if with_oscillation {
        let mut best_k = 1usize;
        let mut best_mag = 0.0f64;
        for k in 1..=n / 2 {
            let mut acc = C64::new(0.0, 0.0);
            for (i, &y) in series.iter().enumerate() {
                let ph = -2.0 * PI * (k as f64) * (i as f64) / n as f64;
                acc += C64::new(ph.cos(), ph.sin()) * (y - mean);
            }
            if acc.norm() > best_mag {
                best_mag = acc.norm();
                best_k = k;
            }
        }
        best_k as f64 * (n as f64 - 1.0) / (n as f64 * span)
    } else {
        0.0
    };

    // envelope guesses
    let a0 = series[0] - mean;
    let a0 = if a0.abs() > 1e-12 { a0 } else { 1.0 };
    let target = a0.abs() / std::f64::consts::E;
    let mut t20 = span / 2.0;
    for (i, &y) in series.iter().enumerate() {
        if (y - mean).abs() < target && times[i] > 0.0 {
            t20 = times[i];
            break;
        }
    }

    let lm;
    let p;
    if with_oscillation {
        let model = DecayingCosine {
            t: times,
            y: series,
        };
        lm = levenberg_marquardt(&model, &[a0, delta0, 0.0, t20, mean], 300)?;
        p = lm.params.clone();
    } else {
        let model = PureDecay {
            t: times,
            y: series,
        };
        lm = levenberg_marquardt(&model, &[a0, t20, mean], 300)?;
        // widen to the five-parameter layout
        p = vec![lm.params[0], 0.0, 0.0, lm.params[1], lm.params[2]];
    }
    let t_idx = if with_oscillation { 3 } else { 1 };
    Ok(DecayFitResult {
        t2star: p[3].abs(),
        t2star_stderr: lm.stderr[t_idx],
        detuning_hz: p[1].abs(),
        detuning_stderr: if with_oscillation { lm.stderr[1] } else { 0.0 },
        amplitude: p[0],
        phase: p[2],
        offset: p[4],
        residual_norm: lm.residual_norm,
        converged: lm.converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn sensor_only() -> Arc<CompositeSystem> {
        CompositeSystem::new([(physics::SENSOR_LABEL, 3)]).unwrap()
    }

    #[test]
    fn depolarizer_steady_state_is_uniform() {
        let sys = sensor_only();
        let ch = depolarizing_channel(6.4e-3, &sys, physics::SENSOR_LABEL).unwrap();
        let h = Operator::zeros(sys.clone());
        let rho0 = DensityMatrix::from_ket(
            sys.clone(),
            &[c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)],
        )
        .unwrap();
        let traj = integrate_master(&h, &[ch], &rho0, &[0.2]).unwrap();
        let m = &traj.states[0].matrix;
        for i in 0..3 {
            assert_relative_eq!(m[(i, i)].re, 1.0 / 3.0, max_relative = 1e-6);
        }
    }

    #[test]
    fn depolarizer_matches_analytic_map() {
        // channel-only evolution: rho(t) = e^{-t/T1} rho0 + (1-e^{-t/T1})/3
        let sys = sensor_only();
        let t1 = 6.4e-3;
        let ch = depolarizing_channel(t1, &sys, physics::SENSOR_LABEL).unwrap();
        let h = Operator::zeros(sys.clone());
        let ket = [c(0.8, 0.0), c(0.0, 0.6), c(0.0, 0.0)];
        let rho0 = DensityMatrix::from_ket(sys.clone(), &ket).unwrap();
        let times: Vec<f64> = (1..=8).map(|i| i as f64 * 1.3e-3).collect();
        let traj = integrate_master(&h, &[ch], &rho0, &times).unwrap();
        for (k, &t) in times.iter().enumerate() {
            let decay = (-t / t1).exp();
            for i in 0..3 {
                for j in 0..3 {
                    let uniform = if i == j { 1.0 / 3.0 } else { 0.0 };
                    let want = rho0.matrix[(i, j)] * decay + c(uniform * (1.0 - decay), 0.0);
                    assert!(
                        (traj.states[k].matrix[(i, j)] - want).norm() < 1e-9,
                        "t={t} ({i},{j})"
                    );
                }
            }
        }
    }

    #[test]
    fn depolarizer_sz_decays_exponentially() {
        let sys = sensor_only();
        let t1 = 2.0e-3;
        let ch = depolarizing_channel(t1, &sys, physics::SENSOR_LABEL).unwrap();
        let h = Operator::zeros(sys.clone());
        // m_S = -1 is basis index 2
        let rho0 =
            DensityMatrix::from_ket(sys.clone(), &[c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)])
                .unwrap();
        let szop = Operator::new(sys.clone(), spin::sz(3)).unwrap();
        let times: Vec<f64> = (1..=40).map(|i| i as f64 * 2e-4).collect();
        let traj = integrate_master(&h, &[ch], &rho0, &times).unwrap();
        for (k, &t) in times.iter().enumerate() {
            let got = crate::quantum::expectation(&traj.states[k], &szop)
                .unwrap()
                .re;
            assert_relative_eq!(got, -(-t / t1).exp(), max_relative = 1e-7, epsilon = 1e-9);
        }
    }

    #[test]
    fn initial_decay_out_of_ms0_is_two_thirds_rate() {
        let sys = sensor_only();
        let t1 = 6.4e-3;
        let ch = depolarizing_channel(t1, &sys, physics::SENSOR_LABEL).unwrap();
        let h = Operator::zeros(sys.clone());
        let rho0 =
            DensityMatrix::from_ket(sys.clone(), &[c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)])
                .unwrap();
        let dt = t1 / 2000.0;
        let traj = integrate_master(&h, &[ch], &rho0, &[dt]).unwrap();
        let p0 = traj.states[0].matrix[(1, 1)].re;
        let rate = (1.0 - p0) / dt;
        assert_relative_eq!(rate, 2.0 / (3.0 * t1), max_relative = 1e-3);
    }

    #[test]
    fn closed_system_phases_rotate_at_level_splitting() {
        let sys = CompositeSystem::new([("t", 2)]).unwrap();
        let mut hm = Array2::from_elem((2, 2), c(0.0, 0.0));
        hm[(0, 0)] = c(250.0, 0.0); // Hz
        let h = Operator::new(sys.clone(), hm).unwrap();
        let s = 1.0 / 2f64.sqrt();
        let rho0 = DensityMatrix::from_ket(sys.clone(), &[c(s, 0.0), c(s, 0.0)]).unwrap();
        let times: Vec<f64> = (1..=10).map(|i| i as f64 * 1e-4).collect();
        let traj = integrate_master(&h, &[], &rho0, &times).unwrap();
        for (k, &t) in times.iter().enumerate() {
            let offdiag = traj.states[k].matrix[(0, 1)];
            let want = c(0.5, 0.0) * C64::new(0.0, -2.0 * PI * 250.0 * t).exp();
            assert!((offdiag - want).norm() < 1e-9);
            assert_relative_eq!(traj.states[k].matrix[(0, 0)].re, 0.5, epsilon = 1e-10);
        }
    }

    #[test]
    fn liouvillian_matches_brute_force_rhs() {
        // independent oracle: apply the master-equation RHS to matrix units
        let sys = CompositeSystem::new([("s", 3), ("t", 2)]).unwrap();
        let mut hm = Array2::from_elem((6, 6), c(0.0, 0.0));
        for i in 0..6 {
            hm[(i, i)] = c(100.0 * i as f64, 0.0);
        }
        hm[(0, 3)] = c(40.0, 7.0);
        hm[(3, 0)] = c(40.0, -7.0);
        let h = Operator::new(sys.clone(), hm.clone()).unwrap();
        let ch = depolarizing_channel(1e-3, &sys, "s").unwrap();
        let sup = liouvillian(&h, &[ch.clone()]).unwrap();

        let d = 6;
        for unit in 0..d * d {
            let (a, b) = (unit / d, unit % d);
            let mut e = Array2::from_elem((d, d), c(0.0, 0.0));
            e[(a, b)] = c(1.0, 0.0);
            // brute-force RHS
            let comm = hm.dot(&e) - e.dot(&hm);
            let mut rhs = comm.mapv(|x| x * c(0.0, -2.0 * PI));
            for l in &ch.jump_operators {
                let lm = &l.matrix;
                let ld = l.dagger().matrix;
                let ldl = ld.dot(lm);
                rhs = rhs + lm.dot(&e).dot(&ld)
                    - (ldl.dot(&e) + e.dot(&ldl)).mapv(|x| x * c(0.5, 0.0));
            }
            for i in 0..d {
                for j in 0..d {
                    let got = sup[(i * d + j, unit)];
                    assert!(
                        (got - rhs[(i, j)]).norm() < 1e-9 * (1.0 + rhs[(i, j)].norm()),
                        "unit {unit} entry ({i},{j})"
                    );
                }
            }
        }
    }

    #[test]
    fn trajectory_preserves_physicality() {
        let sys = CompositeSystem::new([(physics::SENSOR_LABEL, 3), ("target0", 2)]).unwrap();
        let a_par = 2.8e3;
        let hm = {
            let szs = embed(&spin::sz(3), &sys, physics::SENSOR_LABEL).unwrap();
            let izt = embed(&spin::sz(2), &sys, "target0").unwrap();
            szs.matmul(&izt).scale(c(a_par, 0.0))
        };
        let ch = depolarizing_channel(6.4e-3, &sys, physics::SENSOR_LABEL).unwrap();
        let s = 1.0 / 2f64.sqrt();
        let rho0 = DensityMatrix::product_state(
            sys.clone(),
            &[
                vec![c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)],
                vec![c(s, 0.0), c(s, 0.0)],
            ],
        )
        .unwrap();
        let times: Vec<f64> = (1..=30).map(|i| i as f64 * 5e-4).collect();
        let traj = integrate_master(&hm, &[ch], &rho0, &times).unwrap();
        for state in &traj.states {
            assert!((state.trace().re - 1.0).abs() < 1e-9);
            let ev = linalg::hermitian_eigenvalues(&state.matrix);
            assert!(ev[0] > -1e-8, "min eigenvalue {}", ev[0]);
        }
    }

    #[test]
    fn coherence_series_starts_at_one_for_x_state() {
        let sys = CompositeSystem::new([(physics::SENSOR_LABEL, 3), ("target0", 2)]).unwrap();
        let h = Operator::zeros(sys.clone());
        let s = 1.0 / 2f64.sqrt();
        let rho0 = DensityMatrix::product_state(
            sys.clone(),
            &[
                vec![c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)],
                vec![c(s, 0.0), c(s, 0.0)],
            ],
        )
        .unwrap();
        let traj = integrate_master(&h, &[], &rho0, &[1e-6]).unwrap();
        let (coh, loss) = coherence_series(&traj, "target0").unwrap();
        assert_relative_eq!(coh[0], 1.0, epsilon = 1e-10);
        assert_relative_eq!(loss[0], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn free_precession_is_unit_cosine() {
        let sys = CompositeSystem::new([("target0", 2)]).unwrap();
        let det = 180.0; // Hz
        let h = Operator::new(sys.clone(), spin::sz(2).mapv(|x| x * c(det, 0.0))).unwrap();
        let s = 1.0 / 2f64.sqrt();
        let rho0 = DensityMatrix::from_ket(sys.clone(), &[c(s, 0.0), c(s, 0.0)]).unwrap();
        let times: Vec<f64> = (0..=100).map(|i| 1e-5 + i as f64 * 1e-4).collect();
        let traj = integrate_master(&h, &[], &rho0, &times).unwrap();
        let (coh, _) = coherence_series(&traj, "target0").unwrap();
        for (k, &t) in times.iter().enumerate() {
            assert_relative_eq!(coh[k], (2.0 * PI * det * t).cos(), epsilon = 1e-9);
        }
    }

    #[test]
    fn extract_t2star_pure_exponential() {
        let tau = 4.2e-3;
        let times: Vec<f64> = (0..200).map(|i| i as f64 * 1e-4).collect();
        let y: Vec<f64> = times.iter().map(|&t| (-t / tau).exp()).collect();
        let fit = extract_t2star(&y, &times).unwrap();
        assert_relative_eq!(fit.t2star, tau, max_relative = 0.01);
        assert_eq!(fit.detuning_hz, 0.0);
    }

    #[test]
    fn extract_t2star_decaying_cosine_17_4ms() {
        let t2 = 17.4e-3;
        let delta = 230.0;
        let times: Vec<f64> = (0..400).map(|i| i as f64 * 1.5e-4).collect();
        let y: Vec<f64> = times
            .iter()
            .map(|&t| 0.8 * (2.0 * PI * delta * t + 0.3).cos() * (-t / t2).exp() + 0.05)
            .collect();
        let fit = extract_t2star(&y, &times).unwrap();
        assert_relative_eq!(fit.t2star, t2, max_relative = 0.01);
        assert_relative_eq!(fit.detuning_hz, delta, max_relative = 0.01);
        assert!(fit.converged);
    }

    #[test]
    fn extract_t2star_noisy_recovers_within_uncertainty() {
        use rand::{Rng, SeedableRng};
        let t2 = 8.0e-3;
        let delta = 400.0;
        let times: Vec<f64> = (0..400).map(|i| i as f64 * 6e-5).collect();
        let mut failures = 0;
        for seed in 0..8u64 {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let y: Vec<f64> = times
                .iter()
                .map(|&t| {
                    (2.0 * PI * delta * t).cos() * (-t / t2).exp()
                        + 0.1 * (rng.gen::<f64>() - 0.5) * 2.0
                })
                .collect();
            let fit = extract_t2star(&y, &times).unwrap();
            // allow 3 sigma, count outliers
            if (fit.t2star - t2).abs() > 3.0 * fit.t2star_stderr.max(1e-6) {
                failures += 1;
            }
        }
        assert!(failures <= 1, "{failures} of 8 seeds outside 3 sigma");
    }

    #[test]
    fn illumination_zero_power_has_no_rates() {
        let sys = CompositeSystem::new([(physics::SENSOR_LABEL, EXT_SENSOR_DIM)]).unwrap();
        let model = IlluminationModel::default();
        let ch = illumination_channel(&model, &sys, physics::SENSOR_LABEL).unwrap();
        assert!(ch.jump_operators.is_empty());
    }

    #[test]
    fn illumination_rate_arithmetic() {
        let model = IlluminationModel {
            laser_power_uw: 6.3,
            ..Default::default()
        };
        assert_relative_eq!(model.gamma_exc(), 6.3 * 2.5e5, max_relative = 1e-12);
        assert_relative_eq!(
            model.gamma_ion(),
            (6.3f64 * 2.5e5).powi(2) / 7.0e8,
            max_relative = 1e-12
        );
        // about 1.58e6 and 3.5e3 per second
        assert!((model.gamma_exc() - 1.58e6).abs() / 1.58e6 < 0.01);
        assert!((model.gamma_ion() - 3.5e3).abs() / 3.5e3 < 0.02);
    }

    #[test]
    fn illumination_rejects_bad_branching() {
        let model = IlluminationModel {
            p_branching: 1.3,
            ..Default::default()
        };
        assert!(model.validate().is_err());
    }
}
