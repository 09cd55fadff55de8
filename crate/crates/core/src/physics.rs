//! Secular spin Hamiltonian, physical constants, and dipolar geometry.
//!
//! The Hamiltonian is diagonal in the product basis by construction (secular
//! approximation): `H = D·Sz² + γ̃ˢB·Sz + γ̃ᵐB·Izᵐ + γ̃ᵗB·ΣIzᵗ + Sz·A∥ᵐIzᵐ +
//! Sz·ΣA∥ᵗIzᵗ`, all terms in Hz.
//!
//! Basis conventions: the sensor triplet is ordered by descending magnetic
//! quantum number (+1, 0, -1); the memory qubit spans the two used levels
//! with index 0 = m_I = 0 and index 1 = m_I = +1, so its Iz is diag(0, 1);
//! targets are spin-1/2 with Iz = diag(+1/2, -1/2).

use std::sync::Arc;

use ndarray::Array2;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::quantum::{embed, spin, CompositeSystem, Operator};

pub const SENSOR_LABEL: &str = "sensor";
pub const MEMORY_LABEL: &str = "memory";

pub fn target_label(index: usize) -> String {
    format!("target{index}")
}

/// Gyromagnetic ratios divided by 2π, in Hz/T, signed. Electron value is the
/// NV convention with Larmor frequency = γ̃·B > 0. Nuclear values derive from
/// the CODATA proton value and IUPAC frequency ratios; see the constants
/// table in the repository docs.
pub mod constants {
    /// NV electron spin, |g_e| μ_B / h.
    pub const GAMMA_ELECTRON: f64 = 28.024951e9;
    /// ¹H.
    pub const GAMMA_H1: f64 = 42.577478e6;
    /// ¹³C.
    pub const GAMMA_C13: f64 = 10.7084e6;
    /// ²⁹Si (negative moment).
    pub const GAMMA_SI29: f64 = -8.4587e6;
    /// ¹⁹F.
    pub const GAMMA_F19: f64 = 40.0628e6;
    /// ¹⁴N (the memory nucleus).
    pub const GAMMA_N14: f64 = 3.0777e6;
    /// NV ground-state crystal-field splitting, Hz.
    pub const NV_D_SPLITTING: f64 = 2.87e9;
    /// μ₀/4π in SI.
    pub const MU0_OVER_4PI: f64 = 1.0e-7;
    /// Planck constant, J·s.
    pub const PLANCK_H: f64 = 6.62607015e-34;
}

/// Nuclear species of a target spin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Species {
    C13,
    H1,
    Si29,
    F19,
}

impl Species {
    pub fn gamma(self) -> f64 {
        match self {
            Species::C13 => constants::GAMMA_C13,
            Species::H1 => constants::GAMMA_H1,
            Species::Si29 => constants::GAMMA_SI29,
            Species::F19 => constants::GAMMA_F19,
        }
    }
}

impl std::str::FromStr for Species {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "c13" | "13c" => Ok(Species::C13),
            "h1" | "1h" => Ok(Species::H1),
            "si29" | "29si" => Ok(Species::Si29),
            "f19" | "19f" => Ok(Species::F19),
            other => Err(Error::InvalidArgument(format!("unknown species `{other}`"))),
        }
    }
}

/// Parameters of the secular Hamiltonian. Couplings in Hz, field in Tesla,
/// gyromagnetic ratios in Hz/T (signed).
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct HamiltonianParams {
    pub d_splitting_hz: f64,
    pub b_z_tesla: f64,
    pub gamma_sensor_hz_per_t: f64,
    pub gamma_memory_hz_per_t: f64,
    pub gamma_target_hz_per_t: f64,
    pub a_par_memory_hz: f64,
    pub a_par_targets_hz: Vec<f64>,
}

impl HamiltonianParams {
    pub fn validate(&self) -> Result<()> {
        if self.b_z_tesla < 0.0 {
            return Err(Error::InvalidArgument("b_z_tesla must be >= 0".into()));
        }
        Ok(())
    }

    /// Bare Larmor frequency of the targets, Hz.
    pub fn target_larmor_hz(&self) -> f64 {
        self.gamma_target_hz_per_t * self.b_z_tesla
    }

    /// Target transition frequency when the sensor occupies `m_s`, Hz.
    pub fn target_transition_hz(&self, target: usize, m_s: f64) -> f64 {
        self.target_larmor_hz() + self.a_par_targets_hz[target] * m_s
    }
}

impl Default for HamiltonianParams {
    fn default() -> Self {
        Self {
            d_splitting_hz: constants::NV_D_SPLITTING,
            b_z_tesla: 1.5289,
            gamma_sensor_hz_per_t: constants::GAMMA_ELECTRON,
            gamma_memory_hz_per_t: constants::GAMMA_N14,
            gamma_target_hz_per_t: constants::GAMMA_C13,
            a_par_memory_hz: -2.16e6,
            a_par_targets_hz: Vec::new(),
        }
    }
}

/// Build the composite system implied by the parameters:
/// sensor(3) [⊗ memory(2)] ⊗ target0(2) ⊗ target1(2) ⊗ …
pub fn standard_system(
    params: &HamiltonianParams,
    with_memory: bool,
) -> Result<Arc<CompositeSystem>> {
    let mut subs: Vec<(String, usize)> = vec![(SENSOR_LABEL.to_string(), 3)];
    if with_memory {
        subs.push((MEMORY_LABEL.to_string(), 2));
    }
    for i in 0..params.a_par_targets_hz.len() {
        subs.push((target_label(i), 2));
    }
    CompositeSystem::new(subs)
}

/// Memory-qubit Iz on the {m_I = 0, +1} subspace: diag(0, 1).
pub fn memory_iz() -> Array2<C64> {
    let mut m = Array2::from_elem((2, 2), C64::new(0.0, 0.0));
    m[(1, 1)] = C64::new(1.0, 0.0);
    m
}

/// Assemble the secular Hamiltonian of the combined system, in Hz.
/// Diagonal in the product basis and Hermitian by construction.
pub fn build_hamiltonian(
    params: &HamiltonianParams,
    system: &Arc<CompositeSystem>,
) -> Result<Operator> {
    params.validate()?;
    let sensor_dim = system.dim_of(SENSOR_LABEL)?;
    if sensor_dim != 3 {
        return Err(Error::DimensionMismatch(format!(
            "sensor must have dimension 3, got {sensor_dim}"
        )));
    }
    let has_memory = system.labels().any(|l| l == MEMORY_LABEL);
    let n_targets = params.a_par_targets_hz.len();
    for i in 0..n_targets {
        let label = target_label(i);
        let d = system.dim_of(&label)?;
        if d != 2 {
            return Err(Error::DimensionMismatch(format!(
                "target `{label}` must have dimension 2, got {d}"
            )));
        }
    }

    let b = params.b_z_tesla;
    let sz = spin::sz(3);
    let sz2 = sz.dot(&sz);

    let mut h = embed(&sz2, system, SENSOR_LABEL)?
        .scale(C64::new(params.d_splitting_hz, 0.0))
        .add(
            &embed(&sz, system, SENSOR_LABEL)?
                .scale(C64::new(params.gamma_sensor_hz_per_t * b, 0.0)),
        );

    let sz_full = embed(&sz, system, SENSOR_LABEL)?;

    if has_memory {
        let iz_m = embed(&memory_iz(), system, MEMORY_LABEL)?;
        h = h.add(&iz_m.scale(C64::new(params.gamma_memory_hz_per_t * b, 0.0)));
        h = h.add(
            &sz_full
                .matmul(&iz_m)
                .scale(C64::new(params.a_par_memory_hz, 0.0)),
        );
    }

    for (i, &a_par) in params.a_par_targets_hz.iter().enumerate() {
        let iz_t = embed(&spin::sz(2), system, &target_label(i))?;
        h = h.add(&iz_t.scale(C64::new(params.gamma_target_hz_per_t * b, 0.0)));
        h = h.add(&sz_full.matmul(&iz_t).scale(C64::new(a_par, 0.0)));
    }

    debug_assert!(h.is_hermitian(1e-12));
    Ok(h)
}

/// Angle/distance query for the point-dipole coupling.
#[derive(Debug, Clone, Copy)]
pub struct GeometryQuery {
    /// Angle to the NV symmetry axis, radians.
    pub theta: f64,
    /// Distance in meters.
    pub distance: f64,
    pub species: Species,
}

/// Point-dipole prefactor K = (μ₀/4π)·h·γ̃_e·γ̃_species, in Hz·m³.
pub fn dipolar_prefactor(species: Species) -> f64 {
    constants::MU0_OVER_4PI * constants::PLANCK_H * constants::GAMMA_ELECTRON * species.gamma()
}

/// Secular point-dipole coupling A∥ = K·(3cos²θ − 1)/d³, Hz (signed).
pub fn dipolar_coupling(q: &GeometryQuery) -> Result<f64> {
    if q.distance <= 0.0 {
        return Err(Error::InvalidArgument("distance must be > 0".into()));
    }
    let c = q.theta.cos();
    Ok(dipolar_prefactor(q.species) * (3.0 * c * c - 1.0) / q.distance.powi(3))
}

/// Largest distance at which |A∥| can still reach `a_par`; attained on the
/// NV axis where |3cos²θ − 1| = 2.
pub fn max_distance_for_coupling(a_par: f64, species: Species) -> Result<f64> {
    if a_par <= 0.0 {
        return Err(Error::InvalidArgument("coupling must be > 0".into()));
    }
    let k = dipolar_prefactor(species).abs();
    Ok((2.0 * k / a_par).cbrt())
}

/// Solve d(θ) with dipolar_coupling(θ, d) = a_par on the given θ grid.
/// Angles where the sign of (3cos²θ − 1) does not match sign(a_par/K) have
/// no solution and are omitted.
pub fn coupling_locus(
    a_par: f64,
    species: Species,
    theta_grid: &[f64],
) -> Result<Vec<(f64, f64)>> {
    if a_par == 0.0 {
        return Err(Error::InvalidArgument("coupling must be nonzero".into()));
    }
    let k = dipolar_prefactor(species);
    let mut out = Vec::new();
    for &theta in theta_grid {
        let c = theta.cos();
        let geom = 3.0 * c * c - 1.0;
        let ratio = k * geom / a_par;
        if ratio > 0.0 {
            out.push((theta, ratio.cbrt()));
        }
    }
    Ok(out)
}

/// Inputs for the perturbative memory-T₁ limit from transverse hyperfine
/// mixing: ε = (A⊥/E_eZ)², T₁ ≈ 1/(ε · projection rate).
#[derive(Debug, Clone, Copy)]
pub struct MixingEstimateParams {
    pub a_perp_hz: f64,
    pub sensor_zeeman_hz: f64,
    pub projection_rate_hz: f64,
}

pub fn memory_t1_limit(p: &MixingEstimateParams) -> Result<f64> {
    if p.sensor_zeeman_hz <= 0.0 || p.projection_rate_hz <= 0.0 {
        return Err(Error::InvalidArgument(
            "sensor Zeeman energy and projection rate must be > 0".into(),
        ));
    }
    let eps = (p.a_perp_hz / p.sensor_zeeman_hz).powi(2);
    Ok(1.0 / (eps * p.projection_rate_hz))
}
