//! Operator algebra on small labeled tensor-product spin systems.
//!
//! A [`CompositeSystem`] is an ordered list of labeled subsystems. Operators
//! and density matrices are dense complex matrices over the full product
//! space; Hamiltonians are stored in Hz (factors of 2π are applied inside
//! the propagators, not here).

use std::sync::Arc;

use ndarray::Array2;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::linalg;

/// Ordered tensor product of labeled subsystems.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositeSystem {
    subsystems: Vec<(String, usize)>,
}

impl CompositeSystem {
    pub fn new<I, S>(subsystems: I) -> Result<Arc<Self>>
    where
        I: IntoIterator<Item = (S, usize)>,
        S: Into<String>,
    {
        let subsystems: Vec<(String, usize)> =
            subsystems.into_iter().map(|(l, d)| (l.into(), d)).collect();
        if subsystems.is_empty() {
            return Err(Error::InvalidArgument("system has no subsystems".into()));
        }
        for (label, dim) in &subsystems {
            if *dim < 2 {
                return Err(Error::InvalidArgument(format!(
                    "subsystem `{label}` has dimension {dim}, need >= 2"
                )));
            }
        }
        for i in 0..subsystems.len() {
            for j in i + 1..subsystems.len() {
                if subsystems[i].0 == subsystems[j].0 {
                    return Err(Error::InvalidArgument(format!(
                        "duplicate subsystem label `{}`",
                        subsystems[i].0
                    )));
                }
            }
        }
        Ok(Arc::new(Self { subsystems }))
    }

    /// Total Hilbert-space dimension (product of subsystem dimensions).
    pub fn dim(&self) -> usize {
        self.subsystems.iter().map(|(_, d)| d).product()
    }

    pub fn len(&self) -> usize {
        self.subsystems.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subsystems.is_empty()
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.subsystems.iter().map(|(l, _)| l.as_str())
    }

    pub fn position(&self, label: &str) -> Result<usize> {
        self.subsystems
            .iter()
            .position(|(l, _)| l == label)
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    pub fn dim_of(&self, label: &str) -> Result<usize> {
        Ok(self.subsystems[self.position(label)?].1)
    }

    pub fn dims(&self) -> Vec<usize> {
        self.subsystems.iter().map(|(_, d)| *d).collect()
    }

    /// Decompose a flat basis index into per-subsystem indices.
    pub fn unravel(&self, mut index: usize) -> Vec<usize> {
        let dims = self.dims();
        let mut out = vec![0; dims.len()];
        for k in (0..dims.len()).rev() {
            out[k] = index % dims[k];
            index /= dims[k];
        }
        out
    }

    /// Flatten per-subsystem indices into a flat basis index.
    pub fn ravel(&self, indices: &[usize]) -> usize {
        let dims = self.dims();
        let mut idx = 0;
        for (k, &i) in indices.iter().enumerate() {
            idx = idx * dims[k] + i;
        }
        idx
    }
}

/// Dense complex operator over a [`CompositeSystem`].
///
/// Hamiltonians carry frequency units (Hz); Lindblad jump operators carry
/// Hz^(1/2) with the rate folded into the amplitude.
#[derive(Debug, Clone)]
pub struct Operator {
    pub system: Arc<CompositeSystem>,
    pub matrix: Array2<C64>,
}

impl Operator {
    pub fn new(system: Arc<CompositeSystem>, matrix: Array2<C64>) -> Result<Self> {
        let d = system.dim();
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(Error::DimensionMismatch(format!(
                "matrix is {}x{}, system dimension is {d}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        Ok(Self { system, matrix })
    }

    pub fn zeros(system: Arc<CompositeSystem>) -> Self {
        let d = system.dim();
        Self {
            system,
            matrix: Array2::from_elem((d, d), C64::new(0.0, 0.0)),
        }
    }

    pub fn identity(system: Arc<CompositeSystem>) -> Self {
        let d = system.dim();
        Self {
            system,
            matrix: Array2::from_shape_fn((d, d), |(i, j)| {
                if i == j {
                    C64::new(1.0, 0.0)
                } else {
                    C64::new(0.0, 0.0)
                }
            }),
        }
    }

    pub fn dim(&self) -> usize {
        self.system.dim()
    }

    pub fn dagger(&self) -> Self {
        let d = self.dim();
        Self {
            system: self.system.clone(),
            matrix: Array2::from_shape_fn((d, d), |(i, j)| self.matrix[(j, i)].conj()),
        }
    }

    pub fn matmul(&self, other: &Self) -> Self {
        Self {
            system: self.system.clone(),
            matrix: self.matrix.dot(&other.matrix),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self {
            system: self.system.clone(),
            matrix: &self.matrix + &other.matrix,
        }
    }

    pub fn scale(&self, factor: C64) -> Self {
        Self {
            system: self.system.clone(),
            matrix: self.matrix.mapv(|x| x * factor),
        }
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim()).map(|i| self.matrix[(i, i)]).sum()
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        let scale = 1.0 + linalg::one_norm(&self.matrix);
        let d = self.dim();
        for i in 0..d {
            for j in i..d {
                if (self.matrix[(i, j)] - self.matrix[(j, i)].conj()).norm() > tol * scale {
                    return false;
                }
            }
        }
        true
    }
}

/// Embed a single-subsystem operator into the full product space:
/// `I ⊗ … ⊗ local ⊗ … ⊗ I` in subsystem order.
pub fn embed(
    local: &Array2<C64>,
    system: &Arc<CompositeSystem>,
    label: &str,
) -> Result<Operator> {
    let pos = system.position(label)?;
    let dsub = system.dim_of(label)?;
    if local.nrows() != dsub || local.ncols() != dsub {
        return Err(Error::DimensionMismatch(format!(
            "local operator is {}x{}, subsystem `{label}` has dimension {dsub}",
            local.nrows(),
            local.ncols()
        )));
    }
    let d = system.dim();
    let mut out = Array2::from_elem((d, d), C64::new(0.0, 0.0));
    for row in 0..d {
        let ri = system.unravel(row);
        for col in 0..d {
            let ci = system.unravel(col);
            let mut same_elsewhere = true;
            for k in 0..ri.len() {
                if k != pos && ri[k] != ci[k] {
                    same_elsewhere = false;
                    break;
                }
            }
            if same_elsewhere {
                out[(row, col)] = local[(ri[pos], ci[pos])];
            }
        }
    }
    Operator::new(system.clone(), out)
}

/// Dense density matrix over a [`CompositeSystem`].
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    pub system: Arc<CompositeSystem>,
    pub matrix: Array2<C64>,
}

impl DensityMatrix {
    pub fn new(system: Arc<CompositeSystem>, matrix: Array2<C64>) -> Result<Self> {
        let d = system.dim();
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(Error::DimensionMismatch(format!(
                "matrix is {}x{}, system dimension is {d}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        Ok(Self { system, matrix })
    }

    /// Pure state from a normalized ket.
    pub fn from_ket(system: Arc<CompositeSystem>, ket: &[C64]) -> Result<Self> {
        let d = system.dim();
        if ket.len() != d {
            return Err(Error::DimensionMismatch(format!(
                "ket length {} vs system dimension {d}",
                ket.len()
            )));
        }
        let norm: f64 = ket.iter().map(|c| c.norm_sqr()).sum();
        let matrix = Array2::from_shape_fn((d, d), |(i, j)| ket[i] * ket[j].conj() / norm);
        Ok(Self { system, matrix })
    }

    /// Product state from per-subsystem kets (given in subsystem order).
    pub fn product_state(system: Arc<CompositeSystem>, kets: &[Vec<C64>]) -> Result<Self> {
        if kets.len() != system.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} kets for {} subsystems",
                kets.len(),
                system.len()
            )));
        }
        let dims = system.dims();
        for (k, ket) in kets.iter().enumerate() {
            if ket.len() != dims[k] {
                return Err(Error::DimensionMismatch(format!(
                    "ket {k} has length {}, subsystem dimension is {}",
                    ket.len(),
                    dims[k]
                )));
            }
        }
        let d = system.dim();
        let mut full = Vec::with_capacity(d);
        for idx in 0..d {
            let ii = system.unravel(idx);
            let mut amp = C64::new(1.0, 0.0);
            for (k, &i) in ii.iter().enumerate() {
                amp *= kets[k][i];
            }
            full.push(amp);
        }
        Self::from_ket(system, &full)
    }

    /// Maximally mixed state.
    pub fn maximally_mixed(system: Arc<CompositeSystem>) -> Self {
        let d = system.dim();
        let matrix = Array2::from_shape_fn((d, d), |(i, j)| {
            if i == j {
                C64::new(1.0 / d as f64, 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        });
        Self { system, matrix }
    }

    pub fn dim(&self) -> usize {
        self.system.dim()
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim()).map(|i| self.matrix[(i, i)]).sum()
    }

    /// Check Hermiticity (1e-10), unit trace (1e-10) and spectrum >= -1e-10.
    pub fn validate(&self) -> Result<()> {
        let op = Operator {
            system: self.system.clone(),
            matrix: self.matrix.clone(),
        };
        if !op.is_hermitian(1e-10) {
            return Err(Error::InvalidState("density matrix not Hermitian".into()));
        }
        let tr = self.trace();
        if (tr - C64::new(1.0, 0.0)).norm() > 1e-10 {
            return Err(Error::InvalidState(format!(
                "trace is {tr}, expected 1 within 1e-10"
            )));
        }
        let ev = linalg::hermitian_eigenvalues(&self.matrix);
        if let Some(min) = ev.first() {
            if *min < -1e-10 {
                return Err(Error::InvalidState(format!(
                    "negative eigenvalue {min:.3e}"
                )));
            }
        }
        Ok(())
    }
}

/// Reduced state on the kept subsystems; trace is preserved.
pub fn partial_trace(state: &DensityMatrix, keep: &[&str]) -> Result<DensityMatrix> {
    if keep.is_empty() {
        return Err(Error::InvalidArgument("empty keep set".into()));
    }
    let sys = &state.system;
    let mut keep_pos = Vec::with_capacity(keep.len());
    for label in keep {
        keep_pos.push(sys.position(label)?);
    }
    // preserve original subsystem order among the kept ones
    keep_pos.sort_unstable();
    keep_pos.dedup();

    let dims = sys.dims();
    let kept: Vec<(String, usize)> = keep_pos
        .iter()
        .map(|&p| (sys.subsystems[p].0.clone(), dims[p]))
        .collect();
    let reduced_sys = CompositeSystem::new(kept)?;
    let rd = reduced_sys.dim();
    let traced_pos: Vec<usize> = (0..dims.len()).filter(|p| !keep_pos.contains(p)).collect();

    let mut out = Array2::from_elem((rd, rd), C64::new(0.0, 0.0));
    let trace_dim: usize = traced_pos.iter().map(|&p| dims[p]).product();
    for r in 0..rd {
        let rk = reduced_sys.unravel(r);
        for c in 0..rd {
            let ck = reduced_sys.unravel(c);
            let mut acc = C64::new(0.0, 0.0);
            for t in 0..trace_dim {
                // assemble full indices
                let mut full_r = vec![0usize; dims.len()];
                let mut full_c = vec![0usize; dims.len()];
                for (kk, &p) in keep_pos.iter().enumerate() {
                    full_r[p] = rk[kk];
                    full_c[p] = ck[kk];
                }
                let mut tt = t;
                for &p in traced_pos.iter().rev() {
                    let i = tt % dims[p];
                    tt /= dims[p];
                    full_r[p] = i;
                    full_c[p] = i;
                }
                acc += state.matrix[(sys.ravel(&full_r), sys.ravel(&full_c))];
            }
            out[(r, c)] = acc;
        }
    }
    DensityMatrix::new(reduced_sys, out)
}

/// `Tr(ρ·O)`.
pub fn expectation(state: &DensityMatrix, op: &Operator) -> Result<C64> {
    if state.dim() != op.dim() {
        return Err(Error::DimensionMismatch(format!(
            "state dimension {} vs operator dimension {}",
            state.dim(),
            op.dim()
        )));
    }
    let d = state.dim();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..d {
        for k in 0..d {
            acc += state.matrix[(i, k)] * op.matrix[(k, i)];
        }
    }
    Ok(acc)
}

/// Spin operators on a (2s+1)-dimensional space, basis ordered by descending
/// magnetic quantum number m = s, s-1, …, -s.
pub mod spin {
    use super::*;

    /// m value of basis index `i` for dimension `dim`.
    pub fn m_of_index(dim: usize, i: usize) -> f64 {
        let s = (dim as f64 - 1.0) / 2.0;
        s - i as f64
    }

    pub fn sz(dim: usize) -> Array2<C64> {
        Array2::from_shape_fn((dim, dim), |(i, j)| {
            if i == j {
                C64::new(m_of_index(dim, i), 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        })
    }

    pub fn sx(dim: usize) -> Array2<C64> {
        let sp = splus(dim);
        Array2::from_shape_fn((dim, dim), |(i, j)| {
            (sp[(i, j)] + sp[(j, i)].conj()) * C64::new(0.5, 0.0)
        })
    }

    pub fn sy(dim: usize) -> Array2<C64> {
        let sp = splus(dim);
        Array2::from_shape_fn((dim, dim), |(i, j)| {
            (sp[(i, j)] - sp[(j, i)].conj()) * C64::new(0.0, -0.5)
        })
    }

    /// Raising operator S+ (in the descending-m basis it connects i+1 -> i).
    pub fn splus(dim: usize) -> Array2<C64> {
        let s = (dim as f64 - 1.0) / 2.0;
        Array2::from_shape_fn((dim, dim), |(i, j)| {
            if j == i + 1 {
                let m = m_of_index(dim, j);
                C64::new((s * (s + 1.0) - m * (m + 1.0)).sqrt(), 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        })
    }

    /// Matrix unit |a><b|.
    pub fn ketbra(dim: usize, a: usize, b: usize) -> Array2<C64> {
        let mut out = Array2::from_elem((dim, dim), C64::new(0.0, 0.0));
        out[(a, b)] = C64::new(1.0, 0.0);
        out
    }

    /// Projector |a><a|.
    pub fn projector(dim: usize, a: usize) -> Array2<C64> {
        ketbra(dim, a, a)
    }
}
