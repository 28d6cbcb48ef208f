//! Vectorized Lindblad master equation.
//!
//! `vec(ρ) = Σ ρ_ij |i⟩|j⟩`, i.e. ρ_ij sits at index `i·dim + j`. With that
//! convention `vec(Hρ) = (H⊗1)vec(ρ)` and `vec(ρH) = (1⊗Hᵀ)vec(ρ)`.

use ndarray::{Array1, Array2};
use ndarray_linalg::{Eig, Factorize, Solve};

use crate::{linalg, CMatrix, CVector, Error, Result, C64};

/// Positivity slack for a valid density matrix.
pub const POSITIVITY_SLACK: f64 = 1e-8;
const HERMITICITY_TOL: f64 = 1e-10;
const TRACE_TOL: f64 = 1e-10;
/// Bordered systems with a smaller reciprocal condition number are treated
/// as having a degenerate null space.
const DEGENERACY_RCOND: f64 = 1e-13;
/// Absolute residual bound for `steady_state`, scaled by max |D_ij| above 1.
pub const STEADY_RESIDUAL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(CMatrix);

impl DensityMatrix {
    pub fn new(m: CMatrix) -> Result<Self> {
        let n = m.nrows();
        if m.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, actual: m.ncols() });
        }
        let herm = linalg::hermiticity_error(&m);
        if herm > HERMITICITY_TOL {
            return Err(Error::InvalidParameter(format!("density matrix not Hermitian ({herm:.2e})")));
        }
        let tr = linalg::trace(&m);
        if (tr - C64::new(1.0, 0.0)).norm() > TRACE_TOL {
            return Err(Error::InvalidParameter(format!("density matrix trace {tr}")));
        }
        let min_eig = linalg::hermitian_eigenvalues(&m)?[0];
        if min_eig < -POSITIVITY_SLACK {
            return Err(Error::InvalidParameter(format!("density matrix eigenvalue {min_eig:.3e} < 0")));
        }
        Ok(Self(m))
    }

    pub fn from_pure(psi: &CVector) -> Result<Self> {
        let nrm = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if nrm == 0.0 {
            return Err(Error::InvalidParameter("zero state vector".into()));
        }
        let n = psi.len();
        let m = Array2::from_shape_fn((n, n), |(i, j)| psi[i] * psi[j].conj() / (nrm * nrm));
        Ok(Self(m))
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    /// tr(O ρ).
    pub fn expect(&self, op: &CMatrix) -> C64 {
        let n = self.dim();
        let mut s = C64::new(0.0, 0.0);
        for i in 0..n {
            for k in 0..n {
                s += op[[i, k]] * self.0[[k, i]];
            }
        }
        s
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(linalg::hermitian_eigenvalues(&self.0)?[0])
    }

    pub fn populations(&self) -> Vec<f64> {
        self.0.diag().iter().map(|z| z.re).collect()
    }
}

#[derive(Debug, Clone)]
pub struct SuperOperator(CMatrix);

impl SuperOperator {
    pub fn from_matrix(m: CMatrix) -> Result<Self> {
        let n = m.nrows();
        let dim = (n as f64).sqrt().round() as usize;
        if m.ncols() != n || dim * dim != n {
            return Err(Error::DimensionMismatch { expected: dim * dim, actual: m.ncols() });
        }
        Ok(Self(m))
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    /// Hilbert-space dimension the superoperator acts on.
    pub fn dim(&self) -> usize {
        (self.0.nrows() as f64).sqrt().round() as usize
    }

    pub fn apply(&self, v: &CVector) -> CVector {
        self.0.dot(v)
    }
}

impl std::ops::Add for SuperOperator {
    type Output = SuperOperator;

    fn add(self, rhs: SuperOperator) -> SuperOperator {
        SuperOperator(self.0 + rhs.0)
    }
}

/// Jump operator with its rate absorbed: L = √rate · jump.
#[derive(Debug, Clone)]
pub struct LindbladOp(CMatrix);

impl LindbladOp {
    pub fn new(rate: f64, jump: &CMatrix) -> Self {
        Self(jump.mapv(|z| z * rate.sqrt()))
    }

    pub fn from_matrix(l: CMatrix) -> Self {
        Self(l)
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }
}

pub fn vectorize(m: &CMatrix) -> CVector {
    Array1::from_iter(m.iter().copied())
}

pub fn devectorize(v: &CVector, dim: usize) -> Result<CMatrix> {
    if v.len() != dim * dim {
        return Err(Error::DimensionMismatch { expected: dim * dim, actual: v.len() });
    }
    Ok(Array2::from_shape_vec((dim, dim), v.to_vec()).expect("length checked"))
}

/// u[H] = −i(H⊗1 − 1⊗Hᵀ).
pub fn build_hamiltonian_part(h: &CMatrix) -> Result<SuperOperator> {
    let n = h.nrows();
    if h.ncols() != n {
        return Err(Error::DimensionMismatch { expected: n, actual: h.ncols() });
    }
    let eye = linalg::identity(n);
    let m = linalg::kron(h.view(), eye.view()) - linalg::kron(eye.view(), h.t());
    Ok(SuperOperator(m.mapv(|z| z * C64::new(0.0, -1.0))))
}

/// ℓ[L] = L⊗L* − ½(L†L)⊗1 − ½·1⊗(L†L)ᵀ.
pub fn build_dissipator(l: &LindbladOp) -> SuperOperator {
    let l = l.matrix();
    let n = l.nrows();
    let eye = linalg::identity(n);
    let ldl = linalg::dagger(l).dot(l);
    let mut m = linalg::kron(l.view(), l.mapv(|z| z.conj()).view());
    m.scaled_add(C64::new(-0.5, 0.0), &linalg::kron(ldl.view(), eye.view()));
    m.scaled_add(C64::new(-0.5, 0.0), &linalg::kron(eye.view(), ldl.t()));
    SuperOperator(m)
}

pub fn build_liouvillian(h: &CMatrix, lindblads: &[LindbladOp]) -> Result<SuperOperator> {
    let mut d = build_hamiltonian_part(h)?;
    for l in lindblads {
        if l.matrix().dim() != h.dim() {
            return Err(Error::DimensionMismatch { expected: h.nrows(), actual: l.matrix().nrows() });
        }
        d = d + build_dissipator(l);
    }
    Ok(d)
}

fn trace_functional(dim: usize) -> CVector {
    let mut t = Array1::zeros(dim * dim);
    for i in 0..dim {
        t[i * dim + i] = C64::new(1.0, 0.0);
    }
    t
}

/// Unique steady state via a bordered solve: the first row of D is replaced
/// by the trace functional, and the residual is checked against the
/// unmodified D.
pub fn steady_state(d: &SuperOperator) -> Result<DensityMatrix> {
    let dim = d.dim();
    let n = dim * dim;
    let scale = linalg::max_abs(d.matrix()).max(1.0);
    let mut m = d.matrix().clone();
    m.row_mut(0).assign(&trace_functional(dim).mapv(|z| z * scale));
    let mut rhs = Array1::zeros(n);
    rhs[0] = C64::new(scale, 0.0);

    let lu = m.factorize()?;
    let rcond = {
        use ndarray_linalg::ReciprocalConditionNum;
        lu.rcond()?
    };
    if rcond < DEGENERACY_RCOND {
        return Err(Error::DegenerateSteadyState { rcond });
    }
    let mut v = lu.solve(&rhs)?;
    // One step of iterative refinement.
    let r = &rhs - &m.dot(&v);
    v += &lu.solve(&r)?;

    let rho = devectorize(&v, dim)?;
    let rho = (&rho + &linalg::dagger(&rho)).mapv(|z| z * 0.5);
    let tr = linalg::trace(&rho);
    let rho = rho.mapv(|z| z / tr);

    let residual = residual_norm(d, &rho);
    if residual > STEADY_RESIDUAL_TOL * scale {
        return Err(Error::SteadyStateResidual { residual });
    }
    DensityMatrix::new(rho)
}

/// ‖D vec(ρ)‖₂.
pub fn residual_norm(d: &SuperOperator, rho: &CMatrix) -> f64 {
    d.apply(&vectorize(rho)).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Eigenvalues of D sorted by increasing modulus.
pub fn spectrum(d: &SuperOperator) -> Result<Vec<C64>> {
    let (w, _) = d.matrix().eig()?;
    let mut w = w.to_vec();
    w.sort_by(|a, b| a.norm().total_cmp(&b.norm()));
    Ok(w)
}

/// Spectral summary used for uniqueness and relaxation checks.
#[derive(Debug, Clone, Copy)]
pub struct SpectralGap {
    /// Smallest |λ| (ideally 0).
    pub null: f64,
    /// Second-smallest |λ|.
    pub gap: f64,
    /// max Re λ.
    pub abscissa: f64,
    /// Slowest nonzero decay rate, min over λ ≠ 0 of −Re λ.
    pub slowest_decay: f64,
}

pub fn spectral_gap(d: &SuperOperator) -> Result<SpectralGap> {
    let w = spectrum(d)?;
    let slowest_decay = w[1..].iter().map(|z| -z.re).fold(f64::INFINITY, f64::min);
    Ok(SpectralGap {
        null: w[0].norm(),
        gap: w[1].norm(),
        abscissa: w.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max),
        slowest_decay,
    })
}

/// Null-space cross-check: eigenvector of D with the smallest |λ|.
pub fn steady_state_eigen(d: &SuperOperator) -> Result<DensityMatrix> {
    let (w, v) = d.matrix().eig()?;
    let k = (0..w.len()).min_by(|&a, &b| w[a].norm().total_cmp(&w[b].norm())).expect("non-empty spectrum");
    let rho = devectorize(&v.column(k).to_owned(), d.dim())?;
    let tr = linalg::trace(&rho);
    let rho = rho.mapv(|z| z / tr);
    let rho = (&rho + &linalg::dagger(&rho)).mapv(|z| z * 0.5);
    DensityMatrix::new(rho)
}

/// exp(D·dt), computed once and reused for uniform-grid evolution.
#[derive(Debug, Clone)]
pub struct Propagator {
    step: CMatrix,
    dt: f64,
}

impl Propagator {
    pub fn new(d: &SuperOperator, dt: f64) -> Result<Self> {
        if !(dt.is_finite() && dt >= 0.0) {
            return Err(Error::InvalidParameter(format!("propagation time must be finite and >= 0, got {dt}")));
        }
        let step = linalg::expm(&d.matrix().mapv(|z| z * dt))?;
        Ok(Self { step, dt })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.step
    }

    pub fn apply(&self, v: &CVector) -> CVector {
        self.step.dot(v)
    }
}

pub fn propagator(d: &SuperOperator, dt: f64) -> Result<Propagator> {
    Propagator::new(d, dt)
}

/// ρ(t) = exp(D t)·vec(ρ₀).
pub fn propagate(d: &SuperOperator, rho0: &DensityMatrix, t: f64) -> Result<DensityMatrix> {
    let p = Propagator::new(d, t)?;
    let v = p.apply(&vectorize(rho0.matrix()));
    DensityMatrix::new(devectorize(&v, rho0.dim())?)
}
