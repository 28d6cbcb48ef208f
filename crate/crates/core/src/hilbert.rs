//! Truncated emitter-cavity Hilbert space, bare and dressed bases, ladder
//! operators and Jaynes-Cummings Hamiltonians.
//!
//! Basis ordering is interleaved by rung:
//! `[|g,0⟩, |g,1⟩, |e,0⟩, |g,2⟩, |e,1⟩, …, |g,n_max⟩, |e,n_max−1⟩]`,
//! so every rung n ≥ 1 occupies the contiguous pair `(2n−1, 2n)`.
//! Energies are measured from the bare emitter (ω₀ = 0).

use ndarray::Array2;

use crate::liouvillian::{build_liouvillian, LindbladOp, SuperOperator};
use crate::{linalg, CMatrix, Error, Result, C64};

const SQRT2: f64 = std::f64::consts::SQRT_2;

/// Coupling and loss rates, all angular frequencies in rad/ns.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateSet {
    g: f64,
    kappa: f64,
    gamma: f64,
}

impl RateSet {
    pub fn new(g: f64, kappa: f64, gamma: f64) -> Result<Self> {
        for (name, v) in [("g", g), ("kappa", kappa), ("gamma", gamma)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be finite and > 0, got {v}")));
            }
        }
        Ok(Self { g, kappa, gamma })
    }

    pub fn from_ratios(g: f64, g_over_kappa: f64, g_over_gamma: f64) -> Result<Self> {
        Self::new(g, g / g_over_kappa, g / g_over_gamma)
    }

    pub fn g(&self) -> f64 {
        self.g
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// C = 2g²/(κγ).
    pub fn cooperativity(&self) -> f64 {
        2.0 * self.g * self.g / (self.kappa * self.gamma)
    }

    /// Fraction of emitter decay funnelled into the cavity, 2C/(2C+1).
    pub fn beta(&self) -> f64 {
        let c = self.cooperativity();
        2.0 * c / (2.0 * c + 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Atom {
    Ground,
    Excited,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FockBasis {
    n_max: usize,
}

impl FockBasis {
    pub fn new(n_max: usize) -> Result<Self> {
        if n_max < 1 {
            return Err(Error::InvalidParameter("n_max must be at least 1".into()));
        }
        Ok(Self { n_max })
    }

    pub fn from_dim(dim: usize) -> Result<Self> {
        if dim < 3 || dim.is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!("{dim} is not a valid basis dimension")));
        }
        Self::new((dim - 1) / 2)
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn dim(&self) -> usize {
        2 * self.n_max + 1
    }

    pub fn index(&self, atom: Atom, photons: usize) -> Option<usize> {
        match atom {
            Atom::Ground if photons == 0 => Some(0),
            Atom::Ground if photons <= self.n_max => Some(2 * photons - 1),
            Atom::Excited if photons < self.n_max => Some(2 * photons + 2),
            _ => None,
        }
    }

    /// (atom, photon number) of basis index `i`.
    pub fn state(&self, i: usize) -> (Atom, usize) {
        assert!(i < self.dim(), "basis index {i} out of range");
        if i == 0 {
            (Atom::Ground, 0)
        } else if i % 2 == 1 {
            (Atom::Ground, i.div_ceil(2))
        } else {
            (Atom::Excited, i / 2 - 1)
        }
    }

    /// Photon number of every basis state, in basis order.
    pub fn photon_numbers(&self) -> Vec<usize> {
        (0..self.dim()).map(|i| self.state(i).1).collect()
    }

    /// Total excitation number (rung) of basis index `i`.
    pub fn rung(&self, i: usize) -> usize {
        i.div_ceil(2)
    }
}

/// Cavity and laser detunings from the bare emitter (rad/ns).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetuningSpec {
    pub delta_c: f64,
    pub delta_l: f64,
}

impl DetuningSpec {
    pub fn new(delta_c: f64, delta_l: f64) -> Result<Self> {
        if !(delta_c.is_finite() && delta_l.is_finite()) {
            return Err(Error::InvalidParameter("detunings must be finite".into()));
        }
        Ok(Self { delta_c, delta_l })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Branch {
    Plus,
    Minus,
}

impl Branch {
    pub fn sign(self) -> f64 {
        match self {
            Branch::Plus => 1.0,
            Branch::Minus => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DressedLevel {
    pub n: usize,
    pub branch: Branch,
}

impl DressedLevel {
    pub fn new(n: usize, branch: Branch) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("dressed levels start at rung 1".into()));
        }
        Ok(Self { n, branch })
    }

    /// Column of this level in the dressed ordering `[|0⟩, |1+⟩, |1−⟩, |2+⟩, …]`.
    pub fn index(&self) -> usize {
        match self.branch {
            Branch::Plus => 2 * self.n - 1,
            Branch::Minus => 2 * self.n,
        }
    }
}

fn c(x: f64) -> C64 {
    C64::new(x, 0.0)
}

pub fn build_annihilation(basis: &FockBasis) -> CMatrix {
    let mut a = Array2::zeros((basis.dim(), basis.dim()));
    for j in 0..basis.dim() {
        let (atom, n) = basis.state(j);
        if n == 0 {
            continue;
        }
        let i = basis.index(atom, n - 1).expect("lower photon state is always retained");
        a[[i, j]] = c((n as f64).sqrt());
    }
    a
}

pub fn build_sigma_minus(basis: &FockBasis) -> CMatrix {
    let mut s = Array2::zeros((basis.dim(), basis.dim()));
    for n in 0..basis.n_max() {
        let e = basis.index(Atom::Excited, n).unwrap();
        let g = basis.index(Atom::Ground, n).unwrap();
        s[[g, e]] = c(1.0);
    }
    s
}

/// Diagonal a†a.
pub fn build_number(basis: &FockBasis) -> CMatrix {
    let mut m = Array2::zeros((basis.dim(), basis.dim()));
    for (i, n) in basis.photon_numbers().into_iter().enumerate() {
        m[[i, i]] = c(n as f64);
    }
    m
}

/// |e⟩⟨e| ⊗ 1.
pub fn build_excited_projector(basis: &FockBasis) -> CMatrix {
    let mut m = Array2::zeros((basis.dim(), basis.dim()));
    for i in 0..basis.dim() {
        if basis.state(i).0 == Atom::Excited {
            m[[i, i]] = c(1.0);
        }
    }
    m
}

/// Undriven Hamiltonian with blocks `[[nΔ_C, √n g], [√n g, (n−1)Δ_C]]`
/// on `(|g,n⟩, |e,n−1⟩)`.
pub fn build_h_free(basis: &FockBasis, rates: &RateSet, delta_c: f64) -> CMatrix {
    let mut h = Array2::zeros((basis.dim(), basis.dim()));
    for n in 1..=basis.n_max() {
        let (i, j) = (2 * n - 1, 2 * n);
        let nf = n as f64;
        h[[i, i]] = c(nf * delta_c);
        h[[j, j]] = c((nf - 1.0) * delta_c);
        h[[i, j]] = c(nf.sqrt() * rates.g());
        h[[j, i]] = h[[i, j]];
    }
    h
}

/// Frame rotating at the laser frequency:
/// `H = Ω(a+a†) + (Δ_C−Δ_L)a†a − Δ_L|e⟩⟨e| + g(σ⁻a† + σ⁺a)`.
pub fn build_h_rotating(basis: &FockBasis, rates: &RateSet, det: DetuningSpec, omega: f64) -> Result<CMatrix> {
    if !(omega.is_finite() && omega >= 0.0) {
        return Err(Error::InvalidParameter(format!("drive amplitude must be finite and >= 0, got {omega}")));
    }
    let a = build_annihilation(basis);
    let sm = build_sigma_minus(basis);
    Ok(rotating_from_ops(&a, &sm, rates, det, omega))
}

fn rotating_from_ops(a: &CMatrix, sm: &CMatrix, rates: &RateSet, det: DetuningSpec, omega: f64) -> CMatrix {
    let ad = linalg::dagger(a);
    let sp = linalg::dagger(sm);
    let num = ad.dot(a);
    let ee = sp.dot(sm);
    let mut h = (a + &ad).mapv(|z| z * omega);
    h.scaled_add(c(det.delta_c - det.delta_l), &num);
    h.scaled_add(c(-det.delta_l), &ee);
    // σ⁻a† would drop the top-rung element, so build the coupling as X + X†.
    let x = sp.dot(a);
    h.scaled_add(c(rates.g()), &(&x + &linalg::dagger(&x)));
    h
}

/// Ẽ_n^± = (n − ½)Δ_C ± √(Δ_C²/4 + n g²).
pub fn dressed_energy(level: DressedLevel, rates: &RateSet, delta_c: f64) -> f64 {
    let n = level.n as f64;
    if delta_c == 0.0 {
        return level.branch.sign() * n.sqrt() * rates.g();
    }
    (n - 0.5) * delta_c + level.branch.sign() * (delta_c * delta_c / 4.0 + n * rates.g() * rates.g()).sqrt()
}

/// R_n^(s,p) = (E_{n+1}^s − E_n^p)/g on resonance. For n = 0 the lower
/// level is the ground state and `p` is ignored.
pub fn anharmonicity(n: usize, s: Branch, p: Branch, rates: &RateSet) -> f64 {
    let e = |m: usize, b: Branch| {
        if m == 0 {
            0.0
        } else {
            dressed_energy(DressedLevel { n: m, branch: b }, rates, 0.0)
        }
    };
    (e(n + 1, s) - e(n, p)) / rates.g()
}

/// T_n^± = (√(n+1) ± √n)/2.
pub fn t_coefficient(n: usize, branch: Branch) -> f64 {
    let n = n as f64;
    ((n + 1.0).sqrt() + branch.sign() * n.sqrt()) / 2.0
}

/// (T₁⁻/T₁⁺)²: |1+⟩↔|2−⟩ against |1+⟩↔|2+⟩ squared matrix elements.
pub fn matrix_element_ratio() -> f64 {
    (t_coefficient(1, Branch::Minus) / t_coefficient(1, Branch::Plus)).powi(2)
}

/// Unitary whose columns are the eigenstates of `build_h_free` in the
/// dressed ordering `[|0⟩, |1+⟩, |1−⟩, …]`. At Δ_C = 0 these are
/// |n±⟩ = (|g,n⟩ ± |e,n−1⟩)/√2.
pub fn dressed_transform(basis: &FockBasis, rates: &RateSet, delta_c: f64) -> CMatrix {
    let mut u = Array2::zeros((basis.dim(), basis.dim()));
    u[[0, 0]] = c(1.0);
    for n in 1..=basis.n_max() {
        let theta = 0.5 * ((n as f64).sqrt() * rates.g()).atan2(delta_c / 2.0);
        let (s, co) = theta.sin_cos();
        let (g, e) = (2 * n - 1, 2 * n);
        u[[g, g]] = c(co);
        u[[e, g]] = c(s);
        u[[g, e]] = c(s);
        u[[e, e]] = c(-co);
    }
    u
}

/// Annihilation operator written directly in the resonant dressed basis:
/// ⟨0|a|1±⟩ = 1/√2 and rung blocks `[[T_n⁺, T_n⁻], [T_n⁻, T_n⁺]]`.
pub fn annihilation_dressed(basis: &FockBasis) -> CMatrix {
    let mut a = Array2::zeros((basis.dim(), basis.dim()));
    a[[0, 1]] = c(1.0 / SQRT2);
    a[[0, 2]] = c(1.0 / SQRT2);
    for n in 1..basis.n_max() {
        let (tp, tm) = (t_coefficient(n, Branch::Plus), t_coefficient(n, Branch::Minus));
        let (p, m) = (2 * n - 1, 2 * n);
        let (pp, mm) = (2 * n + 1, 2 * n + 2);
        a[[p, pp]] = c(tp);
        a[[p, mm]] = c(tm);
        a[[m, pp]] = c(tm);
        a[[m, mm]] = c(tp);
    }
    a
}

/// σ⁻ in the resonant dressed basis.
pub fn sigma_minus_dressed(basis: &FockBasis) -> CMatrix {
    let mut s = Array2::zeros((basis.dim(), basis.dim()));
    s[[0, 1]] = c(1.0 / SQRT2);
    s[[0, 2]] = c(-1.0 / SQRT2);
    for n in 1..basis.n_max() {
        let (p, m) = (2 * n - 1, 2 * n);
        let (pp, mm) = (2 * n + 1, 2 * n + 2);
        s[[p, pp]] = c(0.5);
        s[[p, mm]] = c(-0.5);
        s[[m, pp]] = c(0.5);
        s[[m, mm]] = c(-0.5);
    }
    s
}

/// Resonant-cavity rotating-frame Hamiltonian assembled in the dressed basis:
/// `Σ Δ_n^± |n±⟩⟨n±| + Ω(a + a†)` with `Δ_n^± = ±√n g − nΔ_L`.
pub fn build_h_rotating_dressed(basis: &FockBasis, rates: &RateSet, delta_l: f64, omega: f64) -> CMatrix {
    let a = annihilation_dressed(basis);
    let mut h = (&a + &linalg::dagger(&a)).mapv(|z| z * omega);
    for n in 1..=basis.n_max() {
        let nf = n as f64;
        for b in [Branch::Plus, Branch::Minus] {
            let i = DressedLevel { n, branch: b }.index();
            h[[i, i]] += c(b.sign() * nf.sqrt() * rates.g() - nf * delta_l);
        }
    }
    h
}

/// A truncated emitter-cavity system with its operators precomputed.
#[derive(Debug, Clone)]
pub struct JcSystem {
    basis: FockBasis,
    rates: RateSet,
    a: CMatrix,
    sigma_minus: CMatrix,
    number: CMatrix,
}

impl JcSystem {
    pub fn new(n_max: usize, rates: RateSet) -> Result<Self> {
        let basis = FockBasis::new(n_max)?;
        let a = build_annihilation(&basis);
        Ok(Self { basis, rates, number: build_number(&basis), sigma_minus: build_sigma_minus(&basis), a })
    }

    pub fn basis(&self) -> &FockBasis {
        &self.basis
    }

    pub fn rates(&self) -> &RateSet {
        &self.rates
    }

    pub fn a(&self) -> &CMatrix {
        &self.a
    }

    pub fn sigma_minus(&self) -> &CMatrix {
        &self.sigma_minus
    }

    pub fn number(&self) -> &CMatrix {
        &self.number
    }

    pub fn hamiltonian(&self, det: DetuningSpec, omega: f64) -> Result<CMatrix> {
        if !(omega.is_finite() && omega >= 0.0) {
            return Err(Error::InvalidParameter(format!("drive amplitude must be finite and >= 0, got {omega}")));
        }
        Ok(rotating_from_ops(&self.a, &self.sigma_minus, &self.rates, det, omega))
    }

    /// L_κ = √κ a and L_γ = √γ σ⁻.
    pub fn lindblads(&self) -> [LindbladOp; 2] {
        [LindbladOp::new(self.rates.kappa(), &self.a), LindbladOp::new(self.rates.gamma(), &self.sigma_minus)]
    }

    pub fn liouvillian(&self, det: DetuningSpec, omega: f64) -> Result<SuperOperator> {
        let h = self.hamiltonian(det, omega)?;
        build_liouvillian(&h, &self.lindblads())
    }
}
