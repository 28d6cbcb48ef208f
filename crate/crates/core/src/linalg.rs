//! Small dense complex linear-algebra helpers on top of ndarray.

use ndarray::{Array2, ArrayView2, Axis};
use ndarray_linalg::{Eigh, Inverse, UPLO};

use crate::{CMatrix, Error, Result, C64};

pub fn identity(n: usize) -> CMatrix {
    Array2::eye(n)
}

pub fn dagger(m: &CMatrix) -> CMatrix {
    m.t().mapv(|z| z.conj())
}

pub fn kron(a: ArrayView2<C64>, b: ArrayView2<C64>) -> CMatrix {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    let mut out = Array2::zeros((ar * br, ac * bc));
    for i in 0..ar {
        for j in 0..ac {
            let aij = a[[i, j]];
            if aij == C64::new(0.0, 0.0) {
                continue;
            }
            let mut block = out.slice_mut(ndarray::s![i * br..(i + 1) * br, j * bc..(j + 1) * bc]);
            block.zip_mut_with(&b, |o, &bv| *o = aij * bv);
        }
    }
    out
}

pub fn trace(m: &CMatrix) -> C64 {
    m.diag().sum()
}

/// Largest elementwise modulus.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// max |M − M†| over elements.
pub fn hermiticity_error(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut err: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            err = err.max((m[[i, j]] - m[[j, i]].conj()).norm());
        }
    }
    err
}

/// Induced 1-norm (max column sum).
pub fn norm1(m: &CMatrix) -> f64 {
    m.axis_iter(Axis(1)).map(|col| col.iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max)
}

/// Eigenvalues of the Hermitian part of `m`, ascending.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Result<Vec<f64>> {
    let h = (m + &dagger(m)).mapv(|z| z * 0.5);
    let (w, _) = h.eigh(UPLO::Upper)?;
    Ok(w.to_vec())
}

// Padé coefficients and theta thresholds for scaling and squaring,
// Higham (2005) table.
const PADE3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const PADE5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const PADE7: [f64; 8] = [17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0];
const PADE9: [f64; 10] =
    [17643225600.0, 8821612800.0, 2075673600.0, 302702400.0, 30270240.0, 2162160.0, 110880.0, 3960.0, 90.0, 1.0];
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
#[allow(clippy::excessive_precision)]
const THETA: [(usize, f64); 4] =
    [(3, 1.495585217958292e-2), (5, 2.539398330063230e-1), (7, 9.504178996162932e-1), (9, 2.097847961257068)];
const THETA13: f64 = 5.371920351148152;

fn scaled(m: &CMatrix, s: f64) -> CMatrix {
    m.mapv(|z| z * s)
}

/// Matrix exponential by Padé scaling and squaring.
pub fn expm(a: &CMatrix) -> Result<CMatrix> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::DimensionMismatch { expected: n, actual: a.ncols() });
    }
    if a.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::InvalidParameter("expm of a non-finite matrix".into()));
    }
    let eye = identity(n);
    let nrm = norm1(a);

    for &(m, theta) in &THETA {
        if nrm <= theta {
            let b: &[f64] = match m {
                3 => &PADE3,
                5 => &PADE5,
                7 => &PADE7,
                _ => &PADE9,
            };
            let a2 = a.dot(a);
            // Odd part u = A·Σ b_{2k+1} A^{2k}, even part v = Σ b_{2k} A^{2k}.
            let mut pow = eye.clone();
            let mut u = scaled(&eye, b[1]);
            let mut v = scaled(&eye, b[0]);
            for k in 1..=m / 2 {
                pow = pow.dot(&a2);
                u.scaled_add(C64::new(b[2 * k + 1], 0.0), &pow);
                v.scaled_add(C64::new(b[2 * k], 0.0), &pow);
            }
            let u = a.dot(&u);
            return pade_quotient(&u, &v);
        }
    }

    let s = if nrm > THETA13 { (nrm / THETA13).log2().ceil() as i32 } else { 0 };
    let a = scaled(a, 0.5f64.powi(s));
    let b = &PADE13;
    let a2 = a.dot(&a);
    let a4 = a2.dot(&a2);
    let a6 = a4.dot(&a2);
    let c = |k: usize| C64::new(b[k], 0.0);

    let mut inner_u = scaled(&a6, b[13]);
    inner_u.scaled_add(c(11), &a4);
    inner_u.scaled_add(c(9), &a2);
    let mut u = a6.dot(&inner_u);
    u.scaled_add(c(7), &a6);
    u.scaled_add(c(5), &a4);
    u.scaled_add(c(3), &a2);
    u.scaled_add(c(1), &eye);
    let u = a.dot(&u);

    let mut inner_v = scaled(&a6, b[12]);
    inner_v.scaled_add(c(10), &a4);
    inner_v.scaled_add(c(8), &a2);
    let mut v = a6.dot(&inner_v);
    v.scaled_add(c(6), &a6);
    v.scaled_add(c(4), &a4);
    v.scaled_add(c(2), &a2);
    v.scaled_add(c(0), &eye);

    let mut r = pade_quotient(&u, &v)?;
    for _ in 0..s {
        r = r.dot(&r);
    }
    Ok(r)
}

fn pade_quotient(u: &CMatrix, v: &CMatrix) -> Result<CMatrix> {
    let q = v - u;
    let p = v + u;
    let qinv = q.inv()?;
    Ok(qinv.dot(&p))
}
