//! Brute-force reference routes used to validate the fast paths.
//!
//! Everything here favors transparency over speed: Kronecker-vectorized
//! Lyapunov solves, explicit matrix inverses, and quadrature factors built
//! directly from their defining products. Small problem sizes only.

use nalgebra::{DMatrix, DVector, Matrix2, RowDVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::quadgrid::QuadGrid;
use crate::realify::ConjugatePairing;
use crate::sysmodel::{BlockRealization, KPowerSystem};

/// Kronecker product of two real dense matrices.
pub fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    DMatrix::from_fn(ar * br, ac * bc, |i, j| {
        a[(i / br, j / bc)] * b[(i % br, j % bc)]
    })
}

fn vec_of(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_fn(m.nrows() * m.ncols(), |r, _| m[(r % m.nrows(), r / m.nrows())])
}

fn unvec(v: &DVector<f64>, n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| v[j * n + i])
}

/// Solves `A X + X A^T + W = 0` by vectorization:
/// `(I kron A + A kron I) vec(X) = -vec(W)`.
pub fn lyapunov_kron(a: &DMatrix<f64>, w: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let eye = DMatrix::<f64>::identity(n, n);
    let op = kron(&eye, a) + kron(a, &eye);
    let sol = op
        .lu()
        .solve(&(-vec_of(w)))
        .ok_or_else(|| Error::Numeric("singular vectorized Lyapunov operator".into()))?;
    Ok(unvec(&sol, n))
}

/// Solves the generalized (bilinear) Lyapunov equations of the assembled
/// realization by vectorization:
///
/// ```text
///   A P + P A^T + N1 P N1^T + B B^T = 0
///   A^T Q + Q A + N1^T Q N1 + C^T C = 0
/// ```
pub fn generalized_gramians_kron(block: &BlockRealization) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let n = block.total_dim();
    let eye = DMatrix::<f64>::identity(n, n);
    let a = &block.a;
    let n1 = &block.n1;

    let op_p = kron(&eye, a) + kron(a, &eye) + kron(n1, n1);
    let bbt = &block.b * block.b.transpose();
    let p = op_p
        .lu()
        .solve(&(-vec_of(&bbt)))
        .ok_or_else(|| Error::Numeric("singular vectorized operator (P side)".into()))?;

    let at = a.transpose();
    let n1t = n1.transpose();
    let op_q = kron(&eye, &at) + kron(&at, &eye) + kron(&n1t, &n1t);
    let ctc = block.c.transpose() * &block.c;
    let q = op_q
        .lu()
        .solve(&(-vec_of(&ctc)))
        .ok_or_else(|| Error::Numeric("singular vectorized operator (Q side)".into()))?;

    Ok((unvec(&p, n), unvec(&q, n)))
}

fn inv_shifted(a: &DMatrix<f64>, s: Complex64) -> Result<DMatrix<Complex64>> {
    let m = DMatrix::<Complex64>::from_fn(a.nrows(), a.ncols(), |i, j| {
        let d = if i == j { s } else { Complex64::new(0.0, 0.0) };
        d - Complex64::new(a[(i, j)], 0.0)
    });
    m.try_inverse()
        .ok_or(Error::SingularShift { level: 0, shift: s })
}

/// Transfer evaluation by explicit resolvent inverses (no solves).
pub fn hk_dense_inverse(sys: &KPowerSystem, shifts: &[Complex64]) -> Result<Complex64> {
    assert_eq!(shifts.len(), sys.k());
    let mut v = inv_shifted(sys.a(0), shifts[0])? * sys.b1().map(|x| Complex64::new(x, 0.0));
    for (j, &s) in shifts.iter().enumerate().skip(1) {
        let w = sys.coupling(j - 1).map(|x| Complex64::new(x, 0.0)) * v;
        v = inv_shifted(sys.a(j), s)? * w;
    }
    let mut acc = Complex64::new(0.0, 0.0);
    for (c, x) in sys.ck().iter().zip(v.iter()) {
        acc += Complex64::new(*c, 0.0) * x;
    }
    Ok(acc)
}

/// The quadrature square-root factors built from their definitions by
/// direct linear solves: per level the controllability factor (columns
/// over the lambda nodes, level index slowest) and the transposed
/// observability factor (rows over the mu nodes, level index slowest).
pub struct QuadFactors {
    /// `l[j]`: n_j x (gamma_0 ... gamma_j) controllability factor.
    pub l: Vec<DMatrix<Complex64>>,
    /// `rt[j]`: (gamma_j ... gamma_{k-1}) x n_j transposed observability factor.
    pub rt: Vec<DMatrix<Complex64>>,
}

pub fn quad_factors(sys: &KPowerSystem, grid: &QuadGrid) -> Result<QuadFactors> {
    let k = sys.k();
    assert_eq!(grid.k(), k);
    let to_c = |m: &DMatrix<f64>| m.map(|x| Complex64::new(x, 0.0));

    let mut l: Vec<DMatrix<Complex64>> = Vec::with_capacity(k);
    for j in 0..k {
        let level = grid.level(j);
        let gamma = level.gamma();
        let nj = sys.dims()[j];
        let prev_cols = if j == 0 { 1 } else { l[j - 1].ncols() };
        let rhs_base: DMatrix<Complex64> = if j == 0 {
            DMatrix::from_fn(nj, 1, |i, _| Complex64::new(sys.b1()[i], 0.0))
        } else {
            to_c(sys.coupling(j - 1)) * &l[j - 1]
        };
        let mut lj = DMatrix::<Complex64>::zeros(nj, gamma * prev_cols);
        for (i, (&lam, &rho)) in level.lambda().iter().zip(level.rho()).enumerate() {
            let s = Complex64::new(0.0, lam);
            let shifted = DMatrix::<Complex64>::from_fn(nj, nj, |r, c| {
                let d = if r == c { s } else { Complex64::new(0.0, 0.0) };
                d - Complex64::new(sys.a(j)[(r, c)], 0.0)
            });
            let sol = shifted
                .lu()
                .solve(&rhs_base)
                .ok_or(Error::SingularShift { level: j, shift: s })?;
            lj.view_mut((0, i * prev_cols), (nj, prev_cols))
                .copy_from(&(sol * Complex64::new(rho, 0.0)));
        }
        l.push(lj);
    }

    let mut rt_rev: Vec<DMatrix<Complex64>> = Vec::with_capacity(k);
    for j in (0..k).rev() {
        let level = grid.level(j);
        let gamma = level.gamma();
        let nj = sys.dims()[j];
        let base: DMatrix<Complex64> = if j == k - 1 {
            DMatrix::from_fn(1, nj, |_, c| Complex64::new(sys.ck()[c], 0.0))
        } else {
            rt_rev.last().unwrap() * to_c(sys.coupling(j))
        };
        let prev_rows = base.nrows();
        let mut rtj = DMatrix::<Complex64>::zeros(gamma * prev_rows, nj);
        for (i, (&mu, &phi)) in level.mu().iter().zip(level.phi()).enumerate() {
            let s = Complex64::new(0.0, mu);
            // base * (s I - A)^{-1} via the transposed solve
            let shifted_t = DMatrix::<Complex64>::from_fn(nj, nj, |r, c| {
                let d = if r == c { s } else { Complex64::new(0.0, 0.0) };
                d - Complex64::new(sys.a(j)[(c, r)], 0.0)
            });
            let sol_t = shifted_t
                .lu()
                .solve(&base.transpose())
                .ok_or(Error::SingularShift { level: j, shift: s })?;
            rtj.view_mut((i * prev_rows, 0), (prev_rows, nj))
                .copy_from(&(sol_t.transpose() * Complex64::new(phi, 0.0)));
        }
        rt_rev.push(rtj);
    }
    rt_rev.reverse();

    Ok(QuadFactors { l, rt: rt_rev })
}

impl QuadFactors {
    /// Quadrature approximation of the controllability Gramian at level j.
    pub fn gramian_p(&self, j: usize) -> DMatrix<f64> {
        let prod = &self.l[j] * self.l[j].adjoint();
        prod.map(|z| z.re)
    }

    /// Quadrature approximation of the observability Gramian at level j.
    pub fn gramian_q(&self, j: usize) -> DMatrix<f64> {
        let prod = self.rt[j].adjoint() * &self.rt[j];
        prod.map(|z| z.re)
    }
}

const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// The 2x2 unitary that rotates a conjugate pair onto its real and
/// imaginary parts.
pub fn j_matrix() -> Matrix2<Complex64> {
    Matrix2::new(
        Complex64::new(FRAC_1_SQRT_2, 0.0),
        Complex64::new(0.0, -FRAC_1_SQRT_2),
        Complex64::new(FRAC_1_SQRT_2, 0.0),
        Complex64::new(0.0, FRAC_1_SQRT_2),
    )
}

/// Realification oracle for matrices: permute rows/columns into conjugate
/// pair order, then apply the blockwise `J^* (.) J` congruence. Returns the
/// real part and the largest leftover imaginary magnitude.
pub fn j_congruence(
    block: &DMatrix<Complex64>,
    rows: &ConjugatePairing,
    cols: &ConjugatePairing,
) -> (DMatrix<f64>, f64) {
    let j = j_matrix();
    let j_star = j.adjoint();
    let (nr, nc) = block.shape();
    assert_eq!(rows.len(), nr);
    assert_eq!(cols.len(), nc);
    let mut out = DMatrix::<f64>::zeros(nr, nc);
    let mut max_imag: f64 = 0.0;
    for bi in 0..nr / 2 {
        for bj in 0..nc / 2 {
            let b = Matrix2::new(
                block[(rows.position(2 * bi), cols.position(2 * bj))],
                block[(rows.position(2 * bi), cols.position(2 * bj + 1))],
                block[(rows.position(2 * bi + 1), cols.position(2 * bj))],
                block[(rows.position(2 * bi + 1), cols.position(2 * bj + 1))],
            );
            let t = j_star * b * j;
            for (di, dj) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                let z = t[(di, dj)];
                max_imag = max_imag.max(z.im.abs());
                out[(2 * bi + di, 2 * bj + dj)] = z.re;
            }
        }
    }
    (out, max_imag)
}

/// Realification oracle for the input vector: pairs map through `J^*`,
/// giving `sqrt(2) [Re b; -Im b]` per pair.
pub fn j_transform_vector(b: &DVector<Complex64>, rows: &ConjugatePairing) -> (DVector<f64>, f64) {
    let mut out = DVector::<f64>::zeros(b.len());
    let mut max_err: f64 = 0.0;
    for bi in 0..b.len() / 2 {
        let b1 = b[rows.position(2 * bi)];
        let b2 = b[rows.position(2 * bi + 1)];
        // J^* [b1; b2] = (1/sqrt 2) [b1 + b2; i (b1 - b2)]
        let top = (b1 + b2) * FRAC_1_SQRT_2;
        let bot = Complex64::new(0.0, 1.0) * (b1 - b2) * FRAC_1_SQRT_2;
        max_err = max_err.max(top.im.abs()).max(bot.im.abs());
        out[2 * bi] = top.re;
        out[2 * bi + 1] = bot.re;
    }
    (out, max_err)
}

/// Realification oracle for the output row: pairs map through `J`,
/// giving `sqrt(2) [Re c, Im c]` per pair.
pub fn j_transform_row(c: &RowDVector<Complex64>, cols: &ConjugatePairing) -> (RowDVector<f64>, f64) {
    let mut out = RowDVector::<f64>::zeros(c.len());
    let mut max_err: f64 = 0.0;
    for bj in 0..c.len() / 2 {
        let c1 = c[cols.position(2 * bj)];
        let c2 = c[cols.position(2 * bj + 1)];
        // [c1, c2] J = (1/sqrt 2) [c1 + c2, i (c2 - c1)]
        let left = (c1 + c2) * FRAC_1_SQRT_2;
        let right = Complex64::new(0.0, 1.0) * (c2 - c1) * FRAC_1_SQRT_2;
        max_err = max_err.max(left.im.abs()).max(right.im.abs());
        out[2 * bj] = left.re;
        out[2 * bj + 1] = right.re;
    }
    (out, max_err)
}
