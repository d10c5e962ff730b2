//! Ready-made benchmark systems: the two-subsystem tridiagonal benchmark
//! and seeded random stable families for testing.

use nalgebra::{DMatrix, DVector, RowDVector};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::sysmodel::{spectral_abscissa_of, KPowerSystem};

/// The smallest admissible two-subsystem cascade: all blocks scalar,
/// `A = (-1, -1)`, `N = 1`, `B1 = 1`, `C2 = 1`. Its transfer function is
/// `H2(s1, s2) = 1 / ((s2 + 1)(s1 + 1))` and its Gramians are known in
/// closed form, which makes it the workhorse fixture of the test suite.
pub fn scalar_cascade() -> KPowerSystem {
    KPowerSystem::new(
        vec![
            DMatrix::from_element(1, 1, -1.0),
            DMatrix::from_element(1, 1, -1.0),
        ],
        vec![DMatrix::from_element(1, 1, 1.0)],
        DVector::from_vec(vec![1.0]),
        RowDVector::from_row_slice(&[1.0]),
    )
    .expect("static fixture")
}

fn tridiag(n: usize, sub: f64, diag: f64, sup: f64) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            diag
        } else if i + 1 == j {
            sup
        } else if i == j + 1 {
            sub
        } else {
            0.0
        }
    })
}

/// The two-subsystem benchmark of order `2n`:
/// `A1 = tridiag(7, -10, 2)`, `A2 = tridiag(2, -5, 2)`,
/// `N11 = tridiag(-1, 2, 1)`, `B1 = ones`, `C2 = last unit row`.
pub fn build_benchmark(n: usize) -> Result<KPowerSystem> {
    if n < 2 {
        return Err(Error::DimensionMismatch {
            context: "benchmark order".into(),
            expected: "n >= 2".into(),
            found: format!("{n}"),
        });
    }
    let a1 = tridiag(n, 7.0, -10.0, 2.0);
    let a2 = tridiag(n, 2.0, -5.0, 2.0);
    let n11 = tridiag(n, -1.0, 2.0, 1.0);
    let b1 = DVector::from_element(n, 1.0);
    let mut ck = RowDVector::zeros(n);
    ck[n - 1] = 1.0;
    KPowerSystem::new(vec![a1, a2], vec![n11], b1, ck)
}

/// A random K-power system that is Hurwitz by construction:
/// `A_j = M - (rho(M) + 0.5) I` for random `M`. Deterministic under `seed`.
pub fn build_random_stable(k: usize, dims: &[usize], seed: u64) -> Result<KPowerSystem> {
    if dims.len() != k {
        return Err(Error::DimensionMismatch {
            context: "random system dims".into(),
            expected: format!("{k} entries"),
            found: format!("{}", dims.len()),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut a = Vec::with_capacity(k);
    for &d in dims {
        let m = DMatrix::<f64>::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
        let radius = spectral_abscissa_of(&m)?.max(0.0);
        a.push(&m - DMatrix::<f64>::identity(d, d) * (radius + 0.5));
    }
    let n = (0..k - 1)
        .map(|j| DMatrix::<f64>::from_fn(dims[j + 1], dims[j], |_, _| rng.random_range(-1.0..1.0)))
        .collect();
    let b1 = DVector::from_fn(dims[0], |_, _| rng.random_range(-1.0..1.0));
    let ck = RowDVector::from_fn(dims[k - 1], |_, _| rng.random_range(-1.0..1.0));
    KPowerSystem::new(a, n, b1, ck)
}
