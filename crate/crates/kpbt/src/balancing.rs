//! Subsystem Gramians via cascaded Lyapunov equations and the intrusive
//! square-root balanced truncation.
//!
//! The Gramians of a K-power system are block diagonal, so balancing reduces
//! to one standard Lyapunov equation per subsystem on each side: the
//! controllability cascade runs forward through the chain, the observability
//! cascade backward.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::sysmodel::{quasi_triangular_eigenvalues, KPowerSystem, ReducedKPowerSystem};

/// Relative threshold below which singular values count as numerically zero.
pub const RANK_TOL: f64 = 1e-14;

/// Relative residual guard for Lyapunov solves.
const RESIDUAL_GUARD: f64 = 1e-8;

/// Solves `A X + X A^T + W = 0` for Hurwitz `A` and symmetric `W`.
///
/// Dense Bartels-Stewart scheme: one real Schur decomposition of `A`, then
/// quasi-triangular back-substitution in 1x1/2x2 blocks.
pub fn solve_lyapunov(a: &DMatrix<f64>, w: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if a.ncols() != n || w.nrows() != n || w.ncols() != n {
        return Err(Error::DimensionMismatch {
            context: "solve_lyapunov".into(),
            expected: format!("{n}x{n} A and W"),
            found: format!("{}x{} and {}x{}", a.nrows(), a.ncols(), w.nrows(), w.ncols()),
        });
    }
    let w_scale = w.norm();
    let defect = (w - w.transpose()).norm();
    if defect > 1e-12 * w_scale.max(1.0) {
        return Err(Error::NotSymmetric {
            defect: defect / w_scale.max(1.0),
        });
    }

    let schur = a
        .clone()
        .try_schur(f64::EPSILON, 100_000)
        .ok_or_else(|| Error::Numeric("Schur iteration did not converge".into()))?;
    let (q, t) = schur.unpack();
    let abscissa = quasi_triangular_eigenvalues(&t)
        .iter()
        .map(|e| e.re)
        .fold(f64::NEG_INFINITY, f64::max);
    if abscissa >= 0.0 {
        return Err(Error::NotHurwitz { abscissa });
    }

    let c = q.transpose() * w * &q;
    let y = solve_quasi_triangular_lyapunov(&t, &c)?;
    let mut x = &q * y * q.transpose();
    // symmetrize; the exact solution is symmetric
    x = (&x + x.transpose()) * 0.5;

    let residual = (a * &x + &x * a.transpose() + w).norm();
    if residual > RESIDUAL_GUARD * w_scale.max(f64::MIN_POSITIVE) {
        return Err(Error::Numeric(format!(
            "Lyapunov residual {residual:.3e} exceeds guard for rhs norm {w_scale:.3e}"
        )));
    }
    Ok(x)
}

/// Solves `T Y + Y T^T + C = 0` for quasi-upper-triangular `T`.
fn solve_quasi_triangular_lyapunov(t: &DMatrix<f64>, c: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = t.nrows();
    let tiny = f64::EPSILON * t.norm().max(1.0);

    // block partition along the diagonal
    let mut starts = Vec::new();
    let mut i = 0;
    while i < n {
        starts.push(i);
        if i + 1 < n && t[(i + 1, i)].abs() > tiny {
            i += 2;
        } else {
            i += 1;
        }
    }
    let m = starts.len();
    let size = |p: usize| -> usize {
        if p + 1 < m {
            starts[p + 1] - starts[p]
        } else {
            n - starts[p]
        }
    };

    let mut y = DMatrix::<f64>::zeros(n, n);
    for qb in (0..m).rev() {
        let (q0, qs) = (starts[qb], size(qb));
        for pb in (0..m).rev() {
            let (p0, ps) = (starts[pb], size(pb));
            // rhs = -C_pq - sum_{r > p} T_pr Y_rq - sum_{s > q} Y_ps T_qs^T
            let mut rhs = -c.view((p0, q0), (ps, qs)).into_owned();
            if p0 + ps < n {
                let t_right = t.view((p0, p0 + ps), (ps, n - p0 - ps));
                let y_below = y.view((p0 + ps, q0), (n - p0 - ps, qs));
                rhs -= t_right * y_below;
            }
            if q0 + qs < n {
                let y_right = y.view((p0, q0 + qs), (ps, n - q0 - qs));
                let t_qright = t.view((q0, q0 + qs), (qs, n - q0 - qs));
                rhs -= y_right * t_qright.transpose();
            }
            // small Sylvester: T_pp Y_pq + Y_pq T_qq^T = rhs
            let tpp = t.view((p0, p0), (ps, ps));
            let tqq = t.view((q0, q0), (qs, qs));
            let dim = ps * qs;
            let mut kron = DMatrix::<f64>::zeros(dim, dim);
            // vec(T_pp Y) = (I kron T_pp) vec(Y); vec(Y T_qq^T) = (T_qq kron I) vec(Y)
            for bi in 0..qs {
                for bj in 0..qs {
                    for ai in 0..ps {
                        for aj in 0..ps {
                            let mut v = 0.0;
                            if bi == bj {
                                v += tpp[(ai, aj)];
                            }
                            if ai == aj {
                                v += tqq[(bi, bj)];
                            }
                            kron[(bi * ps + ai, bj * ps + aj)] = v;
                        }
                    }
                }
            }
            let rhs_vec = DVector::<f64>::from_fn(dim, |r, _| rhs[(r % ps, r / ps)]);
            let sol = kron
                .lu()
                .solve(&rhs_vec)
                .ok_or_else(|| Error::Numeric("singular diagonal-block Sylvester solve".into()))?;
            for col in 0..qs {
                for row in 0..ps {
                    y[(p0 + row, q0 + col)] = sol[col * ps + row];
                }
            }
        }
    }
    Ok(y)
}

/// Rank-revealing symmetric square root: returns `L` with `L L^T ~ G`,
/// keeping eigendirections with eigenvalue above `RANK_TOL * lambda_max`.
pub fn sqrt_factor(g: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = g.nrows();
    let scale = g.norm();
    let defect = (g - g.transpose()).norm();
    if defect > 1e-12 * scale.max(1.0) {
        return Err(Error::NotSymmetric {
            defect: defect / scale.max(1.0),
        });
    }
    let sym = (g + g.transpose()) * 0.5;
    let se = sym.symmetric_eigen();
    let lam_max = se.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
    let lam_min = se.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    if lam_min < -1e-12 * scale.max(1.0) {
        return Err(Error::Indefinite {
            min_eig: lam_min,
            scale,
        });
    }
    // columns sorted by decreasing eigenvalue, clipped at the rank tolerance
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        se.eigenvalues[j]
            .partial_cmp(&se.eigenvalues[i])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let kept: Vec<usize> = order
        .into_iter()
        .filter(|&i| se.eigenvalues[i] > RANK_TOL * lam_max && se.eigenvalues[i] > 0.0)
        .collect();
    let mut l = DMatrix::<f64>::zeros(n, kept.len());
    for (col, &i) in kept.iter().enumerate() {
        let s = se.eigenvalues[i].sqrt();
        for row in 0..n {
            l[(row, col)] = se.eigenvectors[(row, i)] * s;
        }
    }
    Ok(l)
}

/// Per-subsystem Gramians and their square-root factors.
#[derive(Debug, Clone)]
pub struct GramianSet {
    /// Controllability Gramians, one per subsystem.
    pub p: Vec<DMatrix<f64>>,
    /// Observability Gramians, one per subsystem.
    pub q: Vec<DMatrix<f64>>,
    /// Factors with `p[j] = l[j] * l[j]^T`.
    pub l: Vec<DMatrix<f64>>,
    /// Factors with `q[j] = r[j] * r[j]^T`.
    pub r: Vec<DMatrix<f64>>,
}

/// Solves the forward controllability cascade and the backward
/// observability cascade, with square-root factors.
pub fn cascade_gramians(sys: &KPowerSystem) -> Result<GramianSet> {
    sys.ensure_stable()?;
    let k = sys.k();

    let mut p: Vec<DMatrix<f64>> = Vec::with_capacity(k);
    let w0 = sys.b1() * sys.b1().transpose();
    p.push(solve_lyapunov(sys.a(0), &w0)?);
    for j in 1..k {
        let w = sys.coupling(j - 1) * &p[j - 1] * sys.coupling(j - 1).transpose();
        p.push(solve_lyapunov(sys.a(j), &w)?);
    }

    let mut q_rev: Vec<DMatrix<f64>> = Vec::with_capacity(k);
    let wk = sys.ck().transpose() * sys.ck();
    q_rev.push(solve_lyapunov(&sys.a(k - 1).transpose(), &wk)?);
    for j in (0..k - 1).rev() {
        let w = sys.coupling(j).transpose() * q_rev.last().unwrap() * sys.coupling(j);
        q_rev.push(solve_lyapunov(&sys.a(j).transpose(), &w)?);
    }
    q_rev.reverse();
    let q = q_rev;

    let l = p.iter().map(sqrt_factor).collect::<Result<Vec<_>>>()?;
    let r = q.iter().map(sqrt_factor).collect::<Result<Vec<_>>>()?;
    Ok(GramianSet { p, q, l, r })
}

/// Per-subsystem Hankel singular values, nonincreasing.
#[derive(Debug, Clone)]
pub struct HankelSpectrum {
    pub sigma: Vec<Vec<f64>>,
}

impl HankelSpectrum {
    /// Orders needed to keep all values `>= tol * sigma_max` per subsystem.
    pub fn orders_at_threshold(&self, tol: f64) -> Vec<usize> {
        self.sigma
            .iter()
            .map(|s| {
                let smax = s.first().copied().unwrap_or(0.0);
                s.iter().filter(|&&v| v >= tol * smax && v > 0.0).count().max(1)
            })
            .collect()
    }

    /// CSV export: `subsystem,index,sigma` (both indices one-based).
    pub fn to_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "subsystem,index,sigma")?;
        for (j, s) in self.sigma.iter().enumerate() {
            for (i, v) in s.iter().enumerate() {
                writeln!(w, "{},{},{}", j + 1, i + 1, crate::transfer::canonical_freq(*v))?;
            }
        }
        Ok(())
    }

    pub fn save_csv(&self, path: &std::path::Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.to_csv(std::io::BufWriter::new(file))
    }
}

/// Number of singular values above `RANK_TOL * sigma_max`.
pub fn numerical_rank(sigma: &[f64]) -> usize {
    let smax = sigma.iter().cloned().fold(0.0f64, f64::max);
    sigma.iter().filter(|&&v| v > RANK_TOL * smax).count()
}

/// Requested orders capped at the numerical rank of each spectrum; orders
/// beyond the rank would truncate into round-off noise.
pub fn clamp_orders(requested: &[usize], spectra: &[Vec<f64>]) -> Vec<usize> {
    requested
        .iter()
        .zip(spectra)
        .map(|(&r, s)| r.min(numerical_rank(s)).max(1))
        .collect()
}

/// Hankel singular values `sigma(R_j^T L_j)` per subsystem.
pub fn hankel_spectrum(grams: &GramianSet) -> HankelSpectrum {
    let sigma = grams
        .r
        .iter()
        .zip(&grams.l)
        .map(|(r, l)| {
            let m = r.transpose() * l;
            let svd = m.svd(false, false);
            let mut s: Vec<f64> = svd.singular_values.iter().copied().collect();
            s.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
            s
        })
        .collect();
    HankelSpectrum { sigma }
}

/// Deterministic sign convention: the largest-magnitude entry of every left
/// singular vector is made nonnegative (the paired right vector flips too).
pub(crate) fn fix_svd_signs(u: &mut DMatrix<f64>, v_t: &mut DMatrix<f64>) {
    for i in 0..u.ncols().min(v_t.nrows()) {
        let mut best = 0;
        let mut best_abs = 0.0;
        for r in 0..u.nrows() {
            let a = u[(r, i)].abs();
            if a > best_abs {
                best_abs = a;
                best = r;
            }
        }
        if u[(best, i)] < 0.0 {
            for r in 0..u.nrows() {
                u[(r, i)] = -u[(r, i)];
            }
            for c in 0..v_t.ncols() {
                v_t[(i, c)] = -v_t[(i, c)];
            }
        }
    }
}

/// Left/right projection pair `(W_j^T, V_j)` of one subsystem.
pub type ProjectionPair = (DMatrix<f64>, DMatrix<f64>);

/// Square-root balanced truncation to subsystem orders `orders`.
///
/// Also returns the per-subsystem projection pair `(W_j^T, V_j)` so callers
/// can check biorthogonality `W^T V = I`.
pub fn bt_reduce_from(
    sys: &KPowerSystem,
    grams: &GramianSet,
    orders: &[usize],
) -> Result<(ReducedKPowerSystem, Vec<ProjectionPair>)> {
    let k = sys.k();
    if orders.len() != k {
        return Err(Error::DimensionMismatch {
            context: "reduction orders".into(),
            expected: format!("{k} entries"),
            found: format!("{}", orders.len()),
        });
    }
    let mut proj: Vec<ProjectionPair> = Vec::with_capacity(k);
    for (j, &r_j) in orders.iter().enumerate() {
        let m = grams.r[j].transpose() * &grams.l[j];
        let mut svd = m.svd(true, true);
        let mut u = svd.u.take().expect("left vectors requested");
        let mut v_t = svd.v_t.take().expect("right vectors requested");
        fix_svd_signs(&mut u, &mut v_t);
        let s = &svd.singular_values;
        let smax = s.iter().cloned().fold(0.0f64, f64::max);
        let rank = s.iter().filter(|&&v| v > RANK_TOL * smax).count();
        if r_j == 0 || r_j > rank {
            return Err(Error::RankExceeded {
                level: j,
                requested: r_j,
                rank,
            });
        }
        let s_inv_sqrt = DMatrix::<f64>::from_fn(r_j, r_j, |a, b| {
            if a == b {
                1.0 / s[a].sqrt()
            } else {
                0.0
            }
        });
        // V_j = L_j Y_1 S^{-1/2},  W_j^T = S^{-1/2} U_1^T R_j^T
        let y1 = v_t.rows(0, r_j).transpose();
        let u1 = u.columns(0, r_j).into_owned();
        let v_proj = &grams.l[j] * y1 * &s_inv_sqrt;
        let w_t = &s_inv_sqrt * u1.transpose() * grams.r[j].transpose();
        proj.push((w_t, v_proj));
    }

    let a_red: Vec<DMatrix<f64>> = (0..k)
        .map(|j| &proj[j].0 * sys.a(j) * &proj[j].1)
        .collect();
    let n_red: Vec<DMatrix<f64>> = (0..k - 1)
        .map(|j| &proj[j + 1].0 * sys.coupling(j) * &proj[j].1)
        .collect();
    let b_red = (&proj[0].0 * sys.b1()).column(0).into_owned();
    let c_red = (sys.ck() * &proj[k - 1].1).row(0).into_owned();

    let reduced = KPowerSystem::new(a_red, n_red, b_red, c_red)?;
    Ok((reduced, proj))
}

/// Convenience wrapper: Gramian cascade, spectrum, and reduction in one call.
pub fn bt_reduce(
    sys: &KPowerSystem,
    orders: &[usize],
) -> Result<(ReducedKPowerSystem, HankelSpectrum)> {
    let grams = cascade_gramians(sys)?;
    let spectrum = hankel_spectrum(&grams);
    let (reduced, _) = bt_reduce_from(sys, &grams, orders)?;
    Ok((reduced, spectrum))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::examples::{build_random_stable, scalar_cascade};
    use crate::transfer::eval_hk;
    use approx::assert_relative_eq;
    use num_complex::Complex64;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn m1(v: f64) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, v)
    }

    #[test]
    fn scalar_lyapunov() {
        let x = solve_lyapunov(&m1(-1.0), &m1(1.0)).unwrap();
        assert_relative_eq!(x[(0, 0)], 0.5, max_relative = 1e-14);
        let x = solve_lyapunov(&m1(-1.0), &m1(0.5)).unwrap();
        assert_relative_eq!(x[(0, 0)], 0.25, max_relative = 1e-14);
    }

    #[test]
    fn lyapunov_matches_kronecker_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for trial in 0..4 {
            let n = 8;
            let m = DMatrix::<f64>::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
            let shift = crate::sysmodel::spectral_abscissa_of(&m).unwrap() + 0.7;
            let a = &m - DMatrix::identity(n, n) * shift;
            let half = DMatrix::<f64>::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
            let w = &half * half.transpose();
            let x = solve_lyapunov(&a, &w).unwrap();
            let res = (&a * &x + &x * a.transpose() + &w).norm();
            assert!(res <= 1e-10 * w.norm(), "trial {trial}: residual {res}");
            let oracle = crate::reference::lyapunov_kron(&a, &w).unwrap();
            assert!(
                (&x - &oracle).norm() <= 1e-10 * oracle.norm().max(1.0),
                "trial {trial}: oracle deviation {}",
                (&x - &oracle).norm()
            );
        }
    }

    #[test]
    fn lyapunov_rejects_non_hurwitz() {
        let err = solve_lyapunov(&m1(1.0), &m1(1.0)).unwrap_err();
        assert!(matches!(err, Error::NotHurwitz { .. }));
    }

    #[test]
    fn sqrt_factor_basics() {
        let l = sqrt_factor(&m1(0.25)).unwrap();
        assert_relative_eq!(l[(0, 0)], 0.5, max_relative = 1e-14);

        let g = DMatrix::from_row_slice(2, 2, &[4.0, 0.0, 0.0, 0.0]);
        let l = sqrt_factor(&g).unwrap();
        assert_eq!(l.ncols(), 1, "rank-1 factor expected");
        assert_relative_eq!(l[(0, 0)].abs(), 2.0, max_relative = 1e-14);
        assert!(l[(1, 0)].abs() <= 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let half = DMatrix::<f64>::from_fn(10, 10, |_, _| rng.random_range(-1.0..1.0));
        let g = &half * half.transpose();
        let l = sqrt_factor(&g).unwrap();
        assert!(((&l * l.transpose()) - &g).norm() <= 1e-10 * g.norm());
    }

    #[test]
    fn sqrt_factor_rejects_indefinite() {
        let g = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(matches!(sqrt_factor(&g).unwrap_err(), Error::Indefinite { .. }));
    }

    #[test]
    fn scalar_cascade_gramians() {
        let sys = scalar_cascade();
        let g = cascade_gramians(&sys).unwrap();
        assert_relative_eq!(g.p[0][(0, 0)], 0.5, max_relative = 1e-12);
        assert_relative_eq!(g.p[1][(0, 0)], 0.25, max_relative = 1e-12);
        assert_relative_eq!(g.q[0][(0, 0)], 0.25, max_relative = 1e-12);
        assert_relative_eq!(g.q[1][(0, 0)], 0.5, max_relative = 1e-12);
        let spec = hankel_spectrum(&g);
        assert_relative_eq!(spec.sigma[0][0], 0.125f64.sqrt(), max_relative = 1e-12);
        assert_relative_eq!(spec.sigma[1][0], 0.125f64.sqrt(), max_relative = 1e-12);
    }

    #[test]
    fn benchmark_cascade_residuals() {
        let sys = crate::examples::build_benchmark(300).unwrap();
        let g = cascade_gramians(&sys).unwrap();
        let res = |a: &DMatrix<f64>, x: &DMatrix<f64>, w: &DMatrix<f64>| {
            (a * x + x * a.transpose() + w).norm() / w.norm()
        };
        let w0 = sys.b1() * sys.b1().transpose();
        assert!(res(sys.a(0), &g.p[0], &w0) <= 1e-9);
        let w1 = sys.coupling(0) * &g.p[0] * sys.coupling(0).transpose();
        assert!(res(sys.a(1), &g.p[1], &w1) <= 1e-9);
        let wq1 = sys.ck().transpose() * sys.ck();
        assert!(res(&sys.a(1).transpose(), &g.q[1], &wq1) <= 1e-9);
        let wq0 = sys.coupling(0).transpose() * &g.q[1] * sys.coupling(0);
        assert!(res(&sys.a(0).transpose(), &g.q[0], &wq0) <= 1e-9);
    }

    #[test]
    fn k1_gramians() {
        let sys = KPowerSystem::new(
            vec![m1(-2.0)],
            vec![],
            nalgebra::DVector::from_vec(vec![3.0]),
            nalgebra::RowDVector::from_row_slice(&[4.0]),
        )
        .unwrap();
        let g = cascade_gramians(&sys).unwrap();
        assert_relative_eq!(g.p[0][(0, 0)], 9.0 / 4.0, max_relative = 1e-12);
        assert_relative_eq!(g.q[0][(0, 0)], 4.0, max_relative = 1e-12);
    }

    #[test]
    fn full_order_reduction_preserves_transfer() {
        let sys = build_random_stable(2, &[5, 4], 21).unwrap();
        let (red, _) = bt_reduce(&sys, &[5, 4]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(100);
        for _ in 0..10 {
            let shifts: Vec<Complex64> = (0..2)
                .map(|_| Complex64::new(0.0, rng.random_range(-5.0..5.0)))
                .collect();
            let h_full = eval_hk(&sys, &shifts).unwrap();
            let h_red = eval_hk(&red, &shifts).unwrap();
            assert_relative_eq!(h_full.re, h_red.re, max_relative = 1e-10, epsilon = 1e-12);
            assert_relative_eq!(h_full.im, h_red.im, max_relative = 1e-10, epsilon = 1e-12);
        }
    }

    #[test]
    fn biorthogonality_and_balanced_spectrum() {
        let sys = build_random_stable(3, &[6, 5, 4], 33).unwrap();
        let grams = cascade_gramians(&sys).unwrap();
        let (_, proj) = bt_reduce_from(&sys, &grams, &[3, 3, 2]).unwrap();
        for (w_t, v) in &proj {
            let prod = w_t * v;
            let eye = DMatrix::<f64>::identity(prod.nrows(), prod.ncols());
            assert!(
                (&prod - eye).norm() <= 1e-10,
                "biorthogonality defect {}",
                (&prod - DMatrix::<f64>::identity(prod.nrows(), prod.ncols())).norm()
            );
        }
    }

    #[test]
    fn hankel_values_invariant_under_orthogonal_state_transform() {
        let sys = build_random_stable(2, &[5, 4], 55).unwrap();
        let spec = hankel_spectrum(&cascade_gramians(&sys).unwrap());

        // random orthogonal T_j via QR of a random matrix
        let mut rng = ChaCha8Rng::seed_from_u64(56);
        let mut qs: Vec<DMatrix<f64>> = Vec::new();
        for &d in sys.dims() {
            let m = DMatrix::<f64>::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
            let qr = m.qr();
            qs.push(qr.q());
        }
        let a = vec![
            qs[0].transpose() * sys.a(0) * &qs[0],
            qs[1].transpose() * sys.a(1) * &qs[1],
        ];
        let n = vec![qs[1].transpose() * sys.coupling(0) * &qs[0]];
        let b1 = (qs[0].transpose() * sys.b1()).column(0).into_owned();
        let ck = (sys.ck() * &qs[1]).row(0).into_owned();
        let transformed = KPowerSystem::new(a, n, b1, ck).unwrap();
        let spec_t = hankel_spectrum(&cascade_gramians(&transformed).unwrap());

        for j in 0..2 {
            for (s1, s2) in spec.sigma[j].iter().zip(&spec_t.sigma[j]) {
                assert_relative_eq!(s1, s2, max_relative = 1e-10, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn rank_error_reports_computed_rank() {
        let sys = scalar_cascade();
        let err = bt_reduce(&sys, &[2, 1]).unwrap_err();
        match err {
            Error::RankExceeded { level, requested, rank } => {
                assert_eq!((level, requested, rank), (0, 2, 1));
            }
            other => panic!("expected RankExceeded, got {other}"),
        }
    }

    #[test]
    fn threshold_selector() {
        let spec = HankelSpectrum {
            sigma: vec![vec![1.0, 0.5, 1e-9], vec![2.0, 1e-12]],
        };
        assert_eq!(spec.orders_at_threshold(1e-6), vec![2, 1]);
        assert_eq!(numerical_rank(&[1.0, 1e-10, 1e-20]), 2);
        assert_eq!(clamp_orders(&[5, 1], &spec.sigma), vec![3, 1]);
    }

    #[test]
    fn spectrum_csv_layout() {
        let spec = HankelSpectrum {
            sigma: vec![vec![1.0, 0.5], vec![2.0]],
        };
        let mut buf = Vec::new();
        spec.to_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "subsystem,index,sigma");
        assert!(lines[1].starts_with("1,1,"));
        assert!(lines[3].starts_with("2,1,"));
        assert_eq!(lines.len(), 4);
    }
}
