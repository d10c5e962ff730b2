//! Data-driven assembly: builds the quadrature-weighted Loewner-type data
//! matrices purely from samples of the k-th transfer function, and runs the
//! nonintrusive balanced-truncation reduction on them (complex arithmetic).
//!
//! With the quadrature factors L (controllability side) and R^T
//! (observability side), the products R^T L, R^T A L, R^T N L, R^T B and
//! C L all reduce to single transfer-function evaluations per entry; the
//! divided-difference structure of the first two is what makes the method
//! nonintrusive.

use nalgebra::{DMatrix, DVector, RowDVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::quadgrid::{MultiIndexMap, QuadGrid};
use crate::sysmodel::ComplexKPowerSystem;
use crate::transfer::SampleSet;

/// The assembled data matrices of every level.
#[derive(Debug, Clone)]
pub struct LoewnerBlocks {
    /// Divided-difference (Loewner) matrix per level: equals `R^T L`.
    pub loewner: Vec<DMatrix<Complex64>>,
    /// Shifted variant per level: equals `R^T A L`.
    pub shifted: Vec<DMatrix<Complex64>>,
    /// Coupling data per chain link: equals `R^T N L`.
    pub coupling: Vec<DMatrix<Complex64>>,
    /// Input data vector: equals `R^T B1`.
    pub input: DVector<Complex64>,
    /// Output data row: equals `Ck L`.
    pub output: RowDVector<Complex64>,
}

fn im(x: f64) -> Complex64 {
    Complex64::new(0.0, x)
}

/// Sample tuple with the lambda family through level `lam_top` (exclusive
/// upper bound `lam_top`, i.e. levels `0..lam_top` take lambda nodes from
/// the column multi-index) and mu nodes above from the row multi-index
/// starting at level `row_base`.
pub(crate) fn mixed_freqs(
    grid: &QuadGrid,
    lam_top: usize,
    row_base: usize,
    row_idx: &[usize],
    col_idx: &[usize],
) -> Vec<f64> {
    let k = grid.k();
    (0..k)
        .map(|d| {
            if d < lam_top {
                grid.level(d).lambda()[col_idx[d]]
            } else {
                grid.level(d).mu()[row_idx[d - row_base]]
            }
        })
        .collect()
}

pub(crate) fn weight_product(grid: &QuadGrid, mu_base: usize, row_idx: &[usize], col_idx: &[usize]) -> f64 {
    let mut w = 1.0;
    for (off, &i) in row_idx.iter().enumerate() {
        w *= grid.level(mu_base + off).phi()[i];
    }
    for (d, &i) in col_idx.iter().enumerate() {
        w *= grid.level(d).rho()[i];
    }
    w
}

/// Divided-difference data matrix of level j, entry
/// `delta * (H(mu at j) - H(lambda at j)) / (i (lambda_j - mu_j))`.
pub fn assemble_loewner(
    j: usize,
    samples: &SampleSet,
    grid: &QuadGrid,
    maps: &MultiIndexMap,
) -> Result<DMatrix<Complex64>> {
    let (rows, cols) = (maps.row_len(j), maps.col_len(j));
    let mut out = DMatrix::<Complex64>::zeros(rows, cols);
    for h in 0..rows {
        let row_idx = maps.decode_row(j, h);
        for l in 0..cols {
            let col_idx = maps.decode_col(j, l);
            let lam = grid.level(j).lambda()[col_idx[j]];
            let mu = grid.level(j).mu()[row_idx[0]];
            if (lam - mu).abs() < 1e-300 {
                return Err(Error::GridCollision {
                    level: j,
                    lambda: lam,
                    mu,
                });
            }
            let delta = weight_product(grid, j, &row_idx, &col_idx);
            let h_mu = samples.require(&mixed_freqs(grid, j, j, &row_idx, &col_idx))?;
            let h_lam = samples.require(&mixed_freqs(grid, j + 1, j, &row_idx, &col_idx))?;
            out[(h, l)] = (h_mu - h_lam) * delta / im(lam - mu);
        }
    }
    Ok(out)
}

/// Shifted divided-difference matrix of level j, entry
/// `delta * (mu_j H(mu at j) - lambda_j H(lambda at j)) / (lambda_j - mu_j)`.
pub fn assemble_shifted_loewner(
    j: usize,
    samples: &SampleSet,
    grid: &QuadGrid,
    maps: &MultiIndexMap,
) -> Result<DMatrix<Complex64>> {
    let (rows, cols) = (maps.row_len(j), maps.col_len(j));
    let mut out = DMatrix::<Complex64>::zeros(rows, cols);
    for h in 0..rows {
        let row_idx = maps.decode_row(j, h);
        for l in 0..cols {
            let col_idx = maps.decode_col(j, l);
            let lam = grid.level(j).lambda()[col_idx[j]];
            let mu = grid.level(j).mu()[row_idx[0]];
            if (lam - mu).abs() < 1e-300 {
                return Err(Error::GridCollision {
                    level: j,
                    lambda: lam,
                    mu,
                });
            }
            let delta = weight_product(grid, j, &row_idx, &col_idx);
            let h_mu = samples.require(&mixed_freqs(grid, j, j, &row_idx, &col_idx))?;
            let h_lam = samples.require(&mixed_freqs(grid, j + 1, j, &row_idx, &col_idx))?;
            out[(h, l)] = (h_mu * mu - h_lam * lam) * delta / (lam - mu);
        }
    }
    Ok(out)
}

/// Coupling data matrix of chain link j (rows from level j+1, columns from
/// level j), entry `coeff * H(lambda through level j)`.
pub fn assemble_coupling(
    j: usize,
    samples: &SampleSet,
    grid: &QuadGrid,
    maps: &MultiIndexMap,
) -> Result<DMatrix<Complex64>> {
    let (rows, cols) = (maps.row_len(j + 1), maps.col_len(j));
    let mut out = DMatrix::<Complex64>::zeros(rows, cols);
    for h in 0..rows {
        let row_idx = maps.decode_row(j + 1, h);
        for l in 0..cols {
            let col_idx = maps.decode_col(j, l);
            let coeff = weight_product(grid, j + 1, &row_idx, &col_idx);
            let val = samples.require(&mixed_freqs(grid, j + 1, j + 1, &row_idx, &col_idx))?;
            out[(h, l)] = val * coeff;
        }
    }
    Ok(out)
}

/// Input data vector (rows from level 0), entry `prod(phi) * H(all mu)`.
pub fn assemble_input(
    samples: &SampleSet,
    grid: &QuadGrid,
    maps: &MultiIndexMap,
) -> Result<DVector<Complex64>> {
    let rows = maps.row_len(0);
    let mut out = DVector::<Complex64>::zeros(rows);
    for h in 0..rows {
        let row_idx = maps.decode_row(0, h);
        let coeff = weight_product(grid, 0, &row_idx, &[]);
        let val = samples.require(&mixed_freqs(grid, 0, 0, &row_idx, &[]))?;
        out[h] = val * coeff;
    }
    Ok(out)
}

/// Output data row (columns from level k-1), entry `prod(rho) * H(all lambda)`.
pub fn assemble_output(
    samples: &SampleSet,
    grid: &QuadGrid,
    maps: &MultiIndexMap,
) -> Result<RowDVector<Complex64>> {
    let k = grid.k();
    let cols = maps.col_len(k - 1);
    let mut out = RowDVector::<Complex64>::zeros(cols);
    for l in 0..cols {
        let col_idx = maps.decode_col(k - 1, l);
        let coeff = weight_product(grid, k, &[], &col_idx);
        let val = samples.require(&mixed_freqs(grid, k, k, &[], &col_idx))?;
        out[l] = val * coeff;
    }
    Ok(out)
}

/// Assembles every data matrix from the shared sample set.
pub fn assemble_blocks(
    samples: &SampleSet,
    grid: &QuadGrid,
    maps: &MultiIndexMap,
) -> Result<LoewnerBlocks> {
    let k = grid.k();
    let loewner = (0..k)
        .map(|j| assemble_loewner(j, samples, grid, maps))
        .collect::<Result<Vec<_>>>()?;
    let shifted = (0..k)
        .map(|j| assemble_shifted_loewner(j, samples, grid, maps))
        .collect::<Result<Vec<_>>>()?;
    let coupling = (0..k - 1)
        .map(|j| assemble_coupling(j, samples, grid, maps))
        .collect::<Result<Vec<_>>>()?;
    let input = assemble_input(samples, grid, maps)?;
    let output = assemble_output(samples, grid, maps)?;
    Ok(LoewnerBlocks {
        loewner,
        shifted,
        coupling,
        input,
        output,
    })
}

/// Deterministic phases: rotate each left singular vector so its
/// largest-magnitude entry is real positive (the paired right vector
/// rotates along).
fn normalize_svd_phases(u: &mut DMatrix<Complex64>, v_t: &mut DMatrix<Complex64>) {
    for i in 0..u.ncols().min(v_t.nrows()) {
        let mut best = 0;
        let mut best_abs = 0.0;
        for r in 0..u.nrows() {
            let a = u[(r, i)].norm();
            if a > best_abs {
                best_abs = a;
                best = r;
            }
        }
        if best_abs == 0.0 {
            continue;
        }
        let alpha = u[(best, i)].conj() / best_abs;
        for r in 0..u.nrows() {
            u[(r, i)] *= alpha;
        }
        let alpha_conj = alpha.conj();
        for c in 0..v_t.ncols() {
            v_t[(i, c)] *= alpha_conj;
        }
    }
}

/// Projection factors from the SVD of one data matrix: returns
/// `(S^{-1/2} U1^H, Y1 S^{-1/2})` truncated at order `r`, plus the full
/// singular value list.
pub(crate) fn svd_projectors_complex(
    m: &DMatrix<Complex64>,
    r: usize,
    level: usize,
) -> Result<(DMatrix<Complex64>, DMatrix<Complex64>, Vec<f64>)> {
    let mut svd = m.clone().svd(true, true);
    let mut u = svd.u.take().expect("left vectors requested");
    let mut v_t = svd.v_t.take().expect("right vectors requested");
    normalize_svd_phases(&mut u, &mut v_t);
    let sigma: Vec<f64> = svd.singular_values.iter().copied().collect();
    let smax = sigma.iter().cloned().fold(0.0f64, f64::max);
    let rank = sigma
        .iter()
        .filter(|&&s| s > crate::balancing::RANK_TOL * smax)
        .count();
    if r == 0 || r > rank {
        return Err(Error::RankExceeded {
            level,
            requested: r,
            rank,
        });
    }
    let s_inv_sqrt = DMatrix::<Complex64>::from_fn(r, r, |a, b| {
        if a == b {
            Complex64::new(1.0 / sigma[a].sqrt(), 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    let u1 = u.columns(0, r).into_owned();
    let y1 = v_t.rows(0, r).adjoint();
    let left = &s_inv_sqrt * u1.adjoint();
    let right = y1 * &s_inv_sqrt;
    Ok((left, right, sigma))
}

/// Nonintrusive reduction in complex arithmetic: SVD of each data matrix,
/// then congruence with the truncated singular factors. Returns the reduced
/// complex system and the singular-value spectra of the data matrices.
pub fn dd_reduce_complex(
    blocks: &LoewnerBlocks,
    orders: &[usize],
) -> Result<(ComplexKPowerSystem, Vec<Vec<f64>>)> {
    let k = blocks.loewner.len();
    if orders.len() != k {
        return Err(Error::DimensionMismatch {
            context: "reduction orders".into(),
            expected: format!("{k} entries"),
            found: format!("{}", orders.len()),
        });
    }
    let mut left = Vec::with_capacity(k);
    let mut right = Vec::with_capacity(k);
    let mut spectra = Vec::with_capacity(k);
    for (j, &r) in orders.iter().enumerate() {
        let (lj, rj, sj) = svd_projectors_complex(&blocks.loewner[j], r, j)?;
        left.push(lj);
        right.push(rj);
        spectra.push(sj);
    }
    let a_red: Vec<DMatrix<Complex64>> = (0..k)
        .map(|j| &left[j] * &blocks.shifted[j] * &right[j])
        .collect();
    let n_red: Vec<DMatrix<Complex64>> = (0..k - 1)
        .map(|j| &left[j + 1] * &blocks.coupling[j] * &right[j])
        .collect();
    let b_red = (&left[0] * &blocks.input).column(0).into_owned();
    let c_red = (&blocks.output * &right[k - 1]).row(0).into_owned();
    let sys = ComplexKPowerSystem::new(a_red, n_red, b_red, c_red)?;
    Ok((sys, spectra))
}
