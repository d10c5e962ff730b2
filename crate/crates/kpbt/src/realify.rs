//! Real-arithmetic execution of the data-driven reduction.
//!
//! On a conjugate-symmetric grid the rows and columns of the data matrices
//! come in conjugate pairs. Ordering each index space in such pairs and
//! rotating every 2x2 block by the unitary `J = [[1, -i], [1, i]] / sqrt 2`
//! turns all assembled quantities real. This module assembles those real
//! counterparts directly from the samples (solving a tiny real linear
//! system per block instead of forming complex intermediates) and runs the
//! reduction entirely in real arithmetic, so the reduced models are
//! real-valued by construction.

use nalgebra::{DMatrix, DVector, RowDVector};

use crate::balancing::fix_svd_signs;
use crate::data_driven::{mixed_freqs, weight_product};
use crate::error::{Error, Result};
use crate::quadgrid::{MultiIndexMap, QuadGrid};
use crate::sysmodel::{KPowerSystem, ReducedKPowerSystem};
use crate::transfer::SampleSet;

/// A permutation arranging one multi-index space in conjugate pairs:
/// positions `2m` and `2m + 1` hold a tuple and its full negation, the
/// representative (positive node at the highest level) first.
#[derive(Debug, Clone)]
pub struct ConjugatePairing {
    positions: Vec<usize>,
}

impl ConjugatePairing {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Original index stored at pair position `p`.
    pub fn position(&self, p: usize) -> usize {
        self.positions[p]
    }
}

/// Which index space of a level to pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairingSide {
    Row,
    Col,
}

fn mirror_index(gamma: usize, i: usize) -> usize {
    let half = gamma / 2;
    if i < half {
        i + half
    } else {
        i - half
    }
}

/// Pairs every multi-index tuple with its negation. Pairs are ordered by
/// the representative's natural index, which makes the permutation
/// deterministic; representatives are the tuples whose highest-level node
/// is positive.
pub fn pair_permutation(
    grid: &QuadGrid,
    maps: &MultiIndexMap,
    level: usize,
    side: PairingSide,
) -> Result<ConjugatePairing> {
    let k = grid.k();
    for (d, l) in grid.levels().iter().enumerate() {
        if l.gamma() % 2 != 0 {
            return Err(Error::AsymmetricGrid { level: d });
        }
    }
    let (len, top_gamma) = match side {
        PairingSide::Row => (maps.row_len(level), grid.level(k - 1).gamma()),
        PairingSide::Col => (maps.col_len(level), grid.level(level).gamma()),
    };
    let level_of = |d: usize| match side {
        PairingSide::Row => level + d,
        PairingSide::Col => d,
    };
    let mut positions = Vec::with_capacity(len);
    for h in 0..len {
        let idx = match side {
            PairingSide::Row => maps.decode_row(level, h),
            PairingSide::Col => maps.decode_col(level, h),
        };
        let top = *idx.last().expect("nonempty multi-index");
        if top < top_gamma / 2 {
            let negated: Vec<usize> = idx
                .iter()
                .enumerate()
                .map(|(d, &i)| mirror_index(grid.level(level_of(d)).gamma(), i))
                .collect();
            let partner = match side {
                PairingSide::Row => maps.encode_row(level, &negated),
                PairingSide::Col => maps.encode_col(level, &negated),
            };
            positions.push(h);
            positions.push(partner);
        }
    }
    debug_assert_eq!(positions.len(), len);
    Ok(ConjugatePairing { positions })
}

fn mirror_multi(grid: &QuadGrid, idx: &[usize]) -> Vec<usize> {
    idx.iter()
        .enumerate()
        .map(|(d, &i)| mirror_index(grid.level(d).gamma(), i))
        .collect()
}

/// Real counterparts of the data matrices, assembled without any complex
/// intermediate.
#[derive(Debug, Clone)]
pub struct RealBlocks {
    pub loewner: Vec<DMatrix<f64>>,
    pub shifted: Vec<DMatrix<f64>>,
    pub coupling: Vec<DMatrix<f64>>,
    pub input: DVector<f64>,
    pub output: RowDVector<f64>,
}

/// Real 2x2 right-hand side  `[[Re a + Re b, Im a - Im b],
///                             [-Im a - Im b, Re a - Re b]]`.
fn pair_rhs(a: num_complex::Complex64, b: num_complex::Complex64) -> [[f64; 2]; 2] {
    [[a.re + b.re, a.im - b.im], [-a.im - b.im, a.re - b.re]]
}

/// Assembles the real divided-difference matrix and its shifted variant of
/// level j by solving, per 2x2 block, the real linear system
/// `X D_lambda - Y = M1`, `D_mu X - Y = M2` with skew blocks
/// `D_lambda = [[0, lambda], [-lambda, 0]]`.
pub fn realify_loewner_pair(
    j: usize,
    samples: &SampleSet,
    grid: &QuadGrid,
    maps: &MultiIndexMap,
    row_pairs: &ConjugatePairing,
    col_pairs: &ConjugatePairing,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let (nr, nc) = (maps.row_len(j), maps.col_len(j));
    let mut u = DMatrix::<f64>::zeros(nr, nc);
    let mut a = DMatrix::<f64>::zeros(nr, nc);
    for bi in 0..nr / 2 {
        let row_rep = maps.decode_row(j, row_pairs.position(2 * bi));
        for bj in 0..nc / 2 {
            let col_rep = maps.decode_col(j, col_pairs.position(2 * bj));
            let col_neg = mirror_multi(grid, &col_rep);
            let lam = grid.level(j).lambda()[col_rep[j]];
            let mu = grid.level(j).mu()[row_rep[0]];
            let det = mu * mu - lam * lam;
            if det.abs() < 1e-14 * (mu * mu).max(lam * lam) {
                return Err(Error::GridCollision {
                    level: j,
                    lambda: lam,
                    mu,
                });
            }
            let delta = weight_product(grid, j, &row_rep, &col_rep);

            let h_mu1 = samples.require(&mixed_freqs(grid, j, j, &row_rep, &col_rep))?;
            let h_mu2 = samples.require(&mixed_freqs(grid, j, j, &row_rep, &col_neg))?;
            let h_lam1 = samples.require(&mixed_freqs(grid, j + 1, j, &row_rep, &col_rep))?;
            let h_lam2 = samples.require(&mixed_freqs(grid, j + 1, j, &row_rep, &col_neg))?;

            let m1 = pair_rhs(h_mu1, h_mu2);
            let m2 = pair_rhs(h_lam1, h_lam2);
            // difference system: X D_lambda - D_mu X = M1 - M2
            let d00 = delta * (m1[0][0] - m2[0][0]);
            let d01 = delta * (m1[0][1] - m2[0][1]);
            let d10 = delta * (m1[1][0] - m2[1][0]);
            let d11 = delta * (m1[1][1] - m2[1][1]);
            let x11 = (-lam * d01 + mu * d10) / det;
            let x22 = (-mu * d01 + lam * d10) / det;
            let x12 = (lam * d00 + mu * d11) / det;
            let x21 = (-mu * d00 - lam * d11) / det;
            // Y = X D_lambda - M1
            let y11 = -lam * x12 - delta * m1[0][0];
            let y12 = lam * x11 - delta * m1[0][1];
            let y21 = -lam * x22 - delta * m1[1][0];
            let y22 = lam * x21 - delta * m1[1][1];

            u[(2 * bi, 2 * bj)] = x11;
            u[(2 * bi, 2 * bj + 1)] = x12;
            u[(2 * bi + 1, 2 * bj)] = x21;
            u[(2 * bi + 1, 2 * bj + 1)] = x22;
            a[(2 * bi, 2 * bj)] = y11;
            a[(2 * bi, 2 * bj + 1)] = y12;
            a[(2 * bi + 1, 2 * bj)] = y21;
            a[(2 * bi + 1, 2 * bj + 1)] = y22;
        }
    }
    Ok((u, a))
}

/// Real coupling data matrix of chain link j (rows paired at level j+1,
/// columns at level j).
pub fn realify_coupling(
    j: usize,
    samples: &SampleSet,
    grid: &QuadGrid,
    maps: &MultiIndexMap,
    row_pairs: &ConjugatePairing,
    col_pairs: &ConjugatePairing,
) -> Result<DMatrix<f64>> {
    let (nr, nc) = (maps.row_len(j + 1), maps.col_len(j));
    let mut out = DMatrix::<f64>::zeros(nr, nc);
    for bi in 0..nr / 2 {
        let row_rep = maps.decode_row(j + 1, row_pairs.position(2 * bi));
        for bj in 0..nc / 2 {
            let col_rep = maps.decode_col(j, col_pairs.position(2 * bj));
            let col_neg = mirror_multi(grid, &col_rep);
            let coeff = weight_product(grid, j + 1, &row_rep, &col_rep);
            let h1 = samples.require(&mixed_freqs(grid, j + 1, j + 1, &row_rep, &col_rep))?;
            let h2 = samples.require(&mixed_freqs(grid, j + 1, j + 1, &row_rep, &col_neg))?;
            let block = pair_rhs(h1, h2);
            out[(2 * bi, 2 * bj)] = coeff * block[0][0];
            out[(2 * bi, 2 * bj + 1)] = coeff * block[0][1];
            out[(2 * bi + 1, 2 * bj)] = coeff * block[1][0];
            out[(2 * bi + 1, 2 * bj + 1)] = coeff * block[1][1];
        }
    }
    Ok(out)
}

/// Real input vector and output row: per pair
/// `sqrt 2 * [Re b; -Im b]` and `sqrt 2 * [Re c, Im c]`.
pub fn realify_input_output(
    samples: &SampleSet,
    grid: &QuadGrid,
    maps: &MultiIndexMap,
    input_pairs: &ConjugatePairing,
    output_pairs: &ConjugatePairing,
) -> Result<(DVector<f64>, RowDVector<f64>)> {
    let k = grid.k();
    let sqrt2 = std::f64::consts::SQRT_2;

    let nb = maps.row_len(0);
    let mut b = DVector::<f64>::zeros(nb);
    for bi in 0..nb / 2 {
        let rep = maps.decode_row(0, input_pairs.position(2 * bi));
        let coeff = weight_product(grid, 0, &rep, &[]);
        let val = samples.require(&mixed_freqs(grid, 0, 0, &rep, &[]))? * coeff;
        b[2 * bi] = sqrt2 * val.re;
        b[2 * bi + 1] = -sqrt2 * val.im;
    }

    let nc = maps.col_len(k - 1);
    let mut c = RowDVector::<f64>::zeros(nc);
    for bj in 0..nc / 2 {
        let rep = maps.decode_col(k - 1, output_pairs.position(2 * bj));
        let coeff = weight_product(grid, k, &[], &rep);
        let val = samples.require(&mixed_freqs(grid, k, k, &[], &rep))? * coeff;
        c[2 * bj] = sqrt2 * val.re;
        c[2 * bj + 1] = sqrt2 * val.im;
    }
    Ok((b, c))
}

/// Assembles all real data blocks from the shared sample set.
pub fn assemble_real_blocks(
    samples: &SampleSet,
    grid: &QuadGrid,
    maps: &MultiIndexMap,
) -> Result<RealBlocks> {
    let k = grid.k();
    let row_pairs: Vec<ConjugatePairing> = (0..k)
        .map(|j| pair_permutation(grid, maps, j, PairingSide::Row))
        .collect::<Result<Vec<_>>>()?;
    let col_pairs: Vec<ConjugatePairing> = (0..k)
        .map(|j| pair_permutation(grid, maps, j, PairingSide::Col))
        .collect::<Result<Vec<_>>>()?;

    let mut loewner = Vec::with_capacity(k);
    let mut shifted = Vec::with_capacity(k);
    for j in 0..k {
        let (u, a) = realify_loewner_pair(j, samples, grid, maps, &row_pairs[j], &col_pairs[j])?;
        loewner.push(u);
        shifted.push(a);
    }
    let coupling = (0..k - 1)
        .map(|j| realify_coupling(j, samples, grid, maps, &row_pairs[j + 1], &col_pairs[j]))
        .collect::<Result<Vec<_>>>()?;
    let (input, output) =
        realify_input_output(samples, grid, maps, &row_pairs[0], &col_pairs[k - 1])?;
    Ok(RealBlocks {
        loewner,
        shifted,
        coupling,
        input,
        output,
    })
}

fn svd_projectors_real(
    m: &DMatrix<f64>,
    r: usize,
    level: usize,
) -> Result<(DMatrix<f64>, DMatrix<f64>, Vec<f64>)> {
    let mut svd = m.clone().svd(true, true);
    let mut u = svd.u.take().expect("left vectors requested");
    let mut v_t = svd.v_t.take().expect("right vectors requested");
    fix_svd_signs(&mut u, &mut v_t);
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
    let s_inv_sqrt =
        DMatrix::<f64>::from_fn(r, r, |a, b| if a == b { 1.0 / sigma[a].sqrt() } else { 0.0 });
    let u1 = u.columns(0, r).into_owned();
    let y1 = v_t.rows(0, r).transpose();
    let left = &s_inv_sqrt * u1.transpose();
    let right = y1 * &s_inv_sqrt;
    Ok((left, right, sigma))
}

/// Nonintrusive reduction executed entirely in real arithmetic; the output
/// is a real system by construction. Also returns the singular-value
/// spectra of the real data matrices (equal to the complex ones, the two
/// differ by a unitary congruence).
pub fn dd_reduce_real(
    blocks: &RealBlocks,
    orders: &[usize],
) -> Result<(ReducedKPowerSystem, Vec<Vec<f64>>)> {
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
        let (lj, rj, sj) = svd_projectors_real(&blocks.loewner[j], r, j)?;
        left.push(lj);
        right.push(rj);
        spectra.push(sj);
    }
    let a_red: Vec<DMatrix<f64>> = (0..k)
        .map(|j| &left[j] * &blocks.shifted[j] * &right[j])
        .collect();
    let n_red: Vec<DMatrix<f64>> = (0..k - 1)
        .map(|j| &left[j + 1] * &blocks.coupling[j] * &right[j])
        .collect();
    let b_red = (&left[0] * &blocks.input).column(0).into_owned();
    let c_red = (&blocks.output * &right[k - 1]).row(0).into_owned();
    let sys = KPowerSystem::new(a_red, n_red, b_red, c_red)?;
    Ok((sys, spectra))
}

/// One-call data-driven reduction on the real path.
pub fn dd_reduce_real_from_samples(
    samples: &SampleSet,
    grid: &QuadGrid,
    orders: &[usize],
) -> Result<(ReducedKPowerSystem, Vec<Vec<f64>>)> {
    let maps = MultiIndexMap::new(grid);
    let blocks = assemble_real_blocks(samples, grid, &maps)?;
    dd_reduce_real(&blocks, orders)
}
