//! Symmetric quadrature grids over the frequency axis and the multi-index
//! bookkeeping used by the data-driven assembly.
//!
//! Every level j carries two node families: `lambda` nodes discretize the
//! controllability-side integral, `mu` nodes the observability side. Node
//! sets are closed under negation and stored canonically: the first half
//! holds the positive nodes in ascending order, the second half their
//! mirrors, so `node[i] == -node[gamma/2 + i]` and paired weights are equal.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which node family a tuple entry was drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Lambda,
    Mu,
}

/// Nodes and (square-rooted) weights of one level.
#[derive(Debug, Clone)]
pub struct GridLevel {
    lambda: Vec<f64>,
    mu: Vec<f64>,
    rho: Vec<f64>,
    phi: Vec<f64>,
}

impl GridLevel {
    pub fn gamma(&self) -> usize {
        self.lambda.len()
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    pub fn node(&self, side: Side, i: usize) -> f64 {
        match side {
            Side::Lambda => self.lambda[i],
            Side::Mu => self.mu[i],
        }
    }

    /// Index of the negated node under the canonical mirror layout.
    pub fn mirror(&self, i: usize) -> usize {
        let half = self.gamma() / 2;
        if i < half {
            i + half
        } else {
            i - half
        }
    }
}

/// Per-level symmetric node/weight sets for a k-level grid.
#[derive(Debug, Clone)]
pub struct QuadGrid {
    levels: Vec<GridLevel>,
    lam_range: (f64, f64),
    mu_range: (f64, f64),
}

/// Default frequency range for the lambda nodes (rad/s).
pub const DEFAULT_LAMBDA_RANGE: (f64, f64) = (1e-3, 1e3);
/// Default frequency range for the mu nodes; shifted by a factor of two so
/// that |lambda| never equals |mu| while covering the same decades.
pub const DEFAULT_MU_RANGE: (f64, f64) = (2e-3, 2e3);

impl QuadGrid {
    pub fn k(&self) -> usize {
        self.levels.len()
    }

    pub fn level(&self, j: usize) -> &GridLevel {
        &self.levels[j]
    }

    pub fn levels(&self) -> &[GridLevel] {
        &self.levels
    }

    pub fn gammas(&self) -> Vec<usize> {
        self.levels.iter().map(|l| l.gamma()).collect()
    }

    pub fn lam_range(&self) -> (f64, f64) {
        self.lam_range
    }

    pub fn mu_range(&self) -> (f64, f64) {
        self.mu_range
    }
}

/// Builds a symmetric grid: per level, `gamma/2` log-spaced positive nodes
/// in the given range, mirrored to the negative axis, with trapezoid
/// weights. The lambda and mu node sets must be disjoint in magnitude at
/// every level, which keeps all assembly denominators nonsingular.
pub fn build_grid(
    gammas: &[usize],
    lam_range: (f64, f64),
    mu_range: (f64, f64),
) -> Result<QuadGrid> {
    if gammas.is_empty() {
        return Err(Error::EmptySystem);
    }
    check_range(lam_range)?;
    check_range(mu_range)?;
    let mut levels = Vec::with_capacity(gammas.len());
    for (level, &gamma) in gammas.iter().enumerate() {
        if gamma < 2 || gamma % 2 != 0 {
            return Err(Error::BadNodeCount { level, gamma });
        }
        let half = gamma / 2;
        let lam_pos = logspace(lam_range.0, lam_range.1, half);
        let mu_pos = logspace(mu_range.0, mu_range.1, half);
        // pointwise disjointness in magnitude, relative separation >= 1e-8
        for &l in &lam_pos {
            for &m in &mu_pos {
                if (l - m).abs() < 1e-8 * l.max(m) {
                    return Err(Error::GridCollision {
                        level,
                        lambda: l,
                        mu: m,
                    });
                }
            }
        }
        let rho_pos = trapezoid_weights(&lam_pos)?;
        let phi_pos = trapezoid_weights(&mu_pos)?;
        let mirror = |pos: &[f64]| -> Vec<f64> {
            pos.iter()
                .copied()
                .chain(pos.iter().map(|x| -x))
                .collect()
        };
        let dup = |w: &[f64]| -> Vec<f64> { w.iter().copied().chain(w.iter().copied()).collect() };
        levels.push(GridLevel {
            lambda: mirror(&lam_pos),
            mu: mirror(&mu_pos),
            rho: dup(&rho_pos),
            phi: dup(&phi_pos),
        });
    }
    Ok(QuadGrid {
        levels,
        lam_range,
        mu_range,
    })
}

fn check_range((lo, hi): (f64, f64)) -> Result<()> {
    if !(lo > 0.0 && hi >= lo && lo.is_finite() && hi.is_finite()) {
        return Err(Error::BadRange { lo, hi });
    }
    Ok(())
}

/// `m` logarithmically spaced points in `[lo, hi]`; a single point lands on
/// the geometric midpoint.
fn logspace(lo: f64, hi: f64, m: usize) -> Vec<f64> {
    if m == 1 {
        return vec![(lo * hi).sqrt()];
    }
    let (la, lb) = (lo.log10(), hi.log10());
    (0..m)
        .map(|i| 10f64.powf(la + (lb - la) * i as f64 / (m - 1) as f64))
        .collect()
}

/// Trapezoid interval widths for ascending positive nodes: half-intervals at
/// the ends, `(x[i+1] - x[i-1]) / 2` inside. A single node lumps the whole
/// interval `[0, x]` into `x`.
pub fn trapezoid_widths(positive_nodes: &[f64]) -> Result<Vec<f64>> {
    if positive_nodes.is_empty()
        || positive_nodes[0] <= 0.0
        || positive_nodes.windows(2).any(|w| w[0] >= w[1])
    {
        return Err(Error::UnsortedNodes);
    }
    let m = positive_nodes.len();
    if m == 1 {
        return Ok(vec![positive_nodes[0]]);
    }
    let mut w = Vec::with_capacity(m);
    w.push((positive_nodes[1] - positive_nodes[0]) / 2.0);
    for i in 1..m - 1 {
        w.push((positive_nodes[i + 1] - positive_nodes[i - 1]) / 2.0);
    }
    w.push((positive_nodes[m - 1] - positive_nodes[m - 2]) / 2.0);
    Ok(w)
}

/// Square-rooted trapezoid weights `sqrt(w / (2 pi))`, so that summing
/// `weight^2 * f(node)` over the full mirrored grid approximates
/// `1/(2 pi) * integral of f` over the truncated frequency axis.
pub fn trapezoid_weights(positive_nodes: &[f64]) -> Result<Vec<f64>> {
    Ok(trapezoid_widths(positive_nodes)?
        .into_iter()
        .map(|w| (w / (2.0 * std::f64::consts::PI)).sqrt())
        .collect())
}

/// Bijections between quadrature multi-indices and row/column positions of
/// the assembled data matrices.
///
/// The row space of level j enumerates `(i_j, ..., i_{k-1})` (mu side, i_j
/// slowest, i_{k-1} fastest); the column space enumerates `(i_0, ..., i_j)`
/// (lambda side, i_j slowest, i_0 fastest). All indices are zero-based.
#[derive(Debug, Clone)]
pub struct MultiIndexMap {
    gammas: Vec<usize>,
}

impl MultiIndexMap {
    pub fn new(grid: &QuadGrid) -> Self {
        Self {
            gammas: grid.gammas(),
        }
    }

    pub fn k(&self) -> usize {
        self.gammas.len()
    }

    /// Number of rows at level j: product of gammas for levels j..k-1.
    pub fn row_len(&self, j: usize) -> usize {
        self.gammas[j..].iter().product()
    }

    /// Number of columns at level j: product of gammas for levels 0..=j.
    pub fn col_len(&self, j: usize) -> usize {
        self.gammas[..=j].iter().product()
    }

    /// Row position of the multi-index `(i_j, ..., i_{k-1})`.
    pub fn encode_row(&self, j: usize, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.k() - j);
        let mut h = 0;
        for (d, &i) in idx.iter().enumerate() {
            debug_assert!(i < self.gammas[j + d]);
            h = h * self.gammas[j + d] + i;
        }
        h
    }

    /// Multi-index `(i_j, ..., i_{k-1})` of row `h` at level j.
    pub fn decode_row(&self, j: usize, h: usize) -> Vec<usize> {
        let mut idx = vec![0; self.k() - j];
        let mut rest = h;
        for d in (0..idx.len()).rev() {
            let g = self.gammas[j + d];
            idx[d] = rest % g;
            rest /= g;
        }
        debug_assert_eq!(rest, 0);
        idx
    }

    /// Column position of the multi-index `(i_0, ..., i_j)`.
    pub fn encode_col(&self, j: usize, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), j + 1);
        let mut l = 0;
        for (d, &i) in idx.iter().enumerate().rev() {
            debug_assert!(i < self.gammas[d]);
            l = l * self.gammas[d] + i;
        }
        l
    }

    /// Multi-index `(i_0, ..., i_j)` of column `l` at level j.
    pub fn decode_col(&self, j: usize, l: usize) -> Vec<usize> {
        let mut idx = vec![0; j + 1];
        let mut rest = l;
        for (d, slot) in idx.iter_mut().enumerate() {
            let g = self.gammas[d];
            *slot = rest % g;
            rest /= g;
        }
        debug_assert_eq!(rest, 0);
        idx
    }
}

/// One sampling point of the k-th transfer function, recorded as grid
/// coordinates: per level a side (lambda/mu family) and a node index.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PlannedTuple {
    pub sides: Vec<Side>,
    pub indices: Vec<usize>,
}

impl PlannedTuple {
    /// Signed node frequencies; the sampling point is `i * freqs[d]` per level.
    pub fn freqs(&self, grid: &QuadGrid) -> Vec<f64> {
        self.sides
            .iter()
            .zip(&self.indices)
            .enumerate()
            .map(|(d, (&side, &i))| grid.level(d).node(side, i))
            .collect()
    }
}

/// The exact union of sampling tuples needed by every assembly operation:
/// for each split point j = 0..=k, the tuples take lambda nodes on levels
/// below j and mu nodes from level j upward, over the full symmetric node
/// sets. The union is disjoint across splits, `(k+1) * prod(gamma)` tuples.
pub fn required_tuples(grid: &QuadGrid) -> Vec<PlannedTuple> {
    let k = grid.k();
    let gammas = grid.gammas();
    let total: usize = gammas.iter().product();
    let mut out = Vec::with_capacity((k + 1) * total);
    for split in 0..=k {
        let sides: Vec<Side> = (0..k)
            .map(|d| if d < split { Side::Lambda } else { Side::Mu })
            .collect();
        let mut idx = vec![0usize; k];
        loop {
            out.push(PlannedTuple {
                sides: sides.clone(),
                indices: idx.clone(),
            });
            // odometer increment, level 0 fastest
            let mut d = 0;
            loop {
                idx[d] += 1;
                if idx[d] < gammas[d] {
                    break;
                }
                idx[d] = 0;
                d += 1;
                if d == k {
                    break;
                }
            }
            if d == k {
                break;
            }
        }
    }
    out
}

/// Grid description as stored in CLI configuration files.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridSpec {
    pub gammas: Vec<usize>,
    pub lam_range: (f64, f64),
    pub mu_range: (f64, f64),
}

impl GridSpec {
    pub fn with_defaults(gammas: Vec<usize>) -> Self {
        Self {
            gammas,
            lam_range: DEFAULT_LAMBDA_RANGE,
            mu_range: DEFAULT_MU_RANGE,
        }
    }

    pub fn build(&self) -> Result<QuadGrid> {
        build_grid(&self.gammas, self.lam_range, self.mu_range)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        serde_json::to_writer_pretty(std::io::BufWriter::new(file), self)?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Ok(serde_json::from_reader(std::io::BufReader::new(file))?)
    }
}
