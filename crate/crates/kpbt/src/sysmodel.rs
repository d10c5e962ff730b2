//! Cascaded bilinear ("K-power") system records and their block realization.
//!
//! A system of order k is a chain of subsystems
//!
//! ```text
//!   x1' = A1 x1 + B1 u
//!   xj' = Aj xj + N_{j-1} x_{j-1} u      (j = 2..k)
//!   y   = Ck xk
//! ```
//!
//! which is a bilinear system whose input-output map is homogeneous of
//! degree k in the input. The block realization stacks the chain into a
//! single bilinear system with block-diagonal A and block-subdiagonal N.

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector, RowDVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A validated K-power bilinear system with real coefficients.
///
/// Immutable after construction; cheap to share across threads read-only.
#[derive(Debug, Clone)]
pub struct KPowerSystem {
    dims: Vec<usize>,
    a: Vec<DMatrix<f64>>,
    /// Coupling blocks; `n[j]` maps subsystem j into subsystem j+1
    /// (shape `dims[j+1] x dims[j]`). Empty for k = 1.
    n: Vec<DMatrix<f64>>,
    b1: DVector<f64>,
    ck: RowDVector<f64>,
    abscissas: OnceLock<Vec<f64>>,
}

/// A reduced system has exactly the same structural shape as the original.
pub type ReducedKPowerSystem = KPowerSystem;

impl KPowerSystem {
    /// Validates dimensions and builds a system record.
    ///
    /// `a` holds the k square subsystem matrices, `n` the k-1 coupling
    /// blocks with the chain shape `n[j]: dims[j+1] x dims[j]`.
    pub fn new(
        a: Vec<DMatrix<f64>>,
        n: Vec<DMatrix<f64>>,
        b1: DVector<f64>,
        ck: RowDVector<f64>,
    ) -> Result<Self> {
        if a.is_empty() {
            return Err(Error::EmptySystem);
        }
        let k = a.len();
        if n.len() + 1 != k {
            return Err(Error::DimensionMismatch {
                context: "coupling list".into(),
                expected: format!("{} blocks for k = {}", k - 1, k),
                found: format!("{}", n.len()),
            });
        }
        let mut dims = Vec::with_capacity(k);
        for (j, aj) in a.iter().enumerate() {
            if aj.nrows() != aj.ncols() || aj.nrows() == 0 {
                return Err(Error::DimensionMismatch {
                    context: format!("A[{j}]"),
                    expected: "square nonempty".into(),
                    found: format!("{}x{}", aj.nrows(), aj.ncols()),
                });
            }
            dims.push(aj.nrows());
        }
        for (j, nj) in n.iter().enumerate() {
            if nj.nrows() != dims[j + 1] || nj.ncols() != dims[j] {
                return Err(Error::DimensionMismatch {
                    context: format!("N[{j}]"),
                    expected: format!("{}x{}", dims[j + 1], dims[j]),
                    found: format!("{}x{}", nj.nrows(), nj.ncols()),
                });
            }
        }
        if b1.len() != dims[0] {
            return Err(Error::DimensionMismatch {
                context: "B1".into(),
                expected: format!("length {}", dims[0]),
                found: format!("length {}", b1.len()),
            });
        }
        if ck.len() != dims[k - 1] {
            return Err(Error::DimensionMismatch {
                context: "Ck".into(),
                expected: format!("length {}", dims[k - 1]),
                found: format!("length {}", ck.len()),
            });
        }
        Ok(Self {
            dims,
            a,
            n,
            b1,
            ck,
            abscissas: OnceLock::new(),
        })
    }

    pub fn k(&self) -> usize {
        self.a.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    /// Total state dimension of the block realization.
    pub fn total_dim(&self) -> usize {
        self.dims.iter().sum()
    }

    pub fn a(&self, j: usize) -> &DMatrix<f64> {
        &self.a[j]
    }

    /// Coupling block from subsystem j into subsystem j+1.
    pub fn coupling(&self, j: usize) -> &DMatrix<f64> {
        &self.n[j]
    }

    pub fn b1(&self) -> &DVector<f64> {
        &self.b1
    }

    pub fn ck(&self) -> &RowDVector<f64> {
        &self.ck
    }

    /// Max real part of the eigenvalues of each subsystem matrix.
    ///
    /// Cached after the first call; the system is stable iff all entries
    /// are negative.
    pub fn spectral_abscissa(&self) -> Result<&[f64]> {
        if self.abscissas.get().is_none() {
            let mut out = Vec::with_capacity(self.k());
            for aj in &self.a {
                out.push(spectral_abscissa_of(aj)?);
            }
            let _ = self.abscissas.set(out);
        }
        Ok(self.abscissas.get().expect("just initialized"))
    }

    pub fn is_stable(&self) -> Result<bool> {
        Ok(self.spectral_abscissa()?.iter().all(|&r| r < 0.0))
    }

    /// Errors with the first offending subsystem if any A_j is not Hurwitz.
    pub fn ensure_stable(&self) -> Result<()> {
        for (level, &r) in self.spectral_abscissa()?.iter().enumerate() {
            if r >= 0.0 {
                return Err(Error::Unstable { level, abscissa: r });
            }
        }
        Ok(())
    }

    /// Assembles the block realization with its exact zero pattern.
    pub fn assemble_block(&self) -> BlockRealization {
        let k = self.k();
        let n_total = self.total_dim();
        let mut offsets = Vec::with_capacity(k);
        let mut acc = 0;
        for &d in &self.dims {
            offsets.push(acc);
            acc += d;
        }
        let mut a = DMatrix::<f64>::zeros(n_total, n_total);
        for (aj, &o) in self.a.iter().zip(&offsets) {
            a.view_mut((o, o), (aj.nrows(), aj.ncols())).copy_from(aj);
        }
        let mut n1 = DMatrix::<f64>::zeros(n_total, n_total);
        for j in 0..k - 1 {
            n1.view_mut((offsets[j + 1], offsets[j]), (self.dims[j + 1], self.dims[j]))
                .copy_from(&self.n[j]);
        }
        let mut b = DVector::<f64>::zeros(n_total);
        b.rows_mut(0, self.dims[0]).copy_from(&self.b1);
        let mut c = RowDVector::<f64>::zeros(n_total);
        c.columns_mut(offsets[k - 1], self.dims[k - 1])
            .copy_from(&self.ck);
        BlockRealization {
            dims: self.dims.clone(),
            a,
            n1,
            b,
            c,
        }
    }

    pub fn to_manifest(&self) -> SystemManifest {
        SystemManifest {
            k: self.k(),
            dims: self.dims.clone(),
            a: self.a.iter().map(matrix_rows).collect(),
            n: self.n.iter().map(matrix_rows).collect(),
            b1: self.b1.iter().copied().collect(),
            ck: self.ck.iter().copied().collect(),
        }
    }

    pub fn from_manifest(m: &SystemManifest) -> Result<Self> {
        let a = m
            .a
            .iter()
            .enumerate()
            .map(|(j, rows)| matrix_from_rows(rows, &format!("A[{j}]")))
            .collect::<Result<Vec<_>>>()?;
        let n = m
            .n
            .iter()
            .enumerate()
            .map(|(j, rows)| matrix_from_rows(rows, &format!("N[{j}]")))
            .collect::<Result<Vec<_>>>()?;
        let sys = Self::new(
            a,
            n,
            DVector::from_vec(m.b1.clone()),
            RowDVector::from_row_slice(&m.ck),
        )?;
        if m.k != sys.k() || m.dims != sys.dims {
            return Err(Error::DimensionMismatch {
                context: "manifest header".into(),
                expected: format!("k = {}, dims = {:?}", sys.k(), sys.dims),
                found: format!("k = {}, dims = {:?}", m.k, m.dims),
            });
        }
        Ok(sys)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        serde_json::to_writer_pretty(std::io::BufWriter::new(file), &self.to_manifest())?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        let manifest: SystemManifest = serde_json::from_reader(std::io::BufReader::new(file))?;
        Self::from_manifest(&manifest)
    }
}

/// The assembled single-system form: block-diagonal A, block-subdiagonal N.
#[derive(Debug, Clone)]
pub struct BlockRealization {
    dims: Vec<usize>,
    pub a: DMatrix<f64>,
    pub n1: DMatrix<f64>,
    pub b: DVector<f64>,
    pub c: RowDVector<f64>,
}

impl BlockRealization {
    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn total_dim(&self) -> usize {
        self.a.nrows()
    }

    /// Recovers the subsystem blocks; the round trip through
    /// [`KPowerSystem::assemble_block`] reproduces the inputs bit-exactly.
    pub fn extract_blocks(&self) -> Result<KPowerSystem> {
        let k = self.dims.len();
        let mut offsets = Vec::with_capacity(k);
        let mut acc = 0;
        for &d in &self.dims {
            offsets.push(acc);
            acc += d;
        }
        let a = (0..k)
            .map(|j| {
                self.a
                    .view((offsets[j], offsets[j]), (self.dims[j], self.dims[j]))
                    .into_owned()
            })
            .collect();
        let n = (0..k - 1)
            .map(|j| {
                self.n1
                    .view((offsets[j + 1], offsets[j]), (self.dims[j + 1], self.dims[j]))
                    .into_owned()
            })
            .collect();
        let b1 = self.b.rows(0, self.dims[0]).into_owned();
        let ck = self
            .c
            .columns(offsets[k - 1], self.dims[k - 1])
            .into_owned();
        KPowerSystem::new(a, n, b1, ck)
    }
}

/// A K-power system with complex coefficients.
///
/// Produced by the complex-arithmetic data-driven reduction; only transfer
/// evaluation is supported on it (time simulation stays real).
#[derive(Debug, Clone)]
pub struct ComplexKPowerSystem {
    dims: Vec<usize>,
    pub a: Vec<DMatrix<Complex64>>,
    pub n: Vec<DMatrix<Complex64>>,
    pub b1: DVector<Complex64>,
    pub ck: RowDVector<Complex64>,
}

impl ComplexKPowerSystem {
    pub fn new(
        a: Vec<DMatrix<Complex64>>,
        n: Vec<DMatrix<Complex64>>,
        b1: DVector<Complex64>,
        ck: RowDVector<Complex64>,
    ) -> Result<Self> {
        if a.is_empty() {
            return Err(Error::EmptySystem);
        }
        let k = a.len();
        if n.len() + 1 != k {
            return Err(Error::DimensionMismatch {
                context: "coupling list".into(),
                expected: format!("{} blocks for k = {}", k - 1, k),
                found: format!("{}", n.len()),
            });
        }
        let dims: Vec<usize> = a.iter().map(|m| m.nrows()).collect();
        for (j, nj) in n.iter().enumerate() {
            if nj.nrows() != dims[j + 1] || nj.ncols() != dims[j] {
                return Err(Error::DimensionMismatch {
                    context: format!("N[{j}]"),
                    expected: format!("{}x{}", dims[j + 1], dims[j]),
                    found: format!("{}x{}", nj.nrows(), nj.ncols()),
                });
            }
        }
        if b1.len() != dims[0] || ck.len() != dims[k - 1] {
            return Err(Error::DimensionMismatch {
                context: "B1/Ck".into(),
                expected: format!("lengths {}, {}", dims[0], dims[k - 1]),
                found: format!("lengths {}, {}", b1.len(), ck.len()),
            });
        }
        Ok(Self { dims, a, n, b1, ck })
    }

    pub fn k(&self) -> usize {
        self.a.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn to_manifest(&self) -> ComplexSystemManifest {
        ComplexSystemManifest {
            k: self.k(),
            dims: self.dims.clone(),
            a_re: self.a.iter().map(|m| matrix_rows(&m.map(|z| z.re))).collect(),
            a_im: self.a.iter().map(|m| matrix_rows(&m.map(|z| z.im))).collect(),
            n_re: self.n.iter().map(|m| matrix_rows(&m.map(|z| z.re))).collect(),
            n_im: self.n.iter().map(|m| matrix_rows(&m.map(|z| z.im))).collect(),
            b1_re: self.b1.iter().map(|z| z.re).collect(),
            b1_im: self.b1.iter().map(|z| z.im).collect(),
            ck_re: self.ck.iter().map(|z| z.re).collect(),
            ck_im: self.ck.iter().map(|z| z.im).collect(),
        }
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        serde_json::to_writer_pretty(std::io::BufWriter::new(file), &self.to_manifest())?;
        Ok(())
    }
}

/// JSON manifest for real systems: matrices as row-lists of numbers.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SystemManifest {
    pub k: usize,
    pub dims: Vec<usize>,
    #[serde(rename = "A")]
    pub a: Vec<Vec<Vec<f64>>>,
    #[serde(rename = "N")]
    pub n: Vec<Vec<Vec<f64>>>,
    #[serde(rename = "B1")]
    pub b1: Vec<f64>,
    #[serde(rename = "Ck")]
    pub ck: Vec<f64>,
}

/// JSON manifest for complex reduced systems (split into re/im parts).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComplexSystemManifest {
    pub k: usize,
    pub dims: Vec<usize>,
    #[serde(rename = "A_re")]
    pub a_re: Vec<Vec<Vec<f64>>>,
    #[serde(rename = "A_im")]
    pub a_im: Vec<Vec<Vec<f64>>>,
    #[serde(rename = "N_re")]
    pub n_re: Vec<Vec<Vec<f64>>>,
    #[serde(rename = "N_im")]
    pub n_im: Vec<Vec<Vec<f64>>>,
    #[serde(rename = "B1_re")]
    pub b1_re: Vec<f64>,
    #[serde(rename = "B1_im")]
    pub b1_im: Vec<f64>,
    #[serde(rename = "Ck_re")]
    pub ck_re: Vec<f64>,
    #[serde(rename = "Ck_im")]
    pub ck_im: Vec<f64>,
}

fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

fn matrix_from_rows(rows: &[Vec<f64>], context: &str) -> Result<DMatrix<f64>> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, |r| r.len());
    if nrows == 0 || ncols == 0 || rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::DimensionMismatch {
            context: context.into(),
            expected: "rectangular nonempty row list".into(),
            found: format!("{} rows", nrows),
        });
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

/// Max real part of the eigenvalues of a real square matrix.
pub fn spectral_abscissa_of(a: &DMatrix<f64>) -> Result<f64> {
    let eigs = complex_eigenvalues(a)?;
    Ok(eigs
        .iter()
        .map(|e| e.re)
        .fold(f64::NEG_INFINITY, f64::max))
}

/// Eigenvalues of a real square matrix via the real Schur form.
pub fn complex_eigenvalues(a: &DMatrix<f64>) -> Result<Vec<Complex64>> {
    if a.nrows() != a.ncols() {
        return Err(Error::DimensionMismatch {
            context: "eigenvalues".into(),
            expected: "square".into(),
            found: format!("{}x{}", a.nrows(), a.ncols()),
        });
    }
    if a.nrows() == 0 {
        return Ok(Vec::new());
    }
    let schur = a
        .clone()
        .try_schur(f64::EPSILON, 100_000)
        .ok_or_else(|| Error::Numeric("Schur iteration did not converge".into()))?;
    let (_, t) = schur.unpack();
    Ok(quasi_triangular_eigenvalues(&t))
}

/// Eigenvalues read off a quasi-upper-triangular (real Schur) matrix.
pub(crate) fn quasi_triangular_eigenvalues(t: &DMatrix<f64>) -> Vec<Complex64> {
    let n = t.nrows();
    let tiny = f64::EPSILON * t.norm().max(1.0);
    let mut eigs = Vec::with_capacity(n);
    let mut i = 0;
    while i < n {
        if i + 1 < n && t[(i + 1, i)].abs() > tiny {
            let (a, b, c, d) = (t[(i, i)], t[(i, i + 1)], t[(i + 1, i)], t[(i + 1, i + 1)]);
            let tr = a + d;
            let disc = (a - d) * (a - d) + 4.0 * b * c;
            if disc >= 0.0 {
                let s = disc.sqrt();
                eigs.push(Complex64::new((tr + s) / 2.0, 0.0));
                eigs.push(Complex64::new((tr - s) / 2.0, 0.0));
            } else {
                let s = (-disc).sqrt() / 2.0;
                eigs.push(Complex64::new(tr / 2.0, s));
                eigs.push(Complex64::new(tr / 2.0, -s));
            }
            i += 2;
        } else {
            eigs.push(Complex64::new(t[(i, i)], 0.0));
            i += 1;
        }
    }
    eigs
}
