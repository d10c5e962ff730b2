//! Evaluation of the multivariate transfer functions of K-power systems and
//! sample sets keyed by frequency tuples.
//!
//! The k-th transfer function is the only nonvanishing frequency-domain
//! kernel of a K-power system:
//!
//! ```text
//!   H_k(s_1, ..., s_k) = Ck (s_k I - A_k)^-1 N_{k-1} ... N_1 (s_1 I - A_1)^-1 B1
//! ```
//!
//! evaluated here by k sequential linear solves, never by forming inverses.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::quadgrid::{PlannedTuple, QuadGrid};
use crate::sysmodel::{BlockRealization, ComplexKPowerSystem, KPowerSystem};

/// Entrywise complex conjugate of a frequency tuple.
pub fn conj_tuple(shifts: &[Complex64]) -> Vec<Complex64> {
    shifts.iter().map(|s| s.conj()).collect()
}

fn shifted(a: &DMatrix<f64>, s: Complex64) -> DMatrix<Complex64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| {
        let d = if i == j { s } else { Complex64::new(0.0, 0.0) };
        d - Complex64::new(a[(i, j)], 0.0)
    })
}

fn shifted_complex(a: &DMatrix<Complex64>, s: Complex64) -> DMatrix<Complex64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| {
        let d = if i == j { s } else { Complex64::new(0.0, 0.0) };
        d - a[(i, j)]
    })
}

fn to_complex(m: &DMatrix<f64>) -> DMatrix<Complex64> {
    m.map(|x| Complex64::new(x, 0.0))
}

/// Evaluates the k-th transfer function of a real system at a full-length
/// tuple by the sequential solve cascade.
pub fn eval_hk(sys: &KPowerSystem, shifts: &[Complex64]) -> Result<Complex64> {
    let k = sys.k();
    if shifts.len() != k {
        return Err(Error::DimensionMismatch {
            context: "transfer tuple".into(),
            expected: format!("length {k}"),
            found: format!("length {}", shifts.len()),
        });
    }
    let b = sys.b1().map(|x| Complex64::new(x, 0.0));
    let mut v = solve_level(&shifted(sys.a(0), shifts[0]), &b, 0, shifts[0])?;
    for (j, &s) in shifts.iter().enumerate().skip(1) {
        let rhs = to_complex(sys.coupling(j - 1)) * &v;
        v = solve_level(&shifted(sys.a(j), s), &rhs, j, s)?;
    }
    let mut acc = Complex64::new(0.0, 0.0);
    for (c, x) in sys.ck().iter().zip(v.iter()) {
        acc += Complex64::new(*c, 0.0) * x;
    }
    Ok(acc)
}

/// Same cascade for complex-valued (reduced) systems.
pub fn eval_hk_complex(sys: &ComplexKPowerSystem, shifts: &[Complex64]) -> Result<Complex64> {
    let k = sys.k();
    if shifts.len() != k {
        return Err(Error::DimensionMismatch {
            context: "transfer tuple".into(),
            expected: format!("length {k}"),
            found: format!("length {}", shifts.len()),
        });
    }
    let mut v = solve_level(&shifted_complex(&sys.a[0], shifts[0]), &sys.b1, 0, shifts[0])?;
    for (j, &s) in shifts.iter().enumerate().skip(1) {
        let rhs = &sys.n[j - 1] * &v;
        v = solve_level(&shifted_complex(&sys.a[j], s), &rhs, j, s)?;
    }
    Ok((&sys.ck * v)[(0, 0)])
}

/// Evaluates the i-th transfer function on the assembled block realization;
/// vanishes identically for i != k.
pub fn eval_hi_block(block: &BlockRealization, shifts: &[Complex64]) -> Result<Complex64> {
    if shifts.is_empty() {
        return Err(Error::DimensionMismatch {
            context: "transfer tuple".into(),
            expected: "length >= 1".into(),
            found: "empty".into(),
        });
    }
    let b = block.b.map(|x| Complex64::new(x, 0.0));
    let n1 = to_complex(&block.n1);
    let mut v = solve_level(&shifted(&block.a, shifts[0]), &b, 0, shifts[0])?;
    for (j, &s) in shifts.iter().enumerate().skip(1) {
        let rhs = &n1 * &v;
        v = solve_level(&shifted(&block.a, s), &rhs, j, s)?;
    }
    let mut acc = Complex64::new(0.0, 0.0);
    for (c, x) in block.c.iter().zip(v.iter()) {
        acc += Complex64::new(*c, 0.0) * x;
    }
    Ok(acc)
}

fn solve_level(
    m: &DMatrix<Complex64>,
    rhs: &DVector<Complex64>,
    level: usize,
    shift: Complex64,
) -> Result<DVector<Complex64>> {
    m.clone()
        .lu()
        .solve(rhs)
        .ok_or(Error::SingularShift { level, shift })
}

/// Where a stored sample value came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Computed,
    Imported,
}

#[derive(Debug, Clone)]
struct SampleEntry {
    freqs: Vec<f64>,
    value: Complex64,
    provenance: Provenance,
}

/// Map from frequency tuples on the imaginary axis to values of H_k.
///
/// Tuples are keyed by the canonical 17-significant-digit decimal strings of
/// their imaginary parts, which round-trips f64 exactly: lookups are exact
/// whenever both sides obtained the frequencies from the same grid (or from
/// this module's CSV format).
#[derive(Debug, Clone)]
pub struct SampleSet {
    k: usize,
    map: HashMap<String, SampleEntry>,
}

/// Canonical decimal form of one frequency (17 significant digits).
pub fn canonical_freq(x: f64) -> String {
    format!("{:.16e}", x)
}

fn key_of(freqs: &[f64]) -> String {
    let mut s = String::with_capacity(freqs.len() * 24);
    for (i, f) in freqs.iter().enumerate() {
        if i > 0 {
            s.push(',');
        }
        s.push_str(&canonical_freq(*f));
    }
    s
}

impl SampleSet {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            map: HashMap::new(),
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn insert(&mut self, freqs: Vec<f64>, value: Complex64, provenance: Provenance) {
        debug_assert_eq!(freqs.len(), self.k);
        self.map.insert(
            key_of(&freqs),
            SampleEntry {
                freqs,
                value,
                provenance,
            },
        );
    }

    /// Value at a tuple of imaginary parts, if present.
    pub fn get(&self, freqs: &[f64]) -> Option<Complex64> {
        self.map.get(&key_of(freqs)).map(|e| e.value)
    }

    /// Value at a tuple, erroring with the tuple spelled out when absent.
    pub fn require(&self, freqs: &[f64]) -> Result<Complex64> {
        self.get(freqs).ok_or_else(|| Error::MissingSamples {
            count: 1,
            first: key_of(freqs),
        })
    }

    pub fn provenance(&self, freqs: &[f64]) -> Option<Provenance> {
        self.map.get(&key_of(freqs)).map(|e| e.provenance)
    }

    /// Entries sorted by frequency tuple, for deterministic exports.
    fn sorted_entries(&self) -> Vec<&SampleEntry> {
        let mut entries: Vec<&SampleEntry> = self.map.values().collect();
        entries.sort_by(|a, b| {
            a.freqs
                .iter()
                .zip(&b.freqs)
                .find_map(|(x, y)| x.partial_cmp(y).filter(|o| o.is_ne()))
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        entries
    }

    /// Writes the CSV interchange format: header `s1_im,...,sk_im,re,im`,
    /// one row per tuple, 17 significant digits.
    pub fn to_csv<W: Write>(&self, mut w: W) -> Result<()> {
        for i in 1..=self.k {
            write!(w, "s{i}_im,")?;
        }
        writeln!(w, "re,im")?;
        for e in self.sorted_entries() {
            for f in &e.freqs {
                write!(w, "{},", canonical_freq(*f))?;
            }
            writeln!(w, "{},{}", canonical_freq(e.value.re), canonical_freq(e.value.im))?;
        }
        Ok(())
    }

    pub fn from_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty sample file".into()))??;
        let cols: Vec<&str> = header.trim().split(',').collect();
        if cols.len() < 3 || cols[cols.len() - 2] != "re" || cols[cols.len() - 1] != "im" {
            return Err(Error::Parse(format!("bad sample header: {header}")));
        }
        let k = cols.len() - 2;
        for (i, c) in cols[..k].iter().enumerate() {
            if *c != format!("s{}_im", i + 1) {
                return Err(Error::Parse(format!("bad sample header column: {c}")));
            }
        }
        let mut set = SampleSet::new(k);
        for (lineno, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.trim().split(',').collect();
            if fields.len() != k + 2 {
                return Err(Error::Parse(format!(
                    "sample row {} has {} fields, expected {}",
                    lineno + 2,
                    fields.len(),
                    k + 2
                )));
            }
            let parse = |s: &str| -> Result<f64> {
                s.parse::<f64>()
                    .map_err(|_| Error::Parse(format!("bad number '{s}' on row {}", lineno + 2)))
            };
            let freqs = fields[..k].iter().map(|s| parse(s)).collect::<Result<Vec<_>>>()?;
            let re = parse(fields[k])?;
            let im = parse(fields[k + 1])?;
            set.insert(freqs, Complex64::new(re, im), Provenance::Imported);
        }
        Ok(set)
    }

    pub fn save_csv(&self, path: &std::path::Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.to_csv(std::io::BufWriter::new(file))
    }

    pub fn load_csv(path: &std::path::Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::from_csv(std::io::BufReader::new(file))
    }
}

/// Source for [`batch_sample`]: evaluate on a system, or read back from an
/// imported sample set.
pub enum SampleSource<'a> {
    System(&'a KPowerSystem),
    Imported(&'a SampleSet),
}

/// Produces a complete sample set covering `tuples`.
///
/// For a system source the evaluation shares resolvent factorizations and
/// cascade prefixes across tuples (each node value is reused by many
/// tuples); results are identical to tuple-by-tuple [`eval_hk`]. For an
/// imported source every requested tuple must already be present.
pub fn batch_sample(
    source: SampleSource<'_>,
    grid: &QuadGrid,
    tuples: &[PlannedTuple],
) -> Result<SampleSet> {
    match source {
        SampleSource::Imported(set) => {
            let mut out = SampleSet::new(grid.k());
            let mut missing: Vec<String> = Vec::new();
            for t in tuples {
                let freqs = t.freqs(grid);
                match set.get(&freqs) {
                    Some(v) => out.insert(freqs, v, Provenance::Imported),
                    None => missing.push(key_of(&freqs)),
                }
            }
            if !missing.is_empty() {
                missing.sort();
                return Err(Error::MissingSamples {
                    count: missing.len(),
                    first: missing.swap_remove(0),
                });
            }
            Ok(out)
        }
        SampleSource::System(sys) => {
            if sys.k() != grid.k() {
                return Err(Error::DimensionMismatch {
                    context: "batch_sample".into(),
                    expected: format!("grid with {} levels", sys.k()),
                    found: format!("{} levels", grid.k()),
                });
            }
            let freq_tuples: Vec<Vec<f64>> = tuples.iter().map(|t| t.freqs(grid)).collect();
            let values = eval_hk_grouped(sys, &freq_tuples)?;
            let mut out = SampleSet::new(sys.k());
            for (freqs, v) in freq_tuples.into_iter().zip(values) {
                out.insert(freqs, v, Provenance::Computed);
            }
            Ok(out)
        }
    }
}

/// Evaluates H_k at many purely imaginary tuples, factoring each shifted
/// subsystem matrix once per distinct node and reusing shared tuple
/// prefixes through the cascade.
pub fn eval_hk_grouped(sys: &KPowerSystem, freq_tuples: &[Vec<f64>]) -> Result<Vec<Complex64>> {
    let k = sys.k();
    for t in freq_tuples {
        if t.len() != k {
            return Err(Error::DimensionMismatch {
                context: "transfer tuple".into(),
                expected: format!("length {k}"),
                found: format!("length {}", t.len()),
            });
        }
    }

    // prefix of length d (bit patterns) -> cascade state vector after level d-1
    let mut prefix_states: HashMap<Vec<u64>, DVector<Complex64>> = HashMap::new();
    let mut values = vec![Complex64::new(0.0, 0.0); freq_tuples.len()];

    for d in 0..k {
        // group the distinct (prefix, node) extensions by node value
        let mut by_node: HashMap<u64, Vec<Vec<u64>>> = HashMap::new();
        let mut seen: std::collections::HashSet<Vec<u64>> = std::collections::HashSet::new();
        for t in freq_tuples {
            let prefix: Vec<u64> = t[..=d].iter().map(|f| f.to_bits()).collect();
            if seen.insert(prefix.clone()) {
                by_node.entry(t[d].to_bits()).or_default().push(prefix);
            }
        }
        let mut node_keys: Vec<u64> = by_node.keys().copied().collect();
        node_keys.sort_unstable();

        let coupling = if d > 0 {
            Some(to_complex(sys.coupling(d - 1)))
        } else {
            None
        };
        let mut next_states: HashMap<Vec<u64>, DVector<Complex64>> = HashMap::new();
        for node_bits in node_keys {
            let omega = f64::from_bits(node_bits);
            let s = Complex64::new(0.0, omega);
            let lu = shifted(sys.a(d), s).lu();
            for prefix in &by_node[&node_bits] {
                let rhs = if d == 0 {
                    sys.b1().map(|x| Complex64::new(x, 0.0))
                } else {
                    coupling.as_ref().unwrap() * &prefix_states[&prefix[..d]]
                };
                let v = lu
                    .solve(&rhs)
                    .ok_or(Error::SingularShift { level: d, shift: s })?;
                next_states.insert(prefix.clone(), v);
            }
        }
        prefix_states = next_states;
    }

    let ck = sys.ck();
    for (slot, t) in values.iter_mut().zip(freq_tuples) {
        let key: Vec<u64> = t.iter().map(|f| f.to_bits()).collect();
        let v = &prefix_states[&key];
        let mut acc = Complex64::new(0.0, 0.0);
        for (c, x) in ck.iter().zip(v.iter()) {
            acc += Complex64::new(*c, 0.0) * x;
        }
        *slot = acc;
    }
    Ok(values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::examples::{build_random_stable, scalar_cascade};
    use crate::quadgrid::{build_grid, required_tuples};
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn scalar_cascade_at_origin() {
        let sys = scalar_cascade();
        let v = eval_hk(&sys, &[c(0.0, 0.0), c(0.0, 0.0)]).unwrap();
        assert_relative_eq!(v.re, 1.0, max_relative = 1e-15);
        assert_relative_eq!(v.im, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn scalar_cascade_conjugate_pair_product() {
        let sys = scalar_cascade();
        // H2(i, -i) = 1 / ((1 - i)(1 + i)) = 0.5
        let v = eval_hk(&sys, &[c(0.0, 1.0), c(0.0, -1.0)]).unwrap();
        assert_relative_eq!(v.re, 0.5, max_relative = 1e-15);
        assert_relative_eq!(v.im, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn sequential_solves_match_dense_inverse_oracle() {
        let sys = build_random_stable(2, &[7, 5], 42).unwrap();
        let shifts = [c(0.3, 1.0), c(-0.1, 2.0)];
        let fast = eval_hk(&sys, &shifts).unwrap();
        let oracle = crate::reference::hk_dense_inverse(&sys, &shifts).unwrap();
        assert_relative_eq!(fast.re, oracle.re, max_relative = 1e-12);
        assert_relative_eq!(fast.im, oracle.im, max_relative = 1e-12);
    }

    #[test]
    fn benchmark_matches_dense_inverse_oracle() {
        let sys = crate::examples::build_benchmark(300).unwrap();
        let shifts = [c(0.0, 1.0), c(0.0, 1.0)];
        let fast = eval_hk(&sys, &shifts).unwrap();
        let oracle = crate::reference::hk_dense_inverse(&sys, &shifts).unwrap();
        assert!(
            (fast - oracle).norm() <= 1e-12 * oracle.norm(),
            "solve route {fast} vs inverse route {oracle}"
        );
    }

    #[test]
    fn vanishing_below_k_on_block() {
        let sys = scalar_cascade();
        let block = sys.assemble_block();
        let v = eval_hi_block(&block, &[c(0.0, 0.7)]).unwrap();
        assert!(v.norm() <= 1e-14, "H_1 should vanish, got {v}");
        // i = k matches the structured evaluation
        let v2 = eval_hi_block(&block, &[c(0.0, 0.0), c(0.0, 0.0)]).unwrap();
        assert_relative_eq!(v2.re, 1.0, max_relative = 1e-12);

        let sys3 = build_random_stable(3, &[4, 3, 5], 7).unwrap();
        let block3 = sys3.assemble_block();
        let scale = eval_hk(&sys3, &[c(0.0, 0.5), c(0.0, 1.0), c(0.0, 2.0)])
            .unwrap()
            .norm();
        let v3 = eval_hi_block(&block3, &[c(0.0, 0.5), c(0.0, 1.0)]).unwrap();
        assert!(v3.norm() <= 1e-12 * scale.max(1.0), "H_2 of k=3 system: {v3}");
    }

    #[test]
    fn conj_tuple_basics() {
        let t = [c(0.0, 1.0), c(0.0, -2.0)];
        assert_eq!(conj_tuple(&t), vec![c(0.0, -1.0), c(0.0, 2.0)]);
        let z = [c(0.0, 0.0), c(0.0, 0.0)];
        assert_eq!(conj_tuple(&z), z.to_vec());
    }

    #[test]
    fn conjugate_symmetry() {
        let sys = scalar_cascade();
        let t = [c(0.0, 1.0), c(0.0, 3.0)];
        let a = eval_hk(&sys, &conj_tuple(&t)).unwrap();
        let b = eval_hk(&sys, &t).unwrap().conj();
        assert_relative_eq!(a.re, b.re, max_relative = 1e-13);
        assert_relative_eq!(a.im, b.im, max_relative = 1e-13);
    }

    #[test]
    fn batch_covers_grid_and_matches_pointwise() {
        let sys = scalar_cascade();
        let grid = build_grid(&[2, 2], (1.0, 1.0), (2.0, 2.0)).unwrap();
        let tuples = required_tuples(&grid);
        let set = batch_sample(SampleSource::System(&sys), &grid, &tuples).unwrap();
        assert_eq!(set.len(), 12);
        for t in &tuples {
            let freqs = t.freqs(&grid);
            let shifts: Vec<Complex64> = freqs.iter().map(|&f| c(0.0, f)).collect();
            let direct = eval_hk(&sys, &shifts).unwrap();
            let batched = set.get(&freqs).unwrap();
            assert_relative_eq!(direct.re, batched.re, max_relative = 1e-13);
            assert_relative_eq!(direct.im, batched.im, max_relative = 1e-13);
            assert_eq!(set.provenance(&freqs), Some(Provenance::Computed));
        }
    }

    #[test]
    fn import_missing_tuple_is_reported() {
        let sys = scalar_cascade();
        let grid = build_grid(&[2, 2], (1.0, 1.0), (2.0, 2.0)).unwrap();
        let tuples = required_tuples(&grid);
        let mut set = batch_sample(SampleSource::System(&sys), &grid, &tuples).unwrap();
        // CSV round trip keeps every tuple findable
        let mut buf = Vec::new();
        set.to_csv(&mut buf).unwrap();
        let reread = SampleSet::from_csv(std::io::Cursor::new(&buf)).unwrap();
        let complete = batch_sample(SampleSource::Imported(&reread), &grid, &tuples).unwrap();
        assert_eq!(complete.len(), tuples.len());

        // drop one tuple and expect a missing-sample error naming it
        let victim = tuples[5].freqs(&grid);
        set = SampleSet::new(2);
        for t in &tuples[..5] {
            let freqs = t.freqs(&grid);
            set.insert(freqs.clone(), reread.get(&freqs).unwrap(), Provenance::Imported);
        }
        for t in &tuples[6..] {
            let freqs = t.freqs(&grid);
            set.insert(freqs.clone(), reread.get(&freqs).unwrap(), Provenance::Imported);
        }
        let err = batch_sample(SampleSource::Imported(&set), &grid, &tuples).unwrap_err();
        match err {
            Error::MissingSamples { count, first } => {
                assert_eq!(count, 1);
                assert_eq!(first, super::key_of(&victim));
            }
            other => panic!("expected MissingSamples, got {other}"),
        }
    }

    #[test]
    fn csv_header_shape() {
        let sys = scalar_cascade();
        let grid = build_grid(&[2, 2], (1.0, 1.0), (2.0, 2.0)).unwrap();
        let set = batch_sample(SampleSource::System(&sys), &grid, &required_tuples(&grid)).unwrap();
        let mut buf = Vec::new();
        set.to_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "s1_im,s2_im,re,im");
        assert_eq!(lines.count(), 12);
    }

    #[test]
    fn singular_shift_identifies_level() {
        let sys = scalar_cascade();
        // s = -1 equals the eigenvalue of A_2 at level 1
        let err = eval_hk(&sys, &[c(0.0, 0.0), c(-1.0, 0.0)]).unwrap_err();
        match err {
            Error::SingularShift { level, .. } => assert_eq!(level, 1),
            other => panic!("expected SingularShift, got {other}"),
        }
    }
}
