//! Acceptance suite: one test per criterion, each printing a PASS line with
//! the measured numbers (run with `--nocapture` to see them).

use kpbt::balancing::{cascade_gramians, hankel_spectrum};
use kpbt::data_driven::{
    assemble_blocks, assemble_coupling, assemble_input, assemble_loewner, assemble_output,
    assemble_shifted_loewner, dd_reduce_complex,
};
use kpbt::examples::{build_benchmark, build_random_stable, scalar_cascade};
use kpbt::quadgrid::{
    build_grid, required_tuples, MultiIndexMap, QuadGrid, DEFAULT_LAMBDA_RANGE, DEFAULT_MU_RANGE,
};
use kpbt::realify::{assemble_real_blocks, dd_reduce_real};
use kpbt::reference;
use kpbt::sim::{integrate, relative_error, InputSignal};
use kpbt::transfer::{batch_sample, eval_hi_block, eval_hk, eval_hk_complex, SampleSet, SampleSource};
use kpbt::KPowerSystem;
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

fn pass(criterion: usize, name: &str, detail: &str) {
    println!("ACCEPTANCE {criterion} ({name}): PASS - {detail}");
}

fn sample_on_grid(sys: &KPowerSystem, grid: &QuadGrid) -> (MultiIndexMap, SampleSet) {
    let maps = MultiIndexMap::new(grid);
    let samples =
        batch_sample(SampleSource::System(sys), grid, &required_tuples(grid)).unwrap();
    (maps, samples)
}

fn rel_max_c(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
    let scale = b.iter().map(|z| z.norm()).fold(0.0f64, f64::max);
    let diff = a
        .iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0f64, f64::max);
    diff / scale.max(f64::MIN_POSITIVE)
}

/// Criterion 1: the data-driven assemblies equal the explicit quadrature
/// factor products elementwise on a batch of random stable systems.
#[test]
fn acceptance_1_factorization_identity() {
    let cases: [(usize, Vec<usize>, Vec<usize>, u64); 5] = [
        (2, vec![6, 5], vec![2, 4], 101),
        (2, vec![8, 4], vec![4, 4], 102),
        (3, vec![4, 3, 5], vec![2, 2, 2], 103),
        (3, vec![5, 4, 3], vec![2, 4, 2], 104),
        (2, vec![7, 8], vec![4, 2], 105),
    ];
    let tol = 1e-12;
    let mut worst = 0.0f64;
    for (k, dims, gammas, seed) in &cases {
        let sys = build_random_stable(*k, dims, *seed).unwrap();
        let grid = build_grid(gammas, (0.5, 2.0), (1.0, 4.0)).unwrap();
        let (maps, samples) = sample_on_grid(&sys, &grid);
        let factors = reference::quad_factors(&sys, &grid).unwrap();
        for j in 0..*k {
            let u = assemble_loewner(j, &samples, &grid, &maps).unwrap();
            let e = rel_max_c(&u, &(&factors.rt[j] * &factors.l[j]));
            assert!(e <= tol, "seed {seed} level {j}: loewner deviation {e:.3e}");
            worst = worst.max(e);

            let a = assemble_shifted_loewner(j, &samples, &grid, &maps).unwrap();
            let a_c = sys.a(j).map(|x| Complex64::new(x, 0.0));
            let e = rel_max_c(&a, &(&factors.rt[j] * a_c * &factors.l[j]));
            assert!(e <= tol, "seed {seed} level {j}: shifted deviation {e:.3e}");
            worst = worst.max(e);
        }
        for j in 0..k - 1 {
            let n = assemble_coupling(j, &samples, &grid, &maps).unwrap();
            let n_c = sys.coupling(j).map(|x| Complex64::new(x, 0.0));
            let e = rel_max_c(&n, &(&factors.rt[j + 1] * n_c * &factors.l[j]));
            assert!(e <= tol, "seed {seed} link {j}: coupling deviation {e:.3e}");
            worst = worst.max(e);
        }
        let b = assemble_input(&samples, &grid, &maps).unwrap();
        let b_oracle = &factors.rt[0] * sys.b1().map(|x| Complex64::new(x, 0.0));
        let e = (&b - &b_oracle).norm() / b_oracle.norm();
        assert!(e <= tol, "seed {seed}: input deviation {e:.3e}");
        worst = worst.max(e);

        let c = assemble_output(&samples, &grid, &maps).unwrap();
        let c_oracle = sys.ck().map(|x| Complex64::new(x, 0.0)) * &factors.l[k - 1];
        let e = (&c - &c_oracle).norm() / c_oracle.norm();
        assert!(e <= tol, "seed {seed}: output deviation {e:.3e}");
        worst = worst.max(e);
    }
    pass(
        1,
        "factorization identity",
        &format!("5 systems, all assemblies within {worst:.2e} of factor oracle (tol 1e-12)"),
    );
}

/// Criterion 2: closed-form Gramians and Hankel values of the scalar fixture.
#[test]
fn acceptance_2_analytic_gramians() {
    let sys = scalar_cascade();
    let grams = cascade_gramians(&sys).unwrap();
    let spec = hankel_spectrum(&grams);
    let tol = 1e-12;
    let checks = [
        ("P11", grams.p[0][(0, 0)], 0.5),
        ("P22", grams.p[1][(0, 0)], 0.25),
        ("Q11", grams.q[0][(0, 0)], 0.25),
        ("Q22", grams.q[1][(0, 0)], 0.5),
        ("sigma1", spec.sigma[0][0], 0.125f64.sqrt()),
        ("sigma2", spec.sigma[1][0], 0.125f64.sqrt()),
    ];
    let mut worst = 0.0f64;
    for (name, got, want) in checks {
        let e = (got - want).abs() / want.abs();
        assert!(e <= tol, "{name}: got {got}, want {want}");
        worst = worst.max(e);
    }
    pass(
        2,
        "analytic Gramians",
        &format!("P = (0.5, 0.25), Q = (0.25, 0.5), sigma = sqrt(0.125); worst dev {worst:.2e}"),
    );
}

/// Criterion 3: the i-th transfer function vanishes for i != k.
#[test]
fn acceptance_3_vanishing_transfer() {
    let mut systems = vec![scalar_cascade()];
    systems.push(build_random_stable(2, &[5, 4], 201).unwrap());
    systems.push(build_random_stable(3, &[3, 4, 3], 202).unwrap());
    systems.push(build_random_stable(2, &[6, 6], 203).unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(204);
    let mut worst = 0.0f64;
    for sys in &systems {
        let block = sys.assemble_block();
        for i in 1..sys.k() {
            for _ in 0..10 {
                let shifts: Vec<Complex64> = (0..i)
                    .map(|_| Complex64::new(0.0, rng.random_range(-5.0..5.0)))
                    .collect();
                let v = eval_hi_block(&block, &shifts).unwrap().norm();
                assert!(v <= 1e-12, "H_{i} = {v:.3e} should vanish (k = {})", sys.k());
                worst = worst.max(v);
            }
        }
    }
    pass(
        3,
        "vanishing transfer",
        &format!("|H_i| <= {worst:.2e} for all i < k over 4 systems x 10 tuples"),
    );
}

/// Criterion 4: the quadrature Gramians improve monotonically with node count.
#[test]
fn acceptance_4_quadrature_convergence() {
    let sys = scalar_cascade();
    let err_at = |gamma: usize| {
        let grid = build_grid(&[gamma, gamma], DEFAULT_LAMBDA_RANGE, DEFAULT_MU_RANGE).unwrap();
        let f = reference::quad_factors(&sys, &grid).unwrap();
        let p_err = (f.gramian_p(0)[(0, 0)] - 0.5).abs();
        let q_err = (f.gramian_q(1)[(0, 0)] - 0.5).abs();
        (p_err, q_err)
    };
    let (p16, q16) = err_at(16);
    let (p64, q64) = err_at(64);
    assert!(p64 < p16, "P error must shrink: {p16:.3e} -> {p64:.3e}");
    assert!(q64 < q16, "Q error must shrink: {q16:.3e} -> {q64:.3e}");
    pass(
        4,
        "quadrature convergence",
        &format!("|P11 - 0.5|: {p16:.3e} -> {p64:.3e}; |Q22 - 0.5|: {q16:.3e} -> {q64:.3e}"),
    );
}

/// Criterion 5: the real path is unitarily equivalent to the complex path.
#[test]
fn acceptance_5_real_path_equivalence() {
    let sys = build_random_stable(2, &[6, 5], 205).unwrap();
    let grid = build_grid(&[4, 4], (0.5, 2.0), (1.0, 4.0)).unwrap();
    let (maps, samples) = sample_on_grid(&sys, &grid);

    let complex_blocks = assemble_blocks(&samples, &grid, &maps).unwrap();
    let real_blocks = assemble_real_blocks(&samples, &grid, &maps).unwrap();

    let mut worst_sigma = 0.0f64;
    for j in 0..2 {
        let s_c = complex_blocks.loewner[j].clone().svd(false, false).singular_values;
        let s_r = real_blocks.loewner[j].clone().svd(false, false).singular_values;
        for (a, b) in s_c.iter().zip(s_r.iter()) {
            let e = (a - b).abs() / s_c[0];
            assert!(e <= 1e-12, "sigma deviation {e:.3e} at level {j}");
            worst_sigma = worst_sigma.max(e);
        }
    }

    let (red_c, _) = dd_reduce_complex(&complex_blocks, &[3, 3]).unwrap();
    let (red_r, _) = dd_reduce_real(&real_blocks, &[3, 3]).unwrap();
    // real storage by construction: KPowerSystem holds f64 matrices only
    assert!(red_r.a(0).iter().all(|x| x.is_finite()));

    let mut rng = ChaCha8Rng::seed_from_u64(206);
    let mut worst_h = 0.0f64;
    for _ in 0..20 {
        let shifts: Vec<Complex64> = (0..2)
            .map(|_| Complex64::new(0.0, rng.random_range(0.3..3.0)))
            .collect();
        let h_c = eval_hk_complex(&red_c, &shifts).unwrap();
        let h_r = eval_hk(&red_r, &shifts).unwrap();
        let e = (h_c - h_r).norm() / h_c.norm().max(1e-12);
        assert!(e <= 1e-8, "probe deviation {e:.3e}");
        worst_h = worst_h.max(e);
    }
    pass(
        5,
        "real-path equivalence",
        &format!(
            "sigma match {worst_sigma:.2e} (tol 1e-12); 20 probes within {worst_h:.2e} (tol 1e-8); outputs real-typed"
        ),
    );
}

/// Criterion 6: end-to-end regression on the n = 600 benchmark; BT and the
/// real data-driven reduction track each other in the time domain.
///
/// The requested orders (25, 25) exceed the numerical rank of this
/// benchmark's Hankel spectra (the singular values fall below the 1e-14
/// rank floor around index 16 and 12), so both reductions clamp to the
/// achievable rank; everything beyond it is round-off noise.
#[test]
fn acceptance_6_benchmark_regression() {
    let sys = build_benchmark(300).unwrap();
    let requested = [25usize, 25];

    let grams = cascade_gramians(&sys).unwrap();
    let spectrum = hankel_spectrum(&grams);
    let bt_orders = kpbt::balancing::clamp_orders(&requested, &spectrum.sigma);
    let (bt_red, _) = kpbt::balancing::bt_reduce_from(&sys, &grams, &bt_orders).unwrap();

    let grid = build_grid(&[40, 40], DEFAULT_LAMBDA_RANGE, DEFAULT_MU_RANGE).unwrap();
    let (maps, samples) = sample_on_grid(&sys, &grid);
    assert_eq!(samples.len(), 4800);
    let real_blocks = assemble_real_blocks(&samples, &grid, &maps).unwrap();
    let dd_spectra: Vec<Vec<f64>> = real_blocks
        .loewner
        .iter()
        .map(|u| {
            let mut s: Vec<f64> = u.clone().svd(false, false).singular_values.iter().copied().collect();
            s.sort_by(|a, b| b.partial_cmp(a).unwrap());
            s
        })
        .collect();
    let dd_orders = kpbt::balancing::clamp_orders(&requested, &dd_spectra);
    let (dk_red, _) = dd_reduce_real(&real_blocks, &dd_orders).unwrap();

    let (t_final, dt) = (10.0, 1e-3);
    let mut details = Vec::new();
    for name in ["tcos", "sindecay"] {
        let input = InputSignal::by_name(name).unwrap();
        let y_full = integrate(&sys, &input, t_final, dt).unwrap();
        let y_bt = integrate(&bt_red, &input, t_final, dt).unwrap();
        let y_dk = integrate(&dk_red, &input, t_final, dt).unwrap();

        let bt_err = relative_error(&y_full, &y_bt).unwrap().l2;
        assert!(
            bt_err <= 1e-3,
            "{name}: BT relative L2 error {bt_err:.3e} exceeds 1e-3"
        );

        let full_norm: f64 = y_full.outputs.iter().map(|y| y * y).sum::<f64>().sqrt();
        let dev: f64 = y_dk
            .outputs
            .iter()
            .zip(&y_bt.outputs)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
            / full_norm;
        assert!(
            dev <= 10.0 * bt_err,
            "{name}: DKBBT deviates from BT by {dev:.3e} > 10 x {bt_err:.3e}"
        );
        details.push(format!("{name}: BT err {bt_err:.2e}, DKBBT-vs-BT {dev:.2e}"));
    }
    details.push(format!(
        "orders clamped to rank: BT {bt_orders:?}, DKBBT {dd_orders:?}"
    ));
    pass(6, "benchmark regression", &details.join("; "));
}

/// Criterion 7: the generalized Lyapunov solutions of the assembled
/// realization are block diagonal with the cascade Gramians on the diagonal.
#[test]
fn acceptance_7_block_diagonal_gramians() {
    let sys = build_random_stable(2, &[4, 5], 301).unwrap();
    let block = sys.assemble_block();
    let (p, q) = reference::generalized_gramians_kron(&block).unwrap();
    let grams = cascade_gramians(&sys).unwrap();

    let dims = [4usize, 5];
    let off = [0usize, 4];
    let p_scale = p.norm();
    let q_scale = q.norm();
    let p_off = p.view((off[1], off[0]), (dims[1], dims[0])).norm();
    let q_off = q.view((off[1], off[0]), (dims[1], dims[0])).norm();
    assert!(p_off <= 1e-10 * p_scale, "P off-diagonal block norm {p_off:.3e}");
    assert!(q_off <= 1e-10 * q_scale, "Q off-diagonal block norm {q_off:.3e}");

    let mut worst = 0.0f64;
    for j in 0..2 {
        let pj = p.view((off[j], off[j]), (dims[j], dims[j])).into_owned();
        let e = (&pj - &grams.p[j]).norm() / grams.p[j].norm();
        assert!(e <= 1e-10, "P{j}{j} deviates by {e:.3e}");
        worst = worst.max(e);
        let qj = q.view((off[j], off[j]), (dims[j], dims[j])).into_owned();
        let e = (&qj - &grams.q[j]).norm() / grams.q[j].norm();
        assert!(e <= 1e-10, "Q{j}{j} deviates by {e:.3e}");
        worst = worst.max(e);
    }
    pass(
        7,
        "block-diagonal Gramians",
        &format!(
            "off-diagonal norms {p_off:.2e}/{q_off:.2e}; diagonal blocks match cascade within {worst:.2e}"
        ),
    );
}

/// Criterion 8: degree-2 homogeneity of the input-output map.
#[test]
fn acceptance_8_homogeneity() {
    let sys = scalar_cascade();
    let (t_final, dt) = (10.0, 1e-3);
    let base = integrate(&sys, &InputSignal::by_name("tcos").unwrap(), t_final, dt).unwrap();
    let doubled = integrate(
        &sys,
        &InputSignal::parse("2 * t * cos(t)").unwrap(),
        t_final,
        dt,
    )
    .unwrap();
    let peak = base.outputs.iter().fold(0.0f64, |m, y| m.max(y.abs())) * 4.0;
    let mut worst = 0.0f64;
    for (y1, y2) in base.outputs.iter().zip(&doubled.outputs) {
        let e = (4.0 * y1 - y2).abs() / peak;
        assert!(e <= 1e-6, "homogeneity defect {e:.3e}");
        worst = worst.max(e);
    }
    pass(
        8,
        "homogeneity",
        &format!("u -> 2u scales y by 4 within {worst:.2e} (tol 1e-6)"),
    );
}
