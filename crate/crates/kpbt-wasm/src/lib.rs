//! Browser demo bindings. Three interactive operations, each returning a
//! JSON string the page plots on a canvas:
//!
//! - Hankel spectrum of the tridiagonal benchmark at a chosen order,
//! - reduce-and-simulate with intrusive BT and real-arithmetic data-driven
//!   BT side by side,
//! - quadrature convergence of the frequency-domain Gramians of the scalar
//!   fixture.
//!
//! All sizes are capped so everything stays interactive inside a browser
//! tab.

use serde_json::json;
use wasm_bindgen::prelude::wasm_bindgen;

use kpbt::balancing::{bt_reduce_from, cascade_gramians, clamp_orders, hankel_spectrum};
use kpbt::examples::{build_benchmark, scalar_cascade};
use kpbt::quadgrid::{
    build_grid, required_tuples, MultiIndexMap, DEFAULT_LAMBDA_RANGE, DEFAULT_MU_RANGE,
};
use kpbt::realify::{assemble_real_blocks, dd_reduce_real};
use kpbt::reference::quad_factors;
use kpbt::sim::{integrate, relative_error, InputSignal};
use kpbt::transfer::{batch_sample, SampleSource};

fn err_json(e: impl std::fmt::Display) -> String {
    json!({ "error": e.to_string() }).to_string()
}

fn hankel_spectrum_impl(n: usize) -> Result<String, kpbt::Error> {
    let n = n.clamp(4, 150);
    let sys = build_benchmark(n)?;
    let grams = cascade_gramians(&sys)?;
    let spec = hankel_spectrum(&grams);
    Ok(json!({
        "n": n,
        "sigma": spec.sigma,
    })
    .to_string())
}

/// Hankel singular values of the order-2n benchmark.
#[wasm_bindgen]
pub fn demo_hankel_spectrum(n: usize) -> String {
    hankel_spectrum_impl(n).unwrap_or_else(err_json)
}

fn reduce_simulate_impl(
    n: usize,
    order: usize,
    gamma: usize,
    input: &str,
    t_final: f64,
    dt: f64,
) -> Result<String, kpbt::Error> {
    let n = n.clamp(4, 120);
    let order = order.max(1);
    let gamma = (gamma.clamp(2, 40) / 2) * 2;
    let t_final = t_final.clamp(0.5, 20.0);
    let dt = dt.clamp(1e-4, 0.1);

    let sys = build_benchmark(n)?;
    let signal = InputSignal::parse(input)?;

    let grams = cascade_gramians(&sys)?;
    let spectrum = hankel_spectrum(&grams);
    let bt_orders = clamp_orders(&[order, order], &spectrum.sigma);
    let (bt_red, _) = bt_reduce_from(&sys, &grams, &bt_orders)?;

    let grid = build_grid(&[gamma, gamma], DEFAULT_LAMBDA_RANGE, DEFAULT_MU_RANGE)?;
    let maps = MultiIndexMap::new(&grid);
    let samples = batch_sample(SampleSource::System(&sys), &grid, &required_tuples(&grid))?;
    let blocks = assemble_real_blocks(&samples, &grid, &maps)?;
    let dd_spectra: Vec<Vec<f64>> = blocks
        .loewner
        .iter()
        .map(|u| {
            let mut s: Vec<f64> = u.clone().svd(false, false).singular_values.iter().copied().collect();
            s.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
            s
        })
        .collect();
    let dd_orders = clamp_orders(&[order, order], &dd_spectra);
    let (dk_red, _) = dd_reduce_real(&blocks, &dd_orders)?;

    let y_full = integrate(&sys, &signal, t_final, dt)?;
    let y_bt = integrate(&bt_red, &signal, t_final, dt)?;
    let y_dk = integrate(&dk_red, &signal, t_final, dt)?;
    let e_bt = relative_error(&y_full, &y_bt)?;
    let e_dk = relative_error(&y_full, &y_dk)?;

    Ok(json!({
        "n": n,
        "bt_orders": bt_orders,
        "dd_orders": dd_orders,
        "gamma": gamma,
        "samples": samples.len(),
        "t": y_full.times,
        "y_full": y_full.outputs,
        "y_bt": y_bt.outputs,
        "y_dkbbt": y_dk.outputs,
        "e_bt": e_bt.pointwise,
        "e_dkbbt": e_dk.pointwise,
        "l2_bt": e_bt.l2,
        "l2_dkbbt": e_dk.l2,
    })
    .to_string())
}

/// Reduce the order-2n benchmark with BT and real data-driven BT, simulate
/// all three systems, and report trajectories plus pointwise errors.
#[wasm_bindgen]
pub fn demo_reduce_simulate(
    n: usize,
    order: usize,
    gamma: usize,
    input: &str,
    t_final: f64,
    dt: f64,
) -> String {
    reduce_simulate_impl(n, order, gamma, input, t_final, dt).unwrap_or_else(err_json)
}

fn quadrature_convergence_impl() -> Result<String, kpbt::Error> {
    let sys = scalar_cascade();
    let gammas = [8usize, 16, 32, 64, 128];
    let mut p_err = Vec::with_capacity(gammas.len());
    let mut q_err = Vec::with_capacity(gammas.len());
    for &g in &gammas {
        let grid = build_grid(&[g, g], DEFAULT_LAMBDA_RANGE, DEFAULT_MU_RANGE)?;
        let factors = quad_factors(&sys, &grid)?;
        p_err.push((factors.gramian_p(0)[(0, 0)] - 0.5).abs());
        q_err.push((factors.gramian_q(1)[(0, 0)] - 0.5).abs());
    }
    Ok(json!({
        "gammas": gammas,
        "p_error": p_err,
        "q_error": q_err,
    })
    .to_string())
}

/// Error of the frequency-domain quadrature Gramians of the scalar fixture
/// against their exact values, per node count.
#[wasm_bindgen]
pub fn demo_quadrature_convergence() -> String {
    quadrature_convergence_impl().unwrap_or_else(err_json)
}
