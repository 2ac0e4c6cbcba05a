//! Benchmark fixtures shared by the criterion benches.

use rcd_core::{
    generate_l1ls, generate_logistic, GeneratorParams, LogisticParams, Problem, SolverConfig,
    SolverKind,
};

/// The 4096 × 1024, density 1e-2, c = 1 least-squares instance and its `F*`.
pub fn least_squares(seed: u64) -> (Problem, f64) {
    let inst = generate_l1ls(&GeneratorParams::new(4096, 1024, 1e-2, 1.0, seed))
        .expect("generator parameters are valid");
    (
        inst.problem().expect("generated data is valid"),
        inst.f_star,
    )
}

/// Synthetic logistic data with 500 samples and 2000 features, c = 10.
pub fn logistic(seed: u64) -> Problem {
    generate_logistic(&LogisticParams::new(500, 2000, 0.05, seed))
        .and_then(|d| d.logistic_problem(10.0))
        .expect("generator parameters are valid")
}

/// Configuration for `kind` with block size `tau`, running exactly `iterations` steps.
pub fn config(kind: SolverKind, tau: usize, iterations: usize) -> SolverConfig {
    let mut cfg = SolverConfig {
        max_iterations: iterations,
        seed: 1,
        ..Default::default()
    };
    kind.configure(&mut cfg, tau, rcd_core::driver::DEFAULT_RHO);
    cfg
}
