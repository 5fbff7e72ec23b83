// The truncated Newton iteration for 1/w at two truncation tolerances:
// quadratic convergence until the residual reaches the truncation floor.
// The input is 1 + f / max f with f the Poisson right-hand side, so entries
// lie in [1, 2] and the quadratic phase starts at once.
//
//     cargo run --release --example truncated_iteration

use hadalg::generate::{bubble, poisson_rhs};
use hadalg::iteration::StoppingRule;
use hadalg::postproc::hadamard_inverse;
use hadalg::{AlgebraElement, TruncationPolicy, TtTensor};

fn run() -> hadalg::Result<()> {
    let (n, d) = (20, 8);
    let f = TtTensor::from_cp_rounded(&poisson_rhs(n, d)?, 1e-14, 8)?;
    let g_max = bubble(n).into_iter().fold(f64::MIN, f64::max);
    let w = f.scale(1.0 / (d as f64 * g_max.powi(d as i32 - 1))).shift(1.0)?;
    for eps in [1e-4, 1e-8] {
        let policy = TruncationPolicy::new(eps, w.rank())?;
        // Ask for far more than truncation allows and let max_iters end it.
        let stop = StoppingRule::residual(1e-30, 12);
        let (v, rep) = hadamard_inverse(&w, &policy, &stop)?;
        println!("eps = {eps:.0e}: rank of 1/w {}, largest rank {}", v.rank(), rep.max_rank());
        for (k, r) in rep.residuals().iter().enumerate() {
            println!("  step {:>2}  |1 - w v| / |1| = {r:.3e}", k + 1);
        }
        let floor = rep.residuals().last().copied().unwrap_or(f64::NAN);
        assert!(floor <= 10.0 * eps);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run() {
        eprintln!("{e}");
        std::process::exit(1);
    }
}
