// Largest entry of a 100^40 tensor: the Poisson right-hand side
// f(x) = sum_k prod_{l != k} x_l (1 - x_l), stored in TT format.
//
//     cargo run --release --example find_maximum

use hadalg::generate::{bubble, poisson_rhs};
use hadalg::iteration::StoppingRule;
use hadalg::postproc::{find_extreme, EigenMethod, Which};
use hadalg::{AlgebraElement, TruncationPolicy, TtTensor};

fn run() -> hadalg::Result<()> {
    let (n, d) = (100, 40);
    let cp = poisson_rhs(n, d)?;
    let w = TtTensor::from_cp_rounded(&cp, 1e-14, 8)?;
    println!("N = {}, TT ranks up to {}", w.shape().total_size(), w.rank());

    let policy = TruncationPolicy::new(1e-8, w.rank())?;
    let stop = StoppingRule::residual(1e-6, 30);
    let r = find_extreme(&w, Which::Max, EigenMethod::ExpPower, &policy, &stop, &[])?;

    println!("max ~ {:.15e} at {:?}", r.value, r.index.one_based());
    println!("w at that index: {:.15e}, bound {:.2e}", r.entry_value, r.error_bound);
    println!("{} iterations, largest rank {}", r.report.iterations, r.report.max_rank());

    // Every term peaks at the centre of the grid, so the maximum is
    // d * g_max^(d-1) with g(x) = x(1 - x).
    let g_max = bubble(n).into_iter().fold(f64::MIN, f64::max);
    let expected = d as f64 * g_max.powi(d as i32 - 1);
    assert!((r.entry_value - expected).abs() <= 1e-12 * expected);
    assert!(r.converged && r.validated);
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run() {
        eprintln!("{e}");
        std::process::exit(1);
    }
}
