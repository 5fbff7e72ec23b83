// Mean and variance of a 50^30 tensor without touching its entries,
// compared with closed forms from the one-dimensional grid moments.
//
//     cargo run --release --example statistics

use hadalg::generate::{bubble, poisson_rhs};
use hadalg::postproc::mean_variance;
use hadalg::AlgebraElement;

fn run() -> hadalg::Result<()> {
    let (n, d) = (50, 30);
    let w = poisson_rhs(n, d)?;
    let (mean, var) = mean_variance(&w)?;

    // f = sum_k prod_{l != k} g(x_l) with independent uniform modes:
    //   E f   = d (Eg)^(d-1)
    //   E f^2 = d (Eg^2)^(d-1) + d (d-1) (Eg)^2 (Eg^2)^(d-2)
    let g = bubble(n);
    let eg = g.iter().sum::<f64>() / n as f64;
    let eg2 = g.iter().map(|x| x * x).sum::<f64>() / n as f64;
    let df = d as f64;
    let m = df * eg.powi(d as i32 - 1);
    let m2 = df * eg2.powi(d as i32 - 1) + df * (df - 1.0) * eg * eg * eg2.powi(d as i32 - 2);
    let v = m2 - m * m;

    println!("N = {}", w.shape().total_size());
    println!("mean     {mean:.12e}  closed form {m:.12e}");
    println!("variance {var:.12e}  closed form {v:.12e}");
    assert!((mean - m).abs() <= 1e-12 * m);
    assert!((var - v).abs() <= 1e-8 * v);
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run() {
        eprintln!("{e}");
        std::process::exit(1);
    }
}
