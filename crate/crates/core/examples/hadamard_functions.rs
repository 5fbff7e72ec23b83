// Pointwise inverse, square root and sign of a compressed tensor, each
// computed by a Newton-type iteration with truncation after every step.
//
//     cargo run --release --example hadamard_functions

use hadalg::generate::{poisson_rhs, separated_cp};
use hadalg::iteration::StoppingRule;
use hadalg::postproc::{hadamard_inverse, hadamard_sign, hadamard_sqrt, SignMethod};
use hadalg::{AlgebraElement, DenseTensor, TruncationPolicy, TtTensor};

fn worst(a: &DenseTensor, b: &DenseTensor) -> f64 {
    a.values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| (x - y).abs() / y.abs())
        .fold(0.0, f64::max)
}

fn run() -> hadalg::Result<()> {
    let w = TtTensor::from_cp(&poisson_rhs(8, 5)?);
    let dense = w.to_dense()?;
    let policy = TruncationPolicy::new(1e-12, w.rank())?;
    let stop = StoppingRule::relative_step(1e-11, 100);

    let (inv, rep) = hadamard_inverse(&w, &policy, &stop)?;
    let err = worst(&inv.to_dense()?, &dense.map(|x| 1.0 / x));
    println!("1/w:     {:>3} steps, rank {:>2}, worst relative error {err:.1e}", rep.iterations, inv.rank());

    let (root, rep) = hadamard_sqrt(&w, &policy, &stop)?;
    let err = worst(&root.to_dense()?, &dense.map(f64::sqrt));
    println!("sqrt(w): {:>3} steps, rank {:>2}, worst relative error {err:.1e}", rep.iterations, root.rank());

    // Sign needs entries kept away from zero. Newton-Schulz only multiplies,
    // so it also runs in CP (with a rank cap for ALS). Roberts-Newton solves
    // an inner inverse per step and wants the more accurate TT rounding.
    let s = separated_cp(3, 8, 3, 2)?;
    let exact = s.to_dense()?.sign();
    let policy = TruncationPolicy::new(1e-10, s.rank())?.with_max_rank(4 * s.rank())?;
    let (sign, rep) = hadamard_sign(&s, &policy, &stop, SignMethod::NewtonSchulz)?;
    let err = worst(&sign.to_dense()?, &exact);
    println!("sign, Newton-Schulz in CP: {} steps, rank {}, worst error {err:.1e}", rep.iterations, sign.rank());
    assert!(err < 1e-6);

    let t = TtTensor::from_cp(&s);
    let policy = TruncationPolicy::new(1e-10, t.rank())?;
    let (sign, rep) = hadamard_sign(&t, &policy, &stop, SignMethod::RobertsNewton)?;
    let err = worst(&sign.to_dense()?, &exact);
    println!("sign, Roberts-Newton in TT: {} steps, rank {}, worst error {err:.1e}", rep.iterations, sign.rank());
    assert!(err < 1e-6);
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run() {
        eprintln!("{e}");
        std::process::exit(1);
    }
}
