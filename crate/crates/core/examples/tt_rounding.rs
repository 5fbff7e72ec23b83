// TT rounding: sums and Hadamard products inflate the ranks, SVD-based
// rounding brings them back down within a relative tolerance.
//
//     cargo run --release --example tt_rounding

use hadalg::generate::{poisson_rhs, random_tt};
use hadalg::tt::tt_round;
use hadalg::{AlgebraElement, Shape, TruncationPolicy, TtTensor};

fn run() -> hadalg::Result<()> {
    let shape = Shape::uniform(5, 6)?;
    let a = random_tt(&shape, 3, 1)?;

    // a + a has ranks 6 but is a rank-3 tensor.
    let twice = a.add(&a)?;
    let r = tt_round(&twice, &TruncationPolicy::new(1e-12, 1)?)?;
    println!("a + a: ranks {:?} -> {:?}", twice.ranks(), r.value.ranks());
    assert_eq!(r.value.rank(), 3);

    // Products of smooth data are far more compressible than their formal
    // rank suggests: the Poisson right-hand side squared has ranks 16.
    let f = TtTensor::from_cp(&poisson_rhs(12, 6)?);
    let p = f.hadamard(&f)?;
    let exact = p.to_dense()?;
    println!("f (.) f: ranks {:?}, storage {}", p.ranks(), p.storage());
    for eps in [1e-2, 1e-6, 1e-12] {
        let t = tt_round(&p, &TruncationPolicy::new(eps, 1)?)?;
        let err = t.value.to_dense()?.distance(&exact)? / exact.norm();
        println!(
            "  eps {eps:.0e}: ranks {:?}, storage {}, error {err:.2e} (estimate {:.2e})",
            t.value.ranks(),
            t.value.storage(),
            t.relative_error
        );
        assert!(err <= eps);
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
