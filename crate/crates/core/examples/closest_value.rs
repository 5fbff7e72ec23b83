// Entry closest to a target value, and the entry of smallest magnitude
// (target 0), checked against a brute-force scan.
//
// The search inverts w - rho 1 entrywise. For random data that inverse has
// no low CP rank, so the tensor goes to TT first, where ranks can grow as
// far as they need to.
//
//     cargo run --release --example closest_value

use hadalg::generate::random_cp;
use hadalg::iteration::StoppingRule;
use hadalg::postproc::closest_to;
use hadalg::{Shape, TruncationPolicy, TtTensor};

fn run() -> hadalg::Result<()> {
    let shape = Shape::new(vec![6, 5, 7, 4])?;
    let cp = random_cp(&shape, 2, 11)?;
    let dense = cp.to_dense()?;
    let w = TtTensor::from_cp(&cp);
    let policy = TruncationPolicy::new(1e-12, 6)?;
    let stop = StoppingRule::residual(1e-10, 200);

    for rho in [0.0, 0.25, -0.4] {
        let r = closest_to(&w, rho, &policy, &stop)?;
        let (idx, v) = dense.argclosest(rho);
        println!(
            "rho = {rho:>5}: found {:.6} at {:?}, scan gives {:.6} at {:?}",
            r.entry_value,
            r.index.one_based(),
            v,
            idx.one_based()
        );
        assert!((r.entry_value - rho).abs() <= (v - rho).abs() + 1e-12);
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
