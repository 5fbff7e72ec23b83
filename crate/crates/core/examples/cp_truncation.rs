// Recompressing a CP tensor: the Hadamard square of a rank-3 tensor has
// rank 9 but only 6 distinct terms, and ALS finds a rank-6 form.
//
//     cargo run --release --example cp_truncation

use hadalg::cp::{als_fit, AlsOptions};
use hadalg::generate::random_cp;
use hadalg::{AlgebraElement, Shape, TruncationPolicy};

fn run() -> hadalg::Result<()> {
    let shape = Shape::uniform(6, 5)?;
    let w = random_cp(&shape, 3, 21)?;
    let sq = w.hadamard(&w)?;
    let dense = sq.to_dense()?;
    println!("rank of w (.) w: {}", sq.rank());

    let t = sq.truncate(&TruncationPolicy::new(1e-10, 6)?)?;
    let err = t.value.to_dense()?.distance(&dense)? / dense.norm();
    println!("epsilon = 1e-10: rank {}, reported error {:.1e}, actual {err:.1e}", t.value.rank(), t.relative_error);
    assert!(err <= 1e-10);

    // A hard rank cap trades accuracy for size and says so.
    let capped = sq.truncate(&TruncationPolicy::new(1e-10, 2)?.with_max_rank(2)?)?;
    println!(
        "rank cap 2: error {:.2e}, tolerance missed: {}",
        capped.relative_error, capped.tolerance_miss
    );

    // ALS from an explicit start, with its residual history.
    let fit = als_fit(&sq, random_cp(&shape, 4, 3)?, &AlsOptions::default())?;
    let h = &fit.residual_history;
    println!("ALS rank 4: {} sweeps, |w - x|^2 from {:.3e} to {:.3e}", h.len() - 1, h[0], h[h.len() - 1]);
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run() {
        eprintln!("{e}");
        std::process::exit(1);
    }
}
