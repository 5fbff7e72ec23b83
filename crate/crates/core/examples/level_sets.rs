// Characteristic function of an interval, the level set it cuts out, and
// the derived count and probability. A 3^10 tensor is small enough to
// check every entry.
//
//     cargo run --release --example level_sets

use hadalg::generate::separated_cp;
use hadalg::iteration::StoppingRule;
use hadalg::postproc::{characteristic, conditional_mean_of, probability_of, support_cardinality, Interval};
use hadalg::{AlgebraElement, TruncationPolicy};

fn run() -> hadalg::Result<()> {
    let w = separated_cp(3, 10, 4, 5)?;
    let dense = w.to_dense()?;
    // CP recompression by ALS needs a rank cap inside Newton loops.
    let policy = TruncationPolicy::new(1e-10, w.rank())?.with_max_rank(4 * w.rank())?;
    let stop = StoppingRule::relative_step(1e-9, 60);

    // Entries above zero.
    let s = Interval::above(0.0)?;
    let (chi, reports) = characteristic(&w, &s, &policy, &stop)?;
    let count = support_cardinality(&chi)?;
    let expected = dense.level_count(0.0, f64::INFINITY)?;
    println!(
        "{} of {} entries are positive (sum of chi = {:.9}), rank of chi {}",
        count.rounded,
        dense.len(),
        count.raw,
        chi.rank()
    );
    println!("Newton-Schulz steps: {}", reports[0].iterations);
    assert_eq!(count.rounded, expected);

    let p = probability_of(&chi)?;
    let m = conditional_mean_of(&w, &chi)?;
    let positive: Vec<f64> = dense.values().iter().cloned().filter(|&x| x > 0.0).collect();
    let m_dense = positive.iter().sum::<f64>() / positive.len() as f64;
    println!("P(w > 0) = {p:.6}, E[w | w > 0] = {m:.9} (scan {m_dense:.9})");
    assert!((m - m_dense).abs() <= 1e-6 * m_dense.abs());

    // The level set keeps the positive entries and zeroes the rest.
    let level = chi.hadamard(&w)?.to_dense()?;
    let worst = level
        .values()
        .iter()
        .zip(dense.values())
        .map(|(l, x)| (l - x.max(0.0)).abs())
        .fold(0.0, f64::max);
    println!("largest level-set deviation {worst:.2e}");
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run() {
        eprintln!("{e}");
        std::process::exit(1);
    }
}
