// The command line driven from code: generate a tensor file, then ask for
// its maximum, variance and a level-set count.
//
//     cargo run --release --example cli_pipeline

use hadalg::cli::main_with_args;

fn run() -> hadalg::Result<()> {
    let dir = std::env::temp_dir().join(format!("hadalg-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    let poisson = dir.join("poisson.json");
    let poisson = poisson.to_str().expect("utf-8 temp path");
    let signs = dir.join("signs.bin");
    let signs = signs.to_str().expect("utf-8 temp path");

    let steps: [&[&str]; 5] = [
        &["hadalg", "gen", "poisson-rhs", "--n", "20", "--d", "10", "--out", poisson],
        &["hadalg", "run", "max", "--input", poisson, "--as-tt"],
        &["hadalg", "run", "var", "--input", poisson],
        &["hadalg", "gen", "separated-cp", "--n", "3", "--d", "10", "--rank", "3", "--binary", "--out", signs],
        &["hadalg", "run", "count", "--input", signs, "--lower", "0"],
    ];
    for args in steps {
        println!("$ {}", args.join(" "));
        let code = main_with_args(args.iter().copied());
        assert_eq!(code, 0, "exit code {code}");
    }
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run() {
        eprintln!("{e}");
        std::process::exit(1);
    }
}
