// Saving and loading tensors in the JSON text and the binary encoding.
//
//     cargo run --release --example tensor_files

use hadalg::generate::{poisson_rhs, random_tt};
use hadalg::io::{read_tensor, write_tensor, Encoding, TensorData, TensorFile};
use hadalg::Shape;

fn run() -> hadalg::Result<()> {
    let dir = std::env::temp_dir().join(format!("hadalg-example-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;

    let tensors: Vec<TensorData> = vec![
        poisson_rhs(4, 3)?.into(),
        random_tt(&Shape::new(vec![3, 4, 2])?, 2, 9)?.into(),
        poisson_rhs(3, 2)?.to_dense()?.into(),
    ];
    for (k, t) in tensors.iter().enumerate() {
        for (encoding, ext) in [(Encoding::Text, "json"), (Encoding::Binary, "bin")] {
            let path = dir.join(format!("t{k}.{ext}"));
            write_tensor(&path, t, encoding)?;
            let back = read_tensor(&path)?;
            let size = std::fs::metadata(&path)?.len();
            println!("{:?} {:?} as {ext}: {size} bytes", t.format(), t.shape().mode_sizes());
            assert_eq!(&back, t);
        }
    }

    let header = TensorFile::from_tensor(&tensors[1]);
    println!("TT file header: version {}, ranks {:?}", header.version, header.ranks);
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
