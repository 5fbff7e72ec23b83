use std::io::Write;

use serde_json::json;

use super::{FunctionKind, GenArgs, GenKind, Outcome, OutputFormat};
use crate::error::{Error, Result};
use crate::generate::{self, SampledFunction};
use crate::io::{write_tensor, Encoding, TensorData, TensorFile};
use crate::shape::Shape;
use crate::tt::TtTensor;

pub(super) fn generate(a: &GenArgs) -> Result<TensorData> {
    if a.n == 0 || a.d == 0 || a.rank == 0 {
        return Err(Error::InvalidParameter("n, d and rank must be >= 1".into()));
    }
    let shape = Shape::uniform(a.n, a.d)?;
    let native: TensorData = match a.kind {
        GenKind::RandomCp => generate::random_cp(&shape, a.rank, a.seed)?.into(),
        GenKind::RandomTt => generate::random_tt(&shape, a.rank, a.seed)?.into(),
        GenKind::PoissonRhs => generate::poisson_rhs(a.n, a.d)?.into(),
        GenKind::SeparatedCp => generate::separated_cp(a.n, a.d, a.rank, a.seed)?.into(),
        GenKind::FunctionSample => {
            let f = match a.function {
                FunctionKind::Constant => SampledFunction::Constant(a.value),
                FunctionKind::Sum => SampledFunction::Sum,
                FunctionKind::SinProduct => SampledFunction::SinProduct,
                FunctionKind::Gaussian => SampledFunction::Gaussian,
            };
            generate::sample_function(f, a.n, a.d)?.into()
        }
    };
    Ok(match (a.format, native) {
        (OutputFormat::Native, t) => t,
        (OutputFormat::Dense, TensorData::Cp(w)) => w.to_dense()?.into(),
        (OutputFormat::Dense, TensorData::Tt(w)) => w.to_dense()?.into(),
        (OutputFormat::Tt, TensorData::Cp(w)) => TtTensor::from_cp(&w).into(),
        (_, t) => t,
    })
}

pub(super) fn cmd_gen(a: &GenArgs, out: &mut dyn Write) -> Result<Outcome> {
    let t = generate(a)?;
    let encoding = if a.binary { Encoding::Binary } else { Encoding::Text };
    write_tensor(&a.out, &t, encoding)?;
    let file = TensorFile::from_tensor(&t);
    let summary = json!({
        "path": a.out.display().to_string(),
        "format": file.format,
        "shape": file.shape,
        "ranks": file.ranks,
        "N": t.shape().total_size().to_string(),
        "storage": file.payload.len(),
    });
    writeln!(out, "{summary}")?;
    Ok(Outcome::Converged)
}
