use std::path::Path;

use super::write_bytes;
use crate::error::{Error, Result};
use crate::field::{Features, Field, ScalarField, VectorField};

/// CSV with a `point_index` column followed by one column per scalar
/// channel (`c0, c1, …`) or a `u`/`v` pair per vector channel
/// (`c0_u, c0_v, …`).
pub fn write_field_csv(path: &Path, field: &Field) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::InvalidInput(e.to_string());
    match field {
        Field::Scalar(s) => {
            let mut header = vec!["point_index".to_owned()];
            header.extend((0..s.channels()).map(|c| format!("c{c}")));
            w.write_record(&header).map_err(csv_err)?;
            for i in 0..s.n_points() {
                let mut rec = vec![i.to_string()];
                rec.extend(s.0.row(i).iter().map(|x| format!("{x:e}")));
                w.write_record(&rec).map_err(csv_err)?;
            }
        }
        Field::Vector(v) => {
            let mut header = vec!["point_index".to_owned()];
            for c in 0..v.channels() {
                header.push(format!("c{c}_u"));
                header.push(format!("c{c}_v"));
            }
            w.write_record(&header).map_err(csv_err)?;
            for i in 0..v.n_points() {
                let mut rec = vec![i.to_string()];
                for c in 0..v.channels() {
                    let (a, b) = v.coeffs(i, c);
                    rec.push(format!("{a:e}"));
                    rec.push(format!("{b:e}"));
                }
                w.write_record(&rec).map_err(csv_err)?;
            }
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::InvalidInput(e.to_string()))?;
    write_bytes(path, &bytes)
}

/// Read a field written by [`write_field_csv`]; the header decides the kind.
pub fn read_field_csv(path: &Path) -> Result<Field> {
    let io_err = |e: csv::Error| match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::Io {
            path: path.to_owned(),
            source,
        },
        other => Error::Parse {
            path: path.to_owned(),
            line: 0,
            message: format!("{other:?}"),
        },
    };
    let parse = |line: usize, message: String| Error::Parse {
        path: path.to_owned(),
        line,
        message,
    };
    let mut reader = csv::Reader::from_path(path).map_err(io_err)?;
    let header: Vec<String> = reader.headers().map_err(io_err)?.iter().map(str::to_owned).collect();
    if header.first().map(String::as_str) != Some("point_index") {
        return Err(parse(1, "first column must be point_index".into()));
    }
    let columns = &header[1..];
    let vector = !columns.is_empty() && columns.iter().all(|c| c.ends_with("_u") || c.ends_with("_v"));
    if vector && !columns.len().is_multiple_of(2) {
        return Err(parse(1, "vector fields need u/v column pairs".into()));
    }
    let mut values = Vec::new();
    let mut n = 0;
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(io_err)?;
        let index: usize = record[0]
            .trim()
            .parse()
            .map_err(|_| parse(line + 2, "bad point_index".into()))?;
        if index != n {
            return Err(parse(line + 2, format!("expected point_index {n}, got {index}")));
        }
        for f in record.iter().skip(1) {
            values.push(
                f.trim()
                    .parse::<f64>()
                    .map_err(|_| parse(line + 2, format!("not a number: {f:?}")))?,
            );
        }
        n += 1;
    }
    let channels = columns.len();
    if vector {
        // one CSV row per point holds all (u, v) pairs; convert to interleaved rows
        let c = channels / 2;
        let mut data = vec![0.0; 2 * n * c];
        for i in 0..n {
            for ch in 0..c {
                data[(2 * i) * c + ch] = values[i * channels + 2 * ch];
                data[(2 * i + 1) * c + ch] = values[i * channels + 2 * ch + 1];
            }
        }
        Ok(Field::Vector(VectorField::new(Features::from_row_major(2 * n, c, data)?)?))
    } else {
        Ok(Field::Scalar(ScalarField(Features::from_row_major(n, channels, values)?)))
    }
}
