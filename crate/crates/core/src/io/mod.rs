//! File formats: point clouds in, operators / fields / reports out.

mod fields;
mod mtx;
mod points;

pub use fields::{read_field_csv, write_field_csv};
pub use mtx::{read_matrix_market, write_matrix_market, MATRIX_MARKET_HEADER};
pub use points::{read_point_cloud, PointData};

use std::path::Path;

use crate::error::{Error, Result};

pub(crate) fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })
}

pub(crate) fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })
}
