//! File formats: Matrix Market, recycle-space binaries and history CSVs.

mod history_csv;
mod matrix_market;
mod recycle_file;

use thiserror::Error;

use crate::recycle::RecycleError;

pub use history_csv::{
    history_write, history_write_to, HEADER as HISTORY_HEADER, SUMMARY as HISTORY_SUMMARY,
};
pub use matrix_market::{mm_read, mm_read_vector, mm_write, mm_write_vector};
pub use recycle_file::{
    recycle_load, recycle_save, MAGIC as RECYCLE_MAGIC, VERSION as RECYCLE_VERSION,
};

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("Matrix Market banner: {0}")]
    Banner(String),
    #[error("Matrix Market header: {0}")]
    Header(String),
    #[error("line {line}: entry ({row}, {col}) lies outside the declared {nrows}x{ncols} matrix")]
    IndexOverflow {
        line: usize,
        row: usize,
        col: usize,
        nrows: usize,
        ncols: usize,
    },
    #[error("line {line}: {message}")]
    Entry { line: usize, message: String },
    #[error("corrupt recycle-space file: {0}")]
    CorruptRecycleFile(String),
    #[error("recycle space has n = {found}, the operator has dimension {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("recycle-space file has scalar tag {file}, expected {expected}")]
    ScalarMismatch { file: u8, expected: u8 },
    #[error("cannot save an empty recycle space")]
    EmptyRecycleSpace,
    #[error(transparent)]
    Recycle(#[from] RecycleError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}
