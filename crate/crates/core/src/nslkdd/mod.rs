//! NSL-KDD ingestion: line parsing, attack taxonomy, feature encoding.

pub mod fixture;
pub mod record;
pub mod schema;
pub mod taxonomy;

use std::io::BufReader;
use std::path::Path;

use crate::error::{Error, Result};

pub use record::{parse_records, RawRecord, TrafficFeatures, FEATURE_NAMES};
pub use schema::{fit_schema, EncodingSchema};
pub use taxonomy::{map_attack, ClassTaxonomy, CATEGORY_NAMES};

/// Standard file names inside an NSL-KDD directory.
pub const TRAIN_FILE: &str = "KDDTrain+.txt";
pub const TEST_FILE: &str = "KDDTest+.txt";

pub fn read_records(path: &Path) -> Result<Vec<RawRecord>> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_records(BufReader::new(f)).map_err(|e| match e {
        Error::Parse { line, message } => Error::Parse {
            line,
            message: format!("{}: {message}", path.display()),
        },
        other => other,
    })
}
