use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use crate::error::{Error, Result};

/// Five-category label set, in class-index order.
pub const CATEGORY_NAMES: [&str; 5] = ["Normal", "DoS", "Probe", "R2L", "U2R"];
pub const NORMAL: usize = 0;
pub const DOS: usize = 1;
pub const PROBE: usize = 2;
pub const R2L: usize = 3;
pub const U2R: usize = 4;

const BUNDLED: &str = include_str!("../../data/taxonomy.csv");

/// Attack name → category index. Loaded from a two-column CSV
/// (`attack_name,category`) so it can be edited without recompiling.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClassTaxonomy {
    map: BTreeMap<String, usize>,
}

impl ClassTaxonomy {
    /// The taxonomy shipped with the crate, covering every attack name in
    /// KDDTrain+ and KDDTest+.
    pub fn bundled() -> Self {
        Self::from_reader(BUNDLED.as_bytes()).expect("bundled taxonomy is valid")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_reader(f)
    }

    pub fn from_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let mut map = BTreeMap::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let line = i + 2;
            if rec.len() != 2 {
                return Err(Error::Parse {
                    line,
                    message: format!("expected 2 columns, found {}", rec.len()),
                });
            }
            let name = rec[0].to_string();
            let category = CATEGORY_NAMES
                .iter()
                .position(|c| c.eq_ignore_ascii_case(&rec[1]))
                .ok_or_else(|| Error::Parse {
                    line,
                    message: format!("unknown category {:?}", &rec[1]),
                })?;
            if map.insert(name.clone(), category).is_some_and(|prev| prev != category) {
                return Err(Error::Parse {
                    line,
                    message: format!("{name:?} mapped to two categories"),
                });
            }
        }
        if map.get("normal") != Some(&NORMAL) {
            return Err(Error::Format("taxonomy must map \"normal\" to Normal".into()));
        }
        Ok(Self { map })
    }

    pub fn num_categories(&self) -> usize {
        CATEGORY_NAMES.len()
    }

    pub fn category_names(&self) -> &'static [&'static str] {
        &CATEGORY_NAMES
    }

    pub fn map_attack(&self, name: &str) -> Result<usize> {
        self.map
            .get(name)
            .copied()
            .ok_or_else(|| Error::UnknownAttack(name.to_string()))
    }

    pub fn attacks(&self) -> impl Iterator<Item = (&str, usize)> {
        self.map.iter().map(|(k, &v)| (k.as_str(), v))
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("attack_name,category\n");
        for (name, c) in &self.map {
            s.push_str(&format!("{name},{}\n", CATEGORY_NAMES[*c]));
        }
        s
    }
}

pub fn map_attack(name: &str, taxonomy: &ClassTaxonomy) -> Result<usize> {
    taxonomy.map_attack(name)
}
