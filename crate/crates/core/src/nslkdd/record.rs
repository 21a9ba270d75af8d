use std::io::BufRead;

use crate::error::{Error, Result};

/// The 41 traffic features, in file order.
pub const FEATURE_NAMES: [&str; 41] = [
    "duration",
    "protocol_type",
    "service",
    "flag",
    "src_bytes",
    "dst_bytes",
    "land",
    "wrong_fragment",
    "urgent",
    "hot",
    "num_failed_logins",
    "logged_in",
    "num_compromised",
    "root_shell",
    "su_attempted",
    "num_root",
    "num_file_creations",
    "num_shells",
    "num_access_files",
    "num_outbound_cmds",
    "is_host_login",
    "is_guest_login",
    "count",
    "srv_count",
    "serror_rate",
    "srv_serror_rate",
    "rerror_rate",
    "srv_rerror_rate",
    "same_srv_rate",
    "diff_srv_rate",
    "srv_diff_host_rate",
    "dst_host_count",
    "dst_host_srv_count",
    "dst_host_same_srv_rate",
    "dst_host_diff_srv_rate",
    "dst_host_same_src_port_rate",
    "dst_host_srv_diff_host_rate",
    "dst_host_serror_rate",
    "dst_host_srv_serror_rate",
    "dst_host_rerror_rate",
    "dst_host_srv_rerror_rate",
];

/// File positions of the categorical features.
pub const CATEGORICAL_POSITIONS: [usize; 3] = [1, 2, 3];
pub const CATEGORICAL_NAMES: [&str; 3] = ["protocol_type", "service", "flag"];
pub const NUM_NUMERIC: usize = 38;
/// Features + attack name + difficulty.
pub const FIELDS_PER_LINE: usize = 43;

/// The 41 features of one connection record, split by type.
#[derive(Clone, Debug, PartialEq)]
pub struct TrafficFeatures {
    /// The 38 numeric features in file order (categoricals removed).
    pub numeric: Vec<f64>,
    /// `[protocol_type, service, flag]`.
    pub categorical: [String; 3],
}

#[derive(Clone, Debug, PartialEq)]
pub struct RawRecord {
    pub features: TrafficFeatures,
    pub attack_name: String,
    pub difficulty: i64,
}

impl TrafficFeatures {
    /// Renders the 41 features back into file order, comma separated.
    pub fn to_fields(&self) -> Vec<String> {
        let mut out = Vec::with_capacity(41);
        let mut num = self.numeric.iter();
        let mut cat = self.categorical.iter();
        for pos in 0..41 {
            if CATEGORICAL_POSITIONS.contains(&pos) {
                out.push(cat.next().expect("3 categoricals").clone());
            } else {
                out.push(format_number(*num.next().expect("38 numerics")));
            }
        }
        out
    }
}

impl RawRecord {
    /// One line in the NSL-KDD layout (no trailing newline).
    pub fn to_line(&self) -> String {
        let mut fields = self.features.to_fields();
        fields.push(self.attack_name.clone());
        fields.push(self.difficulty.to_string());
        fields.join(",")
    }
}

fn format_number(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

/// Parses one line. `line_no` is 1-based and only used in errors.
pub fn parse_line(line: &str, line_no: usize) -> Result<RawRecord> {
    let fields: Vec<&str> = line.split(',').map(str::trim).collect();
    if fields.len() != FIELDS_PER_LINE {
        return Err(Error::Parse {
            line: line_no,
            message: format!("expected {FIELDS_PER_LINE} fields, found {}", fields.len()),
        });
    }
    let mut numeric = Vec::with_capacity(NUM_NUMERIC);
    let mut categorical: [String; 3] = Default::default();
    for (pos, field) in fields[..41].iter().enumerate() {
        if let Some(k) = CATEGORICAL_POSITIONS.iter().position(|&p| p == pos) {
            if field.is_empty() {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("empty {}", FEATURE_NAMES[pos]),
                });
            }
            categorical[k] = (*field).to_string();
        } else {
            let v: f64 = field.parse().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("{} = {field:?} is not numeric", FEATURE_NAMES[pos]),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("{} is not finite", FEATURE_NAMES[pos]),
                });
            }
            numeric.push(v);
        }
    }
    let difficulty = fields[42].parse().map_err(|_| Error::Parse {
        line: line_no,
        message: format!("difficulty {:?} is not an integer", fields[42]),
    })?;
    Ok(RawRecord {
        features: TrafficFeatures { numeric, categorical },
        attack_name: fields[41].to_string(),
        difficulty,
    })
}

/// One record per nonempty line.
pub fn parse_records<R: BufRead>(reader: R) -> Result<Vec<RawRecord>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        out.push(parse_line(line, i + 1)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// First line of the distributed KDDTrain+.txt.
    pub(crate) const KDDTRAIN_FIRST_LINE: &str = "0,tcp,ftp_data,SF,491,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,2,2,0.00,0.00,0.00,0.00,1.00,0.00,0.00,150,25,0.17,0.03,0.17,0.00,0.00,0.00,0.05,0.00,normal,20";

    #[test]
    fn parses_first_training_line() {
        let recs = parse_records(KDDTRAIN_FIRST_LINE.as_bytes()).unwrap();
        assert_eq!(recs.len(), 1);
        let r = &recs[0];
        assert_eq!(r.attack_name, "normal");
        assert_eq!(r.difficulty, 20);
        assert_eq!(
            r.features.categorical,
            ["tcp".to_string(), "ftp_data".into(), "SF".into()]
        );
        assert_eq!(r.features.numeric.len(), 38);
        assert_eq!(r.features.numeric[1], 491.0);
        assert_eq!(r.features.numeric[28], 150.0);
    }

    #[test]
    fn empty_stream_and_blank_lines() {
        assert!(parse_records("".as_bytes()).unwrap().is_empty());
        let text = format!("\n{KDDTRAIN_FIRST_LINE}\r\n\n");
        assert_eq!(parse_records(text.as_bytes()).unwrap().len(), 1);
    }

    #[test]
    fn wrong_field_count_names_the_line() {
        let short = KDDTRAIN_FIRST_LINE.rsplit_once(',').unwrap().0;
        let text = format!("{KDDTRAIN_FIRST_LINE}\n{short}\n");
        let err = parse_records(text.as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        assert!(err.to_string().contains("42"));
    }

    #[test]
    fn non_numeric_field_is_an_error() {
        let bad = KDDTRAIN_FIRST_LINE.replacen("491", "abc", 1);
        let err = parse_records(bad.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("src_bytes"), "{err}");
    }

    #[test]
    fn line_round_trip() {
        let r = parse_line(KDDTRAIN_FIRST_LINE, 1).unwrap();
        assert_eq!(parse_line(&r.to_line(), 1).unwrap(), r);
    }
}
