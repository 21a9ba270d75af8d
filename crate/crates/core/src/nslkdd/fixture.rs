//! Synthetic traffic in the NSL-KDD file layout.
//!
//! Every attack name of the real train/test files gets a hand-written
//! profile (protocol, services, flags and a handful of feature
//! distributions over a shared background). Row counts per attack match
//! the published files at `scale = 1.0`, including the attacks that only
//! occur in the test file. Useful for exercising the pipeline end to end
//! when the real files are not available; results on it say nothing about
//! the real data.

use rand::Rng;
use rand_distr::{Distribution, LogNormal};

use super::record::{RawRecord, TrafficFeatures, FEATURE_NAMES};
use crate::seed::{child_rng, SeededRng};

pub const PROTOCOLS: [&str; 3] = ["icmp", "tcp", "udp"];

pub const SERVICES: [&str; 70] = [
    "aol",
    "auth",
    "bgp",
    "courier",
    "csnet_ns",
    "ctf",
    "daytime",
    "discard",
    "domain",
    "domain_u",
    "echo",
    "eco_i",
    "ecr_i",
    "efs",
    "exec",
    "finger",
    "ftp",
    "ftp_data",
    "gopher",
    "harvest",
    "hostnames",
    "http",
    "http_2784",
    "http_443",
    "http_8001",
    "imap4",
    "IRC",
    "iso_tsap",
    "klogin",
    "kshell",
    "ldap",
    "link",
    "login",
    "mtp",
    "name",
    "netbios_dgm",
    "netbios_ns",
    "netbios_ssn",
    "netstat",
    "nnsp",
    "nntp",
    "ntp_u",
    "other",
    "pm_dump",
    "pop_2",
    "pop_3",
    "printer",
    "private",
    "red_i",
    "remote_job",
    "rje",
    "shell",
    "smtp",
    "sql_net",
    "ssh",
    "sunrpc",
    "supdup",
    "systat",
    "telnet",
    "tftp_u",
    "tim_i",
    "time",
    "urh_i",
    "urp_i",
    "uucp",
    "uucp_path",
    "vmnet",
    "whois",
    "X11",
    "Z39_50",
];

pub const FLAGS: [&str; 11] = [
    "OTH", "REJ", "RSTO", "RSTOS0", "RSTR", "S0", "S1", "S2", "S3", "SF", "SH",
];

/// `(attack, train rows, test rows)` as in KDDTrain+ / KDDTest+.
pub const ATTACK_COUNTS: [(&str, usize, usize); 40] = [
    ("normal", 67343, 9711),
    ("back", 956, 359),
    ("land", 18, 7),
    ("neptune", 41214, 4657),
    ("pod", 201, 41),
    ("smurf", 2646, 665),
    ("teardrop", 892, 12),
    ("apache2", 0, 737),
    ("mailbomb", 0, 293),
    ("processtable", 0, 685),
    ("udpstorm", 0, 2),
    ("ipsweep", 3599, 141),
    ("nmap", 1493, 73),
    ("portsweep", 2931, 157),
    ("satan", 3633, 735),
    ("mscan", 0, 996),
    ("saint", 0, 319),
    ("ftp_write", 8, 3),
    ("guess_passwd", 53, 1231),
    ("imap", 11, 1),
    ("multihop", 7, 18),
    ("phf", 4, 2),
    ("spy", 2, 0),
    ("warezclient", 890, 0),
    ("warezmaster", 20, 944),
    ("named", 0, 17),
    ("sendmail", 0, 14),
    ("snmpgetattack", 0, 178),
    ("snmpguess", 0, 331),
    ("worm", 0, 2),
    ("xlock", 0, 9),
    ("xsnoop", 0, 4),
    ("buffer_overflow", 30, 20),
    ("loadmodule", 9, 2),
    ("perl", 3, 2),
    ("rootkit", 10, 13),
    ("httptunnel", 0, 133),
    ("ps", 0, 15),
    ("sqlattack", 0, 2),
    ("xterm", 0, 13),
];

#[derive(Clone, Copy, Debug)]
enum Dist {
    Const(f64),
    /// Uniform integer, inclusive.
    Int(i64, i64),
    /// Uniform rate rounded to two decimals.
    Rate(f64, f64),
    /// Log-normal with the given median and log-scale sigma, rounded.
    LogN(f64, f64),
    Bern(f64),
}

impl Dist {
    fn sample(self, rng: &mut SeededRng) -> f64 {
        match self {
            Dist::Const(v) => v,
            Dist::Int(lo, hi) => rng.random_range(lo..=hi) as f64,
            Dist::Rate(lo, hi) => (rng.random_range(lo..=hi) * 100.0).round() / 100.0,
            Dist::LogN(median, sigma) => LogNormal::new(median.ln(), sigma)
                .expect("valid log-normal")
                .sample(rng)
                .round(),
            Dist::Bern(p) => f64::from(u8::from(rng.random_bool(p))),
        }
    }
}

struct Profile {
    protocols: &'static [(&'static str, f64)],
    /// Empty means any service.
    services: &'static [&'static str],
    flags: &'static [(&'static str, f64)],
    features: &'static [(&'static str, Dist)],
}

use Dist::*;

const BACKGROUND: &[(&str, Dist)] = &[
    ("count", Int(1, 25)),
    ("srv_count", Int(1, 25)),
    ("same_srv_rate", Rate(0.8, 1.0)),
    ("diff_srv_rate", Rate(0.0, 0.1)),
    ("srv_diff_host_rate", Rate(0.0, 0.2)),
    ("dst_host_count", Int(1, 255)),
    ("dst_host_srv_count", Int(1, 255)),
    ("dst_host_same_srv_rate", Rate(0.5, 1.0)),
    ("dst_host_diff_srv_rate", Rate(0.0, 0.1)),
    ("dst_host_same_src_port_rate", Rate(0.0, 0.3)),
    ("dst_host_srv_diff_host_rate", Rate(0.0, 0.1)),
];

const SF: &[(&str, f64)] = &[("SF", 1.0)];
const TCP: &[(&str, f64)] = &[("tcp", 1.0)];
const UDP: &[(&str, f64)] = &[("udp", 1.0)];
const ICMP: &[(&str, f64)] = &[("icmp", 1.0)];
const SYN_FLOOD: &[(&str, Dist)] = &[
    ("count", Int(100, 511)),
    ("srv_count", Int(1, 30)),
    ("serror_rate", Rate(0.9, 1.0)),
    ("srv_serror_rate", Rate(0.9, 1.0)),
    ("same_srv_rate", Rate(0.0, 0.1)),
    ("diff_srv_rate", Rate(0.05, 0.1)),
    ("dst_host_count", Const(255.0)),
    ("dst_host_srv_count", Int(1, 30)),
    ("dst_host_same_srv_rate", Rate(0.0, 0.1)),
    ("dst_host_serror_rate", Rate(0.9, 1.0)),
    ("dst_host_srv_serror_rate", Rate(0.9, 1.0)),
];
const LOGIN_SESSION: &[(&str, Dist)] = &[
    ("duration", LogN(60.0, 1.5)),
    ("src_bytes", LogN(1500.0, 1.0)),
    ("dst_bytes", LogN(4000.0, 1.2)),
    ("logged_in", Const(1.0)),
    ("hot", Int(0, 4)),
    ("count", Int(1, 3)),
    ("srv_count", Int(1, 3)),
    ("dst_host_count", Int(1, 60)),
    ("dst_host_srv_count", Int(1, 30)),
];
const ROOT_ESCALATION: &[(&str, Dist)] = &[
    ("duration", LogN(100.0, 1.3)),
    ("src_bytes", LogN(1500.0, 1.2)),
    ("dst_bytes", LogN(5000.0, 1.3)),
    ("logged_in", Const(1.0)),
    ("hot", Int(1, 6)),
    ("root_shell", Bern(0.7)),
    ("num_root", Int(0, 3)),
    ("num_file_creations", Int(0, 3)),
    ("num_shells", Bern(0.3)),
    ("num_access_files", Bern(0.2)),
    ("count", Int(1, 2)),
    ("srv_count", Int(1, 2)),
    ("dst_host_count", Int(1, 30)),
    ("dst_host_srv_count", Int(1, 10)),
];
const REMOTE_SHELLS: &[&str] = &["telnet", "login", "ftp", "ftp_data", "shell"];

fn profile(attack: &str) -> Profile {
    let p = |protocols, services, flags, features| Profile {
        protocols,
        services,
        flags,
        features,
    };
    match attack {
        "normal" => p(
            &[("tcp", 0.8), ("udp", 0.13), ("icmp", 0.07)],
            &[],
            &[
                ("SF", 0.88),
                ("REJ", 0.04),
                ("S0", 0.02),
                ("RSTR", 0.02),
                ("RSTO", 0.01),
                ("S1", 0.01),
                ("OTH", 0.005),
                ("RSTOS0", 0.005),
                ("S2", 0.005),
                ("S3", 0.004),
                ("SH", 0.001),
            ],
            &[
                ("duration", LogN(1.0, 2.0)),
                ("src_bytes", LogN(250.0, 1.3)),
                ("dst_bytes", LogN(1500.0, 1.5)),
                ("logged_in", Bern(0.7)),
                ("hot", Bern(0.05)),
                ("is_guest_login", Bern(0.01)),
            ],
        ),
        "neptune" => p(
            TCP,
            &["private", "other", "telnet", "http", "ftp", "smtp", "finger", "whois"],
            &[("S0", 0.85), ("REJ", 0.15)],
            SYN_FLOOD,
        ),
        "land" => p(
            TCP,
            &["finger", "telnet", "http"],
            &[("S0", 1.0)],
            &[
                ("land", Const(1.0)),
                ("count", Int(1, 2)),
                ("srv_count", Int(1, 2)),
                ("serror_rate", Const(1.0)),
                ("srv_serror_rate", Const(1.0)),
            ],
        ),
        "smurf" => p(
            ICMP,
            &["ecr_i"],
            SF,
            &[
                ("src_bytes", Int(520, 1032)),
                ("count", Int(400, 511)),
                ("srv_count", Int(400, 511)),
                ("dst_host_count", Const(255.0)),
                ("dst_host_srv_count", Const(255.0)),
                ("dst_host_same_src_port_rate", Rate(0.9, 1.0)),
            ],
        ),
        "pod" => p(
            ICMP,
            &["ecr_i", "tim_i"],
            SF,
            &[
                ("src_bytes", Const(1480.0)),
                ("wrong_fragment", Const(1.0)),
                ("count", Int(1, 5)),
                ("srv_count", Int(1, 5)),
            ],
        ),
        "teardrop" => p(
            UDP,
            &["private"],
            SF,
            &[
                ("src_bytes", Int(28, 60)),
                ("wrong_fragment", Const(3.0)),
                ("count", Int(30, 120)),
                ("srv_count", Int(30, 120)),
            ],
        ),
        "back" => p(
            TCP,
            &["http"],
            &[("SF", 0.8), ("RSTR", 0.2)],
            &[
                ("src_bytes", Int(54540, 54540)),
                ("dst_bytes", LogN(8300.0, 0.3)),
                ("hot", Int(2, 2)),
                ("num_compromised", Int(0, 1)),
                ("logged_in", Const(1.0)),
            ],
        ),
        "apache2" => p(
            TCP,
            &["http"],
            &[("SF", 0.5), ("RSTR", 0.3), ("S3", 0.2)],
            &[
                ("src_bytes", LogN(800.0, 0.8)),
                ("dst_bytes", LogN(200.0, 1.5)),
                ("count", Int(5, 60)),
                ("logged_in", Bern(0.5)),
                ("rerror_rate", Rate(0.0, 0.5)),
            ],
        ),
        "processtable" => p(
            TCP,
            &["private", "other", "telnet"],
            &[("SF", 0.5), ("RSTO", 0.5)],
            &[("duration", LogN(1500.0, 0.6)), ("count", Int(1, 10))],
        ),
        "mailbomb" => p(
            TCP,
            &["smtp"],
            SF,
            &[
                ("src_bytes", Int(3900, 4100)),
                ("dst_bytes", Int(300, 400)),
                ("logged_in", Const(1.0)),
                ("count", Int(10, 50)),
            ],
        ),
        "udpstorm" => p(
            UDP,
            &["private"],
            SF,
            &[
                ("src_bytes", Const(28.0)),
                ("count", Int(300, 511)),
                ("srv_count", Int(300, 511)),
            ],
        ),
        "ipsweep" => p(
            ICMP,
            &["eco_i", "ecr_i"],
            SF,
            &[
                ("src_bytes", Int(8, 20)),
                ("srv_diff_host_rate", Rate(0.5, 1.0)),
                ("dst_host_count", Int(1, 100)),
                ("dst_host_same_src_port_rate", Rate(0.8, 1.0)),
                ("dst_host_srv_diff_host_rate", Rate(0.3, 0.8)),
            ],
        ),
        "nmap" => p(
            &[("tcp", 0.5), ("udp", 0.2), ("icmp", 0.3)],
            &["private", "eco_i", "other", "finger"],
            &[("SF", 0.4), ("S0", 0.3), ("REJ", 0.2), ("RSTOS0", 0.1)],
            &[
                ("diff_srv_rate", Rate(0.3, 1.0)),
                ("same_srv_rate", Rate(0.0, 0.5)),
                ("dst_host_diff_srv_rate", Rate(0.3, 1.0)),
            ],
        ),
        "portsweep" => p(
            TCP,
            &["private", "other", "ftp_data"],
            &[("REJ", 0.4), ("RSTR", 0.4), ("RSTOS0", 0.2)],
            &[
                ("duration", LogN(1.0, 3.0)),
                ("rerror_rate", Rate(0.5, 1.0)),
                ("srv_rerror_rate", Rate(0.5, 1.0)),
                ("dst_host_same_src_port_rate", Rate(0.5, 1.0)),
                ("dst_host_rerror_rate", Rate(0.5, 1.0)),
                ("dst_host_srv_rerror_rate", Rate(0.5, 1.0)),
            ],
        ),
        "satan" => p(
            TCP,
            &[],
            &[("REJ", 0.6), ("S0", 0.2), ("RSTO", 0.1), ("SF", 0.1)],
            &[
                ("count", Int(1, 200)),
                ("rerror_rate", Rate(0.5, 1.0)),
                ("same_srv_rate", Rate(0.0, 0.2)),
                ("diff_srv_rate", Rate(0.5, 1.0)),
                ("dst_host_diff_srv_rate", Rate(0.5, 1.0)),
                ("dst_host_rerror_rate", Rate(0.4, 1.0)),
            ],
        ),
        "mscan" => p(
            TCP,
            &[],
            &[("REJ", 0.4), ("S0", 0.3), ("SF", 0.3)],
            &[
                ("count", Int(1, 100)),
                ("diff_srv_rate", Rate(0.2, 1.0)),
                ("dst_host_count", Const(255.0)),
                ("dst_host_diff_srv_rate", Rate(0.3, 1.0)),
                ("dst_host_srv_diff_host_rate", Rate(0.0, 0.5)),
            ],
        ),
        "saint" => p(
            TCP,
            &[],
            &[("REJ", 0.7), ("SF", 0.3)],
            &[
                ("count", Int(1, 150)),
                ("rerror_rate", Rate(0.3, 1.0)),
                ("diff_srv_rate", Rate(0.3, 1.0)),
                ("dst_host_rerror_rate", Rate(0.3, 1.0)),
            ],
        ),
        "guess_passwd" => p(
            TCP,
            &["telnet", "pop_3", "imap4"],
            &[("RSTO", 0.6), ("SF", 0.4)],
            &[
                ("duration", LogN(3.0, 0.8)),
                ("src_bytes", LogN(125.0, 0.3)),
                ("dst_bytes", LogN(180.0, 0.4)),
                ("num_failed_logins", Bern(0.9)),
                ("hot", Bern(0.3)),
            ],
        ),
        "ftp_write" => p(
            TCP,
            &["ftp", "ftp_data", "login"],
            SF,
            &[
                ("src_bytes", LogN(300.0, 1.2)),
                ("logged_in", Const(1.0)),
                ("hot", Int(0, 3)),
                ("is_guest_login", Bern(0.5)),
                ("num_file_creations", Int(0, 2)),
            ],
        ),
        "imap" => p(
            TCP,
            &["imap4"],
            &[("SH", 0.5), ("SF", 0.5)],
            &[("src_bytes", LogN(1500.0, 1.5)), ("logged_in", Bern(0.5))],
        ),
        "multihop" => p(TCP, &["telnet", "ftp_data", "login"], SF, LOGIN_SESSION),
        "phf" => p(
            TCP,
            &["http"],
            SF,
            &[
                ("src_bytes", Int(50, 60)),
                ("dst_bytes", Int(5000, 6000)),
                ("hot", Const(2.0)),
                ("logged_in", Const(1.0)),
            ],
        ),
        "spy" => p(
            TCP,
            &["telnet"],
            SF,
            &[
                ("duration", LogN(20000.0, 0.5)),
                ("src_bytes", LogN(1500.0, 0.5)),
                ("logged_in", Const(1.0)),
                ("hot", Int(1, 3)),
            ],
        ),
        "warezclient" => p(
            TCP,
            &["ftp_data", "ftp"],
            SF,
            &[
                ("duration", LogN(100.0, 2.0)),
                ("src_bytes", LogN(200000.0, 1.5)),
                ("logged_in", Const(1.0)),
                ("hot", Int(0, 28)),
                ("is_guest_login", Bern(0.6)),
            ],
        ),
        "warezmaster" => p(
            TCP,
            &["ftp", "ftp_data"],
            SF,
            &[
                ("duration", LogN(300.0, 1.5)),
                ("src_bytes", LogN(300.0, 1.5)),
                ("dst_bytes", LogN(500000.0, 2.0)),
                ("logged_in", Const(1.0)),
                ("hot", Int(0, 28)),
                ("is_guest_login", Bern(0.5)),
            ],
        ),
        "named" => p(
            &[("tcp", 0.5), ("udp", 0.5)],
            &["domain", "domain_u"],
            SF,
            &[
                ("src_bytes", LogN(1000.0, 1.0)),
                ("dst_bytes", LogN(500.0, 1.0)),
                ("logged_in", Bern(0.5)),
            ],
        ),
        "sendmail" => p(
            TCP,
            &["smtp"],
            SF,
            &[
                ("src_bytes", LogN(2000.0, 1.0)),
                ("dst_bytes", LogN(400.0, 0.5)),
                ("logged_in", Const(1.0)),
            ],
        ),
        "snmpgetattack" => p(
            UDP,
            &["private"],
            SF,
            &[
                ("src_bytes", Int(100, 110)),
                ("dst_bytes", Int(100, 110)),
                ("count", Int(1, 10)),
                ("srv_count", Int(1, 10)),
            ],
        ),
        "snmpguess" => p(
            UDP,
            &["private"],
            SF,
            &[
                ("src_bytes", Int(30, 50)),
                ("count", Int(1, 5)),
                ("srv_count", Int(1, 5)),
                ("dst_host_srv_count", Int(1, 10)),
            ],
        ),
        "worm" => p(
            TCP,
            &["http"],
            SF,
            &[
                ("src_bytes", LogN(4000.0, 0.5)),
                ("dst_bytes", LogN(2000.0, 0.5)),
                ("logged_in", Const(1.0)),
            ],
        ),
        "xlock" | "xsnoop" => p(
            TCP,
            &["X11"],
            &[("SF", 0.6), ("RSTO", 0.4)],
            &[
                ("duration", LogN(50.0, 1.0)),
                ("src_bytes", LogN(500.0, 1.0)),
                ("dst_bytes", LogN(1000.0, 1.0)),
            ],
        ),
        "buffer_overflow" | "loadmodule" | "perl" | "rootkit" | "ps" | "xterm" | "sqlattack" => {
            p(TCP, REMOTE_SHELLS, SF, ROOT_ESCALATION)
        }
        "httptunnel" => p(
            TCP,
            &["http", "ftp", "telnet"],
            SF,
            &[
                ("duration", LogN(1000.0, 1.5)),
                ("src_bytes", LogN(2000.0, 1.0)),
                ("dst_bytes", LogN(2000.0, 1.0)),
                ("logged_in", Const(1.0)),
                ("hot", Int(0, 2)),
            ],
        ),
        other => unreachable!("no profile for {other}"),
    }
}

fn weighted<'a>(choices: &[(&'a str, f64)], rng: &mut SeededRng) -> &'a str {
    let total: f64 = choices.iter().map(|c| c.1).sum();
    let mut u = rng.random::<f64>() * total;
    for &(name, w) in choices {
        if u < w {
            return name;
        }
        u -= w;
    }
    choices[choices.len() - 1].0
}

fn numeric_index(name: &str) -> usize {
    let pos = FEATURE_NAMES
        .iter()
        .position(|f| *f == name)
        .unwrap_or_else(|| panic!("unknown feature {name}"));
    assert!(pos == 0 || pos > 3, "{name} is categorical");
    if pos == 0 {
        0
    } else {
        pos - 3
    }
}

fn sample_record(attack: &str, profile: &Profile, rng: &mut SeededRng) -> RawRecord {
    let mut numeric = vec![0.0; 38];
    for &(name, d) in BACKGROUND.iter().chain(profile.features) {
        numeric[numeric_index(name)] = d.sample(rng);
    }
    let protocol = weighted(profile.protocols, rng);
    let service = match profile.services {
        [] => SERVICES[rng.random_range(0..SERVICES.len())],
        list => list[rng.random_range(0..list.len())],
    };
    // Normal traffic occasionally uses a random service, so every
    // vocabulary entry shows up in a full-size file.
    let service = if attack == "normal" && rng.random_bool(0.02) {
        SERVICES[rng.random_range(0..SERVICES.len())]
    } else {
        service
    };
    let flag = weighted(profile.flags, rng);
    RawRecord {
        features: TrafficFeatures {
            numeric,
            categorical: [protocol.to_string(), service.to_string(), flag.to_string()],
        },
        attack_name: attack.to_string(),
        difficulty: rng.random_range(10..=21),
    }
}

/// Which file to imitate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

/// Generates one file's worth of records in a seeded, shuffled order.
/// Per-attack counts are `round(count · scale)`, at least 1 where the real
/// file has any.
pub fn generate(split: Split, scale: f64, seed: u64) -> Vec<RawRecord> {
    let label = match split {
        Split::Train => "fixture-train",
        Split::Test => "fixture-test",
    };
    let mut rng = child_rng(seed, label);
    let mut out = Vec::new();
    for &(attack, train, test) in &ATTACK_COUNTS {
        let n = match split {
            Split::Train => train,
            Split::Test => test,
        };
        if n == 0 {
            continue;
        }
        let n = ((n as f64 * scale).round() as usize).max(1);
        let p = profile(attack);
        out.extend((0..n).map(|_| sample_record(attack, &p, &mut rng)));
    }
    use rand::seq::SliceRandom;
    out.shuffle(&mut rng);
    out
}

/// Records as file text, one line each.
pub fn to_text(records: &[RawRecord]) -> String {
    let mut s = String::new();
    for r in records {
        s.push_str(&r.to_line());
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::super::record::parse_records;
    use super::super::taxonomy::ClassTaxonomy;
    use super::*;

    #[test]
    fn every_attack_has_a_profile_with_valid_features() {
        let mut rng = child_rng(0, "t");
        for &(a, _, _) in &ATTACK_COUNTS {
            let r = sample_record(a, &profile(a), &mut rng);
            assert_eq!(r.features.numeric.len(), 38);
            assert!(SERVICES.contains(&r.features.categorical[1].as_str()));
            assert!(FLAGS.contains(&r.features.categorical[2].as_str()));
            assert!(PROTOCOLS.contains(&r.features.categorical[0].as_str()));
        }
    }

    #[test]
    fn category_totals_match_the_real_files() {
        let tax = ClassTaxonomy::bundled();
        let mut train = [0usize; 5];
        let mut test = [0usize; 5];
        for &(a, tr, te) in &ATTACK_COUNTS {
            let c = tax.map_attack(a).unwrap();
            train[c] += tr;
            test[c] += te;
        }
        assert_eq!(train, [67343, 45927, 11656, 995, 52]);
        assert_eq!(test, [9711, 7458, 2421, 2754, 200]);
    }

    #[test]
    fn generation_is_seeded_and_parses_back() {
        let a = generate(Split::Test, 0.05, 3);
        assert_eq!(a, generate(Split::Test, 0.05, 3));
        assert_ne!(a, generate(Split::Test, 0.05, 4));
        let back = parse_records(to_text(&a).as_bytes()).unwrap();
        assert_eq!(back, a);
    }
}
