//! Column layouts for the supported dataset families.

use serde::{Deserialize, Serialize};

/// Which public dataset layout a CSV file follows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemaId {
    /// 41 features + label (+ optional difficulty column). The distributed
    /// `KDDTrain+.txt` / `KDDTest+.txt` files carry no header row; both the
    /// headerless form and a headered form with the canonical names below
    /// are accepted.
    NslKdd,
    /// Flow-statistics columns + `Label` (the MachineLearningCVE layout).
    /// All non-label columns are numeric.
    CicIds2017,
    /// Any headered CSV whose last column is the label. Column kinds are
    /// inferred: a column where every value parses as a number is numeric,
    /// anything else is categorical.
    Generic,
}

impl SchemaId {
    pub fn parse(s: &str) -> Option<SchemaId> {
        match s.to_ascii_lowercase().as_str() {
            "nsl-kdd" | "nslkdd" | "nsl_kdd" => Some(SchemaId::NslKdd),
            "cic-ids-2017" | "cicids2017" | "cic_ids_2017" | "cic" => Some(SchemaId::CicIds2017),
            "generic" => Some(SchemaId::Generic),
            _ => None,
        }
    }
}

impl std::fmt::Display for SchemaId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            SchemaId::NslKdd => "nsl-kdd",
            SchemaId::CicIds2017 => "cic-ids-2017",
            SchemaId::Generic => "generic",
        };
        f.write_str(s)
    }
}

/// The 41 NSL-KDD feature columns, in file order.
pub const NSL_KDD_FEATURES: [&str; 41] = [
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

/// NSL-KDD columns that hold categorical values.
pub const NSL_KDD_CATEGORICAL: [&str; 3] = ["protocol_type", "service", "flag"];

pub fn nsl_kdd_is_categorical(name: &str) -> bool {
    NSL_KDD_CATEGORICAL.contains(&name)
}
