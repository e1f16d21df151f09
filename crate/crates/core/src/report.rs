//! JSON estimate reports with a stable schema.
//!
//! Every float is serialized as a decimal string with 17 significant digits
//! so reports are byte-reproducible across platforms; the only
//! non-deterministic field is `timestamp_unix`, which consumers strip before
//! diffing.

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::io::Write;
use std::path::Path;

pub const SCHEMA_VERSION: u32 = 1;

/// `f64` carried as a 17-significant-digit decimal string in JSON.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct F64Str(pub f64);

impl From<f64> for F64Str {
    fn from(v: f64) -> Self {
        F64Str(v)
    }
}

pub fn format_float17(v: f64) -> String {
    format!("{v:.16e}")
}

impl Serialize for F64Str {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&format_float17(self.0))
    }
}

impl<'de> Deserialize<'de> for F64Str {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse::<f64>()
            .map(F64Str)
            .map_err(|e| D::Error::custom(format!("bad float string '{s}': {e}")))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct GridMeta {
    pub dim: usize,
    pub points_per_axis: usize,
    pub half_width: F64Str,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ParamMeta {
    pub n: usize,
    pub gamma: F64Str,
    pub alpha: F64Str,
    pub beta: F64Str,
    pub s: F64Str,
    pub admissible: bool,
}

impl ParamMeta {
    pub fn from_params(p: &crate::estimator::ParamSet) -> Self {
        ParamMeta {
            n: p.n,
            gamma: p.gamma.into(),
            alpha: p.alpha.into(),
            beta: p.beta.into(),
            s: p.s.into(),
            admissible: p.admissible,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EvolutionMeta {
    pub gamma: F64Str,
    pub s: F64Str,
    pub time_half_width: F64Str,
    pub time_nodes: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct NamedConstant {
    pub name: String,
    pub value: F64Str,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub witness: Option<String>,
}

impl NamedConstant {
    pub fn new(name: &str, value: f64) -> Self {
        NamedConstant {
            name: name.to_string(),
            value: value.into(),
            witness: None,
        }
    }

    pub fn with_witness(name: &str, value: f64, witness: String) -> Self {
        NamedConstant {
            name: name.to_string(),
            value: value.into(),
            witness: Some(witness),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RefinementRow {
    pub level: usize,
    pub label: String,
    pub value: F64Str,
}

/// Measured constants, their witnesses and the refinement history of one
/// experiment run.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EstimateReport {
    pub schema_version: u32,
    pub command: String,
    /// Wall-clock seconds since the Unix epoch; the single field excluded
    /// from byte-determinism comparisons.
    pub timestamp_unix: u64,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub grid: Option<GridMeta>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub params: Option<ParamMeta>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub evolution: Option<EvolutionMeta>,
    pub weights: Vec<String>,
    pub constants: Vec<NamedConstant>,
    pub refinement: Vec<RefinementRow>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub verdict: Option<String>,
    pub notes: Vec<String>,
}

impl EstimateReport {
    pub fn new(command: &str, seed: u64) -> Self {
        let timestamp_unix = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        EstimateReport {
            schema_version: SCHEMA_VERSION,
            command: command.to_string(),
            timestamp_unix,
            seed,
            grid: None,
            params: None,
            evolution: None,
            weights: Vec::new(),
            constants: Vec::new(),
            refinement: Vec::new(),
            verdict: None,
            notes: Vec::new(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }
}

/// Writes bytes atomically (temp file in the target directory + rename).
pub fn write_atomic(path: &Path, contents: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    std::fs::create_dir_all(dir)?;
    let tmp = dir.join(format!(
        ".{}.tmp",
        path.file_name()
            .map(|s| s.to_string_lossy().to_string())
            .unwrap_or_else(|| "report".into())
    ));
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)
}

/// CSV with '.' decimals, '\n' line endings and a mandatory header row.
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new(header: &[&str]) -> Self {
        CsvTable {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.header.len(), "csv row arity");
        self.rows.push(row);
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = String::new();
        out.push_str(&self.header.join(","));
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out.into_bytes()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_string_round_trip() {
        for v in [0.0, 1.0, -3.25, std::f64::consts::PI, 1.2345678912345678e-15] {
            let s = format_float17(v);
            assert_eq!(s.parse::<f64>().unwrap(), v, "{s}");
        }
    }

    #[test]
    fn report_json_round_trip_and_determinism() {
        let mut r = EstimateReport::new("ks-norm", 42);
        r.weights.push("power:a=1.0".into());
        r.constants.push(NamedConstant::with_witness(
            "ks_norm",
            8.0 / 3.0,
            "level 0 corner [0] side 1".into(),
        ));
        r.refinement.push(RefinementRow {
            level: 0,
            label: "N=16".into(),
            value: 1.25.into(),
        });
        r.verdict = Some("STABLE".into());
        let json = r.to_json();
        let back: EstimateReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, r);
        // Identical content serializes identically.
        assert_eq!(r.to_json(), back.to_json());
        assert!(json.contains("2.6666666666666665e0"));
    }

    #[test]
    fn csv_layout() {
        let mut t = CsvTable::new(&["r", "value"]);
        t.push(vec!["1".into(), format_float17(0.5)]);
        let bytes = t.to_bytes();
        let text = String::from_utf8(bytes).unwrap();
        assert_eq!(text, "r,value\n1,5.0000000000000000e-1\n");
    }
}
