//! JSON, JSON-lines and CSV artifacts.
//!
//! Every JSON document carries `schema_version`. Floating-point values are
//! rounded to 12 significant digits before they are written, in JSON and CSV
//! alike.

use std::io::Write;
use std::path::Path;

use esdiag_core::diagnose::{ChannelDiagnosis, DiagnosisKind};
use esdiag_core::qmat::polarization::Setting;
use esdiag_core::sampler::{
    config_settings, CoincidenceRecord, Experiment, HomCalibration, SinglesRecord, CONFIGS,
};
use esdiag_core::witness::{Normalization, ProbabilitySet, Source};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

pub fn round_sig(x: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    if !x.is_finite() {
        return x;
    }
    format!("{x:.11e}").parse().unwrap_or(x)
}

/// Locale-free decimal text of `x` at 12 significant digits.
pub fn number(x: f64) -> String {
    round_sig(x).to_string()
}

fn round_value(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().unwrap_or(0.0);
            *v = serde_json::Number::from_f64(round_sig(x)).map(Value::Number).unwrap_or(Value::Null);
        }
        Value::Array(items) => items.iter_mut().for_each(round_value),
        Value::Object(map) => map.values_mut().for_each(round_value),
        _ => {}
    }
}

/// Serialize with rounded floats and a leading `schema_version`.
pub fn document<T: Serialize>(body: &T) -> Value {
    let mut value = serde_json::to_value(body).expect("plain data serializes");
    round_value(&mut value);
    match value {
        Value::Object(map) => {
            let mut out = Map::new();
            out.insert("schema_version".into(), SCHEMA_VERSION.into());
            out.extend(map);
            Value::Object(out)
        }
        other => other,
    }
}

pub fn line<T: Serialize>(body: &T) -> String {
    let mut value = serde_json::to_value(body).expect("plain data serializes");
    round_value(&mut value);
    value.to_string()
}

/// Write to `path`, or to stdout when there is none.
pub fn emit(path: Option<&Path>, contents: &str) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, contents).map_err(|e| CliError::io(p, e)),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(contents.as_bytes()).map_err(|e| CliError::io("<stdout>", e))
        }
    }
}

pub fn pretty(value: &Value) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("json value serializes");
    s.push('\n');
    s
}

pub fn csv_text(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory csv");
    for row in rows {
        w.write_record(row).expect("in-memory csv");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf-8 csv")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityDoc {
    pub p_hh: f64,
    pub p_hv: f64,
    pub p_vv: f64,
    pub p_pp: f64,
    pub p_h: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normalization: Option<String>,
}

impl ProbabilityDoc {
    pub fn from_set(p: &ProbabilitySet) -> Self {
        ProbabilityDoc {
            p_hh: p.hh,
            p_hv: p.hv,
            p_vv: p.vv,
            p_pp: p.pp,
            p_h: p.h,
            normalization: Some(p.normalization.name().into()),
        }
    }

    pub fn from_array(v: [f64; 5]) -> Self {
        ProbabilityDoc { p_hh: v[0], p_hv: v[1], p_vv: v[2], p_pp: v[3], p_h: v[4], normalization: None }
    }

    pub fn as_array(&self) -> [f64; 5] {
        [self.p_hh, self.p_hv, self.p_vv, self.p_pp, self.p_h]
    }

    pub fn to_set(&self, source: Source) -> Result<ProbabilitySet, String> {
        let normalization = match &self.normalization {
            None => Normalization::Conditioned,
            Some(n) => Normalization::from_name(n).ok_or_else(|| format!("unknown normalization '{n}'"))?,
        };
        ProbabilitySet::new(self.as_array(), normalization, source).map_err(|e| e.to_string())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationDoc {
    pub visibility: f64,
    pub dip_counts: u64,
    pub reference_counts: u64,
    pub shots: u64,
}

impl CalibrationDoc {
    pub fn from_calibration(c: &HomCalibration) -> Self {
        CalibrationDoc {
            visibility: c.visibility,
            dip_counts: c.raw_dip_counts.0,
            reference_counts: c.raw_dip_counts.1,
            shots: c.shots,
        }
    }

    pub fn to_calibration(&self) -> HomCalibration {
        HomCalibration {
            visibility: self.visibility,
            raw_dip_counts: (self.dip_counts, self.reference_counts),
            shots: self.shots,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FitDoc {
    pub strength: f64,
    pub chi_square: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DiagnosisDoc {
    pub kind: &'static str,
    pub strength: Option<f64>,
    pub confidence: f64,
    pub residuals: Map<String, Value>,
    pub input: ProbabilityDoc,
    pub sigma: [f64; 5],
}

impl DiagnosisDoc {
    pub fn new(d: &ChannelDiagnosis, input: &ProbabilitySet, sigma: [f64; 5]) -> Self {
        let residuals = d
            .residuals
            .iter()
            .map(|f| {
                let fit = FitDoc { strength: f.strength, chi_square: f.chi_square };
                (f.kind.name().to_string(), serde_json::to_value(fit).expect("plain data"))
            })
            .collect();
        DiagnosisDoc {
            kind: d.kind.name(),
            strength: d.strength,
            confidence: d.confidence,
            residuals,
            input: ProbabilityDoc::from_set(input),
            sigma,
        }
    }

    pub fn csv(d: &ChannelDiagnosis) -> String {
        let mut header = vec!["kind", "strength", "confidence"];
        let names: Vec<String> = DiagnosisKind::HYPOTHESES.iter().map(|k| format!("chi2_{}", k.name())).collect();
        header.extend(names.iter().map(String::as_str));
        let mut row = vec![d.kind.name().to_string(), d.strength.map(number).unwrap_or_default(), number(d.confidence)];
        row.extend(d.residuals.iter().map(|f| number(f.chi_square)));
        csv_text(&header, &[row])
    }
}

/// One line of a JSON-lines records file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
pub enum RecordLine {
    Header {
        schema_version: u32,
        seed: u64,
        normalization: String,
        calibration: CalibrationDoc,
    },
    Coincidence {
        config_id: u8,
        photon2: char,
        photon4: char,
        seed: u64,
        shots_per_sequence: u64,
        counts: Vec<u64>,
    },
    Singles {
        photon: u8,
        setting: char,
        seed: u64,
        shots_per_sequence: u64,
        counts: Vec<u64>,
    },
}

fn setting_from_symbol(c: char) -> Option<Setting> {
    Setting::ALL.into_iter().find(|s| s.symbol() == c)
}

pub fn records_jsonl(exp: &Experiment, cal: &HomCalibration, normalization: Normalization) -> String {
    let mut out = String::new();
    let header = RecordLine::Header {
        schema_version: SCHEMA_VERSION,
        seed: exp.seed,
        normalization: normalization.name().into(),
        calibration: CalibrationDoc::from_calibration(cal),
    };
    out.push_str(&line(&header));
    out.push('\n');
    for r in &exp.coincidences {
        let (a, b) = config_settings(r.config_id);
        let rec = RecordLine::Coincidence {
            config_id: r.config_id,
            photon2: a.symbol(),
            photon4: b.symbol(),
            seed: r.seed,
            shots_per_sequence: r.shots_per_sequence,
            counts: r.sequence_counts.clone(),
        };
        out.push_str(&line(&rec));
        out.push('\n');
    }
    for r in &exp.singles {
        let rec = RecordLine::Singles {
            photon: r.photon,
            setting: r.setting.symbol(),
            seed: r.seed,
            shots_per_sequence: r.shots_per_sequence,
            counts: r.sequence_counts.clone(),
        };
        out.push_str(&line(&rec));
        out.push('\n');
    }
    out
}

/// One row per sequence: `record,config_id,photon,setting,sequence,count,shots`.
pub fn records_csv(exp: &Experiment) -> String {
    let mut rows = Vec::new();
    for r in &exp.coincidences {
        let (a, b) = config_settings(r.config_id);
        for (i, c) in r.sequence_counts.iter().enumerate() {
            rows.push(vec![
                "coincidence".into(),
                r.config_id.to_string(),
                "2,4".into(),
                format!("{}{}", a.symbol(), b.symbol()),
                i.to_string(),
                c.to_string(),
                r.shots_per_sequence.to_string(),
            ]);
        }
    }
    for r in &exp.singles {
        for (i, c) in r.sequence_counts.iter().enumerate() {
            rows.push(vec![
                "singles".into(),
                String::new(),
                r.photon.to_string(),
                r.setting.symbol().to_string(),
                i.to_string(),
                c.to_string(),
                r.shots_per_sequence.to_string(),
            ]);
        }
    }
    csv_text(&["record", "config_id", "photon", "setting", "sequence", "count", "shots"], &rows)
}

/// Records file read back: the experiment, its calibration and mode.
pub struct LoadedRecords {
    pub experiment: Experiment,
    pub calibration: HomCalibration,
    pub normalization: Normalization,
}

pub fn parse_records(text: &str, path: &Path) -> Result<LoadedRecords, CliError> {
    let mut header = None;
    let mut coincidences = Vec::with_capacity(CONFIGS);
    let mut singles = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        if raw.trim().is_empty() {
            continue;
        }
        let rec: RecordLine =
            serde_json::from_str(raw).map_err(|e| CliError::malformed(path, format!("line {}: {e}", n + 1)))?;
        match rec {
            RecordLine::Header { schema_version, seed, normalization, calibration } => {
                if schema_version != SCHEMA_VERSION {
                    return Err(CliError::malformed(path, format!("unsupported schema_version {schema_version}")));
                }
                let mode = Normalization::from_name(&normalization)
                    .ok_or_else(|| CliError::malformed(path, format!("unknown normalization '{normalization}'")))?;
                header = Some((seed, mode, calibration.to_calibration()));
            }
            RecordLine::Coincidence { config_id, seed, shots_per_sequence, counts, .. } => {
                coincidences.push(CoincidenceRecord { config_id, sequence_counts: counts, shots_per_sequence, seed });
            }
            RecordLine::Singles { photon, setting, seed, shots_per_sequence, counts } => {
                let setting = setting_from_symbol(setting)
                    .ok_or_else(|| CliError::malformed(path, format!("unknown analyzer setting '{setting}'")))?;
                singles.push(SinglesRecord { photon, setting, sequence_counts: counts, shots_per_sequence, seed });
            }
        }
    }
    let (seed, normalization, calibration) =
        header.ok_or_else(|| CliError::malformed(path, "records file has no header line"))?;
    Ok(LoadedRecords { experiment: Experiment { coincidences, singles, seed }, calibration, normalization })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(round_sig(0.1 + 0.2), 0.3);
        assert_eq!(number(-0.25), "-0.25");
        assert_eq!(number(1.0 / 3.0), "0.333333333333");
        assert_eq!(number(2.0 / 3.0 * 1e-7), "0.0000000666666666667");
        assert_eq!(number(-0.0), "0");
    }

    #[test]
    fn documents_lead_with_schema_version() {
        let doc = document(&ProbabilityDoc::from_array([0.0, 0.5, 0.0, 1.0 / 3.0, 0.5]));
        let text = doc.to_string();
        assert!(text.starts_with("{\"schema_version\":1,"), "{text}");
        assert!(text.contains("\"p_pp\":0.333333333333"), "{text}");
    }

    #[test]
    fn csv_quotes_embedded_commas() {
        let text = csv_text(&["a", "b"], &[vec!["2,4".into(), "x".into()]]);
        assert_eq!(text, "a,b\n\"2,4\",x\n");
    }
}
