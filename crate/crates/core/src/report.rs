//! Run reports: unit-tagged scalars, verdicts and provenance.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::laws::{LawVerdict, LedgerReport};
use crate::protocol::ProtocolSpec;
use crate::Result;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Unit {
    Energy,
    Nats,
    Bits,
    Dimensionless,
}

impl Unit {
    pub fn as_str(self) -> &'static str {
        match self {
            Unit::Energy => "energy",
            Unit::Nats => "nats",
            Unit::Bits => "bits",
            Unit::Dimensionless => "dimensionless",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scalar {
    pub name: String,
    pub value: f64,
    pub units: Unit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub law: String,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub tolerance: f64,
    pub units: Unit,
    /// `pass`, `fail` or `not_applicable`.
    pub outcome: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub saturated: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub decomposition_residual: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    /// File path or scenario name.
    pub source: String,
    /// SHA-256 of the protocol file bytes, hex.
    pub sha256: String,
    pub seed: Option<u64>,
    pub tool_version: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Erasure {
    pub class: String,
    pub reset_residual: f64,
    pub decoupling_residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub protocol: String,
    pub beta: f64,
    pub provenance: Provenance,
    pub probabilities: Vec<f64>,
    pub scalars: Vec<Scalar>,
    pub verdicts: Vec<Verdict>,
    pub erasure: Erasure,
    pub implication_holds: Option<bool>,
    pub perfect_erasure_agreement: Option<bool>,
    pub measurement_forms_agree: bool,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn verdict(v: &LawVerdict, units: Unit) -> Verdict {
    let outcome = match v.outcome {
        crate::laws::Outcome::Pass => "pass",
        crate::laws::Outcome::Fail => "fail",
        crate::laws::Outcome::NotApplicable => "not_applicable",
    };
    Verdict {
        law: v.law.to_string(),
        lhs: v.lhs,
        rhs: v.rhs,
        margin: v.margin,
        tolerance: v.tolerance,
        units,
        outcome: outcome.into(),
        saturated: v.saturated,
        decomposition_residual: v.decomposition_residual,
    }
}

impl RunReport {
    /// `file_bytes` is the protocol file the run came from; scenario runs
    /// hash their serialized protocol.
    pub fn new(spec: &ProtocolSpec, ledger: &LedgerReport, source: &str, file_bytes: &[u8]) -> Self {
        use Unit::*;
        let w = &ledger.work;
        let i = &ledger.info;
        let s = |name: &str, value: f64, units: Unit| Scalar {
            name: name.into(),
            value,
            units,
        };
        let scalars = vec![
            s("w_ext_a", w.w_ext_a, Energy),
            s("w_in_mk", w.w_in_mk, Energy),
            s("w_tot", w.w_tot, Energy),
            s("w_tot_from_totals", w.w_tot_from_totals, Energy),
            s("de_a_02", w.de_a_02, Energy),
            s("de_b1a_23", w.de_b1a_23, Energy),
            s("de_mk_02", w.de_mk_02, Energy),
            s("de_mkb2_34", w.de_mkb2_34, Energy),
            s("df_a_04", i.df_a_04, Energy),
            s("df_amk_04", i.df_amk_04, Energy),
            s("i_go", i.i_go, Nats),
            s("j_go", i.j_go, Nats),
            s("h_outcomes", i.h_outcomes, Nats),
            s("holevo_ak_3", i.holevo_ak, Nats),
            s("cmi_am_k_2", i.cmi_am_k, Nats),
            s("s_irr_b1", i.s_irr_b1, Nats),
            s("s_irr_b2", i.s_irr_b2, Nats),
            s("ds_amk_02", i.ds_amk_02, Nats),
            s("ds_mk_02", i.ds_mk_02, Nats),
            s("i_a_mk_4", i.i_a_mk_4, Nats),
            s("s_a_0", i.s_a_0, Nats),
            s("s_m_0", i.s_m_0, Nats),
            s("cmi_go_identity_residual", ledger.cmi_go_identity_residual, Nats),
            s("measurement_identity_residual", ledger.measurement.identity_residual, Nats),
            s("beta", spec.beta, Dimensionless),
        ];
        let sl = &ledger.second_laws;
        let m = &ledger.measurement;
        let verdicts = vec![
            verdict(&ledger.extracted_work_identity, Energy),
            verdict(&ledger.injected_work_identity, Energy),
            verdict(&ledger.extracted_work_bound, Energy),
            verdict(&ledger.injected_work_bound, Energy),
            verdict(&sl.overall, Energy),
            verdict(&sl.information, Energy),
            verdict(&sl.overall_entropy_form, Nats),
            verdict(&sl.information_entropy_form, Nats),
            verdict(&sl.free_energy_chain, Energy),
            verdict(&m.entropy_form, Nats),
            verdict(&m.shannon_form, Nats),
        ];
        RunReport {
            protocol: spec.name.clone(),
            beta: spec.beta,
            provenance: Provenance {
                source: source.into(),
                sha256: sha256_hex(file_bytes),
                seed: spec.seed,
                tool_version: env!("CARGO_PKG_VERSION").into(),
            },
            probabilities: ledger.probabilities.clone(),
            scalars,
            verdicts,
            erasure: Erasure {
                class: ledger.erasure_class.into(),
                reset_residual: ledger.erasure_reset_residual,
                decoupling_residual: ledger.erasure_decoupling_residual,
            },
            implication_holds: sl.implication_holds,
            perfect_erasure_agreement: sl.perfect_erasure_agreement,
            measurement_forms_agree: m.forms_agree,
        }
    }

    /// Evaluates `spec` and builds its report.
    pub fn evaluate(spec: &ProtocolSpec, source: &str, file_bytes: &[u8]) -> Result<Self> {
        let ledger = crate::laws::evaluate(spec)?;
        Ok(Self::new(spec, &ledger, source, file_bytes))
    }

    pub fn scalar(&self, name: &str) -> Option<f64> {
        self.scalars.iter().find(|s| s.name == name).map(|s| s.value)
    }

    pub fn verdict(&self, law: &str) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.law == law)
    }

    /// Rescales every nats-valued scalar and verdict to bits.
    pub fn in_bits(mut self) -> Self {
        let ln2 = std::f64::consts::LN_2;
        for s in &mut self.scalars {
            if s.units == Unit::Nats {
                s.value /= ln2;
                s.units = Unit::Bits;
            }
        }
        for v in &mut self.verdicts {
            if v.units == Unit::Nats {
                v.lhs /= ln2;
                v.rhs /= ln2;
                v.margin /= ln2;
                v.tolerance /= ln2;
                v.units = Unit::Bits;
                v.decomposition_residual = v.decomposition_residual.map(|x| x / ln2);
            }
        }
        self
    }

    pub fn to_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("protocol  {}\n", self.protocol));
        out.push_str(&format!("source    {}\n", self.provenance.source));
        out.push_str(&format!("sha256    {}\n", self.provenance.sha256));
        out.push_str(&format!("erasure   {}\n", self.erasure.class));
        out.push_str(&format!("p(k)      {:?}\n\n", self.probabilities));
        out.push_str(&format!("{:<32} {:>16}  {}\n", "scalar", "value", "units"));
        for s in &self.scalars {
            out.push_str(&format!("{:<32} {:>16.10}  {}\n", s.name, s.value, s.units.as_str()));
        }
        out.push_str(&format!(
            "\n{:<38} {:>14} {:>14} {:>12}  {:<8} {}\n",
            "law", "lhs", "rhs", "margin", "units", "verdict"
        ));
        for v in &self.verdicts {
            let sat = match (v.saturated, v.outcome.as_str()) {
                (Some(true), "pass") => " (saturated)",
                _ => "",
            };
            let shown = match v.outcome.as_str() {
                "pass" => "PASS",
                "fail" => "FAIL",
                _ => "n/a",
            };
            out.push_str(&format!(
                "{:<38} {:>14.8} {:>14.8} {:>12.3e}  {:<8} {}{}\n",
                v.law,
                v.lhs,
                v.rhs,
                v.margin,
                v.units.as_str(),
                shown,
                sat
            ));
        }
        out
    }
}

/// Columns of the CSV output, one row per protocol.
pub const CSV_COLUMNS: &[&str] = &[
    "protocol",
    "seed",
    "beta",
    "erasure_class",
    "w_ext_a",
    "w_in_mk",
    "w_tot",
    "df_a_04",
    "df_amk_04",
    "i_go",
    "j_go",
    "h_outcomes",
    "ds_amk_02",
    "cmi_am_k_2",
    "extracted_work_identity",
    "injected_work_identity",
    "extracted_work_bound",
    "injected_work_bound",
    "overall_second_law",
    "information_second_law",
    "measurement_entropy_form",
    "measurement_shannon_form",
];

pub fn csv_header() -> String {
    CSV_COLUMNS.join(",")
}

impl RunReport {
    pub fn csv_row(&self) -> String {
        CSV_COLUMNS
            .iter()
            .map(|&c| match c {
                "protocol" => self.protocol.replace(',', ";"),
                "seed" => self.provenance.seed.map(|s| s.to_string()).unwrap_or_default(),
                "beta" => format!("{:?}", self.beta),
                "erasure_class" => self.erasure.class.clone(),
                _ => match (self.scalar(c), self.verdict(c)) {
                    (Some(x), _) => format!("{x:?}"),
                    (None, Some(v)) => v.outcome.clone(),
                    (None, None) => String::new(),
                },
            })
            .collect::<Vec<_>>()
            .join(",")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios::{build_counterexample, ScenarioConfig};

    #[test]
    fn report_of_counterexample() {
        let spec = build_counterexample(&ScenarioConfig::default()).unwrap();
        let r = RunReport::evaluate(&spec, "counterexample", b"").unwrap();
        assert_eq!(r.verdict("measurement_shannon_form").unwrap().outcome, "fail");
        assert_eq!(r.scalar("h_outcomes"), Some(0.0));
        let bits = r.clone().in_bits();
        assert!((bits.scalar("j_go").unwrap() - 1.0).abs() < 1e-10);
        assert_eq!(r.csv_row().split(',').count(), CSV_COLUMNS.len());
        let back: RunReport = serde_json::from_str(&serde_json::to_string(&r).unwrap()).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn sha_of_empty() {
        assert_eq!(
            sha256_hex(b""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }
}
