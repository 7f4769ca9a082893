//! Explanation documents and their renderings.
//!
//! An [`ExplanationDocument`] holds everything needed to render one
//! explanation: the instance, the explained output and an ordered list of
//! records. It serialises to JSON with a fixed key order, so equal documents
//! always produce identical bytes.

mod svg;
mod text;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ciu::CiuResult;
use crate::shapley::Attribution;

pub use svg::{render_barplot, Bar, BarPlot, BarPlotData};
pub use text::{render_text, TextTemplate, TEXT_TEMPLATE_V1};

pub const DOCUMENT_FORMAT: &str = "ciu-explanation/1";

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("not an explanation document: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported document format `{0}`")]
    Format(String),
    #[error("template {0}")]
    Template(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// CI and CU bars.
    Ciu,
    /// Signed contextual influence bars.
    Influence,
    /// Signed Shapley attributions.
    Shapley,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Ciu => "ciu",
            Method::Influence => "influence",
            Method::Shapley => "shapley",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputRef {
    pub index: usize,
    pub name: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureValue {
    pub name: String,
    pub value: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Record {
    Ciu(CiuResult),
    Attribution(Attribution),
}

impl Record {
    pub fn name(&self) -> &str {
        match self {
            Record::Ciu(r) => &r.concept,
            Record::Attribution(a) => &a.name,
        }
    }
}

/// Records explaining the parts of one concept.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Drilldown {
    pub concept: String,
    pub records: Vec<Record>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RenderHints {
    /// Abstraction level the top records come from, e.g. `top` or `1`.
    pub level: String,
    /// Concepts expanded below the top level, in order.
    pub drilldown_path: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExplanationDocument {
    pub format: String,
    pub instance_id: String,
    pub model_id: String,
    pub output: OutputRef,
    pub method: Method,
    /// Influence baseline for CIU documents, expected output for Shapley ones.
    pub baseline: f64,
    pub prediction: f64,
    pub instance: Vec<FeatureValue>,
    pub records: Vec<Record>,
    pub drilldowns: Vec<Drilldown>,
    pub render: RenderHints,
}

impl ExplanationDocument {
    pub fn new(
        instance_id: impl Into<String>,
        model_id: impl Into<String>,
        output: OutputRef,
        method: Method,
        baseline: f64,
        prediction: f64,
    ) -> Self {
        ExplanationDocument {
            format: DOCUMENT_FORMAT.to_string(),
            instance_id: instance_id.into(),
            model_id: model_id.into(),
            output,
            method,
            baseline,
            prediction,
            instance: Vec::new(),
            records: Vec::new(),
            drilldowns: Vec::new(),
            render: RenderHints {
                level: "top".into(),
                drilldown_path: Vec::new(),
            },
        }
    }

    pub fn with_instance(mut self, values: Vec<(String, String)>) -> Self {
        self.instance = values.into_iter().map(|(name, value)| FeatureValue { name, value }).collect();
        self
    }

    pub fn with_ciu(mut self, results: Vec<CiuResult>) -> Self {
        self.records = results.into_iter().map(Record::Ciu).collect();
        self
    }

    pub fn with_attributions(mut self, attributions: Vec<Attribution>) -> Self {
        self.records = attributions.into_iter().map(Record::Attribution).collect();
        self
    }

    pub fn with_level(mut self, level: impl Into<String>) -> Self {
        self.render.level = level.into();
        self
    }

    pub fn push_drilldown(&mut self, concept: impl Into<String>, results: Vec<CiuResult>) {
        let concept = concept.into();
        self.render.drilldown_path.push(concept.clone());
        self.drilldowns.push(Drilldown {
            concept,
            records: results.into_iter().map(Record::Ciu).collect(),
        });
    }

    pub fn record(&self, name: &str) -> Option<&Record> {
        self.records.iter().find(|r| r.name() == name)
    }

    /// Pretty-printed JSON with a trailing newline.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("documents serialize to JSON");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, ReportError> {
        let doc: ExplanationDocument = serde_json::from_str(text)?;
        if doc.format != DOCUMENT_FORMAT {
            return Err(ReportError::Format(doc.format));
        }
        Ok(doc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ciu::{explain_instance, CiuConfig};
    use crate::data::Instance;
    use crate::model::{LinearModel, Predictor};
    use crate::shapley::Attribution;
    use crate::vocabulary::{IndexSet, LevelSelector, Vocabulary};

    pub(crate) fn linear_document() -> ExplanationDocument {
        let m = LinearModel::unit(vec![0.3, 0.7]).unwrap();
        let x = Instance::new(m.schema(), vec![0.3, 0.9]).unwrap();
        let results = explain_instance(
            &m,
            &x,
            &Vocabulary::singletons(m.schema()),
            LevelSelector::Top,
            0,
            &CiuConfig::default(),
        )
        .unwrap();
        ExplanationDocument::new(
            "x",
            "linear",
            OutputRef {
                index: 0,
                name: "y".into(),
            },
            Method::Ciu,
            0.5,
            m.predict_values(x.values())[0],
        )
        .with_instance(x.describe(m.schema()))
        .with_ciu(results)
    }

    #[test]
    fn json_round_trip() {
        let doc = linear_document();
        let text = doc.to_json();
        assert_eq!(ExplanationDocument::from_json(&text).unwrap(), doc);
        assert!(text.find("\"format\"").unwrap() < text.find("\"instance_id\"").unwrap());

        let shap = ExplanationDocument::new(
            "x",
            "linear",
            OutputRef {
                index: 0,
                name: "y".into(),
            },
            Method::Shapley,
            0.25,
            0.75,
        )
        .with_attributions(vec![Attribution {
            name: "AB".into(),
            features: IndexSet::new([0, 1]).unwrap(),
            value: 0.1 + 0.2,
            stderr: Some(1e-3),
        }]);
        assert_eq!(ExplanationDocument::from_json(&shap.to_json()).unwrap(), shap);
    }

    #[test]
    fn other_formats_are_rejected() {
        let text = linear_document().to_json().replace(DOCUMENT_FORMAT, "something/else");
        assert!(matches!(ExplanationDocument::from_json(&text), Err(ReportError::Format(_))));
        assert!(ExplanationDocument::from_json("{").is_err());
    }
}
