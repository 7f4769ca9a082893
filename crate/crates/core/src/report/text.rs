use std::collections::HashMap;

use super::{ExplanationDocument, Method, Record, ReportError};
use crate::ciu::CiuResult;
use crate::config::{parse_document, Document, ValueKind};
use crate::shapley::Attribution;

pub const TEXT_TEMPLATE_V1: &str = include_str!("../../resources/templates/text-v1.tmpl");

/// Sentence patterns and the words used for CI/CU bands.
#[derive(Clone, Debug, PartialEq)]
pub struct TextTemplate {
    pub version: i64,
    header: String,
    ciu_line: String,
    influence_line: String,
    attribution_line: String,
    drilldown_header: String,
    flat_line: String,
    importance: Vec<(f64, String)>,
    utility: Vec<(f64, String)>,
    directions: [String; 3],
}

fn string(doc: &Document, key: &str) -> Result<String, ReportError> {
    match doc.get(key).map(|e| &e.value.kind) {
        Some(ValueKind::Name(s)) => Ok(s.clone()),
        Some(_) => Err(ReportError::Template(format!("`{key}` must be a string"))),
        None => Err(ReportError::Template(format!("`{key}` is missing"))),
    }
}

fn strings(doc: &Document, key: &str) -> Result<Vec<String>, ReportError> {
    let items = doc
        .get(key)
        .and_then(|e| e.value.as_array())
        .ok_or_else(|| ReportError::Template(format!("`{key}` must be an array")))?;
    items
        .iter()
        .map(|v| match &v.kind {
            ValueKind::Name(s) => Ok(s.clone()),
            _ => Err(ReportError::Template(format!("`{key}` must contain strings"))),
        })
        .collect()
}

fn bands(doc: &Document, thresholds: &str, words: &str) -> Result<Vec<(f64, String)>, ReportError> {
    let t = doc
        .get(thresholds)
        .and_then(|e| e.value.as_array())
        .ok_or_else(|| ReportError::Template(format!("`{thresholds}` must be an array")))?;
    let t: Vec<i64> = t
        .iter()
        .map(|v| v.as_int().ok_or_else(|| ReportError::Template(format!("`{thresholds}` must contain integers"))))
        .collect::<Result<_, _>>()?;
    let w = strings(doc, words)?;
    if t.len() != w.len() || t.first() != Some(&0) || t.windows(2).any(|p| p[0] >= p[1]) {
        return Err(ReportError::Template(format!(
            "`{thresholds}` must rise from 0 and match `{words}` in length"
        )));
    }
    Ok(t.into_iter().map(|p| p as f64 / 100.0).zip(w).collect())
}

impl TextTemplate {
    pub fn parse(src: &str) -> Result<Self, ReportError> {
        let doc = parse_document(src).map_err(|e| ReportError::Template(e.to_string()))?;
        let version = doc
            .get("version")
            .and_then(|e| e.value.as_int())
            .ok_or_else(|| ReportError::Template("`version` is missing".into()))?;
        let directions: [String; 3] = strings(&doc, "direction_words")?
            .try_into()
            .map_err(|_| ReportError::Template("`direction_words` needs three entries".into()))?;
        Ok(TextTemplate {
            version,
            header: string(&doc, "header")?,
            ciu_line: string(&doc, "ciu_line")?,
            influence_line: string(&doc, "influence_line")?,
            attribution_line: string(&doc, "attribution_line")?,
            drilldown_header: string(&doc, "drilldown_header")?,
            flat_line: string(&doc, "flat_line")?,
            importance: bands(&doc, "importance_thresholds", "importance_words")?,
            utility: bands(&doc, "utility_thresholds", "utility_words")?,
            directions,
        })
    }
}

impl Default for TextTemplate {
    fn default() -> Self {
        TextTemplate::parse(TEXT_TEMPLATE_V1).expect("bundled template parses")
    }
}

fn number(v: f64) -> String {
    let s = format!("{v:.2}");
    if s == "-0.00" {
        "0.00".into()
    } else {
        s
    }
}

fn band(bands: &[(f64, String)], v: f64) -> &str {
    bands
        .iter()
        .rev()
        .find(|(t, _)| v >= *t)
        .map_or(bands[0].1.as_str(), |(_, w)| w.as_str())
}

fn fill(pattern: &str, vars: &HashMap<&str, String>) -> String {
    let mut out = String::with_capacity(pattern.len());
    let mut rest = pattern;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        match after.find('}') {
            Some(close) if vars.contains_key(&after[..close]) => {
                out.push_str(&vars[&after[..close]]);
                rest = &after[close + 1..];
            }
            _ => {
                out.push('{');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    out
}

fn ciu_vars(vars: &mut HashMap<&str, String>, t: &TextTemplate, r: &CiuResult) {
    vars.insert("concept", r.concept.clone());
    vars.insert("ci", number(r.ci));
    vars.insert("cu", number(r.cu));
    vars.insert("influence", number(r.influence));
    vars.insert("baseline", number(r.baseline));
    vars.insert("importance", band(&t.importance, r.ci).to_string());
    vars.insert("utility", band(&t.utility, r.cu).to_string());
    let direction = if r.influence > 0.0 {
        2
    } else if r.influence < 0.0 {
        0
    } else {
        1
    };
    vars.insert("direction", t.directions[direction].clone());
}

fn attribution_vars(vars: &mut HashMap<&str, String>, a: &Attribution) {
    vars.insert("concept", a.name.clone());
    vars.insert("value", number(a.value));
    vars.insert(
        "stderr",
        a.stderr.map_or_else(String::new, |se| format!(" ± {}", number(se))),
    );
}

fn record_line(t: &TextTemplate, method: Method, record: &Record, vars: &mut HashMap<&str, String>) -> String {
    match record {
        Record::Ciu(r) => {
            ciu_vars(vars, t, r);
            let pattern = if r.degenerate && r.ci == 0.0 {
                &t.flat_line
            } else if method == Method::Influence {
                &t.influence_line
            } else {
                &t.ciu_line
            };
            fill(pattern, vars)
        }
        Record::Attribution(a) => {
            attribution_vars(vars, a);
            fill(&t.attribution_line, vars)
        }
    }
}

/// One line per record, then a section per drilldown.
pub fn render_text(doc: &ExplanationDocument, template: &TextTemplate) -> String {
    let mut vars: HashMap<&str, String> = HashMap::new();
    let instance = if doc.instance.is_empty() {
        doc.instance_id.clone()
    } else {
        let values: Vec<String> = doc.instance.iter().map(|f| format!("{}={}", f.name, f.value)).collect();
        format!("{} ({})", doc.instance_id, values.join(", "))
    };
    vars.insert("instance", instance);
    vars.insert("model", doc.model_id.clone());
    vars.insert("output", doc.output.name.clone());
    vars.insert("prediction", number(doc.prediction));
    vars.insert("method", doc.method.as_str().to_string());
    vars.insert("baseline", number(doc.baseline));

    let mut out = fill(&template.header, &vars);
    out.push('\n');
    for record in &doc.records {
        out.push_str(&record_line(template, doc.method, record, &mut vars));
        out.push('\n');
    }
    for d in &doc.drilldowns {
        vars.insert("parent", d.concept.clone());
        out.push('\n');
        out.push_str(&fill(&template.drilldown_header, &vars));
        out.push('\n');
        for record in &d.records {
            out.push_str(&record_line(template, doc.method, record, &mut vars));
            out.push('\n');
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::report::tests::linear_document;

    #[test]
    fn bundled_template_parses() {
        let t = TextTemplate::default();
        assert_eq!(t.version, 1);
        assert_eq!(band(&t.importance, 0.0), "not important");
        assert_eq!(band(&t.importance, 0.7), "very important");
        assert_eq!(band(&t.utility, 1.0), "very good");
    }

    #[test]
    fn one_line_per_record() {
        let doc = linear_document();
        let text = render_text(&doc, &TextTemplate::default());
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[0].contains("y = 0.72"), "{}", lines[0]);
        assert_eq!(lines[1], "  x2 is very important (CI 0.70) and its value is very good (CU 0.90).");
        assert_eq!(lines[2], "  x1 is important (CI 0.30) and its value is bad (CU 0.30).");
        assert_eq!(text, render_text(&doc, &TextTemplate::default()));
    }

    #[test]
    fn drilldowns_get_sections() {
        let mut doc = linear_document();
        let inner: Vec<CiuResult> = doc
            .records
            .iter()
            .filter_map(|r| match r {
                Record::Ciu(c) => Some(c.clone()),
                _ => None,
            })
            .collect();
        doc.push_drilldown("BOTH", inner);
        let text = render_text(&doc, &TextTemplate::default());
        assert!(text.contains("\nDetails of BOTH:\n"));
        assert_eq!(text.lines().count(), 7);
    }

    #[test]
    fn unknown_placeholders_are_kept() {
        let vars = HashMap::from([("a", "1".to_string())]);
        assert_eq!(fill("{a} {b} {", &vars), "1 {b} {");
    }

    #[test]
    fn broken_templates_are_rejected() {
        let broken = TEXT_TEMPLATE_V1.replace("importance_thresholds = [0, 10, 25, 50, 75]", "importance_thresholds = [0, 10]");
        assert!(TextTemplate::parse(&broken).is_err());
        let missing = TEXT_TEMPLATE_V1.replace("header =", "heading =");
        assert!(TextTemplate::parse(&missing).is_err());
    }
}
