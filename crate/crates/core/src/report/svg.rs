use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{ExplanationDocument, Method, Record};

const LABEL_WIDTH: f64 = 170.0;
const BAR_WIDTH: f64 = 400.0;
const RIGHT_MARGIN: f64 = 130.0;
const ROW_HEIGHT: f64 = 26.0;
const BAR_HEIGHT: f64 = 18.0;
const TITLE_HEIGHT: f64 = 34.0;
const AXIS_HEIGHT: f64 = 34.0;

const CIU_COLOUR: &str = "#3b6ea5";
const POSITIVE_COLOUR: &str = "#2e8b57";
const NEGATIVE_COLOUR: &str = "#c0392b";

/// Geometry of one bar, in pixels from the left edge of the bar area.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bar {
    pub label: String,
    /// CI and CU for CIU bars.
    pub ci: Option<f64>,
    pub cu: Option<f64>,
    /// Signed value for influence and Shapley bars.
    pub value: Option<f64>,
    pub x: f64,
    pub width: f64,
    /// Width of the solid CI·CU bar inside a CIU bar.
    pub inner_width: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Section {
    pub title: String,
    pub bars: Vec<Bar>,
}

/// The numbers behind the SVG.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BarPlotData {
    pub method: Method,
    pub title: String,
    /// Values at the left and right ends of the bar area.
    pub axis: [f64; 2],
    pub bar_area_width: f64,
    pub sections: Vec<Section>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BarPlot {
    pub svg: String,
    pub data: BarPlotData,
}

impl BarPlot {
    pub fn data_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.data).expect("plot data serializes");
        s.push('\n');
        s
    }
}

/// Pixels with three decimals, the precision written to the SVG.
fn px(v: f64) -> f64 {
    let r = (v * 1000.0).round() / 1000.0;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

fn num(v: f64) -> String {
    format!("{:.3}", px(v))
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

fn signed_value(method: Method, record: &Record) -> f64 {
    match record {
        Record::Ciu(r) if method == Method::Influence => r.influence,
        Record::Ciu(r) => r.ci,
        Record::Attribution(a) => a.value,
    }
}

fn half_range(doc: &ExplanationDocument) -> f64 {
    match doc.method {
        // |φ| never exceeds max(φ0, 1 - φ0).
        Method::Influence => doc.baseline.max(1.0 - doc.baseline),
        _ => {
            let all = doc.records.iter().chain(doc.drilldowns.iter().flat_map(|d| &d.records));
            let m = all.map(|r| signed_value(doc.method, r).abs()).fold(0.0, f64::max);
            if m > 0.0 {
                m
            } else {
                1.0
            }
        }
    }
}

fn bar(doc: &ExplanationDocument, record: &Record, half: f64) -> Bar {
    match (doc.method, record) {
        (Method::Ciu, Record::Ciu(r)) => Bar {
            label: r.concept.clone(),
            ci: Some(r.ci),
            cu: Some(r.cu),
            value: None,
            x: 0.0,
            width: px(r.ci * BAR_WIDTH),
            inner_width: Some(px(r.ci * r.cu * BAR_WIDTH)),
        },
        _ => {
            let v = signed_value(doc.method, record);
            let centre = BAR_WIDTH / 2.0;
            let len = v.abs() / half * centre;
            let (ci, cu) = match record {
                Record::Ciu(r) => (Some(r.ci), Some(r.cu)),
                Record::Attribution(_) => (None, None),
            };
            Bar {
                label: record.name().to_string(),
                ci,
                cu,
                value: Some(v),
                x: px(if v < 0.0 { centre - len } else { centre }),
                width: px(len),
                inner_width: None,
            }
        }
    }
}

fn title(doc: &ExplanationDocument) -> String {
    let what = match doc.method {
        Method::Ciu => "CIU",
        Method::Influence => "Contextual influence",
        Method::Shapley => "Shapley values",
    };
    format!(
        "{what}: {} = {:.3} ({})",
        doc.output.name, doc.prediction, doc.instance_id
    )
}

/// Horizontal bar plot of the document: CI with CU inside it for CIU
/// documents, signed bars around a zero line otherwise.
pub fn render_barplot(doc: &ExplanationDocument) -> BarPlot {
    let half = half_range(doc);
    let mut sections = vec![Section {
        title: String::new(),
        bars: doc.records.iter().map(|r| bar(doc, r, half)).collect(),
    }];
    for d in &doc.drilldowns {
        sections.push(Section {
            title: d.concept.clone(),
            bars: d.records.iter().map(|r| bar(doc, r, half)).collect(),
        });
    }
    let axis = match doc.method {
        Method::Ciu => [0.0, 1.0],
        _ => [-half, half],
    };
    let data = BarPlotData {
        method: doc.method,
        title: title(doc),
        axis,
        bar_area_width: BAR_WIDTH,
        sections,
    };
    BarPlot {
        svg: draw(&data),
        data,
    }
}

fn draw(data: &BarPlotData) -> String {
    let rows: usize = data
        .sections
        .iter()
        .map(|s| s.bars.len() + usize::from(!s.title.is_empty()))
        .sum();
    let width = LABEL_WIDTH + BAR_WIDTH + RIGHT_MARGIN;
    let plot_bottom = TITLE_HEIGHT + rows as f64 * ROW_HEIGHT;
    let height = plot_bottom + AXIS_HEIGHT;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" viewBox="0 0 {} {}" font-family="Helvetica, Arial, sans-serif" font-size="12">"#,
        num(width),
        num(height),
        num(width),
        num(height)
    );
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{}" height="{}" style="fill:#ffffff"/>"#, num(width), num(height));
    let _ = writeln!(
        s,
        r#"<text x="{}" y="20" style="font-size:14px;font-weight:bold">{}</text>"#,
        num(LABEL_WIDTH),
        escape(&data.title)
    );

    let mut row = 0usize;
    for section in &data.sections {
        if !section.title.is_empty() {
            let y = TITLE_HEIGHT + row as f64 * ROW_HEIGHT + BAR_HEIGHT * 0.75;
            let _ = writeln!(
                s,
                r#"<text x="8" y="{}" style="font-weight:bold">{}</text>"#,
                num(y),
                escape(&section.title)
            );
            row += 1;
        }
        for b in &section.bars {
            let top = TITLE_HEIGHT + row as f64 * ROW_HEIGHT + (ROW_HEIGHT - BAR_HEIGHT) / 2.0;
            let text_y = num(top + BAR_HEIGHT * 0.75);
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
                num(LABEL_WIDTH - 8.0),
                text_y,
                escape(&b.label)
            );
            let x = LABEL_WIDTH + b.x;
            match (b.inner_width, b.ci, b.cu) {
                (Some(inner), Some(ci), Some(cu)) => {
                    let _ = writeln!(
                        s,
                        r#"<rect class="outer" x="{}" y="{}" width="{}" height="{}" style="fill:{CIU_COLOUR};fill-opacity:0.2;stroke:{CIU_COLOUR};stroke-width:1"/>"#,
                        num(x),
                        num(top),
                        num(b.width),
                        num(BAR_HEIGHT)
                    );
                    let _ = writeln!(
                        s,
                        r#"<rect class="inner" x="{}" y="{}" width="{}" height="{}" style="fill:{CIU_COLOUR}"/>"#,
                        num(x),
                        num(top),
                        num(inner),
                        num(BAR_HEIGHT)
                    );
                    let _ = writeln!(
                        s,
                        r#"<text x="{}" y="{}">CI {:.2} CU {:.2}</text>"#,
                        num(LABEL_WIDTH + b.width + 6.0),
                        text_y,
                        ci,
                        cu
                    );
                }
                _ => {
                    let v = b.value.unwrap_or(0.0);
                    let colour = if v < 0.0 { NEGATIVE_COLOUR } else { POSITIVE_COLOUR };
                    let _ = writeln!(
                        s,
                        r#"<rect class="signed" x="{}" y="{}" width="{}" height="{}" style="fill:{colour}"/>"#,
                        num(x),
                        num(top),
                        num(b.width),
                        num(BAR_HEIGHT)
                    );
                    let _ = writeln!(
                        s,
                        r#"<text x="{}" y="{}">{}</text>"#,
                        num(LABEL_WIDTH + BAR_WIDTH + 6.0),
                        text_y,
                        num(v)
                    );
                }
            }
            row += 1;
        }
    }

    if data.method != Method::Ciu {
        let zero = num(LABEL_WIDTH + BAR_WIDTH / 2.0);
        let _ = writeln!(
            s,
            r#"<line x1="{zero}" y1="{}" x2="{zero}" y2="{}" style="stroke:#333333;stroke-width:1"/>"#,
            num(TITLE_HEIGHT),
            num(plot_bottom)
        );
    }
    let _ = writeln!(
        s,
        r#"<line x1="{}" y1="{}" x2="{}" y2="{}" style="stroke:#333333;stroke-width:1"/>"#,
        num(LABEL_WIDTH),
        num(plot_bottom),
        num(LABEL_WIDTH + BAR_WIDTH),
        num(plot_bottom)
    );
    for k in 0..=4 {
        let t = k as f64 / 4.0;
        let tx = num(LABEL_WIDTH + t * BAR_WIDTH);
        let value = data.axis[0] + t * (data.axis[1] - data.axis[0]);
        let _ = writeln!(
            s,
            r#"<line x1="{tx}" y1="{}" x2="{tx}" y2="{}" style="stroke:#333333;stroke-width:1"/>"#,
            num(plot_bottom),
            num(plot_bottom + 4.0)
        );
        let _ = writeln!(
            s,
            r#"<text x="{tx}" y="{}" text-anchor="middle">{:.2}</text>"#,
            num(plot_bottom + 18.0),
            px(value)
        );
    }
    s.push_str("</svg>\n");
    s
}
