//! The two bundled experiments, end to end: train a forest, explain one
//! instance at several abstraction levels, and render every explanation.

use thiserror::Error;

use crate::ciu::{drilldown, explain_instance, CiuConfig, CiuError};
use crate::data::{DataError, Dataset, Instance};
use crate::fixtures;
use crate::model::{train_random_forest, ForestParams, ModelError, Predictor, RandomForest, SplitSpec};
use crate::report::{render_barplot, render_text, ExplanationDocument, Method, OutputRef, TextTemplate};
use crate::sampling::SamplerConfig;
use crate::shapley::{group_attribution, monte_carlo_shapley, Attribution, BackgroundSet, ShapleyError};
use crate::vocabulary::{LevelSelector, Vocabulary, VocabularyError};

#[derive(Debug, Error)]
pub enum DemoError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Vocabulary(#[from] VocabularyError),
    #[error(transparent)]
    Ciu(#[from] CiuError),
    #[error(transparent)]
    Shapley(#[from] ShapleyError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct DemoConfig {
    /// Seeds the split, the forest, the sampler and the Shapley permutations.
    pub seed: u64,
    pub forest: ForestParams,
    pub sampler: SamplerConfig,
    pub baseline: f64,
    pub permutations: usize,
}

impl Default for DemoConfig {
    fn default() -> Self {
        DemoConfig {
            seed: 42,
            forest: ForestParams::default(),
            sampler: SamplerConfig::default(),
            baseline: 0.5,
            permutations: 1000,
        }
    }
}

impl DemoConfig {
    fn forest(&self) -> ForestParams {
        ForestParams {
            seed: self.seed,
            ..self.forest.clone()
        }
    }

    fn ciu(&self) -> CiuConfig {
        CiuConfig {
            sampler: self.sampler.with_seed(self.seed),
            baseline: self.baseline,
            utility: None,
        }
    }
}

/// Documents and rendered files produced by a demo.
#[derive(Clone, Debug)]
pub struct DemoOutput {
    pub documents: Vec<(String, ExplanationDocument)>,
    /// `(file name, contents)`, sorted by name.
    pub files: Vec<(String, String)>,
    pub summary: String,
}

impl DemoOutput {
    pub fn document(&self, name: &str) -> Option<&ExplanationDocument> {
        self.documents.iter().find(|(n, _)| n == name).map(|(_, d)| d)
    }
}

fn finish(documents: Vec<(String, ExplanationDocument)>, summary: String) -> DemoOutput {
    let template = TextTemplate::default();
    let mut files = vec![("summary.txt".to_string(), summary.clone())];
    for (name, doc) in &documents {
        let plot = render_barplot(doc);
        files.push((format!("{name}.json"), doc.to_json()));
        files.push((format!("{name}.txt"), render_text(doc, &template)));
        files.push((format!("{name}.svg"), plot.svg.clone()));
        files.push((format!("{name}.bars.json"), plot.data_json()));
    }
    files.sort();
    DemoOutput {
        documents,
        files,
        summary,
    }
}

struct Subject<'a> {
    model: &'a RandomForest,
    model_id: String,
    data: &'a Dataset,
    instance_id: &'a str,
    x: &'a Instance,
    output: usize,
}

impl Subject<'_> {
    fn document(&self, method: Method, baseline: f64) -> ExplanationDocument {
        ExplanationDocument::new(
            self.instance_id,
            self.model_id.clone(),
            OutputRef {
                index: self.output,
                name: self.model.class_names()[self.output].clone(),
            },
            method,
            baseline,
            self.model.predict_values(self.x.values())[self.output],
        )
        .with_instance(self.x.describe(&self.data.schema))
    }

    fn shapley(
        &self,
        background: &BackgroundSet,
        vocabulary: &Vocabulary,
        config: &DemoConfig,
    ) -> Result<(ExplanationDocument, ExplanationDocument), DemoError> {
        let mc = monte_carlo_shapley(self.model, self.x, background, config.permutations, config.seed, self.output)?;
        let expected = background
            .rows()
            .iter()
            .map(|r| self.model.predict_values(r)[self.output])
            .sum::<f64>()
            / background.len() as f64;
        let schema = &self.data.schema;
        let features: Vec<Attribution> = group_attribution(&mc.values, Some(&mc.stderr), &[], schema)?;
        let groups = vocabulary.select(LevelSelector::Top, schema)?;
        let concepts = group_attribution(&mc.values, Some(&mc.stderr), &groups, schema)?;
        Ok((
            self.document(Method::Shapley, expected).with_attributions(features).with_level("features"),
            self.document(Method::Shapley, expected).with_attributions(concepts),
        ))
    }
}

/// Titanic: forest on a 75/25 split, 'Johnny D' explained for survival.
pub fn titanic(config: &DemoConfig) -> Result<DemoOutput, DemoError> {
    let data = fixtures::titanic();
    let split = SplitSpec {
        seed: config.seed,
        ..SplitSpec::default()
    };
    let report = train_random_forest(&data, &config.forest(), split)?;
    let x = fixtures::johnny_d(&data.schema)?;
    let vocabulary = Vocabulary::parse(fixtures::TITANIC_VOCABULARY, data.schema.len())?;
    let survived = report
        .forest
        .class_names()
        .iter()
        .position(|c| c == "yes")
        .expect("Titanic classes are no/yes");
    let subject = Subject {
        model: &report.forest,
        model_id: format!("titanic-rf-seed{}", config.seed),
        data: &data,
        instance_id: "johnny_d",
        x: &x,
        output: survived,
    };
    let ciu = config.ciu();

    let top = explain_instance(&report.forest, &x, &vocabulary, LevelSelector::Top, survived, &ciu)?;
    let mut concepts = subject.document(Method::Ciu, ciu.baseline).with_ciu(top.clone());
    for name in ["WEALTH", "FAMILY"] {
        concepts.push_drilldown(name, drilldown(&report.forest, &x, &vocabulary, name, survived, &ciu)?);
    }
    let singles = Vocabulary::singletons(&data.schema);
    let per_feature = explain_instance(&report.forest, &x, &singles, LevelSelector::Top, survived, &ciu)?;
    let features = subject
        .document(Method::Ciu, ciu.baseline)
        .with_ciu(per_feature.clone())
        .with_level("features");
    let influence = subject.document(Method::Influence, ciu.baseline).with_ciu(top);
    let feature_influence = subject
        .document(Method::Influence, ciu.baseline)
        .with_ciu(per_feature)
        .with_level("features");

    let background = BackgroundSet::from_dataset(&data.subset(&report.train_indices))?;
    let (shapley_features, shapley_concepts) = subject.shapley(&background, &vocabulary, config)?;

    let probability = report.forest.predict_values(x.values())[survived];
    let summary = format!(
        "titanic\nrows: {}\ntrain/test: {}/{}\ntest accuracy: {:.4}\ninstance: johnny_d\nP(survived = yes): {:.4}\nseed: {}\n",
        data.len(),
        report.train_indices.len(),
        report.test_indices.len(),
        report.test_accuracy.unwrap_or(f64::NAN),
        probability,
        config.seed,
    );
    Ok(finish(
        vec![
            ("titanic-ciu".into(), concepts),
            ("titanic-features".into(), features),
            ("titanic-influence".into(), influence),
            ("titanic-influence-features".into(), feature_influence),
            ("titanic-shapley".into(), shapley_concepts),
            ("titanic-shapley-features".into(), shapley_features),
        ],
        summary,
    ))
}

/// Cars: forest on every row, car #1098 explained for its predicted class.
/// A separate 75/25 fit is scored for the summary.
pub fn cars(config: &DemoConfig) -> Result<DemoOutput, DemoError> {
    let data = fixtures::cars();
    let forest = RandomForest::fit(&data, &config.forest())?;
    let holdout = train_random_forest(
        &data,
        &config.forest(),
        SplitSpec {
            seed: config.seed,
            ..SplitSpec::default()
        },
    )?;
    let x = data.instances[fixtures::CAR_INSTANCE_ROW - 1].clone();
    let vocabulary = Vocabulary::parse(fixtures::CARS_VOCABULARY, data.schema.len())?;
    let predicted = forest.classify(x.values());
    let subject = Subject {
        model: &forest,
        model_id: format!("cars-rf-seed{}", config.seed),
        data: &data,
        instance_id: "car1098",
        x: &x,
        output: predicted,
    };
    let ciu = config.ciu();

    let top = explain_instance(&forest, &x, &vocabulary, LevelSelector::Top, predicted, &ciu)?;
    let mut concepts = subject.document(Method::Ciu, ciu.baseline).with_ciu(top);
    for name in ["PRICE", "TECH", "COMFORT"] {
        concepts.push_drilldown(name, drilldown(&forest, &x, &vocabulary, name, predicted, &ciu)?);
    }
    let middle = explain_instance(&forest, &x, &vocabulary, LevelSelector::Level(1), predicted, &ciu)?;
    let middle = subject.document(Method::Ciu, ciu.baseline).with_ciu(middle).with_level("1");
    let singles = Vocabulary::singletons(&data.schema);
    let per_feature = explain_instance(&forest, &x, &singles, LevelSelector::Top, predicted, &ciu)?;
    let features = subject
        .document(Method::Ciu, ciu.baseline)
        .with_ciu(per_feature)
        .with_level("features");

    let probabilities: Vec<String> = forest
        .class_names()
        .iter()
        .zip(forest.predict_values(x.values()))
        .map(|(c, p)| format!("{c}={p:.4}"))
        .collect();
    let summary = format!(
        "cars\nrows: {}\ntraining accuracy (all rows): {:.4}\n75/25 test accuracy: {:.4}\ninstance: car1098 (row {})\npredicted class: {}\nprobabilities: {}\nseed: {}\n",
        data.len(),
        forest.accuracy(&data),
        holdout.test_accuracy.unwrap_or(f64::NAN),
        fixtures::CAR_INSTANCE_ROW,
        forest.class_names()[predicted],
        probabilities.join(" "),
        config.seed,
    );
    Ok(finish(
        vec![
            ("cars-ciu".into(), concepts),
            ("cars-features".into(), features),
            ("cars-level1".into(), middle),
        ],
        summary,
    ))
}
