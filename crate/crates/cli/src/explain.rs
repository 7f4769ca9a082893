use std::fs;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};

use ciu_core::ciu::{self, CiuConfig, UtilityMap};
use ciu_core::data::Instance;
use ciu_core::demo::{DemoConfig, DemoError, DemoOutput};
use ciu_core::model::{train_random_forest, ForestParams, RandomForest, SavedModel, SplitSpec};
use ciu_core::report::{render_barplot, render_text, ExplanationDocument, Method, OutputRef, TextTemplate};
use ciu_core::sampling::SamplerConfig;
use ciu_core::shapley::{exact_model_shapley, group_attribution, monte_carlo_shapley, BackgroundSet};
use ciu_core::vocabulary::LevelSelector;

use crate::{resolve, DemoArgs, DrilldownArgs, Emit, ExplainArgs, ModelInput, RenderOptions, ShapleyArgs, TrainArgs};

pub fn train(a: TrainArgs) -> Result<()> {
    let data = resolve::dataset(&a.data, a.target.as_deref())?;
    if !data.is_labelled() {
        bail!("`{}` has no label column; pass --target", a.data);
    }
    let params = ForestParams {
        n_trees: a.trees,
        max_depth: a.max_depth,
        min_leaf: a.min_leaf,
        max_features: a.mtry,
        seed: a.seed,
    };
    let forest = if a.all_rows {
        let forest = RandomForest::fit(&data, &params)?;
        println!("rows: {}", data.len());
        println!("training accuracy: {:.4}", forest.accuracy(&data));
        forest
    } else {
        let report = train_random_forest(
            &data,
            &params,
            SplitSpec {
                train_fraction: a.train_fraction,
                seed: a.seed,
            },
        )?;
        println!("train/test: {}/{}", report.train_indices.len(), report.test_indices.len());
        match report.test_accuracy {
            Some(acc) => println!("test accuracy: {acc:.4}"),
            None => println!("test accuracy: n/a"),
        }
        report.forest
    };
    SavedModel::RandomForest(forest).save(&a.out)?;
    println!("model: {}", a.out.display());
    Ok(())
}

struct Loaded {
    model: SavedModel,
    model_id: String,
    x: Instance,
    output: usize,
}

fn load(input: &ModelInput) -> Result<Loaded> {
    let model = resolve::model(&input.model)?;
    let target = resolve::target_of(&model).map(str::to_string);
    let schema = model.predictor().schema().clone();
    let x = resolve::instance(&input.instance, &schema, input.data.as_deref(), target.as_deref())?;
    let output = resolve::output(input.class.as_deref(), &model, &x)?;
    let model_id = input
        .model
        .file_stem()
        .map_or_else(|| "model".to_string(), |s| s.to_string_lossy().into_owned());
    Ok(Loaded {
        model,
        model_id,
        x,
        output,
    })
}

impl Loaded {
    fn document(&self, instance_id: &str, method: Method, baseline: f64) -> ExplanationDocument {
        let p = self.model.predictor();
        ExplanationDocument::new(
            instance_id,
            self.model_id.clone(),
            OutputRef {
                index: self.output,
                name: p.output_names()[self.output].clone(),
            },
            method,
            baseline,
            p.predict_values(self.x.values())[self.output],
        )
        .with_instance(self.x.describe(p.schema()))
    }
}

fn ciu_config(o: &crate::CiuOptions) -> Result<CiuConfig> {
    let utility = match &o.utility {
        None => None,
        Some(spec) => {
            let (a, b) = spec
                .split_once(',')
                .ok_or_else(|| anyhow!("--utility expects `a,b`, got `{spec}`"))?;
            let parse = |v: &str| v.trim().parse::<f64>().map_err(|_| anyhow!("--utility expects numbers, got `{spec}`"));
            Some(UtilityMap::new(parse(a)?, parse(b)?)?)
        }
    };
    Ok(CiuConfig {
        sampler: SamplerConfig::default().with_budget(o.budget).with_seed(o.seed),
        baseline: o.baseline,
        utility,
    })
}

fn method(influence: bool) -> Method {
    if influence {
        Method::Influence
    } else {
        Method::Ciu
    }
}

fn emit(doc: &ExplanationDocument, r: &RenderOptions) -> Result<()> {
    let text = || render_text(doc, &TextTemplate::default());
    let plot = render_barplot(doc);
    if let Some(dir) = &r.out {
        fs::create_dir_all(dir).with_context(|| format!("cannot create `{}`", dir.display()))?;
        let files = [
            (format!("{}.json", r.name), doc.to_json()),
            (format!("{}.txt", r.name), text()),
            (format!("{}.svg", r.name), plot.svg.clone()),
            (format!("{}.bars.json", r.name), plot.data_json()),
        ];
        write_files(dir, &files)?;
    }
    match r.emit {
        Emit::Text => print!("{}", text()),
        Emit::Json => print!("{}", doc.to_json()),
        Emit::Svg => print!("{}", plot.svg),
        Emit::Bars => print!("{}", plot.data_json()),
        Emit::None => {}
    }
    Ok(())
}

fn write_files(dir: &Path, files: &[(String, String)]) -> Result<()> {
    for (name, contents) in files {
        let path = dir.join(name);
        fs::write(&path, contents).with_context(|| format!("cannot write `{}`", path.display()))?;
    }
    Ok(())
}

pub fn explain(a: ExplainArgs) -> Result<()> {
    let l = load(&a.input)?;
    let p = l.model.predictor();
    let config = ciu_config(&a.ciu)?;
    let level = resolve::level(&a.level)?;
    let vocabulary = if a.level == "features" {
        resolve::vocabulary(None, p.schema())?
    } else {
        resolve::vocabulary(a.ciu.voc.as_deref(), p.schema())?
    };
    let selector = if a.level == "features" { LevelSelector::Top } else { level };
    let results = ciu::explain_instance(p, &l.x, &vocabulary, selector, l.output, &config)?;
    let doc = l
        .document(&a.input.instance, method(a.influence), config.baseline)
        .with_ciu(results)
        .with_level(a.level.clone());
    emit(&doc, &a.render)
}

pub fn drilldown(a: DrilldownArgs) -> Result<()> {
    let l = load(&a.input)?;
    let p = l.model.predictor();
    let config = ciu_config(&a.ciu)?;
    let vocabulary = resolve::vocabulary(a.ciu.voc.as_deref(), p.schema())?;
    let top = ciu::explain_instance(p, &l.x, &vocabulary, LevelSelector::Top, l.output, &config)?;
    let mut doc = l
        .document(&a.input.instance, method(a.influence), config.baseline)
        .with_ciu(top);
    for concept in &a.concepts {
        doc.push_drilldown(concept.clone(), ciu::drilldown(p, &l.x, &vocabulary, concept, l.output, &config)?);
    }
    emit(&doc, &a.render)
}

pub fn shapley(a: ShapleyArgs) -> Result<()> {
    let l = load(&a.input)?;
    let p = l.model.predictor();
    let schema = p.schema();
    let target = resolve::target_of(&l.model);
    let rows = resolve::rows_for(&a.background, schema, target)?;
    let background = BackgroundSet::new(schema, rows.into_iter().map(|r| r.values().to_vec()).collect())?;
    let (values, stderr, expected) = if a.exact {
        let afa = exact_model_shapley(p, &l.x, &background, l.output)?;
        (afa.attributions, None, afa.baseline)
    } else {
        let mc = monte_carlo_shapley(p, &l.x, &background, a.permutations, a.seed, l.output)?;
        let expected = background
            .rows()
            .iter()
            .map(|r| p.predict_values(r)[l.output])
            .sum::<f64>()
            / background.len() as f64;
        (mc.values, Some(mc.stderr), expected)
    };
    let groups = match &a.voc {
        Some(spec) => resolve::vocabulary(Some(spec), schema)?.select(LevelSelector::Top, schema)?,
        None => Vec::new(),
    };
    let attributions = group_attribution(&values, stderr.as_deref(), &groups, schema)?;
    let level = if a.voc.is_some() { "top" } else { "features" };
    let doc = l
        .document(&a.input.instance, Method::Shapley, expected)
        .with_attributions(attributions)
        .with_level(level);
    emit(&doc, &a.render)
}

pub fn demo(a: DemoArgs, default_dir: &str, run: fn(&DemoConfig) -> Result<DemoOutput, DemoError>) -> Result<()> {
    let config = DemoConfig {
        seed: a.seed,
        sampler: SamplerConfig::default().with_budget(a.budget),
        permutations: a.permutations,
        ..DemoConfig::default()
    };
    let out = run(&config)?;
    let dir = a.out.unwrap_or_else(|| default_dir.into());
    fs::create_dir_all(&dir).with_context(|| format!("cannot create `{}`", dir.display()))?;
    write_files(&dir, &out.files)?;
    print!("{}", out.summary);
    println!("wrote {} files to {}", out.files.len(), dir.display());
    Ok(())
}
