//! Turns command-line strings into models, datasets, instances and
//! vocabularies.

use std::env;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};

use ciu_core::data::{load_csv, Dataset, FeatureKind, FeatureSchema, Instance, SchemaHint};
use ciu_core::fixtures;
use ciu_core::model::SavedModel;
use ciu_core::vocabulary::{LevelSelector, Vocabulary};

pub const CONFIG_DIR_VAR: &str = "CIU_CONFIG_DIR";

/// `path` itself if it exists, else the same name under $CIU_CONFIG_DIR.
fn locate(path: &str) -> Option<PathBuf> {
    let direct = PathBuf::from(path);
    if direct.exists() {
        return Some(direct);
    }
    let dir = env::var_os(CONFIG_DIR_VAR)?;
    let dir = Path::new(&dir);
    [path.to_string(), format!("{path}.voc")]
        .iter()
        .map(|name| dir.join(name))
        .find(|p| p.exists())
}

pub fn bundled(name: &str) -> Option<(Dataset, SchemaHint)> {
    match name {
        "titanic" => Some((fixtures::titanic(), fixtures::titanic_hint())),
        "cars" => Some((fixtures::cars(), fixtures::cars_hint())),
        _ => None,
    }
}

/// A CSV file, or a bundled dataset by name.
pub fn dataset(spec: &str, target: Option<&str>) -> Result<Dataset> {
    if !Path::new(spec).exists() {
        if let Some((data, hint)) = bundled(spec) {
            if target.is_some_and(|t| hint.label.as_deref() != Some(t)) {
                bail!("the bundled `{spec}` data is labelled by `{}`", hint.label.unwrap_or_default());
            }
            return Ok(data);
        }
    }
    let hint = SchemaHint {
        label: target.map(str::to_string),
        ..SchemaHint::default()
    };
    load_csv(spec, &hint).with_context(|| format!("cannot load dataset `{spec}`"))
}

/// Rows of `spec` re-encoded in `schema`, matched by column name.
pub fn rows_for(spec: &str, schema: &FeatureSchema, target: Option<&str>) -> Result<Vec<Instance>> {
    let data = if !Path::new(spec).exists() && bundled(spec).is_some() {
        bundled(spec).map(|(d, _)| d).unwrap()
    } else {
        let mut hint = SchemaHint {
            label: target.map(str::to_string),
            ..SchemaHint::default()
        };
        for f in schema.features() {
            if let FeatureKind::Categorical { levels } = &f.kind {
                hint = hint.with_levels(&f.name, levels.clone());
            }
        }
        load_csv(spec, &hint).with_context(|| format!("cannot load dataset `{spec}`"))?
    };
    if data.schema == *schema {
        return Ok(data.instances);
    }
    data.instances
        .iter()
        .enumerate()
        .map(|(k, row)| {
            let described = row.describe(&data.schema);
            let pairs: Vec<(&str, &str)> = described.iter().map(|(n, v)| (n.as_str(), v.as_str())).collect();
            Instance::from_pairs(schema, &pairs).with_context(|| format!("row {} of `{spec}` does not fit the model", k + 1))
        })
        .collect()
}

pub fn model(path: &Path) -> Result<SavedModel> {
    let found = locate(&path.to_string_lossy()).unwrap_or_else(|| path.to_path_buf());
    Ok(SavedModel::load(found)?)
}

pub fn target_of(model: &SavedModel) -> Option<&str> {
    match model {
        SavedModel::RandomForest(f) => f.target(),
        SavedModel::Linear(_) => None,
    }
}

pub fn instance(spec: &str, schema: &FeatureSchema, data: Option<&str>, target: Option<&str>) -> Result<Instance> {
    if let Some(found) = fixtures::named_instance(spec, schema) {
        return found.with_context(|| format!("instance `{spec}` does not fit the model"));
    }
    if let Some(row) = spec.strip_prefix("row:") {
        let n: usize = row.trim().parse().map_err(|_| anyhow!("`{spec}`: row numbers are 1-based integers"))?;
        let data = data.ok_or_else(|| anyhow!("`{spec}` needs --data"))?;
        let rows = rows_for(data, schema, target)?;
        let len = rows.len();
        return rows
            .into_iter()
            .nth(n.wrapping_sub(1))
            .ok_or_else(|| anyhow!("`{spec}`: the dataset has {len} rows"));
    }
    let cells: Vec<&str> = spec.split(',').map(str::trim).collect();
    if cells.iter().all(|c| c.contains('=')) {
        let pairs: Vec<(&str, &str)> = cells
            .iter()
            .map(|c| c.split_once('=').map(|(k, v)| (k.trim(), v.trim())).unwrap())
            .collect();
        return Ok(Instance::from_pairs(schema, &pairs)?);
    }
    Ok(Instance::from_strings(schema, &cells)?)
}

/// Class name, output index, or the label column name. The label name picks
/// the last class of a two-class model (e.g. `survived` → `yes`).
pub fn output(spec: Option<&str>, model: &SavedModel, x: &Instance) -> Result<usize> {
    let p = model.predictor();
    let names = p.output_names();
    let Some(spec) = spec else {
        let y = p.predict_values(x.values());
        return Ok((0..y.len()).fold(0, |best, j| if y[j] > y[best] { j } else { best }));
    };
    if let Some(j) = names.iter().position(|n| n == spec) {
        return Ok(j);
    }
    if let Ok(j) = spec.parse::<usize>() {
        if j < names.len() {
            return Ok(j);
        }
        bail!("output index {j} is out of range; the model has {} outputs", names.len());
    }
    if target_of(model) == Some(spec) {
        if names.len() == 2 {
            return Ok(1);
        }
        bail!("`{spec}` has {} classes; name one of: {}", names.len(), names.join(", "));
    }
    bail!("unknown class `{spec}`; expected one of: {}", names.join(", "))
}

pub fn vocabulary(spec: Option<&str>, schema: &FeatureSchema) -> Result<Vocabulary> {
    let Some(spec) = spec else {
        return Ok(Vocabulary::singletons(schema));
    };
    if let Some(path) = locate(spec) {
        return Vocabulary::load(&path, schema.len()).with_context(|| format!("in vocabulary `{}`", path.display()));
    }
    let text = match spec.trim_end_matches(".voc") {
        "titanic" => fixtures::TITANIC_VOCABULARY,
        "cars" => fixtures::CARS_VOCABULARY,
        _ => bail!("vocabulary `{spec}` not found (also looked in ${CONFIG_DIR_VAR})"),
    };
    Vocabulary::parse(text, schema.len()).with_context(|| format!("in bundled vocabulary `{spec}`"))
}

/// `top`, a level number, or `features`.
pub fn level(spec: &str) -> Result<LevelSelector> {
    match spec {
        "top" => Ok(LevelSelector::Top),
        "features" => Ok(LevelSelector::Level(0)),
        _ => spec
            .parse()
            .map(LevelSelector::Level)
            .map_err(|_| anyhow!("level must be `top`, `features` or a number, not `{spec}`")),
    }
}
