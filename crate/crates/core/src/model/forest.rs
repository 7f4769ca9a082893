use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ModelError, Predictor, Task};
use crate::data::{Dataset, FeatureKind, FeatureSchema};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Features tried per split; `None` means `floor(sqrt(p))`.
    pub max_features: Option<usize>,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 500,
            max_depth: 12,
            min_leaf: 2,
            max_features: None,
            seed: 42,
        }
    }
}

impl ForestParams {
    fn features_per_split(&self, p: usize) -> usize {
        self.max_features
            .unwrap_or_else(|| (p as f64).sqrt().floor() as usize)
            .clamp(1, p.max(1))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train_fraction: 0.75,
            seed: 42,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
enum Node {
    Leaf(u32),
    /// feature, threshold, left child, right child; `x <= threshold` goes left.
    Split(u32, f64, u32, u32),
    /// feature, bit set of levels sent left, left child, right child.
    Levels(u32, u64, u32, u32),
}

#[derive(Clone, Copy)]
enum Rule {
    Threshold(f64),
    Levels(u64),
}

impl Rule {
    fn goes_left(self, v: f64) -> bool {
        match self {
            Rule::Threshold(t) => v <= t,
            Rule::Levels(mask) => mask >> (v as u64) & 1 == 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    fn predict(&self, x: &[f64]) -> usize {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf(class) => return class as usize,
                Node::Split(f, t, l, r) => {
                    at = if x[f as usize] <= t { l as usize } else { r as usize };
                }
                Node::Levels(f, mask, l, r) => {
                    at = if Rule::Levels(mask).goes_left(x[f as usize]) { l as usize } else { r as usize };
                }
            }
        }
    }
}

/// Bagged CART classifiers with Gini splits. Class probabilities are the
/// fraction of trees voting for each class.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    schema: FeatureSchema,
    class_names: Vec<String>,
    /// Label column the classes come from.
    #[serde(default)]
    target: Option<String>,
    params: ForestParams,
    trees: Vec<Tree>,
}

struct Builder<'a> {
    x: &'a [&'a [f64]],
    y: &'a [usize],
    n_classes: usize,
    /// Level count of each categorical feature small enough for subset splits.
    levels: &'a [Option<usize>],
    params: &'a ForestParams,
    mtry: usize,
    nodes: Vec<Node>,
}

/// Largest level count split by level subsets; larger ones split on the code.
const MAX_SUBSET_LEVELS: usize = 64;

fn majority(counts: &[usize]) -> usize {
    // Ties go to the lowest class index.
    counts
        .iter()
        .enumerate()
        .fold((0, 0), |best, (c, &n)| if n > best.1 { (c, n) } else { best })
        .0
}

fn purity_score(counts: &[usize], n: usize) -> f64 {
    // Σ c² / n; maximizing the sum over both sides minimizes weighted Gini.
    counts.iter().map(|&c| (c * c) as f64).sum::<f64>() / n as f64
}

impl Builder<'_> {
    fn grow(&mut self, samples: &mut [usize], depth: usize, rng: &mut ChaCha8Rng) -> u32 {
        let id = self.nodes.len() as u32;
        self.nodes.push(Node::Leaf(0));

        let mut counts = vec![0usize; self.n_classes];
        for &s in samples.iter() {
            counts[self.y[s]] += 1;
        }
        let n = samples.len();
        let leaf = Node::Leaf(majority(&counts) as u32);
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        if pure || depth >= self.params.max_depth || n < 2 * self.params.min_leaf {
            self.nodes[id as usize] = leaf;
            return id;
        }

        let parent = purity_score(&counts, n);
        let p = self.x[0].len();
        let target = majority(&counts);
        let mut best: Option<(f64, usize, Rule)> = None;
        let mut column: Vec<(f64, usize)> = Vec::with_capacity(n);
        for f in index::sample(rng, p, self.mtry).into_iter() {
            column.clear();
            // Levels are ranked by the share of the node's majority class,
            // then scanned like an ordered feature.
            let ranking = self.levels[f].map(|n_levels| {
                let mut per_level = vec![vec![0usize; self.n_classes]; n_levels];
                for &s in samples.iter() {
                    per_level[self.x[s][f] as usize][self.y[s]] += 1;
                }
                let share: Vec<f64> = per_level
                    .iter()
                    .map(|c| c[target] as f64 / c.iter().sum::<usize>().max(1) as f64)
                    .collect();
                let mut order: Vec<usize> = (0..n_levels).collect();
                order.sort_by(|&a, &b| share[a].total_cmp(&share[b]).then(a.cmp(&b)));
                let mut position = vec![0.0; n_levels];
                for (r, &level) in order.iter().enumerate() {
                    position[level] = r as f64;
                }
                position
            });
            match &ranking {
                Some(position) => column.extend(
                    samples
                        .iter()
                        .map(|&s| (position[self.x[s][f] as usize], self.y[s])),
                ),
                None => column.extend(samples.iter().map(|&s| (self.x[s][f], self.y[s]))),
            }
            column.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut left = vec![0usize; self.n_classes];
            let mut right = counts.clone();
            let mut cut = None;
            for k in 0..n - 1 {
                let (v, c) = column[k];
                left[c] += 1;
                right[c] -= 1;
                let n_left = k + 1;
                if n_left < self.params.min_leaf {
                    continue;
                }
                if n - n_left < self.params.min_leaf {
                    break;
                }
                let next = column[k + 1].0;
                if next <= v {
                    continue;
                }
                let score = purity_score(&left, n_left) + purity_score(&right, n - n_left);
                if best.is_none_or(|(b, _, _)| score > b) && cut.is_none_or(|(b, _)| score > b) {
                    cut = Some((score, v + (next - v) / 2.0));
                }
            }
            let Some((score, at)) = cut else { continue };
            let rule = match &ranking {
                Some(position) => Rule::Levels(
                    position
                        .iter()
                        .enumerate()
                        .filter(|(_, &r)| r <= at)
                        .fold(0u64, |mask, (level, _)| mask | 1 << level),
                ),
                None => Rule::Threshold(at),
            };
            best = Some((score, f, rule));
        }

        let Some((_, feature, rule)) = best.filter(|(s, _, _)| *s > parent + 1e-12) else {
            self.nodes[id as usize] = leaf;
            return id;
        };
        let mut split = 0;
        for k in 0..n {
            if rule.goes_left(self.x[samples[k]][feature]) {
                samples.swap(k, split);
                split += 1;
            }
        }
        let (l, r) = samples.split_at_mut(split);
        let left = self.grow(l, depth + 1, rng);
        let right = self.grow(r, depth + 1, rng);
        self.nodes[id as usize] = match rule {
            Rule::Threshold(t) => Node::Split(feature as u32, t, left, right),
            Rule::Levels(mask) => Node::Levels(feature as u32, mask, left, right),
        };
        id
    }
}

impl RandomForest {
    /// Fits on every row of `data`.
    pub fn fit(data: &Dataset, params: &ForestParams) -> Result<RandomForest, ModelError> {
        if data.is_empty() {
            return Err(ModelError::Training("the training set is empty".into()));
        }
        if !data.is_labelled() {
            return Err(ModelError::Training("the dataset has no label column".into()));
        }
        let n_classes = data.class_names.len();
        let mut present = vec![false; n_classes];
        for &l in &data.labels {
            present[l] = true;
        }
        if present.iter().filter(|&&p| p).count() < 2 {
            return Err(ModelError::Training(
                "the training set contains a single class".into(),
            ));
        }
        if params.n_trees == 0 || params.min_leaf == 0 {
            return Err(ModelError::Training(
                "need at least one tree and a minimum leaf size of one".into(),
            ));
        }
        let rows: Vec<&[f64]> = data.instances.iter().map(|i| i.values()).collect();
        let n = rows.len();
        let mtry = params.features_per_split(data.schema.len());
        let levels: Vec<Option<usize>> = data
            .schema
            .features()
            .iter()
            .map(|f| match &f.kind {
                FeatureKind::Categorical { levels } if levels.len() <= MAX_SUBSET_LEVELS => {
                    Some(levels.len())
                }
                _ => None,
            })
            .collect();
        let trees = (0..params.n_trees)
            .into_par_iter()
            .map(|t| {
                let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
                rng.set_stream(t as u64);
                let mut bag: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
                let mut b = Builder {
                    x: &rows,
                    y: &data.labels,
                    n_classes,
                    levels: &levels,
                    params,
                    mtry,
                    nodes: Vec::new(),
                };
                b.grow(&mut bag, 0, &mut rng);
                Tree { nodes: b.nodes }
            })
            .collect();
        Ok(RandomForest {
            schema: data.schema.clone(),
            class_names: data.class_names.clone(),
            target: data.label_name.clone(),
            params: params.clone(),
            trees,
        })
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn target(&self) -> Option<&str> {
        self.target.as_deref()
    }

    pub fn params(&self) -> &ForestParams {
        &self.params
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    /// Most voted class, ties to the lowest index.
    pub fn classify(&self, x: &[f64]) -> usize {
        let probs = self.predict_values(x);
        probs
            .iter()
            .enumerate()
            .fold((0, f64::MIN), |b, (c, &p)| if p > b.1 { (c, p) } else { b })
            .0
    }

    pub fn accuracy(&self, data: &Dataset) -> f64 {
        let hits = data
            .instances
            .iter()
            .zip(&data.labels)
            .filter(|(x, &y)| self.classify(x.values()) == y)
            .count();
        hits as f64 / data.len() as f64
    }
}

impl Predictor for RandomForest {
    fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    fn output_names(&self) -> Vec<String> {
        self.class_names.clone()
    }

    fn task(&self) -> Task {
        Task::Classification
    }

    fn predict_values(&self, x: &[f64]) -> Vec<f64> {
        let mut votes = vec![0usize; self.class_names.len()];
        for t in &self.trees {
            votes[t.predict(x)] += 1;
        }
        let total = self.trees.len() as f64;
        votes.into_iter().map(|v| v as f64 / total).collect()
    }
}

#[derive(Clone, Debug)]
pub struct TrainingReport {
    pub forest: RandomForest,
    /// Accuracy on the held-out rows; `None` when the split leaves none.
    pub test_accuracy: Option<f64>,
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
}

/// Splits `data`, fits on the training part and scores the held-out part.
pub fn train_random_forest(
    data: &Dataset,
    params: &ForestParams,
    split: SplitSpec,
) -> Result<TrainingReport, ModelError> {
    let (train_indices, test_indices) = data.split_indices(split.train_fraction, split.seed);
    let forest = RandomForest::fit(&data.subset(&train_indices), params)?;
    let test_accuracy = (!test_indices.is_empty()).then(|| forest.accuracy(&data.subset(&test_indices)));
    Ok(TrainingReport {
        forest,
        test_accuracy,
        train_indices,
        test_indices,
    })
}
