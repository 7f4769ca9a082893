//! Named groups of features ("intermediate concepts") and the abstraction
//! levels they induce.
//!
//! A vocabulary file maps concept names to arrays of 1-based feature indices
//! and/or other concept names:
//!
//! ```text
//! PRICE = [1, 2]
//! COMFORT = [3, 4, 5]
//! TECH = [COMFORT, 6]
//! CAR = [PRICE, TECH]
//! ```
//!
//! References may point forwards; cycles are rejected.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coalition::Coalition;
use crate::config::{format_name, parse_document, ConfigError, Position, ValueKind};
use crate::data::FeatureSchema;
use crate::levels::{LevelsError, LevelsStructure, Partition};

#[derive(Debug, Error)]
pub enum VocabularyError {
    #[error(transparent)]
    File(#[from] ConfigError),
    #[error("cannot read vocabulary {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("unknown concept `{0}`")]
    UnknownReference(String),
    #[error("concept cycle: {}", .0.join(" -> "))]
    Cycle(Vec<String>),
    #[error("feature index {index} is out of range 1..={n_features}")]
    IndexOutOfRange { index: i64, n_features: usize },
    #[error("concept `{0}` is empty")]
    EmptyConcept(String),
    #[error("duplicate concept `{0}`")]
    DuplicateConcept(String),
    #[error("the vocabulary defines no concepts")]
    Empty,
    #[error("concepts `{0}` and `{1}` overlap without one containing the other")]
    NotNested(String, String),
    #[error("an index set must be nonempty")]
    EmptyIndexSet,
    #[error(transparent)]
    Levels(#[from] LevelsError),
}

/// A nonempty set of 0-based feature indices, kept sorted.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct IndexSet(Vec<usize>);

impl IndexSet {
    pub fn new(indices: impl IntoIterator<Item = usize>) -> Result<Self, VocabularyError> {
        let mut v: Vec<usize> = indices.into_iter().collect();
        v.sort_unstable();
        v.dedup();
        if v.is_empty() {
            return Err(VocabularyError::EmptyIndexSet);
        }
        Ok(IndexSet(v))
    }

    pub fn singleton(i: usize) -> Self {
        IndexSet(vec![i])
    }

    /// `{0, .., n-1}`; panics when `n` is zero.
    pub fn all(n: usize) -> Self {
        assert!(n > 0, "an index set must be nonempty");
        IndexSet((0..n).collect())
    }

    /// Checks every index against the feature count.
    pub fn within(self, n_features: usize) -> Result<Self, VocabularyError> {
        match self.0.last() {
            Some(&i) if i >= n_features => Err(VocabularyError::IndexOutOfRange {
                index: i as i64 + 1,
                n_features,
            }),
            _ => Ok(self),
        }
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.0.binary_search(&i).is_ok()
    }

    pub fn is_subset_of(&self, other: &IndexSet) -> bool {
        self.0.iter().all(|&i| other.contains(i))
    }

    pub fn is_disjoint(&self, other: &IndexSet) -> bool {
        !self.0.iter().any(|&i| other.contains(i))
    }

    pub fn union(&self, other: &IndexSet) -> IndexSet {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        v.sort_unstable();
        v.dedup();
        IndexSet(v)
    }

    pub fn to_coalition(&self) -> Coalition {
        self.0.iter().copied().collect()
    }

    /// 1-based indices, as written in vocabulary files.
    pub fn one_based(&self) -> Vec<usize> {
        self.0.iter().map(|i| i + 1).collect()
    }
}

impl TryFrom<Vec<usize>> for IndexSet {
    type Error = VocabularyError;

    fn try_from(v: Vec<usize>) -> Result<Self, Self::Error> {
        IndexSet::new(v)
    }
}

impl From<IndexSet> for Vec<usize> {
    fn from(s: IndexSet) -> Vec<usize> {
        s.0
    }
}

impl fmt::Display for IndexSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.one_based().iter().map(|i| i.to_string()).collect();
        write!(f, "{{{}}}", parts.join(","))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Part {
    /// 0-based feature index.
    Feature(usize),
    Concept(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Concept {
    pub name: String,
    pub parts: Vec<Part>,
    pub features: IndexSet,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    n_features: usize,
    concepts: Vec<Concept>,
}

/// A named block of an abstraction level.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NamedSet {
    pub name: String,
    pub features: IndexSet,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum LevelSelector {
    /// The coarsest level below the whole feature set.
    #[default]
    Top,
    /// Level `k` of the induced levels structure; 0 is the individual features.
    Level(usize),
}

struct Definition {
    name: String,
    position: Option<Position>,
    parts: Vec<(RawPart, Option<Position>)>,
}

enum RawPart {
    Index(i64),
    Name(String),
}

type Located = (Option<Position>, VocabularyError);

fn locate(err: Located) -> VocabularyError {
    match err {
        (Some(p), e) => VocabularyError::File(ConfigError::new(p, e.to_string())),
        (None, e) => e,
    }
}

impl Vocabulary {
    /// Builds a vocabulary from `(name, parts)` pairs; feature parts are 0-based.
    pub fn new(n_features: usize, concepts: Vec<(String, Vec<Part>)>) -> Result<Self, VocabularyError> {
        let defs = concepts
            .into_iter()
            .map(|(name, parts)| Definition {
                name,
                position: None,
                parts: parts
                    .into_iter()
                    .map(|p| match p {
                        Part::Feature(i) => (RawPart::Index(i as i64 + 1), None),
                        Part::Concept(c) => (RawPart::Name(c), None),
                    })
                    .collect(),
            })
            .collect();
        resolve(n_features, defs).map_err(locate)
    }

    /// One concept per feature, named after the feature.
    pub fn singletons(schema: &FeatureSchema) -> Self {
        let concepts = schema
            .features()
            .iter()
            .enumerate()
            .map(|(i, f)| Concept {
                name: f.name.clone(),
                parts: vec![Part::Feature(i)],
                features: IndexSet::singleton(i),
            })
            .collect();
        Vocabulary {
            n_features: schema.len(),
            concepts,
        }
    }

    pub fn parse(text: &str, n_features: usize) -> Result<Self, VocabularyError> {
        let doc = parse_document(text)?;
        let mut defs = Vec::with_capacity(doc.entries.len());
        for entry in doc.entries {
            let Some(items) = entry.value.as_array() else {
                return Err(ConfigError::new(
                    entry.value.position,
                    format!("`{}` must be an array of feature indices or concept names", entry.key),
                )
                .into());
            };
            let mut parts = Vec::with_capacity(items.len());
            for item in items {
                let raw = match &item.kind {
                    ValueKind::Int(i) => RawPart::Index(*i),
                    ValueKind::Name(n) => RawPart::Name(n.clone()),
                    ValueKind::Array(_) => {
                        return Err(ConfigError::new(item.position, "nested arrays are not allowed here").into())
                    }
                };
                parts.push((raw, Some(item.position)));
            }
            defs.push(Definition {
                name: entry.key,
                position: Some(entry.position),
                parts,
            });
        }
        resolve(n_features, defs).map_err(locate)
    }

    pub fn load(path: impl AsRef<Path>, n_features: usize) -> Result<Self, VocabularyError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| VocabularyError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Vocabulary::parse(&text, n_features)
    }

    /// Writes the vocabulary back in file syntax.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for c in &self.concepts {
            let parts: Vec<String> = c
                .parts
                .iter()
                .map(|p| match p {
                    Part::Feature(i) => (i + 1).to_string(),
                    Part::Concept(n) => format_name(n),
                })
                .collect();
            out.push_str(&format!("{} = [{}]\n", format_name(&c.name), parts.join(", ")));
        }
        out
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn concepts(&self) -> &[Concept] {
        &self.concepts
    }

    pub fn is_empty(&self) -> bool {
        self.concepts.is_empty()
    }

    pub fn concept(&self, name: &str) -> Option<&Concept> {
        self.concepts.iter().find(|c| c.name == name)
    }

    /// Expanded feature set of a concept.
    pub fn features_of(&self, name: &str) -> Option<&IndexSet> {
        self.concept(name).map(|c| &c.features)
    }

    fn name_for(&self, set: &IndexSet, schema: &FeatureSchema) -> String {
        match self.concepts.iter().find(|c| &c.features == set) {
            Some(c) => c.name.clone(),
            None if set.len() == 1 => schema.feature(set.indices()[0]).name.clone(),
            None => set.to_string(),
        }
    }

    /// The constituents of a concept, named, in declaration order.
    pub fn parts_of(&self, name: &str, schema: &FeatureSchema) -> Result<Vec<NamedSet>, VocabularyError> {
        let concept = self
            .concept(name)
            .ok_or_else(|| VocabularyError::UnknownReference(name.to_string()))?;
        Ok(concept
            .parts
            .iter()
            .map(|p| match p {
                Part::Feature(i) => NamedSet {
                    name: schema.feature(*i).name.clone(),
                    features: IndexSet::singleton(*i),
                },
                Part::Concept(c) => NamedSet {
                    name: c.clone(),
                    features: self.concepts.iter().find(|x| &x.name == c).expect("resolved").features.clone(),
                },
            })
            .collect())
    }

    fn check_nested(&self) -> Result<(), VocabularyError> {
        for (k, a) in self.concepts.iter().enumerate() {
            for b in &self.concepts[k + 1..] {
                let nested = a.features.is_subset_of(&b.features) || b.features.is_subset_of(&a.features);
                if !nested && !a.features.is_disjoint(&b.features) {
                    return Err(VocabularyError::NotNested(a.name.clone(), b.name.clone()));
                }
            }
        }
        Ok(())
    }

    /// Partitions of the features from finest to coarsest. Level 0 holds the
    /// individual features, level `k` merges every concept whose nesting depth
    /// is at most `k`, and the last level is the whole feature set. Concepts
    /// must be pairwise nested or disjoint.
    pub fn level_sets(&self) -> Result<Vec<Vec<IndexSet>>, VocabularyError> {
        self.check_nested()?;
        let n = self.n_features;
        let mut sets: Vec<IndexSet> = self.concepts.iter().map(|c| c.features.clone()).collect();
        sets.sort_by_key(|s| s.len());
        sets.dedup();
        // Height: 0 for single features, else one more than the tallest proper subset.
        let mut height = vec![0usize; sets.len()];
        for a in 0..sets.len() {
            if sets[a].len() > 1 {
                height[a] = 1 + (0..a)
                    .filter(|&b| sets[b].len() < sets[a].len() && sets[b].is_subset_of(&sets[a]))
                    .map(|b| height[b])
                    .max()
                    .unwrap_or(0);
            }
        }
        let top = height.iter().copied().max().unwrap_or(0);
        let mut levels: Vec<Vec<IndexSet>> = Vec::new();
        for k in 0..=top {
            let mut blocks: Vec<IndexSet> = Vec::new();
            for (s, &h) in sets.iter().zip(&height).rev() {
                if h <= k && blocks.iter().all(|b| !s.is_subset_of(b)) {
                    blocks.push(s.clone());
                }
            }
            for i in 0..n {
                if blocks.iter().all(|b| !b.contains(i)) {
                    blocks.push(IndexSet::singleton(i));
                }
            }
            blocks.sort_by_key(|b| b.indices()[0]);
            if levels.last() != Some(&blocks) {
                levels.push(blocks);
            }
        }
        let grand = vec![IndexSet::all(n)];
        if levels.last() != Some(&grand) {
            levels.push(grand);
        }
        Ok(levels)
    }

    /// The induced levels structure on at most
    /// [`MAX_PLAYERS`](crate::coalition::MAX_PLAYERS) features.
    pub fn levels_structure(&self) -> Result<LevelsStructure, VocabularyError> {
        let levels = self
            .level_sets()?
            .into_iter()
            .map(|blocks| Partition::new(self.n_features, blocks.iter().map(IndexSet::to_coalition).collect()))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(LevelsStructure::new(self.n_features, levels)?)
    }

    /// Named blocks of the selected level. A block takes the name of the first
    /// concept with exactly its features, else the feature name.
    pub fn select(&self, selector: LevelSelector, schema: &FeatureSchema) -> Result<Vec<NamedSet>, VocabularyError> {
        if self.concepts.is_empty() {
            return Err(VocabularyError::Empty);
        }
        let levels = self.level_sets()?;
        let k = match selector {
            LevelSelector::Top => levels.len().saturating_sub(2),
            LevelSelector::Level(k) => {
                if k >= levels.len() {
                    return Err(LevelsError::LevelOutOfRange {
                        k,
                        degree: levels.len() - 1,
                    }
                    .into());
                }
                k
            }
        };
        Ok(levels[k]
            .iter()
            .map(|s| NamedSet {
                name: self.name_for(s, schema),
                features: s.clone(),
            })
            .collect())
    }
}

fn resolve(n_features: usize, defs: Vec<Definition>) -> Result<Vocabulary, Located> {
    if defs.is_empty() {
        return Err((None, VocabularyError::Empty));
    }
    let mut by_name: HashMap<&str, usize> = HashMap::new();
    for (k, d) in defs.iter().enumerate() {
        if by_name.insert(&d.name, k).is_some() {
            return Err((d.position, VocabularyError::DuplicateConcept(d.name.clone())));
        }
        if d.parts.is_empty() {
            return Err((d.position, VocabularyError::EmptyConcept(d.name.clone())));
        }
    }

    #[derive(Clone, Copy, PartialEq)]
    enum State {
        New,
        Active,
        Done,
    }

    struct Walk<'a> {
        defs: &'a [Definition],
        by_name: &'a HashMap<&'a str, usize>,
        n_features: usize,
        state: Vec<State>,
        stack: Vec<usize>,
        expanded: Vec<Option<IndexSet>>,
    }

    impl Walk<'_> {
        fn visit(&mut self, k: usize) -> Result<(), Located> {
            self.state[k] = State::Active;
            self.stack.push(k);
            let mut features = Vec::new();
            for (part, position) in &self.defs[k].parts {
                match part {
                    RawPart::Index(i) => {
                        if *i < 1 || *i as u64 > self.n_features as u64 {
                            return Err((
                                *position,
                                VocabularyError::IndexOutOfRange {
                                    index: *i,
                                    n_features: self.n_features,
                                },
                            ));
                        }
                        features.push(*i as usize - 1);
                    }
                    RawPart::Name(name) => {
                        let Some(&r) = self.by_name.get(name.as_str()) else {
                            return Err((*position, VocabularyError::UnknownReference(name.clone())));
                        };
                        match self.state[r] {
                            State::Active => {
                                let from = self.stack.iter().position(|&s| s == r).expect("on stack");
                                let mut chain: Vec<String> =
                                    self.stack[from..].iter().map(|&s| self.defs[s].name.clone()).collect();
                                chain.push(name.clone());
                                return Err((*position, VocabularyError::Cycle(chain)));
                            }
                            State::New => self.visit(r)?,
                            State::Done => {}
                        }
                        features.extend_from_slice(self.expanded[r].as_ref().expect("visited").indices());
                    }
                }
            }
            self.expanded[k] = Some(IndexSet::new(features).expect("nonempty parts"));
            self.state[k] = State::Done;
            self.stack.pop();
            Ok(())
        }
    }

    let mut walk = Walk {
        defs: &defs,
        by_name: &by_name,
        n_features,
        state: vec![State::New; defs.len()],
        stack: Vec::new(),
        expanded: vec![None; defs.len()],
    };
    for k in 0..defs.len() {
        if walk.state[k] == State::New {
            walk.visit(k)?;
        }
    }
    let expanded = walk.expanded;
    let concepts = defs
        .into_iter()
        .zip(expanded)
        .map(|(d, features)| Concept {
            name: d.name,
            parts: d
                .parts
                .into_iter()
                .map(|(p, _)| match p {
                    RawPart::Index(i) => Part::Feature(i as usize - 1),
                    RawPart::Name(n) => Part::Concept(n),
                })
                .collect(),
            features: features.expect("every concept expanded"),
        })
        .collect();
    Ok(Vocabulary { n_features, concepts })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn set(one_based: &[usize]) -> IndexSet {
        IndexSet::new(one_based.iter().map(|i| i - 1)).unwrap()
    }

    #[test]
    fn cars_vocabulary_expands_nested_concepts() {
        let v = Vocabulary::parse(fixtures::CARS_VOCABULARY, 6).unwrap();
        assert_eq!(v.features_of("PRICE"), Some(&set(&[1, 2])));
        assert_eq!(v.features_of("COMFORT"), Some(&set(&[3, 4, 5])));
        assert_eq!(v.features_of("TECH"), Some(&set(&[3, 4, 5, 6])));
        assert_eq!(v.features_of("CAR"), Some(&set(&[1, 2, 3, 4, 5, 6])));
    }

    #[test]
    fn titanic_vocabulary() {
        let v = Vocabulary::parse(fixtures::TITANIC_VOCABULARY, 7).unwrap();
        assert_eq!(v.features_of("WEALTH"), Some(&set(&[1, 6])));
        assert_eq!(v.features_of("FAMILY"), Some(&set(&[4, 5])));
        assert_eq!(v.features_of("Gender"), Some(&set(&[2])));
        assert_eq!(v.features_of("Age"), Some(&set(&[3])));
        assert_eq!(v.features_of("Embarkment port"), Some(&set(&[7])));
    }

    #[test]
    fn forward_references_resolve() {
        let v = Vocabulary::parse("ALL = [A, 3]\nA = [1, 2]\n", 3).unwrap();
        assert_eq!(v.features_of("ALL"), Some(&set(&[1, 2, 3])));
    }

    fn file_error(text: &str, n: usize) -> ConfigError {
        match Vocabulary::parse(text, n) {
            Err(VocabularyError::File(e)) => e,
            other => panic!("expected a located error, got {other:?}"),
        }
    }

    #[test]
    fn self_reference_is_a_cycle() {
        let e = file_error("A = [1, A]\n", 2);
        assert_eq!(e.position, Position { line: 1, column: 9 });
        assert!(e.message.contains("cycle"), "{}", e.message);
    }

    #[test]
    fn longer_cycles_name_the_chain() {
        let e = file_error("A = [B]\nB = [C]\nC = [1, A]\n", 2);
        assert_eq!(e.message, "concept cycle: A -> B -> C -> A");
        assert_eq!(e.position.line, 3);
    }

    #[test]
    fn unknown_reference_and_range_errors_are_located() {
        let e = file_error("A = [1]\nB = [A, NOPE]\n", 2);
        assert_eq!(e.position, Position { line: 2, column: 9 });
        assert!(e.message.contains("unknown concept `NOPE`"));
        let e = file_error("A = [1, 7]\n", 6);
        assert_eq!(e.position, Position { line: 1, column: 9 });
        assert!(e.message.contains("out of range"));
        let e = file_error("A = [0]\n", 6);
        assert!(e.message.contains("out of range"));
        let e = file_error("A = []\n", 6);
        assert!(e.message.contains("empty"));
        assert!(matches!(Vocabulary::parse("# nothing\n", 3), Err(VocabularyError::Empty)));
    }

    #[test]
    fn text_round_trip() {
        let v = Vocabulary::parse(fixtures::TITANIC_VOCABULARY, 7).unwrap();
        assert_eq!(Vocabulary::parse(&v.to_text(), 7).unwrap(), v);
        let c = Vocabulary::parse(fixtures::CARS_VOCABULARY, 6).unwrap();
        assert_eq!(Vocabulary::parse(&c.to_text(), 6).unwrap(), c);
    }

    #[test]
    fn cars_levels_and_top_selection() {
        let ds = fixtures::cars();
        let v = Vocabulary::parse(fixtures::CARS_VOCABULARY, 6).unwrap();
        let levels = v.level_sets().unwrap();
        assert_eq!(levels.len(), 4);
        assert_eq!(levels[1], vec![set(&[1, 2]), set(&[3, 4, 5]), set(&[6])]);
        assert_eq!(levels[2], vec![set(&[1, 2]), set(&[3, 4, 5, 6])]);
        let top: Vec<String> = v.select(LevelSelector::Top, &ds.schema).unwrap().into_iter().map(|b| b.name).collect();
        assert_eq!(top, ["PRICE", "TECH"]);
        let mid: Vec<String> = v
            .select(LevelSelector::Level(1), &ds.schema)
            .unwrap()
            .into_iter()
            .map(|b| b.name)
            .collect();
        assert_eq!(mid, ["PRICE", "COMFORT", "safety"]);
        let ls = v.levels_structure().unwrap();
        assert_eq!(ls.degree(), 3);
        let parts: Vec<String> = v.parts_of("TECH", &ds.schema).unwrap().into_iter().map(|p| p.name).collect();
        assert_eq!(parts, ["COMFORT", "safety"]);
    }

    #[test]
    fn titanic_top_level_has_five_concepts() {
        let ds = fixtures::titanic();
        let v = Vocabulary::parse(fixtures::TITANIC_VOCABULARY, 7).unwrap();
        let top: Vec<String> = v.select(LevelSelector::Top, &ds.schema).unwrap().into_iter().map(|b| b.name).collect();
        assert_eq!(top, ["WEALTH", "Gender", "Age", "FAMILY", "Embarkment port"]);
        assert_eq!(v.levels_structure().unwrap().degree(), 2);
    }

    #[test]
    fn overlapping_concepts_have_no_levels() {
        let v = Vocabulary::parse("A = [1, 2]\nB = [2, 3]\n", 3).unwrap();
        assert!(matches!(v.level_sets(), Err(VocabularyError::NotNested(..))));
    }

    #[test]
    fn singleton_vocabulary_selects_features() {
        let ds = fixtures::cars();
        let v = Vocabulary::singletons(&ds.schema);
        let top = v.select(LevelSelector::Top, &ds.schema).unwrap();
        assert_eq!(top.len(), 6);
        assert_eq!(top[2].name, "doors");
    }
}
