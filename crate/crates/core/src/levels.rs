//! Partitions of the player set and levels structures: sequences of
//! successively coarser partitions running from all singletons up to the
//! grand coalition.

use std::fmt;

use thiserror::Error;

use crate::coalition::Coalition;
use crate::game::{Game, GameError};

/// Partitions are stored in bit patterns, so the player count tops out here.
pub const MAX_PARTITION_PLAYERS: usize = 32;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LevelsError {
    #[error("not a partition: {0}")]
    NotAPartition(String),
    #[error("level {0} is not a coarsening of the level below it")]
    NotCoarsening(usize),
    #[error("level 0 must be the all-singletons partition")]
    MissingSingletonLevel,
    #[error("the last level must be the grand coalition")]
    MissingGrandCoalition,
    #[error("level {k} is out of range for a structure of degree {degree}")]
    LevelOutOfRange { k: usize, degree: usize },
    #[error("coalition {0} is not a union of blocks of the partition")]
    NotUnionOfBlocks(Coalition),
    #[error(transparent)]
    Game(#[from] GameError),
}

/// A partition of `{0..n}` into nonempty disjoint blocks, canonicalized by
/// sorting blocks on their smallest member.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Partition {
    n: usize,
    blocks: Vec<Coalition>,
}

impl Partition {
    pub fn new(n: usize, mut blocks: Vec<Coalition>) -> Result<Self, LevelsError> {
        if n == 0 || n > MAX_PARTITION_PLAYERS {
            return Err(LevelsError::NotAPartition(format!(
                "player count {n} outside 1..={MAX_PARTITION_PLAYERS}"
            )));
        }
        let grand = Coalition::grand(n);
        let mut seen = Coalition::EMPTY;
        for b in &blocks {
            if b.is_empty() {
                return Err(LevelsError::NotAPartition("empty block".into()));
            }
            if !b.is_subset_of(grand) {
                return Err(LevelsError::NotAPartition(format!(
                    "block {b} mentions a player outside 0..{n}"
                )));
            }
            if !seen.is_disjoint(*b) {
                let p = seen.intersection(*b).first().unwrap_or_default();
                return Err(LevelsError::NotAPartition(format!(
                    "player {p} appears in more than one block"
                )));
            }
            seen = seen.union(*b);
        }
        if seen != grand {
            let p = grand.difference(seen).first().unwrap_or_default();
            return Err(LevelsError::NotAPartition(format!(
                "player {p} is not covered by any block"
            )));
        }
        blocks.sort_by_key(|b| b.first());
        Ok(Partition { n, blocks })
    }

    /// Blocks given as lists of 0-based player indices.
    pub fn from_indices(n: usize, blocks: &[Vec<usize>]) -> Result<Self, LevelsError> {
        let mut coalitions = Vec::with_capacity(blocks.len());
        for b in blocks {
            if let Some(&p) = b.iter().find(|&&p| p >= n) {
                return Err(LevelsError::NotAPartition(format!(
                    "player {p} is outside 0..{n}"
                )));
            }
            let c = Coalition::from_members(b.iter().copied());
            if c.len() != b.len() {
                return Err(LevelsError::NotAPartition(format!(
                    "block {b:?} lists a player twice"
                )));
            }
            coalitions.push(c);
        }
        Partition::new(n, coalitions)
    }

    pub fn singletons(n: usize) -> Self {
        Partition {
            n,
            blocks: (0..n).map(Coalition::singleton).collect(),
        }
    }

    pub fn grand(n: usize) -> Self {
        Partition {
            n,
            blocks: vec![Coalition::grand(n)],
        }
    }

    pub fn n_players(&self) -> usize {
        self.n
    }

    pub fn blocks(&self) -> &[Coalition] {
        &self.blocks
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn is_singletons(&self) -> bool {
        self.blocks.len() == self.n
    }

    pub fn is_grand(&self) -> bool {
        self.blocks.len() == 1
    }

    /// Index of the block holding `player`.
    pub fn block_of(&self, player: usize) -> Option<usize> {
        self.blocks.iter().position(|b| b.contains(player))
    }

    /// Every block of `self` sits inside some block of `coarser`.
    pub fn refines(&self, coarser: &Partition) -> bool {
        self.n == coarser.n
            && self
                .blocks
                .iter()
                .all(|b| coarser.blocks.iter().any(|c| b.is_subset_of(*c)))
    }

    /// Blocks as lists of 0-based player indices.
    pub fn to_indices(&self) -> Vec<Vec<usize>> {
        self.blocks.iter().map(|b| b.members().collect()).collect()
    }
}

impl fmt::Debug for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.blocks.iter()).finish()
    }
}

/// `N_B(S)`: the blocks of `b` contained in `s`. `s` must be a union of blocks.
pub fn immediate_players(s: Coalition, b: &Partition) -> Result<Vec<Coalition>, LevelsError> {
    let inside: Vec<Coalition> = b
        .blocks
        .iter()
        .copied()
        .filter(|blk| blk.is_subset_of(s))
        .collect();
    let covered = inside.iter().fold(Coalition::EMPTY, |a, blk| a.union(*blk));
    if covered != s {
        return Err(LevelsError::NotUnionOfBlocks(s));
    }
    Ok(inside)
}

/// The game whose players are the blocks of `partition`; a set of blocks is
/// worth what the union of its members is worth in `g`.
pub fn induced_game(g: &Game, partition: &Partition) -> Result<Game, LevelsError> {
    if partition.n_players() != g.n_players() {
        return Err(LevelsError::NotAPartition(format!(
            "partition covers {} players but the game has {}",
            partition.n_players(),
            g.n_players()
        )));
    }
    let blocks = partition.blocks();
    Ok(Game::from_fn(blocks.len(), |a| {
        let union = a
            .members()
            .fold(Coalition::EMPTY, |acc, k| acc.union(blocks[k]));
        g.worth(union)
    })?)
}

#[derive(Clone, PartialEq, Eq)]
pub struct LevelsStructure {
    n: usize,
    levels: Vec<Partition>,
}

impl fmt::Debug for LevelsStructure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.levels.iter()).finish()
    }
}

/// Validates raw partitions given as 0-based index lists, reporting the first
/// violated constraint in level order.
pub fn validate_levels_structure(
    n: usize,
    partitions: &[Vec<Vec<usize>>],
) -> Result<LevelsStructure, LevelsError> {
    let mut levels = Vec::with_capacity(partitions.len());
    for (k, raw) in partitions.iter().enumerate() {
        let p = Partition::from_indices(n, raw).map_err(|e| match e {
            LevelsError::NotAPartition(why) => {
                LevelsError::NotAPartition(format!("level {k}: {why}"))
            }
            other => other,
        })?;
        levels.push(p);
    }
    LevelsStructure::new(n, levels)
}

impl LevelsStructure {
    pub fn new(n: usize, levels: Vec<Partition>) -> Result<Self, LevelsError> {
        let Some(first) = levels.first() else {
            return Err(LevelsError::MissingSingletonLevel);
        };
        if let Some(p) = levels.iter().find(|p| p.n_players() != n) {
            return Err(LevelsError::NotAPartition(format!(
                "a level covers {} players, expected {n}",
                p.n_players()
            )));
        }
        if !first.is_singletons() {
            return Err(LevelsError::MissingSingletonLevel);
        }
        for k in 1..levels.len() {
            if !levels[k - 1].refines(&levels[k]) {
                return Err(LevelsError::NotCoarsening(k));
            }
        }
        if !levels.last().is_some_and(Partition::is_grand) {
            return Err(LevelsError::MissingGrandCoalition);
        }
        Ok(LevelsStructure { n, levels })
    }

    /// The trivial structure `(singletons, {N})`.
    pub fn trivial(n: usize) -> Self {
        let mut levels = vec![Partition::singletons(n)];
        if n > 1 {
            levels.push(Partition::grand(n));
        }
        LevelsStructure { n, levels }
    }

    pub fn n_players(&self) -> usize {
        self.n
    }

    /// `h`, the index of the grand-coalition level.
    pub fn degree(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn levels(&self) -> &[Partition] {
        &self.levels
    }

    pub fn level(&self, k: usize) -> Result<&Partition, LevelsError> {
        self.levels.get(k).ok_or(LevelsError::LevelOutOfRange {
            k,
            degree: self.degree(),
        })
    }

    /// `B^k_i`, the union of level `k` that contains `player`.
    pub fn union_containing(&self, k: usize, player: usize) -> Result<Coalition, LevelsError> {
        let level = self.level(k)?;
        level
            .block_of(player)
            .map(|b| level.blocks()[b])
            .ok_or_else(|| LevelsError::NotAPartition(format!("player {player} is not covered")))
    }

    /// Levels as lists of blocks of 0-based indices.
    pub fn to_indices(&self) -> Vec<Vec<Vec<usize>>> {
        self.levels.iter().map(Partition::to_indices).collect()
    }
}

/// A levels structure whose players are the unions of one level of another
/// structure. `structure` is indexed by position in `players`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QuotientStructure {
    players: Vec<Coalition>,
    structure: LevelsStructure,
}

impl QuotientStructure {
    pub fn players(&self) -> &[Coalition] {
        &self.players
    }

    pub fn structure(&self) -> &LevelsStructure {
        &self.structure
    }

    pub fn degree(&self) -> usize {
        self.structure.degree()
    }

    /// Level `r` with each block expanded into the original unions it groups.
    pub fn level_blocks(&self, r: usize) -> Result<Vec<Vec<Coalition>>, LevelsError> {
        Ok(self
            .structure
            .level(r)?
            .blocks()
            .iter()
            .map(|b| b.members().map(|p| self.players[p]).collect())
            .collect())
    }
}

/// `𝓑 / B^k`: level `r` groups the unions of `B^k` by the union of `B^{k+r}`
/// that contains them.
pub fn quotient_levels(ls: &LevelsStructure, k: usize) -> Result<QuotientStructure, LevelsError> {
    let base = ls.level(k)?;
    let players = base.blocks().to_vec();
    let m = players.len();
    let mut levels = Vec::with_capacity(ls.degree() - k + 1);
    for upper in &ls.levels[k..] {
        let grouped = upper
            .blocks()
            .iter()
            .map(|outer| {
                players
                    .iter()
                    .enumerate()
                    .filter(|(_, u)| u.is_subset_of(*outer))
                    .map(|(idx, _)| idx)
                    .collect::<Coalition>()
            })
            .collect();
        levels.push(Partition::new(m, grouped)?);
    }
    Ok(QuotientStructure {
        players,
        structure: LevelsStructure::new(m, levels)?,
    })
}
