//! Coalitions of players encoded as fixed-width bit patterns.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Upper bound on the player count for anything that enumerates all 2^n coalitions.
pub const MAX_PLAYERS: usize = 20;

/// A subset of the players `0..n`, bit `i` set when player `i` is a member.
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Coalition(u32);

impl Coalition {
    pub const EMPTY: Coalition = Coalition(0);

    pub const fn from_bits(bits: u32) -> Self {
        Coalition(bits)
    }

    pub const fn bits(self) -> u32 {
        self.0
    }

    /// The grand coalition `{0, .., n-1}`.
    pub fn grand(n: usize) -> Self {
        debug_assert!(n <= 32);
        if n >= 32 {
            Coalition(u32::MAX)
        } else {
            Coalition((1u32 << n) - 1)
        }
    }

    pub fn singleton(player: usize) -> Self {
        debug_assert!(player < 32);
        Coalition(1 << player)
    }

    /// Builds a coalition from player indices. Panics on an index >= 32.
    pub fn from_members<I: IntoIterator<Item = usize>>(members: I) -> Self {
        members
            .into_iter()
            .fold(Coalition::EMPTY, |acc, p| acc.with(p))
    }

    pub fn with(self, player: usize) -> Self {
        assert!(player < 32, "player index {player} does not fit a coalition");
        Coalition(self.0 | (1 << player))
    }

    pub fn without(self, player: usize) -> Self {
        Coalition(self.0 & !(1 << player))
    }

    pub fn contains(self, player: usize) -> bool {
        player < 32 && self.0 & (1 << player) != 0
    }

    pub fn union(self, other: Coalition) -> Self {
        Coalition(self.0 | other.0)
    }

    pub fn intersection(self, other: Coalition) -> Self {
        Coalition(self.0 & other.0)
    }

    pub fn difference(self, other: Coalition) -> Self {
        Coalition(self.0 & !other.0)
    }

    pub fn is_subset_of(self, other: Coalition) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn is_disjoint(self, other: Coalition) -> bool {
        self.0 & other.0 == 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    /// Smallest member, if any.
    pub fn first(self) -> Option<usize> {
        (self.0 != 0).then(|| self.0.trailing_zeros() as usize)
    }

    /// Members in ascending order.
    pub fn members(self) -> Members {
        Members(self.0)
    }

    /// Every subset of `self`, including the empty set and `self`, in ascending bit order.
    pub fn subsets(self) -> Subsets {
        Subsets {
            mask: self.0,
            next: Some(0),
        }
    }

    /// Index of this coalition in a dense table of size 2^n.
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Debug for Coalition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.members()).finish()
    }
}

impl fmt::Display for Coalition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, m) in self.members().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{m}")?;
        }
        write!(f, "}}")
    }
}

impl FromIterator<usize> for Coalition {
    fn from_iter<T: IntoIterator<Item = usize>>(iter: T) -> Self {
        Coalition::from_members(iter)
    }
}

#[derive(Clone, Debug)]
pub struct Members(u32);

impl Iterator for Members {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        if self.0 == 0 {
            return None;
        }
        let p = self.0.trailing_zeros() as usize;
        self.0 &= self.0 - 1;
        Some(p)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = self.0.count_ones() as usize;
        (n, Some(n))
    }
}

impl ExactSizeIterator for Members {}

/// Enumerates submasks with the `(s - mask) & mask` trick, ascending.
#[derive(Clone, Debug)]
pub struct Subsets {
    mask: u32,
    next: Option<u32>,
}

impl Iterator for Subsets {
    type Item = Coalition;

    fn next(&mut self) -> Option<Coalition> {
        let cur = self.next?;
        self.next = if cur == self.mask {
            None
        } else {
            Some(cur.wrapping_sub(self.mask) & self.mask)
        };
        Some(Coalition(cur))
    }
}

/// All 2^n coalitions of an n-player game, ascending by bitmask.
pub fn all_coalitions(n: usize) -> impl Iterator<Item = Coalition> {
    (0..(1u32 << n)).map(Coalition)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn set_algebra() {
        let a = Coalition::from_members([0, 2]);
        let b = Coalition::from_members([2, 3]);
        assert_eq!(a.union(b), Coalition::from_members([0, 2, 3]));
        assert_eq!(a.intersection(b), Coalition::singleton(2));
        assert_eq!(a.difference(b), Coalition::singleton(0));
        assert!(Coalition::singleton(2).is_subset_of(a));
        assert!(!a.is_disjoint(b));
        assert_eq!(a.len(), 2);
        assert_eq!(a.members().collect::<Vec<_>>(), vec![0, 2]);
    }

    #[test]
    fn empty_is_distinct() {
        assert!(Coalition::EMPTY.is_empty());
        for c in all_coalitions(4).skip(1) {
            assert_ne!(c, Coalition::EMPTY);
        }
    }

    #[test]
    fn subsets_enumerates_power_set() {
        let s = Coalition::from_members([1, 3, 4]);
        let subs: Vec<_> = s.subsets().collect();
        assert_eq!(subs.len(), 8);
        assert!(subs.iter().all(|t| t.is_subset_of(s)));
        assert_eq!(subs[0], Coalition::EMPTY);
        assert_eq!(*subs.last().unwrap(), s);
        assert_eq!(Coalition::EMPTY.subsets().count(), 1);
    }

    #[test]
    fn display_lists_members() {
        assert_eq!(Coalition::from_members([0, 5]).to_string(), "{0,5}");
        assert_eq!(Coalition::EMPTY.to_string(), "{}");
    }
}
