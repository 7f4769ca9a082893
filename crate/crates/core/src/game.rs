//! Transferable-utility cooperative games: characteristic functions, Harsanyi
//! dividends, the imputation set and the core, and the classic structural
//! properties (monotonicity, superadditivity, convexity).
//!
//! Everything here is exhaustive over the 2^n coalitions, so games are capped
//! at [`MAX_PLAYERS`]. Equality checks on worths and payoffs use an absolute
//! tolerance, [`DEFAULT_TOLERANCE`] unless a `*_with_tolerance` variant is used.

use std::fmt::Write as _;

use rayon::prelude::*;
use thiserror::Error;

use crate::coalition::{all_coalitions, Coalition, MAX_PLAYERS};

pub const DEFAULT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GameError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("a game with {n} players exceeds the capacity of {max} players")]
    Capacity { n: usize, max: usize },
    #[error("worth table has {got} entries, expected {expected}")]
    TableSize { expected: usize, got: usize },
    #[error("worth of the empty coalition must be 0, got {0}")]
    EmptyWorth(f64),
    #[error("worth of coalition {0} is not finite")]
    NonFinite(Coalition),
    #[error("payoff vector has {got} entries for a {expected}-player game")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("dividend table is missing coalition {0}")]
    IncompleteTable(Coalition),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

fn check_capacity(n: usize, max: usize) -> Result<(), GameError> {
    if n == 0 {
        return Err(GameError::InvalidArgument(
            "a game needs at least one player".into(),
        ));
    }
    if n > max {
        return Err(GameError::Capacity { n, max });
    }
    Ok(())
}

/// A characteristic function `v` over all coalitions of `n` players, `v(∅) = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct Game {
    n: usize,
    worth: Vec<f64>,
}

impl Game {
    /// `worths[mask]` is the worth of the coalition with that bitmask.
    pub fn new(n: usize, worths: Vec<f64>) -> Result<Self, GameError> {
        check_capacity(n, MAX_PLAYERS)?;
        let expected = 1usize << n;
        if worths.len() != expected {
            return Err(GameError::TableSize {
                expected,
                got: worths.len(),
            });
        }
        if worths[0] != 0.0 {
            return Err(GameError::EmptyWorth(worths[0]));
        }
        if let Some(bad) = worths.iter().position(|w| !w.is_finite()) {
            return Err(GameError::NonFinite(Coalition::from_bits(bad as u32)));
        }
        Ok(Game { n, worth: worths })
    }

    /// Tabulates `f` over every coalition. `f(∅)` is ignored and stored as 0.
    pub fn from_fn<F>(n: usize, mut f: F) -> Result<Self, GameError>
    where
        F: FnMut(Coalition) -> f64,
    {
        check_capacity(n, MAX_PLAYERS)?;
        let worths = all_coalitions(n)
            .map(|c| if c.is_empty() { 0.0 } else { f(c) })
            .collect();
        Game::new(n, worths)
    }

    pub fn n_players(&self) -> usize {
        self.n
    }

    pub fn grand_coalition(&self) -> Coalition {
        Coalition::grand(self.n)
    }

    pub fn worth(&self, s: Coalition) -> f64 {
        self.worth[s.index()]
    }

    pub fn worths(&self) -> &[f64] {
        &self.worth
    }

    /// The pointwise combination `alpha * self + beta * other`.
    pub fn combine(&self, alpha: f64, other: &Game, beta: f64) -> Result<Game, GameError> {
        if other.n != self.n {
            return Err(GameError::DimensionMismatch {
                expected: self.n,
                got: other.n,
            });
        }
        let worths = self
            .worth
            .iter()
            .zip(&other.worth)
            .map(|(a, b)| alpha * a + beta * b)
            .collect();
        Game::new(self.n, worths)
    }

    /// Serializes to the line format: a `n_players=<n>` header followed by one
    /// `bitmask_hex value` line per coalition in ascending bitmask order.
    pub fn to_text(&self) -> String {
        let width = self.n.div_ceil(4).max(1);
        let mut out = format!("n_players={}\n", self.n);
        for (mask, w) in self.worth.iter().enumerate() {
            let _ = writeln!(out, "{mask:0width$x} {w}");
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Game, GameError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (hline, header) = lines.next().ok_or(GameError::Parse {
            line: 1,
            message: "missing `n_players=<n>` header".into(),
        })?;
        let n: usize = header
            .strip_prefix("n_players=")
            .and_then(|v| v.trim().parse().ok())
            .ok_or_else(|| GameError::Parse {
                line: hline,
                message: format!("expected `n_players=<n>`, found `{header}`"),
            })?;
        check_capacity(n, MAX_PLAYERS)?;
        let size = 1usize << n;
        let mut worths: Vec<Option<f64>> = vec![None; size];
        for (line, content) in lines {
            let parse_err = |message: String| GameError::Parse { line, message };
            let mut parts = content.split_whitespace();
            let (Some(mask), Some(value), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(parse_err(format!(
                    "expected `bitmask_hex value`, found `{content}`"
                )));
            };
            let digits = mask.trim_start_matches("0x");
            let mask = usize::from_str_radix(digits, 16)
                .map_err(|_| parse_err(format!("invalid hex bitmask `{mask}`")))?;
            if mask >= size {
                return Err(parse_err(format!(
                    "bitmask {mask:x} is outside a {n}-player game"
                )));
            }
            let value: f64 = value
                .parse()
                .map_err(|_| parse_err(format!("invalid worth `{value}`")))?;
            if worths[mask].replace(value).is_some() {
                return Err(parse_err(format!("coalition {mask:x} listed twice")));
            }
        }
        let worths = worths
            .into_iter()
            .enumerate()
            .map(|(mask, w)| w.ok_or(GameError::IncompleteTable(Coalition::from_bits(mask as u32))))
            .collect::<Result<Vec<_>, _>>()?;
        Game::new(n, worths)
    }
}

/// The unanimity game `u_T`: worth 1 for every coalition containing `t`, else 0.
pub fn unanimity_game(t: Coalition, n: usize) -> Result<Game, GameError> {
    if t.is_empty() {
        return Err(GameError::InvalidArgument(
            "unanimity game needs a nonempty carrier coalition".into(),
        ));
    }
    check_capacity(n, MAX_PLAYERS)?;
    if !t.is_subset_of(Coalition::grand(n)) {
        return Err(GameError::InvalidArgument(format!(
            "carrier {t} is not a subset of the {n} players"
        )));
    }
    Game::from_fn(n, |s| if t.is_subset_of(s) { 1.0 } else { 0.0 })
}

/// Harsanyi dividends indexed by coalition. Entries may be missing when the
/// table was assembled by hand; [`reconstruct_from_dividends`] rejects those.
#[derive(Clone, Debug, PartialEq)]
pub struct DividendTable {
    n: usize,
    entries: Vec<Option<f64>>,
}

impl DividendTable {
    pub fn from_entries<I>(n: usize, entries: I) -> Result<Self, GameError>
    where
        I: IntoIterator<Item = (Coalition, f64)>,
    {
        check_capacity(n, MAX_PLAYERS)?;
        let grand = Coalition::grand(n);
        let mut table = vec![None; 1 << n];
        for (t, d) in entries {
            if t.is_empty() || !t.is_subset_of(grand) {
                return Err(GameError::InvalidArgument(format!(
                    "dividend coalition {t} must be a nonempty subset of the {n} players"
                )));
            }
            table[t.index()] = Some(d);
        }
        Ok(DividendTable { n, entries: table })
    }

    pub fn n_players(&self) -> usize {
        self.n
    }

    pub fn get(&self, t: Coalition) -> Option<f64> {
        self.entries.get(t.index()).copied().flatten()
    }

    /// Present entries over nonempty coalitions, ascending by bitmask.
    pub fn iter(&self) -> impl Iterator<Item = (Coalition, f64)> + '_ {
        self.entries
            .iter()
            .enumerate()
            .skip(1)
            .filter_map(|(m, d)| d.map(|d| (Coalition::from_bits(m as u32), d)))
    }

    /// Same line format as [`Game::to_text`], nonempty coalitions only.
    pub fn to_text(&self) -> String {
        let width = self.n.div_ceil(4).max(1);
        let mut out = format!("n_players={}\n", self.n);
        for (t, d) in self.iter() {
            let _ = writeln!(out, "{:0width$x} {d}", t.bits());
        }
        out
    }
}

/// Möbius inversion of `v` over the subset lattice,
/// `Δ(T) = Σ_{S⊆T} (-1)^{|T|-|S|} v(S)`, computed in O(n·2^n) by sweeping one
/// player at a time.
pub fn harsanyi_dividends(g: &Game) -> DividendTable {
    let mut d = g.worth.clone();
    for i in 0..g.n {
        let bit = 1usize << i;
        for mask in 0..d.len() {
            if mask & bit != 0 {
                d[mask] -= d[mask ^ bit];
            }
        }
    }
    let entries = d
        .into_iter()
        .enumerate()
        .map(|(m, x)| (m != 0).then_some(x))
        .collect();
    DividendTable { n: g.n, entries }
}

/// `v(S) = Σ_{T⊆S, T≠∅} Δ(T)`.
pub fn reconstruct_from_dividends(d: &DividendTable) -> Result<Game, GameError> {
    let mut w = Vec::with_capacity(d.entries.len());
    w.push(0.0);
    for (mask, e) in d.entries.iter().enumerate().skip(1) {
        w.push(e.ok_or(GameError::IncompleteTable(Coalition::from_bits(mask as u32)))?);
    }
    for i in 0..d.n {
        let bit = 1usize << i;
        for mask in 0..w.len() {
            if mask & bit != 0 {
                w[mask] += w[mask ^ bit];
            }
        }
    }
    Game::new(d.n, w)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PropertyReport {
    pub monotonic: bool,
    pub zero_monotonic: bool,
    pub superadditive: bool,
    pub convex: bool,
    /// `v(S) >= 0` everywhere (the textbook domain), reported separately.
    pub non_negative: bool,
}

pub fn game_properties(g: &Game) -> PropertyReport {
    game_properties_with_tolerance(g, DEFAULT_TOLERANCE)
}

pub fn game_properties_with_tolerance(g: &Game, tol: f64) -> PropertyReport {
    let n = g.n;
    let grand = g.grand_coalition();
    let v = |s: Coalition| g.worth(s);

    // Monotonicity over all S ⊇ T reduces to single-player extensions.
    let mut monotonic = true;
    let mut zero_monotonic = true;
    for s in all_coalitions(n) {
        for i in grand.difference(s).members() {
            let si = v(s.with(i));
            monotonic &= si >= v(s) - tol;
            zero_monotonic &= si >= v(s) + v(Coalition::singleton(i)) - tol;
        }
    }

    let superadditive = (1..(1u32 << n)).into_par_iter().all(|sb| {
        let s = Coalition::from_bits(sb);
        grand
            .difference(s)
            .subsets()
            .skip(1)
            .all(|t| v(s.union(t)) >= v(s) + v(t) - tol)
    });

    // Supermodularity is equivalent to nonnegative second differences.
    let convex = all_coalitions(n).all(|s| {
        let outside: Vec<usize> = grand.difference(s).members().collect();
        outside.iter().enumerate().all(|(a, &i)| {
            outside[a + 1..].iter().all(|&j| {
                v(s.with(i).with(j)) - v(s.with(i)) - v(s.with(j)) + v(s) >= -tol
            })
        })
    });

    PropertyReport {
        monotonic,
        zero_monotonic,
        superadditive,
        convex,
        non_negative: g.worth.iter().all(|&w| w >= -tol),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PayoffVector(pub Vec<f64>);

impl PayoffVector {
    pub fn new(payoffs: Vec<f64>) -> Self {
        PayoffVector(payoffs)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }

    /// `x(S) = Σ_{i∈S} x_i`.
    pub fn coalition_total(&self, s: Coalition) -> f64 {
        s.members().map(|i| self.0[i]).sum()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for PayoffVector {
    fn from(v: Vec<f64>) -> Self {
        PayoffVector(v)
    }
}

fn check_dimension(g: &Game, x: &PayoffVector) -> Result<(), GameError> {
    if x.len() != g.n {
        return Err(GameError::DimensionMismatch {
            expected: g.n,
            got: x.len(),
        });
    }
    Ok(())
}

pub fn is_imputation(g: &Game, x: &PayoffVector) -> Result<bool, GameError> {
    is_imputation_with_tolerance(g, x, DEFAULT_TOLERANCE)
}

/// Efficient (`Σx_i = v(N)`) and individually rational (`x_i >= v({i})`).
pub fn is_imputation_with_tolerance(
    g: &Game,
    x: &PayoffVector,
    tol: f64,
) -> Result<bool, GameError> {
    check_dimension(g, x)?;
    let efficient = (x.total() - g.worth(g.grand_coalition())).abs() <= tol;
    let rational = x
        .0
        .iter()
        .enumerate()
        .all(|(i, &xi)| xi >= g.worth(Coalition::singleton(i)) - tol);
    Ok(efficient && rational)
}

pub fn in_core(g: &Game, x: &PayoffVector) -> Result<bool, GameError> {
    in_core_with_tolerance(g, x, DEFAULT_TOLERANCE)
}

/// Efficient and coalitionally rational: `x(S) >= v(S)` for every coalition.
pub fn in_core_with_tolerance(g: &Game, x: &PayoffVector, tol: f64) -> Result<bool, GameError> {
    check_dimension(g, x)?;
    if (x.total() - g.worth(g.grand_coalition())).abs() > tol {
        return Ok(false);
    }
    // x(S) for every S by peeling off the lowest member.
    let mut totals = vec![0.0; g.worth.len()];
    for mask in 1..totals.len() {
        let low = mask.trailing_zeros() as usize;
        totals[mask] = totals[mask & (mask - 1)] + x.0[low];
    }
    Ok(totals
        .iter()
        .zip(&g.worth)
        .all(|(xs, vs)| *xs >= vs - tol))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AxiomReport {
    /// `v(N) = Σ_{S⊆N} v(S)`, taken literally.
    pub efficiency_sum: bool,
    /// `v(S∪T) = v(S) + v(T)` for all disjoint `S`, `T`.
    pub additivity: bool,
}

pub fn check_value_axioms(g: &Game) -> AxiomReport {
    check_value_axioms_with_tolerance(g, DEFAULT_TOLERANCE)
}

pub fn check_value_axioms_with_tolerance(g: &Game, tol: f64) -> AxiomReport {
    let grand = g.grand_coalition();
    let total: f64 = g.worth.iter().sum();
    let efficiency_sum = (g.worth(grand) - total).abs() <= tol;
    let additivity = (1..(1u32 << g.n)).into_par_iter().all(|sb| {
        let s = Coalition::from_bits(sb);
        grand
            .difference(s)
            .subsets()
            .skip(1)
            .all(|t| (g.worth(s.union(t)) - g.worth(s) - g.worth(t)).abs() <= tol)
    });
    AxiomReport {
        efficiency_sum,
        additivity,
    }
}
