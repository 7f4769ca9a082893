use std::fs;
use std::io::{self, Read};
use std::path::PathBuf;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Subcommand};

use ciu_core::coalition::Coalition;
use ciu_core::game::{
    check_value_axioms, game_properties, harsanyi_dividends, in_core, is_imputation, unanimity_game, Game, PayoffVector,
};
use ciu_core::levels::{induced_game, Partition};
use ciu_core::shapley::exact_shapley_game;

#[derive(Subcommand)]
pub enum GameCommand {
    /// Harsanyi dividend of every nonempty coalition.
    Dividends(GameInput),
    /// Monotonicity, superadditivity, convexity and related flags.
    Properties(GameInput),
    /// Exact Shapley value of each player.
    Shapley(GameInput),
    /// Whether a payoff vector is an imputation and lies in the core.
    Core {
        #[command(flatten)]
        game: GameInput,
        /// Comma-separated payoff per player.
        #[arg(long)]
        payoff: String,
    },
    /// Additivity and the literal grand-coalition sum check.
    Axioms(GameInput),
    /// Game whose players are the blocks of a partition.
    Induced {
        #[command(flatten)]
        game: GameInput,
        /// Blocks of 0-based players, e.g. `0,1;2`.
        #[arg(long)]
        partition: String,
    },
    /// Print the unanimity game of a coalition.
    Unanimity {
        /// 0-based members, e.g. `0,2`.
        #[arg(long)]
        players: String,
        #[arg(long)]
        n: usize,
    },
}

#[derive(Args)]
pub struct GameInput {
    /// Game file; `-` reads standard input.
    #[arg(long = "in")]
    input: PathBuf,
}

impl GameInput {
    fn load(&self) -> Result<Game> {
        let text = if self.input.as_os_str() == "-" {
            let mut s = String::new();
            io::stdin().read_to_string(&mut s)?;
            s
        } else {
            fs::read_to_string(&self.input).with_context(|| format!("cannot read `{}`", self.input.display()))?
        };
        Game::from_text(&text).with_context(|| format!("in game file `{}`", self.input.display()))
    }
}

fn indices(spec: &str) -> Result<Vec<usize>> {
    spec.split(',')
        .map(|p| p.trim().parse::<usize>().map_err(|_| anyhow!("expected player indices, got `{spec}`")))
        .collect()
}

pub fn run(c: GameCommand) -> Result<()> {
    match c {
        GameCommand::Dividends(i) => print!("{}", harsanyi_dividends(&i.load()?).to_text()),
        GameCommand::Properties(i) => {
            let r = game_properties(&i.load()?);
            println!("monotonic: {}", r.monotonic);
            println!("zero_monotonic: {}", r.zero_monotonic);
            println!("superadditive: {}", r.superadditive);
            println!("convex: {}", r.convex);
            println!("non_negative: {}", r.non_negative);
        }
        GameCommand::Shapley(i) => {
            for (player, v) in exact_shapley_game(&i.load()?)?.as_slice().iter().enumerate() {
                println!("{player} {v}");
            }
        }
        GameCommand::Core { game, payoff } => {
            let g = game.load()?;
            let values = payoff
                .split(',')
                .map(|v| v.trim().parse::<f64>().map_err(|_| anyhow!("expected numbers, got `{payoff}`")))
                .collect::<Result<Vec<_>>>()?;
            let x = PayoffVector::new(values);
            println!("imputation: {}", is_imputation(&g, &x)?);
            println!("core: {}", in_core(&g, &x)?);
        }
        GameCommand::Axioms(i) => {
            let r = check_value_axioms(&i.load()?);
            println!("efficiency_sum: {}", r.efficiency_sum);
            println!("additivity: {}", r.additivity);
        }
        GameCommand::Induced { game, partition } => {
            let g = game.load()?;
            let blocks = partition.split(';').map(indices).collect::<Result<Vec<_>>>()?;
            let p = Partition::from_indices(g.n_players(), &blocks)?;
            print!("{}", induced_game(&g, &p)?.to_text());
        }
        GameCommand::Unanimity { players, n } => {
            let t: Coalition = indices(&players)?.into_iter().collect();
            print!("{}", unanimity_game(t, n)?.to_text());
        }
    }
    Ok(())
}
