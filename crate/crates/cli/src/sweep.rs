//! The algorithm × notation × depth × token-set grid.

use std::io::Write;
use std::path::PathBuf;

use clap::Args;
use padesr_core::expr::{Notation, TokenSet};
use padesr_core::pde::{build_case, CaseData, CaseId, ObjectiveConfig};
use padesr_core::search::{run_search, Algorithm, SearchConfig};

use crate::report::format_g6;
use crate::{time_budget, CliError, ObjectiveArgs};

pub const HEADER: [&str; 7] =
    ["#", "Algorithm", "Depth", "Notation", "MSE", "Non-Optimizable Tokens", "Optimizable Token"];

pub const TOKEN_SETS: [TokenSet; 3] = [TokenSet::Vars, TokenSet::VarsConst, TokenSet::VarsConstOpt];

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long, default_value = "case1")]
    pub case: CaseId,
    /// Search time per configuration, in seconds.
    #[arg(long, default_value_t = 5.0)]
    pub time_per_config: f64,
    /// CSV destination; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub algos: Vec<Algorithm>,
    /// Inclusive depth range `lo..hi` or a single depth.
    #[arg(long, default_value = "1..30", value_parser = parse_depths)]
    pub depths: (usize, usize),
    #[arg(long, value_delimiter = ',')]
    pub notations: Vec<Notation>,
    #[arg(long, value_delimiter = ',')]
    pub token_sets: Vec<TokenSet>,
    #[arg(long, env = "PADESR_THREADS", default_value_t = 1)]
    pub threads: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Per-configuration evaluation cap (makes single-threaded sweeps reproducible).
    #[arg(long)]
    pub max_evals: Option<u64>,
    #[command(flatten)]
    pub objective: ObjectiveArgs,
}

pub fn parse_depths(s: &str) -> Result<(usize, usize), String> {
    let bad = || format!("depths '{s}' must be lo..hi or a single integer");
    let (lo, hi) = match s.split_once("..") {
        Some((a, b)) => (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?),
        None => {
            let d = s.trim().parse().map_err(|_| bad())?;
            (d, d)
        }
    };
    if lo > hi {
        return Err(format!("depths '{s}' is an empty range"));
    }
    Ok((lo, hi))
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub algorithm: Algorithm,
    pub depth: usize,
    pub notation: Notation,
    pub token_set: TokenSet,
    pub mse: f64,
}

impl SweepRow {
    pub fn record(&self, rank: usize) -> [String; 7] {
        let flag = |b: bool| if b { "True" } else { "False" }.to_string();
        [
            rank.to_string(),
            self.algorithm.title().to_string(),
            self.depth.to_string(),
            self.notation.name().to_string(),
            format_g6(self.mse),
            flag(self.token_set.non_optimizable()),
            flag(self.token_set.optimizable()),
        ]
    }
}

/// Every configuration of the filtered grid, in a fixed order.
pub fn grid(
    algos: &[Algorithm],
    depths: (usize, usize),
    notations: &[Notation],
    token_sets: &[TokenSet],
) -> Vec<(Algorithm, usize, Notation, TokenSet)> {
    let mut out = Vec::new();
    for &a in algos {
        for &n in notations {
            for d in depths.0..=depths.1 {
                for &t in token_sets {
                    out.push((a, d, n, t));
                }
            }
        }
    }
    out
}

pub struct SweepPlan {
    pub configs: Vec<SearchConfig>,
}

impl SweepPlan {
    pub fn run(&self, data: &CaseData, mut progress: impl FnMut(usize, &SweepRow)) -> Vec<SweepRow> {
        let mut rows: Vec<SweepRow> = self
            .configs
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let r = run_search(c, data);
                let row = SweepRow {
                    algorithm: c.algorithm,
                    depth: c.depth,
                    notation: c.notation,
                    token_set: c.token_set,
                    mse: r.best_mse(),
                };
                progress(i, &row);
                row
            })
            .collect();
        rows.sort_by(|a, b| a.mse.total_cmp(&b.mse));
        rows
    }
}

pub fn write_csv<W: Write>(rows: &[SweepRow], w: W) -> csv::Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(HEADER)?;
    for (i, row) in rows.iter().enumerate() {
        wtr.write_record(row.record(i + 1))?;
    }
    wtr.flush()?;
    Ok(())
}

fn or_all<T: Copy>(given: &[T], all: &[T]) -> Vec<T> {
    if given.is_empty() {
        all.to_vec()
    } else {
        given.to_vec()
    }
}

pub fn plan(a: &SweepArgs, objective: ObjectiveConfig) -> Result<SweepPlan, CliError> {
    if a.threads == 0 {
        return Err(CliError::Usage("--threads must be at least 1".into()));
    }
    let budget = time_budget(a.time_per_config, "--time-per-config")?;
    let algos = or_all(&a.algos, &Algorithm::ALL);
    let notations = or_all(&a.notations, &[Notation::Prefix, Notation::Postfix]);
    let token_sets = or_all(&a.token_sets, &TOKEN_SETS);
    let configs = grid(&algos, a.depths, &notations, &token_sets)
        .into_iter()
        .map(|(alg, d, n, t)| {
            let mut c = SearchConfig::new(alg, d, n, t);
            c.threads = a.threads;
            c.time_budget = budget;
            c.seed = a.seed;
            c.max_evals = a.max_evals;
            c.objective = objective;
            c
        })
        .collect();
    Ok(SweepPlan { configs })
}

pub fn cmd_sweep(a: SweepArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    let objective = a.objective.config()?;
    let plan = plan(&a, objective)?;
    let data = build_case(a.case, &objective);
    let total = plan.configs.len();
    let rows = plan.run(&data, |i, row| {
        let _ = writeln!(
            err,
            "[{}/{total}] {} depth={} {} {} mse={}",
            i + 1,
            row.algorithm.name(),
            row.depth,
            row.notation.name(),
            row.token_set.name(),
            format_g6(row.mse)
        );
    });
    let io = |path: &PathBuf, e: csv::Error| CliError::Io {
        path: path.display().to_string(),
        source: std::io::Error::other(e),
    };
    match &a.out {
        Some(path) => {
            let f = std::fs::File::create(path)
                .map_err(|source| CliError::Io { path: path.display().to_string(), source })?;
            write_csv(&rows, std::io::BufWriter::new(f)).map_err(|e| io(path, e))?;
            let _ = writeln!(out, "rows={} out={}", rows.len(), path.display());
        }
        None => write_csv(&rows, out).map_err(|e| io(&PathBuf::from("-"), e))?,
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_grid_has_1080_configurations() {
        let g = grid(&Algorithm::ALL, (1, 30), &[Notation::Prefix, Notation::Postfix], &TOKEN_SETS);
        assert_eq!(g.len(), 6 * 2 * 30 * 3);
    }

    #[test]
    fn depth_ranges() {
        assert_eq!(parse_depths("1..2"), Ok((1, 2)));
        assert_eq!(parse_depths("7"), Ok((7, 7)));
        assert!(parse_depths("3..1").is_err());
        assert!(parse_depths("a..b").is_err());
    }

    #[test]
    fn row_rendering() {
        let row = SweepRow {
            algorithm: Algorithm::Sa,
            depth: 12,
            notation: Notation::Postfix,
            token_set: TokenSet::Vars,
            mse: 2.51211,
        };
        assert_eq!(
            row.record(5),
            ["5", "Simulated Annealing", "12", "postfix", "2.51211", "False", "False"].map(String::from)
        );
    }
}
