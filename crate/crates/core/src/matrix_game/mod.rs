//! Finite two-player zero-sum games in mixed strategies.
//!
//! Convention throughout: rows are the generator's pure strategies, columns
//! the classifier's, and `entry(i, j)` is the *column* player's payoff
//! `u_C(i, j)`. The row player receives the negation, so the row player
//! minimizes the entries and the column player maximizes them.
//!
//! All ties are broken towards the lowest index.

mod csv;
mod simplex;

use std::fmt;

pub use self::csv::{parse_csv, read_csv, to_csv_string, write_csv, CSV_CONVENTION};

const PROB_SUM_TOL: f64 = 1e-12;

/// Default solver tolerance for exactly known payoffs.
pub const EXACT_TOL: f64 = 1e-9;
/// Default solver tolerance for payoffs estimated by simulation.
pub const SIMULATED_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GameError {
    #[error("payoff matrix must have at least one row and one column")]
    Empty,
    #[error("payoff matrix row {row} has {got} entries, expected {expected}")]
    Ragged {
        row: usize,
        got: usize,
        expected: usize,
    },
    #[error("payoff entry ({row}, {col}) is not finite")]
    NonFinite { row: usize, col: usize },
    #[error("{which} mixed strategy has length {got}, expected {expected}")]
    DimensionMismatch {
        which: &'static str,
        got: usize,
        expected: usize,
    },
    #[error("invalid mixed strategy: {0}")]
    InvalidMix(String),
    #[error("{what} index {index} out of range (size {size})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        size: usize,
    },
    #[error("tolerance must be positive, got {0}")]
    BadTolerance(f64),
    #[error("zero-sum solver stopped at exploitability {achieved:e} (target {target:e})")]
    SolverTolerance { achieved: f64, target: f64 },
}

/// Which side of the matrix a player controls.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Player {
    /// The generator; payoff is `-entry`.
    Row,
    /// The classifier; payoff is `entry`.
    Column,
}

/// Dense zero-sum payoff matrix holding the column player's payoffs.
#[derive(Debug, Clone, PartialEq)]
pub struct PayoffMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl PayoffMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self, GameError> {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        if n == 0 || m == 0 {
            return Err(GameError::Empty);
        }
        let mut data = Vec::with_capacity(n * m);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != m {
                return Err(GameError::Ragged {
                    row: i,
                    got: row.len(),
                    expected: m,
                });
            }
            data.extend(row);
        }
        Self::from_flat(n, m, data)
    }

    pub fn from_flat(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, GameError> {
        if rows == 0 || cols == 0 {
            return Err(GameError::Empty);
        }
        if data.len() != rows * cols {
            return Err(GameError::Ragged {
                row: data.len() / cols,
                got: data.len() % cols,
                expected: cols,
            });
        }
        if let Some(k) = data.iter().position(|v| !v.is_finite()) {
            return Err(GameError::NonFinite {
                row: k / cols,
                col: k % cols,
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self, GameError> {
        let data = (0..rows * cols).map(|k| f(k / cols, k % cols)).collect();
        Self::from_flat(rows, cols, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn entry(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.cols..(row + 1) * self.cols]
    }

    pub fn column(&self, col: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.entry(i, col)).collect()
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    /// The same game with the players swapped: `-Mᵀ`.
    pub fn swap_players(&self) -> Self {
        let data = (0..self.rows * self.cols)
            .map(|k| -self.entry(k % self.rows, k / self.rows))
            .collect();
        Self {
            rows: self.cols,
            cols: self.rows,
            data,
        }
    }

    /// Grows the matrix by one row and one column.
    ///
    /// `new_row` holds the new row against every column including the new one
    /// (length `cols + 1`); `new_col` holds the existing rows against the new
    /// column (length `rows`).
    pub fn augment(&mut self, new_row: Option<&[f64]>, new_col: Option<&[f64]>) -> Result<(), GameError> {
        let rows = self.rows;
        let cols = self.cols;
        let new_cols = cols + usize::from(new_col.is_some());
        if let Some(c) = new_col {
            if c.len() != rows {
                return Err(GameError::Ragged {
                    row: rows,
                    got: c.len(),
                    expected: rows,
                });
            }
        }
        if let Some(r) = new_row {
            if r.len() != new_cols {
                return Err(GameError::Ragged {
                    row: rows,
                    got: r.len(),
                    expected: new_cols,
                });
            }
        }
        let extra = new_col.into_iter().flatten().chain(new_row.into_iter().flatten());
        if extra.clone().any(|v| !v.is_finite()) {
            return Err(GameError::NonFinite { row: rows, col: cols });
        }

        let mut data = Vec::with_capacity((rows + 1) * new_cols);
        for i in 0..rows {
            data.extend_from_slice(self.row(i));
            if let Some(c) = new_col {
                data.push(c[i]);
            }
        }
        if let Some(r) = new_row {
            data.extend_from_slice(r);
        }
        self.rows = rows + usize::from(new_row.is_some());
        self.cols = new_cols;
        self.data = data;
        Ok(())
    }
}

impl fmt::Display for PayoffMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.rows {
            let cells: Vec<String> = self.row(i).iter().map(|v| format!("{v:>10.4}")).collect();
            writeln!(f, "{}", cells.join(" "))?;
        }
        Ok(())
    }
}

/// A probability vector over a player's pure strategies.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedStrategy {
    probs: Vec<f64>,
}

impl MixedStrategy {
    pub fn new(probs: Vec<f64>) -> Result<Self, GameError> {
        if probs.is_empty() {
            return Err(GameError::InvalidMix("empty probability vector".into()));
        }
        if let Some(p) = probs.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
            return Err(GameError::InvalidMix(format!("entry {p} is not a probability")));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > PROB_SUM_TOL {
            return Err(GameError::InvalidMix(format!("entries sum to {sum}")));
        }
        Ok(Self { probs })
    }

    /// Scales non-negative weights to sum to one.
    pub fn normalized(weights: Vec<f64>) -> Result<Self, GameError> {
        let clean: Vec<f64> = weights.iter().map(|w| if *w > 0.0 { *w } else { 0.0 }).collect();
        let sum: f64 = clean.iter().sum();
        if !(sum > 0.0 && sum.is_finite()) {
            return Err(GameError::InvalidMix("weights have no positive mass".into()));
        }
        Self::new(clean.into_iter().map(|w| w / sum).collect())
    }

    pub fn pure(n: usize, index: usize) -> Self {
        assert!(index < n, "pure strategy {index} out of range {n}");
        let mut probs = vec![0.0; n];
        probs[index] = 1.0;
        Self { probs }
    }

    pub fn uniform(n: usize) -> Self {
        assert!(n > 0);
        Self {
            probs: vec![1.0 / n as f64; n],
        }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Indices with positive probability.
    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.probs.iter().enumerate().filter(|(_, p)| **p > 0.0).map(|(i, _)| i)
    }

    /// Same distribution over a strategy list that grew by `extra` entries.
    pub fn extended(&self, extra: usize) -> Self {
        let mut probs = self.probs.clone();
        probs.resize(probs.len() + extra, 0.0);
        Self { probs }
    }
}

/// Equilibrium of a zero-sum matrix game.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub row_mix: MixedStrategy,
    pub col_mix: MixedStrategy,
    /// Game value from the column player's perspective.
    pub value: f64,
    pub exploitability: f64,
}

fn check_dims(matrix: &PayoffMatrix, row_mix: &MixedStrategy, col_mix: &MixedStrategy) -> Result<(), GameError> {
    if row_mix.len() != matrix.rows() {
        return Err(GameError::DimensionMismatch {
            which: "row",
            got: row_mix.len(),
            expected: matrix.rows(),
        });
    }
    if col_mix.len() != matrix.cols() {
        return Err(GameError::DimensionMismatch {
            which: "column",
            got: col_mix.len(),
            expected: matrix.cols(),
        });
    }
    Ok(())
}

/// `M y`: column player's payoff of each row against `col_mix`.
fn row_payoffs_vs(matrix: &PayoffMatrix, col_mix: &MixedStrategy) -> Vec<f64> {
    (0..matrix.rows())
        .map(|i| matrix.row(i).iter().zip(col_mix.probs()).map(|(a, q)| a * q).sum())
        .collect()
}

/// `xᵀ M`: column player's payoff of each column against `row_mix`.
fn col_payoffs_vs(matrix: &PayoffMatrix, row_mix: &MixedStrategy) -> Vec<f64> {
    let mut out = vec![0.0; matrix.cols()];
    for (i, p) in row_mix.probs().iter().enumerate() {
        if *p == 0.0 {
            continue;
        }
        for (o, a) in out.iter_mut().zip(matrix.row(i)) {
            *o += p * a;
        }
    }
    out
}

/// First index of the maximum.
fn argmax(values: &[f64]) -> (usize, f64) {
    let mut best = (0, values[0]);
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > best.1 {
            best = (i, *v);
        }
    }
    best
}

/// Column player's expected payoff `Σ_i Σ_j x_i y_j M_ij`.
pub fn expected_payoff(matrix: &PayoffMatrix, row_mix: &MixedStrategy, col_mix: &MixedStrategy) -> Result<f64, GameError> {
    check_dims(matrix, row_mix, col_mix)?;
    Ok(row_payoffs_vs(matrix, col_mix)
        .iter()
        .zip(row_mix.probs())
        .map(|(v, p)| v * p)
        .sum())
}

/// Pure best response of `player` against the opponent's mix, with that
/// player's own payoff. Lowest index wins ties.
pub fn best_response(matrix: &PayoffMatrix, opponent_mix: &MixedStrategy, player: Player) -> Result<(usize, f64), GameError> {
    match player {
        Player::Row => {
            if opponent_mix.len() != matrix.cols() {
                return Err(GameError::DimensionMismatch {
                    which: "column",
                    got: opponent_mix.len(),
                    expected: matrix.cols(),
                });
            }
            let payoffs: Vec<f64> = row_payoffs_vs(matrix, opponent_mix).into_iter().map(|v| -v).collect();
            Ok(argmax(&payoffs))
        }
        Player::Column => {
            if opponent_mix.len() != matrix.rows() {
                return Err(GameError::DimensionMismatch {
                    which: "row",
                    got: opponent_mix.len(),
                    expected: matrix.rows(),
                });
            }
            Ok(argmax(&col_payoffs_vs(matrix, opponent_mix)))
        }
    }
}

/// Best-response gains `(row, column)`; each is the most a player can add to
/// its own payoff by a unilateral deviation.
pub fn deviation_gains(matrix: &PayoffMatrix, row_mix: &MixedStrategy, col_mix: &MixedStrategy) -> Result<(f64, f64), GameError> {
    check_dims(matrix, row_mix, col_mix)?;
    let v = expected_payoff(matrix, row_mix, col_mix)?;
    let (_, row_br) = best_response(matrix, col_mix, Player::Row)?;
    let (_, col_br) = best_response(matrix, row_mix, Player::Column)?;
    Ok((row_br + v, col_br - v))
}

/// Sum of both players' best-response gains; zero exactly at an equilibrium.
pub fn exploitability(matrix: &PayoffMatrix, row_mix: &MixedStrategy, col_mix: &MixedStrategy) -> Result<f64, GameError> {
    let (g_row, g_col) = deviation_gains(matrix, row_mix, col_mix)?;
    Ok((g_row + g_col).max(0.0))
}

/// True iff neither player can gain more than `eps` by deviating.
pub fn epsilon_ne_check(matrix: &PayoffMatrix, row_mix: &MixedStrategy, col_mix: &MixedStrategy, eps: f64) -> Result<bool, GameError> {
    let (g_row, g_col) = deviation_gains(matrix, row_mix, col_mix)?;
    Ok(g_row <= eps && g_col <= eps)
}

/// Adds `c` to the row player's payoff against pure column `col`.
///
/// Under the `u_C` storage convention this subtracts `c` from that column.
/// The result is a strategically equivalent game for the row player but no
/// longer zero-sum as a bimatrix; use it only to reason about row best
/// responses.
pub fn column_constant_shift(matrix: &PayoffMatrix, col: usize, c: f64) -> Result<PayoffMatrix, GameError> {
    if col >= matrix.cols() {
        return Err(GameError::IndexOutOfRange {
            what: "column",
            index: col,
            size: matrix.cols(),
        });
    }
    let mut out = matrix.clone();
    for i in 0..out.rows {
        out.data[i * out.cols + col] -= c;
    }
    Ok(out)
}

/// Solves the zero-sum game exactly by linear programming and verifies the
/// returned profile is a `tol`-equilibrium.
pub fn solve_zero_sum(matrix: &PayoffMatrix, tol: f64) -> Result<SolveResult, GameError> {
    if !(tol > 0.0) {
        return Err(GameError::BadTolerance(tol));
    }
    let (row_w, col_w) = simplex::minimax(matrix)?;
    let row_mix = MixedStrategy::normalized(row_w)?;
    let col_mix = MixedStrategy::normalized(col_w)?;
    let value = expected_payoff(matrix, &row_mix, &col_mix)?;
    let exploitability = exploitability(matrix, &row_mix, &col_mix)?;
    if exploitability > tol {
        return Err(GameError::SolverTolerance {
            achieved: exploitability,
            target: tol,
        });
    }
    Ok(SolveResult {
        row_mix,
        col_mix,
        value,
        exploitability,
    })
}
