//! Dense tableau simplex for the minimax LP.
//!
//! After scaling to unit magnitude and shifting every entry to at least 1,
//! the row player's problem becomes
//!
//! ```text
//! maximize  Σ p_i   subject to   Σ_i A'_ij p_i ≤ 1  (every column j),  p ≥ 0
//! ```
//!
//! whose slack basis is feasible from the start. The optimal dual prices of
//! the column constraints give the column player's strategy. Both scale to
//! mixed strategies by dividing by the objective value.

use super::{GameError, PayoffMatrix};

const PIVOT_EPS: f64 = 1e-11;
const COST_EPS: f64 = 1e-12;

/// Returns unnormalized `(row, column)` equilibrium weights.
pub(super) fn minimax(matrix: &PayoffMatrix) -> Result<(Vec<f64>, Vec<f64>), GameError> {
    let n = matrix.rows();
    let m = matrix.cols();
    let scale = matrix.as_flat().iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let scale = if scale > 0.0 { scale } else { 1.0 };
    let min = matrix.as_flat().iter().fold(f64::INFINITY, |a, v| a.min(v / scale));
    let shift = 1.0 - min;

    // Constraint rows are the m columns of the game; variables are the n
    // row-player weights followed by m slacks; last entry is the RHS.
    let width = n + m + 1;
    let mut t = vec![0.0; (m + 1) * width];
    for j in 0..m {
        let r = &mut t[j * width..(j + 1) * width];
        for i in 0..n {
            r[i] = matrix.entry(i, j) / scale + shift;
        }
        r[n + j] = 1.0;
        r[width - 1] = 1.0;
    }
    let obj = m * width;
    for i in 0..n {
        t[obj + i] = -1.0;
    }
    let mut basis: Vec<usize> = (n..n + m).collect();

    let budget = 50 * (n + m) + 1000;
    let mut degenerate_run = 0usize;
    let mut pivots = 0usize;
    loop {
        // Dantzig's rule, switching to Bland's rule during long degenerate
        // stretches so the method cannot cycle.
        let bland = degenerate_run > n + m;
        let entering = if bland {
            (0..n + m).find(|&k| t[obj + k] < -COST_EPS)
        } else {
            let mut best: Option<(usize, f64)> = None;
            for k in 0..n + m {
                let c = t[obj + k];
                if c < -COST_EPS && best.is_none_or(|(_, b)| c < b) {
                    best = Some((k, c));
                }
            }
            best.map(|(k, _)| k)
        };
        let Some(col) = entering else { break };

        let mut leave: Option<(usize, f64)> = None;
        for j in 0..m {
            let a = t[j * width + col];
            if a > PIVOT_EPS {
                let ratio = t[j * width + width - 1] / a;
                let better = match leave {
                    None => true,
                    Some((lj, lr)) => ratio < lr || (ratio == lr && basis[j] < basis[lj]),
                };
                if better {
                    leave = Some((j, ratio));
                }
            }
        }
        // The feasible region is bounded (every coefficient is ≥ 1), so a
        // missing leaving row only happens through round-off.
        let Some((prow, ratio)) = leave else { break };
        degenerate_run = if ratio <= 0.0 { degenerate_run + 1 } else { 0 };

        pivot(&mut t, width, prow, col);
        basis[prow] = col;
        pivots += 1;
        if pivots > budget {
            break;
        }
    }

    let mut p = vec![0.0; n];
    for (j, &b) in basis.iter().enumerate() {
        if b < n {
            p[b] = t[j * width + width - 1].max(0.0);
        }
    }
    let q: Vec<f64> = (0..m).map(|j| t[obj + n + j].max(0.0)).collect();
    if p.iter().all(|v| *v == 0.0) || q.iter().all(|v| *v == 0.0) {
        return Err(GameError::SolverTolerance {
            achieved: f64::INFINITY,
            target: 0.0,
        });
    }
    Ok((p, q))
}

fn pivot(t: &mut [f64], width: usize, prow: usize, pcol: usize) {
    let inv = 1.0 / t[prow * width + pcol];
    for v in &mut t[prow * width..(prow + 1) * width] {
        *v *= inv;
    }
    t[prow * width + pcol] = 1.0;
    let (head, rest) = t.split_at_mut(prow * width);
    let (prow_slice, tail) = rest.split_at_mut(width);
    for r in head.chunks_exact_mut(width).chain(tail.chunks_exact_mut(width)) {
        let f = r[pcol];
        if f != 0.0 {
            for (x, p) in r.iter_mut().zip(prow_slice.iter()) {
                *x -= f * p;
            }
            r[pcol] = 0.0;
        }
    }
}
