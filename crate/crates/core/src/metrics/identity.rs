//! Identity-level precision and recall.
//!
//! True and computed identities are paired one-to-one so that the number
//! of correctly identified detections is as large as possible; precision,
//! recall and F1 all follow from that single matching. A detection is
//! correctly identified when its identity's partner has a box in the same
//! camera-frame overlapping at IoU >= 0.5.

use std::collections::BTreeMap;

use crate::assoc::iou;
use crate::error::Result;

use super::{GroundTruthLog, HypothesisLog};

/// Identification precision, recall and F-score with their raw counts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdMeasures {
    pub idp: f64,
    pub idr: f64,
    pub idf1: f64,
    pub idtp: usize,
    pub idfp: usize,
    pub idfn: usize,
}

pub fn id_measures(gt: &GroundTruthLog, hyp: &HypothesisLog) -> Result<IdMeasures> {
    let mut gt_rows: BTreeMap<usize, usize> = BTreeMap::new();
    let mut hyp_cols: BTreeMap<usize, usize> = BTreeMap::new();
    for boxes in gt.frames.values() {
        for (identity, _) in boxes {
            let next = gt_rows.len();
            gt_rows.entry(*identity).or_insert(next);
        }
    }
    for boxes in hyp.frames.values() {
        for (identity, _) in boxes {
            let next = hyp_cols.len();
            hyp_cols.entry(*identity).or_insert(next);
        }
    }

    // weight[g][h] = camera-frames where g's box and h's box overlap
    let mut weight = vec![vec![0u64; hyp_cols.len()]; gt_rows.len()];
    for (key, gt_boxes) in &gt.frames {
        let Some(hyp_boxes) = hyp.frames.get(key) else { continue };
        for (g, gb) in gt_boxes {
            for (h, hb) in hyp_boxes {
                if iou(gb, hb)? >= 0.5 {
                    weight[gt_rows[g]][hyp_cols[h]] += 1;
                }
            }
        }
    }

    let idtp = optimal_identity_match(&weight) as usize;
    let gt_total = gt.total_detections();
    let hyp_total = hyp.total_detections();
    let idfp = hyp_total - idtp;
    let idfn = gt_total - idtp;
    let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    Ok(IdMeasures {
        idp: ratio(idtp, hyp_total),
        idr: ratio(idtp, gt_total),
        idf1: ratio(2 * idtp, gt_total + hyp_total),
        idtp,
        idfp,
        idfn,
    })
}

const EXHAUSTIVE_LIMIT: usize = 6;

/// Maximum-weight one-to-one pairing of truth rows with hypothesis
/// columns. Small instances are settled by trying every bijection, larger
/// ones by an augmenting-path assignment solver; both are exact.
fn optimal_identity_match(weight: &[Vec<u64>]) -> u64 {
    let rows = weight.len();
    let cols = weight.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 {
        return 0;
    }
    let n = rows.max(cols);
    let mut square = vec![vec![0u64; n]; n];
    for (r, row) in weight.iter().enumerate() {
        square[r][..cols].copy_from_slice(row);
    }
    if n <= EXHAUSTIVE_LIMIT {
        best_bijection(&square)
    } else {
        assignment(&square)
    }
}

fn best_bijection(square: &[Vec<u64>]) -> u64 {
    fn go(square: &[Vec<u64>], row: usize, used: &mut [bool], acc: u64, best: &mut u64) {
        if row == square.len() {
            *best = (*best).max(acc);
            return;
        }
        for col in 0..square.len() {
            if !used[col] {
                used[col] = true;
                go(square, row + 1, used, acc + square[row][col], best);
                used[col] = false;
            }
        }
    }
    let mut best = 0;
    let mut used = vec![false; square.len()];
    go(square, 0, &mut used, 0, &mut best);
    best
}

/// Optimal assignment on a square matrix via shortest augmenting paths
/// with row and column potentials, cubic in the side length. Runs as a
/// minimizer over negated weights.
fn assignment(square: &[Vec<u64>]) -> u64 {
    let n = square.len();
    let cost: Vec<Vec<i64>> =
        square.iter().map(|row| row.iter().map(|&w| -(w as i64)).collect()).collect();

    // one-based with column 0 as the staging slot for the row being placed
    let mut row_potential = vec![0i64; n + 1];
    let mut col_potential = vec![0i64; n + 1];
    let mut row_of_col = vec![0usize; n + 1];
    let mut prev_col = vec![0usize; n + 1];
    for row in 1..=n {
        row_of_col[0] = row;
        let mut j0 = 0usize;
        let mut min_slack = vec![i64::MAX; n + 1];
        let mut visited = vec![false; n + 1];
        loop {
            visited[j0] = true;
            let i0 = row_of_col[j0];
            let mut delta = i64::MAX;
            let mut j1 = 0usize;
            for j in 1..=n {
                if visited[j] {
                    continue;
                }
                let slack = cost[i0 - 1][j - 1] - row_potential[i0] - col_potential[j];
                if slack < min_slack[j] {
                    min_slack[j] = slack;
                    prev_col[j] = j0;
                }
                if min_slack[j] < delta {
                    delta = min_slack[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if visited[j] {
                    row_potential[row_of_col[j]] += delta;
                    col_potential[j] -= delta;
                } else {
                    min_slack[j] -= delta;
                }
            }
            j0 = j1;
            if row_of_col[j0] == 0 {
                break;
            }
        }
        while j0 != 0 {
            let j1 = prev_col[j0];
            row_of_col[j0] = row_of_col[j1];
            j0 = j1;
        }
    }
    (1..=n).map(|j| square[row_of_col[j] - 1][j - 1]).sum()
}
