use rayon::prelude::*;

use crate::nn::{sq_dist, Matrix};

/// For each query row index, the `k` nearest rows among `candidates`
/// (Euclidean), excluding the query row itself. Ties break toward the lower
/// row index. Fewer than `k` are returned when there are not enough
/// candidates.
pub fn nearest_neighbors(data: &Matrix, queries: &[usize], candidates: &[usize], k: usize) -> Vec<Vec<usize>> {
    queries
        .par_iter()
        .map(|&q| {
            let qrow = data.row(q);
            let mut scored: Vec<(f64, usize)> = candidates
                .iter()
                .filter(|&&c| c != q)
                .map(|&c| (sq_dist(qrow, data.row(c)), c))
                .collect();
            let take = k.min(scored.len());
            if take == 0 {
                return Vec::new();
            }
            let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
            if take < scored.len() {
                scored.select_nth_unstable_by(take - 1, cmp);
                scored.truncate(take);
            }
            scored.sort_unstable_by(cmp);
            scored.into_iter().map(|(_, c)| c).collect()
        })
        .collect()
}
