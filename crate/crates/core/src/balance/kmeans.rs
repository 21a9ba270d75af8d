use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::nn::{sq_dist, Matrix};
use crate::seed::SeededRng;

#[derive(Clone, Debug, PartialEq)]
pub struct KMeansResult {
    pub centers: Matrix,
    pub assignment: Vec<usize>,
    pub iterations: usize,
}

fn nearest_center(row: &[f64], centers: &Matrix) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centers.iter_rows().enumerate() {
        let d = sq_dist(row, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

/// Lloyd's algorithm with k-means++ seeding. Stops when assignments stop
/// changing or after `max_iter` rounds. `k` is capped at the number of
/// distinct rows that seeding can reach; an emptied cluster keeps its
/// previous center.
pub fn kmeans(data: &Matrix, k: usize, max_iter: usize, rng: &mut SeededRng) -> Result<KMeansResult> {
    let n = data.rows();
    if n == 0 {
        return Err(Error::Empty("k-means input"));
    }
    if k == 0 {
        return Err(Error::invalid("k-means needs at least one cluster"));
    }
    let mut centers = Matrix::zeros(0, data.cols());
    centers.push_row(data.row(rng.random_range(0..n)))?;
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(data.row(i), centers.row(0))).collect();
    while centers.rows() < k {
        let total: f64 = d2.iter().sum();
        if total <= 0.0 {
            break;
        }
        let mut u = rng.random::<f64>() * total;
        let mut pick = n - 1;
        for (i, &w) in d2.iter().enumerate() {
            if u < w {
                pick = i;
                break;
            }
            u -= w;
        }
        centers.push_row(data.row(pick))?;
        let last = centers.rows() - 1;
        let new_row = centers.row(last).to_vec();
        d2.par_iter_mut().enumerate().for_each(|(i, d)| {
            *d = d.min(sq_dist(data.row(i), &new_row));
        });
    }

    let kk = centers.rows();
    let mut assignment = vec![usize::MAX; n];
    let mut iterations = 0;
    for _ in 0..max_iter {
        iterations += 1;
        let next: Vec<usize> = (0..n)
            .into_par_iter()
            .map(|i| nearest_center(data.row(i), &centers).0)
            .collect();
        if next == assignment {
            break;
        }
        assignment = next;
        let mut sums = Matrix::zeros(kk, data.cols());
        let mut counts = vec![0usize; kk];
        for (i, &a) in assignment.iter().enumerate() {
            counts[a] += 1;
            for (s, &v) in sums.row_mut(a).iter_mut().zip(data.row(i)) {
                *s += v;
            }
        }
        for (j, &n) in counts.iter().enumerate() {
            if n > 0 {
                let inv = 1.0 / n as f64;
                for (c, &s) in centers.row_mut(j).iter_mut().zip(sums.row(j)) {
                    *c = s * inv;
                }
            }
        }
    }
    Ok(KMeansResult {
        centers,
        assignment,
        iterations,
    })
}
