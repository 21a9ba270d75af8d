use std::collections::BTreeMap;

use rand::Rng;
use serde_json::json;

use super::kmeans::kmeans;
use super::knn::nearest_neighbors;
use super::{assemble, BalanceRequest, Balanced, ClassBatch, Provenance};
use crate::error::{Error, Result};
use crate::nn::Matrix;
use crate::seed::{child_rng, SeededRng};

/// RNG stream label shared by every interpolating oversampler, so that the
/// degenerate configurations of the variants reproduce plain SMOTE exactly.
pub(crate) const INTERPOLATE_STREAM: &str = "interpolate";

/// Appends `count` rows `p + λ(q − p)` to `batch`: `p` uniform over `seeds`,
/// `q` uniform over the `k` nearest members of `pool` to `p`, `λ ~ U[0, 1)`.
/// `seeds` must be a subset of `pool` and `pool` must hold at least 2 rows.
pub(crate) fn interpolate(
    data: &Matrix,
    seeds: &[usize],
    pool: &[usize],
    k: usize,
    count: usize,
    rng: &mut SeededRng,
    batch: &mut ClassBatch,
) {
    if count == 0 {
        return;
    }
    let k = k.min(pool.len() - 1);
    let draws: Vec<(usize, usize, f64)> = (0..count)
        .map(|_| {
            let p = seeds[rng.random_range(0..seeds.len())];
            let slot = rng.random_range(0..k);
            (p, slot, rng.random::<f64>())
        })
        .collect();
    let mut unique: Vec<usize> = draws.iter().map(|d| d.0).collect();
    unique.sort_unstable();
    unique.dedup();
    let neighbors: BTreeMap<usize, Vec<usize>> = unique
        .iter()
        .copied()
        .zip(nearest_neighbors(data, &unique, pool, k))
        .collect();
    for (p, slot, lambda) in draws {
        let q = neighbors[&p][slot];
        let (a, b) = (data.row(p), data.row(q));
        batch.rows.extend(a.iter().zip(b).map(|(&x, &y)| x + lambda * (y - x)));
        batch.provenance.push(Provenance::Interpolated { p, q, lambda });
    }
}

fn check_k(k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::invalid("neighbor count k must be at least 1"));
    }
    Ok(())
}

/// Rows of class `c`, checked to have the two members interpolation needs.
pub(crate) fn interpolation_pool(req: &BalanceRequest, c: usize, deficit: usize) -> Result<Vec<usize>> {
    let rows = req.dataset.indices_of(c);
    if rows.len() < 2 {
        return Err(Error::invalid(format!(
            "class {c} needs {deficit} synthetic rows but has {} sample(s); interpolation needs 2",
            rows.len()
        )));
    }
    Ok(rows)
}

/// Plain SMOTE with `k` same-class neighbors (truncated to class size − 1).
pub fn smote(req: &BalanceRequest, k: usize) -> Result<Balanced> {
    check_k(k)?;
    let deficits = req.deficits()?;
    let mut batches = Vec::new();
    for (c, &deficit) in deficits.iter().enumerate() {
        if deficit == 0 {
            continue;
        }
        let rows = interpolation_pool(req, c, deficit)?;
        let mut b = ClassBatch::default();
        let mut rng = req.class_rng(INTERPOLATE_STREAM, c);
        interpolate(&req.dataset.features, &rows, &rows, k, deficit, &mut rng, &mut b);
        batches.push((c, b));
    }
    assemble(req, "smote", json!({ "k": k }), batches)
}

/// Rows of class `c` whose `m` nearest neighbors over the whole dataset
/// include at least `m/2` but fewer than `m` rows of other classes.
pub fn danger_set(dataset: &crate::dataset::EncodedDataset, c: usize, m: usize) -> Vec<usize> {
    let rows = dataset.indices_of(c);
    let all: Vec<usize> = (0..dataset.len()).collect();
    let neighborhoods = nearest_neighbors(&dataset.features, &rows, &all, m);
    rows.into_iter()
        .zip(neighborhoods)
        .filter(|(_, nn)| {
            let other = nn.iter().filter(|&&j| dataset.labels[j] != c).count();
            2 * other >= m && other < m
        })
        .map(|(i, _)| i)
        .collect()
}

/// Borderline-SMOTE (variant 1): seeds restricted to the danger set,
/// neighbors drawn from the seed's own class. Falls back to plain SMOTE for
/// a class whose danger set is empty.
pub fn borderline_smote(req: &BalanceRequest, k: usize, m: usize) -> Result<Balanced> {
    check_k(k)?;
    if m == 0 {
        return Err(Error::invalid("neighborhood size m must be at least 1"));
    }
    let deficits = req.deficits()?;
    let mut batches = Vec::new();
    for (c, &deficit) in deficits.iter().enumerate() {
        if deficit == 0 {
            continue;
        }
        let rows = interpolation_pool(req, c, deficit)?;
        let mut danger = danger_set(req.dataset, c, m);
        let mut b = ClassBatch::default();
        if danger.is_empty() {
            log::info!("borderline: class {c} has no borderline rows, using plain SMOTE");
            b.note = Some("empty danger set, fell back to SMOTE".into());
            danger = rows.clone();
        }
        let mut rng = req.class_rng(INTERPOLATE_STREAM, c);
        interpolate(&req.dataset.features, &danger, &rows, k, deficit, &mut rng, &mut b);
        batches.push((c, b));
    }
    assemble(req, "borderline", json!({ "k": k, "m": m }), batches)
}

/// Splits `total` across `weights` by largest remainder (ties to the lower
/// index).
pub(crate) fn apportion(total: usize, weights: &[f64]) -> Vec<usize> {
    let sum: f64 = weights.iter().sum();
    if weights.is_empty() || sum <= 0.0 {
        return vec![0; weights.len()];
    }
    let raw: Vec<f64> = weights.iter().map(|w| total as f64 * w / sum).collect();
    let mut out: Vec<usize> = raw.iter().map(|r| r.floor() as usize).collect();
    let mut left = total - out.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        (raw[b] - raw[b].floor())
            .total_cmp(&(raw[a] - raw[a].floor()))
            .then(a.cmp(&b))
    });
    for &i in order.iter().cycle() {
        if left == 0 {
            break;
        }
        out[i] += 1;
        left -= 1;
    }
    out
}

/// KMeans-SMOTE. One k-means clustering (k-means++ seeding, at most 300
/// iterations) is run over all rows. For each deficient class, a cluster is
/// eligible when the class makes up more than `imbalance_threshold` of it
/// and has at least 2 rows in it; the deficit is split across eligible
/// clusters in proportion to that class fraction, and SMOTE runs inside
/// each cluster. Falls back to plain SMOTE when no cluster is eligible.
pub fn kmeans_smote(req: &BalanceRequest, k: usize, n_clusters: usize, imbalance_threshold: f64) -> Result<Balanced> {
    check_k(k)?;
    if n_clusters == 0 {
        return Err(Error::invalid("n_clusters must be at least 1"));
    }
    let deficits = req.deficits()?;
    let params = json!({ "k": k, "n_clusters": n_clusters, "imbalance_threshold": imbalance_threshold });
    if deficits.iter().all(|&d| d == 0) {
        return assemble(req, "kmeans_smote", params, Vec::new());
    }
    let mut km_rng = child_rng(req.seed, "kmeans_smote/kmeans");
    let clusters = kmeans(&req.dataset.features, n_clusters, 300, &mut km_rng)?;
    let n_found = clusters.centers.rows();
    let mut sizes = vec![0usize; n_found];
    for &a in &clusters.assignment {
        sizes[a] += 1;
    }

    let mut batches = Vec::new();
    for (c, &deficit) in deficits.iter().enumerate() {
        if deficit == 0 {
            continue;
        }
        let rows = interpolation_pool(req, c, deficit)?;
        let mut members = vec![Vec::new(); n_found];
        for &i in &rows {
            members[clusters.assignment[i]].push(i);
        }
        let fractions: Vec<f64> = (0..n_found)
            .map(|j| {
                let frac = members[j].len() as f64 / sizes[j].max(1) as f64;
                if members[j].len() >= 2 && frac > imbalance_threshold {
                    frac
                } else {
                    0.0
                }
            })
            .collect();
        let mut rng = req.class_rng(INTERPOLATE_STREAM, c);
        let mut b = ClassBatch::default();
        if fractions.iter().all(|&f| f == 0.0) {
            log::info!("kmeans_smote: class {c} has no eligible cluster, using plain SMOTE");
            b.note = Some("no eligible cluster, fell back to SMOTE".into());
            interpolate(&req.dataset.features, &rows, &rows, k, deficit, &mut rng, &mut b);
        } else {
            for (j, n) in apportion(deficit, &fractions).into_iter().enumerate() {
                interpolate(&req.dataset.features, &members[j], &members[j], k, n, &mut rng, &mut b);
            }
        }
        batches.push((c, b));
    }
    assemble(req, "kmeans_smote", params, batches)
}
