//! Brute-force k-nearest-neighbor baseline.

use crate::error::{Error, Result};

/// Euclidean-distance majority vote over raw feature vectors. Neighbor ties
/// at the k-boundary resolve by training index; vote ties resolve to the
/// smallest class index.
pub fn knn_baseline(
    train: &[(Vec<f64>, usize)],
    test: &[(Vec<f64>, usize)],
    k: usize,
) -> Result<f64> {
    if train.is_empty() {
        return Err(Error::Domain("k-NN needs a non-empty training set".into()));
    }
    if k < 1 || k > train.len() {
        return Err(Error::Config(format!(
            "k = {k} outside [1, {}] for this training set",
            train.len()
        )));
    }
    if test.is_empty() {
        return Err(Error::Domain("k-NN needs at least one query".into()));
    }
    let dim = train[0].0.len();
    if train.iter().chain(test).any(|(x, _)| x.len() != dim) {
        return Err(Error::Shape("feature vectors disagree on dimension".into()));
    }
    let mut correct = 0usize;
    for (query, label) in test {
        if knn_predict(train, query, k) == *label {
            correct += 1;
        }
    }
    Ok(correct as f64 / test.len() as f64)
}

/// Predicts one query's class.
pub fn knn_predict(train: &[(Vec<f64>, usize)], query: &[f64], k: usize) -> usize {
    let mut scored: Vec<(f64, usize, usize)> = train
        .iter()
        .enumerate()
        .map(|(idx, (x, label))| {
            let d2: f64 = x.iter().zip(query).map(|(a, b)| (a - b) * (a - b)).sum();
            (d2, idx, *label)
        })
        .collect();
    scored.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    let max_label = scored.iter().map(|s| s.2).max().unwrap_or(0);
    let mut votes = vec![0usize; max_label + 1];
    for s in &scored[..k] {
        votes[s.2] += 1;
    }
    let mut best = 0usize;
    for (c, &v) in votes.iter().enumerate().skip(1) {
        if v > votes[best] {
            best = c;
        }
    }
    best
}
