//! Ranking-based contrastive loss for continuous labels.
//!
//! Observations are ranked against an anchor by how far their labels are
//! from the anchor's label. For anchor `i` and candidate `j` the ranking set
//!
//! ```text
//! S(i, j) = { k != i : |x_i - x_k| >= |x_i - x_j| }
//! ```
//!
//! holds every sample ranked no closer than `j`, and the probability of `j`
//! being picked first from that set is a softmax over feature similarities:
//!
//! ```text
//! P(j | i) = exp(sim(f_i, f_j) / tau) / sum_{k in S(i, j)} exp(sim(f_i, f_k) / tau)
//! ```
//!
//! with `sim(a, b) = -||a - b||_2`. The per-anchor loss averages `-log P(j | i)`
//! over all `j != i` and adds `lambda * |prediction_i - target_i|`; the batch
//! loss averages over all `2N` anchors (N observations plus one noise
//! augmentation each, stored at indices `2k` and `2k + 1`).
//!
//! The softmax is a special case of the Plackett–Luce ranking model, exposed
//! here over abstract positive scores in [`pl_ranking_probability`].

use std::cmp::Ordering;

use thiserror::Error;

use crate::util::NeumaierSum;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RankError {
    #[error("index {index} out of range for {len} samples")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("anchor and candidate must differ (both {0})")]
    SameIndex(usize),
    #[error("score {index} is not strictly positive ({value})")]
    NonPositiveScore { index: usize, value: f64 },
    #[error("order is not a permutation of 0..{0}")]
    NotAPermutation(usize),
    #[error("invalid batch: {0}")]
    InvalidBatch(String),
    #[error("invalid hyper-parameters: {0}")]
    InvalidHyper(String),
}

/// `2N` samples: features, ranking labels, decoder predictions and
/// regression targets. Sample `2k + 1` is the augmentation of sample `2k`.
#[derive(Debug, Clone, PartialEq)]
pub struct RankingBatch {
    features: Vec<f64>,
    dim: usize,
    labels: Vec<f64>,
    predictions: Vec<f64>,
    targets: Vec<f64>,
}

impl RankingBatch {
    /// `features` is row-major `2N × dim`.
    pub fn new(
        features: Vec<f64>,
        dim: usize,
        labels: Vec<f64>,
        predictions: Vec<f64>,
        targets: Vec<f64>,
    ) -> Result<Self, RankError> {
        let n = labels.len();
        if n < 2 || !n.is_multiple_of(2) {
            return Err(RankError::InvalidBatch(format!("need an even number >= 2 of samples, got {n}")));
        }
        if dim == 0 {
            return Err(RankError::InvalidBatch("feature dimension must be >= 1".into()));
        }
        if features.len() != n * dim || predictions.len() != n || targets.len() != n {
            return Err(RankError::InvalidBatch(format!(
                "inconsistent sizes: {} features for {n}x{dim}, {} predictions, {} targets",
                features.len(),
                predictions.len(),
                targets.len()
            )));
        }
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        if !(finite(&features) && finite(&labels) && finite(&predictions) && finite(&targets)) {
            return Err(RankError::InvalidBatch("non-finite entry".into()));
        }
        if let Some(k) = (0..n / 2).find(|&k| labels[2 * k] != labels[2 * k + 1]) {
            return Err(RankError::InvalidBatch(format!(
                "anchor {} and its augmentation carry different labels",
                2 * k
            )));
        }
        Ok(Self { features, dim, labels, predictions, targets })
    }

    /// Number of samples (`2N`).
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn anchors(&self) -> usize {
        self.len() / 2
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn feature(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn predictions(&self) -> &[f64] {
        &self.predictions
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    fn check_index(&self, i: usize) -> Result<(), RankError> {
        if i >= self.len() {
            Err(RankError::IndexOutOfRange { index: i, len: self.len() })
        } else {
            Ok(())
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossHyper {
    pub tau: f64,
    pub lambda: f64,
}

impl Default for LossHyper {
    fn default() -> Self {
        Self { tau: 2.0, lambda: 2.0 }
    }
}

impl LossHyper {
    pub fn validate(&self) -> Result<(), RankError> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(RankError::InvalidHyper(format!("tau must be > 0, got {}", self.tau)));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(RankError::InvalidHyper(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        Ok(())
    }
}

/// Loss value with its partial derivatives w.r.t. features (row-major,
/// same layout as the batch) and predictions.
#[derive(Debug, Clone, PartialEq)]
pub struct LossResult {
    pub value: f64,
    pub d_features: Vec<f64>,
    pub d_predictions: Vec<f64>,
}

/// Negative Euclidean distance.
pub fn similarity(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    -a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// L1 distance between scalar states.
pub fn state_distance(a: f64, b: f64) -> f64 {
    (a - b).abs()
}

/// Indices `k != i` whose label is at least as far from `labels[i]` as `labels[j]`.
pub fn ranking_set(i: usize, j: usize, labels: &[f64]) -> Result<Vec<usize>, RankError> {
    for idx in [i, j] {
        if idx >= labels.len() {
            return Err(RankError::IndexOutOfRange { index: idx, len: labels.len() });
        }
    }
    if i == j {
        return Err(RankError::SameIndex(i));
    }
    let threshold = state_distance(labels[i], labels[j]);
    Ok((0..labels.len()).filter(|&k| k != i && state_distance(labels[i], labels[k]) >= threshold).collect())
}

/// Plackett–Luce probability of `order` (best first) under positive `scores`:
/// `prod_k s[order[k]] / sum_{m >= k} s[order[m]]`.
pub fn pl_ranking_probability(scores: &[f64], order: &[usize]) -> Result<f64, RankError> {
    let n = scores.len();
    if let Some((index, &value)) = scores.iter().enumerate().find(|(_, s)| !(**s > 0.0 && s.is_finite())) {
        return Err(RankError::NonPositiveScore { index, value });
    }
    let mut seen = vec![false; n];
    if order.len() != n || order.iter().any(|&o| o >= n || std::mem::replace(&mut seen[o], true)) {
        return Err(RankError::NotAPermutation(n));
    }
    let mut remaining = 0.0;
    let mut suffix = vec![0.0; n];
    for k in (0..n).rev() {
        remaining += scores[order[k]];
        suffix[k] = remaining;
    }
    Ok(order.iter().zip(&suffix).map(|(&o, s)| scores[o] / s).product())
}

/// `log sum exp(values)` with max subtraction.
fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + values.map(|v| (v - m).exp()).sum::<f64>().ln()
}

/// `log P(j | i)`; see the module docs.
pub fn pairwise_log_probability(i: usize, j: usize, batch: &RankingBatch, tau: f64) -> Result<f64, RankError> {
    batch.check_index(i)?;
    batch.check_index(j)?;
    if !(tau > 0.0) {
        return Err(RankError::InvalidHyper(format!("tau must be > 0, got {tau}")));
    }
    let set = ranking_set(i, j, batch.labels())?;
    let fi = batch.feature(i);
    let logit = |k: usize| similarity(fi, batch.feature(k)) / tau;
    Ok(logit(j) - log_sum_exp(set.iter().map(|&k| logit(k))))
}

pub fn pairwise_probability(i: usize, j: usize, batch: &RankingBatch, tau: f64) -> Result<f64, RankError> {
    pairwise_log_probability(i, j, batch, tau).map(f64::exp)
}

/// Loss contribution of anchor `i`.
pub fn suprnc_per_sample(i: usize, batch: &RankingBatch, hyper: &LossHyper) -> Result<f64, RankError> {
    hyper.validate()?;
    batch.check_index(i)?;
    let mut contrast = NeumaierSum::default();
    for j in (0..batch.len()).filter(|&j| j != i) {
        contrast.add(-pairwise_log_probability(i, j, batch, hyper.tau)?);
    }
    let reg = hyper.lambda * (batch.predictions[i] - batch.targets[i]).abs();
    Ok(contrast.total() / (batch.len() - 1) as f64 + reg)
}

/// Batch loss and its exact gradients.
///
/// For each anchor the candidates are sorted by label distance (farthest
/// first); every ranking set is then a prefix of that order, so all softmax
/// denominators come from one running log-sum-exp. The subgradient of the
/// Euclidean norm at zero and of `|.|` at zero are taken as 0.
pub fn suprnc_batch(batch: &RankingBatch, hyper: &LossHyper) -> Result<LossResult, RankError> {
    hyper.validate()?;
    let n = batch.len();
    let dim = batch.dim;
    let tau = hyper.tau;
    let pair_weight = 1.0 / ((n * (n - 1)) as f64);

    let mut total = NeumaierSum::default();
    let mut d_features = vec![0.0; n * dim];
    let mut d_predictions = vec![0.0; n];

    let mut order: Vec<usize> = Vec::with_capacity(n - 1);
    let mut dist = vec![0.0; n];
    let mut logits = vec![0.0; n];
    let mut lse = vec![0.0; n];
    // group_start[p]: first position in `order` sharing order[p]'s label distance
    let mut group_start = vec![0usize; n];
    let mut suffix = vec![0.0; n];
    let mut diff = vec![0.0; dim];

    for i in 0..n {
        let fi = batch.feature(i);
        for k in (0..n).filter(|&k| k != i) {
            dist[k] = state_distance(batch.labels[i], batch.labels[k]);
            logits[k] = similarity(fi, batch.feature(k)) / tau;
        }
        order.clear();
        order.extend((0..n).filter(|&k| k != i));
        order.sort_by(|&a, &b| dist[b].partial_cmp(&dist[a]).unwrap_or(Ordering::Equal).then(a.cmp(&b)));

        // Running log-sum-exp over prefixes; tied candidates share one value.
        let m = order.len();
        let (mut run_max, mut run_sum) = (f64::NEG_INFINITY, 0.0);
        let mut p = 0;
        while p < m {
            let start = p;
            while p < m && dist[order[p]] == dist[order[start]] {
                let a = logits[order[p]];
                if a > run_max {
                    run_sum = run_sum * (run_max - a).exp() + 1.0;
                    run_max = a;
                } else {
                    run_sum += (a - run_max).exp();
                }
                p += 1;
            }
            let value = run_max + run_sum.ln();
            for q in start..p {
                lse[order[q]] = value;
                group_start[q] = start;
            }
        }

        let mut contrast = NeumaierSum::default();
        for &j in &order {
            contrast.add(lse[j] - logits[j]);
        }
        let reg = (batch.predictions[i] - batch.targets[i]).abs();
        total.add(contrast.total() / (n - 1) as f64 + hyper.lambda * reg);

        // suffix[p] = log sum_{q >= p} exp(-lse[order[q]])
        let mut acc = f64::NEG_INFINITY;
        for q in (0..m).rev() {
            let v = -lse[order[q]];
            acc = if acc == f64::NEG_INFINITY {
                v
            } else {
                let hi = acc.max(v);
                hi + ((acc - hi).exp() + (v - hi).exp()).ln()
            };
            suffix[q] = acc;
        }

        // dL/d sim(i, k) = w/tau * (-1 + sum_{j: k in S(i, j)} P_j(k))
        for (q, &k) in order.iter().enumerate() {
            let mass = (logits[k] + suffix[group_start[q]]).exp();
            let g = pair_weight / tau * (mass - 1.0);
            let fk = batch.feature(k);
            let mut r2 = 0.0;
            for d in 0..dim {
                diff[d] = fi[d] - fk[d];
                r2 += diff[d] * diff[d];
            }
            let r = r2.sqrt();
            if r == 0.0 {
                continue;
            }
            // sim = -r; d sim / d f_i = -(f_i - f_k) / r
            let scale = g / r;
            for d in 0..dim {
                d_features[i * dim + d] -= scale * diff[d];
                d_features[k * dim + d] += scale * diff[d];
            }
        }

        let delta = batch.predictions[i] - batch.targets[i];
        if delta != 0.0 {
            d_predictions[i] = hyper.lambda * delta.signum() / n as f64;
        }
    }

    Ok(LossResult { value: total.total() / n as f64, d_features, d_predictions })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn batch(features: Vec<f64>, dim: usize, labels: Vec<f64>) -> RankingBatch {
        let n = labels.len();
        RankingBatch::new(features, dim, labels.clone(), labels.clone(), labels).unwrap_or_else(|e| panic!("{e} ({n})"))
    }

    #[test]
    fn similarity_and_distance() {
        assert_eq!(similarity(&[1.0, 2.0], &[1.0, 2.0]), 0.0);
        assert_eq!(similarity(&[0.0, 0.0], &[3.0, 4.0]), -5.0);
        assert_eq!(state_distance(2.0, 2.0), 0.0);
        assert_eq!(state_distance(1.5, -0.5), 2.0);
        assert_eq!(state_distance(-0.5, 1.5), 2.0);
    }

    #[test]
    fn ranking_set_examples() {
        let labels = [0.0, 1.0, 2.0];
        assert_eq!(ranking_set(0, 1, &labels).unwrap(), vec![1, 2]);
        assert_eq!(ranking_set(0, 2, &labels).unwrap(), vec![2]);
        assert_eq!(ranking_set(1, 0, &[5.0; 4]).unwrap(), vec![0, 2, 3]);
        assert_eq!(ranking_set(1, 1, &labels), Err(RankError::SameIndex(1)));
        assert!(matches!(ranking_set(0, 3, &labels), Err(RankError::IndexOutOfRange { index: 3, len: 3 })));
    }

    #[test]
    fn pl_examples() {
        assert_eq!(pl_ranking_probability(&[3.0], &[0]).unwrap(), 1.0);
        assert_abs_diff_eq!(pl_ranking_probability(&[2.0, 1.0, 1.0], &[0, 1, 2]).unwrap(), 0.25, epsilon = 1e-15);
        assert!(matches!(
            pl_ranking_probability(&[1.0, 0.0], &[0, 1]),
            Err(RankError::NonPositiveScore { index: 1, .. })
        ));
        assert_eq!(pl_ranking_probability(&[1.0, 2.0], &[0, 0]), Err(RankError::NotAPermutation(2)));
        assert_eq!(pl_ranking_probability(&[1.0, 2.0], &[0]), Err(RankError::NotAPermutation(2)));
    }

    #[test]
    fn singleton_set_gives_probability_one() {
        // With 2N = 2 the augmentation is the only candidate.
        let b = batch(vec![0.3, -1.0, 4.0, 2.0], 2, vec![1.0, 1.0]);
        assert_eq!(ranking_set(0, 1, b.labels()).unwrap(), vec![1]);
        assert_eq!(pairwise_probability(0, 1, &b, 2.0).unwrap(), 1.0);
    }

    #[test]
    fn equal_similarity_candidates_split_evenly() {
        // anchor 4 (label 3): S(4, 0) = {0, 1}, both at distance 5 from f_4
        let f = vec![0.0, 10.0, 2.0, 3.0, 5.0, 5.5];
        let b = batch(f, 1, vec![0.0, 0.0, 2.0, 2.0, 3.0, 3.0]);
        assert_eq!(ranking_set(4, 0, b.labels()).unwrap(), vec![0, 1]);
        assert_abs_diff_eq!(pairwise_probability(4, 0, &b, 2.0).unwrap(), 0.5, epsilon = 1e-15);
        assert!(matches!(pairwise_probability(4, 4, &b, 2.0), Err(RankError::SameIndex(4))));
        assert!(matches!(pairwise_probability(6, 0, &b, 2.0), Err(RankError::IndexOutOfRange { .. })));
    }

    #[test]
    fn degenerate_pair_batch() {
        let b = batch(vec![1.0, 2.0, 1.0, 2.0], 2, vec![0.7, 0.7]);
        let h = LossHyper::default();
        assert_eq!(suprnc_per_sample(0, &b, &h).unwrap(), 0.0);
        let r = suprnc_batch(&b, &h).unwrap();
        assert_eq!(r.value, 0.0);
        assert!(r.d_features.iter().all(|&g| g == 0.0));
        assert!(r.d_predictions.iter().all(|&g| g == 0.0));

        let off =
            RankingBatch::new(vec![1.0, 2.0, 1.0, 2.0], 2, vec![0.7, 0.7], vec![1.2, 0.7], vec![0.7, 0.7]).unwrap();
        assert_abs_diff_eq!(suprnc_per_sample(0, &off, &h).unwrap(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn batch_validation() {
        assert!(RankingBatch::new(vec![0.0; 3], 1, vec![0.0; 3], vec![0.0; 3], vec![0.0; 3]).is_err());
        assert!(RankingBatch::new(vec![0.0; 2], 1, vec![0.0, 1.0], vec![0.0; 2], vec![0.0; 2]).is_err());
        assert!(RankingBatch::new(vec![0.0; 2], 0, vec![0.0; 2], vec![0.0; 2], vec![0.0; 2]).is_err());
        assert!(RankingBatch::new(vec![f64::NAN, 0.0], 1, vec![0.0; 2], vec![0.0; 2], vec![0.0; 2]).is_err());
        assert!(LossHyper { tau: 0.0, lambda: 1.0 }.validate().is_err());
        assert!(LossHyper { tau: 1.0, lambda: -1.0 }.validate().is_err());
    }
}
