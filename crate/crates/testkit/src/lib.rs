//! Brute-force reference implementations for tests.
//!
//! Everything here is written straight from the definitions, favouring
//! obviousness over speed or numerical care, and shares no code with the
//! library it checks.

/// All permutations of `0..n` (Heap's algorithm).
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn heap(k: usize, a: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if k <= 1 {
            out.push(a.clone());
            return;
        }
        heap(k - 1, a, out);
        for i in 0..k - 1 {
            if k.is_multiple_of(2) {
                a.swap(i, k - 1);
            } else {
                a.swap(0, k - 1);
            }
            heap(k - 1, a, out);
        }
    }
    let mut a: Vec<usize> = (0..n).collect();
    let mut out = Vec::new();
    heap(n, &mut a, &mut out);
    out
}

fn l2(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for d in 0..a.len() {
        s += (a[d] - b[d]) * (a[d] - b[d]);
    }
    s.sqrt()
}

/// Softmax probability of `j` within its ranking set, no stabilization.
pub fn pairwise_probability_direct(i: usize, j: usize, features: &[Vec<f64>], labels: &[f64], tau: f64) -> f64 {
    let num = (-l2(&features[i], &features[j]) / tau).exp();
    let mut den = 0.0;
    for k in 0..labels.len() {
        if k != i && (labels[i] - labels[k]).abs() >= (labels[i] - labels[j]).abs() {
            den += (-l2(&features[i], &features[k]) / tau).exp();
        }
    }
    num / den
}

/// Per-anchor loss by direct double loop over candidates and ranking sets.
pub fn per_sample_loss_direct(
    i: usize,
    features: &[Vec<f64>],
    labels: &[f64],
    predictions: &[f64],
    targets: &[f64],
    tau: f64,
    lambda: f64,
) -> f64 {
    let n = labels.len();
    let mut s = 0.0;
    for j in 0..n {
        if j != i {
            s += -pairwise_probability_direct(i, j, features, labels, tau).ln();
        }
    }
    s / (n as f64 - 1.0) + lambda * (predictions[i] - targets[i]).abs()
}

/// Batch loss: mean of the per-anchor losses over all samples.
pub fn batch_loss_direct(
    features: &[Vec<f64>],
    labels: &[f64],
    predictions: &[f64],
    targets: &[f64],
    tau: f64,
    lambda: f64,
) -> f64 {
    let n = labels.len();
    let mut total = 0.0;
    for i in 0..n {
        total += per_sample_loss_direct(i, features, labels, predictions, targets, tau, lambda);
    }
    total / n as f64
}

/// Central finite differences of `f` at `x`.
pub fn central_differences(mut f: impl FnMut(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = probe[i];
            probe[i] = orig + h;
            let up = f(&probe);
            probe[i] = orig - h;
            let down = f(&probe);
            probe[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Gradient agreement rule: relative error below `rel`, or absolute error
/// below `abs` when the analytic value is below `small` in magnitude.
pub fn gradient_matches(analytic: f64, numeric: f64, rel: f64, abs: f64, small: f64) -> bool {
    let err = (analytic - numeric).abs();
    if analytic.abs() < small {
        err < abs
    } else {
        err / analytic.abs() < rel
    }
}

/// Rank by counting: 1 + #smaller + (#equal others) / 2.
pub fn ranks_by_counting(v: &[f64]) -> Vec<f64> {
    (0..v.len())
        .map(|i| {
            let mut smaller = 0.0;
            let mut equal = 0.0;
            for j in 0..v.len() {
                if j != i {
                    if v[j] < v[i] {
                        smaller += 1.0;
                    } else if v[j] == v[i] {
                        equal += 1.0;
                    }
                }
            }
            1.0 + smaller + equal / 2.0
        })
        .collect()
}

pub fn pearson_direct(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut da = 0.0;
    let mut db = 0.0;
    for i in 0..a.len() {
        num += (a[i] - ma) * (b[i] - mb);
        da += (a[i] - ma) * (a[i] - ma);
        db += (b[i] - mb) * (b[i] - mb);
    }
    num / (da * db).sqrt()
}

pub fn spearman_brute(a: &[f64], b: &[f64]) -> f64 {
    pearson_direct(&ranks_by_counting(a), &ranks_by_counting(b))
}

/// Kendall tau-b by enumerating every pair.
pub fn kendall_brute(a: &[f64], b: &[f64]) -> f64 {
    let sign = |x: f64, y: f64| {
        if x > y {
            1
        } else if x < y {
            -1
        } else {
            0
        }
    };
    let (mut c, mut d, mut ta, mut tb) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for i in 0..a.len() {
        for j in i + 1..a.len() {
            let (sa, sb) = (sign(a[i], a[j]), sign(b[i], b[j]));
            if sa == 0 && sb == 0 {
                continue;
            } else if sa == 0 {
                ta += 1.0;
            } else if sb == 0 {
                tb += 1.0;
            } else if sa == sb {
                c += 1.0;
            } else {
                d += 1.0;
            }
        }
    }
    (c - d) / ((c + d + ta) * (c + d + tb)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn permutation_count() {
        assert_eq!(permutations(4).len(), 24);
        let mut p = permutations(3);
        p.sort();
        p.dedup();
        assert_eq!(p.len(), 6);
    }

    #[test]
    fn brute_metrics_small_cases() {
        assert!((kendall_brute(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 4.0]) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(ranks_by_counting(&[1.0, 2.0, 2.0, 4.0]), vec![1.0, 2.5, 2.5, 4.0]);
    }
}
