//! Spearman's rho (average ranks for ties) and Kendall's tau-b.

use std::cmp::Ordering;

use super::EvalError;

/// A correlation coefficient. When one input is constant the coefficient
/// is undefined; it is then reported as 0 with `constant_input` set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coefficient {
    pub value: f64,
    pub constant_input: bool,
}

impl Coefficient {
    fn degenerate() -> Self {
        Self { value: 0.0, constant_input: true }
    }
}

fn check(a: &[f64], b: &[f64]) -> Result<(), EvalError> {
    if a.len() != b.len() {
        return Err(EvalError::LengthMismatch(a.len(), b.len()));
    }
    if a.len() < 2 {
        return Err(EvalError::TooFewSamples { needed: 2, got: a.len() });
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(EvalError::NonFinite);
    }
    Ok(())
}

/// 1-based ranks; tied values share the mean of their positions.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&i, &j| values[i].partial_cmp(&values[j]).unwrap_or(Ordering::Equal));
    let mut ranks = vec![0.0; values.len()];
    let mut p = 0;
    while p < idx.len() {
        let mut q = p + 1;
        while q < idx.len() && values[idx[q]] == values[idx[p]] {
            q += 1;
        }
        // positions p+1 ..= q
        let r = (p + 1 + q) as f64 / 2.0;
        for &i in &idx[p..q] {
            ranks[i] = r;
        }
        p = q;
    }
    ranks
}

fn pearson(a: &[f64], b: &[f64]) -> Coefficient {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Coefficient::degenerate();
    }
    Coefficient { value: (sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0), constant_input: false }
}

/// Pearson correlation of the average ranks.
pub fn spearman(a: &[f64], b: &[f64]) -> Result<Coefficient, EvalError> {
    check(a, b)?;
    if a.iter().all(|&v| v == a[0]) || b.iter().all(|&v| v == b[0]) {
        return Ok(Coefficient::degenerate());
    }
    Ok(pearson(&average_ranks(a), &average_ranks(b)))
}

/// Number of tied pairs in a sorted slice, by runs of equal values.
fn tied_pairs<T: PartialEq>(sorted: impl Iterator<Item = T>) -> u64 {
    let mut total = 0u64;
    let mut run = 0u64;
    let mut prev: Option<T> = None;
    for v in sorted {
        if prev.as_ref() == Some(&v) {
            run += 1;
        } else {
            total += run * run.saturating_sub(1) / 2;
            run = 1;
        }
        prev = Some(v);
    }
    total + run * run.saturating_sub(1) / 2
}

/// Merge sort on `v`, returning the number of inversions (swaps).
fn count_inversions(v: &mut [f64], buf: &mut [f64]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = count_inversions(&mut v[..mid], &mut buf[..mid]) + count_inversions(&mut v[mid..], &mut buf[mid..]);
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if v[j] < v[i] {
            buf[k] = v[j];
            swaps += (mid - i) as u64;
            j += 1;
        } else {
            buf[k] = v[i];
            i += 1;
        }
        k += 1;
    }
    buf[k..k + mid - i].copy_from_slice(&v[i..mid]);
    k += mid - i;
    buf[k..k + n - j].copy_from_slice(&v[j..n]);
    v.copy_from_slice(&buf[..n]);
    swaps
}

/// Kendall's tau-b in O(n log n) (Knight's algorithm):
/// `(C - D) / sqrt((n0 - ties_a)(n0 - ties_b))`.
pub fn kendall(a: &[f64], b: &[f64]) -> Result<Coefficient, EvalError> {
    check(a, b)?;
    let n = a.len();
    let mut pairs: Vec<(f64, f64)> = a.iter().copied().zip(b.iter().copied()).collect();
    pairs.sort_by(|p, q| p.0.partial_cmp(&q.0).unwrap().then(p.1.partial_cmp(&q.1).unwrap()));

    let n0 = (n as u64) * (n as u64 - 1) / 2;
    let ties_a = tied_pairs(pairs.iter().map(|p| p.0));
    let ties_ab = tied_pairs(pairs.iter().copied());

    let mut bs: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let mut buf = vec![0.0; n];
    let swaps = count_inversions(&mut bs, &mut buf);
    let ties_b = tied_pairs(bs.iter().copied());

    if ties_a == n0 || ties_b == n0 {
        return Ok(Coefficient::degenerate());
    }
    // C - D = n0 - ties_a - ties_b + ties_ab - 2 * swaps
    let numer = n0 as f64 - ties_a as f64 - ties_b as f64 + ties_ab as f64 - 2.0 * swaps as f64;
    let denom = ((n0 - ties_a) as f64 * (n0 - ties_b) as f64).sqrt();
    Ok(Coefficient { value: (numer / denom).clamp(-1.0, 1.0), constant_input: false })
}
