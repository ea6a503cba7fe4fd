//! Direct transcription of the CFA formulas over plain vectors, written
//! without reference to the library so it can serve as an oracle.
#![allow(dead_code)]

pub fn normalize(raw: &[f64]) -> Vec<f64> {
    let mut lo = raw[0];
    let mut hi = raw[0];
    for &x in raw {
        if x < lo {
            lo = x;
        }
        if x > hi {
            hi = x;
        }
    }
    if hi == lo {
        return vec![0.5; raw.len()];
    }
    raw.iter().map(|&x| (x - lo) / (hi - lo)).collect()
}

/// Rank 1 for the highest score; ties share the average position.
pub fn fractional_ranks(scores: &[f64]) -> Vec<f64> {
    scores
        .iter()
        .map(|&s| {
            let greater = scores.iter().filter(|&&o| o > s).count() as f64;
            let equal = scores.iter().filter(|&&o| o == s).count() as f64;
            greater + (equal + 1.0) / 2.0
        })
        .collect()
}

pub fn rsc(normalized: &[f64]) -> Vec<f64> {
    let mut v = normalized.to_vec();
    // bubble sort, descending
    for i in 0..v.len() {
        for j in 0..v.len() - 1 - i {
            if v[j] < v[j + 1] {
                v.swap(j, j + 1);
            }
        }
    }
    v
}

pub fn cd(fa: &[f64], fb: &[f64]) -> f64 {
    let n = fa.len();
    let mut s = 0.0;
    for i in 0..n {
        s += (fa[i] - fb[i]).powi(2);
    }
    (s / (n as f64 - 2.0)).sqrt()
}

/// Diversity strength of every member of `curves`.
pub fn ds(curves: &[Vec<f64>]) -> Vec<f64> {
    let t = curves.len();
    (0..t)
        .map(|j| {
            let mut s = 0.0;
            for k in 0..t {
                if k != j {
                    s += cd(&curves[j], &curves[k]);
                }
            }
            s / (t as f64 - 1.0)
        })
        .collect()
}

pub fn asc(s: &[Vec<f64>]) -> Vec<f64> {
    let n = s[0].len();
    (0..n)
        .map(|i| s.iter().map(|x| x[i]).sum::<f64>() / s.len() as f64)
        .collect()
}

pub fn arc(r: &[Vec<f64>]) -> Vec<f64> {
    asc(r)
}

pub fn wsc(s: &[Vec<f64>], w: &[f64]) -> Vec<f64> {
    let n = s[0].len();
    let wsum: f64 = w.iter().sum();
    (0..n)
        .map(|i| {
            let mut num = 0.0;
            for j in 0..s.len() {
                num += w[j] * s[j][i];
            }
            num / wsum
        })
        .collect()
}

pub fn wrc(r: &[Vec<f64>], w: &[f64]) -> Vec<f64> {
    let n = r[0].len();
    let inv_sum: f64 = w.iter().map(|x| 1.0 / x).sum();
    (0..n)
        .map(|i| {
            let mut num = 0.0;
            for j in 0..r.len() {
                num += (1.0 / w[j]) * r[j][i];
            }
            num / inv_sum
        })
        .collect()
}

/// Label indices best-first by repeated selection; earlier index wins ties.
pub fn order(values: &[f64], lower_is_better: bool) -> Vec<usize> {
    let mut left: Vec<usize> = (0..values.len()).collect();
    let mut out = Vec::new();
    while !left.is_empty() {
        let mut best = 0;
        for k in 1..left.len() {
            let (a, b) = (values[left[k]], values[left[best]]);
            if (lower_is_better && a < b) || (!lower_is_better && a > b) {
                best = k;
            }
        }
        out.push(left.remove(best));
    }
    out
}

/// All subsets of 0..t with at least two members, any order.
pub fn subsets(t: usize) -> Vec<Vec<usize>> {
    (0u32..(1 << t))
        .filter(|m| m.count_ones() >= 2)
        .map(|m| (0..t).filter(|i| m & (1 << i) != 0).collect())
        .collect()
}
