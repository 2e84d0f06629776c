//! Small dense helpers on `f64` slices.

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

pub fn norm(a: &[f64]) -> f64 {
    norm_sq(a).sqrt()
}

pub fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    dist_sq(a, b).sqrt()
}

/// `y += a * x`
pub fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

pub fn all_finite(a: &[f64]) -> bool {
    a.iter().all(|v| v.is_finite())
}

/// Sum of `n` vectors produced by `fill(i, out)`, reduced as a balanced binary tree so
/// the rounding pattern depends only on `n`.
pub fn pairwise_sum(n: usize, dim: usize, fill: &mut dyn FnMut(usize, &mut [f64])) -> Vec<f64> {
    let mut out = vec![0.0; dim];
    let mut scratch = Vec::new();
    pairwise_into(0, n, &mut out, &mut scratch, fill);
    out
}

fn pairwise_into(
    lo: usize,
    hi: usize,
    out: &mut [f64],
    scratch: &mut Vec<Vec<f64>>,
    fill: &mut dyn FnMut(usize, &mut [f64]),
) {
    let dim = out.len();
    let len = hi - lo;
    if len == 0 {
        out.iter_mut().for_each(|v| *v = 0.0);
        return;
    }
    if len <= 8 {
        let mut buf = scratch.pop().unwrap_or_default();
        buf.resize(dim, 0.0);
        fill(lo, out);
        for i in lo + 1..hi {
            fill(i, &mut buf);
            for (o, b) in out.iter_mut().zip(&buf) {
                *o += b;
            }
        }
        scratch.push(buf);
        return;
    }
    let mid = lo + len / 2;
    pairwise_into(lo, mid, out, scratch, fill);
    let mut right = scratch.pop().unwrap_or_default();
    right.resize(dim, 0.0);
    pairwise_into(mid, hi, &mut right, scratch, fill);
    for (o, r) in out.iter_mut().zip(&right) {
        *o += r;
    }
    scratch.push(right);
}

/// Eigenvalues of a symmetric matrix by the cyclic Jacobi method, sorted ascending.
/// The input is symmetrized first.
pub fn symmetric_eigenvalues(m: &[Vec<f64>]) -> Vec<f64> {
    let n = m.len();
    let mut a: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| 0.5 * (m[i][j] + m[j][i])).collect())
        .collect();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        let diag: f64 = (0..n).map(|i| a[i][i] * a[i][i]).sum();
        if off <= 1e-30 * diag.max(f64::MIN_POSITIVE) || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p][q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut eig: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    eig.sort_by(|x, y| x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal));
    eig
}
