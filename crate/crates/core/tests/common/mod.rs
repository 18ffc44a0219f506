//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

pub mod prox_oracle;

use dpogd::{RealMatrix, RealVector};

/// `A_s ⋯ A_1` by explicit triple loops.
pub fn dense_product(mats: &[RealMatrix]) -> Vec<Vec<f64>> {
    let n = mats[0].nrows();
    let mut q: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| (i == j) as u8 as f64).collect())
        .collect();
    for a in mats {
        let mut next = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                let mut s = 0.0;
                for l in 0..n {
                    s += a[(i, l)] * q[l][j];
                }
                next[i][j] = s;
            }
        }
        q = next;
    }
    q
}

/// Largest `|Q_ij − 1/N|`.
pub fn deviation_from_average(q: &[Vec<f64>]) -> f64 {
    let inv = 1.0 / q.len() as f64;
    q.iter()
        .flatten()
        .map(|v| (v - inv).abs())
        .fold(0.0, f64::max)
}

/// Largest row or column sum deviation from one.
pub fn stochasticity_error(a: &RealMatrix) -> f64 {
    let n = a.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        let row: f64 = (0..n).map(|j| a[(i, j)]).sum();
        let col: f64 = (0..n).map(|j| a[(j, i)]).sum();
        worst = worst.max((row - 1.0).abs()).max((col - 1.0).abs());
    }
    worst
}

/// Smallest nonzero entry.
pub fn min_nonzero(a: &RealMatrix) -> f64 {
    a.iter()
        .copied()
        .filter(|&v| v != 0.0)
        .fold(f64::INFINITY, f64::min)
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_fit(points: &[(f64, f64)]) -> f64 {
    let m = points.len() as f64;
    let (lx, ly): (Vec<f64>, Vec<f64>) = points.iter().map(|(x, y)| (x.ln(), y.ln())).unzip();
    let mx = lx.iter().sum::<f64>() / m;
    let my = ly.iter().sum::<f64>() / m;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

pub fn max_abs_diff(a: &RealVector, b: &RealVector) -> f64 {
    (a - b).amax()
}

pub fn median(v: &mut [f64]) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let m = v.len();
    if m % 2 == 1 {
        v[m / 2]
    } else {
        0.5 * (v[m / 2 - 1] + v[m / 2])
    }
}
