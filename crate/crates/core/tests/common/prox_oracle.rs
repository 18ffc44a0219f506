//! Direct numerical minimisation of the prox objective, independent of
//! the closed-form operators in the library.

fn objective(u: &[f64], x: &[f64], alpha: f64, sigma: f64) -> f64 {
    let l1: f64 = u.iter().map(|v| v.abs()).sum();
    let sq: f64 = u.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
    sigma * l1 + sq / (2.0 * alpha)
}

fn feasible(u: &[f64], radius: f64) -> bool {
    u.iter().map(|v| v * v).sum::<f64>().sqrt() <= radius
}

fn pull_into_ball(u: &mut [f64], radius: f64) {
    let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > radius {
        u.iter_mut().for_each(|v| *v *= radius / norm);
    }
}

/// Dense grid search followed by shrinking pattern search.
pub fn brute_force_prox(x: &[f64], alpha: f64, sigma: f64, radius: f64) -> Vec<f64> {
    let n = x.len();
    let scale = x.iter().fold(1.0f64, |m, v| m.max(v.abs())) * 1.5;
    let grid = match n {
        1 => 400,
        2 => 80,
        _ => 24,
    };
    let mut best = vec![0.0; n];
    let mut best_val = objective(&best, x, alpha, sigma);
    let mut idx = vec![0usize; n];
    loop {
        let u: Vec<f64> = idx
            .iter()
            .map(|&i| -scale + 2.0 * scale * i as f64 / grid as f64)
            .collect();
        if feasible(&u, radius) {
            let v = objective(&u, x, alpha, sigma);
            if v < best_val {
                best_val = v;
                best = u;
            }
        }
        let mut d = 0;
        loop {
            if d == n {
                break;
            }
            idx[d] += 1;
            if idx[d] <= grid {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
        if d == n {
            break;
        }
    }

    // pattern search over coordinate directions plus the pairwise
    // diagonals, with a projection step to slide along the sphere
    let mut step = 2.0 * scale / grid as f64;
    let mut dirs: Vec<Vec<f64>> = Vec::new();
    for i in 0..n {
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        dirs.push(e);
        for j in i + 1..n {
            for s in [1.0, -1.0] {
                let mut e = vec![0.0; n];
                e[i] = std::f64::consts::FRAC_1_SQRT_2;
                e[j] = s * std::f64::consts::FRAC_1_SQRT_2;
                dirs.push(e);
            }
        }
    }
    while step > 1e-12 {
        let mut improved = false;
        for d in &dirs {
            for s in [1.0, -1.0] {
                let mut u: Vec<f64> = best.iter().zip(d).map(|(b, e)| b + s * step * e).collect();
                pull_into_ball(&mut u, radius);
                // snap tiny coordinates onto the kink of |·|
                for v in u.iter_mut() {
                    if v.abs() < step * 1e-3 {
                        *v = 0.0;
                    }
                }
                let v = objective(&u, x, alpha, sigma);
                if v < best_val - 1e-16 {
                    best_val = v;
                    best = u;
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    best
}
