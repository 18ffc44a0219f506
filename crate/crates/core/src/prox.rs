//! Proximal operators for `g = σ‖·‖₁ + 1{‖·‖₂ ≤ R}`.

use serde::{Deserialize, Serialize};

use crate::RealVector;

/// Nonsmooth part of the objective: `σ‖x‖₁` plus the indicator of the
/// Euclidean ball of radius `radius` (`f64::INFINITY` for no constraint).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NonsmoothSpec {
    pub sigma: f64,
    pub radius: f64,
}

impl NonsmoothSpec {
    pub const DEFAULT_RADIUS: f64 = 10.0;

    pub fn new(sigma: f64, radius: f64) -> Self {
        assert!(sigma >= 0.0, "sigma must be non-negative");
        assert!(radius > 0.0, "radius must be positive");
        Self { sigma, radius }
    }

    pub fn unconstrained(sigma: f64) -> Self {
        Self::new(sigma, f64::INFINITY)
    }

    /// `g(x)`; `+∞` outside the ball.
    pub fn value(&self, x: &RealVector) -> f64 {
        if x.norm() > self.radius * (1.0 + 1e-12) {
            return f64::INFINITY;
        }
        self.sigma * x.lp_norm(1)
    }

    /// Prox of `alpha · g` at `x`.
    pub fn prox(&self, x: &RealVector, alpha: f64) -> RealVector {
        prox_composite(x, alpha, self)
    }
}

impl Default for NonsmoothSpec {
    fn default() -> Self {
        Self::new(0.0, Self::DEFAULT_RADIUS)
    }
}

/// `sign(x_i) · max(|x_i| − τ, 0)`.
pub fn soft_threshold(x: &RealVector, tau: f64) -> RealVector {
    debug_assert!(tau >= 0.0);
    x.map(|v| v.signum() * (v.abs() - tau).max(0.0))
}

/// Euclidean projection onto `{‖u‖ ≤ radius}`.
pub fn project_ball(x: &RealVector, radius: f64) -> RealVector {
    let norm = x.norm();
    if norm <= radius {
        x.clone()
    } else {
        x * (radius / norm)
    }
}

/// `argmin_u σ‖u‖₁ + 1{‖u‖ ≤ R} + ‖u − x‖² / (2α)`, computed as a soft
/// threshold at `ασ` followed by the radial projection.
pub fn prox_composite(x: &RealVector, alpha: f64, spec: &NonsmoothSpec) -> RealVector {
    debug_assert!(alpha > 0.0);
    let u = if spec.sigma > 0.0 {
        soft_threshold(x, alpha * spec.sigma)
    } else {
        x.clone()
    };
    if spec.radius.is_finite() {
        project_ball(&u, spec.radius)
    } else {
        u
    }
}

#[cfg(test)]
#[path = "../tests/common/prox_oracle.rs"]
pub(crate) mod oracle;

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dvector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn soft_threshold_examples() {
        assert_eq!(
            soft_threshold(&dvector![3.0, -0.5, 0.0], 1.0),
            dvector![2.0, 0.0, 0.0]
        );
        let x = dvector![1.5, -2.0, 0.25];
        assert_eq!(soft_threshold(&x, 0.0), x);
        assert_eq!(soft_threshold(&dvector![-3.0], 1.0), dvector![-2.0]);
    }

    #[test]
    fn project_ball_examples() {
        assert_eq!(project_ball(&dvector![3.0, 4.0], 10.0), dvector![3.0, 4.0]);
        let p = project_ball(&dvector![3.0, 4.0], 1.0);
        assert!((p - dvector![0.6, 0.8]).amax() < 1e-15);
        assert_eq!(project_ball(&dvector![0.0, 0.0], 2.0), dvector![0.0, 0.0]);
    }

    #[test]
    fn composite_examples() {
        let x = dvector![0.3, -7.0, 2.0];
        assert_eq!(
            prox_composite(&x, 0.7, &NonsmoothSpec::unconstrained(0.0)),
            x
        );
        let p = prox_composite(&dvector![2.0, 0.0], 1.0, &NonsmoothSpec::new(1.0, 0.5));
        assert_eq!(p, dvector![0.5, 0.0]);
    }

    #[test]
    fn soft_threshold_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let n = rng.random_range(1..=3);
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
            let alpha = rng.random_range(0.2..2.0);
            let sigma = 0.3 / alpha;
            let bf = oracle::brute_force_prox(&x, alpha, sigma, f64::INFINITY);
            let st = soft_threshold(&RealVector::from_vec(x.clone()), 0.3);
            for (a, b) in bf.iter().zip(st.iter()) {
                assert!((a - b).abs() < 1e-6, "{x:?}: {bf:?} vs {st}");
            }
        }
    }

    #[test]
    fn composite_matches_constrained_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let n = rng.random_range(1..=3);
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
            let alpha = rng.random_range(0.1..2.0);
            let sigma = rng.random_range(0.0..1.5);
            let radius = rng.random_range(0.2..3.0);
            let bf = oracle::brute_force_prox(&x, alpha, sigma, radius);
            let p = prox_composite(
                &RealVector::from_vec(x.clone()),
                alpha,
                &NonsmoothSpec::new(sigma, radius),
            );
            for (a, b) in bf.iter().zip(p.iter()) {
                assert!(
                    (a - b).abs() < 1e-6,
                    "{x:?} a={alpha} s={sigma} R={radius}: {bf:?} vs {p}"
                );
            }
        }
    }

    #[test]
    fn value_outside_ball_is_infinite() {
        let g = NonsmoothSpec::new(1.0, 1.0);
        assert_eq!(g.value(&dvector![2.0, 0.0]), f64::INFINITY);
        assert_eq!(g.value(&dvector![0.5, -0.25]), 0.75);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn vec_pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
            (1usize..6).prop_flat_map(|n| {
                (
                    proptest::collection::vec(-10.0f64..10.0, n),
                    proptest::collection::vec(-10.0f64..10.0, n),
                )
            })
        }

        proptest! {
            #[test]
            fn non_expansive((x, y) in vec_pair(), alpha in 0.01f64..3.0, sigma in 0.0f64..2.0, radius in 0.1f64..20.0) {
                let x = RealVector::from_vec(x);
                let y = RealVector::from_vec(y);
                let d = (&x - &y).norm();
                let spec = NonsmoothSpec::new(sigma, radius);
                prop_assert!((soft_threshold(&x, alpha * sigma) - soft_threshold(&y, alpha * sigma)).norm() <= d + 1e-12);
                prop_assert!((project_ball(&x, radius) - project_ball(&y, radius)).norm() <= d + 1e-12);
                prop_assert!((prox_composite(&x, alpha, &spec) - prox_composite(&y, alpha, &spec)).norm() <= d + 1e-12);
            }

            #[test]
            fn subgradient_relation((x, _y) in vec_pair(), alpha in 0.01f64..3.0, sigma in 0.0f64..2.0) {
                let x = RealVector::from_vec(x);
                let u = prox_composite(&x, alpha, &NonsmoothSpec::unconstrained(sigma));
                for i in 0..x.len() {
                    let g = (x[i] - u[i]) / alpha;
                    prop_assert!(g.abs() <= sigma + 1e-12);
                    if u[i] != 0.0 {
                        prop_assert!((g - sigma * u[i].signum()).abs() <= 1e-9);
                    }
                }
            }

            #[test]
            fn firm_shrinkage((x, _y) in vec_pair(), alpha in 0.01f64..3.0, sigma in 0.0f64..2.0, radius in 0.1f64..20.0) {
                let x = RealVector::from_vec(x);
                let u = prox_composite(&x, alpha, &NonsmoothSpec::new(sigma, radius));
                prop_assert!(u.norm() <= x.norm() + 1e-12);
                prop_assert!(u.norm() <= radius * (1.0 + 1e-12));
            }
        }
    }
}
