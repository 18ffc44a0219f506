//! Analytic floating-point operation counts, accumulated per run.
//!
//! Counts follow the usual dense conventions: a `d×n` matrix-vector
//! product is `2dn`, a Cholesky factorisation of an `n×n` matrix is `n³/3`
//! and each triangular solve is `n²`.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkCounter {
    /// Local gradient evaluations.
    pub gradient: u64,
    /// Consensus (mixing) products.
    pub consensus: u64,
    /// Proximal maps.
    pub prox: u64,
    /// Forming the normal-equation matrix and right-hand side.
    pub assembly: u64,
    /// Factorising and solving the `n×n` system.
    pub linear_solve: u64,
    /// Completed updates (iterations or ADMM steps).
    pub updates: u64,
}

impl WorkCounter {
    pub fn total(&self) -> u64 {
        self.gradient + self.consensus + self.prox + self.assembly + self.linear_solve
    }

    /// Average total work per completed update.
    pub fn per_update(&self) -> f64 {
        if self.updates == 0 {
            0.0
        } else {
            self.total() as f64 / self.updates as f64
        }
    }

    pub fn merge(&mut self, other: &WorkCounter) {
        self.gradient += other.gradient;
        self.consensus += other.consensus;
        self.prox += other.prox;
        self.assembly += other.assembly;
        self.linear_solve += other.linear_solve;
        self.updates += other.updates;
    }
}

/// `2 Cᵀ(Cx − y) + 2λx` for `C ∈ R^{d×n}`.
pub fn gradient_flops(d: usize, n: usize) -> u64 {
    (4 * d * n + d + 3 * n) as u64
}

/// Soft threshold plus radial projection.
pub fn prox_flops(n: usize) -> u64 {
    (5 * n) as u64
}

/// One weighted sum `Σ_j A^{ij} z^j` over `nonzeros` terms.
pub fn mix_flops(nonzeros: usize, n: usize) -> u64 {
    (2 * nonzeros * n) as u64
}

/// Cholesky factorisation plus forward and back substitution.
pub fn cholesky_solve_flops(n: usize) -> u64 {
    (n * n * n / 3 + 2 * n * n) as u64
}

/// `(1/N) Σ C_iᵀC_i` and `(1/N) Σ C_iᵀy_i` over `nodes` blocks of `d×n`.
pub fn assembly_flops(nodes: usize, d: usize, n: usize) -> u64 {
    (2 * nodes * d * n * (n + 1)) as u64
}
