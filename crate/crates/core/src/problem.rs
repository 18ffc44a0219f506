//! Dynamic sparse-recovery problem stream.
//!
//! A unit-norm sparse target `u_t` drifts over time. At every slot each of
//! the `N` nodes observes `y_i = C_i u_t + v_i` and holds the private loss
//! `f_t^i(x) = ‖y_i − C_i x‖² + λ‖x‖²`; all nodes share
//! `g_t(x) = σ‖x‖₁ + 1{‖x‖ ≤ R}`. The per-slot optimum of
//! `(1/N) Σ_i f_t^i + g_t` is the elastic-net estimate tracked by every
//! algorithm in the crate.

use nalgebra::SymmetricEigen;
use rand::seq::index;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::prox::{prox_composite, NonsmoothSpec};
use crate::{RealMatrix, RealVector};

/// Distribution of the observation-matrix entries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MeasurementScale {
    /// i.i.d. `N(0, 1)`.
    #[default]
    Standard,
    /// i.i.d. `N(0, 1/d)`, i.e. entries scaled by `1/√d`.
    PerMeasurement,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemParams {
    /// Parameter dimension `n`.
    pub n: usize,
    /// Number of nodes `N`.
    pub nodes: usize,
    /// Measurements per node per slot `d`.
    pub d: usize,
    pub sparsity: usize,
    pub lambda: f64,
    pub sigma: f64,
    pub noise_std: f64,
    pub radius: f64,
    pub scale: MeasurementScale,
}

impl ProblemParams {
    /// Elastic-net weights `λ = 0.05/(dN)` and `σ = 0.01/(d²N²)`.
    pub fn with_default_weights(n: usize, nodes: usize, d: usize, sparsity: usize) -> Self {
        let dn = (d * nodes) as f64;
        Self {
            n,
            nodes,
            d,
            sparsity,
            lambda: 0.05 / dn,
            sigma: 0.01 / (dn * dn),
            noise_std: 0.01,
            radius: NonsmoothSpec::DEFAULT_RADIUS,
            scale: MeasurementScale::Standard,
        }
    }

    pub fn nonsmooth(&self) -> NonsmoothSpec {
        NonsmoothSpec::new(self.sigma, self.radius)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.nodes == 0 || self.d == 0 {
            return Err(Error::InvalidArgument("n, N and d must be positive".into()));
        }
        if self.sparsity == 0 || self.sparsity > self.n {
            return Err(Error::InvalidArgument(format!(
                "sparsity {} must lie in 1..={}",
                self.sparsity, self.n
            )));
        }
        if !(self.lambda >= 0.0) || !(self.sigma >= 0.0) || !(self.noise_std >= 0.0) {
            return Err(Error::InvalidArgument(
                "lambda, sigma and noise_std must be non-negative".into(),
            ));
        }
        if !(self.radius > 0.0) {
            return Err(Error::InvalidArgument("radius must be positive".into()));
        }
        Ok(())
    }
}

/// True parameter `u_t` with its support.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetState {
    pub u: RealVector,
    pub support: Vec<usize>,
    pub t: usize,
}

impl TargetState {
    /// Sparse standard-normal vector normalised to unit norm, at `t = 1`.
    pub fn init<R: Rng + ?Sized>(n: usize, sparsity: usize, rng: &mut R) -> Result<Self> {
        if sparsity == 0 || sparsity > n {
            return Err(Error::InvalidArgument(format!(
                "sparsity {sparsity} must lie in 1..={n}"
            )));
        }
        let mut support: Vec<usize> = index::sample(rng, n, sparsity).into_vec();
        support.sort_unstable();
        let mut u = RealVector::zeros(n);
        loop {
            for &i in &support {
                u[i] = rng.sample(StandardNormal);
            }
            if u.norm() > 0.0 {
                break;
            }
        }
        u /= u.norm();
        Ok(Self { u, support, t: 1 })
    }

    /// Advances from slot `t` to `t + 1`. For `t ≥ 2` the support swaps one
    /// index with probability `1/t`, `N(0, 1/t²)` noise is added on the new
    /// support and the vector is renormalised. The step from `t = 1` leaves
    /// the target unchanged.
    pub fn evolve<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let t = self.t;
        self.t += 1;
        if t < 2 {
            return;
        }
        let n = self.u.len();
        let tf = t as f64;
        if self.support.len() < n && rng.random_bool(1.0 / tf) {
            let out_pos = rng.random_range(0..self.support.len());
            let zeros: Vec<usize> = (0..n).filter(|i| !self.support.contains(i)).collect();
            let incoming = zeros[rng.random_range(0..zeros.len())];
            self.u[self.support[out_pos]] = 0.0;
            self.support[out_pos] = incoming;
            self.support.sort_unstable();
        }
        let noise = Normal::new(0.0, 1.0 / tf).expect("finite std");
        let mut next = RealVector::zeros(n);
        for &i in &self.support {
            next[i] = self.u[i] + noise.sample(rng);
        }
        let norm = next.norm();
        if norm > 0.0 {
            self.u = next / norm;
        }
    }
}

/// Everything revealed at one slot.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotData {
    pub c: Vec<RealMatrix>,
    pub y: Vec<RealVector>,
    pub lambda: f64,
    pub g: NonsmoothSpec,
}

/// `f(x) = xᵀ H x − 2 bᵀ x + c0 + λ‖x‖²`: the network-average smooth loss.
#[derive(Debug, Clone)]
pub struct Quadratic {
    pub h: RealMatrix,
    pub b: RealVector,
    pub c0: f64,
    pub lambda: f64,
}

impl Quadratic {
    pub fn value(&self, x: &RealVector) -> f64 {
        (&self.h * x).dot(x) - 2.0 * self.b.dot(x) + self.c0 + self.lambda * x.norm_squared()
    }

    pub fn gradient(&self, x: &RealVector) -> RealVector {
        (&self.h * x - &self.b) * 2.0 + x * (2.0 * self.lambda)
    }
}

impl SlotData {
    pub fn nodes(&self) -> usize {
        self.c.len()
    }

    pub fn dim(&self) -> usize {
        self.c[0].ncols()
    }

    /// `f^i(x)`.
    pub fn local_loss(&self, i: usize, x: &RealVector) -> f64 {
        (&self.y[i] - &self.c[i] * x).norm_squared() + self.lambda * x.norm_squared()
    }

    /// `∇f^i(x) = 2 C_iᵀ(C_i x − y_i) + 2λx`.
    pub fn local_gradient(&self, i: usize, x: &RealVector) -> RealVector {
        let r = &self.c[i] * x - &self.y[i];
        let mut g = self.c[i].tr_mul(&r) * 2.0;
        g.axpy(2.0 * self.lambda, x, 1.0);
        g
    }

    /// `(1/N) Σ_i f^i(x)`.
    pub fn smooth_value(&self, x: &RealVector) -> f64 {
        let n = self.nodes() as f64;
        (0..self.nodes())
            .map(|i| self.local_loss(i, x))
            .sum::<f64>()
            / n
    }

    /// `∇f(x)` of the network average.
    pub fn average_gradient(&self, x: &RealVector) -> RealVector {
        let mut acc = RealVector::zeros(x.len());
        for i in 0..self.nodes() {
            acc += self.local_gradient(i, x);
        }
        acc / self.nodes() as f64
    }

    /// `ℓ(x) = f(x) + g(x)`.
    pub fn loss(&self, x: &RealVector) -> f64 {
        self.smooth_value(x) + self.g.value(x)
    }

    pub fn quadratic(&self) -> Quadratic {
        let n = self.dim();
        let nodes = self.nodes() as f64;
        let mut h = RealMatrix::zeros(n, n);
        let mut b = RealVector::zeros(n);
        let mut c0 = 0.0;
        for (c, y) in self.c.iter().zip(&self.y) {
            h += c.tr_mul(c);
            b += c.tr_mul(y);
            c0 += y.norm_squared();
        }
        Quadratic {
            h: h / nodes,
            b: b / nodes,
            c0: c0 / nodes,
            lambda: self.lambda,
        }
    }
}

/// Source of per-slot problem data for slots `1..=horizon`.
pub trait SlotSource: Sync {
    fn horizon(&self) -> usize;
    fn nodes(&self) -> usize;
    fn dim(&self) -> usize;
    fn slot(&self, t: usize) -> SlotData;
}

/// Explicit list of slots; a single entry is repeated for every slot.
#[derive(Debug, Clone)]
pub struct FixedSlots {
    slots: Vec<SlotData>,
    horizon: usize,
}

impl FixedSlots {
    pub fn new(slots: Vec<SlotData>) -> Self {
        let horizon = slots.len();
        Self { slots, horizon }
    }

    /// The same slot at every time.
    pub fn repeated(slot: SlotData, horizon: usize) -> Self {
        Self {
            slots: vec![slot],
            horizon,
        }
    }
}

impl SlotSource for FixedSlots {
    fn horizon(&self) -> usize {
        self.horizon
    }
    fn nodes(&self) -> usize {
        self.slots[0].nodes()
    }
    fn dim(&self) -> usize {
        self.slots[0].dim()
    }
    fn slot(&self, t: usize) -> SlotData {
        assert!(
            t >= 1 && t <= self.horizon,
            "slot {t} outside 1..={}",
            self.horizon
        );
        if self.slots.len() == 1 {
            self.slots[0].clone()
        } else {
            self.slots[t - 1].clone()
        }
    }
}

/// Draws one slot of measurements of `u`.
pub fn sample_slot<R: Rng + ?Sized>(
    u: &RealVector,
    params: &ProblemParams,
    rng: &mut R,
) -> SlotData {
    let n = u.len();
    let std = match params.scale {
        MeasurementScale::Standard => 1.0,
        MeasurementScale::PerMeasurement => 1.0 / (params.d as f64).sqrt(),
    };
    let mut c = Vec::with_capacity(params.nodes);
    let mut y = Vec::with_capacity(params.nodes);
    for _ in 0..params.nodes {
        let ci = RealMatrix::from_fn(params.d, n, |_, _| {
            std * rng.sample::<f64, _>(StandardNormal)
        });
        let mut yi = &ci * u;
        if params.noise_std > 0.0 {
            for v in yi.iter_mut() {
                *v += params.noise_std * rng.sample::<f64, _>(StandardNormal);
            }
        }
        c.push(ci);
        y.push(yi);
    }
    SlotData {
        c,
        y,
        lambda: params.lambda,
        g: params.nonsmooth(),
    }
}

/// RNG streams derived from one run seed.
pub mod streams {
    pub const TARGET: u64 = 0;
    pub const SLOT_SEEDS: u64 = 1;
    pub const GRAPH_BASIS: u64 = 2;
    pub const GRAPH_SELECTION: u64 = 3;
    pub const INIT: u64 = 4;
}

/// Seeded RNG on a named stream.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Generated problem instance: target trace plus one RNG seed per slot, so
/// slot data can be regenerated on demand without storing it.
#[derive(Debug, Clone)]
pub struct ProblemStream {
    params: ProblemParams,
    seed: u64,
    targets: Vec<RealVector>,
    supports: Vec<Vec<usize>>,
    slot_seeds: Vec<u64>,
    frozen: bool,
}

impl ProblemStream {
    pub fn generate(params: ProblemParams, seed: u64, horizon: usize) -> Result<Self> {
        params.validate()?;
        if horizon == 0 {
            return Err(Error::InvalidArgument("horizon must be positive".into()));
        }
        let mut rng = stream_rng(seed, streams::TARGET);
        let mut state = TargetState::init(params.n, params.sparsity, &mut rng)?;
        let mut targets = Vec::with_capacity(horizon);
        let mut supports = Vec::with_capacity(horizon);
        for _ in 0..horizon {
            targets.push(state.u.clone());
            supports.push(state.support.clone());
            state.evolve(&mut rng);
        }
        let mut seed_rng = stream_rng(seed, streams::SLOT_SEEDS);
        let slot_seeds = (0..horizon).map(|_| seed_rng.next_u64()).collect();
        Ok(Self {
            params,
            seed,
            targets,
            supports,
            slot_seeds,
            frozen: false,
        })
    }

    /// A stream whose slot data never changes (`f_t = f_1`, `g_t = g_1`).
    pub fn frozen(params: ProblemParams, seed: u64, horizon: usize) -> Result<Self> {
        let mut s = Self::generate(params, seed, 1)?;
        s.targets = vec![s.targets[0].clone(); horizon];
        s.supports = vec![s.supports[0].clone(); horizon];
        s.slot_seeds = vec![s.slot_seeds[0]; horizon];
        s.frozen = true;
        Ok(s)
    }

    pub fn params(&self) -> &ProblemParams {
        &self.params
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    pub fn target(&self, t: usize) -> &RealVector {
        &self.targets[t - 1]
    }

    pub fn support(&self, t: usize) -> &[usize] {
        &self.supports[t - 1]
    }

    pub fn slot_seeds(&self) -> &[u64] {
        &self.slot_seeds
    }

    /// SHA-256 over the little-endian bytes of the target trace.
    pub fn target_digest(&self) -> String {
        let mut h = Sha256::new();
        for u in &self.targets {
            for v in u.iter() {
                h.update(v.to_le_bytes());
            }
        }
        hex(&h.finalize())
    }

    pub fn manifest(&self) -> ProblemManifest {
        let mut m = ProblemManifest {
            params: self.params,
            seed: self.seed,
            horizon: self.targets.len(),
            frozen: self.frozen,
            slot_seeds: self.slot_seeds.clone(),
            target_sha256: self.target_digest(),
            hash: String::new(),
        };
        m.hash = m.compute_hash();
        m
    }
}

impl SlotSource for ProblemStream {
    fn horizon(&self) -> usize {
        self.targets.len()
    }
    fn nodes(&self) -> usize {
        self.params.nodes
    }
    fn dim(&self) -> usize {
        self.params.n
    }
    fn slot(&self, t: usize) -> SlotData {
        let mut rng = ChaCha8Rng::seed_from_u64(self.slot_seeds[t - 1]);
        sample_slot(&self.targets[t - 1], &self.params, &mut rng)
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Reproducibility record for one problem instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemManifest {
    pub params: ProblemParams,
    pub seed: u64,
    pub horizon: usize,
    pub frozen: bool,
    pub slot_seeds: Vec<u64>,
    pub target_sha256: String,
    /// SHA-256 of the manifest with this field empty.
    pub hash: String,
}

impl ProblemManifest {
    pub fn compute_hash(&self) -> String {
        let mut copy = self.clone();
        copy.hash.clear();
        let bytes = serde_json::to_vec(&copy).expect("manifest serialises");
        hex(&Sha256::digest(&bytes))
    }
}

/// Oracle solution at one slot.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleRecord {
    pub x_star: RealVector,
    /// `‖x − prox(x − ∇f(x)/L)‖` at the returned point.
    pub residual: f64,
    /// `‖x_t⋆ − x_{t−1}⋆‖` (0 at the first slot).
    pub path_increment: f64,
    /// `ℓ_t(x_t⋆)`.
    pub value: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 100_000,
        }
    }
}

fn extreme_eigenvalues(h: &RealMatrix) -> (f64, f64) {
    let eig = SymmetricEigen::new(h.clone());
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    (min.max(0.0), max.max(0.0))
}

fn fixed_point_residual(q: &Quadratic, g: &NonsmoothSpec, x: &RealVector, step: f64) -> f64 {
    let p = prox_composite(&(x - q.gradient(x) * step), step, g);
    (x - p).norm()
}

/// Exact solve on a fixed sign pattern: `(2H_SS + 2λI) x_S = 2b_S − σ s_S`.
fn polish(q: &Quadratic, g: &NonsmoothSpec, x: &RealVector) -> Option<RealVector> {
    let support: Vec<usize> = (0..x.len()).filter(|&i| x[i] != 0.0).collect();
    if support.is_empty() {
        return Some(RealVector::zeros(x.len()));
    }
    let m = support.len();
    let a = RealMatrix::from_fn(m, m, |r, c| {
        2.0 * q.h[(support[r], support[c])] + if r == c { 2.0 * q.lambda } else { 0.0 }
    });
    let rhs = RealVector::from_fn(m, |r, _| {
        2.0 * q.b[support[r]] - g.sigma * x[support[r]].signum()
    });
    let sol = a.cholesky()?.solve(&rhs);
    let mut out = RealVector::zeros(x.len());
    for (r, &i) in support.iter().enumerate() {
        if sol[r].signum() != x[i].signum() {
            return None;
        }
        out[i] = sol[r];
    }
    if out.norm() > g.radius {
        return None;
    }
    Some(out)
}

/// Solves `min_x (1/N) Σ f^i(x) + g(x)` to fixed-point residual `opts.tol`
/// with restarted FISTA (step `1/L_t`), finished by an exact solve on the
/// detected sign pattern.
pub fn oracle_optimum(
    slot: &SlotData,
    warm: Option<&RealVector>,
    opts: OracleOptions,
) -> std::result::Result<OracleRecord, (f64, usize)> {
    let q = slot.quadratic();
    let (hmin, hmax) = extreme_eigenvalues(&q.h);
    let l = 2.0 * hmax + 2.0 * q.lambda;
    let mu = 2.0 * hmin + 2.0 * q.lambda;
    let n = slot.dim();
    if l == 0.0 {
        // f is constant: the prox of g at any point of its minimiser set
        let x = RealVector::zeros(n);
        let value = q.value(&x) + slot.g.value(&x);
        return Ok(OracleRecord {
            x_star: x,
            residual: 0.0,
            path_increment: 0.0,
            value,
            iterations: 0,
        });
    }
    let step = 1.0 / l;
    let g = &slot.g;
    let mut x = warm.cloned().unwrap_or_else(|| RealVector::zeros(n));
    if !g.radius.is_infinite() {
        x = crate::prox::project_ball(&x, g.radius);
    }
    let mut y = x.clone();
    let mut theta = 1.0f64;
    let strong_q = mu / l;
    let mut residual = fixed_point_residual(&q, g, &x, step);
    let mut it = 0;
    let mut next_polish = 1e-6f64;
    while residual > opts.tol && it < opts.max_iter {
        it += 1;
        let grad = q.gradient(&y);
        let x_new = prox_composite(&(&y - grad * step), step, g);
        let theta_new = (1.0 + (1.0 + 4.0 * theta * theta).sqrt()) / 2.0;
        let beta = if strong_q > 0.0 {
            let s = strong_q.sqrt();
            ((1.0 - s) / (1.0 + s)).min((theta - 1.0) / theta_new)
        } else {
            (theta - 1.0) / theta_new
        };
        // gradient-based adaptive restart
        let restart = (&y - &x_new).dot(&(&x_new - &x)) > 0.0;
        let momentum = &x_new - &x;
        x = x_new;
        if restart {
            theta = 1.0;
            y = x.clone();
        } else {
            theta = theta_new;
            y = &x + momentum * beta;
        }
        if it % 10 == 0 || it < 10 {
            residual = fixed_point_residual(&q, g, &x, step);
            if residual <= next_polish && residual > opts.tol {
                if let Some(p) = polish(&q, g, &x) {
                    let r = fixed_point_residual(&q, g, &p, step);
                    if r < residual {
                        x = p;
                        y = x.clone();
                        theta = 1.0;
                        residual = r;
                    }
                }
                next_polish = residual * 1e-2;
            }
        }
    }
    residual = fixed_point_residual(&q, g, &x, step);
    if residual > opts.tol {
        return Err((residual, it));
    }
    let value = q.value(&x) + g.value(&x);
    Ok(OracleRecord {
        x_star: x,
        residual,
        path_increment: 0.0,
        value,
        iterations: it,
    })
}

/// Oracle optimum at every slot of `source`, warm-started slot to slot.
pub fn oracle_trace<S: SlotSource + ?Sized>(
    source: &S,
    opts: OracleOptions,
    seed: u64,
) -> Result<Vec<OracleRecord>> {
    let mut out: Vec<OracleRecord> = Vec::with_capacity(source.horizon());
    for t in 1..=source.horizon() {
        let slot = source.slot(t);
        let warm = out.last().map(|r| &r.x_star);
        let mut rec = oracle_optimum(&slot, warm, opts).map_err(|(residual, iterations)| {
            Error::OracleFailure {
                slot: t,
                seed,
                residual,
                iterations,
            }
        })?;
        if let Some(prev) = out.last() {
            rec.path_increment = (&rec.x_star - &prev.x_star).norm();
        }
        out.push(rec);
    }
    Ok(out)
}

/// `C_T = Σ_{t=2}^{T} ‖x_t⋆ − x_{t−1}⋆‖`.
pub fn path_length(xs: &[RealVector]) -> Result<f64> {
    if xs.len() < 2 {
        return Err(Error::InvalidArgument(
            "path length needs at least two points".into(),
        ));
    }
    Ok(xs.windows(2).map(|w| (&w[1] - &w[0]).norm()).sum())
}

/// Smoothness `L`, strong convexity `μ` and Lipschitz bound `M` of the
/// per-node losses of one slot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothnessConstants {
    pub mu: f64,
    pub l: f64,
    pub m: f64,
}

impl SmoothnessConstants {
    /// Worst case over several slots.
    pub fn merge(self, other: Self) -> Self {
        Self {
            mu: self.mu.min(other.mu),
            l: self.l.max(other.l),
            m: self.m.max(other.m),
        }
    }

    /// `ρ = √(1 + α²L² − 2αμ)`.
    pub fn rho(&self, alpha: f64) -> f64 {
        (1.0 + alpha * alpha * self.l * self.l - 2.0 * alpha * self.mu)
            .max(0.0)
            .sqrt()
    }
}

/// `L = 2λ + 2 max_i σ_max(C_i)²`, `μ = 2λ + 2 min_i λ_min(C_iᵀC_i)` and
/// `M = max(2 max_i σ_max(C_i)(σ_max(C_i) R + ‖y_i‖) + 2λR, σ√n)`.
pub fn smoothness_constants(slot: &SlotData) -> SmoothnessConstants {
    let n = slot.dim();
    let r = slot.g.radius;
    let mut smax2 = 0.0f64;
    let mut lmin = f64::INFINITY;
    let mut m = 0.0f64;
    for (c, y) in slot.c.iter().zip(&slot.y) {
        let (d, _) = c.shape();
        // eigenvalues of the smaller Gram matrix
        let (lo, hi) = if d < n {
            let (_, hi) = extreme_eigenvalues(&(c * c.transpose()));
            (0.0, hi)
        } else {
            extreme_eigenvalues(&c.tr_mul(c))
        };
        smax2 = smax2.max(hi);
        lmin = lmin.min(lo);
        let smax = hi.sqrt();
        m = m.max(2.0 * smax * (smax * r + y.norm()) + 2.0 * slot.lambda * r);
    }
    m = m.max(slot.g.sigma * (n as f64).sqrt());
    SmoothnessConstants {
        mu: 2.0 * slot.lambda + 2.0 * lmin,
        l: 2.0 * slot.lambda + 2.0 * smax2,
        m,
    }
}
