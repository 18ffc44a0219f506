//! Time-varying doubly stochastic mixing matrices.
//!
//! Mixing matrices are convex combinations of permutation matrices
//! (Birkhoff–von Neumann): `A_t = Σ_{j ∈ E_t} P^j / (ι + 1)` where `E_t`
//! always contains the identity `P^0` plus `ι` basis permutations drawn
//! fresh at every slot.
//!
//! Row `i` of a mixing matrix holds the weights node `i` puts on the values
//! it receives, i.e. `z^i ← Σ_j A^{ij} z^j`. A nonzero `A^{ij}` with `i ≠ j`
//! is a directed link `j → i`.

use std::io::{Read, Write};

use rand::seq::{index, SliceRandom};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::{RealMatrix, RealVector};

/// Tolerance on row and column sums.
pub const STOCHASTIC_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct MixingMatrix {
    pub weights: RealMatrix,
    pub slot: usize,
}

impl MixingMatrix {
    pub fn new(weights: RealMatrix, slot: usize) -> Self {
        Self { weights, slot }
    }

    /// `(1/N) · 1 1ᵀ`.
    pub fn complete(n: usize, slot: usize) -> Self {
        Self::new(RealMatrix::from_element(n, n, 1.0 / n as f64), slot)
    }

    pub fn n(&self) -> usize {
        self.weights.nrows()
    }

    /// Smallest nonzero entry.
    pub fn min_nonzero(&self) -> f64 {
        self.weights
            .iter()
            .copied()
            .filter(|&w| w != 0.0)
            .fold(f64::INFINITY, f64::min)
    }
}

/// How the `N − 1` non-identity basis permutations are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BasisKind {
    /// Randomly relabelled cyclic shifts: every permutation is a random
    /// row permutation of the identity and no two share an off-diagonal
    /// entry, so the union of their supports is the complete graph.
    #[default]
    Disjoint,
    /// Independent uniformly random row permutations.
    Independent,
}

/// `P^0 = I` followed by `N − 1` random permutations. Permutation `j` is
/// stored as the map `i ↦ π_j(i)` with `P^j_{i, π_j(i)} = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermutationBasis {
    perms: Vec<Vec<usize>>,
    seed: u64,
    kind: BasisKind,
}

impl PermutationBasis {
    pub fn generate(n: usize, seed: u64, kind: BasisKind) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidNetwork(format!(
                "need at least 2 nodes, got {n}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let identity: Vec<usize> = (0..n).collect();
        let mut perms = vec![identity.clone()];
        match kind {
            BasisKind::Independent => {
                for _ in 1..n {
                    let mut p = identity.clone();
                    p.shuffle(&mut rng);
                    perms.push(p);
                }
            }
            BasisKind::Disjoint => {
                let mut label = identity.clone();
                label.shuffle(&mut rng);
                let mut inverse = vec![0; n];
                for (i, &l) in label.iter().enumerate() {
                    inverse[l] = i;
                }
                let mut shifts: Vec<usize> = (1..n).collect();
                shifts.shuffle(&mut rng);
                for s in shifts {
                    perms.push((0..n).map(|i| inverse[(label[i] + s) % n]).collect());
                }
            }
        }
        Ok(Self { perms, seed, kind })
    }

    pub fn n(&self) -> usize {
        self.perms.len()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn kind(&self) -> BasisKind {
        self.kind
    }

    pub fn permutation(&self, j: usize) -> &[usize] {
        &self.perms[j]
    }

    pub fn matrix(&self, j: usize) -> RealMatrix {
        let n = self.n();
        let mut m = RealMatrix::zeros(n, n);
        for (i, &c) in self.perms[j].iter().enumerate() {
            m[(i, c)] = 1.0;
        }
        m
    }

    /// Uniform convex combination of `P^0` and the listed permutations.
    pub fn combine(&self, selection: &[usize]) -> RealMatrix {
        let n = self.n();
        let w = 1.0 / (selection.len() + 1) as f64;
        let mut m = RealMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] += w;
        }
        for &j in selection {
            for (i, &c) in self.perms[j].iter().enumerate() {
                m[(i, c)] += w;
            }
        }
        m
    }

    /// Draws the `ι` permutations used at one slot (sorted, without
    /// replacement, from `1..N`).
    pub fn draw_selection<R: Rng + ?Sized>(&self, iota: usize, rng: &mut R) -> Result<Vec<usize>> {
        let max = self.n() - 1;
        if iota < 1 || iota > max {
            return Err(Error::InvalidIota { iota, max });
        }
        let mut sel: Vec<usize> = index::sample(rng, max, iota)
            .into_iter()
            .map(|j| j + 1)
            .collect();
        sel.sort_unstable();
        Ok(sel)
    }

    /// One mixing matrix `A_t^{(ι)}` at `slot`.
    pub fn mixing_matrix<R: Rng + ?Sized>(
        &self,
        iota: usize,
        slot: usize,
        rng: &mut R,
    ) -> Result<MixingMatrix> {
        let sel = self.draw_selection(iota, rng)?;
        Ok(MixingMatrix::new(self.combine(&sel), slot))
    }
}

/// Weight floor used for the `A^{(ι)}` family: `min(2/N, 1/(ι+1))`.
pub fn eta_effective(n: usize, iota: usize) -> f64 {
    (2.0 / n as f64).min(1.0 / (iota + 1) as f64)
}

/// Per-slot mixing matrices for slots `1..=len`.
#[derive(Debug, Clone, PartialEq)]
pub enum MixingSequence {
    /// `(1/N) 1 1ᵀ` at every slot.
    Complete { n: usize, len: usize },
    /// `A^{(ι)}` with a fresh selection of basis permutations per slot.
    Permutations {
        basis: PermutationBasis,
        iota: usize,
        selections: Vec<Vec<usize>>,
    },
    /// Arbitrary matrices; entry `t − 1` is `A_t`.
    Explicit(Vec<RealMatrix>),
}

impl MixingSequence {
    pub fn complete(n: usize, len: usize) -> Self {
        MixingSequence::Complete { n, len }
    }

    /// Draws `len` slots of `A^{(ι)}`.
    pub fn random<R: Rng + ?Sized>(
        basis: PermutationBasis,
        iota: usize,
        len: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let selections = (0..len)
            .map(|_| basis.draw_selection(iota, rng))
            .collect::<Result<Vec<_>>>()?;
        Ok(MixingSequence::Permutations {
            basis,
            iota,
            selections,
        })
    }

    pub fn explicit(mats: Vec<RealMatrix>) -> Result<Self> {
        let n = mats
            .first()
            .ok_or_else(|| Error::InvalidArgument("empty mixing sequence".into()))?
            .nrows();
        for (t, m) in mats.iter().enumerate() {
            if m.nrows() != n || m.ncols() != n {
                return Err(Error::DimensionMismatch(format!(
                    "slot {} has shape {}x{}, expected {n}x{n}",
                    t + 1,
                    m.nrows(),
                    m.ncols()
                )));
            }
        }
        Ok(MixingSequence::Explicit(mats))
    }

    pub fn n(&self) -> usize {
        match self {
            MixingSequence::Complete { n, .. } => *n,
            MixingSequence::Permutations { basis, .. } => basis.n(),
            MixingSequence::Explicit(m) => m[0].nrows(),
        }
    }

    /// Number of slots covered.
    pub fn len(&self) -> usize {
        match self {
            MixingSequence::Complete { len, .. } => *len,
            MixingSequence::Permutations { selections, .. } => selections.len(),
            MixingSequence::Explicit(m) => m.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Weight floor the sequence is built to satisfy.
    pub fn eta(&self) -> f64 {
        match self {
            MixingSequence::Complete { n, .. } => 1.0 / *n as f64,
            MixingSequence::Permutations { basis, iota, .. } => eta_effective(basis.n(), *iota),
            MixingSequence::Explicit(m) => m
                .iter()
                .map(|a| {
                    a.iter()
                        .copied()
                        .filter(|&w| w != 0.0)
                        .fold(f64::INFINITY, f64::min)
                })
                .fold(f64::INFINITY, f64::min),
        }
    }

    fn check_slot(&self, t: usize) -> Result<()> {
        if t == 0 || t > self.len() {
            return Err(Error::Config(format!(
                "no mixing matrix for slot {t} (sequence covers 1..={})",
                self.len()
            )));
        }
        Ok(())
    }

    /// `A_t` for 1-based slot `t`.
    pub fn matrix(&self, t: usize) -> Result<MixingMatrix> {
        self.check_slot(t)?;
        let w = match self {
            MixingSequence::Complete { n, .. } => return Ok(MixingMatrix::complete(*n, t)),
            MixingSequence::Permutations {
                basis, selections, ..
            } => basis.combine(&selections[t - 1]),
            MixingSequence::Explicit(m) => m[t - 1].clone(),
        };
        Ok(MixingMatrix::new(w, t))
    }

    /// Directed links `(i, j)` with `i ≠ j` and `A_t^{ij} ≠ 0`.
    pub fn links(&self, t: usize) -> Result<Vec<(usize, usize)>> {
        self.check_slot(t)?;
        let n = self.n();
        let mut out = Vec::new();
        match self {
            MixingSequence::Complete { .. } => {
                for i in 0..n {
                    for j in 0..n {
                        if i != j {
                            out.push((i, j));
                        }
                    }
                }
            }
            MixingSequence::Permutations {
                basis, selections, ..
            } => {
                for &p in &selections[t - 1] {
                    for (i, &j) in basis.permutation(p).iter().enumerate() {
                        if i != j {
                            out.push((i, j));
                        }
                    }
                }
                out.sort_unstable();
                out.dedup();
            }
            MixingSequence::Explicit(m) => {
                let a = &m[t - 1];
                for i in 0..n {
                    for j in 0..n {
                        if i != j && a[(i, j)] != 0.0 {
                            out.push((i, j));
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    /// `z ← A_t z` for a stack of node vectors, summing in ascending `j`.
    pub fn apply(&self, t: usize, z: &[RealVector]) -> Result<Vec<RealVector>> {
        let a = self.matrix(t)?;
        mix(&a.weights, z)
    }

    /// Dumps `(slot, i, j, weight)` for every nonzero entry.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["slot", "i", "j", "weight"])?;
        let n = self.n();
        for t in 1..=self.len() {
            let a = self.matrix(t)?;
            for i in 0..n {
                for j in 0..n {
                    let v = a.weights[(i, j)];
                    if v != 0.0 {
                        wtr.write_record([
                            t.to_string(),
                            i.to_string(),
                            j.to_string(),
                            format!("{v:e}"),
                        ])?;
                    }
                }
            }
        }
        wtr.flush()?;
        Ok(())
    }

    /// Loads a dump written by [`write_csv`](Self::write_csv).
    pub fn read_csv<R: Read>(r: R, n: usize) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let mut mats: Vec<RealMatrix> = Vec::new();
        for rec in rdr.deserialize() {
            let (slot, i, j, w): (usize, usize, usize, f64) = rec?;
            if slot == 0 || i >= n || j >= n {
                return Err(Error::InvalidArgument(format!(
                    "bad mixing entry (slot {slot}, i {i}, j {j})"
                )));
            }
            while mats.len() < slot {
                mats.push(RealMatrix::zeros(n, n));
            }
            mats[slot - 1][(i, j)] = w;
        }
        MixingSequence::explicit(mats)
    }
}

/// `y^i = Σ_j A^{ij} z^j` in ascending `j`.
pub fn mix(a: &RealMatrix, z: &[RealVector]) -> Result<Vec<RealVector>> {
    let n = a.nrows();
    if a.ncols() != n || z.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "mixing matrix {}x{} applied to {} node vectors",
            a.nrows(),
            a.ncols(),
            z.len()
        )));
    }
    let dim = z[0].len();
    Ok((0..n)
        .map(|i| {
            let mut acc = RealVector::zeros(dim);
            for (j, zj) in z.iter().enumerate() {
                let w = a[(i, j)];
                if w != 0.0 {
                    acc.axpy(w, zj, 1.0);
                }
            }
            acc
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClauseCheck {
    pub passed: bool,
    /// Largest violation found (0 when passed).
    pub worst: f64,
    /// Location of the worst violation, `(row, col)`; for sum clauses the
    /// unused index is `usize::MAX`.
    pub at: Option<(usize, usize)>,
}

impl ClauseCheck {
    fn ok() -> Self {
        Self {
            passed: true,
            worst: 0.0,
            at: None,
        }
    }

    fn record(&mut self, violation: f64, at: (usize, usize)) {
        if violation > self.worst {
            self.worst = violation;
            self.at = Some(at);
        }
        self.passed = false;
    }
}

/// Outcome of checking the three weight-matrix clauses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ValidationReport {
    /// Row and column sums equal one.
    pub doubly_stochastic: ClauseCheck,
    /// Every nonzero entry is at least `η`.
    pub lower_bounded: ClauseCheck,
    /// Every diagonal entry is at least `η`.
    pub positive_diagonal: ClauseCheck,
    pub eta: f64,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.doubly_stochastic.passed && self.lower_bounded.passed && self.positive_diagonal.passed
    }
}

/// Checks double stochasticity (to [`STOCHASTIC_TOL`]), the `η` floor on
/// nonzero entries, and the diagonal floor.
pub fn validate(a: &RealMatrix, eta: f64) -> Result<ValidationReport> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "mixing matrix must be square, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let mut ds = ClauseCheck::ok();
    for i in 0..n {
        let r = (a.row(i).sum() - 1.0).abs();
        if r > STOCHASTIC_TOL {
            ds.record(r, (i, usize::MAX));
        }
        let c = (a.column(i).sum() - 1.0).abs();
        if c > STOCHASTIC_TOL {
            ds.record(c, (usize::MAX, i));
        }
    }
    // relative slack so that 1/(ι+1) computed two ways compares equal
    let floor = eta * (1.0 - 1e-12);
    let mut lb = ClauseCheck::ok();
    let mut diag = ClauseCheck::ok();
    for i in 0..n {
        for j in 0..n {
            let w = a[(i, j)];
            if w < 0.0 || (w != 0.0 && w < floor) {
                lb.record(eta - w, (i, j));
            }
        }
        if a[(i, i)] < floor {
            diag.record(eta - a[(i, i)], (i, i));
        }
    }
    Ok(ValidationReport {
        doubly_stochastic: ds,
        lower_bounded: lb,
        positive_diagonal: diag,
        eta,
    })
}

/// Constants of the geometric bound `|Q^{ij} − 1/N| ≤ Γ γ^{S−1}`.
///
/// `ω = η^{(N−1)B}` is often far below machine epsilon, in which case
/// `γ = (1 − ω)^{1/B}` rounds to one; `log_gamma` keeps the exact exponent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContractionConstants {
    pub eta: f64,
    pub b: usize,
    pub n: usize,
    pub omega: f64,
    pub big_gamma: f64,
    pub gamma: f64,
    pub log_gamma: f64,
}

impl ContractionConstants {
    pub fn new(eta: f64, n: usize, b: usize) -> Result<Self> {
        if !(eta > 0.0 && eta <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "eta must lie in (0, 1], got {eta}"
            )));
        }
        if n < 2 {
            return Err(Error::InvalidNetwork(format!("need N >= 2, got {n}")));
        }
        if b < 1 {
            return Err(Error::InvalidArgument("B must be at least 1".into()));
        }
        let exponent = ((n - 1) * b) as f64;
        let omega = (exponent * eta.ln()).exp();
        if omega >= 1.0 {
            return Err(Error::InvalidArgument(format!(
                "omega = {omega} leaves 1 - omega = 0 (eta = {eta}); the bound is undefined"
            )));
        }
        let big_gamma = 2.0 * (omega + 1.0) / (omega * (1.0 - omega));
        if omega == 0.0 || !big_gamma.is_finite() {
            return Err(Error::Underflow(format!(
                "omega = eta^((N-1)B) = {eta}^{exponent} underflows; reduce N*B for diagnostics"
            )));
        }
        let log_gamma = (-omega).ln_1p() / b as f64;
        Ok(Self {
            eta,
            b,
            n,
            omega,
            big_gamma,
            gamma: log_gamma.exp(),
            log_gamma,
        })
    }

    /// `Γ γ^{s−1}`.
    pub fn bound(&self, s: usize) -> f64 {
        self.big_gamma * (self.log_gamma * (s as f64 - 1.0)).exp()
    }
}

/// `Q = A_last ⋯ A_first` for matrices listed in slot order.
pub fn consensus_product(mats: &[&RealMatrix]) -> Result<RealMatrix> {
    let first = mats
        .first()
        .ok_or_else(|| Error::InvalidArgument("empty product".into()))?;
    let n = first.nrows();
    let mut q = RealMatrix::identity(n, n);
    for a in mats {
        if a.nrows() != n || a.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "factor {}x{} in a product of {n}x{n} matrices",
                a.nrows(),
                a.ncols()
            )));
        }
        q = *a * q;
    }
    Ok(q)
}

/// `max_{ij} |Q^{ij} − 1/N|`.
pub fn max_deviation_from_average(q: &RealMatrix) -> f64 {
    let inv = 1.0 / q.nrows() as f64;
    q.iter().map(|&x| (x - inv).abs()).fold(0.0, f64::max)
}

fn connected_undirected(n: usize, edges: &[(usize, usize)]) -> bool {
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    let mut components = n;
    for &(a, b) in edges {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            parent[ra] = rb;
            components -= 1;
        }
    }
    components == 1
}

/// Tests that the union of links over every aligned window of `b` slots has
/// a connected undirected support.
pub fn check_b_connectivity(mats: &[RealMatrix], b: usize) -> Result<bool> {
    if b == 0 || mats.is_empty() || !mats.len().is_multiple_of(b) {
        return Err(Error::InvalidArgument(format!(
            "window of {} slots is not a positive multiple of B = {b}",
            mats.len()
        )));
    }
    let n = mats[0].nrows();
    for window in mats.chunks(b) {
        let mut edges = Vec::new();
        for a in window {
            for i in 0..n {
                for j in 0..n {
                    if i != j && a[(i, j)] != 0.0 {
                        edges.push((i, j));
                    }
                }
            }
        }
        if !connected_undirected(n, &edges) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Same check directly on a [`MixingSequence`] over slots `1..=len`.
pub fn sequence_b_connected(seq: &MixingSequence, b: usize) -> Result<bool> {
    let len = seq.len();
    if b == 0 || len == 0 || !len.is_multiple_of(b) {
        return Err(Error::InvalidArgument(format!(
            "window of {len} slots is not a positive multiple of B = {b}"
        )));
    }
    let n = seq.n();
    for start in (1..=len).step_by(b) {
        let mut edges = Vec::new();
        for t in start..start + b {
            edges.extend(seq.links(t)?);
        }
        if !connected_undirected(n, &edges) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Smallest `B ≤ b_max` for which every complete aligned window of `B`
/// slots is connected.
pub fn connectivity_window(seq: &MixingSequence, b_max: usize) -> Result<Option<usize>> {
    let n = seq.n();
    let len = seq.len();
    for b in 1..=b_max.min(len) {
        let mut ok = true;
        for start in (1..=len - b + 1).step_by(b) {
            let mut edges = Vec::new();
            for t in start..start + b {
                edges.extend(seq.links(t)?);
            }
            if !connected_undirected(n, &edges) {
                ok = false;
                break;
            }
        }
        if ok {
            return Ok(Some(b));
        }
    }
    Ok(None)
}

/// How update-related information may travel in the communication-
/// constrained baselines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HopMode {
    /// Every ordered pair must share a direct link at some slot.
    SingleHop,
    /// Time-respecting relaying; one hop per slot.
    MultiHop,
}

struct BitRows {
    words: usize,
    bits: Vec<u64>,
}

impl BitRows {
    fn identity(n: usize) -> Self {
        let words = n.div_ceil(64);
        let mut bits = vec![0u64; n * words];
        for i in 0..n {
            bits[i * words + i / 64] |= 1 << (i % 64);
        }
        Self { words, bits }
    }

    fn row(&self, i: usize) -> &[u64] {
        &self.bits[i * self.words..(i + 1) * self.words]
    }

    fn full(&self, n: usize) -> bool {
        (0..n).all(|i| {
            let r = self.row(i);
            (0..n).all(|j| r[j / 64] >> (j % 64) & 1 == 1)
        })
    }
}

/// Number of slots, starting at `t0`, until information has been fully
/// disseminated between every ordered pair of nodes.
pub fn dissemination_delay(seq: &MixingSequence, t0: usize, mode: HopMode) -> Result<usize> {
    let n = seq.n();
    let len = seq.len();
    if t0 == 0 {
        return Err(Error::InvalidArgument("slots are 1-based".into()));
    }
    match mode {
        HopMode::SingleHop => {
            let mut covered = vec![false; n * n];
            let mut missing = n * (n - 1);
            for t in t0..=len {
                for (i, j) in seq.links(t)? {
                    let c = &mut covered[i * n + j];
                    if !*c {
                        *c = true;
                        missing -= 1;
                    }
                }
                if missing == 0 {
                    return Ok(t - t0 + 1);
                }
            }
        }
        HopMode::MultiHop => {
            let mut reach = BitRows::identity(n);
            let words = reach.words;
            for t in t0..=len {
                let mut next = reach.bits.clone();
                for (i, j) in seq.links(t)? {
                    // i hears from j: i learns everything j knew before slot t
                    for w in 0..words {
                        next[i * words + w] |= reach.bits[j * words + w];
                    }
                }
                reach.bits = next;
                if reach.full(n) {
                    return Ok(t - t0 + 1);
                }
            }
        }
    }
    Err(Error::InsufficientHorizon {
        start: t0,
        available: len.saturating_sub(t0 - 1),
    })
}
