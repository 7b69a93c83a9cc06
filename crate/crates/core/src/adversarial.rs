//! Worst-case chain quadratics and the audits that go with them.
//!
//! Each instance is built from truncated copies of the tridiagonal chain
//! `xᵀAx` (2 on the diagonal, −1 beside it). A first-order method started at
//! the origin can only light up one new chain coordinate per gradient query,
//! which yields explicit floors on the reachable gap. Chains are truncated to
//! the leading `d×d` minor with `q^{2d}` below a tolerance, so the closed-form
//! optimum `γq^j` is exact up to a negligible tail; gaps are measured against
//! the exact optimum of the truncated system.

use std::cell::RefCell;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg::Vector;
use crate::problems::{ComponentSpec, FiniteSum, OracleCounter};
use crate::trace::{Evaluator, Metrics};

pub const DEFAULT_TRUNCATION_TOL: f64 = 1e-16;

/// `Ax` for the `d×d` tridiagonal chain matrix, never materialized.
pub fn tridiag_apply(x: &Vector) -> Vector {
    let mut out = Vector::zeros(x.len());
    tridiag_apply_into(x.as_slice(), out.as_mut_slice());
    out
}

pub fn tridiag_apply_into(x: &[f64], out: &mut [f64]) {
    let d = x.len();
    for j in 0..d {
        let mut v = 2.0 * x[j];
        if j > 0 {
            v -= x[j - 1];
        }
        if j + 1 < d {
            v -= x[j + 1];
        }
        out[j] = v;
    }
}

fn chain_form(x: &[f64]) -> f64 {
    // xᵀAx = x₁² + Σ (x_j − x_{j+1})² + x_d²
    let d = x.len();
    if d == 0 {
        return 0.0;
    }
    let mut s = x[0] * x[0] + x[d - 1] * x[d - 1];
    for j in 0..d - 1 {
        let t = x[j] - x[j + 1];
        s += t * t;
    }
    s
}

/// `(√κ−1)/(√κ+1)`.
pub fn chain_ratio(kappa: f64) -> f64 {
    let r = kappa.sqrt();
    (r - 1.0) / (r + 1.0)
}

/// `√(1−q²)/q`, so that `‖(γq, γq², …)‖ = 1`. Zero when `q = 0`.
pub fn unit_gamma(q: f64) -> f64 {
    if q == 0.0 {
        0.0
    } else {
        (1.0 - q * q).sqrt() / q
    }
}

/// Smallest `d ≥ 1` with `q^{2d} < tol`.
pub fn truncation_depth(q: f64, tol: f64) -> usize {
    if q <= 0.0 {
        return 1;
    }
    let d = (tol.ln() / (2.0 * q.ln())).floor() as usize + 1;
    d.max(1)
}

/// Bound on the gradient residual of the closed-form optimum after truncation.
pub const RESIDUAL_TOL: f64 = 1e-9;

/// Depth for a chain with coefficient `2c` on `A` and offset `γ`: `q^{2d} < 1e-16`,
/// and the closed form's only residual, `2cγq^{d+1}` in the last row, at most [`RESIDUAL_TOL`].
pub fn chain_depth(q: f64, two_c: f64, gamma: f64) -> usize {
    let base = truncation_depth(q, DEFAULT_TRUNCATION_TOL);
    let scale = two_c * gamma;
    if q <= 0.0 || scale <= RESIDUAL_TOL {
        return base;
    }
    // q^{d+1} ≤ tol / scale
    let d = ((RESIDUAL_TOL / scale).ln() / q.ln()).ceil() as usize;
    base.max(d.saturating_sub(1)).max(1)
}

/// `(γq, γq², …, γq^d)`.
pub fn geometric_optimum(gamma: f64, q: f64, d: usize) -> Vector {
    let mut out = Vector::zeros(d);
    let mut p = q;
    for j in 0..d {
        out[j] = gamma * p;
        p *= q;
    }
    out
}

/// Solves `(cA + sI)x = r e₁` for the truncated chain by forward elimination.
pub fn solve_chain(c: f64, s: f64, r: f64, d: usize) -> Vector {
    let diag = 2.0 * c + s;
    let off = -c;
    let mut cp = vec![0.0; d];
    let mut dp = vec![0.0; d];
    cp[0] = off / diag;
    dp[0] = r / diag;
    for j in 1..d {
        let denom = diag - off * cp[j - 1];
        cp[j] = off / denom;
        dp[j] = -off * dp[j - 1] / denom;
    }
    let mut x = Vector::zeros(d);
    x[d - 1] = dp[d - 1];
    for j in (0..d - 1).rev() {
        x[j] = dp[j] - cp[j] * x[j + 1];
    }
    x
}

/// Index (1-based) of the last entry with magnitude above `tol`; 0 if none.
pub fn prefix_nonzero(x: &[f64], tol: f64) -> usize {
    x.iter().rposition(|v| v.abs() > tol).map_or(0, |p| p + 1)
}

/// `g(x) = ((L−μ)/8)(xᵀAx − 2γx₁) + (μ/2)‖x‖²` on one truncated chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainQuadratic {
    pub d: usize,
    pub smoothness: f64,
    pub strong_convexity: f64,
    pub gamma: f64,
}

impl ChainQuadratic {
    /// Uses `κ = L/μ` and the unit-distance `γ`; `d` defaults to the truncation depth.
    pub fn new(smoothness: f64, strong_convexity: f64, d: Option<usize>) -> Result<Self> {
        ComponentSpec::new(smoothness, strong_convexity)?;
        if !(strong_convexity > 0.0) {
            return Err(Error::InvalidParameter("chain needs μ > 0".into()));
        }
        let q = chain_ratio(smoothness / strong_convexity);
        let depth = chain_depth(q, (smoothness - strong_convexity) / 4.0, unit_gamma(q));
        let d = match d {
            Some(d) if d < depth => {
                return Err(Error::InvalidParameter(format!(
                    "truncation d = {d} is too shallow for the closed-form optimum; need d ≥ {depth}"
                )))
            }
            Some(d) => d,
            None => depth,
        };
        Ok(Self {
            d,
            smoothness,
            strong_convexity,
            gamma: unit_gamma(q),
        })
    }

    pub fn q(&self) -> f64 {
        chain_ratio(self.smoothness / self.strong_convexity)
    }

    fn c(&self) -> f64 {
        (self.smoothness - self.strong_convexity) / 8.0
    }

    pub fn closed_form_optimum(&self) -> Vector {
        geometric_optimum(self.gamma, self.q(), self.d)
    }

    /// Exact minimizer of the truncated chain.
    pub fn truncated_optimum(&self) -> Vector {
        solve_chain(2.0 * self.c(), self.strong_convexity, 2.0 * self.c() * self.gamma, self.d)
    }

    pub fn optimal_value(&self) -> f64 {
        let x = self.truncated_optimum();
        -self.c() * self.gamma * x[0]
    }
}

impl FiniteSum for ChainQuadratic {
    fn dim(&self) -> usize {
        self.d
    }

    fn len(&self) -> usize {
        1
    }

    fn spec(&self, _: usize) -> ComponentSpec {
        ComponentSpec {
            smoothness: self.smoothness,
            strong_convexity: self.strong_convexity,
        }
    }

    fn value(&self, _: usize, x: &Vector) -> f64 {
        self.c() * (chain_form(x.as_slice()) - 2.0 * self.gamma * x[0]) + 0.5 * self.strong_convexity * x.norm_squared()
    }

    fn gradient_into(&self, _: usize, x: &Vector, out: &mut Vector) {
        tridiag_apply_into(x.as_slice(), out.as_mut_slice());
        *out *= 2.0 * self.c();
        out[0] -= 2.0 * self.c() * self.gamma;
        out.axpy(self.strong_convexity, x, 1.0);
    }

    fn name(&self) -> &str {
        "chain-quadratic"
    }
}

/// `m` chains on disjoint coordinate blocks; component `i` owns block `i`
/// and carries `(μ_i/2)‖x‖²` over the whole vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteSumAdversarialInstance {
    pub d: usize,
    pub smoothness: Vec<f64>,
    pub strong_convexity: Vec<f64>,
    pub nu: Vec<f64>,
    pub q: Vec<f64>,
    pub gamma: Vec<f64>,
}

impl FiniteSumAdversarialInstance {
    /// Requires `L_i − μ_i > μ/m` with `μ = Σμ_i`.
    pub fn build(smoothness: &[f64], strong_convexity: &[f64], d: Option<usize>) -> Result<Self> {
        let m = smoothness.len();
        if m == 0 {
            return Err(Error::Empty("components"));
        }
        check_dim(m, strong_convexity.len())?;
        for i in 0..m {
            ComponentSpec::new(smoothness[i], strong_convexity[i])?;
        }
        let mu: f64 = strong_convexity.iter().sum();
        if !(mu > 0.0) {
            return Err(Error::InvalidParameter("need Σμ_i > 0".into()));
        }
        for i in 0..m {
            let excess = smoothness[i] - strong_convexity[i];
            if excess <= mu / m as f64 {
                return Err(Error::AssumptionViolated(format!(
                    "component {i}: L_i − μ_i = {excess} must exceed μ/m = {}",
                    mu / m as f64
                )));
            }
        }
        let nu: Vec<f64> = (0..m).map(|i| (smoothness[i] - strong_convexity[i]) / mu + 1.0).collect();
        let q: Vec<f64> = nu.iter().map(|&v| chain_ratio(v)).collect();
        let gamma: Vec<f64> = q.iter().map(|&v| unit_gamma(v)).collect();
        let depth = (0..m)
            .map(|i| chain_depth(q[i], (smoothness[i] - strong_convexity[i]) / 4.0, gamma[i]))
            .max()
            .unwrap_or(1);
        let d = match d {
            Some(d) if d < depth => {
                return Err(Error::InvalidParameter(format!(
                    "truncation d = {d} too small; need d ≥ {depth}"
                )))
            }
            Some(d) => d,
            None => depth,
        };
        Ok(Self {
            d,
            smoothness: smoothness.to_vec(),
            strong_convexity: strong_convexity.to_vec(),
            nu,
            q,
            gamma,
        })
    }

    pub fn mu_total(&self) -> f64 {
        self.strong_convexity.iter().sum()
    }

    fn c(&self, i: usize) -> f64 {
        (self.smoothness[i] - self.strong_convexity[i]) / 8.0
    }

    pub fn block<'v>(&self, x: &'v Vector, i: usize) -> &'v [f64] {
        &x.as_slice()[i * self.d..(i + 1) * self.d]
    }

    /// `x*_{ij} = γ_i q_i^j`.
    pub fn closed_form_optimum(&self) -> Vector {
        let m = self.len();
        let mut x = Vector::zeros(m * self.d);
        for i in 0..m {
            x.rows_mut(i * self.d, self.d)
                .copy_from(&geometric_optimum(self.gamma[i], self.q[i], self.d));
        }
        x
    }

    /// Exact minimizer of the truncated sum (each block solves its own chain system).
    pub fn truncated_optimum(&self) -> Vector {
        let m = self.len();
        let mu = self.mu_total();
        let mut x = Vector::zeros(m * self.d);
        for i in 0..m {
            let c = 2.0 * self.c(i);
            x.rows_mut(i * self.d, self.d)
                .copy_from(&solve_chain(c, mu, c * self.gamma[i], self.d));
        }
        x
    }

    /// `F(x*)`; block `i` contributes `−((L_i−μ_i)/8)γ_i x*_{i1}`.
    pub fn optimal_value(&self) -> f64 {
        let x = self.truncated_optimum();
        (0..self.len()).map(|i| -self.c(i) * self.gamma[i] * x[i * self.d]).sum()
    }

    /// `(μ/2) q_j^{2K_j}` for each block.
    pub fn gap_floors(&self, queries: &[u64]) -> Vec<f64> {
        let mu = self.mu_total();
        self.q
            .iter()
            .zip(queries)
            .map(|(&q, &k)| 0.5 * mu * q.powf(2.0 * k as f64))
            .collect()
    }

    /// Fewest queries to block `j` compatible with gap `eps`.
    pub fn min_queries(&self, eps: f64) -> Vec<u64> {
        let mu = self.mu_total();
        self.q
            .iter()
            .map(|&q| {
                if q == 0.0 || eps >= 0.5 * mu {
                    0
                } else {
                    ((0.5 * mu / eps).ln() / (2.0 * (1.0 / q).ln())).ceil().max(0.0) as u64
                }
            })
            .collect()
    }
}

impl FiniteSum for FiniteSumAdversarialInstance {
    fn dim(&self) -> usize {
        self.smoothness.len() * self.d
    }

    fn len(&self) -> usize {
        self.smoothness.len()
    }

    fn spec(&self, i: usize) -> ComponentSpec {
        ComponentSpec {
            smoothness: self.smoothness[i],
            strong_convexity: self.strong_convexity[i],
        }
    }

    fn value(&self, i: usize, x: &Vector) -> f64 {
        let b = self.block(x, i);
        self.c(i) * (chain_form(b) - 2.0 * self.gamma[i] * b[0]) + 0.5 * self.strong_convexity[i] * x.norm_squared()
    }

    fn gradient_into(&self, i: usize, x: &Vector, out: &mut Vector) {
        out.copy_from(x);
        *out *= self.strong_convexity[i];
        let d = self.d;
        let c2 = 2.0 * self.c(i);
        let mut chain = vec![0.0; d];
        tridiag_apply_into(self.block(x, i), &mut chain);
        let ob = &mut out.as_mut_slice()[i * d..(i + 1) * d];
        for j in 0..d {
            ob[j] += c2 * chain[j];
        }
        ob[0] -= c2 * self.gamma[i];
    }

    fn name(&self) -> &str {
        "adversarial-finite-sum"
    }
}

/// Paired chains for `min Σ g_i(p_i) s.t. Σp_i = 0`. Pair `k` uses chain block `k`
/// of components `2k` and `2k+1`, with opposite linear terms so the individual
/// minimizers already sum to zero. Component functions act on their own
/// variable `p_i`, all of dimension `⌊m/2⌋·d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualAdversarialInstance {
    pub d: usize,
    pub m: usize,
    pub smoothness: Vec<f64>,
    pub strong_convexity: Vec<f64>,
    pub q: Vec<f64>,
    pub gamma: Vec<f64>,
    /// Chain coefficient per component (zero for an odd tail).
    coef: Vec<f64>,
}

impl DualAdversarialInstance {
    /// `L`, `μ` per component. The leading component of each pair takes its
    /// chain scale from its partner, so its effective smoothness is
    /// `μ_{2k}·L_{2k+1}/μ_{2k+1}`; the reported constants are the effective ones.
    pub fn build(smoothness: &[f64], strong_convexity: &[f64], d: Option<usize>) -> Result<Self> {
        let m = smoothness.len();
        if m < 2 {
            return Err(Error::InvalidParameter("paired instance needs m ≥ 2".into()));
        }
        check_dim(m, strong_convexity.len())?;
        for i in 0..m {
            ComponentSpec::new(smoothness[i], strong_convexity[i])?;
            if !(strong_convexity[i] > 0.0) {
                return Err(Error::InvalidParameter(format!("component {i} needs μ > 0")));
            }
        }
        let pairs = m / 2;
        let mut q = Vec::with_capacity(pairs);
        let mut gamma = Vec::with_capacity(pairs);
        for k in 0..pairs {
            let (l, mu) = (smoothness[2 * k + 1], strong_convexity[2 * k + 1]);
            let qk = chain_ratio(l / mu);
            q.push(qk);
            gamma.push(unit_gamma(qk) * (2.0 / mu).sqrt());
        }
        let depth = (0..pairs)
            .map(|k| {
                let (l, mu) = (smoothness[2 * k + 1], strong_convexity[2 * k + 1]);
                // the leading member's coefficient is the larger one when μ_lead > μ
                let scale = (strong_convexity[2 * k] / mu).max(1.0);
                chain_depth(q[k], scale * (l - mu) / 4.0, gamma[k])
            })
            .max()
            .unwrap_or(1);
        let d = match d {
            Some(d) if d < depth => {
                return Err(Error::InvalidParameter(format!(
                    "truncation d = {d} too small; need d ≥ {depth}"
                )))
            }
            Some(d) => d,
            None => depth,
        };
        let mut coef = vec![0.0; m];
        let mut eff_l = smoothness.to_vec();
        for k in 0..pairs {
            let (l, mu) = (smoothness[2 * k + 1], strong_convexity[2 * k + 1]);
            let mu_lead = strong_convexity[2 * k];
            coef[2 * k] = (l - mu) * mu_lead / (8.0 * mu);
            coef[2 * k + 1] = (l - mu) / 8.0;
            eff_l[2 * k] = mu_lead * l / mu;
        }
        if m % 2 == 1 {
            eff_l[m - 1] = strong_convexity[m - 1];
        }
        Ok(Self {
            d,
            m,
            smoothness: eff_l,
            strong_convexity: strong_convexity.to_vec(),
            q,
            gamma,
            coef,
        })
    }

    pub fn pairs(&self) -> usize {
        self.m / 2
    }

    fn pair_of(&self, i: usize) -> Option<usize> {
        let k = i / 2;
        (k < self.pairs()).then_some(k)
    }

    /// `+1` for the leading member of a pair, `−1` for the trailing one.
    fn sign(i: usize) -> f64 {
        if i % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    }

    /// Closed-form `p*`: `±γ_k(q_k, q_k², …)` in block `k` of each pair member.
    pub fn closed_form_optimum(&self) -> Vec<Vector> {
        let n = self.dim();
        (0..self.m)
            .map(|i| {
                let mut p = Vector::zeros(n);
                if let Some(k) = self.pair_of(i) {
                    let g = geometric_optimum(self.gamma[k], self.q[k], self.d) * Self::sign(i);
                    p.rows_mut(k * self.d, self.d).copy_from(&g);
                }
                p
            })
            .collect()
    }

    /// Exact truncated minimizers; the pair members are exact negatives of each other.
    pub fn truncated_optimum(&self) -> Vec<Vector> {
        let n = self.dim();
        let mut out = vec![Vector::zeros(n); self.m];
        for k in 0..self.pairs() {
            let i = 2 * k + 1;
            let c = 2.0 * self.coef[i];
            let sol = solve_chain(c, self.strong_convexity[i], c * self.gamma[k], self.d);
            out[2 * k].rows_mut(k * self.d, self.d).copy_from(&sol);
            out[i].rows_mut(k * self.d, self.d).copy_from(&(-sol));
        }
        out
    }

    pub fn separable_objective(&self, blocks: &[Vector]) -> f64 {
        blocks.iter().enumerate().map(|(i, p)| self.value(i, p)).sum()
    }

    pub fn optimal_value(&self) -> f64 {
        self.separable_objective(&self.truncated_optimum())
    }

    /// `Σ_k q_k^{2K_k}` with `K_k` the queries to either member of pair `k`.
    pub fn gap_floor(&self, queries: &[u64]) -> f64 {
        (0..self.pairs())
            .map(|k| {
                let kk = queries[2 * k] + queries[2 * k + 1];
                self.q[k].powf(2.0 * kk as f64)
            })
            .sum()
    }

    pub fn pair_queries(&self, queries: &[u64]) -> Vec<u64> {
        (0..self.pairs()).map(|k| queries[2 * k] + queries[2 * k + 1]).collect()
    }
}

impl FiniteSum for DualAdversarialInstance {
    fn dim(&self) -> usize {
        self.pairs() * self.d
    }

    fn len(&self) -> usize {
        self.m
    }

    fn spec(&self, i: usize) -> ComponentSpec {
        ComponentSpec {
            smoothness: self.smoothness[i],
            strong_convexity: self.strong_convexity[i],
        }
    }

    fn value(&self, i: usize, p: &Vector) -> f64 {
        let mut v = 0.5 * self.strong_convexity[i] * p.norm_squared();
        if let Some(k) = self.pair_of(i) {
            let b = &p.as_slice()[k * self.d..(k + 1) * self.d];
            v += self.coef[i] * (chain_form(b) - 2.0 * Self::sign(i) * self.gamma[k] * b[0]);
        }
        v
    }

    fn gradient_into(&self, i: usize, p: &Vector, out: &mut Vector) {
        out.copy_from(p);
        *out *= self.strong_convexity[i];
        if let Some(k) = self.pair_of(i) {
            let d = self.d;
            let c2 = 2.0 * self.coef[i];
            let mut chain = vec![0.0; d];
            tridiag_apply_into(&p.as_slice()[k * d..(k + 1) * d], &mut chain);
            let ob = &mut out.as_mut_slice()[k * d..(k + 1) * d];
            for j in 0..d {
                ob[j] += c2 * chain[j];
            }
            ob[0] -= c2 * Self::sign(i) * self.gamma[k];
        }
    }

    fn name(&self) -> &str {
        "adversarial-paired"
    }
}

/// Audit of one iterate against the zero-chain property and the gap floors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundReport {
    pub queries: Vec<u64>,
    pub prefix: Vec<usize>,
    pub floors: Vec<f64>,
    pub floor: f64,
    pub gap: f64,
    pub zero_chain_violations: Vec<usize>,
    /// Fewest per-block queries any span-respecting method needs to reach `gap`.
    pub predicted_min_queries: Vec<u64>,
    pub predicted_total: u64,
}

impl LowerBoundReport {
    pub fn floor_holds(&self, slack: f64) -> bool {
        self.gap >= self.floor - slack
    }

    pub fn zero_chain_holds(&self) -> bool {
        self.zero_chain_violations.is_empty()
    }
}

/// Audits an iterate of a finite-sum adversarial run from the origin.
pub fn audit_lower_bound(instance: &FiniteSumAdversarialInstance, queries: &[u64], x: &Vector) -> LowerBoundReport {
    let m = instance.len();
    let prefix: Vec<usize> = (0..m).map(|i| prefix_nonzero(instance.block(x, i), 0.0)).collect();
    let floors = instance.gap_floors(queries);
    let floor = floors.iter().copied().fold(0.0, f64::max);
    let gap = instance.objective(x) - instance.optimal_value();
    let zero_chain_violations = (0..m).filter(|&i| prefix[i] as u64 > queries[i]).collect();
    let predicted_min_queries = instance.min_queries(gap.max(f64::MIN_POSITIVE));
    let predicted_total = predicted_min_queries.iter().sum();
    LowerBoundReport {
        queries: queries.to_vec(),
        prefix,
        floors,
        floor,
        gap,
        zero_chain_violations,
        predicted_min_queries,
        predicted_total,
    }
}

/// Audits stacked blocks `(p_1, …, p_m)` of a paired-instance run from the origin.
pub fn audit_dual_lower_bound(instance: &DualAdversarialInstance, queries: &[u64], stacked: &Vector) -> LowerBoundReport {
    let n = instance.dim();
    let d = instance.d;
    let blocks: Vec<Vector> = (0..instance.m).map(|i| stacked.rows(i * n, n).into_owned()).collect();
    let pq = instance.pair_queries(queries);
    // chain block k may be lit in any variable, but never beyond pair k's query count
    let prefix: Vec<usize> = (0..instance.pairs())
        .map(|k| {
            blocks
                .iter()
                .map(|p| prefix_nonzero(&p.as_slice()[k * d..(k + 1) * d], 0.0))
                .max()
                .unwrap_or(0)
        })
        .collect();
    let floors: Vec<f64> = (0..instance.pairs())
        .map(|k| instance.q[k].powf(2.0 * pq[k] as f64))
        .collect();
    let floor = floors.iter().sum();
    let gap = instance.separable_objective(&blocks) - instance.optimal_value();
    let zero_chain_violations = (0..instance.pairs()).filter(|&k| prefix[k] as u64 > pq[k]).collect();
    let predicted_min_queries: Vec<u64> = instance
        .q
        .iter()
        .map(|&q| {
            if q == 0.0 || gap >= 1.0 {
                0
            } else {
                ((1.0 / gap.max(f64::MIN_POSITIVE)).ln() / (2.0 * (1.0 / q).ln())).ceil() as u64
            }
        })
        .collect();
    let predicted_total = predicted_min_queries.iter().sum();
    LowerBoundReport {
        queries: pq,
        prefix,
        floors,
        floor,
        gap,
        zero_chain_violations,
        predicted_min_queries,
        predicted_total,
    }
}

/// Trace evaluator that audits every recorded iterate of a finite-sum instance.
pub struct AuditingEvaluator<'a> {
    instance: &'a FiniteSumAdversarialInstance,
    counter: &'a OracleCounter,
    optimum: Vector,
    optimal_value: f64,
    reports: RefCell<Vec<LowerBoundReport>>,
}

impl<'a> AuditingEvaluator<'a> {
    pub fn new(instance: &'a FiniteSumAdversarialInstance, counter: &'a OracleCounter) -> Self {
        Self {
            instance,
            counter,
            optimum: instance.truncated_optimum(),
            optimal_value: instance.optimal_value(),
            reports: RefCell::new(Vec::new()),
        }
    }

    pub fn reports(&self) -> Vec<LowerBoundReport> {
        self.reports.borrow().clone()
    }
}

impl Evaluator for AuditingEvaluator<'_> {
    fn evaluate(&self, x: &Vector) -> Metrics {
        let report = audit_lower_bound(self.instance, &self.counter.per_component(), x);
        let gap = self.instance.objective(x) - self.optimal_value;
        self.reports.borrow_mut().push(report);
        Metrics {
            gap,
            distance: Some((x - &self.optimum).norm()),
            infeasibility: None,
        }
    }
}

/// Same for the paired instance; iterates are stacked blocks.
pub struct DualAuditingEvaluator<'a> {
    instance: &'a DualAdversarialInstance,
    counter: &'a OracleCounter,
    reports: RefCell<Vec<LowerBoundReport>>,
}

impl<'a> DualAuditingEvaluator<'a> {
    pub fn new(instance: &'a DualAdversarialInstance, counter: &'a OracleCounter) -> Self {
        Self {
            instance,
            counter,
            reports: RefCell::new(Vec::new()),
        }
    }

    pub fn reports(&self) -> Vec<LowerBoundReport> {
        self.reports.borrow().clone()
    }
}

impl Evaluator for DualAuditingEvaluator<'_> {
    fn evaluate(&self, x: &Vector) -> Metrics {
        let report = audit_dual_lower_bound(self.instance, &self.counter.per_component(), x);
        let n = self.instance.dim();
        let mut residual = Vector::zeros(n);
        for i in 0..self.instance.m {
            residual += x.rows(i * n, n);
        }
        let gap = report.gap;
        self.reports.borrow_mut().push(report);
        Metrics {
            gap,
            distance: None,
            infeasibility: Some(residual.norm()),
        }
    }
}
