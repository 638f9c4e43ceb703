//! Finite-alphabet probability types and the information measures the rest of
//! the toolkit consumes.
//!
//! All entropic quantities here are in bits (`log2`); natural-log units appear
//! only inside `funcineq`, where each function documents its base. Entries
//! below [`SUPPORT_EPS`] count as exact zeros for support computations.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Probabilities below this threshold are treated as exact zeros when
/// computing supports, avoiding log-of-underflow noise.
pub const SUPPORT_EPS: f64 = 1e-15;

/// Normalization slack accepted at construction; larger deviations are
/// rejected as real bugs rather than I/O rounding.
pub const NORMALIZE_TOL: f64 = 1e-9;

pub(crate) fn log2_safe(x: f64) -> f64 {
    x.log2()
}

/// `x log2 x` with the convention `0 log 0 = 0`.
pub(crate) fn xlog2x(x: f64) -> f64 {
    if x <= SUPPORT_EPS {
        0.0
    } else {
        x * x.log2()
    }
}

/// A probability mass function over an indexed finite alphabet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pmf {
    pub probs: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub labels: Option<Vec<String>>,
}

impl Pmf {
    /// Builds a pmf, renormalizing inputs whose sum deviates from 1 by at most
    /// [`NORMALIZE_TOL`]. Negative entries or larger deviations are rejected.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidDistribution("empty alphabet".into()));
        }
        if let Some(&bad) = probs.iter().find(|&&p| p < -SUPPORT_EPS || !p.is_finite()) {
            return Err(Error::InvalidDistribution(format!("negative or non-finite mass {bad}")));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > NORMALIZE_TOL {
            return Err(Error::InvalidDistribution(format!("mass sums to {sum}")));
        }
        let probs = probs.into_iter().map(|p| (p / sum).max(0.0)).collect();
        Ok(Self { probs, labels: None })
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Self {
        self.labels = Some(labels);
        self
    }

    pub fn uniform(n: usize) -> Self {
        Self { probs: vec![1.0 / n as f64; n], labels: None }
    }

    /// `Bern(a)` in the order `(P(0), P(1)) = (1-a, a)`.
    pub fn bernoulli(a: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&a) {
            return Err(Error::DomainError(format!("Bernoulli parameter {a} outside [0,1]")));
        }
        Ok(Self { probs: vec![1.0 - a, a], labels: None })
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Indices carrying probability above [`SUPPORT_EPS`].
    pub fn support(&self) -> Vec<usize> {
        self.probs
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > SUPPORT_EPS)
            .map(|(i, _)| i)
            .collect()
    }
}

/// A joint pmf stored as a row-major `|X| x |Y|` grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointPmf {
    pub probs: Vec<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub row_labels: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub col_labels: Option<Vec<String>>,
}

impl JointPmf {
    pub fn new(probs: Vec<Vec<f64>>) -> Result<Self> {
        if probs.is_empty() || probs[0].is_empty() {
            return Err(Error::InvalidDistribution("empty joint grid".into()));
        }
        let cols = probs[0].len();
        if probs.iter().any(|r| r.len() != cols) {
            return Err(Error::InvalidDistribution("ragged joint grid".into()));
        }
        for &p in probs.iter().flatten() {
            if p < -SUPPORT_EPS || !p.is_finite() {
                return Err(Error::InvalidDistribution(format!("negative or non-finite mass {p}")));
            }
        }
        let sum: f64 = probs.iter().flatten().sum();
        if (sum - 1.0).abs() > NORMALIZE_TOL {
            return Err(Error::InvalidDistribution(format!("joint mass sums to {sum}")));
        }
        let probs = probs
            .into_iter()
            .map(|row| row.into_iter().map(|p| (p / sum).max(0.0)).collect())
            .collect();
        Ok(Self { probs, row_labels: None, col_labels: None })
    }

    pub fn nx(&self) -> usize {
        self.probs.len()
    }

    pub fn ny(&self) -> usize {
        self.probs[0].len()
    }

    pub fn marginal_x(&self) -> Pmf {
        let probs = self.probs.iter().map(|row| row.iter().sum()).collect();
        Pmf { probs, labels: self.row_labels.clone() }
    }

    pub fn marginal_y(&self) -> Pmf {
        let ny = self.ny();
        let mut probs = vec![0.0; ny];
        for row in &self.probs {
            for (j, &p) in row.iter().enumerate() {
                probs[j] += p;
            }
        }
        Pmf { probs, labels: self.col_labels.clone() }
    }

    /// Absolute continuity: true iff `supp(self)` is contained in `supp(other)`.
    pub fn ll(&self, other: &JointPmf) -> bool {
        if self.nx() != other.nx() || self.ny() != other.ny() {
            return false;
        }
        self.probs.iter().zip(&other.probs).all(|(a, b)| {
            a.iter().zip(b).all(|(&p, &q)| p <= SUPPORT_EPS || q > SUPPORT_EPS)
        })
    }

    /// Product of the own marginals.
    pub fn product_of_marginals(&self) -> JointPmf {
        let mx = self.marginal_x();
        let my = self.marginal_y();
        let probs = mx
            .probs
            .iter()
            .map(|&px| my.probs.iter().map(|&py| px * py).collect())
            .collect();
        JointPmf { probs, row_labels: self.row_labels.clone(), col_labels: self.col_labels.clone() }
    }

    pub fn flat(&self) -> Vec<f64> {
        self.probs.iter().flatten().copied().collect()
    }
}

/// Doubly symmetric binary source with correlation `rho in (-1,1)`:
/// uniform `X`, `Y = X xor Bern(p)` with crossover `p = (1-rho)/2`, and the
/// latent representation `X = W xor A`, `Y = W xor B` with `A, B ~ Bern(a)`,
/// `a * a = p` in the binary-convolution sense.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DsbsParams {
    pub rho: f64,
}

impl DsbsParams {
    pub fn from_rho(rho: f64) -> Result<Self> {
        if !(-1.0..=1.0).contains(&rho) || rho.abs() >= 1.0 {
            return Err(Error::DomainError(format!("correlation {rho} outside (-1,1)")));
        }
        Ok(Self { rho })
    }

    pub fn from_crossover(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::DomainError(format!("crossover {p} outside [0,1]")));
        }
        Self::from_rho(1.0 - 2.0 * p)
    }

    /// From the latent noise level `a in (0, 1/2)`; `p = a * a = 2a(1-a)`.
    pub fn from_noise(a: f64) -> Result<Self> {
        if !(0.0..0.5).contains(&a) && a != 0.0 {
            return Err(Error::DomainError(format!("noise parameter {a} outside [0,1/2)")));
        }
        Self::from_crossover(conv(a, a))
    }

    pub fn crossover(&self) -> f64 {
        (1.0 - self.rho) / 2.0
    }

    /// The unique `a in [0, 1/2)` with `a * a = p`.
    pub fn noise(&self) -> f64 {
        let p = self.crossover();
        (1.0 - (1.0 - 2.0 * p).sqrt()) / 2.0
    }

    pub fn alpha(&self) -> f64 {
        (1.0 - self.crossover()) / 2.0
    }

    pub fn beta(&self) -> f64 {
        self.crossover() / 2.0
    }

    /// The joint grid `[[alpha, beta], [beta, alpha]]`.
    pub fn to_joint(&self) -> JointPmf {
        let (al, be) = (self.alpha(), self.beta());
        JointPmf::new(vec![vec![al, be], vec![be, al]]).expect("valid by construction")
    }
}

/// Symmetric binary erasure source: uniform binary `X`, ternary
/// `Y in {0, e, 1}` (in that fixed order) with erasure probability `p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SbesParams {
    pub p: f64,
}

impl SbesParams {
    pub fn new(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::DomainError(format!("erasure probability {p} outside [0,1]")));
        }
        Ok(Self { p })
    }

    /// Joint grid with Y-columns ordered `(0, e, 1)`.
    pub fn to_joint(&self) -> JointPmf {
        let p = self.p;
        JointPmf::new(vec![
            vec![(1.0 - p) / 2.0, p / 2.0, 0.0],
            vec![0.0, p / 2.0, (1.0 - p) / 2.0],
        ])
        .expect("valid by construction")
    }
}

/// Standard bivariate Gaussian pair with unit variances and correlation `rho`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianPair {
    pub rho: f64,
}

impl GaussianPair {
    pub fn new(rho: f64) -> Result<Self> {
        if rho.abs() >= 1.0 {
            return Err(Error::DomainError(format!("correlation {rho} outside (-1,1)")));
        }
        Ok(Self { rho })
    }

    pub fn covariance(&self) -> [[f64; 2]; 2] {
        [[1.0, self.rho], [self.rho, 1.0]]
    }
}

/// Shannon entropy `H(p)` in bits.
pub fn shannon_entropy(p: &Pmf) -> f64 {
    -p.probs.iter().map(|&x| xlog2x(x)).sum::<f64>()
}

/// Shannon entropy of a joint grid in bits.
pub fn joint_entropy(j: &JointPmf) -> f64 {
    -j.probs.iter().flatten().map(|&x| xlog2x(x)).sum::<f64>()
}

/// Rényi divergence `D_order(p || q)` in bits, for `order in [0, inf]`.
///
/// For `order > 1` (including `inf`) the convention `D = +inf` applies when
/// `p` is not absolutely continuous with respect to `q`; this is a documented
/// return value, not a failure.
pub fn renyi_divergence(p: &Pmf, q: &Pmf, order: f64) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::AlphabetMismatch(format!("|X|={} vs {}", p.len(), q.len())));
    }
    if order < 0.0 || order.is_nan() {
        return Err(Error::DomainError(format!("Rényi order {order} must be >= 0")));
    }
    let not_ac = p
        .probs
        .iter()
        .zip(&q.probs)
        .any(|(&pi, &qi)| pi > SUPPORT_EPS && qi <= SUPPORT_EPS);

    if order == 1.0 {
        if not_ac {
            return Ok(f64::INFINITY);
        }
        let kl = p
            .probs
            .iter()
            .zip(&q.probs)
            .filter(|(&pi, _)| pi > SUPPORT_EPS)
            .map(|(&pi, &qi)| pi * log2_safe(pi / qi))
            .sum::<f64>();
        return Ok(kl.max(0.0));
    }
    if order.is_infinite() {
        if not_ac {
            return Ok(f64::INFINITY);
        }
        let max_ratio = p
            .probs
            .iter()
            .zip(&q.probs)
            .filter(|(&pi, _)| pi > SUPPORT_EPS)
            .map(|(&pi, &qi)| pi / qi)
            .fold(0.0f64, f64::max);
        return Ok(log2_safe(max_ratio).max(0.0));
    }
    if order == 0.0 {
        // -log Q(supp P).
        let mass: f64 = p
            .probs
            .iter()
            .zip(&q.probs)
            .filter(|(&pi, _)| pi > SUPPORT_EPS)
            .map(|(_, &qi)| qi)
            .sum();
        return Ok(-log2_safe(mass.min(1.0)));
    }
    let s = order - 1.0;
    if order > 1.0 && not_ac {
        return Ok(f64::INFINITY);
    }
    let mut acc = 0.0;
    for (&pi, &qi) in p.probs.iter().zip(&q.probs) {
        if pi <= SUPPORT_EPS {
            continue;
        }
        acc += pi.powf(order) * qi.powf(-s);
    }
    Ok((log2_safe(acc) / s).max(0.0))
}

/// Relative entropy `D(p || q)` in bits.
pub fn relative_entropy(p: &Pmf, q: &Pmf) -> Result<f64> {
    renyi_divergence(p, q, 1.0)
}

/// Total variation distance in `[0, 1]`.
pub fn tv_distance(p: &Pmf, q: &Pmf) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::AlphabetMismatch(format!("|X|={} vs {}", p.len(), q.len())));
    }
    Ok(0.5 * p.probs.iter().zip(&q.probs).map(|(a, b)| (a - b).abs()).sum::<f64>())
}

/// Mutual information `I(X;Y)` of a joint pmf, in bits.
pub fn mutual_information(j: &JointPmf) -> f64 {
    let mx = j.marginal_x().probs;
    let my = j.marginal_y().probs;
    let mut acc = 0.0;
    for (i, row) in j.probs.iter().enumerate() {
        for (k, &p) in row.iter().enumerate() {
            if p > SUPPORT_EPS {
                acc += p * log2_safe(p / (mx[i] * my[k]));
            }
        }
    }
    acc.max(0.0)
}

/// Binary entropy `h(a)` in bits.
pub fn binary_entropy(a: f64) -> f64 {
    if a <= 0.0 || a >= 1.0 {
        0.0
    } else {
        -a * a.log2() - (1.0 - a) * (1.0 - a).log2()
    }
}

/// Inverse of `h` restricted to `[0, 1/2]`, by bisection.
pub fn binary_entropy_inv(y: f64) -> Result<f64> {
    if !(0.0..=1.0 + 1e-12).contains(&y) {
        return Err(Error::DomainError(format!("h^-1 argument {y} outside [0,1]")));
    }
    let y = y.min(1.0);
    let (mut lo, mut hi) = (0.0f64, 0.5f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if binary_entropy(mid) < y {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Natural-log binary entropy `h_e(a)` in nats.
pub fn binary_entropy_nats(a: f64) -> f64 {
    binary_entropy(a) * std::f64::consts::LN_2
}

/// Inverse of the natural-log binary entropy restricted to `[0, 1/2]`.
pub fn binary_entropy_nats_inv(y: f64) -> Result<f64> {
    binary_entropy_inv(y / std::f64::consts::LN_2)
}

/// Binary convolution `a * b = a(1-b) + b(1-a)`.
pub fn conv(a: f64, b: f64) -> f64 {
    a * (1.0 - b) + b * (1.0 - a)
}

/// Binary Rényi divergence `d_{order}(p || q)` in bits. The order-1 case is
/// the binary relative entropy.
pub fn binary_renyi_divergence(p: f64, q: f64, order: f64) -> Result<f64> {
    let pp = Pmf::bernoulli(p)?;
    let qq = Pmf::bernoulli(q)?;
    renyi_divergence(&pp, &qq, order)
}
