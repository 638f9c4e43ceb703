//! Exact nonnegative rank for small matrices, induced distributions, and the
//! nonnegative alpha-rank bridge to common entropy.
//!
//! Computing the nonnegative rank is NP-hard, so the design is
//! bounded-budget and certificate-reporting: a lower bound from the linear
//! rank and the largest pairwise-independent entry set (branch and bound),
//! an upper bound from exact-fit alternating least squares (HALS) with
//! multi-start, and an `Indeterminate` error when the two do not meet.

use crate::error::{Error, Result};
use crate::prob::{JointPmf, SUPPORT_EPS};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Exact-fit tolerance on the max absolute residual.
pub const EXACT_FIT_TOL: f64 = 1e-9;
/// Cap on the exact mode: `min(m, k) <= 6`.
pub const MAX_EXACT_DIM: usize = 6;
/// Cap on pairwise-independent set search depth.
const MAX_PI_SET: usize = 8;

/// A nonnegative matrix, not all zero.
#[derive(Debug, Clone, PartialEq)]
pub struct NonnegMatrix {
    pub entries: Vec<Vec<f64>>,
}

impl NonnegMatrix {
    pub fn new(entries: Vec<Vec<f64>>) -> Result<Self> {
        if entries.is_empty() || entries[0].is_empty() {
            return Err(Error::DomainError("empty matrix".into()));
        }
        let k = entries[0].len();
        if entries.iter().any(|r| r.len() != k) {
            return Err(Error::DomainError("ragged matrix".into()));
        }
        if entries.iter().flatten().any(|&v| v < 0.0 || !v.is_finite()) {
            return Err(Error::DomainError("negative or non-finite entry".into()));
        }
        if entries.iter().flatten().all(|&v| v <= 0.0) {
            return Err(Error::ZeroMatrix);
        }
        Ok(Self { entries })
    }

    pub fn rows(&self) -> usize {
        self.entries.len()
    }

    pub fn cols(&self) -> usize {
        self.entries[0].len()
    }

    pub fn l1_norm(&self) -> f64 {
        self.entries.iter().flatten().sum()
    }

    /// Kronecker product, used by the submultiplicativity probe.
    pub fn kron(&self, other: &NonnegMatrix) -> NonnegMatrix {
        let (m1, k1) = (self.rows(), self.cols());
        let (m2, k2) = (other.rows(), other.cols());
        let mut out = vec![vec![0.0; k1 * k2]; m1 * m2];
        for i1 in 0..m1 {
            for i2 in 0..m2 {
                for j1 in 0..k1 {
                    for j2 in 0..k2 {
                        out[i1 * m2 + i2][j1 * k2 + j2] =
                            self.entries[i1][j1] * other.entries[i2][j2];
                    }
                }
            }
        }
        NonnegMatrix { entries: out }
    }
}

/// Induced distribution `pi(x, y) = M_{x,y} / ||M||_1`.
pub fn induced_distribution(m: &NonnegMatrix) -> Result<JointPmf> {
    let norm = m.l1_norm();
    if norm <= 0.0 {
        return Err(Error::ZeroMatrix);
    }
    JointPmf::new(m.entries.iter().map(|row| row.iter().map(|&v| v / norm).collect()).collect())
}

/// Linear rank by Gaussian elimination with relative pivot tolerance.
pub fn linear_rank(m: &NonnegMatrix) -> usize {
    let mut a: Vec<Vec<f64>> = m.entries.clone();
    let scale = a.iter().flatten().fold(0.0f64, |acc, &v| acc.max(v.abs())).max(1e-300);
    let (rows, cols) = (m.rows(), m.cols());
    let mut rank = 0;
    let mut row = 0;
    for col in 0..cols {
        let (piv, pval) = (row..rows)
            .map(|r| (r, a[r][col].abs()))
            .max_by(|x, y| x.1.partial_cmp(&y.1).unwrap())
            .unwrap_or((row, 0.0));
        if pval <= 1e-9 * scale {
            continue;
        }
        a.swap(row, piv);
        for r in row + 1..rows {
            let f = a[r][col] / a[row][col];
            for c in col..cols {
                a[r][c] -= f * a[row][c];
            }
        }
        rank += 1;
        row += 1;
        if row == rows {
            break;
        }
    }
    rank
}

/// Largest pairwise-independent set of positive entries: entries `(a,b)` and
/// `(c,d)` are pairwise independent if `M_ab M_cd > 0` and `M_ad M_cb = 0`.
/// Branch and bound, capped at sets of size [`MAX_PI_SET`].
pub fn max_pairwise_independent(m: &NonnegMatrix) -> usize {
    let cells: Vec<(usize, usize)> = (0..m.rows())
        .flat_map(|i| (0..m.cols()).map(move |j| (i, j)))
        .filter(|&(i, j)| m.entries[i][j] > SUPPORT_EPS)
        .collect();
    let compatible = |a: (usize, usize), b: (usize, usize)| -> bool {
        a.0 != b.0
            && a.1 != b.1
            && (m.entries[a.0][b.1] <= SUPPORT_EPS || m.entries[b.0][a.1] <= SUPPORT_EPS)
    };
    fn bnb(
        cells: &[(usize, usize)],
        compatible: &dyn Fn((usize, usize), (usize, usize)) -> bool,
        chosen: &mut Vec<(usize, usize)>,
        start: usize,
        best: &mut usize,
    ) {
        *best = (*best).max(chosen.len());
        if chosen.len() >= MAX_PI_SET || chosen.len() + (cells.len() - start) <= *best {
            return;
        }
        for idx in start..cells.len() {
            let cand = cells[idx];
            if chosen.iter().all(|&c| compatible(c, cand)) {
                chosen.push(cand);
                bnb(cells, compatible, chosen, idx + 1, best);
                chosen.pop();
            }
        }
    }
    let mut best = 0;
    bnb(&cells, &compatible, &mut Vec::new(), 0, &mut best);
    best
}

/// A rank-r nonnegative factorization `M = U V` with `U: m x r`, `V: r x k`.
#[derive(Debug, Clone)]
pub struct Factorization {
    pub u: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

impl Factorization {
    pub fn residual(&self, m: &NonnegMatrix) -> f64 {
        let r = self.v.len();
        let mut worst = 0.0f64;
        for (i, row) in m.entries.iter().enumerate() {
            for (j, &target) in row.iter().enumerate() {
                let fit: f64 = (0..r).map(|w| self.u[i][w] * self.v[w][j]).sum();
                worst = worst.max((fit - target).abs());
            }
        }
        worst
    }
}

/// One HALS run: returns a factorization if it reaches an exact fit.
fn hals_fit(m: &NonnegMatrix, r: usize, seed: u64, iters: usize) -> Option<Factorization> {
    let (rows, cols) = (m.rows(), m.cols());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = (m.l1_norm() / (rows * cols) as f64).sqrt();
    let mut u: Vec<Vec<f64>> =
        (0..rows).map(|_| (0..r).map(|_| rng.gen_range(0.1..1.0) * scale).collect()).collect();
    let mut v: Vec<Vec<f64>> =
        (0..r).map(|_| (0..cols).map(|_| rng.gen_range(0.1..1.0) * scale).collect()).collect();
    let mut resid = vec![vec![0.0f64; cols]; rows];
    for i in 0..rows {
        for j in 0..cols {
            let fit: f64 = (0..r).map(|w| u[i][w] * v[w][j]).sum();
            resid[i][j] = m.entries[i][j] - fit;
        }
    }
    for _ in 0..iters {
        for w in 0..r {
            // Return component w to the residual, refit u_w then v_w.
            for i in 0..rows {
                for j in 0..cols {
                    resid[i][j] += u[i][w] * v[w][j];
                }
            }
            let vnorm: f64 = v[w].iter().map(|&x| x * x).sum();
            if vnorm > 1e-300 {
                for (i, urow) in u.iter_mut().enumerate() {
                    let num: f64 = (0..cols).map(|j| resid[i][j] * v[w][j]).sum();
                    urow[w] = (num / vnorm).max(0.0);
                }
            }
            let unorm: f64 = u.iter().map(|urow| urow[w] * urow[w]).sum();
            if unorm > 1e-300 {
                for j in 0..cols {
                    let num: f64 = (0..rows).map(|i| resid[i][j] * u[i][w]).sum();
                    v[w][j] = (num / unorm).max(0.0);
                }
            }
            for i in 0..rows {
                for j in 0..cols {
                    resid[i][j] -= u[i][w] * v[w][j];
                }
            }
        }
        let worst = resid.iter().flatten().fold(0.0f64, |acc, &x| acc.max(x.abs()));
        if worst <= EXACT_FIT_TOL {
            return Some(Factorization { u, v });
        }
    }
    None
}

/// Trivial exact factorization at `r = min(m, k)` (columns or rows as factors).
fn trivial_factorization(m: &NonnegMatrix) -> Factorization {
    let (rows, cols) = (m.rows(), m.cols());
    if cols <= rows {
        let u: Vec<Vec<f64>> =
            (0..rows).map(|i| (0..cols).map(|j| m.entries[i][j]).collect()).collect();
        let v: Vec<Vec<f64>> = (0..cols)
            .map(|w| (0..cols).map(|j| if w == j { 1.0 } else { 0.0 }).collect())
            .collect();
        Factorization { u, v }
    } else {
        let u: Vec<Vec<f64>> = (0..rows)
            .map(|i| (0..rows).map(|w| if w == i { 1.0 } else { 0.0 }).collect())
            .collect();
        let v: Vec<Vec<f64>> = (0..rows).map(|w| m.entries[w].clone()).collect();
        Factorization { u, v }
    }
}

/// Certified nonnegative rank with the bounds that produced it.
#[derive(Debug, Clone)]
pub struct NonnegRank {
    pub value: usize,
    pub lower: usize,
    pub upper: usize,
    pub certificate: Factorization,
}

/// Default ALS restarts.
pub const DEFAULT_ALS_RESTARTS: usize = 64;

/// Exact nonnegative rank for small matrices: lower bound
/// `max(rank, pairwise-independent set)`, upper bound by exact-fit HALS with
/// `cap` restarts per candidate rank (the trivial factorization closes the
/// search at `min(m, k)` unconditionally). Returns `Indeterminate` when the
/// bounds do not meet inside the restart budget.
pub fn nonneg_rank(m: &NonnegMatrix, cap: usize) -> Result<NonnegRank> {
    let lower = linear_rank(m).max(max_pairwise_independent(m));
    let max_r = m.rows().min(m.cols());
    if lower >= max_r {
        // The trivial factorization certifies the upper bound at any size.
        return Ok(NonnegRank {
            value: max_r,
            lower: max_r,
            upper: max_r,
            certificate: trivial_factorization(m),
        });
    }
    if max_r > MAX_EXACT_DIM {
        return Err(Error::CapExceeded(format!(
            "min dimension {max_r} exceeds exact-mode cap {MAX_EXACT_DIM}"
        )));
    }
    let restarts = cap.max(1);
    for r in lower..=max_r {
        let cert = if r == max_r {
            Some(trivial_factorization(m))
        } else {
            (0..restarts as u64)
                .into_par_iter()
                .filter_map(|s| hals_fit(m, r, 0xA17C_E5ED ^ s.wrapping_mul(0x5851_F42D), 3000))
                .find_any(|_| true)
        };
        if let Some(cert) = cert {
            debug_assert!(cert.residual(m) <= 1e-8);
            if r == lower {
                return Ok(NonnegRank { value: r, lower, upper: r, certificate: cert });
            }
            return Err(Error::Indeterminate { lower, upper: r });
        }
    }
    Err(Error::Indeterminate { lower, upper: max_r })
}

/// Converts an exact factorization into the Markov decomposition it induces:
/// `P(w, x, y) = u_w(x) v_w(y) / ||M||_1`.
pub fn factorization_triple(m: &NonnegMatrix, fac: &Factorization) -> crate::ci::MarkovTriple {
    let norm = m.l1_norm();
    let r = fac.v.len();
    let mut p_w = Vec::with_capacity(r);
    let mut p_x = Vec::with_capacity(r);
    let mut p_y = Vec::with_capacity(r);
    for w in 0..r {
        let su: f64 = fac.u.iter().map(|row| row[w]).sum();
        let sv: f64 = fac.v[w].iter().sum();
        p_w.push(su * sv / norm);
        if su > 0.0 {
            p_x.push(fac.u.iter().map(|row| row[w] / su).collect());
        } else {
            p_x.push(vec![1.0 / m.rows() as f64; m.rows()]);
        }
        if sv > 0.0 {
            p_y.push(fac.v[w].iter().map(|&v| v / sv).collect());
        } else {
            p_y.push(vec![1.0 / m.cols() as f64; m.cols()]);
        }
    }
    let total: f64 = p_w.iter().sum();
    crate::ci::MarkovTriple {
        p_w: crate::prob::Pmf { probs: p_w.iter().map(|&v| v / total).collect(), labels: None },
        p_x_given_w: p_x,
        p_y_given_w: p_y,
    }
}

/// Nonnegative alpha-rank `rank+^(alpha)(M) = 2^{G_alpha(pi_M)}`; `alpha -> 0`
/// recovers the nonnegative rank, `alpha = inf` is
/// `2^{min D_inf(Q_X Q_Y || pi)}`. The rank certificate (when one exists)
/// warm-starts the decomposition optimizer.
pub fn alpha_rank(m: &NonnegMatrix, alpha: f64) -> Result<f64> {
    let pi = induced_distribution(m)?;
    let card = crate::ci::default_card_w(&pi);
    let warm: Vec<crate::ci::MarkovTriple> = match nonneg_rank(m, DEFAULT_ALS_RESTARTS) {
        Ok(r) => vec![factorization_triple(m, &r.certificate)],
        Err(_) => Vec::new(),
    };
    let g = crate::ci::common_entropy_seeded(&pi, alpha, card, 32, 0, &warm)?;
    Ok(2f64.powf(g))
}

/// `(C_W(M), log2 rank+(M))` with the Wyner side from the numeric optimizer
/// on the induced distribution.
pub fn wyner_vs_lograank(
    m: &NonnegMatrix,
    card_w: usize,
    restarts: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    let pi = induced_distribution(m)?;
    let (cw, _) = crate::ci::wyner_ci_numeric(&pi, card_w, restarts, seed)?;
    let rank = nonneg_rank(m, DEFAULT_ALS_RESTARTS)?;
    Ok((cw, (rank.value as f64).log2()))
}

/// The 4 x 4 zero-pattern example whose nonnegative rank (4) strictly exceeds
/// its linear rank (3).
pub fn rank_gap_example() -> NonnegMatrix {
    NonnegMatrix::new(vec![
        vec![1.0, 1.0, 0.0, 0.0],
        vec![1.0, 0.0, 1.0, 0.0],
        vec![0.0, 1.0, 0.0, 1.0],
        vec![0.0, 0.0, 1.0, 1.0],
    ])
    .expect("valid example")
}
