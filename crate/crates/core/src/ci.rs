//! Wyner, Rényi, exact, and GKW common information: closed forms for the
//! DSBS / SBES / Gaussian sources and multi-start numeric optimizers over
//! Markov decompositions `X - W - Y`.
//!
//! The Lagrangian of the decomposition constraint is bilinear in the two
//! channels, so every numeric optimizer here is multi-start by construction:
//! squared-normalized simplex parametrization, augmented-Lagrangian outer
//! rounds (penalty x10 per round, 8 rounds), L-BFGS inner loops, restarts in
//! parallel with per-restart RNG streams and a deterministic
//! `(value, restart index)` reduction.

use crate::coupling::max_cross_entropy;
use crate::error::{Error, Result};
use crate::numeric::lbfgs::{minimize, LbfgsOptions};
use crate::prob::{
    binary_entropy, shannon_entropy, xlog2x, DsbsParams, GaussianPair, JointPmf, Pmf, SbesParams,
    SUPPORT_EPS,
};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

/// Default cardinality bound `|W| <= |X||Y|` from the support lemma.
pub fn default_card_w(pi: &JointPmf) -> usize {
    pi.nx() * pi.ny()
}

/// A Markov decomposition `P_W, P_{X|W}, P_{Y|W}` of a joint source.
#[derive(Debug, Clone)]
pub struct MarkovTriple {
    pub p_w: Pmf,
    /// `p_x_given_w[w][x]`.
    pub p_x_given_w: Vec<Vec<f64>>,
    /// `p_y_given_w[w][y]`.
    pub p_y_given_w: Vec<Vec<f64>>,
}

impl MarkovTriple {
    /// `sum_w P_W(w) P_{X|W}(.|w) P_{Y|W}(.|w)`.
    pub fn induced_joint_grid(&self) -> Vec<Vec<f64>> {
        let nx = self.p_x_given_w[0].len();
        let ny = self.p_y_given_w[0].len();
        let mut grid = vec![vec![0.0f64; ny]; nx];
        for (w, &pw) in self.p_w.probs.iter().enumerate() {
            for (x, &px) in self.p_x_given_w[w].iter().enumerate() {
                let pwx = pw * px;
                if pwx == 0.0 {
                    continue;
                }
                for (y, &py) in self.p_y_given_w[w].iter().enumerate() {
                    grid[x][y] += pwx * py;
                }
            }
        }
        grid
    }

    pub fn induced_joint(&self) -> Result<JointPmf> {
        JointPmf::new(self.induced_joint_grid())
    }

    /// `H(XY|W) = sum_w P_W(w) [H(X|W=w) + H(Y|W=w)]` (conditional
    /// independence given `W`).
    pub fn cond_entropy_xy(&self) -> f64 {
        let mut acc = 0.0;
        for (w, &pw) in self.p_w.probs.iter().enumerate() {
            if pw <= SUPPORT_EPS {
                continue;
            }
            let hx: f64 = -self.p_x_given_w[w].iter().map(|&v| xlog2x(v)).sum::<f64>();
            let hy: f64 = -self.p_y_given_w[w].iter().map(|&v| xlog2x(v)).sum::<f64>();
            acc += pw * (hx + hy);
        }
        acc
    }

    /// `I(XY; W) = H(XY) - H(XY|W)` under the induced joint.
    pub fn mutual_information_xy_w(&self) -> f64 {
        let grid = self.induced_joint_grid();
        let h_xy = -grid.iter().flatten().map(|&v| xlog2x(v)).sum::<f64>();
        (h_xy - self.cond_entropy_xy()).max(0.0)
    }
}

/// Common-information bounds.
#[derive(Debug, Clone, Serialize)]
pub struct CiBounds {
    pub lower: f64,
    pub upper: f64,
}

impl CiBounds {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if lower > upper + 1e-9 {
            return Err(Error::DomainError(format!("bounds crossed: [{lower}, {upper}]")));
        }
        Ok(Self { lower, upper })
    }
}

/// A named source with a closed-form Wyner common information.
#[derive(Debug, Clone, Copy)]
pub enum Source {
    Dsbs(DsbsParams),
    Sbes(SbesParams),
    Gaussian(GaussianPair),
}

/// Closed-form Wyner common information:
/// DSBS `1 + h(2 a abar) - 2 h(a)`; SBES `1` for `p <= 1/2` else `h(p)`;
/// Gaussian `log((1+rho)/(1-rho)) / 2`.
pub fn wyner_ci_closed(source: Source) -> f64 {
    match source {
        Source::Dsbs(d) => {
            let a = d.noise();
            1.0 + binary_entropy(2.0 * a * (1.0 - a)) - 2.0 * binary_entropy(a)
        }
        Source::Sbes(s) => {
            if s.p <= 0.5 {
                1.0
            } else {
                binary_entropy(s.p)
            }
        }
        Source::Gaussian(g) => {
            let rho = g.rho.abs();
            0.5 * ((1.0 + rho) / (1.0 - rho)).log2()
        }
    }
}

// ---------------------------------------------------------------------------
// The shared Markov-decomposition optimizer
// ---------------------------------------------------------------------------

fn decode(theta: &[f64], card_w: usize, nx: usize, ny: usize) -> MarkovTriple {
    let to_simplex = |v: &[f64]| -> Vec<f64> {
        let sq: Vec<f64> = v.iter().map(|x| x * x + 1e-12).collect();
        let s: f64 = sq.iter().sum();
        sq.into_iter().map(|x| x / s).collect()
    };
    let p_w = to_simplex(&theta[..card_w]);
    let mut p_x_given_w = Vec::with_capacity(card_w);
    let mut p_y_given_w = Vec::with_capacity(card_w);
    let mut off = card_w;
    for _ in 0..card_w {
        p_x_given_w.push(to_simplex(&theta[off..off + nx]));
        off += nx;
    }
    for _ in 0..card_w {
        p_y_given_w.push(to_simplex(&theta[off..off + ny]));
        off += ny;
    }
    MarkovTriple { p_w: Pmf { probs: p_w, labels: None }, p_x_given_w, p_y_given_w }
}

/// Locally minimizes `objective` over decompositions whose induced joint is
/// `pi`, with multi-start; returns the best feasible `(value, witness)`.
fn optimize_markov_triple<F>(
    pi: &JointPmf,
    card_w: usize,
    restarts: usize,
    seed: u64,
    objective: F,
) -> Result<(f64, MarkovTriple)>
where
    F: Fn(&MarkovTriple) -> f64 + Sync,
{
    optimize_markov_triple_seeded(pi, card_w, restarts, seed, &[], objective)
}

/// Encodes a decomposition into the squared-normalized parameter vector.
fn encode(triple: &MarkovTriple, card_w: usize, nx: usize, ny: usize) -> Vec<f64> {
    let dim = card_w * (1 + nx + ny);
    let mut theta = vec![1e-6f64; dim];
    for (w, &pw) in triple.p_w.probs.iter().enumerate().take(card_w) {
        theta[w] = pw.max(1e-12).sqrt();
        for (x, &v) in triple.p_x_given_w[w].iter().enumerate() {
            theta[card_w + w * nx + x] = v.max(1e-12).sqrt();
        }
        for (y, &v) in triple.p_y_given_w[w].iter().enumerate() {
            theta[card_w * (1 + nx) + w * ny + y] = v.max(1e-12).sqrt();
        }
    }
    theta
}

/// Multi-start variant that accepts warm-start decompositions (for example a
/// nonnegative-factorization certificate) as extra restart points.
fn optimize_markov_triple_seeded<F>(
    pi: &JointPmf,
    card_w: usize,
    restarts: usize,
    seed: u64,
    warm_starts: &[MarkovTriple],
    objective: F,
) -> Result<(f64, MarkovTriple)>
where
    F: Fn(&MarkovTriple) -> f64 + Sync,
{
    if card_w == 0 {
        return Err(Error::DomainError("card_w must be >= 1".into()));
    }
    let (nx, ny) = (pi.nx(), pi.ny());
    let dim = card_w * (1 + nx + ny);
    let target = pi.probs.clone();

    // Identity-style seed: one atom per support cell (heaviest first), with
    // point-mass conditionals. Exactly feasible whenever card_w covers the
    // support, so at least one restart always starts on the constraint set.
    // A second, softened copy keeps the dead coordinates revivable.
    let identity_seed = |dead: f64| -> Vec<f64> {
        let mut cells: Vec<(f64, usize, usize)> = (0..nx)
            .flat_map(|x| (0..ny).map(move |y| (pi.probs[x][y], x, y)))
            .filter(|c| c.0 > SUPPORT_EPS)
            .collect();
        cells.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
        cells.truncate(card_w);
        let mut theta = vec![dead; dim];
        for (w, &(mass, x, y)) in cells.iter().enumerate() {
            theta[w] = mass.sqrt();
            theta[card_w + w * nx + x] = 1.0;
            theta[card_w * (1 + nx) + w * ny + y] = 1.0;
        }
        theta
    };
    let mut starts: Vec<Vec<f64>> = vec![identity_seed(1e-6), identity_seed(0.08)];
    for w in warm_starts {
        starts.push(encode(w, card_w, nx, ny));
    }

    let run_one = |ridx: u64| -> (f64, f64, MarkovTriple) {
        let mut rng =
            ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(ridx));
        let mut theta: Vec<f64> = if (ridx as usize) < starts.len() {
            starts[ridx as usize].clone()
        } else {
            (0..dim).map(|_| rng.gen_range(0.1..1.0f64)).collect()
        };
        let mut lambda = vec![vec![0.0f64; ny]; nx];
        // Warm starts begin feasible and only need polishing, so they run
        // stiff from the outset; random restarts explore under a soft penalty
        // first. Entropy-like objectives otherwise collapse W-atoms early,
        // and the squared parametrization cannot revive a dead atom.
        let mut mu = if (ridx as usize) < starts.len() { 1e4 } else { 10.0f64 };
        let residual_of = |theta: &[f64]| -> f64 {
            let grid = decode(theta, card_w, nx, ny).induced_joint_grid();
            grid.iter()
                .flatten()
                .zip(target.iter().flatten())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max)
        };
        let mut prev_residual = f64::INFINITY;
        let mut round = 0usize;
        loop {
            let lam = lambda.clone();
            let obj = |t: &[f64]| -> f64 {
                let triple = decode(t, card_w, nx, ny);
                let grid = triple.induced_joint_grid();
                let mut pen = 0.0;
                for x in 0..nx {
                    for y in 0..ny {
                        let r = grid[x][y] - target[x][y];
                        pen += lam[x][y] * r + 0.5 * mu * r * r;
                    }
                }
                objective(&triple) + pen
            };
            let opts = LbfgsOptions { max_iters: 200.max(2 * dim), grad_tol: 1e-9, fd_step: 1e-6 };
            let (t_new, _) = minimize(obj, &theta, &opts);
            theta = t_new;
            let res = residual_of(&theta);
            // Safeguarded update: multipliers move only when the inner solve
            // actually contracted the residual; otherwise only the penalty
            // weight grows (stale multipliers from unconverged inner solves
            // would poison later rounds).
            if res <= 0.25 * prev_residual {
                let grid = decode(&theta, card_w, nx, ny).induced_joint_grid();
                for x in 0..nx {
                    for y in 0..ny {
                        lambda[x][y] += mu * (grid[x][y] - target[x][y]);
                    }
                }
                mu *= 2.0;
            } else {
                mu *= 10.0;
            }
            prev_residual = res;
            round += 1;
            if (round >= 8 && res <= 1e-7) || round >= 16 {
                break;
            }
        }
        let triple = decode(&theta, card_w, nx, ny);
        (objective(&triple), residual_of(&theta), triple)
    };

    let total = restarts.max(starts.len()) as u64;
    let results: Vec<(u64, f64, f64, MarkovTriple)> = (0..total)
        .into_par_iter()
        .map(|r| {
            let (v, res, t) = run_one(r);
            (r, v, res, t)
        })
        .collect();

    let mut best: Option<(f64, u64, MarkovTriple)> = None;
    let mut best_residual = f64::INFINITY;
    for (r, v, res, t) in results {
        best_residual = best_residual.min(res);
        if res <= 1e-6 {
            let replace = match &best {
                None => true,
                Some((bv, br, _)) => v < *bv - 1e-12 || ((v - *bv).abs() <= 1e-12 && r < *br),
            };
            if replace {
                best = Some((v, r, t));
            }
        }
    }
    match best {
        Some((v, _, t)) => Ok((v, t)),
        None => Err(Error::ConstraintViolation(best_residual)),
    }
}

/// Numeric Wyner common information: locally minimizes `I(XY; W)` over
/// decompositions of `pi` with `|W| <= card_w`, multi-start.
pub fn wyner_ci_numeric(
    pi: &JointPmf,
    card_w: usize,
    restarts: usize,
    seed: u64,
) -> Result<(f64, MarkovTriple)> {
    optimize_markov_triple(pi, card_w, restarts, seed, |t| t.mutual_information_xy_w())
}

/// GKW common information: the entropy of the connected-component index of
/// the bipartite support graph (the ergodic decomposition).
pub fn gkw_ci(pi: &JointPmf) -> f64 {
    let (nx, ny) = (pi.nx(), pi.ny());
    let mut parent: Vec<usize> = (0..nx + ny).collect();
    fn find(parent: &mut Vec<usize>, i: usize) -> usize {
        if parent[i] != i {
            let root = find(parent, parent[i]);
            parent[i] = root;
        }
        parent[i]
    }
    for x in 0..nx {
        for y in 0..ny {
            if pi.probs[x][y] > SUPPORT_EPS {
                let (rx, ry) = (find(&mut parent, x), find(&mut parent, nx + y));
                parent[rx] = ry;
            }
        }
    }
    let mut mass: std::collections::HashMap<usize, f64> = std::collections::HashMap::new();
    for x in 0..nx {
        for y in 0..ny {
            if pi.probs[x][y] > SUPPORT_EPS {
                *mass.entry(find(&mut parent, x)).or_insert(0.0) += pi.probs[x][y];
            }
        }
    }
    -mass.values().map(|&v| xlog2x(v)).sum::<f64>()
}

/// Which pseudo-common information to compute.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PseudoSide {
    Upper,
    Lower,
}

/// Pseudo-common information of order `1 + s`:
/// upper minimizes `-(1+s)/s H(XY|W) + E_W[H_s(P_{X|W}, P_{Y|W} || pi)]`,
/// lower additionally minimizes the cross term over couplings
/// `Q_{WW'} in C(P_W, P_W)` (an inner transportation LP). `s = inf` uses the
/// dedicated `H_inf` LP, never large-s extrapolation.
pub fn pseudo_ci(
    pi: &JointPmf,
    s: f64,
    side: PseudoSide,
    card_w: usize,
    restarts: usize,
    seed: u64,
) -> Result<f64> {
    if !(s > 0.0) {
        return Err(Error::DomainError(format!("order parameter s = {s} must be positive")));
    }
    let coef = if s.is_infinite() { 1.0 } else { (1.0 + s) / s };
    let pi_cl = pi.clone();
    // Conditionals below this weight are clipped to zero before the cross
    // entropy: the squared-normalized parametrization cannot reach exact
    // zeros, and on sources with zero cells the objective is +inf until the
    // per-w supports land inside supp(pi). The clipping perturbs finite
    // values by O(1e-9 log 1/pi_min), far below the optimizer tolerance.
    let clip = |probs: &[f64]| -> Pmf {
        let mut v: Vec<f64> = probs.iter().map(|&p| if p < 1e-9 { 0.0 } else { p }).collect();
        let s: f64 = v.iter().sum();
        for x in v.iter_mut() {
            *x /= s;
        }
        Pmf { probs: v, labels: None }
    };
    let cross = move |pw_x: &[f64], pw_y: &[f64]| -> f64 {
        let px = clip(pw_x);
        let py = clip(pw_y);
        match max_cross_entropy(&px, &py, &pi_cl, s) {
            Ok((v, _)) => v,
            Err(_) => f64::INFINITY,
        }
    };
    let objective = move |t: &MarkovTriple| -> f64 {
        let k = t.p_w.probs.len();
        let base = -coef * t.cond_entropy_xy();
        // Atoms below this weight contribute at most ~1e-9 H_max to the
        // expectation; skipping them keeps spare atoms of the parametrization
        // from polluting the objective with spurious infinities.
        let live = |pw: f64| pw > 1e-9;
        match side {
            PseudoSide::Upper => {
                let mut acc = 0.0;
                for w in 0..k {
                    let pw = t.p_w.probs[w];
                    if !live(pw) {
                        continue;
                    }
                    let h = cross(&t.p_x_given_w[w], &t.p_y_given_w[w]);
                    if !h.is_finite() {
                        return f64::INFINITY;
                    }
                    acc += pw * h;
                }
                base + acc
            }
            PseudoSide::Lower => {
                // Pairwise cross entropies over live atoms, then the optimal
                // W-coupling by the transportation LP on the renormalized
                // live weights.
                let idx: Vec<usize> = (0..k).filter(|&w| live(t.p_w.probs[w])).collect();
                let mass: f64 = idx.iter().map(|&w| t.p_w.probs[w]).sum();
                let weights: Vec<f64> = idx.iter().map(|&w| t.p_w.probs[w] / mass).collect();
                let kk = idx.len();
                let mut cost = vec![vec![0.0f64; kk]; kk];
                for (i, &w) in idx.iter().enumerate() {
                    for (j, &w2) in idx.iter().enumerate() {
                        let h = cross(&t.p_x_given_w[w], &t.p_y_given_w[w2]);
                        if !h.is_finite() {
                            return f64::INFINITY;
                        }
                        cost[i][j] = h;
                    }
                }
                match crate::coupling::transport_minimize(&cost, &weights, &weights) {
                    Ok(q) => {
                        let inner: f64 = q
                            .iter()
                            .enumerate()
                            .map(|(i, row)| {
                                row.iter().enumerate().map(|(j, &m)| m * cost[i][j]).sum::<f64>()
                            })
                            .sum();
                        base + inner
                    }
                    Err(_) => f64::INFINITY,
                }
            }
        }
    };
    // Warm-start from the Wyner witness: for Wyner-product sources it is the
    // exact minimizer of the upper pseudo-common information, and for full
    // support sources it is a strong initial basin. On sources with zero
    // cells the witness is support-repaired first, since the cross entropy is
    // +inf whenever a per-atom product strays outside supp(pi).
    let mut warm = Vec::new();
    if let Ok((_, witness)) = wyner_ci_numeric(pi, card_w, restarts.max(8) / 2, seed ^ 0xa5a5) {
        warm.push(repair_support(&witness, pi));
        warm.push(witness);
    }
    let (v, _) = optimize_markov_triple_seeded(pi, card_w, restarts, seed, &warm, objective)?;
    Ok(v)
}

/// Zeroes the cheaper side of every per-atom conditional product landing on a
/// zero cell of `pi`, renormalizing; the result may miss the decomposition
/// constraint slightly, which the stiff warm-start polish then restores.
fn repair_support(triple: &MarkovTriple, pi: &JointPmf) -> MarkovTriple {
    let mut t = triple.clone();
    let k = t.p_w.probs.len();
    for w in 0..k {
        for x in 0..pi.nx() {
            for y in 0..pi.ny() {
                if pi.probs[x][y] <= SUPPORT_EPS {
                    let px = t.p_x_given_w[w][x];
                    let py = t.p_y_given_w[w][y];
                    if px * py > 0.0 {
                        if px <= py {
                            t.p_x_given_w[w][x] = 0.0;
                        } else {
                            t.p_y_given_w[w][y] = 0.0;
                        }
                    }
                }
            }
        }
        for cond in [&mut t.p_x_given_w[w], &mut t.p_y_given_w[w]] {
            let s: f64 = cond.iter().sum();
            if s > 0.0 {
                for v in cond.iter_mut() {
                    *v /= s;
                }
            } else {
                let n = cond.len() as f64;
                for v in cond.iter_mut() {
                    *v = 1.0 / n;
                }
            }
        }
    }
    t
}

/// Closed-form upper bound on the order-(1+s) Rényi common information of the
/// DSBS, from the Wyner decomposition `W ~ Bern(1/2)`, `X = W ^ A`,
/// `Y = W ^ B` with `A, B ~ Bern(a)`. Per `w` the coupling family is
/// `Q(1,1) = q in [0, a]`, and the mixed cross entropy is maximized at
///
/// `q* = [sqrt(kappa^2 (1-2a)^2 + 4 kappa a abar) - (kappa (1-2a) + 2a)] / (2 (kappa-1))`
///
/// with `kappa = (alpha/beta)^{2s}`, giving
///
/// `-(1+s)/s 2h(a) + (1-2a+2q*) log 1/alpha + 2(a-q*) log 1/beta
///  + h4(q*, a-q*, a-q*, 1+q*-2a)/s`.
///
/// `s = inf` is the documented limit (q* = 0), equal to the exact CI.
pub fn renyi_ci_dsbs_upper(a: f64, s: f64) -> Result<f64> {
    if !(0.0 < a && a < 0.5) {
        return Err(Error::DomainError(format!("noise parameter a = {a} outside (0, 1/2)")));
    }
    if !(s > 0.0) || (s > 1.0 && s.is_finite()) {
        return Err(Error::DomainError(format!("order parameter s = {s} outside (0,1]")));
    }
    let abar = 1.0 - a;
    let alpha = (a * a + abar * abar) / 2.0;
    let beta = a * abar;
    let q_star = renyi_q_star(a, s);
    let h4 = |xs: [f64; 4]| -> f64 { -xs.iter().map(|&v| xlog2x(v)).sum::<f64>() };
    let coef = if s.is_infinite() { 1.0 } else { (1.0 + s) / s };
    let ent_term = if s.is_infinite() {
        0.0
    } else {
        h4([q_star, a - q_star, a - q_star, 1.0 + q_star - 2.0 * a]) / s
    };
    Ok(-coef * 2.0 * binary_entropy(a)
        + (1.0 - 2.0 * a + 2.0 * q_star) * (1.0 / alpha).log2()
        + 2.0 * (a - q_star) * (1.0 / beta).log2()
        + ent_term)
}

/// The optimal diagonal coupling mass `q*` in [`renyi_ci_dsbs_upper`]
/// (0 at `s = inf`, where the boundary vertex is optimal).
pub fn renyi_q_star(a: f64, s: f64) -> f64 {
    if s.is_infinite() {
        return 0.0;
    }
    let abar = 1.0 - a;
    let alpha = (a * a + abar * abar) / 2.0;
    let beta = a * abar;
    let kappa = (alpha / beta).powf(2.0 * s);
    let d = abar - a;
    let root = (kappa * kappa * d * d + 4.0 * kappa * a * abar).sqrt();
    ((root - (kappa * d + 2.0 * a)) / (2.0 * (kappa - 1.0))).clamp(0.0, a)
}

/// Exact common information of the DSBS and its gap over Wyner's:
/// `T_Ex = -2h(a) - (1-2a) log((a^2 + abar^2)/2) - 2a log(a abar)`,
/// `gap = 2a^2 log((a^2 + abar^2)/(2 a abar))`.
pub fn exact_ci_dsbs(a: f64) -> Result<(f64, f64)> {
    if !(0.0 < a && a < 0.5) {
        return Err(Error::DomainError(format!("noise parameter a = {a} outside (0, 1/2)")));
    }
    let abar = 1.0 - a;
    let value = -2.0 * binary_entropy(a)
        - (1.0 - 2.0 * a) * ((a * a + abar * abar) / 2.0).log2()
        - 2.0 * a * (a * abar).log2();
    let gap = 2.0 * a * a * ((a * a + abar * abar) / (2.0 * a * abar)).log2();
    Ok((value, gap))
}

/// Common Rényi entropy `G_alpha(pi) = min H_alpha(W)` over decompositions.
/// `alpha = 1` is the common entropy; `alpha = inf` reduces to
/// `min_{Q_X, Q_Y} D_inf(Q_X Q_Y || pi)` over product distributions
/// (grid + local refinement for binary, coordinate refinement otherwise);
/// `alpha = 0` is `log2 rank+` via the nonnegative-rank module.
/// `warm` decompositions (for example from a nonnegative factorization)
/// join the restart pool.
pub fn common_entropy_seeded(
    pi: &JointPmf,
    alpha: f64,
    card_w: usize,
    restarts: usize,
    seed: u64,
    warm: &[MarkovTriple],
) -> Result<f64> {
    if alpha < 0.0 || alpha.is_nan() {
        return Err(Error::DomainError(format!("Rényi order {alpha} must be >= 0")));
    }
    if alpha == 0.0 {
        let m = crate::nnrank::NonnegMatrix::new(pi.probs.clone())?;
        let r = crate::nnrank::nonneg_rank(&m, 16)?;
        return Ok((r.value as f64).log2());
    }
    if alpha.is_infinite() {
        return Ok(min_dinf_product(pi));
    }
    let renyi_w = move |t: &MarkovTriple| -> f64 {
        if (alpha - 1.0).abs() < 1e-12 {
            shannon_entropy(&t.p_w)
        } else {
            let sum: f64 = t.p_w.probs.iter().map(|&p| p.powf(alpha)).sum();
            sum.log2() / (1.0 - alpha)
        }
    };
    let (v, _) = optimize_markov_triple_seeded(pi, card_w, restarts, seed, warm, renyi_w)?;
    Ok(v)
}

/// [`common_entropy`] without warm starts.
pub fn common_entropy(
    pi: &JointPmf,
    alpha: f64,
    card_w: usize,
    restarts: usize,
    seed: u64,
) -> Result<f64> {
    common_entropy_seeded(pi, alpha, card_w, restarts, seed, &[])
}

/// `min_{Q_X, Q_Y} D_inf(Q_X Q_Y || pi)` by grid search with staged local
/// refinement (binary) or coordinate refinement from the marginals (general).
pub fn min_dinf_product(pi: &JointPmf) -> f64 {
    let dinf = |qx: &[f64], qy: &[f64]| -> f64 {
        let mut m = 0.0f64;
        for (x, &a) in qx.iter().enumerate() {
            for (y, &b) in qy.iter().enumerate() {
                let prod = a * b;
                if prod <= SUPPORT_EPS {
                    continue;
                }
                if pi.probs[x][y] <= SUPPORT_EPS {
                    return f64::INFINITY;
                }
                m = m.max(prod / pi.probs[x][y]);
            }
        }
        m.log2().max(0.0)
    };
    if pi.nx() == 2 && pi.ny() == 2 {
        let n = 400usize;
        let mut best = (f64::INFINITY, 0.5, 0.5);
        for i in 0..=n {
            let qx = i as f64 / n as f64;
            for j in 0..=n {
                let qy = j as f64 / n as f64;
                let v = dinf(&[1.0 - qx, qx], &[1.0 - qy, qy]);
                if v < best.0 {
                    best = (v, qx, qy);
                }
            }
        }
        let mut step = 1.0 / n as f64;
        for _ in 0..8 {
            let (_, cx, cy) = best;
            for di in -10i32..=10 {
                for dj in -10i32..=10 {
                    let qx = (cx + di as f64 * step / 10.0).clamp(0.0, 1.0);
                    let qy = (cy + dj as f64 * step / 10.0).clamp(0.0, 1.0);
                    let v = dinf(&[1.0 - qx, qx], &[1.0 - qy, qy]);
                    if v < best.0 {
                        best = (v, qx, qy);
                    }
                }
            }
            step /= 10.0;
        }
        return best.0;
    }
    // General alphabets: seed with the marginals and every point-mass pair
    // (the latter are the only finite candidates for diagonal-like supports),
    // then refine coordinate rays from the best seed.
    let mut qx = pi.marginal_x().probs;
    let mut qy = pi.marginal_y().probs;
    let mut best = dinf(&qx, &qy);
    for x in 0..pi.nx() {
        for y in 0..pi.ny() {
            let ex: Vec<f64> = (0..pi.nx()).map(|i| if i == x { 1.0 } else { 0.0 }).collect();
            let ey: Vec<f64> = (0..pi.ny()).map(|j| if j == y { 1.0 } else { 0.0 }).collect();
            let v = dinf(&ex, &ey);
            if v < best {
                best = v;
                qx = ex;
                qy = ey;
            }
        }
    }
    for _ in 0..200 {
        let mut improved = false;
        for (which, idx) in
            (0..qx.len()).map(|i| (0usize, i)).chain((0..qy.len()).map(|j| (1usize, j)))
        {
            let cur = if which == 0 { qx[idx] } else { qy[idx] };
            for delta in [-0.05, -0.01, -0.002, 0.002, 0.01, 0.05] {
                let cand = (cur + delta).clamp(0.0, 1.0);
                let (mut tx, mut ty) = (qx.clone(), qy.clone());
                let target = if which == 0 { &mut tx } else { &mut ty };
                let others: f64 = target.iter().sum::<f64>() - target[idx];
                if others <= 0.0 {
                    continue;
                }
                let scale = (1.0 - cand) / others;
                for (k, v) in target.iter_mut().enumerate() {
                    if k == idx {
                        *v = cand;
                    } else {
                        *v *= scale;
                    }
                }
                let v = dinf(&tx, &ty);
                if v < best - 1e-12 {
                    best = v;
                    qx = tx;
                    qy = ty;
                    improved = true;
                }
            }
        }
        if !improved {
            break;
        }
    }
    best
}

/// Bounds on the exact common information of a bivariate Gaussian pair:
/// `C_W <= T_Ex <= C_W + rho log2(e) / (1 + rho)`.
pub fn gaussian_exact_ci_bounds(rho: f64) -> Result<CiBounds> {
    if !(0.0 < rho && rho < 1.0) {
        return Err(Error::DomainError(format!("rho = {rho} outside (0,1)")));
    }
    let lower = wyner_ci_closed(Source::Gaussian(GaussianPair::new(rho)?));
    let upper = lower + rho * std::f64::consts::LOG2_E / (1.0 + rho);
    CiBounds::new(lower, upper)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob::{joint_entropy, mutual_information};
    use approx::assert_abs_diff_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_joint(rng: &mut impl Rng, m: usize, n: usize) -> JointPmf {
        let mut grid: Vec<Vec<f64>> =
            (0..m).map(|_| (0..n).map(|_| rng.gen_range(0.05..1.0)).collect()).collect();
        let s: f64 = grid.iter().flatten().sum();
        for row in grid.iter_mut() {
            for v in row.iter_mut() {
                *v /= s;
            }
        }
        JointPmf::new(grid).unwrap()
    }

    #[test]
    fn closed_forms() {
        // DSBS independent: a = 1/2 means p = 1/2, C_W = 0.
        let d = DsbsParams::from_rho(0.0).unwrap();
        assert_abs_diff_eq!(wyner_ci_closed(Source::Dsbs(d)), 0.0, epsilon = 1e-12);
        // SBES p = 0.75 -> h(0.75).
        let s = SbesParams::new(0.75).unwrap();
        assert_abs_diff_eq!(
            wyner_ci_closed(Source::Sbes(s)),
            binary_entropy(0.75),
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            wyner_ci_closed(Source::Sbes(SbesParams::new(0.3).unwrap())),
            1.0,
            epsilon = 1e-15
        );
        // Gaussian rho = 0.
        let g = GaussianPair::new(0.0).unwrap();
        assert_abs_diff_eq!(wyner_ci_closed(Source::Gaussian(g)), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn wyner_numeric_product_is_zero() {
        let pi = JointPmf::new(vec![vec![0.06, 0.14], vec![0.24, 0.56]]).unwrap();
        let (v, _) = wyner_ci_numeric(&pi, 4, 8, 0).unwrap();
        assert!(v < 1e-4, "product joint needs no common randomness, got {v}");
    }

    #[test]
    fn wyner_numeric_matches_dsbs_closed_form() {
        let d = DsbsParams::from_crossover(0.2).unwrap();
        let (v, w) = wyner_ci_numeric(&d.to_joint(), 4, 32, 0).unwrap();
        let closed = wyner_ci_closed(Source::Dsbs(d));
        assert_abs_diff_eq!(v, closed, epsilon = 1e-3);
        let (rx, ry) = (w.induced_joint().unwrap(), d.to_joint());
        for (a, b) in rx.flat().iter().zip(ry.flat().iter()) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn wyner_numeric_matches_sbes_closed_form() {
        let s = SbesParams::new(0.7).unwrap();
        let (v, _) = wyner_ci_numeric(&s.to_joint(), 6, 32, 1).unwrap();
        assert_abs_diff_eq!(v, binary_entropy(0.7), epsilon = 1e-3);
    }

    #[test]
    fn wyner_numeric_between_mi_and_joint_entropy() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..5 {
            let pi = random_joint(&mut rng, 2, 2);
            let (v, _) = wyner_ci_numeric(&pi, 4, 16, 3).unwrap();
            assert!(v >= mutual_information(&pi) - 1e-6);
            assert!(v <= joint_entropy(&pi).min(2.0) + 1e-6);
        }
    }

    #[test]
    fn gkw_cases() {
        // Fully supported joint: single component, zero GKW CI.
        let d = DsbsParams::from_crossover(0.2).unwrap();
        assert_abs_diff_eq!(gkw_ci(&d.to_joint()), 0.0, epsilon = 1e-12);
        // (Xtilde, V), (Ytilde, V) construction: C_GKW = H(V).
        // X = (v, xt), Y = (v, yt) with v, xt, yt binary; index = 2v + t.
        let pv = [0.3, 0.7];
        let pxt = [0.4, 0.6];
        let pyt = [0.25, 0.75];
        let mut grid = vec![vec![0.0f64; 4]; 4];
        for v in 0..2 {
            for xt in 0..2 {
                for yt in 0..2 {
                    grid[2 * v + xt][2 * v + yt] = pv[v] * pxt[xt] * pyt[yt];
                }
            }
        }
        let pi = JointPmf::new(grid).unwrap();
        let hv = -(0.3f64 * 0.3f64.log2() + 0.7 * 0.7f64.log2());
        assert_abs_diff_eq!(gkw_ci(&pi), hv, epsilon = 1e-12);
    }

    #[test]
    fn ordering_gkw_mi_wyner() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..5 {
            let pi = random_joint(&mut rng, 2, 2);
            // Fully supported random joints have zero GKW CI.
            assert_abs_diff_eq!(gkw_ci(&pi), 0.0, epsilon = 1e-12);
            let (cw, _) = wyner_ci_numeric(&pi, 4, 16, 7).unwrap();
            assert!(gkw_ci(&pi) <= mutual_information(&pi) + 1e-9);
            assert!(mutual_information(&pi) <= cw + 1e-6);
        }
    }

    #[test]
    fn renyi_upper_bound_dsbs() {
        let d = DsbsParams::from_crossover(0.2).unwrap();
        let a = d.noise();
        let cw = wyner_ci_closed(Source::Dsbs(d));
        // q* lands in [0, a] across the parameter range.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let aa = rng.gen_range(0.01..0.49);
            let ss = rng.gen_range(0.01..1.0);
            let q = renyi_q_star(aa, ss);
            assert!((0.0..=aa).contains(&q), "q* = {q} outside [0, {aa}]");
        }
        // s -> 0 limit recovers Wyner's common information.
        let v0 = renyi_ci_dsbs_upper(a, 1e-4).unwrap();
        assert_abs_diff_eq!(v0, cw, epsilon = 1e-3);
        // Finite and above C_W for s in (0, 1].
        for s in [0.25, 0.5, 1.0] {
            let v = renyi_ci_dsbs_upper(a, s).unwrap();
            assert!(v.is_finite() && v >= cw - 1e-9);
        }
        // s = inf equals the exact CI closed form.
        let vi = renyi_ci_dsbs_upper(a, f64::INFINITY).unwrap();
        let (t_ex, _) = exact_ci_dsbs(a).unwrap();
        assert_abs_diff_eq!(vi, t_ex, epsilon = 1e-12);
    }

    #[test]
    fn exact_ci_dsbs_limits_and_gap() {
        // a -> 0: one common bit.
        let (v, _) = exact_ci_dsbs(1e-9).unwrap();
        assert_abs_diff_eq!(v, 1.0, epsilon = 1e-6);
        // a -> 1/2: gap -> 0.
        let (_, gap) = exact_ci_dsbs(0.5 - 1e-9).unwrap();
        assert!(gap.abs() < 1e-7);
        // value - C_W = gap to 1e-12.
        for a in [0.1, 0.25, 0.4] {
            let (v, gap) = exact_ci_dsbs(a).unwrap();
            let cw = wyner_ci_closed(Source::Dsbs(DsbsParams::from_noise(a).unwrap()));
            assert_abs_diff_eq!(v - cw, gap, epsilon = 1e-12);
            assert!(gap > 0.0);
        }
    }

    #[test]
    fn pseudo_ci_small_s_approaches_wyner() {
        let d = DsbsParams::from_crossover(0.2).unwrap();
        let cw = wyner_ci_closed(Source::Dsbs(d));
        let v = pseudo_ci(&d.to_joint(), 1e-3, PseudoSide::Upper, 4, 24, 0).unwrap();
        assert!((v - cw).abs() < 2e-2, "pseudo {v} vs C_W {cw}");
    }

    #[test]
    fn pseudo_ci_infinite_order_matches_exact_ci() {
        let d = DsbsParams::from_crossover(0.2).unwrap();
        let a = d.noise();
        let (t_ex, _) = exact_ci_dsbs(a).unwrap();
        let v = pseudo_ci(&d.to_joint(), f64::INFINITY, PseudoSide::Upper, 4, 32, 0).unwrap();
        assert_abs_diff_eq!(v, t_ex, epsilon = 1e-3);
    }

    #[test]
    fn pseudo_ci_closed_form_matches_numeric_at_s1() {
        let d = DsbsParams::from_crossover(0.2).unwrap();
        let a = d.noise();
        let closed = renyi_ci_dsbs_upper(a, 1.0).unwrap();
        let v = pseudo_ci(&d.to_joint(), 1.0, PseudoSide::Upper, 4, 32, 0).unwrap();
        assert_abs_diff_eq!(v, closed, epsilon = 1e-3);
    }

    #[test]
    fn pseudo_ci_monotone_in_s_and_sides_ordered() {
        let d = DsbsParams::from_crossover(0.2).unwrap();
        let pi = d.to_joint();
        let mut last = 0.0;
        for s in [0.25, 0.5, 1.0, 2.0, f64::INFINITY] {
            let v = pseudo_ci(&pi, s, PseudoSide::Upper, 4, 16, 0).unwrap();
            assert!(v >= last - 2e-3, "upper pseudo-CI decreased: {v} after {last}");
            last = v;
        }
        let up = pseudo_ci(&pi, 1.0, PseudoSide::Upper, 4, 16, 0).unwrap();
        let lo = pseudo_ci(&pi, 1.0, PseudoSide::Lower, 4, 16, 0).unwrap();
        assert!(lo <= up + 2e-3, "lower {lo} above upper {up}");
    }

    #[test]
    fn wyner_product_source_has_equal_pseudo_and_wyner() {
        // Pseudo-product distribution: [[a0 b0, a0 b1], [a1 b0, 0]] / Z.
        let (a0, a1, b0, b1) = (0.6, 0.4, 0.7, 0.3);
        let z = a0 * b0 + a0 * b1 + a1 * b0;
        let pi = JointPmf::new(vec![
            vec![a0 * b0 / z, a0 * b1 / z],
            vec![a1 * b0 / z, 0.0],
        ])
        .unwrap();
        let (cw, _) = wyner_ci_numeric(&pi, 4, 32, 0).unwrap();
        for s in [0.5, 1.0, f64::INFINITY] {
            let v = pseudo_ci(&pi, s, PseudoSide::Upper, 4, 32, 0).unwrap();
            assert!((v - cw).abs() < 2e-3, "s = {s}: pseudo {v} vs C_W {cw}");
        }
    }

    #[test]
    fn common_entropy_cases() {
        // Product: all orders give 0 (constant W).
        let pi = JointPmf::new(vec![vec![0.06, 0.14], vec![0.24, 0.56]]).unwrap();
        for alpha in [1.0, 2.0, f64::INFINITY] {
            let v = common_entropy(&pi, alpha, 4, 16, 0).unwrap();
            assert!(v < 1e-3, "alpha = {alpha}: {v}");
        }
        // X = Y uniform on m: G_alpha = log2 m.
        for m in [2usize, 3] {
            let mut grid = vec![vec![0.0; m]; m];
            for (i, row) in grid.iter_mut().enumerate() {
                row[i] = 1.0 / m as f64;
            }
            let pi = JointPmf::new(grid).unwrap();
            for alpha in [1.0, f64::INFINITY] {
                let v = common_entropy(&pi, alpha, m * m, 16, 0).unwrap();
                assert_abs_diff_eq!(v, (m as f64).log2(), epsilon = 1e-3);
            }
        }
    }

    #[test]
    fn common_entropy_dominates_wyner() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..8 {
            let pi = random_joint(&mut rng, 2, 2);
            let (cw, _) = wyner_ci_numeric(&pi, 4, 16, 2).unwrap();
            let g = common_entropy(&pi, 1.0, 4, 16, 2).unwrap();
            assert!(g >= cw - 1e-4, "G = {g} < C_W = {cw}");
        }
    }

    #[test]
    fn gaussian_bounds() {
        // rho -> 0: both bounds -> 0.
        let b = gaussian_exact_ci_bounds(1e-9).unwrap();
        assert!(b.lower.abs() < 1e-8 && b.upper < 1e-8);
        // rho = 0.5: gap value.
        let b = gaussian_exact_ci_bounds(0.5).unwrap();
        assert_abs_diff_eq!(
            b.upper - b.lower,
            0.5 * std::f64::consts::LOG2_E / 1.5,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(b.upper - b.lower, 0.4808983469629878, epsilon = 1e-9);
        // Upper bound beats the one-shot I(X;Y) + 24 bound everywhere.
        for i in 1..20 {
            let rho = i as f64 / 20.0;
            let b = gaussian_exact_ci_bounds(rho).unwrap();
            let one_shot = 0.5 * (1.0 / (1.0 - rho * rho)).log2() + 24.0;
            assert!(b.upper < one_shot);
        }
    }
}
