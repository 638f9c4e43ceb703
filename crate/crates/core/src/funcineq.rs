//! Hypercontractivity regions, Brascamp-Lieb exponents via their
//! information-theoretic characterizations, log-Sobolev functions, and the
//! strengthened hypercontractivity ODE.
//!
//! This module works in natural-log units internally wherever the quantities
//! are classically stated in nats (entropies `Ent`, the log-Sobolev functions
//! `b_p`, `g`, and the p-entropy); every public function documents its base.
//! Divergence-based exponents (`theta`, Brascamp-Lieb) stay in bits to match
//! the rest of the crate.

use crate::boolfn::RealCubeFunction;
use crate::coupling::{min_chi_square, min_relative_entropy, SignedPerturbation};
use crate::error::{Error, Result};
use crate::prob::{relative_entropy, JointPmf, Pmf, SUPPORT_EPS};

// ---------------------------------------------------------------------------
// Hypercontractivity membership
// ---------------------------------------------------------------------------

/// Which hypercontractivity region a `(p, q)` pair is tested against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HcRegion {
    /// `(p, q) in [1, inf)^2`, inequality `<f, g> <= |f|_p |g|_q`.
    Forward,
    /// `(p, q) in (-inf, 1]^2`, inequality `<f, g> >= |f|_p |g|_q`.
    Reverse,
}

/// Closed-form DSBS membership: `(p-1)(q-1) >= rho^2` within the region's
/// `(p, q)` ranges.
pub fn hc_membership_dsbs(rho: f64, p: f64, q: f64, region: HcRegion) -> Result<bool> {
    if rho.abs() >= 1.0 {
        return Err(Error::DomainError(format!("rho = {rho} outside (-1,1)")));
    }
    match region {
        HcRegion::Forward => {
            if p < 1.0 || q < 1.0 {
                return Err(Error::DomainError(format!(
                    "forward region needs p, q >= 1; got ({p}, {q})"
                )));
            }
        }
        HcRegion::Reverse => {
            if p > 1.0 || q > 1.0 {
                return Err(Error::DomainError(format!(
                    "reverse region needs p, q <= 1; got ({p}, {q})"
                )));
            }
        }
    }
    Ok((p - 1.0) * (q - 1.0) >= rho * rho - 1e-12)
}

/// Outcome of the information-theoretic membership test.
#[derive(Debug, Clone)]
pub enum HcMembership {
    Member,
    /// A violating marginal pair (the certificate).
    NonMember { qx: Pmf, qy: Pmf, violation: f64 },
}

impl HcMembership {
    pub fn is_member(&self) -> bool {
        matches!(self, HcMembership::Member)
    }
}

fn binary_pmf(t: f64) -> Pmf {
    Pmf { probs: vec![1.0 - t, t], labels: None }
}

/// Forward violation `D_x/p + D_y/q - D(Q_X, Q_Y || pi)` (positive = outside).
fn forward_violation(pi: &JointPmf, qx: &Pmf, qy: &Pmf, p: f64, q: f64) -> f64 {
    let dx = relative_entropy(qx, &pi.marginal_x()).unwrap_or(f64::INFINITY);
    let dy = relative_entropy(qy, &pi.marginal_y()).unwrap_or(f64::INFINITY);
    let d = match min_relative_entropy(qx, qy, pi) {
        Ok((v, _)) => v,
        Err(_) => return f64::NEG_INFINITY,
    };
    if !d.is_finite() {
        return f64::NEG_INFINITY;
    }
    dx / p + dy / q - d
}

/// Second-order directional check on binary alphabets: the limiting violation
/// along `Q = pi + eps eta` is governed by the chi-square forms, so boundary
/// cases invisible to a finite grid are caught here.
fn local_violation_binary(pi: &JointPmf, p: f64, q: f64, reverse: bool) -> Option<(f64, f64)> {
    let px = pi.marginal_x().probs;
    let py = pi.marginal_y().probs;
    let chi = |t: f64, marg: &[f64]| -> f64 { t * t / marg[0] + t * t / marg[1] };
    let mut worst: Option<(f64, f64, f64)> = None;
    let n = 720usize;
    for k in 0..n {
        let ang = std::f64::consts::PI * k as f64 / n as f64;
        let (lam, mu) = (ang.cos(), ang.sin());
        let ex = SignedPerturbation::new(vec![-lam, lam]).ok()?;
        let ey = SignedPerturbation::new(vec![-mu, mu]).ok()?;
        let x2 = min_chi_square(&ex, &ey, pi).ok()?;
        let rhs = chi(lam, &px) / p + chi(mu, &py) / q;
        let gap = if reverse { x2 - rhs } else { rhs - x2 };
        if gap > 1e-9 && worst.map_or(true, |(g, _, _)| gap > g) {
            worst = Some((gap, lam, mu));
        }
    }
    worst.map(|(_, lam, mu)| (lam, mu))
}

/// Information-theoretic membership test over a `(Q_X, Q_Y)` grid with local
/// refinement, using the minimal relative entropy. On binary alphabets a
/// directional second-order check sharpens the boundary. Returns a violating
/// pair as certificate when membership fails.
pub fn hc_membership_general(
    pi: &JointPmf,
    p: f64,
    q: f64,
    region: HcRegion,
    grid: usize,
) -> Result<HcMembership> {
    match region {
        HcRegion::Forward => {
            if p < 1.0 || q < 1.0 {
                return Err(Error::DomainError("forward region needs p, q >= 1".into()));
            }
            hc_scan(pi, p, q, grid, false)
        }
        HcRegion::Reverse => {
            if p > 1.0 || q > 1.0 {
                return Err(Error::DomainError("reverse region needs p, q <= 1".into()));
            }
            if p <= 0.0 && q <= 0.0 {
                // The (-,-) quadrant is entirely contained in the region.
                return Ok(HcMembership::Member);
            }
            if p > 0.0 && q > 0.0 {
                return hc_scan(pi, p, q, grid, true);
            }
            hc_scan_mixed(pi, p, q, grid)
        }
    }
}

fn hc_scan(pi: &JointPmf, p: f64, q: f64, grid: usize, reverse: bool) -> Result<HcMembership> {
    if pi.nx() != 2 || pi.ny() != 2 {
        return hc_scan_general(pi, p, q, grid, reverse);
    }
    let n = grid.max(20);
    let violation = |qx: f64, qy: f64| -> f64 {
        let v = forward_violation(pi, &binary_pmf(qx), &binary_pmf(qy), p, q);
        if reverse {
            -v
        } else {
            v
        }
    };
    let mut best = (f64::NEG_INFINITY, 0.5, 0.5);
    for i in 0..=n {
        let qx = i as f64 / n as f64;
        for j in 0..=n {
            let qy = j as f64 / n as f64;
            let v = violation(qx, qy);
            if v > best.0 {
                best = (v, qx, qy);
            }
        }
    }
    let mut step = 1.0 / n as f64;
    for _ in 0..6 {
        let (_, cx, cy) = best;
        for di in -8i32..=8 {
            for dj in -8i32..=8 {
                let qx = (cx + di as f64 * step / 8.0).clamp(0.0, 1.0);
                let qy = (cy + dj as f64 * step / 8.0).clamp(0.0, 1.0);
                let v = violation(qx, qy);
                if v > best.0 {
                    best = (v, qx, qy);
                }
            }
        }
        step /= 8.0;
    }
    if best.0 > 1e-9 {
        return Ok(HcMembership::NonMember {
            qx: binary_pmf(best.1),
            qy: binary_pmf(best.2),
            violation: best.0,
        });
    }
    // Boundary-sharp directional check.
    if let Some((lam, mu)) = local_violation_binary(pi, p, q, reverse) {
        let eps = 1e-4;
        let qx = binary_pmf((pi.marginal_x().probs[1] + eps * lam).clamp(0.0, 1.0));
        let qy = binary_pmf((pi.marginal_y().probs[1] + eps * mu).clamp(0.0, 1.0));
        let violation = forward_violation(pi, &qx, &qy, p, q).abs();
        return Ok(HcMembership::NonMember { qx, qy, violation });
    }
    Ok(HcMembership::Member)
}

fn hc_scan_general(
    pi: &JointPmf,
    p: f64,
    q: f64,
    grid: usize,
    reverse: bool,
) -> Result<HcMembership> {
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    let (nx, ny) = (pi.nx(), pi.ny());
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let samples = grid.max(20) * grid.max(20);
    let mut best: Option<(f64, Pmf, Pmf)> = None;
    for _ in 0..samples {
        let qx = random_simplex(&mut rng, nx);
        let qy = random_simplex(&mut rng, ny);
        let v = {
            let raw = forward_violation(pi, &qx, &qy, p, q);
            if reverse {
                -raw
            } else {
                raw
            }
        };
        if best.as_ref().map_or(true, |(b, _, _)| v > *b) {
            best = Some((v, qx, qy));
        }
    }
    match best {
        Some((v, qx, qy)) if v > 1e-7 => Ok(HcMembership::NonMember { qx, qy, violation: v }),
        _ => Ok(HcMembership::Member),
    }
}

fn random_simplex(rng: &mut impl rand::Rng, n: usize) -> Pmf {
    let v: Vec<f64> = (0..n).map(|_| -(rng.gen_range(1e-9..1.0f64).ln())).collect();
    let s: f64 = v.iter().sum();
    Pmf { probs: v.into_iter().map(|x| x / s).collect(), labels: None }
}

/// Mixed-sign reverse clauses (`p in (0,1], q < 0` and symmetric): checks
/// `min_{Q_Y} [D(Q_X, Q_Y || pi) - D(Q_Y || pi_Y)/q] <= D(Q_X || pi_X)/p`
/// for all `Q_X` (binary alphabets).
fn hc_scan_mixed(pi: &JointPmf, p: f64, q: f64, grid: usize) -> Result<HcMembership> {
    if pi.nx() != 2 || pi.ny() != 2 {
        return Err(Error::DomainError(
            "mixed-sign reverse membership implemented for binary alphabets".into(),
        ));
    }
    let swap = p < 0.0;
    let (pp, qq) = if swap { (q, p) } else { (p, q) };
    // Now pp in (0, 1], qq < 0; roles of X and Y swap with `swap`.
    let n = grid.max(40);
    let inner = |t_out: f64| -> f64 {
        let mut best = f64::INFINITY;
        for j in 0..=n {
            let t_in = j as f64 / n as f64;
            let (qx, qy) = if swap {
                (binary_pmf(t_in), binary_pmf(t_out))
            } else {
                (binary_pmf(t_out), binary_pmf(t_in))
            };
            let d = match min_relative_entropy(&qx, &qy, pi) {
                Ok((v, _)) => v,
                Err(_) => continue,
            };
            if !d.is_finite() {
                continue;
            }
            let d_in = if swap {
                relative_entropy(&qx, &pi.marginal_x()).unwrap()
            } else {
                relative_entropy(&qy, &pi.marginal_y()).unwrap()
            };
            best = best.min(d - d_in / qq);
        }
        best
    };
    let mut worst = (f64::NEG_INFINITY, 0.5);
    for i in 0..=n {
        let t = i as f64 / n as f64;
        let d_out = if swap {
            relative_entropy(&binary_pmf(t), &pi.marginal_y()).unwrap()
        } else {
            relative_entropy(&binary_pmf(t), &pi.marginal_x()).unwrap()
        };
        let v = inner(t) - d_out / pp;
        if v > worst.0 {
            worst = (v, t);
        }
    }
    if worst.0 > 1e-7 {
        let t = worst.1;
        let (qx, qy) = if swap {
            (binary_pmf(0.5), binary_pmf(t))
        } else {
            (binary_pmf(t), binary_pmf(0.5))
        };
        return Ok(HcMembership::NonMember { qx, qy, violation: worst.0 });
    }
    Ok(HcMembership::Member)
}

// ---------------------------------------------------------------------------
// Brascamp-Lieb exponents
// ---------------------------------------------------------------------------

/// `theta(Q_X, Q_Y) = D(Q_X, Q_Y || pi) - D(Q_X || pi_X)/p - D(Q_Y || pi_Y)/q`
/// in bits.
pub fn theta(pi: &JointPmf, qx: &Pmf, qy: &Pmf, p: f64, q: f64) -> f64 {
    let d = match min_relative_entropy(qx, qy, pi) {
        Ok((v, _)) => v,
        Err(_) => return f64::INFINITY,
    };
    if !d.is_finite() {
        return f64::INFINITY;
    }
    let dx = relative_entropy(qx, &pi.marginal_x()).unwrap_or(f64::INFINITY);
    let dy = relative_entropy(qy, &pi.marginal_y()).unwrap_or(f64::INFINITY);
    d - dx / p - dy / q
}

/// Brascamp-Lieb exponents `(lower, upper)` in bits:
/// `Lambda_lower = inf theta` for `p, q > 0` and `-inf` otherwise (flagged by
/// the caller via `is_infinite`); `Lambda_upper` follows the sign clauses
/// `sup`, `sup inf`, `inf sup`, or `0` for `p, q < 0`. Binary alphabets only
/// (grid + staged refinement).
pub fn bl_exponents(pi: &JointPmf, p: f64, q: f64) -> Result<(f64, f64)> {
    if p == 0.0 || q == 0.0 {
        return Err(Error::DomainError("p, q must be nonzero".into()));
    }
    if pi.nx() != 2 || pi.ny() != 2 {
        return Err(Error::DomainError("BL exponents implemented for binary alphabets".into()));
    }
    let lower = if p > 0.0 && q > 0.0 {
        optimize_theta(pi, p, q, false, false)
    } else {
        f64::NEG_INFINITY
    };
    let upper = if p > 0.0 && q > 0.0 {
        optimize_theta(pi, p, q, true, true)
    } else if p < 0.0 && q < 0.0 {
        0.0
    } else {
        // sup over the positive-exponent marginal of inf over the other.
        let swap = p < 0.0;
        let (outer_idx_is_x, _pp, _qq) = if swap { (false, q, p) } else { (true, p, q) };
        minimax_theta(pi, p, q, outer_idx_is_x)
    };
    Ok((lower, upper))
}

fn optimize_theta(pi: &JointPmf, p: f64, q: f64, outer_max: bool, inner_max: bool) -> f64 {
    debug_assert_eq!(outer_max, inner_max);
    let n = 200usize;
    let sign = if outer_max { -1.0 } else { 1.0 };
    let f = |qx: f64, qy: f64| -> f64 { sign * theta(pi, &binary_pmf(qx), &binary_pmf(qy), p, q) };
    let mut best = (f64::INFINITY, 0.5, 0.5);
    for i in 0..=n {
        let qx = i as f64 / n as f64;
        for j in 0..=n {
            let qy = j as f64 / n as f64;
            let v = f(qx, qy);
            if v < best.0 {
                best = (v, qx, qy);
            }
        }
    }
    let mut step = 1.0 / n as f64;
    for _ in 0..7 {
        let (_, cx, cy) = best;
        for di in -8i32..=8 {
            for dj in -8i32..=8 {
                let qx = (cx + di as f64 * step / 8.0).clamp(0.0, 1.0);
                let qy = (cy + dj as f64 * step / 8.0).clamp(0.0, 1.0);
                let v = f(qx, qy);
                if v < best.0 {
                    best = (v, qx, qy);
                }
            }
        }
        step /= 8.0;
    }
    sign * best.0
}

fn minimax_theta(pi: &JointPmf, p: f64, q: f64, outer_is_x: bool) -> f64 {
    let n = 300usize;
    let theta_at = |tx: f64, ty: f64| -> f64 { theta(pi, &binary_pmf(tx), &binary_pmf(ty), p, q) };
    let inner_min = |t_out: f64| -> f64 {
        let mut best = f64::INFINITY;
        for j in 0..=n {
            let t_in = j as f64 / n as f64;
            let v = if outer_is_x { theta_at(t_out, t_in) } else { theta_at(t_in, t_out) };
            best = best.min(v);
        }
        best
    };
    let mut best = f64::NEG_INFINITY;
    for i in 0..=n {
        let t = i as f64 / n as f64;
        best = best.max(inner_min(t));
    }
    best
}

/// Search for a pair of positive functions violating the two-function
/// hypercontractivity inequality at `(p, q)` on `{0,1}^n x {0,1}^n`:
/// `<f, g> > |f|_p |g|_q` (forward) by sign-seeking local search with the
/// given restart budget. A `None` outcome means "no certificate found", not
/// membership.
pub fn find_hc_violating_pair(
    d: crate::prob::DsbsParams,
    p: f64,
    q: f64,
    n: usize,
    restarts: usize,
) -> Option<(RealCubeFunction, RealCubeFunction)> {
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    let size = 1usize << n;
    let rho = d.rho;
    let norm = |f: &[f64], r: f64| -> f64 {
        let mean: f64 = f.iter().map(|&v| v.powf(r)).sum::<f64>() / size as f64;
        mean.powf(1.0 / r)
    };
    let inner = |f: &[f64], g: &[f64]| -> f64 {
        let (al, be) = (d.alpha(), d.beta());
        let mut acc = 0.0;
        for (x, &fv) in f.iter().enumerate() {
            for (y, &gv) in g.iter().enumerate() {
                let dist = (x ^ y).count_ones() as i32;
                acc += al.powi(n as i32 - dist) * be.powi(dist) * fv * gv
                    * 2f64.powi(n as i32 - 1).recip()
                    * 0.5f64.recip().powi(0);
            }
        }
        // pi^n(x, y) already includes the 2^-n marginal weights via alpha/beta.
        acc
    };
    let _ = rho;
    let objective = |f: &[f64], g: &[f64]| -> f64 { inner(f, g) - norm(f, p) * norm(g, q) };
    let mut rng = ChaCha8Rng::seed_from_u64(4242);
    for _ in 0..restarts {
        // Exponential tilts violate first just outside the region.
        let c1: f64 = rng.gen_range(-3.0..3.0);
        let c2: f64 = rng.gen_range(-3.0..3.0);
        let mut f: Vec<f64> =
            (0..size).map(|x| (c1 * (x as u32).count_ones() as f64).exp()).collect();
        let mut g: Vec<f64> =
            (0..size).map(|x| (c2 * (x as u32).count_ones() as f64).exp()).collect();
        let mut cur = objective(&f, &g);
        for _ in 0..200 {
            let mut improved = false;
            for target in 0..2 {
                let vecref = if target == 0 { &mut f } else { &mut g };
                let idx = rng.gen_range(0..size);
                let old = vecref[idx];
                let factor = 1.0 + rng.gen_range(-0.2..0.2f64);
                vecref[idx] = (old * factor).max(1e-9);
                let cand = objective(&f, &g);
                if cand > cur {
                    cur = cand;
                    improved = true;
                } else if target == 0 {
                    f[idx] = old;
                } else {
                    g[idx] = old;
                }
            }
            if cur > 1e-9 && !improved {
                break;
            }
        }
        if cur > 1e-9 {
            return Some((
                RealCubeFunction::new(n, f).ok()?,
                RealCubeFunction::new(n, g).ok()?,
            ));
        }
    }
    None
}

// ---------------------------------------------------------------------------
// Log-Sobolev functions (natural-log units)
// ---------------------------------------------------------------------------

/// `y(t) = h_e^{-1}(ln 2 - t)` on `[0, ln 2]`, the level variable of the
/// DSBS log-Sobolev functions.
pub fn lsi_level(t: f64) -> Result<f64> {
    if !(0.0..=std::f64::consts::LN_2 + 1e-12).contains(&t) {
        return Err(Error::DomainError(format!("t = {t} outside [0, ln 2]")));
    }
    crate::prob::binary_entropy_nats_inv(std::f64::consts::LN_2 - t.min(std::f64::consts::LN_2))
}

/// `b_p(t)`, the DSBS nonlinear log-Sobolev tradeoff (nats):
/// `sign(p-1)/2 (1 - y^{1/p}(1-y)^{1-1/p} - y^{1-1/p}(1-y)^{1/p})` for
/// `p != 0, 1`, and `(1/2 - y) ln((1-y)/y)` at `p = 1`.
pub fn lsi_b(p: f64, t: f64) -> Result<f64> {
    let y = lsi_level(t)?;
    if p == 0.0 {
        return Err(Error::DomainError("p = 0 has no b_p".into()));
    }
    if (p - 1.0).abs() < 1e-12 {
        if y <= 0.0 {
            return Ok(f64::INFINITY);
        }
        return Ok((0.5 - y) * ((1.0 - y) / y).ln());
    }
    let sign = (p - 1.0).signum();
    let term = |u: f64, e: f64| -> f64 {
        if u <= 0.0 {
            if e == 0.0 {
                1.0
            } else {
                0.0
            }
        } else {
            u.powf(e)
        }
    };
    Ok(sign / 2.0
        * (1.0 - term(y, 1.0 / p) * term(1.0 - y, 1.0 - 1.0 / p)
            - term(y, 1.0 - 1.0 / p) * term(1.0 - y, 1.0 / p)))
}

/// `g(t) = (2 - 4 sqrt(y(1-y))) / t` with `y = h_e^{-1}(ln 2 - t)`, a smooth
/// increasing bijection from `[0, ln 2]` onto `[2, 2/ln 2]` (the denominator
/// is `ln 2 - h_e(y) = t`).
pub fn lsi_g(t: f64) -> Result<f64> {
    let y = lsi_level(t)?;
    if t < 1e-9 {
        return Ok(2.0);
    }
    Ok((2.0 - 4.0 * (y * (1.0 - y)).sqrt()) / t)
}

/// `Xi_p(alpha)`: the inverse of `b_p`, by bisection on `[0, ln 2]`
/// (`b_p` is convex increasing).
pub fn lsi_xi(p: f64, alpha: f64) -> Result<f64> {
    let top = lsi_b(p, std::f64::consts::LN_2)?;
    if alpha < -1e-12 || alpha > top + 1e-12 {
        return Err(Error::DomainError(format!("alpha = {alpha} outside [0, {top}]")));
    }
    let (mut lo, mut hi) = (0.0f64, std::f64::consts::LN_2);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if lsi_b(p, mid)? < alpha {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Hypercube Dirichlet form `E_n(f, g) = -(1/2) <Delta f, g>` under the
/// uniform measure, with `Delta f(x) = sum_{y ~ x} (f(y) - f(x))`.
pub fn dirichlet_form(f: &RealCubeFunction, g: &RealCubeFunction) -> Result<f64> {
    if f.n != g.n {
        return Err(Error::DomainError("dimension mismatch".into()));
    }
    let n = f.n;
    let size = 1usize << n;
    let mut acc = 0.0;
    for x in 0..size {
        let mut lap = 0.0;
        for i in 0..n {
            lap += f.table[x ^ (1 << i)] - f.table[x];
        }
        acc += lap * g.table[x];
    }
    Ok(-0.5 * acc / size as f64)
}

/// Entropy functional `Ent(f) = E[f ln f] - E[f] ln E[f]` (nats, uniform
/// measure).
pub fn ent_functional(f: &RealCubeFunction) -> f64 {
    let size = f.table.len() as f64;
    let mean: f64 = f.table.iter().sum::<f64>() / size;
    if mean <= 0.0 {
        return 0.0;
    }
    let e_flnf: f64 = f
        .table
        .iter()
        .map(|&v| if v > 0.0 { v * v.ln() } else { 0.0 })
        .sum::<f64>()
        / size;
    (e_flnf - mean * mean.ln()).max(0.0)
}

/// Nonlinear p-log-Sobolev check for the DSBS semigroup:
/// `sign(p-1) E_n(f, f^{p-1}) / E[f^p] / n >= b_p(Ent(f^p)/E[f^p]/n)`
/// (`E_n(f, ln f)/E[f]` against `b_1(Ent(f)/E[f])` at `p = 1`).
/// Returns `(holds, lhs, rhs)`, all in nats.
pub fn nonlinear_lsi_check(f: &RealCubeFunction, p: f64) -> Result<(bool, f64, f64)> {
    if p == 0.0 {
        return Err(Error::DomainError("p = 0 not supported".into()));
    }
    if p < 1.0 && f.table.iter().any(|&v| v <= 0.0) {
        return Err(Error::DomainError("p < 1 requires strictly positive f".into()));
    }
    let n = f.n as f64;
    let size = f.table.len() as f64;
    let (lhs, arg) = if (p - 1.0).abs() < 1e-12 {
        let lnf = RealCubeFunction {
            n: f.n,
            table: f.table.iter().map(|&v| v.ln().max(-700.0) - 0.0).collect(),
        };
        // ln f may be negative; bypass the nonnegativity of RealCubeFunction
        // by building the form directly.
        let mut acc = 0.0;
        for x in 0..f.table.len() {
            let mut lap = 0.0;
            for i in 0..f.n {
                lap += f.table[x ^ (1 << i)] - f.table[x];
            }
            acc += lap * lnf.table[x];
        }
        let form = -0.5 * acc / size;
        let mean: f64 = f.table.iter().sum::<f64>() / size;
        (form / mean / n, ent_functional(f) / mean / n)
    } else {
        let fp1 = RealCubeFunction {
            n: f.n,
            table: f.table.iter().map(|&v| v.powf(p - 1.0)).collect(),
        };
        let mut acc = 0.0;
        for x in 0..f.table.len() {
            let mut lap = 0.0;
            for i in 0..f.n {
                lap += f.table[x ^ (1 << i)] - f.table[x];
            }
            acc += lap * fp1.table[x];
        }
        let form = -0.5 * acc / size;
        let fp = RealCubeFunction {
            n: f.n,
            table: f.table.iter().map(|&v| v.powf(p)).collect(),
        };
        let mean_p: f64 = fp.table.iter().sum::<f64>() / size;
        ((p - 1.0).signum() * form / mean_p / n, ent_functional(&fp) / mean_p / n)
    };
    let rhs = lsi_b(p, arg.clamp(0.0, std::f64::consts::LN_2))?;
    Ok((lhs >= rhs - 1e-9, lhs, rhs))
}

// ---------------------------------------------------------------------------
// Strengthened hypercontractivity ODE
// ---------------------------------------------------------------------------

/// `p`-entropy `Ent_p(f) = p/(p-1) ln(|f|_p / |f|_1)` in nats (uniform cube
/// measure); equals `D_p(Q || pi)` in nats when `f = dQ/dpi`.
pub fn p_entropy(f: &RealCubeFunction, p: f64) -> Result<f64> {
    if p <= 1.0 {
        return Err(Error::DomainError("p-entropy needs p > 1 here".into()));
    }
    let size = f.table.len() as f64;
    let norm_p = (f.table.iter().map(|&v| v.powf(p)).sum::<f64>() / size).powf(1.0 / p);
    let norm_1 = f.table.iter().sum::<f64>() / size;
    if norm_1 <= 0.0 {
        return Err(Error::DomainError("zero function".into()));
    }
    Ok(p / (p - 1.0) * (norm_p / norm_1).ln())
}

/// Strengthened hypercontractivity exponent curve: integrates
/// `du/dt = g((alpha/p') (1 + e^{-u}))`, `u(0) = ln(p-1)` by fixed-step RK4
/// (step 1e-4, validated by step halving) and returns samples of
/// `q(t) = 1 + e^{u(t)}` on `[0, t_max]`. `alpha` is in nats.
pub fn strengthened_hc_ode(p: f64, alpha: f64, t_max: f64) -> Result<Vec<(f64, f64)>> {
    if p <= 1.0 {
        return Err(Error::DomainError(format!("p = {p} must be > 1")));
    }
    if !(0.0..=std::f64::consts::LN_2 + 1e-12).contains(&alpha) {
        return Err(Error::DomainError(format!("alpha = {alpha} outside [0, ln 2]")));
    }
    if !(t_max > 0.0) || t_max > 20.0 {
        return Err(Error::OdeStepFailure(format!("t_max = {t_max} outside (0, 20]")));
    }
    let p_conj = p / (p - 1.0);
    let rhs = |u: f64| -> Result<f64> {
        let arg = (alpha / p_conj) * (1.0 + (-u).exp());
        lsi_g(arg.clamp(0.0, std::f64::consts::LN_2))
    };
    let integrate = |h: f64| -> Result<Vec<(f64, f64)>> {
        let steps = (t_max / h).ceil() as usize;
        let mut u = (p - 1.0).ln();
        let mut out = Vec::with_capacity(steps + 1);
        out.push((0.0, 1.0 + u.exp()));
        for k in 0..steps {
            let t = k as f64 * h;
            let hh = h.min(t_max - t);
            let k1 = rhs(u)?;
            let k2 = rhs(u + 0.5 * hh * k1)?;
            let k3 = rhs(u + 0.5 * hh * k2)?;
            let k4 = rhs(u + hh * k3)?;
            u += hh / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            if !u.is_finite() {
                return Err(Error::OdeStepFailure(format!("u diverged at t = {t}")));
            }
            out.push((t + hh, 1.0 + u.exp()));
        }
        Ok(out)
    };
    let fine = integrate(1e-4)?;
    let coarse = integrate(2e-4)?;
    let diff = (fine.last().unwrap().1 - coarse.last().unwrap().1).abs();
    if diff > 1e-6 * (1.0 + fine.last().unwrap().1.abs()) {
        return Err(Error::OdeStepFailure(format!("step-halving validation failed: {diff:e}")));
    }
    Ok(fine)
}

/// Linear interpolation of the ODE output at a time point.
pub fn curve_at(curve: &[(f64, f64)], t: f64) -> f64 {
    match curve.binary_search_by(|probe| probe.0.partial_cmp(&t).unwrap()) {
        Ok(i) => curve[i].1,
        Err(0) => curve[0].1,
        Err(i) if i >= curve.len() => curve[curve.len() - 1].1,
        Err(i) => {
            let (t0, q0) = curve[i - 1];
            let (t1, q1) = curve[i];
            q0 + (q1 - q0) * (t - t0) / (t1 - t0)
        }
    }
}

/// The root `rho_1` of
/// `(1 + rho^2) log((1+rho)/2) - (1-rho)^2 log((1-rho)/2) = 0` in `(0, 1)`,
/// by bisection; approximately 0.461491.
pub fn rho1_root() -> f64 {
    let f = |rho: f64| -> f64 {
        (1.0 + rho * rho) * ((1.0 + rho) / 2.0).log2()
            - (1.0 - rho) * (1.0 - rho) * ((1.0 - rho) / 2.0).log2()
    };
    let (mut lo, mut hi) = (1e-9, 1.0 - 1e-9);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Residual of the defining equation at a point (for root verification).
pub fn rho1_residual(rho: f64) -> f64 {
    (1.0 + rho * rho) * ((1.0 + rho) / 2.0).log2()
        - (1.0 - rho) * (1.0 - rho) * ((1.0 - rho) / 2.0).log2()
}

/// Duality of relative entropy (bits): with `beta = sum_x 2^{-c(x)} prod_i
/// P_i(x)^{s_i}` and weights summing to one,
/// `-log2 beta = inf_Q { sum_i s_i D(Q || P_i) + E_Q[c] }`, attained at
/// `Q*(x) = 2^{-c(x)} prod_i P_i(x)^{s_i} / beta`.
pub fn duality_beta(pmfs: &[Pmf], weights: &[f64], cost: &[f64]) -> Result<(f64, Pmf)> {
    if pmfs.is_empty() || pmfs.len() != weights.len() {
        return Err(Error::DomainError("need matching pmfs and weights".into()));
    }
    let n = pmfs[0].len();
    if cost.len() != n || pmfs.iter().any(|p| p.len() != n) {
        return Err(Error::AlphabetMismatch("duality inputs".into()));
    }
    if (weights.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::DomainError("weights must sum to 1".into()));
    }
    let mut unnorm = vec![0.0f64; n];
    for (x, u) in unnorm.iter_mut().enumerate() {
        let mut acc = -cost[x];
        let mut ok = true;
        for (p, &s) in pmfs.iter().zip(weights) {
            if p.probs[x] <= SUPPORT_EPS {
                ok = false;
                break;
            }
            acc += s * p.probs[x].log2();
        }
        *u = if ok { 2f64.powf(acc) } else { 0.0 };
    }
    let beta: f64 = unnorm.iter().sum();
    if beta <= 0.0 {
        return Err(Error::DomainError("beta = 0: empty common support".into()));
    }
    let qstar = Pmf::new(unnorm.into_iter().map(|v| v / beta).collect())?;
    Ok((beta, qstar))
}

/// The duality objective `sum_i s_i D(Q || P_i) + E_Q[c]` in bits.
pub fn duality_objective(q: &Pmf, pmfs: &[Pmf], weights: &[f64], cost: &[f64]) -> Result<f64> {
    let mut acc = 0.0;
    for (p, &s) in pmfs.iter().zip(weights) {
        acc += s * relative_entropy(q, p)?;
    }
    for (x, &c) in cost.iter().enumerate() {
        acc += q.probs[x] * c;
    }
    Ok(acc)
}
