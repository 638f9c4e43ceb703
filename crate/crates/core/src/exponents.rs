//! Large- and moderate-deviations exponents for NICD and q-stability, the
//! Gaussian copula and q-stability functions, and discrete convex/concave
//! envelope machinery (double Legendre-Fenchel biconjugation).
//!
//! All exponents are in bits.

use crate::coupling::min_relative_entropy;
use crate::error::{Error, Result};
use crate::numeric::normal::{bivariate_normal_cdf, phi, phi_inv};
use crate::numeric::quad::gauss_hermite_expect;
use crate::prob::{binary_entropy, binary_entropy_inv, relative_entropy, JointPmf, Pmf};

/// Bivariate normal copula `Lambda_rho(a, b) = Phi_rho(Phi^-1(a), Phi^-1(b))`,
/// the Gaussian quadrant probability at the given quantiles.
pub fn gaussian_copula(rho: f64, a: f64, b: f64) -> Result<f64> {
    if rho.abs() >= 1.0 {
        return Err(Error::DomainError(format!("rho = {rho} outside (-1,1)")));
    }
    if !(0.0..=1.0).contains(&a) || !(0.0..=1.0).contains(&b) {
        return Err(Error::DomainError("quantile levels outside [0,1]".into()));
    }
    if a == 0.0 || b == 0.0 {
        return Ok(0.0);
    }
    if a == 1.0 {
        return Ok(b);
    }
    if b == 1.0 {
        return Ok(a);
    }
    Ok(bivariate_normal_cdf(phi_inv(a), phi_inv(b), rho))
}

/// Gaussian q-stability function
/// `Lambda_rho^{(q)}(a) = E[ Phi((Phi^-1(a) - rho V)/sqrt(1-rho^2))^q ]`
/// over `V ~ N(0,1)`, by Gauss-Hermite quadrature.
pub fn gaussian_q_stability(rho: f64, q: f64, a: f64) -> Result<f64> {
    if rho.abs() >= 1.0 {
        return Err(Error::DomainError(format!("rho = {rho} outside (-1,1)")));
    }
    if !(0.0..=1.0).contains(&a) {
        return Err(Error::DomainError(format!("level a = {a} outside [0,1]")));
    }
    if a == 0.0 || a == 1.0 {
        return Ok(a);
    }
    let t = phi_inv(a);
    let denom = (1.0 - rho * rho).sqrt();
    let val = gauss_hermite_expect(|v| phi((t - rho * v) / denom).powf(q));
    if !val.is_finite() {
        return Err(Error::QuadratureFailure(format!("non-finite at rho={rho}, q={q}, a={a}")));
    }
    Ok(val)
}

/// Optimization side for the NICD exponents.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Forward,
    Reverse,
}

/// DSBS binary relative entropy to the uniform marginal: `d(t || 1/2) = 1 - h(t)`.
fn d_to_half(t: f64) -> f64 {
    1.0 - binary_entropy(t)
}

/// Closed-form minimal relative entropy for the DSBS:
/// `D(a, b) = D_{a,b}(p*)` with the optimal diagonal mass `p*` solving the
/// stationarity quadratic with `kappa = ((1+rho)/(1-rho))^2`.
pub fn dsbs_min_rel_entropy_closed(rho: f64, a: f64, b: f64) -> Result<f64> {
    if rho.abs() >= 1.0 {
        return Err(Error::DomainError(format!("rho = {rho} outside (-1,1)")));
    }
    let kappa = ((1.0 + rho) / (1.0 - rho)).powi(2);
    let lo = (a + b - 1.0).max(0.0);
    let hi = a.min(b);
    let c1 = (kappa - 1.0) * (a + b) + 1.0;
    let disc = c1 * c1 - 4.0 * kappa * (kappa - 1.0) * a * b;
    let p_star = if (kappa - 1.0).abs() < 1e-12 {
        a * b
    } else {
        ((c1 - disc.max(0.0).sqrt()) / (2.0 * (kappa - 1.0))).clamp(lo, hi)
    };
    let d = crate::prob::DsbsParams::from_rho(rho)?;
    let (al, be) = (d.alpha(), d.beta());
    let q = [[1.0 + p_star - a - b, b - p_star], [a - p_star, p_star]];
    let pi = [[al, be], [be, al]];
    let mut acc = 0.0;
    for x in 0..2 {
        for y in 0..2 {
            if q[x][y] > 1e-15 {
                acc += q[x][y] * (q[x][y] / pi[x][y]).log2();
            }
        }
    }
    Ok(acc.max(0.0))
}

/// Closed-form DSBS LD exponents. In the central wedge where both divergence
/// constraints bind, the forward exponent is `D(h^-1(1-alpha), h^-1(1-beta))`
/// via the `p*` closed form. When one constraint is slack (the LD analogue of
/// the piecewise MD clauses), fixing the binding marginal and completing the
/// coupling with the channel itself is feasible, so the exponent collapses to
/// that single divergence: `alpha` when `1 - h(h^-1(1-alpha) * p) >= beta`,
/// symmetrically `beta`. The reverse exponent reflects the second argument to
/// `1 - h^-1(1-beta)`; maximization keeps both constraints tight.
pub fn nicd_ld_exponent_dsbs(rho: f64, alpha: f64, beta: f64, side: Side) -> Result<f64> {
    if !(0.0..=1.0).contains(&alpha) || !(0.0..=1.0).contains(&beta) {
        return Err(Error::DomainError("LD exponents need alpha, beta in [0,1]".into()));
    }
    let a = binary_entropy_inv(1.0 - alpha)?;
    let b = binary_entropy_inv(1.0 - beta)?;
    match side {
        Side::Forward => {
            let p = (1.0 - rho) / 2.0;
            if 1.0 - binary_entropy(crate::prob::conv(a, p)) >= beta {
                return Ok(alpha);
            }
            if 1.0 - binary_entropy(crate::prob::conv(b, p)) >= alpha {
                return Ok(beta);
            }
            dsbs_min_rel_entropy_closed(rho, a, b)
        }
        Side::Reverse => dsbs_min_rel_entropy_closed(rho, a, 1.0 - b),
    }
}

/// General LD exponent by nested optimization: an outer search over marginal
/// pairs meeting the divergence constraints (`>=` forward, `<=` reverse) and
/// the inner minimal relative entropy via IPF. Binary alphabets run a
/// 400 x 400 grid with staged local refinement; larger alphabets use a
/// penalized multi-start scheme on squared-normalized simplex coordinates.
pub fn nicd_ld_exponent(pi: &JointPmf, alpha: f64, beta: f64, side: Side) -> Result<f64> {
    let px = pi.marginal_x();
    let py = pi.marginal_y();
    let alpha_max =
        px.probs.iter().filter(|&&p| p > 0.0).map(|&p| -p.log2()).fold(0.0, f64::max);
    let beta_max =
        py.probs.iter().filter(|&&p| p > 0.0).map(|&p| -p.log2()).fold(0.0, f64::max);
    if alpha < 0.0 || beta < 0.0 || alpha > alpha_max + 1e-12 || beta > beta_max + 1e-12 {
        return Err(Error::DomainError(format!(
            "constraints ({alpha}, {beta}) outside [0, {alpha_max}] x [0, {beta_max}]"
        )));
    }
    if alpha == 0.0 && beta == 0.0 && side == Side::Forward {
        return Ok(0.0);
    }
    if pi.nx() == 2 && pi.ny() == 2 {
        return binary_ld_exponent(pi, alpha, beta, side);
    }
    general_ld_exponent(pi, alpha, beta, side)
}

fn binary_ld_exponent(pi: &JointPmf, alpha: f64, beta: f64, side: Side) -> Result<f64> {
    let px = pi.marginal_x();
    let py = pi.marginal_y();
    let feasible = |qx: f64, qy: f64| -> bool {
        let dx = relative_entropy(&Pmf { probs: vec![1.0 - qx, qx], labels: None }, &px).unwrap();
        let dy = relative_entropy(&Pmf { probs: vec![1.0 - qy, qy], labels: None }, &py).unwrap();
        match side {
            Side::Forward => dx >= alpha - 1e-12 && dy >= beta - 1e-12,
            Side::Reverse => dx <= alpha + 1e-12 && dy <= beta + 1e-12,
        }
    };
    let objective = |qx: f64, qy: f64| -> f64 {
        let qxp = Pmf { probs: vec![1.0 - qx, qx], labels: None };
        let qyp = Pmf { probs: vec![1.0 - qy, qy], labels: None };
        match min_relative_entropy(&qxp, &qyp, pi) {
            Ok((v, _)) => v,
            Err(_) => f64::INFINITY,
        }
    };
    // Stage 1: 400 x 400 global grid.
    let n0 = 400usize;
    let mut best = (f64::INFINITY, 0.5, 0.5);
    for i in 0..=n0 {
        let qx = i as f64 / n0 as f64;
        for j in 0..=n0 {
            let qy = j as f64 / n0 as f64;
            if feasible(qx, qy) {
                let v = objective(qx, qy);
                if v < best.0 {
                    best = (v, qx, qy);
                }
            }
        }
    }
    if !best.0.is_finite() {
        return Ok(f64::INFINITY);
    }
    // Stage 2: staged local refinement around the incumbent.
    let mut step = 1.0 / n0 as f64;
    for _ in 0..8 {
        let (_, cx, cy) = best;
        let fine = 10i32;
        for di in -fine..=fine {
            for dj in -fine..=fine {
                let qx = (cx + di as f64 * step / fine as f64).clamp(0.0, 1.0);
                let qy = (cy + dj as f64 * step / fine as f64).clamp(0.0, 1.0);
                if feasible(qx, qy) {
                    let v = objective(qx, qy);
                    if v < best.0 {
                        best = (v, qx, qy);
                    }
                }
            }
        }
        step /= fine as f64;
    }
    Ok(best.0)
}

fn general_ld_exponent(pi: &JointPmf, alpha: f64, beta: f64, side: Side) -> Result<f64> {
    use crate::numeric::lbfgs::{minimize, LbfgsOptions};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    let px = pi.marginal_x();
    let py = pi.marginal_y();
    let (nx, ny) = (pi.nx(), pi.ny());
    let to_simplex = |v: &[f64]| -> Vec<f64> {
        let sq: Vec<f64> = v.iter().map(|x| x * x + 1e-12).collect();
        let s: f64 = sq.iter().sum();
        sq.into_iter().map(|x| x / s).collect()
    };
    let restarts = 16;
    let mut best = f64::INFINITY;
    for r in 0..restarts {
        let mut rng = ChaCha8Rng::seed_from_u64(1337 + r as u64);
        let x0: Vec<f64> = (0..nx + ny).map(|_| rng.gen_range(0.2..1.0f64)).collect();
        let mut weight = 10.0;
        let mut x = x0;
        for _ in 0..6 {
            let obj = |v: &[f64]| -> f64 {
                let qx = Pmf { probs: to_simplex(&v[..nx]), labels: None };
                let qy = Pmf { probs: to_simplex(&v[nx..]), labels: None };
                let dx = relative_entropy(&qx, &px).unwrap_or(f64::INFINITY);
                let dy = relative_entropy(&qy, &py).unwrap_or(f64::INFINITY);
                let pen = match side {
                    Side::Forward => (alpha - dx).max(0.0).powi(2) + (beta - dy).max(0.0).powi(2),
                    Side::Reverse => (dx - alpha).max(0.0).powi(2) + (dy - beta).max(0.0).powi(2),
                };
                let d = min_relative_entropy(&qx, &qy, pi)
                    .map(|(v, _)| v)
                    .unwrap_or(f64::INFINITY);
                if !d.is_finite() {
                    return 1e6;
                }
                d + weight * pen
            };
            let (xn, _) = minimize(obj, &x, &LbfgsOptions { max_iters: 120, ..Default::default() });
            x = xn;
            weight *= 10.0;
        }
        // Re-check feasibility before accepting.
        let qx = Pmf { probs: to_simplex(&x[..nx]), labels: None };
        let qy = Pmf { probs: to_simplex(&x[nx..]), labels: None };
        let dx = relative_entropy(&qx, &px)?;
        let dy = relative_entropy(&qy, &py)?;
        let ok = match side {
            Side::Forward => dx >= alpha - 1e-6 && dy >= beta - 1e-6,
            Side::Reverse => dx <= alpha + 1e-6 && dy <= beta + 1e-6,
        };
        if ok {
            let (v, _) = min_relative_entropy(&qx, &qy, pi)?;
            best = best.min(v);
        }
    }
    Ok(best)
}

/// Closed-form DSBS MD exponents: forward
/// `(alpha + beta - 2 rho sqrt(alpha beta))/(1 - rho^2)` in the central wedge
/// (`alpha` or `beta` alone outside it), reverse
/// `(alpha + beta + 2 rho sqrt(alpha beta))/(1 - rho^2)`.
pub fn nicd_md_exponent(rho: f64, alpha: f64, beta: f64, side: Side) -> Result<f64> {
    if rho.abs() >= 1.0 {
        return Err(Error::DomainError(format!("rho = {rho} outside (-1,1)")));
    }
    if alpha < 0.0 || beta < 0.0 {
        return Err(Error::DomainError("MD exponents need alpha, beta >= 0".into()));
    }
    let r2 = rho * rho;
    Ok(match side {
        Side::Forward => {
            if beta < r2 * alpha {
                alpha
            } else if alpha < r2 * beta {
                beta
            } else {
                (alpha + beta - 2.0 * rho * (alpha * beta).sqrt()) / (1.0 - r2)
            }
        }
        Side::Reverse => (alpha + beta + 2.0 * rho * (alpha * beta).sqrt()) / (1.0 - r2),
    })
}

/// Envelope mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnvelopeMode {
    Convex,
    Concave,
}

/// A sampled exponent surface over an `(alpha, beta)` grid; `+inf` cells are
/// carried as `f64::INFINITY` and excluded from envelope computations.
#[derive(Debug, Clone)]
pub struct ExponentSurface {
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
    /// Row-major `values[i][j]` at `(alphas[i], betas[j])`.
    pub values: Vec<Vec<f64>>,
}

impl ExponentSurface {
    pub fn infinite_cells(&self) -> usize {
        self.values.iter().flatten().filter(|v| v.is_infinite()).count()
    }
}

/// 1-D envelope result.
#[derive(Debug, Clone)]
pub struct Envelope1d {
    pub xs: Vec<f64>,
    pub original: Vec<f64>,
    pub envelope: Vec<f64>,
}

/// Lower convex (or upper concave) envelope of a 1-D sampled function by the
/// double discrete Legendre-Fenchel transform. The slope set contains all
/// pairwise data slopes, which makes the biconjugate exact on the grid.
pub fn envelope1d(xs: &[f64], vals: &[f64], mode: EnvelopeMode) -> Result<Envelope1d> {
    if xs.len() < 3 {
        return Err(Error::GridTooCoarse(format!("{} grid points (< 3)", xs.len())));
    }
    if xs.len() != vals.len() {
        return Err(Error::DomainError("grid/value length mismatch".into()));
    }
    let sign = match mode {
        EnvelopeMode::Convex => 1.0,
        EnvelopeMode::Concave => -1.0,
    };
    let f: Vec<f64> = vals.iter().map(|&v| sign * v).collect();
    let finite: Vec<usize> = (0..f.len()).filter(|&i| f[i].is_finite()).collect();
    if finite.len() < 2 {
        return Ok(Envelope1d {
            xs: xs.to_vec(),
            original: vals.to_vec(),
            envelope: vals.to_vec(),
        });
    }
    let mut slopes = vec![0.0f64];
    for (a, &i) in finite.iter().enumerate() {
        for &j in finite.iter().skip(a + 1) {
            if (xs[j] - xs[i]).abs() > 1e-15 {
                slopes.push((f[j] - f[i]) / (xs[j] - xs[i]));
            }
        }
    }
    // Conjugate on the slope set, then conjugate back.
    let conj: Vec<f64> = slopes
        .iter()
        .map(|&s| finite.iter().map(|&i| s * xs[i] - f[i]).fold(f64::NEG_INFINITY, f64::max))
        .collect();
    let env: Vec<f64> = (0..xs.len())
        .map(|i| {
            if !f[i].is_finite() {
                return vals[i];
            }
            let v = slopes
                .iter()
                .zip(&conj)
                .map(|(&s, &c)| s * xs[i] - c)
                .fold(f64::NEG_INFINITY, f64::max);
            sign * v
        })
        .collect();
    Ok(Envelope1d { xs: xs.to_vec(), original: vals.to_vec(), envelope: env })
}

/// 2-D envelope result.
#[derive(Debug, Clone)]
pub struct EnvelopeResult {
    pub original: ExponentSurface,
    pub envelope: ExponentSurface,
}

/// Lower convex (or upper concave) envelope of a rectangular surface by the
/// separable double Legendre-Fenchel transform; slopes are sampled at the
/// grid resolution over the data slope range, `+inf` cells are excluded from
/// the transform and passed through unchanged (envelope over the finite
/// region only).
pub fn envelope2d(surface: &ExponentSurface, mode: EnvelopeMode) -> Result<EnvelopeResult> {
    let (nx, ny) = (surface.alphas.len(), surface.betas.len());
    if nx < 3 || ny < 3 {
        return Err(Error::GridTooCoarse(format!("{nx} x {ny} grid (< 3 per axis)")));
    }
    let sign = match mode {
        EnvelopeMode::Convex => 1.0,
        EnvelopeMode::Concave => -1.0,
    };
    let xs = &surface.alphas;
    let ys = &surface.betas;
    let f: Vec<Vec<f64>> = surface
        .values
        .iter()
        .map(|row| row.iter().map(|&v| sign * v).collect())
        .collect();

    // Slope ranges from adjacent finite differences on each axis.
    let mut smin = f64::INFINITY;
    let mut smax = f64::NEG_INFINITY;
    let mut tmin = f64::INFINITY;
    let mut tmax = f64::NEG_INFINITY;
    for i in 0..nx {
        for j in 0..ny {
            if !f[i][j].is_finite() {
                continue;
            }
            if i + 1 < nx && f[i + 1][j].is_finite() {
                let s = (f[i + 1][j] - f[i][j]) / (xs[i + 1] - xs[i]);
                smin = smin.min(s);
                smax = smax.max(s);
            }
            if j + 1 < ny && f[i][j + 1].is_finite() {
                let t = (f[i][j + 1] - f[i][j]) / (ys[j + 1] - ys[j]);
                tmin = tmin.min(t);
                tmax = tmax.max(t);
            }
        }
    }
    if !smin.is_finite() || !tmin.is_finite() {
        return Ok(EnvelopeResult { original: surface.clone(), envelope: surface.clone() });
    }
    let widen = |lo: f64, hi: f64| -> (f64, f64) {
        let w = (hi - lo).max(1e-9) * 0.05;
        (lo - w, hi + w)
    };
    let (smin, smax) = widen(smin, smax);
    let (tmin, tmax) = widen(tmin, tmax);
    let s_grid: Vec<f64> =
        (0..nx).map(|i| smin + (smax - smin) * i as f64 / (nx - 1) as f64).collect();
    let t_grid: Vec<f64> =
        (0..ny).map(|j| tmin + (tmax - tmin) * j as f64 / (ny - 1) as f64).collect();

    // Conjugate: f*(s, t) = max_i [ s x_i + g_i(t) ], g_i(t) = max_j [ t y_j - f_ij ].
    let mut g = vec![vec![f64::NEG_INFINITY; t_grid.len()]; nx];
    for (i, gi) in g.iter_mut().enumerate() {
        for (tt, &t) in t_grid.iter().enumerate() {
            for j in 0..ny {
                if f[i][j].is_finite() {
                    gi[tt] = gi[tt].max(t * ys[j] - f[i][j]);
                }
            }
        }
    }
    let mut conj = vec![vec![f64::NEG_INFINITY; t_grid.len()]; s_grid.len()];
    for (ss, &s) in s_grid.iter().enumerate() {
        for tt in 0..t_grid.len() {
            for (i, gi) in g.iter().enumerate() {
                if gi[tt].is_finite() {
                    conj[ss][tt] = conj[ss][tt].max(s * xs[i] + gi[tt]);
                }
            }
        }
    }
    // Biconjugate: f**(x, y) = max_{s,t} [ s x + t y - f*(s,t) ].
    let mut h = vec![vec![f64::NEG_INFINITY; ny]; s_grid.len()];
    for (ss, hs) in h.iter_mut().enumerate() {
        for (j, &y) in ys.iter().enumerate() {
            for (tt, &t) in t_grid.iter().enumerate() {
                hs[j] = hs[j].max(t * y - conj[ss][tt]);
            }
        }
    }
    let mut env = vec![vec![0.0f64; ny]; nx];
    for (i, &x) in xs.iter().enumerate() {
        for j in 0..ny {
            if !f[i][j].is_finite() {
                env[i][j] = surface.values[i][j];
                continue;
            }
            let mut v = f64::NEG_INFINITY;
            for (ss, &s) in s_grid.iter().enumerate() {
                v = v.max(s * x + h[ss][j]);
            }
            env[i][j] = sign * v;
        }
    }
    Ok(EnvelopeResult {
        original: surface.clone(),
        envelope: ExponentSurface {
            alphas: surface.alphas.clone(),
            betas: surface.betas.clone(),
            values: env,
        },
    })
}

/// Deviation regime for q-stability exponents.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Ld,
    Md,
}

/// Moderate-deviations q-stability exponent for the DSBS:
/// `alpha / (1 + (q-1) rho^2)` for `q > 1 - rho^-2`, `+inf` otherwise.
pub fn q_stability_exponent_md(rho: f64, q: f64, alpha: f64) -> Result<f64> {
    if rho.abs() >= 1.0 || rho == 0.0 {
        return Err(Error::DomainError(format!("rho = {rho} outside (-1,1) \\ {{0}}")));
    }
    if q == 0.0 {
        return Err(Error::DomainError("q = 0 not allowed".into()));
    }
    if alpha < 0.0 {
        return Err(Error::DomainError("alpha must be >= 0".into()));
    }
    let threshold = 1.0 - 1.0 / (rho * rho);
    if q <= threshold {
        return Ok(f64::INFINITY);
    }
    Ok(alpha / (1.0 + (q - 1.0) * rho * rho))
}

/// `theta_q(Q_X, Q_Y) = D(Q_X, Q_Y || pi) - D(Q_Y || pi_Y)/q'` with the Hölder
/// conjugate `q' = q/(q-1)`, for binary marginals `(qx, qy)` of the DSBS.
fn theta_q_binary(pi: &JointPmf, qx: f64, qy: f64, q: f64) -> f64 {
    let qxp = Pmf { probs: vec![1.0 - qx, qx], labels: None };
    let qyp = Pmf { probs: vec![1.0 - qy, qy], labels: None };
    let d = match min_relative_entropy(&qxp, &qyp, pi) {
        Ok((v, _)) => v,
        Err(_) => return f64::INFINITY,
    };
    let inv_qp = (q - 1.0) / q;
    d - inv_qp * d_to_half(qy)
}

/// Raw LD q-stability curve `phi_q(s)` at the constraint level `s` (equality
/// constraint on `D(Q_X || pi_X)`) with the optimizing `(qx, qy)` certificate.
/// For `q >= 1` and `0 < q < 1` the inner problem minimizes over `Q_Y`; for
/// `q < 0` it maximizes.
pub fn q_stability_phi_ld(rho: f64, q: f64, s: f64) -> Result<(f64, (f64, f64))> {
    if q == 0.0 {
        return Err(Error::DomainError("q = 0 not allowed".into()));
    }
    let d = crate::prob::DsbsParams::from_rho(rho)?;
    let pi = d.to_joint();
    // Binary marginal at divergence level s from Bern(1/2): qx = h^-1(1-s).
    // The two symmetric branches give the same value by the symmetry of pi.
    let qx = binary_entropy_inv((1.0 - s).clamp(0.0, 1.0))?;
    let inner = |maximize: bool| -> (f64, f64) {
        let n = 2000usize;
        let mut best = (if maximize { f64::NEG_INFINITY } else { f64::INFINITY }, 0.5);
        for j in 0..=n {
            let qy = j as f64 / n as f64;
            let v = theta_q_binary(&pi, qx, qy, q);
            if (maximize && v > best.0) || (!maximize && v < best.0) {
                best = (v, qy);
            }
        }
        // Golden refinement around the incumbent.
        let gr = 0.618_033_988_749_895;
        let (mut lo, mut hi) =
            ((best.1 - 2.0 / n as f64).max(0.0), (best.1 + 2.0 / n as f64).min(1.0));
        for _ in 0..80 {
            let x1 = hi - gr * (hi - lo);
            let x2 = lo + gr * (hi - lo);
            let f1 = theta_q_binary(&pi, qx, x1, q);
            let f2 = theta_q_binary(&pi, qx, x2, q);
            let keep_left = if maximize { f1 > f2 } else { f1 < f2 };
            if keep_left {
                hi = x2;
            } else {
                lo = x1;
            }
        }
        let qy = 0.5 * (lo + hi);
        (theta_q_binary(&pi, qx, qy, q), qy)
    };
    let (val, qy) = if q < 0.0 { inner(true) } else { inner(false) };
    Ok((val, (qx, qy)))
}

/// LD q-stability exponent `Upsilon_{q,LD}(alpha)` with the envelope of the
/// strong theorem applied: lower convex envelope of `phi_q` then
/// `min_{s >= alpha}` for `q >= 1`; upper concave envelope then
/// `max_{s <= alpha}` for `q < 1`.
pub fn q_stability_exponent_ld(rho: f64, q: f64, alpha: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::DomainError(format!("alpha = {alpha} outside [0,1]")));
    }
    let n = 60usize;
    let xs: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64).collect();
    let mut vals = Vec::with_capacity(xs.len());
    for &s in &xs {
        vals.push(q_stability_phi_ld(rho, q, s)?.0);
    }
    let mode = if q >= 1.0 { EnvelopeMode::Convex } else { EnvelopeMode::Concave };
    let env = envelope1d(&xs, &vals, mode)?;
    let mut out = if q >= 1.0 { f64::INFINITY } else { f64::NEG_INFINITY };
    for (i, &x) in xs.iter().enumerate() {
        if q >= 1.0 {
            if x >= alpha - 1e-12 {
                out = out.min(env.envelope[i]);
            }
        } else if x <= alpha + 1e-12 {
            out = out.max(env.envelope[i]);
        }
    }
    // Include the exact constraint level itself.
    let at = q_stability_phi_ld(rho, q, alpha)?.0;
    Ok(if q >= 1.0 { out.min(at) } else { out.max(at) })
}
