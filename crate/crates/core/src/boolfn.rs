//! Boolean-function analysis on the hypercube: Walsh-Hadamard spectra,
//! influences, the noise operator, q-stabilities, exhaustive NICD search, and
//! the maximal-correlation / hypercontractivity upper and lower bounds.
//!
//! Truth tables are bit-packed. The Walsh-Hadamard transform runs over integer
//! butterflies, so Fourier coefficients `2^n \hat f_S` are exact dyadics and
//! Parseval holds to machine precision.

use crate::error::{Error, Result};
use crate::exponents;
use crate::prob::DsbsParams;
use rayon::prelude::*;
use std::sync::OnceLock;

/// Hard cap on the dimension for spectra (`O(n 2^n)` time, `2^n` reals).
pub const MAX_WHT_N: usize = 24;
/// Hard cap for exhaustive NICD support search.
pub const MAX_SEARCH_N: usize = 4;

/// A Boolean function `f: {0,1}^n -> {0,1}` with cached integer spectrum.
#[derive(Debug)]
pub struct BooleanFunction {
    pub n: usize,
    bits: Vec<u64>,
    spectrum: OnceLock<Vec<i64>>,
}

impl Clone for BooleanFunction {
    fn clone(&self) -> Self {
        Self { n: self.n, bits: self.bits.clone(), spectrum: OnceLock::new() }
    }
}

impl PartialEq for BooleanFunction {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.bits == other.bits
    }
}

impl BooleanFunction {
    pub fn zero(n: usize) -> Result<Self> {
        if n > MAX_WHT_N {
            return Err(Error::SizeGuard(format!("n = {n} exceeds {MAX_WHT_N}")));
        }
        let words = (1usize << n).div_ceil(64);
        Ok(Self { n, bits: vec![0; words], spectrum: OnceLock::new() })
    }

    pub fn from_fn(n: usize, f: impl Fn(u32) -> bool) -> Result<Self> {
        let mut out = Self::zero(n)?;
        for x in 0..(1u32 << n) {
            if f(x) {
                out.set(x, true);
            }
        }
        Ok(out)
    }

    /// Indicator of a support set given as a bitmask over points (n <= 6).
    pub fn from_support_mask(n: usize, mask: u64) -> Result<Self> {
        Self::from_fn(n, |x| mask >> x & 1 == 1)
    }

    /// Dictator on coordinate `i`: `f(x) = x_i`.
    pub fn dictator(n: usize, i: usize) -> Result<Self> {
        Self::from_fn(n, move |x| x >> i & 1 == 1)
    }

    /// Majority of the first `m` bits (m odd): `1{sum x_i > m/2}`.
    pub fn majority(n: usize, m: usize) -> Result<Self> {
        if m > n || m % 2 == 0 {
            return Err(Error::DomainError(format!("majority width {m} must be odd and <= {n}")));
        }
        let mask = (1u32 << m) - 1;
        Self::from_fn(n, move |x| 2 * (x & mask).count_ones() as usize > m)
    }

    /// Indicator of the `(n-k)`-subcube fixing the first `k` coordinates to 1.
    pub fn subcube(n: usize, k: usize) -> Result<Self> {
        let mask = (1u32 << k) - 1;
        Self::from_fn(n, move |x| x & mask == mask)
    }

    pub fn get(&self, x: u32) -> bool {
        self.bits[(x >> 6) as usize] >> (x & 63) & 1 == 1
    }

    pub fn set(&mut self, x: u32, v: bool) {
        let (w, b) = ((x >> 6) as usize, x & 63);
        if v {
            self.bits[w] |= 1 << b;
        } else {
            self.bits[w] &= !(1 << b);
        }
        self.spectrum = OnceLock::new();
    }

    pub fn size(&self) -> usize {
        1 << self.n
    }

    pub fn count_ones(&self) -> u64 {
        self.bits.iter().map(|w| w.count_ones() as u64).sum()
    }

    pub fn mean(&self) -> f64 {
        self.count_ones() as f64 / self.size() as f64
    }

    pub fn complement(&self) -> Self {
        let mut out = self.clone();
        for x in 0..(1u32 << self.n) {
            out.set(x, !self.get(x));
        }
        out
    }

    /// Integer Walsh spectrum `T[S] = sum_x (-1)^{|S & x|} f(x) = 2^n \hat f_S`.
    pub fn int_spectrum(&self) -> &[i64] {
        self.spectrum.get_or_init(|| {
            let size = self.size();
            let mut t: Vec<i64> = (0..size as u32).map(|x| self.get(x) as i64).collect();
            let mut len = 1;
            while len < size {
                for start in (0..size).step_by(len * 2) {
                    for i in start..start + len {
                        let (a, b) = (t[i], t[i + len]);
                        t[i] = a + b;
                        t[i + len] = a - b;
                    }
                }
                len *= 2;
            }
            t
        })
    }

    /// Fourier coefficient `\hat f_S` indexed by the subset bitmask `S`.
    pub fn fourier(&self, s: u32) -> f64 {
        self.int_spectrum()[s as usize] as f64 / self.size() as f64
    }

    /// Truth table as a big-endian hex string (LSB = f(0)).
    pub fn to_hex(&self) -> String {
        let nibbles = self.size().div_ceil(4);
        let mut out = String::with_capacity(nibbles);
        for i in (0..nibbles).rev() {
            let mut nib = 0u8;
            for b in 0..4 {
                let x = (i * 4 + b) as u32;
                if (x as usize) < self.size() && self.get(x) {
                    nib |= 1 << b;
                }
            }
            out.push(char::from_digit(nib as u32, 16).unwrap());
        }
        out
    }

    pub fn from_hex(n: usize, hex: &str) -> Result<Self> {
        let mut out = Self::zero(n)?;
        let nibbles = out.size().div_ceil(4);
        if hex.len() != nibbles {
            return Err(Error::DomainError(format!(
                "hex table has {} digits, expected {nibbles} for n = {n}",
                hex.len()
            )));
        }
        for (pos, c) in hex.chars().rev().enumerate() {
            let nib = c
                .to_digit(16)
                .ok_or_else(|| Error::DomainError(format!("bad hex digit {c}")))?;
            for b in 0..4 {
                let x = (pos * 4 + b) as u32;
                if (x as usize) < out.size() && nib >> b & 1 == 1 {
                    out.set(x, true);
                }
            }
        }
        Ok(out)
    }
}

/// A nonnegative real-valued function on the hypercube.
#[derive(Debug, Clone, PartialEq)]
pub struct RealCubeFunction {
    pub n: usize,
    pub table: Vec<f64>,
}

impl RealCubeFunction {
    pub fn new(n: usize, table: Vec<f64>) -> Result<Self> {
        if table.len() != 1 << n {
            return Err(Error::DomainError(format!(
                "table has {} entries, expected {}",
                table.len(),
                1 << n
            )));
        }
        if table.iter().any(|&v| v < 0.0 || !v.is_finite()) {
            return Err(Error::DomainError("negative or non-finite entry".into()));
        }
        Ok(Self { n, table })
    }

    pub fn from_bool(f: &BooleanFunction) -> Self {
        Self {
            n: f.n,
            table: (0..f.size() as u32).map(|x| f.get(x) as u64 as f64).collect(),
        }
    }

    pub fn mean(&self) -> f64 {
        self.table.iter().sum::<f64>() / self.table.len() as f64
    }
}

/// Degree weights `W_0..W_n` with `W_k = sum_{|S| = k} \hat f_S^2`.
pub fn weights(f: &BooleanFunction) -> Vec<f64> {
    let spec = f.int_spectrum();
    let scale = (f.size() as f64) * (f.size() as f64);
    let mut w = vec![0.0; f.n + 1];
    for (s, &t) in spec.iter().enumerate() {
        w[s.count_ones() as usize] += (t as f64) * (t as f64) / scale;
    }
    w
}

/// Parseval residual `|sum_S \hat f_S^2 - mean|` (zero in exact arithmetic).
pub fn parseval_residual(f: &BooleanFunction) -> f64 {
    (weights(f).iter().sum::<f64>() - f.mean()).abs()
}

/// Per-coordinate influences by flip counting, plus the total.
pub fn influences(f: &BooleanFunction) -> (Vec<f64>, f64) {
    let size = f.size() as u32;
    let mut infl = vec![0.0f64; f.n];
    for (i, slot) in infl.iter_mut().enumerate() {
        let mut count = 0u64;
        for x in 0..size {
            if f.get(x) != f.get(x ^ (1 << i)) {
                count += 1;
            }
        }
        *slot = count as f64 / size as f64;
    }
    let total = infl.iter().sum();
    (infl, total)
}

/// Influences from the spectrum: `I_i = 4 sum_{S ∋ i} \hat f_S^2`,
/// `I = 4 sum |S| \hat f_S^2`.
pub fn influences_fourier(f: &BooleanFunction) -> (Vec<f64>, f64) {
    let spec = f.int_spectrum();
    let scale = (f.size() as f64) * (f.size() as f64);
    let mut infl = vec![0.0f64; f.n];
    for (s, &t) in spec.iter().enumerate() {
        let ts = 4.0 * (t as f64) * (t as f64) / scale;
        let mut rem = s;
        while rem != 0 {
            let i = rem.trailing_zeros() as usize;
            infl[i] += ts;
            rem &= rem - 1;
        }
    }
    let total = infl.iter().sum();
    (infl, total)
}

/// Edge boundary size `|∂A| = 2^{n-1} I[f]`, exact for dyadic influences.
pub fn edge_boundary(f: &BooleanFunction) -> u64 {
    let size = f.size() as u32;
    let mut count = 0u64;
    for x in 0..size {
        for i in 0..f.n {
            let y = x ^ (1 << i);
            if y > x && f.get(x) != f.get(y) {
                count += 1;
            }
        }
    }
    count
}

/// Noise operator `T_rho f(y) = E[f(X) | Y = y]` under the DSBS, computed per
/// coordinate in `O(n 2^n)`.
pub fn noise_op(f: &RealCubeFunction, rho: f64) -> Result<RealCubeFunction> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::DomainError(format!("rho = {rho} outside [0,1]")));
    }
    let size = f.table.len();
    let mut t = f.table.clone();
    let keep = (1.0 + rho) / 2.0;
    let flip = (1.0 - rho) / 2.0;
    let mut len = 1;
    while len < size {
        for start in (0..size).step_by(len * 2) {
            for i in start..start + len {
                let (a, b) = (t[i], t[i + len]);
                t[i] = keep * a + flip * b;
                t[i + len] = flip * a + keep * b;
            }
        }
        len *= 2;
    }
    RealCubeFunction::new(f.n, t)
}

/// q-stability `S_rho^{(q)}[f] = E[(T_rho f)^q]` for `q >= 1`.
pub fn q_stability(f: &BooleanFunction, rho: f64, q: f64) -> Result<f64> {
    if q < 1.0 {
        return Err(Error::DomainError(format!("q = {q} must be >= 1")));
    }
    let tf = noise_op(&RealCubeFunction::from_bool(f), rho)?;
    Ok(tf.table.iter().map(|&v| v.powf(q)).sum::<f64>() / tf.table.len() as f64)
}

/// Symmetric q-stability `S_rho^{(q)}[f] + S_rho^{(q)}[1 - f]`.
pub fn sym_q_stability(f: &BooleanFunction, rho: f64, q: f64) -> Result<f64> {
    Ok(q_stability(f, rho, q)? + q_stability(&f.complement(), rho, q)?)
}

/// Noise stability `S_rho[f] = Pr(f(X) = f(Y) = 1)` from the spectrum:
/// `sum_k rho^k W_k`.
pub fn noise_stability(f: &BooleanFunction, rho: f64) -> f64 {
    weights(f)
        .iter()
        .enumerate()
        .map(|(k, &w)| rho.powi(k as i32) * w)
        .sum()
}

/// Phi-stability `E[Phi_q(T_rho f)]` with `Phi_q(t) = t ln_q(t) / ln 2` and the
/// Tsallis q-logarithm `ln_q(t) = (t^{q-1} - 1)/(q - 1)` (natural log at q = 1).
pub fn phi_stability(f: &BooleanFunction, rho: f64, q: f64) -> Result<f64> {
    if q < 1.0 {
        return Err(Error::DomainError(format!("q = {q} must be >= 1")));
    }
    let phi_q = |t: f64| -> f64 {
        if t <= 0.0 {
            0.0
        } else if q == 1.0 {
            t * t.ln() / std::f64::consts::LN_2
        } else {
            t * (t.powf(q - 1.0) - 1.0) / ((q - 1.0) * std::f64::consts::LN_2)
        }
    };
    let tf = noise_op(&RealCubeFunction::from_bool(f), rho)?;
    Ok(tf.table.iter().map(|&v| phi_q(v)).sum::<f64>() / tf.table.len() as f64)
}

/// Joint probability `Pr(f(X^n) = g(Y^n) = 1)` by the Fourier pairing
/// `sum_k rho^k sum_{|S| = k} \hat f_S \hat g_S`.
pub fn pair_prob_fourier(f: &BooleanFunction, g: &BooleanFunction, rho: f64) -> Result<f64> {
    if f.n != g.n {
        return Err(Error::DomainError("dimension mismatch".into()));
    }
    let sf = f.int_spectrum();
    let sg = g.int_spectrum();
    let scale = (f.size() as f64) * (g.size() as f64);
    Ok(sf
        .iter()
        .zip(sg)
        .enumerate()
        .map(|(s, (&a, &b))| rho.powi(s.count_ones() as i32) * (a as f64) * (b as f64) / scale)
        .sum())
}

/// Joint probability by direct enumeration over all `(x, y)` pairs.
pub fn pair_prob_direct(f: &BooleanFunction, g: &BooleanFunction, rho: f64) -> Result<f64> {
    if f.n != g.n {
        return Err(Error::DomainError("dimension mismatch".into()));
    }
    let d = DsbsParams::from_rho(rho)?;
    let (al, be) = (d.alpha(), d.beta());
    let n = f.n;
    let mut acc = 0.0;
    for x in 0..(1u32 << n) {
        if !f.get(x) {
            continue;
        }
        for y in 0..(1u32 << n) {
            if !g.get(y) {
                continue;
            }
            let dist = (x ^ y).count_ones() as i32;
            acc += al.powi(n as i32 - dist) * be.powi(dist);
        }
    }
    Ok(acc)
}

/// Search mode for [`nicd_bruteforce`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NicdMode {
    Max,
    Min,
}

/// Outcome of the exhaustive NICD search.
#[derive(Debug, Clone)]
pub struct NicdOptimum {
    pub value: f64,
    pub f: BooleanFunction,
    pub g: BooleanFunction,
}

/// Exhaustive NICD over supports of exact sizes `a 2^n` and `b 2^n`
/// (`a`, `b` dyadic). For `a = b` in max mode the search runs over identical
/// pairs only — justified by the Cauchy-Schwarz reduction
/// `Pr(f=g=1) <= max(Pr(f=f'=1), Pr(g=g'=1))`. Workers are partitioned by the
/// `A`-support; ties break to the lexicographically smallest `(A, B)`.
pub fn nicd_bruteforce(
    n: usize,
    a: f64,
    b: f64,
    rho: f64,
    mode: NicdMode,
) -> Result<NicdOptimum> {
    if n == 0 || n > MAX_SEARCH_N {
        return Err(Error::SearchSpaceTooLarge(format!("n = {n} outside 1..={MAX_SEARCH_N}")));
    }
    let size = 1usize << n;
    let ka = a * size as f64;
    let kb = b * size as f64;
    if (ka - ka.round()).abs() > 1e-9 || (kb - kb.round()).abs() > 1e-9 {
        return Err(Error::DomainError(format!(
            "a = {a}, b = {b} not dyadic with denominator 2^{n}"
        )));
    }
    let (ka, kb) = (ka.round() as u32, kb.round() as u32);
    if ka == 0 || kb == 0 || ka as usize > size || kb as usize > size {
        return Err(Error::DomainError("support sizes must be in 1..=2^n".into()));
    }
    let d = DsbsParams::from_rho(rho)?;
    let (al, be) = (d.alpha(), d.beta());
    // pi^n(x, y) keyed by the Hamming distance of x ^ y.
    let wdist: Vec<f64> = (0..=n)
        .map(|k| al.powi((n - k) as i32) * be.powi(k as i32))
        .collect();

    let masks_a = gosper_masks(size as u32, ka);
    let identical_shortcut = mode == NicdMode::Max && ka == kb;

    let eval_pair = |ma: u32, mb: u32| -> f64 {
        let mut acc = 0.0;
        let mut xa = ma;
        while xa != 0 {
            let x = xa.trailing_zeros();
            xa &= xa - 1;
            let mut yb = mb;
            while yb != 0 {
                let y = yb.trailing_zeros();
                yb &= yb - 1;
                acc += wdist[(x ^ y).count_ones() as usize];
            }
        }
        acc
    };

    let best = if identical_shortcut {
        masks_a
            .par_iter()
            .map(|&ma| (eval_pair(ma, ma), ma, ma))
            .reduce_with(|x, y| pick(mode, x, y))
    } else {
        let masks_b = gosper_masks(size as u32, kb);
        masks_a
            .par_iter()
            .map(|&ma| {
                let mut local: Option<(f64, u32, u32)> = None;
                for &mb in &masks_b {
                    let cand = (eval_pair(ma, mb), ma, mb);
                    local = Some(match local {
                        None => cand,
                        Some(cur) => pick(mode, cur, cand),
                    });
                }
                local.unwrap()
            })
            .reduce_with(|x, y| pick(mode, x, y))
    }
    .expect("nonempty search space");

    Ok(NicdOptimum {
        value: best.0,
        f: BooleanFunction::from_support_mask(n, best.1 as u64)?,
        g: BooleanFunction::from_support_mask(n, best.2 as u64)?,
    })
}

fn pick(mode: NicdMode, x: (f64, u32, u32), y: (f64, u32, u32)) -> (f64, u32, u32) {
    let better = match mode {
        NicdMode::Max => y.0 > x.0 + 1e-15,
        NicdMode::Min => y.0 < x.0 - 1e-15,
    };
    if better || ((y.0 - x.0).abs() <= 1e-15 && (y.1, y.2) < (x.1, x.2)) {
        y
    } else {
        x
    }
}

/// All masks over `size <= 32` points with exactly `k` bits set, in increasing
/// order (Gosper's hack).
pub fn gosper_masks(size: u32, k: u32) -> Vec<u32> {
    assert!(size <= 32 && k <= size);
    let mut out = Vec::new();
    if k == 0 {
        return vec![0];
    }
    let limit: u64 = 1u64 << size;
    let mut v: u64 = (1u64 << k) - 1;
    while v < limit {
        out.push(v as u32);
        let c = v & v.wrapping_neg();
        let r = v + c;
        v = (((r ^ v) >> 2) / c) | r;
    }
    out
}

/// Witsenhausen maximal-correlation bounds:
/// `ab - rho sqrt(a abar b bbar) <= pi^n(A x B) <= ab + rho sqrt(...)`.
pub fn witsenhausen_bounds(a: f64, b: f64, rho: f64) -> Result<(f64, f64)> {
    for v in [a, b] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::DomainError(format!("mean {v} outside [0,1]")));
        }
    }
    let spread = rho * (a * (1.0 - a) * b * (1.0 - b)).sqrt();
    Ok((a * b - spread, a * b + spread))
}

/// The hypercontractivity bound function `phi_{a,b}(s, t, p)` with
/// `q = 1 + rho^2/(p - 1)`.
fn phi_ab(a: f64, b: f64, rho: f64, s: f64, t: f64, p: f64) -> f64 {
    let q = 1.0 + rho * rho / (p - 1.0);
    let fs = (s.powf(p) * a + (1.0 - a)).powf(1.0 / p);
    let gt = (t.powf(q) * b + (1.0 - b)).powf(1.0 / q);
    (fs * gt - 1.0) / ((s - 1.0) * (t - 1.0)) - a / (t - 1.0) - b / (s - 1.0)
}

/// Hypercontractivity bounds on `pi^n(A x B)`:
/// infimum of `phi_{a,b}` over `(s-1)(t-1)(p-1) > 0` (upper bound) and
/// supremum over `(s-1)(t-1)(p-1) < 0` (lower bound), by grid search plus
/// coordinate golden-section refinement. Every evaluated point is itself a
/// valid bound, so grid coarseness only costs tightness.
pub fn hc_bound_phi(a: f64, b: f64, rho: f64, grid: usize) -> Result<(f64, f64)> {
    if rho.abs() >= 1.0 {
        return Err(Error::DomainError(format!("rho = {rho} outside (-1,1)")));
    }
    let _ = witsenhausen_bounds(a, b, rho)?;
    let g = grid.max(8);
    let mut log_s: Vec<f64> = (0..g).map(|i| -4.0 + 8.0 * i as f64 / (g - 1) as f64).collect();
    log_s.retain(|v| v.abs() > 1e-6);
    let p_grid: Vec<f64> = (0..g)
        .map(|i| 1.0 + 6.0 * (i as f64 + 0.5) / g as f64)
        .chain((0..g).map(|i| 1.0 - 0.98 * (i as f64 + 0.5) / g as f64))
        .collect();

    let mut upper = f64::INFINITY;
    let mut lower = f64::NEG_INFINITY;
    let mut up_arg = (1.5f64, 1.5, 2.0);
    let mut lo_arg = (1.5f64, 0.5, 2.0);
    for &p in &p_grid {
        if (p - 1.0).abs() < 1e-9 || p <= 0.0 {
            continue;
        }
        for &ls in &log_s {
            let s = ls.exp();
            for &lt in &log_s {
                let t = lt.exp();
                let sign = (s - 1.0) * (t - 1.0) * (p - 1.0);
                if sign.abs() < 1e-12 {
                    continue;
                }
                let v = phi_ab(a, b, rho, s, t, p);
                if !v.is_finite() {
                    continue;
                }
                if sign > 0.0 && v < upper {
                    upper = v;
                    up_arg = (s, t, p);
                } else if sign < 0.0 && v > lower {
                    lower = v;
                    lo_arg = (s, t, p);
                }
            }
        }
    }

    // Coordinate golden-section refinement around the incumbents; each
    // coordinate stays on its side of 1 so the sign condition is preserved.
    let refine = |arg0: (f64, f64, f64), maximize: bool| -> f64 {
        let mut arg = arg0;
        let mut best = phi_ab(a, b, rho, arg.0, arg.1, arg.2);
        for _round in 0..40 {
            for coord in 0..3 {
                let cur = [arg.0, arg.1, arg.2][coord];
                let (mut lo, mut hi) = (cur * 0.6, cur * 1.6667);
                if cur > 1.0 {
                    lo = lo.max(1.0 + 1e-9);
                } else if cur < 1.0 {
                    hi = hi.min(1.0 - 1e-9);
                }
                let gr = 0.618_033_988_749_895;
                let (mut x1, mut x2) = (hi - gr * (hi - lo), lo + gr * (hi - lo));
                for _ in 0..50 {
                    let mut args1 = [arg.0, arg.1, arg.2];
                    args1[coord] = x1;
                    let mut args2 = [arg.0, arg.1, arg.2];
                    args2[coord] = x2;
                    let f1 = phi_ab(a, b, rho, args1[0], args1[1], args1[2]);
                    let f2 = phi_ab(a, b, rho, args2[0], args2[1], args2[2]);
                    let keep_left = if maximize { f1 > f2 } else { f1 < f2 };
                    if keep_left {
                        hi = x2;
                        x2 = x1;
                        x1 = hi - gr * (hi - lo);
                    } else {
                        lo = x1;
                        x1 = x2;
                        x2 = lo + gr * (hi - lo);
                    }
                }
                let mid = 0.5 * (lo + hi);
                let mut args = [arg.0, arg.1, arg.2];
                args[coord] = mid;
                let v = phi_ab(a, b, rho, args[0], args[1], args[2]);
                if v.is_finite() && ((maximize && v > best) || (!maximize && v < best)) {
                    best = v;
                    arg = (args[0], args[1], args[2]);
                }
            }
        }
        best
    };
    upper = refine(up_arg, false).min(upper);
    lower = refine(lo_arg, true).max(lower);
    Ok((lower, upper))
}

/// LP bound on the degree-1 Fourier weight:
/// `W_1[f] <= 2a(sqrt(a) - a)` for `a <= 1/4`, else `a/2`.
pub fn w1_lp_bound(a: f64) -> f64 {
    if a <= 0.25 {
        2.0 * a * (a.sqrt() - a)
    } else {
        a / 2.0
    }
}

/// Checks `W_1[f] <= phi(mean f)` and returns `(holds, w1, bound)`.
pub fn w1_lp_bound_check(f: &BooleanFunction) -> (bool, f64, f64) {
    let w1 = weights(f)[1];
    let bound = w1_lp_bound(f.mean());
    (w1 <= bound + 1e-12, w1, bound)
}

/// Exact `S_rho^{(q)}[Maj_m]` by summing over the layer statistics of the
/// first `m` bits: conditioned on `k` ones among the noisy copy, the clean
/// majority count splits into two independent binomials.
pub fn maj_stability(m: usize, rho: f64, q: f64) -> Result<f64> {
    if m % 2 == 0 || m == 0 || m > 25 {
        return Err(Error::SizeGuard(format!("majority width {m} must be odd and <= 25")));
    }
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::DomainError(format!("rho = {rho} outside [0,1]")));
    }
    let p = (1.0 - rho) / 2.0;
    let binom = |n: usize, k: usize| -> f64 {
        let mut acc = 1.0f64;
        for i in 0..k {
            acc = acc * (n - i) as f64 / (i + 1) as f64;
        }
        acc
    };
    // t(k) = Pr(majority of clean bits | k ones among noisy bits): ones flip
    // down ~ Bin(k, p), zeros flip up ~ Bin(m-k, p).
    let need = m / 2 + 1;
    let mut acc = 0.0;
    for k in 0..=m {
        let mut t = 0.0;
        for down in 0..=k {
            let pd = binom(k, down) * p.powi(down as i32) * (1.0 - p).powi((k - down) as i32);
            for up in 0..=(m - k) {
                if k - down + up >= need {
                    let pu = binom(m - k, up)
                        * p.powi(up as i32)
                        * (1.0 - p).powi((m - k - up) as i32);
                    t += pd * pu;
                }
            }
        }
        acc += binom(m, k) / 2f64.powi(m as i32) * t.powf(q);
    }
    Ok(acc)
}

/// Symmetric stability of `Maj_m`: equals `2 S^{(q)}` since majorities are
/// anti-symmetric.
pub fn maj_sym_stability(m: usize, rho: f64, q: f64) -> Result<f64> {
    Ok(2.0 * maj_stability(m, rho, q)?)
}

/// Limits of majority stabilities as the width grows.
pub enum MajLimit {
    /// Plain noise stability `S_rho[Maj_n] -> 1/4 + arcsin(rho)/(2 pi)`.
    Plain,
    /// q-stability `S_rho^{(q)}[Maj_n] -> Lambda_rho^{(q)}(1/2)`.
    QStability(f64),
}

pub fn maj_limit(rho: f64, kind: MajLimit) -> Result<f64> {
    match kind {
        MajLimit::Plain => Ok(0.25 + rho.asin() / (2.0 * std::f64::consts::PI)),
        MajLimit::QStability(q) => exponents::gaussian_q_stability(rho, q, 0.5),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_fn(rng: &mut impl Rng, n: usize) -> BooleanFunction {
        let draws: Vec<bool> = (0..1usize << n).map(|_| rng.gen_bool(0.5)).collect();
        BooleanFunction::from_fn(n, |x| draws[x as usize]).unwrap()
    }

    #[test]
    fn dictator_weights() {
        let f = BooleanFunction::dictator(5, 0).unwrap();
        let w = weights(&f);
        assert_abs_diff_eq!(w[0], 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(w[1], 0.25, epsilon = 1e-15);
        assert!(w[2..].iter().all(|&x| x == 0.0));
        let c = BooleanFunction::from_fn(3, |_| true).unwrap();
        assert_abs_diff_eq!(weights(&c)[0], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn parseval_and_direct_sum_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let f = random_fn(&mut rng, 10);
        assert!(parseval_residual(&f) < 1e-10);
        // Direct-sum oracle on 32 subsets.
        for s in (0u32..1024).step_by(33) {
            let direct: f64 = (0..1024u32)
                .map(|x| {
                    let sign = if (s & x).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
                    sign * f.get(x) as u64 as f64
                })
                .sum::<f64>()
                / 1024.0;
            assert_abs_diff_eq!(f.fourier(s), direct, epsilon = 1e-12);
        }
    }

    #[test]
    fn influences_flip_equals_fourier() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let f = random_fn(&mut rng, 6);
            let (a, ta) = influences(&f);
            let (b, tb) = influences_fourier(&f);
            assert_abs_diff_eq!(ta, tb, epsilon = 1e-10);
            for (x, y) in a.iter().zip(&b) {
                assert_abs_diff_eq!(*x, *y, epsilon = 1e-10);
            }
            // |dA| = 2^{n-1} I[f].
            assert_abs_diff_eq!(
                edge_boundary(&f) as f64,
                2f64.powi(f.n as i32 - 1) * ta,
                epsilon = 1e-9
            );
        }
    }

    #[test]
    fn influence_named_functions() {
        let f = BooleanFunction::dictator(4, 2).unwrap();
        let (infl, total) = influences(&f);
        assert_abs_diff_eq!(infl[2], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-15);
        // Maj_3 in n = 3: total influence 3/2.
        let m = BooleanFunction::majority(3, 3).unwrap();
        let (_, total) = influences(&m);
        assert_abs_diff_eq!(total, 1.5, epsilon = 1e-15);
        // Subcube with a = 2^{-k}: total influence = 2a log2(1/a), the
        // edge-isoperimetric equality case.
        for k in 1..=3 {
            let f = BooleanFunction::subcube(5, k).unwrap();
            let a = f.mean();
            let (_, total) = influences(&f);
            assert_abs_diff_eq!(total, 2.0 * a * (1.0 / a).log2(), epsilon = 1e-12);
        }
    }

    #[test]
    fn stability_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let f = random_fn(&mut rng, 6);
            let rho = rng.gen_range(0.05..0.95);
            // S^{(1)} = mean.
            assert_abs_diff_eq!(q_stability(&f, rho, 1.0).unwrap(), f.mean(), epsilon = 1e-12);
            // S^{(2)}_rho = sum rho^{2k} W_k.
            let direct = q_stability(&f, rho, 2.0).unwrap();
            let spectral: f64 = weights(&f)
                .iter()
                .enumerate()
                .map(|(k, &w)| rho.powi(2 * k as i32) * w)
                .sum();
            assert_abs_diff_eq!(direct, spectral, epsilon = 1e-10);
        }
        // Anti-symmetric f: symmetric stability = 2x.
        let m = BooleanFunction::majority(5, 5).unwrap();
        assert_abs_diff_eq!(
            sym_q_stability(&m, 0.4, 3.0).unwrap(),
            2.0 * q_stability(&m, 0.4, 3.0).unwrap(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn dictator_q_stability_closed_form() {
        for &(rho, q) in &[(0.3, 2.0), (0.48, 10.0), (0.9, 1.5)] {
            let f = BooleanFunction::dictator(4, 0).unwrap();
            let expect =
                0.5 * ((1.0 + rho) / 2.0f64).powf(q) + 0.5 * ((1.0 - rho) / 2.0f64).powf(q);
            assert_abs_diff_eq!(q_stability(&f, rho, q).unwrap(), expect, epsilon = 1e-12);
            assert_abs_diff_eq!(maj_stability(1, rho, q).unwrap(), expect, epsilon = 1e-12);
        }
    }

    #[test]
    fn maj_stability_matches_cube_evaluation() {
        // Exact layer-statistics evaluation vs direct noise-operator power sums.
        for &(m, rho, q) in &[(3usize, 0.48, 10.0), (5, 0.48, 10.0), (3, 0.7, 2.0)] {
            let f = BooleanFunction::majority(m, m).unwrap();
            let direct = q_stability(&f, rho, q).unwrap();
            let layered = maj_stability(m, rho, q).unwrap();
            assert_abs_diff_eq!(direct, layered, epsilon = 1e-11);
        }
    }

    #[test]
    fn mossel_odonnell_counterexample_data_point() {
        let (q, rho) = (10.0, 0.48);
        let s1 = maj_sym_stability(1, rho, q).unwrap();
        let s5 = maj_sym_stability(5, rho, q).unwrap();
        let s3 = maj_sym_stability(3, rho, q).unwrap();
        assert!(s1 <= 0.0493, "Maj1: {s1}");
        assert!(s5 <= 0.0488, "Maj5: {s5}");
        assert!(s3 >= 0.0496, "Maj3: {s3}");
    }

    #[test]
    fn pairing_matches_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for n in 1..=3 {
            for _ in 0..20 {
                let f = random_fn(&mut rng, n);
                let g = random_fn(&mut rng, n);
                let rho = rng.gen_range(0.05..0.95);
                assert_abs_diff_eq!(
                    pair_prob_fourier(&f, &g, rho).unwrap(),
                    pair_prob_direct(&f, &g, rho).unwrap(),
                    epsilon = 1e-12
                );
            }
        }
    }

    #[test]
    fn nicd_balanced_case() {
        for rho in [0.2, 0.5, 0.8] {
            for n in 1..=4 {
                let max = nicd_bruteforce(n, 0.5, 0.5, rho, NicdMode::Max).unwrap();
                assert_abs_diff_eq!(max.value, (1.0 + rho) / 4.0, epsilon = 1e-12);
                let min = nicd_bruteforce(n, 0.5, 0.5, rho, NicdMode::Min).unwrap();
                assert_abs_diff_eq!(min.value, (1.0 - rho) / 4.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn nicd_quarter_case() {
        for n in 2..=4 {
            let max = nicd_bruteforce(n, 0.25, 0.25, 0.5, NicdMode::Max).unwrap();
            assert_abs_diff_eq!(max.value, (1.5f64 / 4.0).powi(2), epsilon = 1e-12);
        }
    }

    #[test]
    fn identical_pairs_never_beaten_at_equal_means() {
        // Full pair search never beats the best identical pair for a = b, max.
        for n in 2..=3usize {
            let size = 1u32 << n;
            for ka in [size / 4, size / 2] {
                if ka == 0 {
                    continue;
                }
                let rho = 0.6;
                let masks = gosper_masks(size, ka);
                let d = DsbsParams::from_rho(rho).unwrap();
                let (al, be) = (d.alpha(), d.beta());
                let wdist: Vec<f64> = (0..=n)
                    .map(|k| al.powi((n - k) as i32) * be.powi(k as i32))
                    .collect();
                let eval = |ma: u32, mb: u32| -> f64 {
                    let mut acc = 0.0;
                    for x in 0..size {
                        if ma >> x & 1 == 0 {
                            continue;
                        }
                        for y in 0..size {
                            if mb >> y & 1 == 1 {
                                acc += wdist[(x ^ y).count_ones() as usize];
                            }
                        }
                    }
                    acc
                };
                let best_pair = masks
                    .iter()
                    .flat_map(|&a| masks.iter().map(move |&b| eval(a, b)))
                    .fold(f64::NEG_INFINITY, f64::max);
                let best_same =
                    masks.iter().map(|&a| eval(a, a)).fold(f64::NEG_INFINITY, f64::max);
                assert_abs_diff_eq!(best_pair, best_same, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn witsenhausen_and_phi_bounds() {
        // a = b = 1/2: both families reduce to (1 -+ rho)/4.
        for rho in [0.2, 0.5, 0.8] {
            let (lo, hi) = witsenhausen_bounds(0.5, 0.5, rho).unwrap();
            assert_abs_diff_eq!(lo, (1.0 - rho) / 4.0, epsilon = 1e-15);
            assert_abs_diff_eq!(hi, (1.0 + rho) / 4.0, epsilon = 1e-15);
            let (hlo, hhi) = hc_bound_phi(0.5, 0.5, rho, 24).unwrap();
            assert_abs_diff_eq!(hlo, lo, epsilon = 2e-4);
            assert_abs_diff_eq!(hhi, hi, epsilon = 2e-4);
        }
        // rho = 0: bounds collapse to ab.
        let (lo, hi) = witsenhausen_bounds(0.3, 0.6, 0.0).unwrap();
        assert_abs_diff_eq!(lo, 0.18, epsilon = 1e-15);
        assert_abs_diff_eq!(hi, 0.18, epsilon = 1e-15);
    }

    #[test]
    fn phi_bounds_no_worse_than_witsenhausen_and_contain_optima() {
        let rho = 0.5;
        for &(a, b) in &[(0.25, 0.5), (0.5, 0.75), (0.375, 0.625), (0.3, 0.6)] {
            let (wlo, whi) = witsenhausen_bounds(a, b, rho).unwrap();
            let (hlo, hhi) = hc_bound_phi(a, b, rho, 24).unwrap();
            assert!(hhi <= whi + 1e-6, "a={a} b={b}: hc hi {hhi} vs wit {whi}");
            assert!(hlo >= wlo - 1e-6, "a={a} b={b}: hc lo {hlo} vs wit {wlo}");
        }
        // Exhaustive optima at n <= 3 (nearest dyadic) lie within both bounds.
        let (a, b) = (0.3, 0.6);
        for n in 1..=3usize {
            let size = 1 << n;
            let da = ((a * size as f64).round() / size as f64).clamp(1.0 / size as f64, 1.0);
            let db = ((b * size as f64).round() / size as f64).clamp(1.0 / size as f64, 1.0);
            let (wlo, whi) = witsenhausen_bounds(da, db, rho).unwrap();
            let (hlo, hhi) = hc_bound_phi(da, db, rho, 24).unwrap();
            let max = nicd_bruteforce(n, da, db, rho, NicdMode::Max).unwrap();
            let min = nicd_bruteforce(n, da, db, rho, NicdMode::Min).unwrap();
            for v in [max.value, min.value] {
                assert!(v <= whi + 1e-9 && v >= wlo - 1e-9);
                assert!(v <= hhi + 1e-9 && v >= hlo - 1e-9, "v={v} not in [{hlo},{hhi}]");
            }
        }
    }

    #[test]
    fn lp_bound_tight_cases_and_random_sweep() {
        // Dictator: W1 = 1/4 = phi(1/2).
        let f = BooleanFunction::dictator(6, 0).unwrap();
        let (ok, w1, bound) = w1_lp_bound_check(&f);
        assert!(ok);
        assert_abs_diff_eq!(w1, 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(bound, 0.25, epsilon = 1e-15);
        // (n-2)-subcube: W1 = 1/8 = phi(1/4).
        let f = BooleanFunction::subcube(6, 2).unwrap();
        let (ok, w1, bound) = w1_lp_bound_check(&f);
        assert!(ok);
        assert_abs_diff_eq!(w1, 0.125, epsilon = 1e-15);
        assert_abs_diff_eq!(bound, 0.125, epsilon = 1e-15);
        // Random sweep at n = 8.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..500 {
            let f = random_fn(&mut rng, 8);
            assert!(w1_lp_bound_check(&f).0);
        }
    }

    #[test]
    fn edge_isoperimetric_random_sweep() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..500 {
            let f = random_fn(&mut rng, 8);
            let a = f.mean().min(1.0 - f.mean());
            if a == 0.0 {
                continue;
            }
            let (_, total) = influences(&f);
            assert!(total >= 2.0 * a * (1.0 / a).log2() - 1e-12);
        }
    }

    #[test]
    fn stability_monotone_in_rho() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10 {
            let f = random_fn(&mut rng, 5);
            for q in [1.5, 2.0, 4.0] {
                let mut last = 0.0;
                for i in 0..=10 {
                    let rho = i as f64 / 10.0;
                    let s = q_stability(&f, rho, q).unwrap();
                    assert!(s >= last - 1e-12, "q-stability decreased in rho");
                    last = s;
                }
            }
        }
    }

    #[test]
    fn maj_limit_values() {
        assert_abs_diff_eq!(maj_limit(1.0, MajLimit::Plain).unwrap(), 0.5, epsilon = 1e-12);
        // |S_rho[Maj_21] - limit| < 0.02 at rho = 0.5.
        let rho = 0.5f64;
        let f = BooleanFunction::majority(21, 21).unwrap();
        let s = noise_stability(&f, rho);
        let lim = maj_limit(rho, MajLimit::Plain).unwrap();
        assert!((s - lim).abs() < 0.02, "s = {s}, limit = {lim}");
    }

    #[test]
    fn hex_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for n in 1..=6 {
            let f = random_fn(&mut rng, n);
            let h = f.to_hex();
            let back = BooleanFunction::from_hex(n, &h).unwrap();
            assert_eq!(f, back);
        }
    }

    #[test]
    fn size_guards() {
        assert!(BooleanFunction::zero(25).is_err());
        assert!(nicd_bruteforce(5, 0.5, 0.5, 0.5, NicdMode::Max).is_err());
        assert!(nicd_bruteforce(3, 0.3, 0.5, 0.5, NicdMode::Max).is_err());
        assert!(maj_stability(4, 0.5, 2.0).is_err());
        assert!(maj_stability(27, 0.5, 2.0).is_err());
    }
}
