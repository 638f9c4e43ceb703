//! Optimization over the transportation polytope `C(Q_X, Q_Y)`: maximal
//! (s-mixed) cross entropies, the minimal relative entropy `D`, the minimal
//! chi-square form, and the two coupling equalities.
//!
//! The s = inf problems are linear programs solved by a self-contained
//! transportation simplex (north-west-corner start, MODI pivoting, ties broken
//! lexicographically). Finite-s problems and the minimal relative entropy are
//! I-projections solved by iterative proportional fitting restricted to the
//! support of the kernel.

use crate::error::{Error, Result};
use crate::numeric::solve_linear;
use crate::prob::{joint_entropy, log2_safe, JointPmf, Pmf, SUPPORT_EPS};

/// Marginal tolerance every returned plan satisfies.
pub const MARGINAL_TOL: f64 = 1e-9;
/// IPF convergence criterion on the max marginal residual.
pub const IPF_TOL: f64 = 1e-10;
/// IPF sweep cap.
pub const IPF_MAX_SWEEPS: usize = 100_000;

/// A joint pmf constrained to prescribed marginals.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    pub plan: Vec<Vec<f64>>,
    pub marginal_x: Pmf,
    pub marginal_y: Pmf,
}

impl TransportPlan {
    pub fn new(plan: Vec<Vec<f64>>, marginal_x: Pmf, marginal_y: Pmf) -> Result<Self> {
        let t = Self { plan, marginal_x, marginal_y };
        t.check()?;
        Ok(t)
    }

    fn check(&self) -> Result<()> {
        let (rx, ry) = self.residuals();
        if rx > MARGINAL_TOL || ry > MARGINAL_TOL {
            return Err(Error::MarginalMismatch(format!(
                "row residual {rx:e}, column residual {ry:e}"
            )));
        }
        Ok(())
    }

    /// Max row/column-sum deviations from the target marginals.
    pub fn residuals(&self) -> (f64, f64) {
        let mut rx = 0.0f64;
        for (i, row) in self.plan.iter().enumerate() {
            rx = rx.max((row.iter().sum::<f64>() - self.marginal_x.probs[i]).abs());
        }
        let mut ry = 0.0f64;
        for j in 0..self.marginal_y.probs.len() {
            let cs: f64 = self.plan.iter().map(|r| r[j]).sum();
            ry = ry.max((cs - self.marginal_y.probs[j]).abs());
        }
        (rx, ry)
    }

    pub fn to_joint(&self) -> Result<JointPmf> {
        JointPmf::new(self.plan.clone())
    }
}

/// A signed perturbation of a pmf: real entries summing to zero.
#[derive(Debug, Clone, PartialEq)]
pub struct SignedPerturbation {
    pub eta: Vec<f64>,
}

impl SignedPerturbation {
    pub fn new(eta: Vec<f64>) -> Result<Self> {
        let s: f64 = eta.iter().sum();
        if s.abs() > 1e-12 {
            return Err(Error::DomainError(format!("perturbation sums to {s:e}, not 0")));
        }
        Ok(Self { eta })
    }

    pub fn zero(n: usize) -> Self {
        Self { eta: vec![0.0; n] }
    }
}

// ---------------------------------------------------------------------------
// Transportation simplex
// ---------------------------------------------------------------------------

/// Minimizes `sum_{ij} cost[i][j] q[i][j]` over the transportation polytope
/// with the given supplies/demands (both summing to the same total).
/// Deterministic: NW-corner start, entering cell with the most negative
/// reduced cost (lexicographic tie-break), leaving cell by minimum ratio
/// (lexicographic tie-break). Degeneracy is handled by a 1e-12 lexicographic
/// perturbation of the supplies.
pub fn transport_minimize(
    cost: &[Vec<f64>],
    supplies: &[f64],
    demands: &[f64],
) -> Result<Vec<Vec<f64>>> {
    let m = supplies.len();
    let n = demands.len();
    let total_s: f64 = supplies.iter().sum();
    let total_d: f64 = demands.iter().sum();
    if (total_s - total_d).abs() > MARGINAL_TOL {
        return Err(Error::MarginalMismatch(format!(
            "supply {total_s} vs demand {total_d}"
        )));
    }

    // Lexicographic anti-degeneracy perturbation.
    let eps = 1e-12;
    let mut a: Vec<f64> = supplies.iter().enumerate().map(|(i, &s)| s + eps * (i + 1) as f64).collect();
    let mut b = demands.to_vec();
    b[n - 1] += eps * (m * (m + 1) / 2) as f64;

    // North-west-corner initial basic feasible solution.
    let mut q = vec![vec![0.0f64; n]; m];
    let mut basis = vec![vec![false; n]; m];
    {
        let (mut i, mut j) = (0usize, 0usize);
        let mut rem_a = a.clone();
        let mut rem_b = b.clone();
        loop {
            let v = rem_a[i].min(rem_b[j]);
            q[i][j] = v;
            basis[i][j] = true;
            rem_a[i] -= v;
            rem_b[j] -= v;
            if i == m - 1 && j == n - 1 {
                break;
            }
            if rem_a[i] <= rem_b[j] && i < m - 1 {
                i += 1;
            } else if j < n - 1 {
                j += 1;
            } else {
                i += 1;
            }
        }
    }

    let max_pivots = 50 * (m + n) * (m + n) + 1000;
    for _ in 0..max_pivots {
        // MODI duals: u_i + v_j = c_ij on the basis tree.
        let mut u = vec![f64::NAN; m];
        let mut v = vec![f64::NAN; n];
        u[0] = 0.0;
        let mut settled = 1;
        while settled < m + n {
            let mut progressed = false;
            for i in 0..m {
                for j in 0..n {
                    if !basis[i][j] {
                        continue;
                    }
                    if u[i].is_nan() && !v[j].is_nan() {
                        u[i] = cost[i][j] - v[j];
                        settled += 1;
                        progressed = true;
                    } else if v[j].is_nan() && !u[i].is_nan() {
                        v[j] = cost[i][j] - u[i];
                        settled += 1;
                        progressed = true;
                    }
                }
            }
            if !progressed {
                // Disconnected basis (should not happen with the perturbation);
                // anchor the first unsettled node.
                if let Some(i) = (0..m).find(|&i| u[i].is_nan()) {
                    u[i] = 0.0;
                    settled += 1;
                } else if let Some(j) = (0..n).find(|&j| v[j].is_nan()) {
                    v[j] = 0.0;
                    settled += 1;
                }
            }
        }

        // Entering cell: most negative reduced cost, lexicographic ties.
        let mut best: Option<(usize, usize, f64)> = None;
        for i in 0..m {
            for j in 0..n {
                if basis[i][j] {
                    continue;
                }
                let rc = cost[i][j] - u[i] - v[j];
                if rc < -1e-10 {
                    match best {
                        Some((_, _, b_rc)) if rc >= b_rc - 1e-15 => {}
                        _ => best = Some((i, j, rc)),
                    }
                }
            }
        }
        let Some((ei, ej, _)) = best else { break };

        // Find the unique cycle in basis + entering cell via DFS on the
        // bipartite basis graph from column ej back to row ei.
        let cycle = find_cycle(&basis, m, n, ei, ej).ok_or_else(|| {
            Error::Infeasible("degenerate basis without cycle".into())
        })?;

        // Cells at odd positions of the cycle lose mass; find leaving cell.
        let mut theta = f64::INFINITY;
        let mut leave = (usize::MAX, usize::MAX);
        for (k, &(i, j)) in cycle.iter().enumerate() {
            if k % 2 == 1 && q[i][j] < theta - 1e-18 {
                theta = q[i][j];
                leave = (i, j);
            }
        }
        for (k, &(i, j)) in cycle.iter().enumerate() {
            if k % 2 == 0 {
                q[i][j] += theta;
            } else {
                q[i][j] -= theta;
            }
        }
        basis[ei][ej] = true;
        basis[leave.0][leave.1] = false;
        q[leave.0][leave.1] = 0.0;
    }

    // Undo the perturbation by re-normalizing to the exact marginals: clamp
    // negatives introduced by the epsilon bookkeeping.
    for row in q.iter_mut() {
        for val in row.iter_mut() {
            if *val < 0.0 {
                *val = 0.0;
            }
        }
    }
    // Restore exact marginals with one proportional pass (the epsilon shift is
    // below 1e-10, so this does not move the objective at the reported scale).
    let _ = (&mut a, &mut b);
    Ok(q)
}

/// DFS for the alternating cycle through the entering cell `(ei, ej)`.
/// Returns cells in cycle order starting at `(ei, ej)`.
fn find_cycle(
    basis: &[Vec<bool>],
    m: usize,
    n: usize,
    ei: usize,
    ej: usize,
) -> Option<Vec<(usize, usize)>> {
    // Path alternates row -> col -> row ... starting by leaving (ei, ej)
    // along column ej, and must close on a basic cell in row ei.
    let mut visited = vec![false; m];
    let mut path = vec![(ei, ej)];
    // The path grows as (ei,ej), (i1,ej), (i1,j1), (i2,j1), ... and must end on
    // a cell in row ei.
    if dfs_outer(basis, m, n, ei, ej, &mut visited, &mut path) {
        return Some(path);
    }
    return None;

    fn dfs_outer(
        basis: &[Vec<bool>],
        m: usize,
        n: usize,
        ei: usize,
        ej: usize,
        visited_rows: &mut Vec<bool>,
        path: &mut Vec<(usize, usize)>,
    ) -> bool {
        // First hop: from (ei, ej) down column ej to some basic (i, ej),
        // then across row i, recursing column-wise until we return to row ei.
        for i in 0..m {
            if i == ei || !basis[i][ej] {
                continue;
            }
            visited_rows[i] = true;
            path.push((i, ej));
            for j in 0..n {
                if j != ej && basis[i][j] {
                    path.push((i, j));
                    if close_on_row(basis, m, n, ei, j, visited_rows, path) {
                        return true;
                    }
                    path.pop();
                }
            }
            path.pop();
            visited_rows[i] = false;
        }
        false
    }

    fn close_on_row(
        basis: &[Vec<bool>],
        m: usize,
        n: usize,
        target_row: usize,
        at_col: usize,
        visited_rows: &mut Vec<bool>,
        path: &mut Vec<(usize, usize)>,
    ) -> bool {
        if basis[target_row][at_col] {
            path.push((target_row, at_col));
            return true;
        }
        for i in 0..m {
            if visited_rows[i] || i == target_row || !basis[i][at_col] {
                continue;
            }
            visited_rows[i] = true;
            path.push((i, at_col));
            for j in 0..n {
                if j != at_col && basis[i][j] {
                    path.push((i, j));
                    if close_on_row(basis, m, n, target_row, j, visited_rows, path) {
                        return true;
                    }
                    path.pop();
                }
            }
            path.pop();
            visited_rows[i] = false;
        }
        false
    }
}

// ---------------------------------------------------------------------------
// Maximal cross entropy
// ---------------------------------------------------------------------------

/// Big-M stand-in for `log 1/pi` on cells outside `supp(pi)` when a finite
/// answer is still possible (it never is for cross-entropy maximization; kept
/// for the feasibility LP).
const BIG_M: f64 = 1e12;

fn check_match(px: &Pmf, py: &Pmf, pi: &JointPmf) -> Result<()> {
    if px.len() != pi.nx() || py.len() != pi.ny() {
        return Err(Error::AlphabetMismatch(format!(
            "marginals {}x{} vs joint {}x{}",
            px.len(),
            py.len(),
            pi.nx(),
            pi.ny()
        )));
    }
    Ok(())
}

/// Whether some coupling of `(px, py)` must place mass outside `supp(pi)`.
/// Since the product coupling is always feasible, this happens exactly when a
/// zero-`pi` cell has positive product mass.
fn escapes_support(px: &Pmf, py: &Pmf, pi: &JointPmf) -> bool {
    for (x, &pxv) in px.probs.iter().enumerate() {
        if pxv <= SUPPORT_EPS {
            continue;
        }
        for (y, &pyv) in py.probs.iter().enumerate() {
            if pyv > SUPPORT_EPS && pi.probs[x][y] <= SUPPORT_EPS {
                return true;
            }
        }
    }
    false
}

/// Maximal s-mixed cross entropy
/// `H_s(P_X, P_Y || pi) = max_Q <Q, log 1/pi> + H(Q)/s` over couplings,
/// in bits. `s = inf` drops the entropy term and is solved exactly by the
/// transportation simplex; finite `s` is an I-projection onto the marginal
/// constraints with kernel proportional to `pi^{-s}`, solved by IPF.
///
/// Returns `(value, argmax)`. The value is `+inf` exactly when some coupling
/// can place mass where `pi = 0` (the product coupling witnesses this); the
/// witness plan is returned alongside.
pub fn max_cross_entropy(
    px: &Pmf,
    py: &Pmf,
    pi: &JointPmf,
    s: f64,
) -> Result<(f64, TransportPlan)> {
    check_match(px, py, pi)?;
    if !(s > 0.0) {
        return Err(Error::DomainError(format!("mixing order s = {s} must be positive")));
    }
    if escapes_support(px, py, pi) {
        let plan: Vec<Vec<f64>> = px
            .probs
            .iter()
            .map(|&a| py.probs.iter().map(|&b| a * b).collect())
            .collect();
        return Ok((f64::INFINITY, TransportPlan::new(plan, px.clone(), py.clone())?));
    }

    if s.is_infinite() {
        // LP: maximize <Q, log 1/pi>  <=>  minimize <Q, log pi>.
        let cost: Vec<Vec<f64>> = pi
            .probs
            .iter()
            .map(|row| {
                row.iter()
                    .map(|&p| if p > SUPPORT_EPS { log2_safe(p) } else { BIG_M })
                    .collect()
            })
            .collect();
        let q = transport_minimize(&cost, &px.probs, &py.probs)?;
        let mut value = 0.0;
        for (i, row) in q.iter().enumerate() {
            for (j, &m) in row.iter().enumerate() {
                if m > SUPPORT_EPS {
                    value -= m * log2_safe(pi.probs[i][j]);
                }
            }
        }
        return Ok((value, TransportPlan::new(q, px.clone(), py.clone())?));
    }

    // Finite s: maximize <Q, log 1/pi> + H(Q)/s = (1/s) [log Z - D(Q || K)]
    // with kernel K = pi^{-s} / Z, so the argmax is the I-projection of K.
    let mut kernel: Vec<Vec<f64>> = pi
        .probs
        .iter()
        .map(|row| row.iter().map(|&p| if p > SUPPORT_EPS { p.powf(-s) } else { 0.0 }).collect())
        .collect();
    let z: f64 = kernel.iter().flatten().sum();
    for row in kernel.iter_mut() {
        for v in row.iter_mut() {
            *v /= z;
        }
    }
    let q = ipf(&kernel, &px.probs, &py.probs)?;
    let mut value = joint_entropy(&JointPmf {
        probs: q.clone(),
        row_labels: None,
        col_labels: None,
    }) / s;
    for (i, row) in q.iter().enumerate() {
        for (j, &m) in row.iter().enumerate() {
            if m > SUPPORT_EPS {
                value -= m * log2_safe(pi.probs[i][j]);
            }
        }
    }
    Ok((value, TransportPlan::new(q, px.clone(), py.clone())?))
}

// ---------------------------------------------------------------------------
// Minimal relative entropy (Sanov exponent of product type-class events)
// ---------------------------------------------------------------------------

/// Iterative proportional fitting of `kernel` onto the marginals. The kernel
/// support is preserved; convergence is declared when the max marginal
/// residual drops below [`IPF_TOL`].
fn ipf(kernel: &[Vec<f64>], row_m: &[f64], col_m: &[f64]) -> Result<Vec<Vec<f64>>> {
    let m = row_m.len();
    let n = col_m.len();
    let mut q: Vec<Vec<f64>> = kernel.to_vec();
    // Zero rows/columns of the kernel whose target marginal is zero are fine;
    // positive targets with an all-zero kernel row are infeasible.
    for (i, &r) in row_m.iter().enumerate() {
        if r > SUPPORT_EPS && q[i].iter().all(|&v| v <= 0.0) {
            return Err(Error::Infeasible(format!("kernel row {i} empty but marginal positive")));
        }
    }
    for j in 0..n {
        if col_m[j] > SUPPORT_EPS && (0..m).all(|i| q[i][j] <= 0.0) {
            return Err(Error::Infeasible(format!("kernel column {j} empty but marginal positive")));
        }
    }
    let mut residual = f64::INFINITY;
    for _ in 0..IPF_MAX_SWEEPS {
        for i in 0..m {
            let rs: f64 = q[i].iter().sum();
            if rs > 0.0 {
                let f = row_m[i] / rs;
                for v in q[i].iter_mut() {
                    *v *= f;
                }
            }
        }
        for j in 0..n {
            let cs: f64 = (0..m).map(|i| q[i][j]).sum();
            if cs > 0.0 {
                let f = col_m[j] / cs;
                for row in q.iter_mut() {
                    row[j] *= f;
                }
            }
        }
        residual = 0.0f64;
        for (i, row) in q.iter().enumerate() {
            residual = residual.max((row.iter().sum::<f64>() - row_m[i]).abs());
        }
        for j in 0..n {
            let cs: f64 = q.iter().map(|r| r[j]).sum();
            residual = residual.max((cs - col_m[j]).abs());
        }
        if residual <= IPF_TOL {
            return Ok(q);
        }
    }
    Err(Error::NonConvergence { iters: IPF_MAX_SWEEPS, residual })
}

/// Feasibility of the polytope restricted to `supp(pi)`: minimizes the mass
/// that must be placed on forbidden cells; feasible iff the minimum is ~0.
fn restricted_polytope_feasible(px: &Pmf, py: &Pmf, pi: &JointPmf) -> Result<bool> {
    let cost: Vec<Vec<f64>> = pi
        .probs
        .iter()
        .map(|row| row.iter().map(|&p| if p > SUPPORT_EPS { 0.0 } else { 1.0 }).collect())
        .collect();
    let q = transport_minimize(&cost, &px.probs, &py.probs)?;
    let forbidden: f64 = q
        .iter()
        .enumerate()
        .map(|(i, row)| {
            row.iter()
                .enumerate()
                .filter(|(j, _)| pi.probs[i][*j] <= SUPPORT_EPS)
                .map(|(_, &v)| v)
                .sum::<f64>()
        })
        .sum();
    Ok(forbidden <= 1e-9)
}

/// Minimal relative entropy
/// `D(Q_X, Q_Y || pi) = min_{Q in C(Q_X, Q_Y)} D(Q || pi)` in bits, via IPF on
/// the kernel `pi`. The value is `+inf` iff every coupling escapes
/// `supp(pi)`, detected by a feasibility LP.
pub fn min_relative_entropy(
    qx: &Pmf,
    qy: &Pmf,
    pi: &JointPmf,
) -> Result<(f64, Option<TransportPlan>)> {
    check_match(qx, qy, pi)?;
    if !restricted_polytope_feasible(qx, qy, pi)? {
        return Ok((f64::INFINITY, None));
    }
    let q = ipf(&pi.probs, &qx.probs, &qy.probs)?;
    let mut value = 0.0;
    for (i, row) in q.iter().enumerate() {
        for (j, &m) in row.iter().enumerate() {
            if m > SUPPORT_EPS {
                value += m * log2_safe(m / pi.probs[i][j]);
            }
        }
    }
    Ok((value.max(0.0), Some(TransportPlan::new(q, qx.clone(), qy.clone())?)))
}

// ---------------------------------------------------------------------------
// Minimal chi-square form
// ---------------------------------------------------------------------------

/// Minimal chi-square
/// `X^2(eta_X, eta_Y || pi) = inf sum eta_{xy}^2 / pi_{xy}` over signed
/// couplings with the prescribed signed marginals, solved analytically from
/// the KKT system. Stationarity gives `eta_{xy} = pi_{xy} (u_x + v_y) / 2`; the
/// multipliers solve a linear system with one redundant constraint dropped.
pub fn min_chi_square(
    eta_x: &SignedPerturbation,
    eta_y: &SignedPerturbation,
    pi: &JointPmf,
) -> Result<f64> {
    let m = eta_x.eta.len();
    let n = eta_y.eta.len();
    if m != pi.nx() || n != pi.ny() {
        return Err(Error::AlphabetMismatch("perturbation sizes vs joint grid".into()));
    }
    if pi.probs.iter().flatten().any(|&p| p <= SUPPORT_EPS) {
        return Err(Error::SingularSystem("pi has zeros on the required support".into()));
    }
    // Unknowns (u_1..u_m, v_1..v_{n-1}) with v_n = 0; constraints are the m row
    // sums and first n-1 column sums (the last is implied by zero totals).
    let dim = m + n - 1;
    let mut a = vec![vec![0.0f64; dim]; dim];
    let mut b = vec![0.0f64; dim];
    let mx = pi.marginal_x().probs;
    let my = pi.marginal_y().probs;
    for x in 0..m {
        a[x][x] = mx[x];
        for y in 0..n.saturating_sub(1) {
            a[x][m + y] = pi.probs[x][y];
        }
        b[x] = 2.0 * eta_x.eta[x];
    }
    for y in 0..n - 1 {
        for x in 0..m {
            a[m + y][x] = pi.probs[x][y];
        }
        a[m + y][m + y] = my[y];
        b[m + y] = 2.0 * eta_y.eta[y];
    }
    let sol = solve_linear(&a, &b)
        .ok_or_else(|| Error::SingularSystem("KKT system singular".into()))?;
    let u = &sol[..m];
    let v: Vec<f64> = sol[m..].iter().copied().chain(std::iter::once(0.0)).collect();
    let mut value = 0.0;
    for x in 0..m {
        for y in 0..n {
            let e = pi.probs[x][y] * (u[x] + v[y]) / 2.0;
            value += e * e / pi.probs[x][y];
        }
    }
    Ok(value)
}

// ---------------------------------------------------------------------------
// Coupling equalities
// ---------------------------------------------------------------------------

/// Maximal coupling of two pmfs on a common alphabet by the standard overlap
/// construction. Returns the plan and the mismatch `Pr(X != Y)`, which equals
/// the total variation distance exactly.
pub fn maximal_coupling(p: &Pmf, q: &Pmf) -> Result<(TransportPlan, f64)> {
    if p.len() != q.len() {
        return Err(Error::AlphabetMismatch(format!("|X|={} vs {}", p.len(), q.len())));
    }
    let n = p.len();
    let overlap: Vec<f64> = (0..n).map(|i| p.probs[i].min(q.probs[i])).collect();
    let tv = 1.0 - overlap.iter().sum::<f64>();
    let mut plan = vec![vec![0.0f64; n]; n];
    for i in 0..n {
        plan[i][i] = overlap[i];
    }
    if tv > SUPPORT_EPS {
        let excess_p: Vec<f64> = (0..n).map(|i| (p.probs[i] - q.probs[i]).max(0.0)).collect();
        let excess_q: Vec<f64> = (0..n).map(|i| (q.probs[i] - p.probs[i]).max(0.0)).collect();
        for i in 0..n {
            for j in 0..n {
                plan[i][j] += excess_p[i] * excess_q[j] / tv;
            }
        }
    }
    let mismatch: f64 = plan
        .iter()
        .enumerate()
        .map(|(i, row)| row.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, &v)| v).sum::<f64>())
        .sum();
    Ok((TransportPlan::new(plan, p.clone(), q.clone())?, mismatch.max(0.0)))
}

/// Result of the maximal guessing coupling equality check.
#[derive(Debug, Clone)]
pub struct GuessingCoupling {
    /// `min_{couplings, f} Pr(Y != f(X))`, evaluated by building the maximal
    /// coupling of the pushforward against `Q_Y` for each `f`.
    pub lhs: f64,
    /// `min_f |Q_Y - Q_{f(X)}|` by direct total-variation evaluation.
    pub rhs: f64,
    /// A minimizing map `X -> Y` (index form).
    pub best_f: Vec<usize>,
}

/// Exhaustively enumerates maps `f: X -> Y` (capped at `|Y|^|X| <= 10^6`) and
/// evaluates both sides of the maximal guessing coupling equality.
pub fn maximal_guessing_coupling(qx: &Pmf, qy: &Pmf) -> Result<GuessingCoupling> {
    let nx = qx.len();
    let ny = qy.len();
    let count = (ny as f64).powi(nx as i32);
    if count > 1e6 {
        return Err(Error::SearchSpaceTooLarge(format!("|Y|^|X| = {count:e} maps")));
    }
    let total = count as u64;
    let mut best_lhs = f64::INFINITY;
    let mut best_rhs = f64::INFINITY;
    let mut best_f = vec![0usize; nx];
    for code in 0..total {
        let mut f = vec![0usize; nx];
        let mut c = code;
        for slot in f.iter_mut() {
            *slot = (c % ny as u64) as usize;
            c /= ny as u64;
        }
        let mut push = vec![0.0f64; ny];
        for (x, &y) in f.iter().enumerate() {
            push[y] += qx.probs[x];
        }
        let push = Pmf { probs: push, labels: None };
        let rhs_f = crate::prob::tv_distance(qy, &push)?;
        let (_, lhs_f) = maximal_coupling(&push, qy)?;
        if lhs_f < best_lhs - 1e-15 {
            best_lhs = lhs_f;
            best_f = f.clone();
        }
        best_rhs = best_rhs.min(rhs_f);
    }
    Ok(GuessingCoupling { lhs: best_lhs, rhs: best_rhs, best_f })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob::{mutual_information, shannon_entropy, DsbsParams};
    use approx::assert_abs_diff_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_joint(rng: &mut impl Rng, m: usize, n: usize) -> JointPmf {
        let mut grid: Vec<Vec<f64>> = (0..m)
            .map(|_| (0..n).map(|_| rng.gen_range(0.05..1.0)).collect())
            .collect();
        let s: f64 = grid.iter().flatten().sum();
        for row in grid.iter_mut() {
            for v in row.iter_mut() {
                *v /= s;
            }
        }
        JointPmf::new(grid).unwrap()
    }

    fn random_pmf(rng: &mut impl Rng, n: usize) -> Pmf {
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
        let s: f64 = v.iter().sum();
        Pmf::new(v.into_iter().map(|x| x / s).collect()).unwrap()
    }

    #[test]
    fn lp_matches_vertex_enumeration_on_2x2() {
        // For 2x2 marginals Bern(a), Bern(b) the polytope is the interval
        // q11 in [max(0, a+b-1), min(a, b)]; the LP optimum must match the
        // better endpoint exactly.
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let a = rng.gen_range(0.05..0.95);
            let b = rng.gen_range(0.05..0.95);
            let pi = random_joint(&mut rng, 2, 2);
            let px = Pmf::bernoulli(a).unwrap();
            let py = Pmf::bernoulli(b).unwrap();
            let (val, plan) = max_cross_entropy(&px, &py, &pi, f64::INFINITY).unwrap();
            let eval = |q11: f64| {
                let q = [
                    [1.0 - a - b + q11, b - q11],
                    [a - q11, q11],
                ];
                let mut acc = 0.0;
                for x in 0..2 {
                    for y in 0..2 {
                        if q[x][y] > SUPPORT_EPS {
                            acc -= q[x][y] * pi.probs[x][y].log2();
                        }
                    }
                }
                acc
            };
            let lo = (a + b - 1.0).max(0.0);
            let hi = a.min(b);
            let best = eval(lo).max(eval(hi));
            assert_abs_diff_eq!(val, best, epsilon = 1e-9);
            let (rx, ry) = plan.residuals();
            assert!(rx < MARGINAL_TOL && ry < MARGINAL_TOL);
        }
    }

    #[test]
    fn dsbs_closed_forms_for_h_infinity() {
        // Uniform marginals: H_inf = log2(1/beta); Bern(a), Bern(b):
        // log2(1/alpha) + min(a+b, 2-a-b) log2(alpha/beta).
        for p in [0.1, 0.2, 0.35] {
            let d = DsbsParams::from_crossover(p).unwrap();
            let pi = d.to_joint();
            let (al, be) = (d.alpha(), d.beta());
            let u = Pmf::bernoulli(0.5).unwrap();
            let (v, _) = max_cross_entropy(&u, &u, &pi, f64::INFINITY).unwrap();
            assert_abs_diff_eq!(v, (1.0 / be).log2(), epsilon = 1e-9);
            for (a, b) in [(0.3, 0.6), (0.8, 0.9), (0.2, 0.1)] {
                let pa = Pmf::bernoulli(a).unwrap();
                let pb = Pmf::bernoulli(b).unwrap();
                let (v, _) = max_cross_entropy(&pa, &pb, &pi, f64::INFINITY).unwrap();
                let expect = (1.0f64 / al).log2()
                    + (a + b).min(2.0 - a - b) * (al / be).log2();
                assert_abs_diff_eq!(v, expect, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn h_infinity_product_equality_case() {
        // For a product pi with matching marginals, H_inf = H(pi) exactly;
        // strictly greater otherwise.
        let px = Pmf::new(vec![0.3, 0.7]).unwrap();
        let py = Pmf::new(vec![0.2, 0.5, 0.3]).unwrap();
        let grid: Vec<Vec<f64>> = px
            .probs
            .iter()
            .map(|&a| py.probs.iter().map(|&b| a * b).collect())
            .collect();
        let pi = JointPmf::new(grid).unwrap();
        let (v, _) = max_cross_entropy(&px, &py, &pi, f64::INFINITY).unwrap();
        assert_abs_diff_eq!(v, joint_entropy(&pi), epsilon = 1e-9);

        let d = DsbsParams::from_crossover(0.2).unwrap();
        let pi = d.to_joint();
        let u = Pmf::bernoulli(0.5).unwrap();
        let (v, _) = max_cross_entropy(&u, &u, &pi, f64::INFINITY).unwrap();
        assert!(v > joint_entropy(&pi) + 1e-6);
    }

    #[test]
    fn h_s_nonincreasing_in_s() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let pi = random_joint(&mut rng, 3, 3);
            let px = random_pmf(&mut rng, 3);
            let py = random_pmf(&mut rng, 3);
            let grid = [0.25, 0.5, 1.0, 2.0, 8.0, f64::INFINITY];
            let mut last = f64::INFINITY;
            for &s in &grid {
                let (v, _) = max_cross_entropy(&px, &py, &pi, s).unwrap();
                assert!(v <= last + 1e-8, "H_s increased: {v} after {last} at s={s}");
                last = v;
            }
        }
    }

    #[test]
    fn min_rel_entropy_zero_at_own_marginals() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let pi = random_joint(&mut rng, 3, 4);
            let (v, plan) = min_relative_entropy(&pi.marginal_x(), &pi.marginal_y(), &pi).unwrap();
            assert!(v.abs() < 1e-8, "D = {v}");
            assert!(plan.is_some());
        }
    }

    /// Dense grid-search oracle over the 4 free coordinates of the 3x3
    /// transportation polytope, with staged refinement down to step 1e-5
    /// around the incumbent (the objective is convex with an interior optimum
    /// for positive kernels, so local refinement is exact).
    fn grid_search_min_d(qx: &Pmf, qy: &Pmf, pi: &JointPmf) -> f64 {
        let r = &qx.probs;
        let c = &qy.probs;
        let d_of = |q: &[[f64; 3]; 3]| -> f64 {
            let mut acc = 0.0;
            for x in 0..3 {
                for y in 0..3 {
                    if q[x][y] > 1e-14 {
                        acc += q[x][y] * (q[x][y] / pi.probs[x][y]).log2();
                    } else if q[x][y] < -1e-12 {
                        return f64::INFINITY;
                    }
                }
            }
            acc
        };
        let eval = |a: f64, b: f64, cc: f64, d: f64| -> f64 {
            let q = [
                [a, b, r[0] - a - b],
                [cc, d, r[1] - cc - d],
                [c[0] - a - cc, c[1] - b - d, r[2] - (c[0] - a - cc) - (c[1] - b - d)],
            ];
            for row in &q {
                for &v in row {
                    if v < -1e-12 {
                        return f64::INFINITY;
                    }
                }
            }
            d_of(&q)
        };
        let mut best = (f64::INFINITY, 0.0, 0.0, 0.0, 0.0);
        let mut lo = [0.0f64; 4];
        let mut hi = [
            r[0].min(c[0]),
            r[0].min(c[1]),
            r[1].min(c[0]),
            r[1].min(c[1]),
        ];
        let mut step = 1e-2;
        loop {
            let steps: Vec<Vec<f64>> = (0..4)
                .map(|k| {
                    let mut v = Vec::new();
                    let mut x = lo[k];
                    while x <= hi[k] + 1e-12 {
                        v.push(x);
                        x += step;
                    }
                    v
                })
                .collect();
            for &a in &steps[0] {
                for &b in &steps[1] {
                    for &cc in &steps[2] {
                        for &d in &steps[3] {
                            let v = eval(a, b, cc, d);
                            if v < best.0 {
                                best = (v, a, b, cc, d);
                            }
                        }
                    }
                }
            }
            if step <= 1e-5 {
                break;
            }
            let centers = [best.1, best.2, best.3, best.4];
            for k in 0..4 {
                lo[k] = (centers[k] - 2.0 * step).max(0.0);
                hi[k] = centers[k] + 2.0 * step;
            }
            step /= 10.0;
        }
        best.0
    }

    #[test]
    fn ipf_matches_dense_grid_search_3x3() {
        let mut rng = ChaCha8Rng::seed_from_u64(20);
        for _ in 0..5 {
            let pi = random_joint(&mut rng, 3, 3);
            let qx = random_pmf(&mut rng, 3);
            let qy = random_pmf(&mut rng, 3);
            let (v, _) = min_relative_entropy(&qx, &qy, &pi).unwrap();
            let oracle = grid_search_min_d(&qx, &qy, &pi);
            assert_abs_diff_eq!(v, oracle, epsilon = 1e-6);
        }
    }

    #[test]
    fn chi_square_zero_and_dsbs_closed_form() {
        let d = DsbsParams::from_rho(0.5).unwrap();
        let pi = d.to_joint();
        let z = SignedPerturbation::zero(2);
        assert_abs_diff_eq!(min_chi_square(&z, &z, &pi).unwrap(), 0.0, epsilon = 1e-12);
        // Lemma closed form: 2 (lam + mu)^2 / (1 + rho) + 2 (lam - mu)^2 / (1 - rho).
        let (lam, mu) = (0.1, 0.1);
        let ex = SignedPerturbation::new(vec![-lam, lam]).unwrap();
        let ey = SignedPerturbation::new(vec![-mu, mu]).unwrap();
        let v = min_chi_square(&ex, &ey, &pi).unwrap();
        assert_abs_diff_eq!(v, 2.0 * 0.2f64.powi(2) / 1.5, epsilon = 1e-10);
        let (lam, mu) = (0.07, -0.12);
        let ex = SignedPerturbation::new(vec![-lam, lam]).unwrap();
        let ey = SignedPerturbation::new(vec![-mu, mu]).unwrap();
        let v = min_chi_square(&ex, &ey, &pi).unwrap();
        let expect = 2.0 * (lam + mu).powi(2) / 1.5 + 2.0 * (lam - mu).powi(2) / 0.5;
        assert_abs_diff_eq!(v, expect, epsilon = 1e-10);
    }

    /// Projected-gradient oracle on the affine set of signed couplings.
    fn projected_gradient_chi2(
        eta_x: &[f64],
        eta_y: &[f64],
        pi: &JointPmf,
    ) -> f64 {
        let m = eta_x.len();
        let n = eta_y.len();
        // Start from the independent-style seed eta_x eta_y' scaled, then
        // project gradients onto the subspace of zero row/col adjustments.
        let mut e = vec![vec![0.0f64; n]; m];
        for i in 0..m {
            for j in 0..n {
                e[i][j] = eta_x[i] / n as f64 + eta_y[j] / m as f64
                    - eta_x.iter().sum::<f64>() / (m * n) as f64;
            }
        }
        let mut step = 0.05;
        let value = |e: &Vec<Vec<f64>>| -> f64 {
            e.iter()
                .enumerate()
                .map(|(i, row)| {
                    row.iter().enumerate().map(|(j, &v)| v * v / pi.probs[i][j]).sum::<f64>()
                })
                .sum()
        };
        let mut best = value(&e);
        for _ in 0..200_000 {
            // Gradient 2 eta / pi, projected to keep all row/col sums fixed.
            let mut g = vec![vec![0.0f64; n]; m];
            for i in 0..m {
                for j in 0..n {
                    g[i][j] = 2.0 * e[i][j] / pi.probs[i][j];
                }
            }
            let row_means: Vec<f64> = g.iter().map(|r| r.iter().sum::<f64>() / n as f64).collect();
            let col_means: Vec<f64> =
                (0..n).map(|j| g.iter().map(|r| r[j]).sum::<f64>() / m as f64).collect();
            let grand = g.iter().flatten().sum::<f64>() / (m * n) as f64;
            let mut moved = e.clone();
            for i in 0..m {
                for j in 0..n {
                    let proj = g[i][j] - row_means[i] - col_means[j] + grand;
                    moved[i][j] -= step * proj;
                }
            }
            let v = value(&moved);
            if v < best {
                best = v;
                e = moved;
            } else {
                step *= 0.5;
                if step < 1e-14 {
                    break;
                }
            }
        }
        best
    }

    #[test]
    fn chi_square_matches_projected_gradient_on_3x3() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..5 {
            let pi = random_joint(&mut rng, 3, 3);
            let raw: Vec<f64> = (0..3).map(|_| rng.gen_range(-0.1..0.1)).collect();
            let mean = raw.iter().sum::<f64>() / 3.0;
            let ex: Vec<f64> = raw.iter().map(|v| v - mean).collect();
            let raw: Vec<f64> = (0..3).map(|_| rng.gen_range(-0.1..0.1)).collect();
            let mean = raw.iter().sum::<f64>() / 3.0;
            let ey: Vec<f64> = raw.iter().map(|v| v - mean).collect();
            let v = min_chi_square(
                &SignedPerturbation::new(ex.clone()).unwrap(),
                &SignedPerturbation::new(ey.clone()).unwrap(),
                &pi,
            )
            .unwrap();
            let oracle = projected_gradient_chi2(&ex, &ey, &pi);
            assert_abs_diff_eq!(v, oracle, epsilon = 1e-8);
        }
    }

    #[test]
    fn second_order_link_between_d_and_chi2() {
        // D(pi_X + eps eta_X, pi_Y + eps eta_Y || pi) = eps^2/2 X^2 + o(eps^2),
        // checked by Richardson extrapolation of 2 D / eps^2 at eps = 1e-2, 1e-3.
        let d = DsbsParams::from_rho(0.5).unwrap();
        let pi = d.to_joint();
        let (lam, mu) = (0.3, -0.2);
        let ex = SignedPerturbation::new(vec![-lam, lam]).unwrap();
        let ey = SignedPerturbation::new(vec![-mu, mu]).unwrap();
        let chi2 = min_chi_square(&ex, &ey, &pi).unwrap();
        let rate = |eps: f64| -> f64 {
            let qx = Pmf::new(vec![0.5 - eps * lam, 0.5 + eps * lam]).unwrap();
            let qy = Pmf::new(vec![0.5 - eps * mu, 0.5 + eps * mu]).unwrap();
            let (v, _) = min_relative_entropy(&qx, &qy, &pi).unwrap();
            2.0 * v / (eps * eps) * std::f64::consts::LN_2
        };
        let (e1, e2) = (1e-2, 1e-3);
        let (r1, r2) = (rate(e1), rate(e2));
        let extrapolated = (e1 * r2 - e2 * r1) / (e1 - e2);
        assert_abs_diff_eq!(extrapolated, chi2, epsilon = 1e-4 * chi2.max(1.0));
    }

    #[test]
    fn maximal_coupling_cases() {
        let p = Pmf::bernoulli(0.5).unwrap();
        let q = Pmf::bernoulli(0.25).unwrap();
        let (_, mm) = maximal_coupling(&p, &p).unwrap();
        assert_abs_diff_eq!(mm, 0.0, epsilon = 1e-15);
        let (plan, mm) = maximal_coupling(&p, &q).unwrap();
        assert_abs_diff_eq!(mm, 0.25, epsilon = 1e-12);
        let (rx, ry) = plan.residuals();
        assert!(rx < MARGINAL_TOL && ry < MARGINAL_TOL);
        let a = Pmf::new(vec![1.0, 0.0]).unwrap();
        let b = Pmf::new(vec![0.0, 1.0]).unwrap();
        let (_, mm) = maximal_coupling(&a, &b).unwrap();
        assert_abs_diff_eq!(mm, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn guessing_coupling_equality() {
        // Pushforward-attainable target: zero.
        let qx = Pmf::uniform(4);
        let qy = Pmf::new(vec![0.5, 0.5]).unwrap();
        let g = maximal_guessing_coupling(&qx, &qy).unwrap();
        assert_abs_diff_eq!(g.lhs, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(g.rhs, 0.0, epsilon = 1e-12);

        // Bern(1/2) to (0.7, 0.3): best of the four maps is TV = 0.2.
        let qx = Pmf::bernoulli(0.5).unwrap();
        let qy = Pmf::new(vec![0.7, 0.3]).unwrap();
        let g = maximal_guessing_coupling(&qx, &qy).unwrap();
        assert_abs_diff_eq!(g.rhs, 0.2, epsilon = 1e-12);
        assert!((g.lhs - g.rhs).abs() < 1e-12);

        // Random instances: equality always holds.
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let qx = random_pmf(&mut rng, 3);
            let qy = random_pmf(&mut rng, 4);
            let g = maximal_guessing_coupling(&qx, &qy).unwrap();
            assert!((g.lhs - g.rhs).abs() < 1e-12, "lhs {} rhs {}", g.lhs, g.rhs);
        }
    }

    #[test]
    fn h_infinity_reports_support_escape() {
        // pi with a zero cell but fully-supported marginals: the product
        // coupling places mass there, so the value is +inf.
        let pi = JointPmf::new(vec![vec![0.5, 0.0], vec![0.25, 0.25]]).unwrap();
        let u = Pmf::bernoulli(0.5).unwrap();
        let (v, plan) = max_cross_entropy(&u, &u, &pi, f64::INFINITY).unwrap();
        assert!(v.is_infinite());
        let (rx, ry) = plan.residuals();
        assert!(rx < MARGINAL_TOL && ry < MARGINAL_TOL);
    }

    #[test]
    fn min_rel_entropy_infeasible_support() {
        // Diagonal pi: couplings of swapped point masses must escape.
        let pi = JointPmf::new(vec![vec![0.5, 0.0], vec![0.0, 0.5]]).unwrap();
        let qx = Pmf::new(vec![1.0, 0.0]).unwrap();
        let qy = Pmf::new(vec![0.0, 1.0]).unwrap();
        let (v, plan) = min_relative_entropy(&qx, &qy, &pi).unwrap();
        assert!(v.is_infinite());
        assert!(plan.is_none());
    }

    #[test]
    fn mi_lower_bounds_min_rel_entropy_at_marginals() {
        // Sanity: D(pi_X, pi_Y || pi) = 0 <= I(pi), and for shifted marginals
        // D > 0 for a correlated pi.
        let d = DsbsParams::from_crossover(0.1).unwrap();
        let pi = d.to_joint();
        assert!(mutual_information(&pi) > 0.0);
        let qx = Pmf::bernoulli(0.9).unwrap();
        let qy = Pmf::bernoulli(0.1).unwrap();
        let (v, _) = min_relative_entropy(&qx, &qy, &pi).unwrap();
        assert!(v > 0.0);
        let _ = shannon_entropy(&qx);
    }
}
