//! Two-phase primal simplex for LPs with bounded variables.
//!
//! The implementation keeps a dense tableau, equilibrates rows at setup, and
//! falls back to Bland's rule when the objective stalls, so it terminates on
//! degenerate instances. Accuracy is restored at the end of a solve by
//! recomputing the basic values from the original columns whenever the
//! incremental values have drifted.

use super::{Relation, SolveError};

const PIVOT_TOL: f64 = 1e-9;
const DJ_TOL: f64 = 1e-9;
const PHASE1_TOL: f64 = 1e-7;
const RESIDUAL_TOL: f64 = 1e-7;
const STALL_LIMIT: u64 = 1_000;

#[derive(Debug, Clone)]
pub(crate) struct LpRow {
    pub terms: Vec<(usize, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct LpProblem {
    pub num_cols: usize,
    pub rows: Vec<LpRow>,
    pub objective: Vec<f64>,
    pub objective_constant: f64,
}

#[derive(Debug, Clone)]
pub(crate) enum LpOutcome {
    Optimal { values: Vec<f64>, objective: f64 },
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ColState {
    Basic,
    AtLower,
    AtUpper,
    /// Nonbasic free variable resting at zero.
    FreeZero,
}

struct Tableau {
    m: usize,
    ncols: usize,
    n_struct: usize,
    /// Row-major m x ncols working matrix (B^-1 A).
    tab: Vec<f64>,
    /// Current value of every column, basic or nonbasic.
    x: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    cost: Vec<f64>,
    dj: Vec<f64>,
    basis: Vec<usize>,
    state: Vec<ColState>,
    /// Equilibrated original rows, for residual checks and refinement.
    scaled_rows: Vec<Vec<(usize, f64)>>,
    scaled_rhs: Vec<f64>,
    art_sign: Vec<f64>,
    bland: bool,
    iterations: u64,
}

pub(crate) fn solve_lp(
    problem: &LpProblem,
    lower: &[f64],
    upper: &[f64],
) -> Result<LpOutcome, SolveError> {
    debug_assert_eq!(lower.len(), problem.num_cols);
    debug_assert_eq!(upper.len(), problem.num_cols);

    // Bound sanity: branching can produce empty boxes (e.g. ub 2 < lb 3).
    for j in 0..problem.num_cols {
        if lower[j] > upper[j] {
            return Ok(LpOutcome::Infeasible);
        }
    }

    // Dedupe row terms and equilibrate. Empty rows are checked right here.
    let mut rows: Vec<(Vec<(usize, f64)>, Relation, f64)> = Vec::with_capacity(problem.rows.len());
    for row in &problem.rows {
        let mut dense: Vec<(usize, f64)> = Vec::with_capacity(row.terms.len());
        let mut sorted = row.terms.clone();
        sorted.sort_by_key(|&(c, _)| c);
        for (c, v) in sorted {
            match dense.last_mut() {
                Some(last) if last.0 == c => last.1 += v,
                _ => dense.push((c, v)),
            }
        }
        dense.retain(|&(_, v)| v != 0.0);
        if dense.is_empty() {
            let ok = match row.relation {
                Relation::Le => 0.0 <= row.rhs + 1e-9,
                Relation::Ge => 0.0 >= row.rhs - 1e-9,
                Relation::Eq => row.rhs.abs() <= 1e-9,
            };
            if !ok {
                return Ok(LpOutcome::Infeasible);
            }
            continue;
        }
        let scale = dense.iter().map(|&(_, v)| v.abs()).fold(0.0, f64::max);
        let inv = 1.0 / scale;
        for t in &mut dense {
            t.1 *= inv;
        }
        rows.push((dense, row.relation, row.rhs * inv));
    }

    let m = rows.len();
    let n = problem.num_cols;
    let ncols = n + 2 * m; // structural + slack + artificial

    let mut t = Tableau {
        m,
        ncols,
        n_struct: n,
        tab: vec![0.0; m * ncols],
        x: vec![0.0; ncols],
        lower: vec![0.0; ncols],
        upper: vec![0.0; ncols],
        cost: vec![0.0; ncols],
        dj: vec![0.0; ncols],
        basis: vec![0; m],
        state: vec![ColState::AtLower; ncols],
        scaled_rows: Vec::with_capacity(m),
        scaled_rhs: Vec::with_capacity(m),
        art_sign: vec![1.0; m],
        bland: false,
        iterations: 0,
    };

    t.lower[..n].copy_from_slice(lower);
    t.upper[..n].copy_from_slice(upper);
    for (i, (terms, relation, rhs)) in rows.iter().enumerate() {
        let slack = n + i;
        let (lo, hi) = match relation {
            Relation::Le => (0.0, f64::INFINITY),
            Relation::Ge => (f64::NEG_INFINITY, 0.0),
            Relation::Eq => (0.0, 0.0),
        };
        t.lower[slack] = lo;
        t.upper[slack] = hi;
        t.lower[n + m + i] = 0.0;
        t.upper[n + m + i] = f64::INFINITY;
        t.scaled_rows.push(terms.clone());
        t.scaled_rhs.push(*rhs);
    }

    // Nonbasic starting point: nearest finite bound, or zero for free columns.
    for j in 0..n {
        t.state[j] = if t.lower[j].is_finite() {
            ColState::AtLower
        } else if t.upper[j].is_finite() {
            ColState::AtUpper
        } else {
            ColState::FreeZero
        };
        t.x[j] = match t.state[j] {
            ColState::AtLower => t.lower[j],
            ColState::AtUpper => t.upper[j],
            _ => 0.0,
        };
    }
    for i in 0..m {
        t.state[n + i] = match rows[i].1 {
            Relation::Ge => ColState::AtUpper,
            _ => ColState::AtLower,
        };
        t.x[n + i] = 0.0;
    }

    // Artificial basis with signs chosen so every basic value is nonnegative.
    for i in 0..m {
        let residual = t.scaled_rhs[i]
            - t.scaled_rows[i]
                .iter()
                .map(|&(c, v)| v * t.x[c])
                .sum::<f64>();
        let sign = if residual >= 0.0 { 1.0 } else { -1.0 };
        t.art_sign[i] = sign;
        for &(c, v) in &t.scaled_rows[i] {
            t.tab[i * ncols + c] = v * sign;
        }
        t.tab[i * ncols + n + i] = sign;
        t.tab[i * ncols + n + m + i] = 1.0;
        t.basis[i] = n + m + i;
        t.state[n + m + i] = ColState::Basic;
        t.x[n + m + i] = residual.abs();
        // Scaled rhs keeps its sign; only the working row is flipped.
    }

    // Phase 1: minimize the sum of artificials.
    for i in 0..m {
        t.cost[n + m + i] = 1.0;
    }
    t.recompute_reduced_costs();
    match t.run()? {
        Stop::Unbounded => {
            return Err(SolveError::Numerical("phase 1 reported unbounded".into()))
        }
        Stop::Optimal => {}
    }
    let infeasibility: f64 = (0..m).map(|i| t.x[n + m + i].max(0.0)).sum();
    if infeasibility > PHASE1_TOL * (1.0 + m as f64) {
        return Ok(LpOutcome::Infeasible);
    }

    // Drive artificials out of the basis where possible; rows that resist are
    // redundant and keep a pinned artificial.
    for row in 0..m {
        if t.basis[row] < n + m {
            continue;
        }
        let mut best: Option<(usize, f64)> = None;
        for j in 0..n + m {
            if t.state[j] == ColState::Basic {
                continue;
            }
            let w = t.tab[row * ncols + j].abs();
            if w > PIVOT_TOL && best.map_or(true, |(_, bw)| w > bw) {
                best = Some((j, w));
            }
        }
        if let Some((q, _)) = best {
            t.degenerate_swap(row, q);
        }
    }
    for i in 0..m {
        let a = n + m + i;
        t.lower[a] = 0.0;
        t.upper[a] = 0.0;
        if t.state[a] != ColState::Basic {
            t.state[a] = ColState::AtLower;
            t.x[a] = 0.0;
        }
    }

    // Phase 2 with the (scaled) real objective.
    let kappa = problem
        .objective
        .iter()
        .map(|c| c.abs())
        .fold(1.0, f64::max);
    t.cost.iter_mut().for_each(|c| *c = 0.0);
    for j in 0..n {
        t.cost[j] = problem.objective[j] / kappa;
    }
    t.bland = false;
    t.recompute_reduced_costs();
    match t.run()? {
        Stop::Unbounded => return Ok(LpOutcome::Unbounded),
        Stop::Optimal => {}
    }

    if !t.residuals_ok() {
        t.refine()?;
        if !t.residuals_ok() {
            return Err(SolveError::Numerical(
                "simplex finished with inconsistent basic values".into(),
            ));
        }
    }

    let mut values = Vec::with_capacity(n);
    for j in 0..n {
        values.push(t.x[j].clamp(t.lower[j], t.upper[j]));
    }
    let objective = problem.objective_constant
        + values
            .iter()
            .zip(&problem.objective)
            .map(|(x, c)| x * c)
            .sum::<f64>();
    Ok(LpOutcome::Optimal { values, objective })
}

enum Stop {
    Optimal,
    Unbounded,
}

impl Tableau {
    fn recompute_reduced_costs(&mut self) {
        let (m, ncols) = (self.m, self.ncols);
        self.dj.copy_from_slice(&self.cost);
        for i in 0..m {
            let cb = self.cost[self.basis[i]];
            if cb == 0.0 {
                continue;
            }
            let row = &self.tab[i * ncols..(i + 1) * ncols];
            for (dj, &a) in self.dj.iter_mut().zip(row) {
                *dj -= cb * a;
            }
        }
    }

    fn current_objective(&self) -> f64 {
        self.x.iter().zip(&self.cost).map(|(x, c)| x * c).sum()
    }

    fn run(&mut self) -> Result<Stop, SolveError> {
        let cap = 50_000 + 100 * (self.m + self.ncols) as u64;
        let mut best_obj = self.current_objective();
        let mut stalled: u64 = 0;
        let mut verified = false;
        loop {
            self.iterations += 1;
            if self.iterations > cap {
                return Err(SolveError::Numerical("simplex iteration limit".into()));
            }
            let entering = self.choose_entering();
            let (q, dir) = match entering {
                Some(pair) => pair,
                None => {
                    if verified {
                        return Ok(Stop::Optimal);
                    }
                    self.recompute_reduced_costs();
                    verified = true;
                    continue;
                }
            };
            verified = false;

            match self.ratio_test(q, dir) {
                Ratio::Unbounded => return Ok(Stop::Unbounded),
                Ratio::BoundFlip(step) => self.apply_bound_flip(q, dir, step),
                Ratio::Pivot { row, step } => self.apply_pivot(q, dir, row, step),
            }

            if !self.bland {
                let obj = self.current_objective();
                if obj < best_obj - 1e-10 {
                    best_obj = obj;
                    stalled = 0;
                } else {
                    stalled += 1;
                    if stalled > STALL_LIMIT {
                        self.bland = true;
                        self.recompute_reduced_costs();
                    }
                }
            }
        }
    }

    fn choose_entering(&self) -> Option<(usize, i8)> {
        let mut best: Option<(usize, i8, f64)> = None;
        for j in 0..self.ncols {
            let (state, dj) = (self.state[j], self.dj[j]);
            if state == ColState::Basic || self.upper[j] - self.lower[j] <= 0.0 {
                continue;
            }
            let dir: i8 = match state {
                ColState::AtLower if dj < -DJ_TOL => 1,
                ColState::AtUpper if dj > DJ_TOL => -1,
                ColState::FreeZero if dj.abs() > DJ_TOL => {
                    if dj < 0.0 {
                        1
                    } else {
                        -1
                    }
                }
                _ => continue,
            };
            if self.bland {
                return Some((j, dir));
            }
            let score = dj.abs();
            if best.map_or(true, |(_, _, s)| score > s) {
                best = Some((j, dir, score));
            }
        }
        best.map(|(j, d, _)| (j, d))
    }

    fn ratio_test(&self, q: usize, dir: i8) -> Ratio {
        let dirf = f64::from(dir);
        let mut best_step = f64::INFINITY;
        let mut best_row: Option<usize> = None;

        for i in 0..self.m {
            let w = self.tab[i * self.ncols + q];
            let rate = -dirf * w; // change of basic i per unit step
            if rate.abs() <= PIVOT_TOL {
                continue;
            }
            let b = self.basis[i];
            let xb = self.x[b];
            let limit = if rate > 0.0 { self.upper[b] } else { self.lower[b] };
            if !limit.is_finite() {
                continue;
            }
            let step = ((limit - xb) / rate).max(0.0);
            let takes = match best_row {
                None => step < best_step,
                Some(r) => {
                    step < best_step - 1e-12
                        || ((step - best_step).abs() <= 1e-12 && self.tie_break(i, r, q))
                }
            };
            if takes {
                best_step = step;
                best_row = Some(i);
            }
        }

        let span = self.upper[q] - self.lower[q];
        let flip_step = if span.is_finite() { span } else { f64::INFINITY };
        match best_row {
            None => {
                if flip_step.is_finite() {
                    Ratio::BoundFlip(flip_step)
                } else {
                    Ratio::Unbounded
                }
            }
            Some(row) => {
                if flip_step <= best_step {
                    Ratio::BoundFlip(flip_step)
                } else {
                    Ratio::Pivot { row, step: best_step }
                }
            }
        }
    }

    /// Prefers row `i` over incumbent `r` on a tie. Bland mode picks the
    /// lowest basic variable index; otherwise the larger pivot element wins.
    fn tie_break(&self, i: usize, r: usize, q: usize) -> bool {
        if self.bland {
            self.basis[i] < self.basis[r]
        } else {
            let wi = self.tab[i * self.ncols + q].abs();
            let wr = self.tab[r * self.ncols + q].abs();
            wi > wr || (wi == wr && self.basis[i] < self.basis[r])
        }
    }

    fn apply_bound_flip(&mut self, q: usize, dir: i8, step: f64) {
        let dirf = f64::from(dir);
        for i in 0..self.m {
            let w = self.tab[i * self.ncols + q];
            if w != 0.0 {
                let b = self.basis[i];
                self.x[b] -= dirf * w * step;
            }
        }
        self.x[q] += dirf * step;
        self.state[q] = match self.state[q] {
            ColState::AtLower => {
                self.x[q] = self.upper[q];
                ColState::AtUpper
            }
            ColState::AtUpper => {
                self.x[q] = self.lower[q];
                ColState::AtLower
            }
            other => other,
        };
    }

    fn apply_pivot(&mut self, q: usize, dir: i8, row: usize, step: f64) {
        let dirf = f64::from(dir);
        let ncols = self.ncols;

        for i in 0..self.m {
            let w = self.tab[i * ncols + q];
            if w != 0.0 {
                let b = self.basis[i];
                self.x[b] -= dirf * w * step;
            }
        }
        self.x[q] += dirf * step;

        let leaving = self.basis[row];
        let w_row = self.tab[row * ncols + q];
        let rate = -dirf * w_row;
        self.state[leaving] = if rate > 0.0 {
            self.x[leaving] = self.upper[leaving];
            ColState::AtUpper
        } else {
            self.x[leaving] = self.lower[leaving];
            ColState::AtLower
        };

        // Gauss-Jordan step on the tableau and the reduced-cost row.
        let piv = self.tab[row * ncols + q];
        let inv = 1.0 / piv;
        for j in 0..ncols {
            self.tab[row * ncols + j] *= inv;
        }
        self.tab[row * ncols + q] = 1.0;
        let pivot_row: Vec<f64> = self.tab[row * ncols..(row + 1) * ncols].to_vec();
        for i in 0..self.m {
            if i == row {
                continue;
            }
            let factor = self.tab[i * ncols + q];
            if factor == 0.0 {
                continue;
            }
            let target = &mut self.tab[i * ncols..(i + 1) * ncols];
            for (t, p) in target.iter_mut().zip(&pivot_row) {
                *t -= factor * p;
            }
            target[q] = 0.0;
        }
        let factor = self.dj[q];
        if factor != 0.0 {
            for (d, p) in self.dj.iter_mut().zip(&pivot_row) {
                *d -= factor * p;
            }
            self.dj[q] = 0.0;
        }

        self.basis[row] = q;
        self.state[q] = ColState::Basic;
    }

    /// Zero-step basis swap used to push artificials out after phase 1.
    fn degenerate_swap(&mut self, row: usize, q: usize) {
        let ncols = self.ncols;
        let leaving = self.basis[row];
        self.state[leaving] = ColState::AtLower;
        self.x[leaving] = 0.0;

        let entering_value = self.x[q];
        let piv = self.tab[row * ncols + q];
        let inv = 1.0 / piv;
        for j in 0..ncols {
            self.tab[row * ncols + j] *= inv;
        }
        self.tab[row * ncols + q] = 1.0;
        for i in 0..self.m {
            if i == row {
                continue;
            }
            let factor = self.tab[i * ncols + q];
            if factor == 0.0 {
                continue;
            }
            for j in 0..ncols {
                let v = self.tab[row * ncols + j];
                self.tab[i * ncols + j] -= factor * v;
            }
            self.tab[i * ncols + q] = 0.0;
        }
        self.basis[row] = q;
        self.state[q] = ColState::Basic;
        self.x[q] = entering_value;
    }

    fn residuals_ok(&self) -> bool {
        for i in 0..self.m {
            let mut lhs: f64 = self.scaled_rows[i]
                .iter()
                .map(|&(c, v)| v * self.x[c])
                .sum();
            lhs += self.x[self.n_struct + i]; // slack
            let art = self.x[self.n_struct + self.m + i] * self.art_sign[i];
            lhs += art;
            if (lhs - self.scaled_rhs[i]).abs() > RESIDUAL_TOL * (1.0 + self.scaled_rhs[i].abs()) {
                return false;
            }
        }
        for j in 0..self.ncols {
            let x = self.x[j];
            if x < self.lower[j] - RESIDUAL_TOL || x > self.upper[j] + RESIDUAL_TOL {
                return false;
            }
        }
        true
    }

    /// Recomputes the basic values exactly from the scaled columns.
    fn refine(&mut self) -> Result<(), SolveError> {
        let m = self.m;
        let n = self.n_struct;
        let mut bmat = vec![0.0; m * m];
        let mut rhs = self.scaled_rhs.clone();

        let column = |j: usize, i: usize| -> f64 {
            if j < n {
                self.scaled_rows[i]
                    .iter()
                    .find(|&&(c, _)| c == j)
                    .map_or(0.0, |&(_, v)| v)
            } else if j < n + m {
                if j - n == i {
                    1.0
                } else {
                    0.0
                }
            } else if j - n - m == i {
                self.art_sign[i]
            } else {
                0.0
            }
        };

        for (k, &bj) in self.basis.iter().enumerate() {
            for i in 0..m {
                bmat[i * m + k] = column(bj, i);
            }
        }
        for j in 0..self.ncols {
            if self.state[j] == ColState::Basic || self.x[j] == 0.0 {
                continue;
            }
            for i in 0..m {
                rhs[i] -= column(j, i) * self.x[j];
            }
        }
        let solution = solve_dense(m, &mut bmat, &mut rhs)
            .ok_or_else(|| SolveError::Numerical("singular basis during refinement".into()))?;
        for (k, &bj) in self.basis.iter().enumerate() {
            self.x[bj] = solution[k];
        }
        Ok(())
    }
}

enum Ratio {
    Unbounded,
    BoundFlip(f64),
    Pivot { row: usize, step: f64 },
}

/// Gaussian elimination with partial pivoting; returns None when singular.
pub(crate) fn solve_dense(n: usize, a: &mut [f64], b: &mut [f64]) -> Option<Vec<f64>> {
    let mut perm: Vec<usize> = (0..n).collect();
    for col in 0..n {
        let mut best = col;
        let mut best_val = a[perm[col] * n + col].abs();
        for row in col + 1..n {
            let v = a[perm[row] * n + col].abs();
            if v > best_val {
                best = row;
                best_val = v;
            }
        }
        if best_val <= 1e-12 {
            return None;
        }
        perm.swap(col, best);
        let prow = perm[col];
        let piv = a[prow * n + col];
        for row in col + 1..n {
            let r = perm[row];
            let factor = a[r * n + col] / piv;
            if factor == 0.0 {
                continue;
            }
            for j in col..n {
                a[r * n + j] -= factor * a[prow * n + j];
            }
            b[r] -= factor * b[prow];
        }
    }
    let mut x = vec![0.0; n];
    for col in (0..n).rev() {
        let r = perm[col];
        let mut v = b[r];
        for j in col + 1..n {
            v -= a[r * n + j] * x[j];
        }
        x[col] = v / a[r * n + col];
    }
    Some(x)
}
