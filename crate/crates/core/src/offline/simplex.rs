//! Dense bounded-variable primal simplex with a two-phase start.
//!
//! Every row gets a slack whose bounds encode the comparator, so all rows
//! are equalities. Rows whose slack cannot absorb the initial residual get an
//! artificial column; phase 1 drives those to zero and phase 2 fixes them at
//! zero. Pricing is Dantzig's rule, falling back to Bland's rule after a run
//! of degenerate pivots.

use thiserror::Error;

use super::model::{Cmp, Constraint};

const PIVOT_TOL: f64 = 1e-9;
const COST_TOL: f64 = 1e-9;
const DROP_TOL: f64 = 1e-13;
const TIE_TOL: f64 = 1e-10;
const FEAS_TOL: f64 = 1e-6;
const STALL_LIMIT: usize = 40;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimplexError {
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone)]
pub struct LpResult {
    pub status: LpStatus,
    /// Structural values; meaningful only when `Optimal`.
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum State {
    Basic,
    Lower,
    Upper,
    Zero,
}

struct Tableau {
    m: usize,
    n: usize,
    a: Vec<f64>,
    beta: Vec<f64>,
    basis: Vec<usize>,
    state: Vec<State>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    d: Vec<f64>,
    cols: Vec<Vec<(usize, f64)>>,
    rhs: Vec<f64>,
    init_basis: Vec<usize>,
    iterations: usize,
    max_iterations: usize,
}

enum Step {
    Optimal,
    Unbounded,
    Moved,
}

impl Tableau {
    fn value(&self, j: usize) -> f64 {
        match self.state[j] {
            State::Lower => self.lower[j],
            State::Upper => self.upper[j],
            State::Zero => 0.0,
            State::Basic => unreachable!("basic values live in beta"),
        }
    }

    fn reset_costs(&mut self, cost: &[f64]) {
        let (m, n) = (self.m, self.n);
        self.d = cost.to_vec();
        for r in 0..m {
            let cb = cost[self.basis[r]];
            if cb != 0.0 {
                let row = &self.a[r * n..(r + 1) * n];
                for (d, &v) in self.d.iter_mut().zip(row) {
                    *d -= cb * v;
                }
            }
        }
        for r in 0..m {
            self.d[self.basis[r]] = 0.0;
        }
    }

    /// Recomputes basic values from the original columns to shed drift.
    fn refresh_beta(&mut self) {
        let (m, n) = (self.m, self.n);
        let mut w = self.rhs.clone();
        for j in 0..n {
            if self.state[j] == State::Basic {
                continue;
            }
            let v = self.value(j);
            if v != 0.0 {
                for &(r, c) in &self.cols[j] {
                    w[r] -= c * v;
                }
            }
        }
        for r in 0..m {
            let row = &self.a[r * n..(r + 1) * n];
            self.beta[r] = self
                .init_basis
                .iter()
                .zip(&w)
                .map(|(&c, &w)| row[c] * w)
                .sum();
        }
    }

    fn entering(&self, bland: bool) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64, f64)> = None;
        for j in 0..self.n {
            let dj = self.d[j];
            let dir = match self.state[j] {
                State::Basic => continue,
                _ if self.lower[j] == self.upper[j] => continue,
                State::Lower if dj < -COST_TOL => 1.0,
                State::Upper if dj > COST_TOL => -1.0,
                State::Zero if dj.abs() > COST_TOL => -dj.signum(),
                _ => continue,
            };
            if bland {
                return Some((j, dir));
            }
            if best.is_none_or(|(_, _, s)| dj.abs() > s) {
                best = Some((j, dir, dj.abs()));
            }
        }
        best.map(|(j, dir, _)| (j, dir))
    }

    fn step(&mut self, bland: bool) -> Result<(Step, f64), SimplexError> {
        let Some((j, dir)) = self.entering(bland) else {
            return Ok((Step::Optimal, 0.0));
        };
        self.iterations += 1;
        if self.iterations > self.max_iterations {
            return Err(SimplexError::NumericalFailure(format!(
                "no convergence after {} pivots",
                self.max_iterations
            )));
        }
        let (m, n) = (self.m, self.n);
        let span = self.upper[j] - self.lower[j];
        let mut best_t = if span.is_finite() {
            span
        } else {
            f64::INFINITY
        };
        let mut leave: Option<usize> = None;
        let mut leave_alpha = 0.0f64;
        for r in 0..m {
            let alpha = dir * self.a[r * n + j];
            if alpha.abs() <= PIVOT_TOL {
                continue;
            }
            let bv = self.basis[r];
            let limit = if alpha > 0.0 {
                if !self.lower[bv].is_finite() {
                    continue;
                }
                (self.beta[r] - self.lower[bv]).max(0.0) / alpha
            } else {
                if !self.upper[bv].is_finite() {
                    continue;
                }
                (self.upper[bv] - self.beta[r]).max(0.0) / -alpha
            };
            let better = match leave {
                None => limit < best_t - TIE_TOL,
                Some(prev) => {
                    limit < best_t - TIE_TOL
                        || (limit <= best_t + TIE_TOL
                            && if bland {
                                bv < self.basis[prev]
                            } else {
                                alpha.abs() > leave_alpha.abs()
                            })
                }
            };
            if better {
                best_t = best_t.min(limit);
                leave = Some(r);
                leave_alpha = alpha;
            }
        }
        if best_t.is_infinite() {
            return Ok((Step::Unbounded, 0.0));
        }
        let t = best_t;
        let gain = self.d[j].abs() * t;
        let entering_value = self.value_or_zero(j) + dir * t;
        if t > 0.0 {
            for r in 0..m {
                let v = self.a[r * n + j];
                if v != 0.0 {
                    self.beta[r] -= dir * t * v;
                }
            }
        }
        match leave {
            None => {
                self.state[j] = if dir > 0.0 {
                    State::Upper
                } else {
                    State::Lower
                };
            }
            Some(r) => {
                let bv = self.basis[r];
                self.state[bv] = if leave_alpha > 0.0 {
                    State::Lower
                } else {
                    State::Upper
                };
                self.beta[r] = entering_value;
                self.basis[r] = j;
                self.state[j] = State::Basic;
                self.pivot(r, j);
            }
        }
        Ok((Step::Moved, gain))
    }

    fn value_or_zero(&self, j: usize) -> f64 {
        if self.state[j] == State::Basic {
            0.0
        } else {
            self.value(j)
        }
    }

    fn pivot(&mut self, r: usize, j: usize) {
        let (m, n) = (self.m, self.n);
        let p = self.a[r * n + j];
        let mut row = Vec::new();
        for c in 0..n {
            let v = self.a[r * n + c] / p;
            if v.abs() > DROP_TOL {
                row.push((c, v));
            }
            self.a[r * n + c] = 0.0;
        }
        for &(c, v) in &row {
            self.a[r * n + c] = v;
        }
        self.a[r * n + j] = 1.0;
        for i in 0..m {
            if i == r {
                continue;
            }
            let f = self.a[i * n + j];
            if f == 0.0 {
                continue;
            }
            let base = i * n;
            for &(c, v) in &row {
                let x = &mut self.a[base + c];
                *x -= f * v;
                if x.abs() < DROP_TOL {
                    *x = 0.0;
                }
            }
            self.a[base + j] = 0.0;
        }
        let f = self.d[j];
        if f != 0.0 {
            for &(c, v) in &row {
                self.d[c] -= f * v;
            }
        }
        self.d[j] = 0.0;
    }

    /// Runs pivots until no entering column remains.
    fn optimise(&mut self, cost: &[f64]) -> Result<bool, SimplexError> {
        for _ in 0..4 {
            let mut stall = 0usize;
            loop {
                let (step, gain) = self.step(stall >= STALL_LIMIT)?;
                match step {
                    Step::Optimal => break,
                    Step::Unbounded => return Ok(false),
                    Step::Moved => {
                        if gain > 1e-12 {
                            stall = 0;
                        } else {
                            stall += 1;
                        }
                    }
                }
            }
            // confirm optimality against freshly computed prices
            self.refresh_beta();
            self.reset_costs(cost);
            if self.entering(false).is_none() {
                return Ok(true);
            }
        }
        Err(SimplexError::NumericalFailure(
            "reduced costs keep drifting".into(),
        ))
    }
}

/// Divides a row by its largest coefficient magnitude.
fn equilibrate(row: &Constraint) -> Constraint {
    let big = row.coeffs.iter().fold(0.0f64, |a, &(_, c)| a.max(c.abs()));
    let mut out = row.clone();
    if big > 0.0 && big != 1.0 {
        for (_, c) in &mut out.coeffs {
            *c /= big;
        }
        out.rhs /= big;
    }
    out
}

/// Minimises `cost · x` subject to `rows` and `lower <= x <= upper`.
pub fn solve_lp(
    rows: &[Constraint],
    cost: &[f64],
    lower: &[f64],
    upper: &[f64],
) -> Result<LpResult, SimplexError> {
    let original = rows;
    let scaled: Vec<Constraint> = rows.iter().map(equilibrate).collect();
    let rows = &scaled[..];
    let nv = cost.len();
    let m = rows.len();
    let initial = |j: usize| {
        if lower[j].is_finite() {
            (State::Lower, lower[j])
        } else if upper[j].is_finite() {
            (State::Upper, upper[j])
        } else {
            (State::Zero, 0.0)
        }
    };

    let mut sigma = vec![1.0; m];
    let mut needs_art = vec![false; m];
    let mut residual = vec![0.0; m];
    for (r, row) in rows.iter().enumerate() {
        let res = row.rhs
            - row
                .coeffs
                .iter()
                .map(|&(v, c)| c * initial(v).1)
                .sum::<f64>();
        residual[r] = res;
        let fits = match row.cmp {
            Cmp::Le => res >= 0.0,
            Cmp::Ge => res <= 0.0,
            Cmp::Eq => res == 0.0,
        };
        if !fits {
            needs_art[r] = true;
            sigma[r] = if res < 0.0 { -1.0 } else { 1.0 };
        }
    }
    let arts: Vec<usize> = (0..m).filter(|&r| needs_art[r]).collect();
    let n = nv + m + arts.len();

    let mut a = vec![0.0; m * n];
    let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (r, row) in rows.iter().enumerate() {
        for &(v, c) in &row.coeffs {
            a[r * n + v] += sigma[r] * c;
        }
        a[r * n + nv + r] = sigma[r];
    }
    for j in 0..nv {
        for r in 0..m {
            let v = a[r * n + j];
            if v != 0.0 {
                cols[j].push((r, v));
            }
        }
    }
    for r in 0..m {
        cols[nv + r].push((r, sigma[r]));
    }

    let mut lo = Vec::with_capacity(n);
    let mut up = Vec::with_capacity(n);
    let mut state = Vec::with_capacity(n);
    for j in 0..nv {
        lo.push(lower[j]);
        up.push(upper[j]);
        state.push(initial(j).0);
    }
    for row in rows {
        let (l, u, s) = match row.cmp {
            Cmp::Le => (0.0, f64::INFINITY, State::Lower),
            Cmp::Ge => (f64::NEG_INFINITY, 0.0, State::Upper),
            Cmp::Eq => (0.0, 0.0, State::Lower),
        };
        lo.push(l);
        up.push(u);
        state.push(s);
    }
    let mut basis = vec![0; m];
    let mut beta = vec![0.0; m];
    for r in 0..m {
        basis[r] = nv + r;
        beta[r] = residual[r];
    }
    for (i, &r) in arts.iter().enumerate() {
        let col = nv + m + i;
        a[r * n + col] = 1.0;
        cols[col].push((r, 1.0));
        lo.push(0.0);
        up.push(f64::INFINITY);
        state.push(State::Basic);
        state[nv + r] = if rows[r].cmp == Cmp::Ge {
            State::Upper
        } else {
            State::Lower
        };
        basis[r] = col;
        beta[r] = sigma[r] * residual[r];
    }
    for r in 0..m {
        state[basis[r]] = State::Basic;
    }
    let rhs: Vec<f64> = rows
        .iter()
        .enumerate()
        .map(|(r, row)| sigma[r] * row.rhs)
        .collect();

    let mut t = Tableau {
        m,
        n,
        a,
        beta,
        init_basis: basis.clone(),
        basis,
        state,
        lower: lo,
        upper: up,
        d: Vec::new(),
        cols,
        rhs,
        iterations: 0,
        max_iterations: 50 * (m + n) + 10_000,
    };

    if !arts.is_empty() {
        let mut phase1 = vec![0.0; n];
        for c in phase1.iter_mut().skip(nv + m) {
            *c = 1.0;
        }
        t.reset_costs(&phase1);
        t.optimise(&phase1)?;
        let infeasibility: f64 = (0..m)
            .filter(|&r| t.basis[r] >= nv + m)
            .map(|r| t.beta[r].max(0.0))
            .sum();
        if infeasibility > FEAS_TOL {
            return Ok(LpResult {
                status: LpStatus::Infeasible,
                x: Vec::new(),
                objective: f64::NAN,
                iterations: t.iterations,
            });
        }
        for j in nv + m..n {
            t.upper[j] = 0.0;
            if t.state[j] != State::Basic {
                t.state[j] = State::Lower;
            }
        }
    }

    let mut full_cost = vec![0.0; n];
    full_cost[..nv].copy_from_slice(cost);
    t.reset_costs(&full_cost);
    if !t.optimise(&full_cost)? {
        return Ok(LpResult {
            status: LpStatus::Unbounded,
            x: Vec::new(),
            objective: f64::NEG_INFINITY,
            iterations: t.iterations,
        });
    }

    let mut x = vec![0.0; nv];
    for (j, xj) in x.iter_mut().enumerate() {
        if t.state[j] != State::Basic {
            *xj = t.value(j);
        }
    }
    for r in 0..m {
        let j = t.basis[r];
        let v = t.beta[r];
        if j < nv {
            x[j] = v;
        } else if j >= nv + m && v.abs() > FEAS_TOL {
            return Err(SimplexError::NumericalFailure(format!(
                "artificial left at {v}"
            )));
        }
    }
    for j in 0..nv {
        if x[j] < lower[j] - FEAS_TOL || x[j] > upper[j] + FEAS_TOL {
            return Err(SimplexError::NumericalFailure(format!(
                "variable {j} = {} outside [{}, {}]",
                x[j], lower[j], upper[j]
            )));
        }
        x[j] = x[j].clamp(lower[j], upper[j]);
    }
    for (r, row) in original.iter().enumerate() {
        let scale = 1.0 + row.rhs.abs();
        if row.violation(&x) > FEAS_TOL * scale {
            return Err(SimplexError::NumericalFailure(format!(
                "row {r} ({}) violated by {}",
                row.name,
                row.violation(&x)
            )));
        }
    }
    let objective = cost.iter().zip(&x).map(|(c, x)| c * x).sum();
    Ok(LpResult {
        status: LpStatus::Optimal,
        x,
        objective,
        iterations: t.iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::offline::model::RowKind;

    fn row(coeffs: &[(usize, f64)], cmp: Cmp, rhs: f64) -> Constraint {
        Constraint {
            name: "r".into(),
            kind: RowKind::SourceTotal,
            coeffs: coeffs.to_vec(),
            cmp,
            rhs,
        }
    }

    #[test]
    fn textbook_maximisation() {
        // max 3x + 5y, x <= 4, 2y <= 12, 3x + 2y <= 18 -> (2, 6), 36
        let rows = [
            row(&[(0, 1.0)], Cmp::Le, 4.0),
            row(&[(1, 2.0)], Cmp::Le, 12.0),
            row(&[(0, 3.0), (1, 2.0)], Cmp::Le, 18.0),
        ];
        let inf = f64::INFINITY;
        let r = solve_lp(&rows, &[-3.0, -5.0], &[0.0, 0.0], &[inf, inf]).unwrap();
        assert_eq!(r.status, LpStatus::Optimal);
        assert!((r.objective + 36.0).abs() < 1e-9);
        assert!((r.x[0] - 2.0).abs() < 1e-9 && (r.x[1] - 6.0).abs() < 1e-9);
    }

    #[test]
    fn equality_and_ge_rows_need_phase_one() {
        // min x + 2y, x + y = 3, x - y >= 1, x <= 2 -> x = 2, y = 1
        let rows = [
            row(&[(0, 1.0), (1, 1.0)], Cmp::Eq, 3.0),
            row(&[(0, 1.0), (1, -1.0)], Cmp::Ge, 1.0),
        ];
        let r = solve_lp(&rows, &[1.0, 2.0], &[0.0, 0.0], &[2.0, 10.0]).unwrap();
        assert_eq!(r.status, LpStatus::Optimal);
        assert!((r.objective - 4.0).abs() < 1e-9);
    }

    #[test]
    fn detects_infeasible_and_unbounded() {
        let rows = [row(&[(0, 1.0)], Cmp::Ge, 5.0)];
        let r = solve_lp(&rows, &[1.0], &[0.0], &[3.0]).unwrap();
        assert_eq!(r.status, LpStatus::Infeasible);
        let rows = [row(&[(0, 1.0), (1, -1.0)], Cmp::Le, 1.0)];
        let inf = f64::INFINITY;
        let r = solve_lp(&rows, &[-1.0, 0.0], &[0.0, 0.0], &[inf, inf]).unwrap();
        assert_eq!(r.status, LpStatus::Unbounded);
    }

    #[test]
    fn degenerate_assignment_polytope() {
        // 4x4 assignment problem, highly degenerate
        let cost = [
            [4.0, 1.0, 3.0, 2.0],
            [2.0, 0.0, 5.0, 3.0],
            [3.0, 2.0, 2.0, 4.0],
            [1.0, 3.0, 2.0, 2.0],
        ];
        let mut rows = Vec::new();
        for i in 0..4 {
            rows.push(row(
                &(0..4).map(|j| (i * 4 + j, 1.0)).collect::<Vec<_>>(),
                Cmp::Eq,
                1.0,
            ));
            rows.push(row(
                &(0..4).map(|j| (j * 4 + i, 1.0)).collect::<Vec<_>>(),
                Cmp::Eq,
                1.0,
            ));
        }
        let c: Vec<f64> = cost.iter().flatten().copied().collect();
        let r = solve_lp(&rows, &c, &[0.0; 16], &[1.0; 16]).unwrap();
        // brute force over permutations
        let mut best = f64::INFINITY;
        let mut perm = [0usize, 1, 2, 3];
        permute(&mut perm, 0, &mut |p| {
            best = best.min((0..4).map(|i| cost[i][p[i]]).sum());
        });
        assert!((r.objective - best).abs() < 1e-9);
    }

    fn permute(p: &mut [usize; 4], at: usize, f: &mut dyn FnMut(&[usize; 4])) {
        if at == p.len() {
            f(p);
            return;
        }
        for i in at..p.len() {
            p.swap(at, i);
            permute(p, at + 1, f);
            p.swap(at, i);
        }
    }
}
