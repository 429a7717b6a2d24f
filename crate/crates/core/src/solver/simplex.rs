//! Dense bounded-variable primal simplex.
//!
//! Every row `a_i x (<=,=,>=) b_i` gets a slack `s_i` with `a_i x + s_i = b_i`
//! and bounds `[0, inf)`, `[0, 0]` or `(-inf, 0]` by sense. Nonbasic columns
//! sit at a finite bound, or at zero when free. Rows whose slack cannot absorb
//! the initial residual get an artificial column; phase one drives those to
//! zero. Pricing is Dantzig's rule, switching to Bland's rule after a run of
//! degenerate pivots.

use super::{LpSolution, LpStatus, SolverError};
use crate::milp::{MilpModel, Sense};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LpOptions {
    pub feasibility_tol: f64,
    pub optimality_tol: f64,
    /// Smallest coefficient accepted as a pivot element.
    pub pivot_tol: f64,
    pub max_iterations: usize,
    /// Consecutive degenerate pivots before switching to Bland's rule.
    pub bland_after: usize,
}

impl Default for LpOptions {
    fn default() -> Self {
        Self {
            feasibility_tol: 1e-7,
            optimality_tol: 1e-9,
            pivot_tol: 1e-10,
            max_iterations: 200_000,
            bland_after: 1000,
        }
    }
}

/// Row data of a model in the shape the simplex consumes.
#[derive(Debug, Clone)]
pub(crate) struct LpData {
    pub n: usize,
    pub rows: Vec<Vec<(usize, f64)>>,
    pub senses: Vec<Sense>,
    pub rhs: Vec<f64>,
    pub cost: Vec<f64>,
    pub constant: f64,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl LpData {
    pub fn from_model(model: &MilpModel) -> Self {
        let cons = model.constraints();
        Self {
            n: model.num_variables(),
            rows: cons
                .iter()
                .map(|c| c.terms.iter().map(|(v, a)| (v.index(), *a)).collect())
                .collect(),
            senses: cons.iter().map(|c| c.sense).collect(),
            rhs: cons.iter().map(|c| c.rhs).collect(),
            cost: model.cost_vector(),
            constant: model.objective_constant(),
            lower: model.variables().iter().map(|v| v.lower).collect(),
            upper: model.variables().iter().map(|v| v.upper).collect(),
        }
    }

    pub fn m(&self) -> usize {
        self.rows.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum State {
    Basic(usize),
    Lower,
    Upper,
    Zero,
}

struct Tableau {
    m: usize,
    width: usize,
    /// `B^-1 [A I Art]`, row-major.
    t: Vec<f64>,
    d: Vec<f64>,
    basis: Vec<usize>,
    state: Vec<State>,
    x: Vec<f64>,
    lo: Vec<f64>,
    up: Vec<f64>,
    cost: Vec<f64>,
    pivots: usize,
    degenerate_run: usize,
}

impl Tableau {
    fn at(&self, i: usize, j: usize) -> f64 {
        self.t[i * self.width + j]
    }

    fn price(&mut self) {
        self.d.copy_from_slice(&self.cost);
        for i in 0..self.m {
            let cb = self.cost[self.basis[i]];
            if cb != 0.0 {
                let row = &self.t[i * self.width..(i + 1) * self.width];
                for (dj, tij) in self.d.iter_mut().zip(row) {
                    *dj -= cb * tij;
                }
            }
        }
    }

    fn entering(&self, opts: &LpOptions, bland: bool) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64, f64)> = None;
        for j in 0..self.width {
            let dj = self.d[j];
            let dir = match self.state[j] {
                State::Basic(_) => continue,
                _ if self.lo[j] == self.up[j] => continue,
                State::Lower if dj < -opts.optimality_tol => 1.0,
                State::Upper if dj > opts.optimality_tol => -1.0,
                State::Zero if dj.abs() > opts.optimality_tol => -dj.signum(),
                _ => continue,
            };
            if bland {
                return Some((j, dir));
            }
            if best.is_none_or(|(_, _, score)| dj.abs() > score) {
                best = Some((j, dir, dj.abs()));
            }
        }
        best.map(|(j, dir, _)| (j, dir))
    }

    /// Returns `Ok(false)` when the step is unbounded.
    fn step(&mut self, j: usize, dir: f64, opts: &LpOptions, bland: bool) -> Result<bool, SolverError> {
        let mut theta = if self.lo[j].is_finite() && self.up[j].is_finite() {
            self.up[j] - self.lo[j]
        } else {
            f64::INFINITY
        };
        let mut leave: Option<(usize, bool)> = None;
        let mut leave_mag = 0.0;
        for i in 0..self.m {
            let a = self.at(i, j);
            if a.abs() <= 1e-9 {
                continue;
            }
            let b = self.basis[i];
            let rate = -dir * a;
            let (limit, to_upper) = if rate < 0.0 {
                if !self.lo[b].is_finite() {
                    continue;
                }
                (((self.x[b] - self.lo[b]) / -rate).max(0.0), false)
            } else {
                if !self.up[b].is_finite() {
                    continue;
                }
                (((self.up[b] - self.x[b]) / rate).max(0.0), true)
            };
            let better = match leave {
                None => limit < theta,
                Some((r, _)) => {
                    if limit < theta - 1e-12 {
                        true
                    } else if limit <= theta + 1e-12 {
                        if bland {
                            b < self.basis[r]
                        } else {
                            a.abs() > leave_mag
                        }
                    } else {
                        false
                    }
                }
            };
            if better {
                theta = limit;
                leave = Some((i, to_upper));
                leave_mag = a.abs();
            }
        }
        if theta == f64::INFINITY {
            return Ok(false);
        }

        for i in 0..self.m {
            let a = self.at(i, j);
            if a != 0.0 {
                let b = self.basis[i];
                self.x[b] -= dir * a * theta;
            }
        }
        self.x[j] += dir * theta;
        if theta <= 1e-12 {
            self.degenerate_run += 1;
        } else {
            self.degenerate_run = 0;
        }

        match leave {
            None => {
                // bound flip
                self.state[j] = if dir > 0.0 { State::Upper } else { State::Lower };
                self.x[j] = if dir > 0.0 { self.up[j] } else { self.lo[j] };
            }
            Some((r, to_upper)) => {
                let b = self.basis[r];
                self.x[b] = if to_upper { self.up[b] } else { self.lo[b] };
                self.state[b] = if to_upper { State::Upper } else { State::Lower };
                self.pivot(r, j, opts)?;
            }
        }
        self.pivots += 1;
        Ok(true)
    }

    fn pivot(&mut self, r: usize, j: usize, opts: &LpOptions) -> Result<(), SolverError> {
        let w = self.width;
        let p = self.at(r, j);
        if p.abs() < opts.pivot_tol {
            return Err(SolverError::NumericalInstability { pivot: p });
        }
        let inv = 1.0 / p;
        for v in &mut self.t[r * w..(r + 1) * w] {
            *v *= inv;
        }
        let pivot_row: Vec<f64> = self.t[r * w..(r + 1) * w].to_vec();
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.t[i * w + j];
            if f != 0.0 {
                for (v, pr) in self.t[i * w..(i + 1) * w].iter_mut().zip(&pivot_row) {
                    *v -= f * pr;
                }
                self.t[i * w + j] = 0.0;
            }
        }
        let dj = self.d[j];
        if dj != 0.0 {
            for (v, pr) in self.d.iter_mut().zip(&pivot_row) {
                *v -= dj * pr;
            }
            self.d[j] = 0.0;
        }
        self.basis[r] = j;
        self.state[j] = State::Basic(r);
        Ok(())
    }

    /// Runs simplex iterations on the current cost vector.
    fn optimize(&mut self, opts: &LpOptions, budget: &mut usize) -> Result<bool, SolverError> {
        self.price();
        loop {
            let bland = self.degenerate_run >= opts.bland_after;
            let Some((j, dir)) = self.entering(opts, bland) else {
                return Ok(true);
            };
            if *budget == 0 {
                return Err(SolverError::IterationLimit);
            }
            *budget -= 1;
            if !self.step(j, dir, opts, bland)? {
                return Ok(false);
            }
        }
    }
}

/// Solves the LP relaxation of `data` with the given column bounds.
pub(crate) fn solve_bounded(
    data: &LpData,
    lower: &[f64],
    upper: &[f64],
    opts: &LpOptions,
) -> Result<LpSolution, SolverError> {
    let n = data.n;
    let m = data.m();

    let mut x = vec![0.0; n];
    let mut state = vec![State::Zero; n];
    for j in 0..n {
        if lower[j] > upper[j] {
            return Ok(LpSolution::infeasible(n, m));
        }
        if lower[j].is_finite() {
            x[j] = lower[j];
            state[j] = State::Lower;
        } else if upper[j].is_finite() {
            x[j] = upper[j];
            state[j] = State::Upper;
        }
    }

    // rows needing an artificial, with the sign of the residual
    let mut slack_lo = Vec::with_capacity(m);
    let mut slack_up = Vec::with_capacity(m);
    let mut residual = Vec::with_capacity(m);
    let mut artificial: Vec<Option<f64>> = Vec::with_capacity(m);
    for i in 0..m {
        let (lo, up) = match data.senses[i] {
            Sense::Le => (0.0, f64::INFINITY),
            Sense::Eq => (0.0, 0.0),
            Sense::Ge => (f64::NEG_INFINITY, 0.0),
        };
        let r = data.rhs[i] - data.rows[i].iter().map(|(j, a)| a * x[*j]).sum::<f64>();
        slack_lo.push(lo);
        slack_up.push(up);
        residual.push(r);
        artificial.push(if r < lo {
            Some(-1.0)
        } else if r > up {
            Some(1.0)
        } else {
            None
        });
    }
    let n_art = artificial.iter().filter(|a| a.is_some()).count();
    let width = n + m + n_art;

    let mut tab = Tableau {
        m,
        width,
        t: vec![0.0; m * width],
        d: vec![0.0; width],
        basis: vec![0; m],
        state,
        x,
        lo: lower.to_vec(),
        up: upper.to_vec(),
        cost: vec![0.0; width],
        pivots: 0,
        degenerate_run: 0,
    };
    tab.state.resize(width, State::Lower);
    tab.x.resize(width, 0.0);
    tab.lo.extend_from_slice(&slack_lo);
    tab.up.extend_from_slice(&slack_up);
    tab.lo.resize(width, 0.0);
    tab.up.resize(width, f64::INFINITY);

    let mut next_art = n + m;
    for i in 0..m {
        let row = &mut tab.t[i * width..(i + 1) * width];
        let scale = artificial[i].unwrap_or(1.0);
        for (j, a) in &data.rows[i] {
            row[*j] += scale * a;
        }
        row[n + i] = scale;
        let slack = n + i;
        match artificial[i] {
            None => {
                tab.basis[i] = slack;
                tab.state[slack] = State::Basic(i);
                tab.x[slack] = residual[i];
            }
            Some(sign) => {
                let bound = if sign < 0.0 { slack_lo[i] } else { slack_up[i] };
                tab.x[slack] = bound;
                tab.state[slack] = if sign < 0.0 { State::Lower } else { State::Upper };
                row[next_art] = 1.0;
                tab.basis[i] = next_art;
                tab.state[next_art] = State::Basic(i);
                tab.x[next_art] = (residual[i] - bound).abs();
                tab.cost[next_art] = 1.0;
                next_art += 1;
            }
        }
    }

    let mut budget = opts.max_iterations;
    let tol = opts.feasibility_tol * (1.0 + data.rhs.iter().fold(0.0f64, |a, b| a.max(b.abs())));

    if n_art > 0 {
        if !tab.optimize(opts, &mut budget)? {
            return Err(SolverError::NumericalInstability { pivot: 0.0 });
        }
        let infeasibility: f64 = (n + m..width).map(|j| tab.x[j]).sum();
        if infeasibility > tol {
            return Ok(LpSolution {
                pivots: tab.pivots,
                ..LpSolution::infeasible(n, m)
            });
        }
        for j in n + m..width {
            tab.up[j] = 0.0;
            tab.cost[j] = 0.0;
            if !matches!(tab.state[j], State::Basic(_)) {
                tab.state[j] = State::Lower;
                tab.x[j] = 0.0;
            }
        }
        // pivot remaining artificials out where a structural or slack can replace them
        for r in 0..m {
            let b = tab.basis[r];
            if b < n + m {
                continue;
            }
            tab.x[b] = 0.0;
            let candidate = (0..n + m)
                .filter(|&j| !matches!(tab.state[j], State::Basic(_)))
                .max_by(|&a, &c| tab.at(r, a).abs().total_cmp(&tab.at(r, c).abs()).then(c.cmp(&a)));
            if let Some(j) = candidate {
                if tab.at(r, j).abs() > 1e-7 {
                    tab.state[b] = State::Lower;
                    tab.pivot(r, j, opts)?;
                }
            }
        }
    }

    for j in 0..n {
        tab.cost[j] = data.cost[j];
    }
    tab.degenerate_run = 0;
    let bounded = tab.optimize(opts, &mut budget)?;

    // refresh basic values from B^-1 (b - N x_N) to shed accumulated drift
    let mut r = data.rhs.clone();
    let nonbasic = |j: usize| !matches!(tab.state[j], State::Basic(_));
    for (i, row) in data.rows.iter().enumerate() {
        for (j, a) in row {
            if nonbasic(*j) {
                r[i] -= a * tab.x[*j];
            }
        }
        if nonbasic(n + i) {
            r[i] -= tab.x[n + i];
        }
    }
    for row in 0..m {
        let b = tab.basis[row];
        tab.x[b] = (0..m).map(|i| tab.at(row, n + i) * r[i]).sum();
    }

    let dual_values: Vec<f64> = (0..m)
        .map(|i| (0..m).map(|row| tab.cost[tab.basis[row]] * tab.at(row, n + i)).sum())
        .collect();

    let values = tab.x[..n].to_vec();
    let objective = data.constant + values.iter().zip(&data.cost).map(|(v, c)| v * c).sum::<f64>();
    Ok(LpSolution {
        status: if bounded {
            LpStatus::Optimal
        } else {
            LpStatus::Unbounded
        },
        values,
        objective: if bounded { objective } else { f64::NEG_INFINITY },
        dual_values,
        pivots: tab.pivots,
    })
}
