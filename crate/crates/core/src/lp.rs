//! Dense two-phase primal simplex with Bland's anti-cycling rule.
//!
//! Every linear program in this crate has at most a few hundred rows, so the
//! solver keeps a full tableau and re-solves from scratch.

use thiserror::Error;

const PIVOT_EPS: f64 = 1e-11;
const COST_EPS: f64 = 1e-11;
const FEAS_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cmp {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    NonNegative,
    Free,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("linear program is infeasible (phase-one optimum {0:e})")]
    Infeasible(f64),
    #[error("linear program is unbounded")]
    Unbounded,
    #[error("simplex did not terminate within {0} pivots")]
    IterationLimit(usize),
}

/// `maximize c·x` subject to linear rows.
#[derive(Debug, Clone)]
pub struct LinearProgram {
    objective: Vec<f64>,
    kinds: Vec<VarKind>,
    rows: Vec<(Vec<f64>, Cmp, f64)>,
    max_pivots: usize,
    minimizing: bool,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub value: f64,
    pub x: Vec<f64>,
    pub pivots: usize,
}

impl LinearProgram {
    /// A maximisation over `objective.len()` non-negative variables.
    pub fn maximize(objective: Vec<f64>) -> Self {
        let n = objective.len();
        LinearProgram { objective, kinds: vec![VarKind::NonNegative; n], rows: Vec::new(), max_pivots: 200_000, minimizing: false }
    }

    /// A minimisation, solved as the maximisation of `-objective`.
    pub fn minimize(objective: Vec<f64>) -> Self {
        let mut lp = Self::maximize(objective.into_iter().map(|c| -c).collect());
        lp.minimizing = true;
        lp
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn set_kind(&mut self, var: usize, kind: VarKind) -> &mut Self {
        self.kinds[var] = kind;
        self
    }

    pub fn add_row(&mut self, coeffs: Vec<f64>, cmp: Cmp, rhs: f64) -> &mut Self {
        assert_eq!(coeffs.len(), self.objective.len(), "row width mismatch");
        self.rows.push((coeffs, cmp, rhs));
        self
    }

    /// Adds `Σ coeff·x_var  cmp  rhs` from a sparse list.
    pub fn add_sparse_row(&mut self, entries: &[(usize, f64)], cmp: Cmp, rhs: f64) -> &mut Self {
        let mut coeffs = vec![0.0; self.objective.len()];
        for &(j, a) in entries {
            coeffs[j] += a;
        }
        self.add_row(coeffs, cmp, rhs)
    }

    pub fn with_max_pivots(mut self, max_pivots: usize) -> Self {
        self.max_pivots = max_pivots;
        self
    }

    /// Solves the program. The returned objective value is in the caller's
    /// sense (a minimisation built with [`LinearProgram::minimize`] reports
    /// the minimum).
    pub fn solve(&self) -> Result<LpSolution, LpError> {
        let sign = if self.minimizing { -1.0 } else { 1.0 };
        let sol = self.solve_max()?;
        Ok(LpSolution { value: sign * sol.value, ..sol })
    }

    fn solve_max(&self) -> Result<LpSolution, LpError> {
        // column layout: structural columns (free vars split into +/-), then
        // slack/surplus, then artificials
        let mut col_of: Vec<(usize, Option<usize>)> = Vec::with_capacity(self.objective.len());
        let mut n_struct = 0;
        for kind in &self.kinds {
            match kind {
                VarKind::NonNegative => {
                    col_of.push((n_struct, None));
                    n_struct += 1;
                }
                VarKind::Free => {
                    col_of.push((n_struct, Some(n_struct + 1)));
                    n_struct += 2;
                }
            }
        }
        let m = self.rows.len();
        let n_slack = self.rows.iter().filter(|r| r.1 != Cmp::Eq).count();
        let mut normalized: Vec<(Vec<f64>, Cmp, f64)> = Vec::with_capacity(m);
        for (coeffs, cmp, rhs) in &self.rows {
            let mut row = vec![0.0; n_struct];
            for (j, &a) in coeffs.iter().enumerate() {
                let (p, q) = col_of[j];
                row[p] += a;
                if let Some(q) = q {
                    row[q] -= a;
                }
            }
            let (row, cmp, rhs) = if *rhs < 0.0 {
                let flipped = match cmp {
                    Cmp::Le => Cmp::Ge,
                    Cmp::Ge => Cmp::Le,
                    Cmp::Eq => Cmp::Eq,
                };
                (row.into_iter().map(|a| -a).collect(), flipped, -rhs)
            } else {
                (row, *cmp, *rhs)
            };
            normalized.push((row, cmp, rhs));
        }
        let n_art = normalized.iter().filter(|r| r.1 != Cmp::Le).count();
        let n_cols = n_struct + n_slack + n_art;
        let width = n_cols + 1;
        let mut tab = vec![0.0; m * width];
        let mut basis = vec![0usize; m];
        let mut slack = n_struct;
        let mut art = n_struct + n_slack;
        for (i, (row, cmp, rhs)) in normalized.iter().enumerate() {
            let r = &mut tab[i * width..(i + 1) * width];
            r[..n_struct].copy_from_slice(row);
            r[n_cols] = *rhs;
            match cmp {
                Cmp::Le => {
                    r[slack] = 1.0;
                    basis[i] = slack;
                    slack += 1;
                }
                Cmp::Ge => {
                    r[slack] = -1.0;
                    slack += 1;
                    r[art] = 1.0;
                    basis[i] = art;
                    art += 1;
                }
                Cmp::Eq => {
                    r[art] = 1.0;
                    basis[i] = art;
                    art += 1;
                }
            }
        }
        let mut t = Tableau { m, n_cols, width, tab, basis, allowed: vec![true; n_cols], pivots: 0 };

        if n_art > 0 {
            let mut cost = vec![0.0; n_cols];
            for c in cost.iter_mut().skip(n_struct + n_slack) {
                *c = -1.0;
            }
            let phase_one = t.optimize(&cost, self.max_pivots)?;
            if phase_one < -FEAS_EPS {
                return Err(LpError::Infeasible(phase_one));
            }
            t.drive_out_artificials(n_struct + n_slack);
            for j in (n_struct + n_slack)..n_cols {
                t.allowed[j] = false;
            }
        }

        let mut cost = vec![0.0; n_cols];
        for (j, &c) in self.objective.iter().enumerate() {
            let (p, q) = col_of[j];
            cost[p] = c;
            if let Some(q) = q {
                cost[q] = -c;
            }
        }
        let value = t.optimize(&cost, self.max_pivots)?;
        let mut values = vec![0.0; n_cols];
        for i in 0..t.m {
            values[t.basis[i]] = t.tab[i * t.width + t.n_cols];
        }
        let x = col_of
            .iter()
            .map(|&(p, q)| values[p] - q.map_or(0.0, |q| values[q]))
            .collect();
        Ok(LpSolution { value, x, pivots: t.pivots })
    }
}

struct Tableau {
    m: usize,
    n_cols: usize,
    width: usize,
    tab: Vec<f64>,
    basis: Vec<usize>,
    allowed: Vec<bool>,
    pivots: usize,
}

impl Tableau {
    /// Maximises `cost·x` from the current basic feasible solution.
    fn optimize(&mut self, cost: &[f64], max_pivots: usize) -> Result<f64, LpError> {
        // reduced-cost row in "z - Σ r_j x_j" form: obj[j] = -r_j, obj[n] = z
        let mut obj = vec![0.0; self.width];
        for (j, &c) in cost.iter().enumerate() {
            obj[j] = -c;
        }
        for i in 0..self.m {
            let cb = cost[self.basis[i]];
            if cb != 0.0 {
                let row = &self.tab[i * self.width..(i + 1) * self.width];
                for (o, &a) in obj.iter_mut().zip(row) {
                    *o += cb * a;
                }
            }
        }
        loop {
            // Bland: lowest-index improving column
            let Some(col) = (0..self.n_cols).find(|&j| self.allowed[j] && obj[j] < -COST_EPS) else {
                return Ok(obj[self.n_cols]);
            };
            let mut best: Option<(usize, f64)> = None;
            for i in 0..self.m {
                let a = self.tab[i * self.width + col];
                if a > PIVOT_EPS {
                    let ratio = self.tab[i * self.width + self.n_cols] / a;
                    best = match best {
                        None => Some((i, ratio)),
                        Some((bi, br)) => {
                            let tie = (ratio - br).abs() <= 1e-12 * (1.0 + br.abs());
                            if ratio < br && !tie || tie && self.basis[i] < self.basis[bi] {
                                Some((i, ratio))
                            } else {
                                Some((bi, br))
                            }
                        }
                    };
                }
            }
            let Some((row, _)) = best else {
                return Err(LpError::Unbounded);
            };
            self.pivot(row, col, Some(&mut obj));
            if self.pivots > max_pivots {
                return Err(LpError::IterationLimit(max_pivots));
            }
        }
    }

    fn pivot(&mut self, row: usize, col: usize, obj: Option<&mut Vec<f64>>) {
        let w = self.width;
        let p = self.tab[row * w + col];
        for v in &mut self.tab[row * w..(row + 1) * w] {
            *v /= p;
        }
        let pivot_row: Vec<f64> = self.tab[row * w..(row + 1) * w].to_vec();
        for i in 0..self.m {
            if i == row {
                continue;
            }
            let f = self.tab[i * w + col];
            if f != 0.0 {
                for (v, &a) in self.tab[i * w..(i + 1) * w].iter_mut().zip(&pivot_row) {
                    *v -= f * a;
                }
                self.tab[i * w + col] = 0.0;
            }
        }
        if let Some(obj) = obj {
            let f = obj[col];
            if f != 0.0 {
                for (v, &a) in obj.iter_mut().zip(&pivot_row) {
                    *v -= f * a;
                }
                obj[col] = 0.0;
            }
        }
        // clamp tiny negative right-hand sides produced by round-off
        for i in 0..self.m {
            let b = &mut self.tab[i * w + self.n_cols];
            if *b < 0.0 && *b > -1e-12 {
                *b = 0.0;
            }
        }
        self.basis[row] = col;
        self.pivots += 1;
    }

    /// After phase one, pivots artificial columns out of the basis or drops
    /// the redundant rows they sit in.
    fn drive_out_artificials(&mut self, first_art: usize) {
        let mut i = 0;
        while i < self.m {
            if self.basis[i] >= first_art {
                let w = self.width;
                let col = (0..first_art).find(|&j| self.tab[i * w + j].abs() > 1e-9);
                match col {
                    Some(j) => {
                        self.pivot(i, j, None);
                        i += 1;
                    }
                    None => {
                        self.tab.drain(i * w..(i + 1) * w);
                        self.basis.remove(i);
                        self.m -= 1;
                    }
                }
            } else {
                i += 1;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn textbook_maximum() {
        // max 3x + 5y, x ≤ 4, 2y ≤ 12, 3x + 2y ≤ 18 → 36 at (2, 6)
        let mut lp = LinearProgram::maximize(vec![3.0, 5.0]);
        lp.add_row(vec![1.0, 0.0], Cmp::Le, 4.0);
        lp.add_row(vec![0.0, 2.0], Cmp::Le, 12.0);
        lp.add_row(vec![3.0, 2.0], Cmp::Le, 18.0);
        let s = lp.solve().unwrap();
        assert!((s.value - 36.0).abs() < 1e-12);
        assert!((s.x[0] - 2.0).abs() < 1e-12 && (s.x[1] - 6.0).abs() < 1e-12);
    }

    #[test]
    fn minimisation_with_equalities_and_free_vars() {
        // min |d| with d free and d = 3 - 5: d = -2 → encoded via p ≥ ±d
        let mut lp = LinearProgram::minimize(vec![0.0, 1.0]);
        lp.set_kind(0, VarKind::Free);
        lp.add_row(vec![1.0, 0.0], Cmp::Eq, -2.0);
        lp.add_row(vec![1.0, -1.0], Cmp::Le, 0.0);
        lp.add_row(vec![-1.0, -1.0], Cmp::Le, 0.0);
        let s = lp.solve().unwrap();
        assert!((s.value - 2.0).abs() < 1e-12, "{}", s.value);
        assert!((s.x[0] + 2.0).abs() < 1e-12);
    }

    #[test]
    fn infeasible_and_unbounded() {
        let mut lp = LinearProgram::maximize(vec![1.0]);
        lp.add_row(vec![1.0], Cmp::Ge, 2.0);
        lp.add_row(vec![1.0], Cmp::Le, 1.0);
        assert!(matches!(lp.solve(), Err(LpError::Infeasible(_))));

        let mut lp = LinearProgram::maximize(vec![1.0, 1.0]);
        lp.add_row(vec![1.0, -1.0], Cmp::Le, 1.0);
        assert_eq!(lp.solve().unwrap_err(), LpError::Unbounded);
    }

    #[test]
    fn redundant_equalities_are_dropped() {
        let mut lp = LinearProgram::maximize(vec![1.0, 2.0]);
        lp.add_row(vec![1.0, 1.0], Cmp::Eq, 1.0);
        lp.add_row(vec![2.0, 2.0], Cmp::Eq, 2.0);
        let s = lp.solve().unwrap();
        assert!((s.value - 2.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_cycling_example_terminates() {
        // Beale's example cycles under the textbook largest-coefficient rule
        let mut lp = LinearProgram::maximize(vec![0.75, -150.0, 0.02, -6.0]);
        lp.add_row(vec![0.25, -60.0, -0.04, 9.0], Cmp::Le, 0.0);
        lp.add_row(vec![0.5, -90.0, -0.02, 3.0], Cmp::Le, 0.0);
        lp.add_row(vec![0.0, 0.0, 1.0, 0.0], Cmp::Le, 1.0);
        let s = lp.solve().unwrap();
        assert!((s.value - 0.05).abs() < 1e-12, "{}", s.value);
    }
}
