//! Dense two-phase tableau simplex with Bland's anti-cycling rule.
//!
//! Built for the tiny LP relaxations inside branch-and-bound (at most a few
//! hundred rows), so the implementation favors robustness and determinism
//! over speed: dense tableau, Bland pivoting, fixed tolerances. Branching
//! enters through variable-bound updates, never through new rows.

use crate::error::{CoreError, Result};

/// Pivot tolerance. Entries below this are treated as zero.
pub const PIVOT_TOL: f64 = 1e-9;
/// Feasibility tolerance for returned solutions.
pub const FEAS_TOL: f64 = 1e-7;

const PIVOT_LIMIT: usize = 200_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub sense: Sense,
    pub rhs: f64,
}

/// Maximization LP: max c.x subject to row constraints and box bounds.
#[derive(Debug, Clone)]
pub struct LPProblem {
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone)]
pub struct LPSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective: f64,
}

impl LPProblem {
    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    fn validate(&self) -> Result<()> {
        let n = self.num_vars();
        if self.lower.len() != n {
            return Err(CoreError::DimensionMismatch {
                what: "LP lower bounds",
                expected: n,
                got: self.lower.len(),
            });
        }
        if self.upper.len() != n {
            return Err(CoreError::DimensionMismatch {
                what: "LP upper bounds",
                expected: n,
                got: self.upper.len(),
            });
        }
        for (j, c) in self.objective.iter().enumerate() {
            if !c.is_finite() {
                return Err(CoreError::MalformedProblem(format!(
                    "objective coefficient {j} is not finite"
                )));
            }
        }
        for j in 0..n {
            if !self.lower[j].is_finite() {
                return Err(CoreError::MalformedProblem(format!(
                    "variable {j} has a non-finite lower bound"
                )));
            }
            if self.upper[j].is_nan() || self.upper[j] < self.lower[j] {
                return Err(CoreError::MalformedProblem(format!(
                    "variable {j} has bounds [{}, {}]",
                    self.lower[j], self.upper[j]
                )));
            }
        }
        for (i, row) in self.constraints.iter().enumerate() {
            if row.coeffs.len() != n {
                return Err(CoreError::DimensionMismatch {
                    what: "LP constraint row",
                    expected: n,
                    got: row.coeffs.len(),
                });
            }
            if !row.rhs.is_finite() || row.coeffs.iter().any(|a| !a.is_finite()) {
                return Err(CoreError::MalformedProblem(format!(
                    "constraint {i} has non-finite data"
                )));
            }
        }
        Ok(())
    }

    /// Textual dump for debugging: objective, one constraint per line, bounds.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let terms = |coeffs: &[f64]| {
            coeffs
                .iter()
                .enumerate()
                .filter(|(_, a)| **a != 0.0)
                .map(|(j, a)| format!("{a:+} x{j}"))
                .collect::<Vec<_>>()
                .join(" ")
        };
        out.push_str(&format!("max {}\n", terms(&self.objective)));
        for row in &self.constraints {
            let op = match row.sense {
                Sense::Le => "<=",
                Sense::Ge => ">=",
                Sense::Eq => "=",
            };
            out.push_str(&format!("{} {} {}\n", terms(&row.coeffs), op, row.rhs));
        }
        out.push_str("bounds\n");
        for j in 0..self.num_vars() {
            out.push_str(&format!("{} <= x{j} <= {}\n", self.lower[j], self.upper[j]));
        }
        out
    }

    /// Max violation of any constraint or bound at `x`.
    pub fn violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for j in 0..self.num_vars() {
            worst = worst.max(self.lower[j] - x[j]);
            if self.upper[j].is_finite() {
                worst = worst.max(x[j] - self.upper[j]);
            }
        }
        for row in &self.constraints {
            let lhs: f64 = row.coeffs.iter().zip(x).map(|(a, v)| a * v).sum();
            let v = match row.sense {
                Sense::Le => lhs - row.rhs,
                Sense::Ge => row.rhs - lhs,
                Sense::Eq => (lhs - row.rhs).abs(),
            };
            worst = worst.max(v);
        }
        worst
    }
}

struct Tableau {
    /// m rows of [coeffs..., rhs].
    rows: Vec<Vec<f64>>,
    /// Objective row, same width; last entry is the current objective value.
    obj: Vec<f64>,
    /// Basic variable (column index) per row.
    basis: Vec<usize>,
    ncols: usize,
    pivots: usize,
}

impl Tableau {
    fn rhs(&self, i: usize) -> f64 {
        self.rows[i][self.ncols]
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let piv = self.rows[row][col];
        for v in self.rows[row].iter_mut() {
            *v /= piv;
        }
        let pivot_row = self.rows[row].clone();
        for (i, r) in self.rows.iter_mut().enumerate() {
            if i == row {
                continue;
            }
            let factor = r[col];
            if factor != 0.0 {
                for (v, p) in r.iter_mut().zip(&pivot_row) {
                    *v -= factor * p;
                }
            }
        }
        let factor = self.obj[col];
        if factor != 0.0 {
            for (v, p) in self.obj.iter_mut().zip(&pivot_row) {
                *v -= factor * p;
            }
        }
        self.basis[row] = col;
        self.pivots += 1;
    }

    /// Runs simplex to optimality on the current objective row.
    /// `allowed` masks columns that may enter the basis.
    fn optimize(&mut self, allowed: &[bool]) -> Result<LpStatus> {
        loop {
            if self.pivots > PIVOT_LIMIT {
                return Err(CoreError::PivotLimit(PIVOT_LIMIT));
            }
            // Bland: entering column is the lowest-index improving one.
            let entering = (0..self.ncols)
                .find(|&j| allowed[j] && self.obj[j] < -PIVOT_TOL);
            let Some(col) = entering else {
                return Ok(LpStatus::Optimal);
            };
            // Ratio test; ties broken by smallest basic variable index (Bland).
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.rows.len() {
                let a = self.rows[i][col];
                if a > PIVOT_TOL {
                    let ratio = self.rhs(i) / a;
                    match leave {
                        None => leave = Some((i, ratio)),
                        Some((bi, br)) => {
                            if ratio < br - PIVOT_TOL
                                || ((ratio - br).abs() <= PIVOT_TOL
                                    && self.basis[i] < self.basis[bi])
                            {
                                leave = Some((i, ratio));
                            }
                        }
                    }
                }
            }
            match leave {
                Some((row, _)) => self.pivot(row, col),
                None => return Ok(LpStatus::Unbounded),
            }
        }
    }
}

/// Solves the LP by two-phase dense simplex. Deterministic: identical input
/// produces the identical pivot sequence and solution.
pub fn solve_lp(p: &LPProblem) -> Result<LPSolution> {
    p.validate()?;
    let n = p.num_vars();

    // Split off fixed variables and shift the rest to a zero lower bound.
    let mut free_idx = Vec::new(); // original index per tableau structural var
    for j in 0..n {
        if p.upper[j] - p.lower[j] > PIVOT_TOL {
            free_idx.push(j);
        }
    }
    let nf = free_idx.len();

    // Rows: original constraints with fixed/shifted contributions folded into
    // the rhs, plus one upper-bound row per free variable with a finite range.
    struct Row {
        coeffs: Vec<f64>,
        sense: Sense,
        rhs: f64,
    }
    let mut rows: Vec<Row> = Vec::new();
    for c in &p.constraints {
        let mut rhs = c.rhs;
        for j in 0..n {
            rhs -= c.coeffs[j] * p.lower[j];
        }
        let coeffs: Vec<f64> = free_idx.iter().map(|&j| c.coeffs[j]).collect();
        rows.push(Row {
            coeffs,
            sense: c.sense,
            rhs,
        });
    }
    for (t, &j) in free_idx.iter().enumerate() {
        if p.upper[j].is_finite() {
            let mut coeffs = vec![0.0; nf];
            coeffs[t] = 1.0;
            rows.push(Row {
                coeffs,
                sense: Sense::Le,
                rhs: p.upper[j] - p.lower[j],
            });
        }
    }
    // Normalize to nonnegative rhs.
    for r in rows.iter_mut() {
        if r.rhs < 0.0 {
            for a in r.coeffs.iter_mut() {
                *a = -*a;
            }
            r.rhs = -r.rhs;
            r.sense = match r.sense {
                Sense::Le => Sense::Ge,
                Sense::Ge => Sense::Le,
                Sense::Eq => Sense::Eq,
            };
        }
    }

    let m = rows.len();
    // Column layout: structural | slack/surplus | artificial.
    let n_slack = rows
        .iter()
        .filter(|r| r.sense != Sense::Eq)
        .count();
    let n_art = rows.iter().filter(|r| r.sense != Sense::Le).count();
    let ncols = nf + n_slack + n_art;

    let mut tab = Tableau {
        rows: vec![vec![0.0; ncols + 1]; m],
        obj: vec![0.0; ncols + 1],
        basis: vec![0; m],
        ncols,
        pivots: 0,
    };
    let mut slack_at = nf;
    let mut art_at = nf + n_slack;
    let mut art_cols = Vec::new();
    for (i, r) in rows.iter().enumerate() {
        tab.rows[i][..nf].copy_from_slice(&r.coeffs);
        tab.rows[i][ncols] = r.rhs;
        match r.sense {
            Sense::Le => {
                tab.rows[i][slack_at] = 1.0;
                tab.basis[i] = slack_at;
                slack_at += 1;
            }
            Sense::Ge => {
                tab.rows[i][slack_at] = -1.0;
                slack_at += 1;
                tab.rows[i][art_at] = 1.0;
                tab.basis[i] = art_at;
                art_cols.push(art_at);
                art_at += 1;
            }
            Sense::Eq => {
                tab.rows[i][art_at] = 1.0;
                tab.basis[i] = art_at;
                art_cols.push(art_at);
                art_at += 1;
            }
        }
    }

    let allowed_all: Vec<bool> = (0..ncols).map(|_| true).collect();
    let mut allowed_no_art = allowed_all.clone();
    for &c in &art_cols {
        allowed_no_art[c] = false;
    }

    // Phase 1: minimize the artificial sum (objective row = sum of artificial
    // rows, negated at the artificial columns themselves).
    if !art_cols.is_empty() {
        for j in 0..=ncols {
            tab.obj[j] = 0.0;
        }
        for (i, r) in tab.rows.iter().enumerate() {
            if art_cols.contains(&tab.basis[i]) {
                for j in 0..=ncols {
                    tab.obj[j] -= r[j];
                }
            }
        }
        for &c in &art_cols {
            tab.obj[c] = 0.0;
        }
        tab.optimize(&allowed_no_art)?;
        let infeas = -tab.obj[ncols];
        if infeas > FEAS_TOL {
            return Ok(LPSolution {
                status: LpStatus::Infeasible,
                x: Vec::new(),
                objective: f64::NEG_INFINITY,
            });
        }
        // Pivot any artificial still basic (at zero) out on a structural
        // column; an all-zero row is redundant and can stay inert.
        for i in 0..m {
            if art_cols.contains(&tab.basis[i]) {
                if let Some(col) =
                    (0..ncols).find(|&j| allowed_no_art[j] && tab.rows[i][j].abs() > PIVOT_TOL)
                {
                    tab.pivot(i, col);
                }
            }
        }
    }

    // Phase 2: true objective over the shifted variables.
    for j in 0..=ncols {
        tab.obj[j] = 0.0;
    }
    for (t, &j) in free_idx.iter().enumerate() {
        tab.obj[t] = -p.objective[j];
    }
    for i in 0..m {
        let b = tab.basis[i];
        let coeff = -tab.obj[b];
        if coeff != 0.0 {
            let row = tab.rows[i].clone();
            for (v, r) in tab.obj.iter_mut().zip(&row) {
                *v += coeff * r;
            }
            tab.obj[b] = 0.0;
        }
    }
    let status = tab.optimize(&allowed_no_art)?;
    if status == LpStatus::Unbounded {
        return Ok(LPSolution {
            status,
            x: Vec::new(),
            objective: f64::INFINITY,
        });
    }

    let mut x: Vec<f64> = p.lower.clone();
    for (i, &b) in tab.basis.iter().enumerate() {
        if b < nf {
            x[free_idx[b]] += tab.rhs(i);
        }
    }
    let objective: f64 = p.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
    debug_assert!(p.violation(&x) <= FEAS_TOL, "simplex returned infeasible x");
    Ok(LPSolution {
        status: LpStatus::Optimal,
        x,
        objective,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bounded(objective: Vec<f64>, constraints: Vec<Constraint>, n: usize) -> LPProblem {
        LPProblem {
            objective,
            constraints,
            lower: vec![0.0; n],
            upper: vec![1.0; n],
        }
    }

    #[test]
    fn maximize_single_variable() {
        let p = bounded(vec![1.0], vec![], 1);
        let s = solve_lp(&p).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.x[0] - 1.0).abs() < 1e-9);
        assert!((s.objective - 1.0).abs() < 1e-9);
    }

    #[test]
    fn infeasible_box() {
        let p = LPProblem {
            objective: vec![1.0],
            constraints: vec![
                Constraint {
                    coeffs: vec![1.0],
                    sense: Sense::Ge,
                    rhs: 1.0,
                },
                Constraint {
                    coeffs: vec![1.0],
                    sense: Sense::Le,
                    rhs: 0.0,
                },
            ],
            lower: vec![0.0],
            upper: vec![2.0],
        };
        assert_eq!(solve_lp(&p).unwrap().status, LpStatus::Infeasible);
    }

    #[test]
    fn unbounded_direction() {
        let p = LPProblem {
            objective: vec![1.0],
            constraints: vec![],
            lower: vec![0.0],
            upper: vec![f64::INFINITY],
        };
        assert_eq!(solve_lp(&p).unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn equality_and_mixed_senses() {
        // max x+y st x+y = 1.5, x-y <= 0.2, x,y in [0,1]
        let p = LPProblem {
            objective: vec![1.0, 1.0],
            constraints: vec![
                Constraint {
                    coeffs: vec![1.0, 1.0],
                    sense: Sense::Eq,
                    rhs: 1.5,
                },
                Constraint {
                    coeffs: vec![1.0, -1.0],
                    sense: Sense::Le,
                    rhs: 0.2,
                },
            ],
            lower: vec![0.0, 0.0],
            upper: vec![1.0, 1.0],
        };
        let s = solve_lp(&p).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective - 1.5).abs() < 1e-8);
        assert!(p.violation(&s.x) <= FEAS_TOL);
    }

    #[test]
    fn fixed_variables_are_eliminated() {
        // x fixed at 1 forces the edge constraint; y should drop to 0.
        let p = LPProblem {
            objective: vec![-1.0, -1.0],
            constraints: vec![Constraint {
                coeffs: vec![1.0, 1.0],
                sense: Sense::Ge,
                rhs: 1.0,
            }],
            lower: vec![1.0, 0.0],
            upper: vec![1.0, 1.0],
        };
        let s = solve_lp(&p).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.x[0] - 1.0).abs() < 1e-9);
        assert!(s.x[1].abs() < 1e-9);
        assert!((s.objective + 1.0).abs() < 1e-9);
    }

    #[test]
    fn determinism_same_input_same_solution() {
        let p = bounded(
            vec![-1.0, -1.0, -1.0],
            vec![
                Constraint {
                    coeffs: vec![1.0, 1.0, 0.0],
                    sense: Sense::Ge,
                    rhs: 1.0,
                },
                Constraint {
                    coeffs: vec![0.0, 1.0, 1.0],
                    sense: Sense::Ge,
                    rhs: 1.0,
                },
            ],
            3,
        );
        let a = solve_lp(&p).unwrap();
        let b = solve_lp(&p).unwrap();
        assert_eq!(a.x, b.x);
        assert_eq!(a.objective, b.objective);
    }

    #[test]
    fn dump_contains_all_sections() {
        let p = bounded(
            vec![-1.0, -1.0],
            vec![Constraint {
                coeffs: vec![1.0, 1.0],
                sense: Sense::Ge,
                rhs: 1.0,
            }],
            2,
        );
        let d = p.dump();
        assert!(d.contains("max"));
        assert!(d.contains(">= 1"));
        assert!(d.contains("bounds"));
    }
}
