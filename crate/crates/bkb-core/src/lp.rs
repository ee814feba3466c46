//! Dense two-phase simplex for small boxed linear programs.
//!
//! Programs maximize a linear objective over variables bounded in
//! `[0, upper]` subject to `<=` and `=` rows. Upper bounds are folded in as
//! explicit rows, so the tableau stays a plain dense matrix. Pivot selection
//! uses Bland's rule throughout (lowest eligible index entering, lowest basic
//! index on ratio ties), which makes the solver deterministic and free of
//! cycling; the programs this crate produces are a few hundred rows at most,
//! so the dense representation is the simple and sufficient choice.

use thiserror::Error;

/// Threshold below which a coefficient counts as zero during pivoting.
const EPS: f64 = 1e-9;
/// A phase-1 optimum worse than this marks the program infeasible.
const INFEASIBILITY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct LpVariable {
    pub name: String,
    /// Inclusive upper bound; the lower bound is always 0.
    pub upper: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    /// Sparse row: (variable index, coefficient). Duplicate indices sum.
    pub coeffs: Vec<(usize, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

/// A maximization program over boxed nonnegative variables.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinearProgram {
    pub variables: Vec<LpVariable>,
    pub constraints: Vec<Constraint>,
    /// Objective coefficients, parallel to `variables`.
    pub objective: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    /// Unreachable when every variable carries a finite upper bound; kept so
    /// a broken caller is reported rather than looped on.
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Variable values; meaningful only when `status == Optimal`.
    pub values: Vec<f64>,
    pub objective: f64,
}

#[derive(Debug, Error, PartialEq)]
pub enum LpError {
    #[error("program has no variables")]
    Empty,
    #[error("objective has {got} coefficients for {vars} variables")]
    ObjectiveMismatch { got: usize, vars: usize },
    #[error("variable {0} has a non-finite or negative upper bound")]
    BadBound(usize),
    #[error("constraint {row} references variable {var} out of range")]
    BadIndex { row: usize, var: usize },
    #[error("constraint {0} contains a non-finite number")]
    NotFinite(usize),
}

impl LinearProgram {
    /// Human-readable listing for debugging: objective, rows, bounds.
    pub fn render_text(&self) -> String {
        let mut out = String::from("maximize ");
        let terms: Vec<String> = self
            .objective
            .iter()
            .enumerate()
            .filter(|(_, &c)| c != 0.0)
            .map(|(j, &c)| format!("{c}*{}", self.variables[j].name))
            .collect();
        out.push_str(if terms.is_empty() { "0" } else { "" });
        out.push_str(&terms.join(" + "));
        out.push_str("\nsubject to\n");
        for c in &self.constraints {
            let lhs: Vec<String> = c
                .coeffs
                .iter()
                .map(|&(j, v)| format!("{v}*{}", self.variables[j].name))
                .collect();
            let rel = match c.relation {
                Relation::Le => "<=",
                Relation::Eq => "=",
            };
            out.push_str(&format!("  {} {rel} {}\n", lhs.join(" + "), c.rhs));
        }
        out.push_str("bounds\n");
        for v in &self.variables {
            out.push_str(&format!("  0 <= {} <= {}\n", v.name, v.upper));
        }
        out
    }

    fn check(&self) -> Result<(), LpError> {
        let n = self.variables.len();
        if n == 0 {
            return Err(LpError::Empty);
        }
        if self.objective.len() != n {
            return Err(LpError::ObjectiveMismatch {
                got: self.objective.len(),
                vars: n,
            });
        }
        for (j, v) in self.variables.iter().enumerate() {
            if !v.upper.is_finite() || v.upper < 0.0 {
                return Err(LpError::BadBound(j));
            }
        }
        for (row, c) in self.constraints.iter().enumerate() {
            if !c.rhs.is_finite() {
                return Err(LpError::NotFinite(row));
            }
            for &(j, v) in &c.coeffs {
                if j >= n {
                    return Err(LpError::BadIndex { row, var: j });
                }
                if !v.is_finite() {
                    return Err(LpError::NotFinite(row));
                }
            }
        }
        if self.objective.iter().any(|c| !c.is_finite()) {
            return Err(LpError::ObjectiveMismatch { got: n, vars: n });
        }
        Ok(())
    }
}

struct Tableau {
    /// m rows of n_total coefficients plus a trailing rhs column.
    rows: Vec<Vec<f64>>,
    /// Basic variable (column index) of each row.
    basis: Vec<usize>,
    /// First artificial column; columns at or past this never re-enter in
    /// phase 2.
    art_start: usize,
    n_total: usize,
}

impl Tableau {
    fn rhs(&self, i: usize) -> f64 {
        self.rows[i][self.n_total]
    }

    fn pivot(&mut self, row: usize, col: usize, zrow: &mut [f64], value: &mut f64) {
        let factor = self.rows[row][col];
        for x in self.rows[row].iter_mut() {
            *x /= factor;
        }
        let pivot_row = self.rows[row].clone();
        for (i, r) in self.rows.iter_mut().enumerate() {
            if i == row {
                continue;
            }
            let f = r[col];
            if f != 0.0 {
                for (x, &p) in r.iter_mut().zip(&pivot_row) {
                    *x -= f * p;
                }
            }
        }
        let f = zrow[col];
        if f != 0.0 {
            *value += f * pivot_row[self.n_total];
            for (z, &p) in zrow.iter_mut().zip(&pivot_row) {
                *z -= f * p;
            }
        }
        self.basis[row] = col;
    }

    /// Runs simplex iterations until no eligible column improves the
    /// objective. Returns false if an improving column has no blocking row
    /// (the program is unbounded in that direction).
    fn optimize(
        &mut self,
        zrow: &mut [f64],
        value: &mut f64,
        enterable: &mut dyn FnMut(usize) -> bool,
    ) -> bool {
        loop {
            // Bland: lowest-index column with positive reduced cost.
            let Some(col) = (0..self.n_total).find(|&j| zrow[j] > EPS && enterable(j)) else {
                return true;
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.rows.len() {
                let a = self.rows[i][col];
                if a > EPS {
                    let ratio = self.rhs(i) / a;
                    let better = match leave {
                        None => true,
                        Some((best_row, best)) => {
                            ratio < best - EPS
                                || (ratio <= best + EPS && self.basis[i] < self.basis[best_row])
                        }
                    };
                    if better {
                        leave = Some((i, ratio));
                    }
                }
            }
            let Some((row, _)) = leave else {
                return false;
            };
            self.pivot(row, col, zrow, value);
        }
    }
}

/// Solves the program. Statuses cover infeasibility; `Err` is reserved for
/// malformed inputs.
pub fn solve(program: &LinearProgram) -> Result<LpSolution, LpError> {
    program.check()?;
    let n = program.variables.len();

    // Gather rows: user constraints first, then one bound row per variable.
    struct Row {
        coeffs: Vec<f64>,
        relation: Relation,
        rhs: f64,
    }
    let mut rows: Vec<Row> = Vec::with_capacity(program.constraints.len() + n);
    for c in &program.constraints {
        let mut dense = vec![0.0; n];
        for &(j, v) in &c.coeffs {
            dense[j] += v;
        }
        rows.push(Row {
            coeffs: dense,
            relation: c.relation,
            rhs: c.rhs,
        });
    }
    for j in 0..n {
        let mut dense = vec![0.0; n];
        dense[j] = 1.0;
        rows.push(Row {
            coeffs: dense,
            relation: Relation::Le,
            rhs: program.variables[j].upper,
        });
    }

    // Normalize to nonnegative rhs; a flipped <= behaves like >= and needs a
    // surplus column plus an artificial.
    #[derive(PartialEq)]
    enum Kind {
        Slack,
        SurplusArtificial,
        Artificial,
    }
    let mut kinds = Vec::with_capacity(rows.len());
    for row in rows.iter_mut() {
        if row.rhs < 0.0 {
            row.rhs = -row.rhs;
            for v in row.coeffs.iter_mut() {
                *v = -*v;
            }
            kinds.push(match row.relation {
                Relation::Le => Kind::SurplusArtificial,
                Relation::Eq => Kind::Artificial,
            });
        } else {
            kinds.push(match row.relation {
                Relation::Le => Kind::Slack,
                Relation::Eq => Kind::Artificial,
            });
        }
    }

    let m = rows.len();
    let n_extra: usize = kinds
        .iter()
        .map(|k| match k {
            Kind::Slack => 1,
            Kind::SurplusArtificial => 2,
            Kind::Artificial => 1,
        })
        .sum();
    let n_art = kinds
        .iter()
        .filter(|k| !matches!(k, Kind::Slack))
        .count();
    let n_total = n + n_extra;
    let art_start = n_total - n_art;

    let mut tableau = Tableau {
        rows: vec![vec![0.0; n_total + 1]; m],
        basis: vec![0; m],
        art_start,
        n_total,
    };
    let mut next_slack = n;
    let mut next_art = art_start;
    for (i, row) in rows.iter().enumerate() {
        tableau.rows[i][..n].copy_from_slice(&row.coeffs);
        tableau.rows[i][n_total] = row.rhs;
        match kinds[i] {
            Kind::Slack => {
                tableau.rows[i][next_slack] = 1.0;
                tableau.basis[i] = next_slack;
                next_slack += 1;
            }
            Kind::SurplusArtificial => {
                tableau.rows[i][next_slack] = -1.0;
                next_slack += 1;
                tableau.rows[i][next_art] = 1.0;
                tableau.basis[i] = next_art;
                next_art += 1;
            }
            Kind::Artificial => {
                tableau.rows[i][next_art] = 1.0;
                tableau.basis[i] = next_art;
                next_art += 1;
            }
        }
    }

    if n_art > 0 {
        // Phase 1: maximize minus the sum of artificials. Reduced costs are
        // priced out against the artificial basis rows.
        let mut zrow = vec![0.0; n_total + 1];
        let mut value = 0.0;
        for i in 0..m {
            if tableau.basis[i] >= art_start {
                for j in 0..n_total {
                    zrow[j] += tableau.rows[i][j];
                }
                value -= tableau.rhs(i);
            }
        }
        for col in art_start..n_total {
            zrow[col] = 0.0;
        }
        // Artificials start basic and may only leave: entering candidates
        // are restricted to structural and slack columns.
        let ok = tableau.optimize(&mut zrow, &mut value, &mut |j| j < art_start);
        debug_assert!(ok, "phase 1 is bounded by construction");
        if value < -INFEASIBILITY_TOL {
            return Ok(LpSolution {
                status: LpStatus::Infeasible,
                values: vec![0.0; n],
                objective: 0.0,
            });
        }
        // Pivot remaining basic artificials out on any structural column;
        // rows that cannot pivot are redundant zero rows and stay.
        for i in 0..m {
            if tableau.basis[i] >= art_start {
                if let Some(col) =
                    (0..art_start).find(|&j| tableau.rows[i][j].abs() > EPS)
                {
                    tableau.pivot(i, col, &mut zrow, &mut value);
                }
            }
        }
    }

    // Phase 2: real objective, artificials banned.
    let mut zrow = vec![0.0; n_total + 1];
    zrow[..n].copy_from_slice(&program.objective);
    let mut value = 0.0;
    for i in 0..m {
        let b = tableau.basis[i];
        let cost = if b < n { program.objective[b] } else { 0.0 };
        if cost != 0.0 {
            value += cost * tableau.rhs(i);
            let row = tableau.rows[i].clone();
            for j in 0..n_total {
                zrow[j] -= cost * row[j];
            }
        }
    }
    let art_limit = tableau.art_start;
    let bounded = tableau.optimize(&mut zrow, &mut value, &mut |j| j < art_limit);
    if !bounded {
        return Ok(LpSolution {
            status: LpStatus::Unbounded,
            values: vec![0.0; n],
            objective: f64::INFINITY,
        });
    }

    let mut values = vec![0.0; n];
    for i in 0..m {
        if tableau.basis[i] < n {
            values[tableau.basis[i]] = tableau.rhs(i);
        }
    }
    Ok(LpSolution {
        status: LpStatus::Optimal,
        values,
        objective: value,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vars(uppers: &[f64]) -> Vec<LpVariable> {
        uppers
            .iter()
            .enumerate()
            .map(|(i, &u)| LpVariable {
                name: format!("x{i}"),
                upper: u,
            })
            .collect()
    }

    fn le(coeffs: &[(usize, f64)], rhs: f64) -> Constraint {
        Constraint {
            coeffs: coeffs.to_vec(),
            relation: Relation::Le,
            rhs,
        }
    }

    fn eq(coeffs: &[(usize, f64)], rhs: f64) -> Constraint {
        Constraint {
            coeffs: coeffs.to_vec(),
            relation: Relation::Eq,
            rhs,
        }
    }

    /// Max violation of any constraint or bound at the solution point.
    fn worst_violation(p: &LinearProgram, values: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for c in &p.constraints {
            let lhs: f64 = c.coeffs.iter().map(|&(j, v)| v * values[j]).sum();
            let v = match c.relation {
                Relation::Le => lhs - c.rhs,
                Relation::Eq => (lhs - c.rhs).abs(),
            };
            worst = worst.max(v);
        }
        for (j, var) in p.variables.iter().enumerate() {
            worst = worst.max(-values[j]).max(values[j] - var.upper);
        }
        worst
    }

    #[test]
    fn single_constraint_binds_before_bound() {
        let p = LinearProgram {
            variables: vars(&[100.0]),
            constraints: vec![le(&[(0, 1.0)], 5.0)],
            objective: vec![1.0],
        };
        let s = solve(&p).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert_eq!(s.values[0], 5.0);
        assert_eq!(s.objective, 5.0);
    }

    #[test]
    fn bound_binds_without_constraints() {
        let p = LinearProgram {
            variables: vars(&[3.0]),
            constraints: vec![],
            objective: vec![1.0],
        };
        let s = solve(&p).unwrap();
        assert_eq!(s.values[0], 3.0);
    }

    #[test]
    fn contradictory_equalities_are_infeasible() {
        let p = LinearProgram {
            variables: vars(&[10.0]),
            constraints: vec![eq(&[(0, 1.0)], 1.0), eq(&[(0, 1.0)], 2.0)],
            objective: vec![1.0],
        };
        let s = solve(&p).unwrap();
        assert_eq!(s.status, LpStatus::Infeasible);
    }

    #[test]
    fn equality_rows_are_honored() {
        let p = LinearProgram {
            variables: vars(&[10.0, 10.0]),
            constraints: vec![eq(&[(0, 1.0), (1, 1.0)], 1.0)],
            objective: vec![1.0, 0.0],
        };
        let s = solve(&p).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.values[0] - 1.0).abs() < 1e-12);
        assert!(s.values[1].abs() < 1e-12);
    }

    #[test]
    fn coupled_halves_settle_exactly() {
        // x <= 1 + y/2, y <= 1 + x/2, both maximized: the joint optimum is
        // exactly (2, 2), reachable in dyadic arithmetic.
        let cap = 19.0;
        let p = LinearProgram {
            variables: vars(&[cap, cap]),
            constraints: vec![
                le(&[(0, 1.0)], 10.0),
                le(&[(0, 1.0), (1, -0.5)], 1.0),
                le(&[(1, 1.0)], 5.0),
                le(&[(1, 1.0), (0, -0.5)], 1.0),
            ],
            objective: vec![1.0, 1.0],
        };
        let s = solve(&p).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert_eq!(s.values, vec![2.0, 2.0]);
        assert_eq!(s.objective, 4.0);
    }

    #[test]
    fn negative_rhs_rows_need_phase_one() {
        // -x <= -2 is x >= 2.
        let p = LinearProgram {
            variables: vars(&[10.0]),
            constraints: vec![le(&[(0, -1.0)], -2.0)],
            objective: vec![-1.0],
        };
        let s = solve(&p).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.values[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_ties_resolve_deterministically() {
        // Three rows meet at the same vertex; repeated solves must agree
        // bit for bit.
        let p = LinearProgram {
            variables: vars(&[10.0, 10.0]),
            constraints: vec![
                le(&[(0, 1.0), (1, 1.0)], 4.0),
                le(&[(0, 2.0), (1, 2.0)], 8.0),
                le(&[(0, 1.0)], 2.0),
                le(&[(1, 1.0)], 2.0),
            ],
            objective: vec![1.0, 1.0],
        };
        let a = solve(&p).unwrap();
        let b = solve(&p).unwrap();
        assert_eq!(format!("{a:?}"), format!("{b:?}"));
        assert_eq!(a.objective, 4.0);
        assert!(worst_violation(&p, &a.values) <= 1e-9);
    }

    #[test]
    fn solutions_respect_constraints_and_bounds() {
        let p = LinearProgram {
            variables: vars(&[4.0, 7.0, 2.0]),
            constraints: vec![
                le(&[(0, 1.0), (1, 2.0), (2, -1.0)], 9.0),
                eq(&[(0, 1.0), (2, 1.0)], 3.0),
                le(&[(1, -1.0), (2, 4.0)], 2.0),
            ],
            objective: vec![2.0, 1.0, -1.0],
        };
        let s = solve(&p).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!(worst_violation(&p, &s.values) <= 1e-9, "{s:?}");
    }

    #[test]
    fn malformed_programs_are_errors() {
        assert_eq!(solve(&LinearProgram::default()), Err(LpError::Empty));
        let p = LinearProgram {
            variables: vars(&[1.0]),
            constraints: vec![],
            objective: vec![1.0, 2.0],
        };
        assert!(matches!(solve(&p), Err(LpError::ObjectiveMismatch { .. })));
        let p = LinearProgram {
            variables: vars(&[f64::INFINITY]),
            constraints: vec![],
            objective: vec![1.0],
        };
        assert_eq!(solve(&p), Err(LpError::BadBound(0)));
        let p = LinearProgram {
            variables: vars(&[1.0]),
            constraints: vec![le(&[(3, 1.0)], 1.0)],
            objective: vec![1.0],
        };
        assert!(matches!(solve(&p), Err(LpError::BadIndex { .. })));
    }

    #[test]
    fn render_text_lists_program() {
        let p = LinearProgram {
            variables: vars(&[5.0]),
            constraints: vec![le(&[(0, 1.0)], 2.0)],
            objective: vec![1.0],
        };
        let text = p.render_text();
        assert!(text.contains("maximize 1*x0"));
        assert!(text.contains("1*x0 <= 2"));
        assert!(text.contains("0 <= x0 <= 5"));
    }
}
