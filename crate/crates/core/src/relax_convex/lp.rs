//! Dense two-phase simplex for `min cᵀx` s.t. `A x = b`, `x ≥ 0`, with
//! Bland's rule. Sized for the envelope programs (`m + 1` rows).

use crate::Matrix;

const PIVOT_EPS: f64 = 1e-12;
const FEASIBILITY_TOL: f64 = 1e-9;
const MAX_PIVOTS: usize = 100_000;

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { x: Vec<f64>, value: f64 },
    Infeasible,
    Unbounded,
}

struct Tableau {
    rows: usize,
    cols: usize,
    /// `rows + 1` rows of `cols + 1` entries; the last row is the objective,
    /// the last column the right-hand side.
    t: Vec<f64>,
    basis: Vec<usize>,
}

impl Tableau {
    fn at(&self, i: usize, j: usize) -> f64 {
        self.t[i * (self.cols + 1) + j]
    }

    fn at_mut(&mut self, i: usize, j: usize) -> &mut f64 {
        &mut self.t[i * (self.cols + 1) + j]
    }

    fn rhs(&self, i: usize) -> f64 {
        self.at(i, self.cols)
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let width = self.cols + 1;
        let p = self.at(r, c);
        for j in 0..width {
            *self.at_mut(r, j) /= p;
        }
        for i in 0..=self.rows {
            if i == r {
                continue;
            }
            let factor = self.at(i, c);
            if factor != 0.0 {
                for j in 0..width {
                    let v = self.at(r, j);
                    *self.at_mut(i, j) -= factor * v;
                }
            }
        }
        self.basis[r] = c;
    }

    /// Runs Bland-rule pivots over the columns `< allowed`; `false` when unbounded.
    fn optimize(&mut self, allowed: usize) -> bool {
        for _ in 0..MAX_PIVOTS {
            let obj = self.rows;
            let Some(c) = (0..allowed).find(|&j| self.at(obj, j) < -PIVOT_EPS) else {
                return true;
            };
            let mut best: Option<(usize, f64)> = None;
            for i in 0..self.rows {
                let a = self.at(i, c);
                if a > PIVOT_EPS {
                    let ratio = self.rhs(i) / a;
                    let better = match best {
                        None => true,
                        Some((bi, br)) => {
                            ratio < br - PIVOT_EPS
                                || (ratio <= br + PIVOT_EPS && self.basis[i] < self.basis[bi])
                        }
                    };
                    if better {
                        best = Some((i, ratio));
                    }
                }
            }
            match best {
                Some((r, _)) => self.pivot(r, c),
                None => return false,
            }
        }
        panic!("simplex exceeded {MAX_PIVOTS} pivots under Bland's rule");
    }
}

/// Solves `min cᵀx` subject to `A x = b`, `x ≥ 0`.
pub fn solve(a: &Matrix, b: &[f64], c: &[f64]) -> LpOutcome {
    let (m, n) = a.shape();
    assert_eq!(b.len(), m, "right-hand side length");
    assert_eq!(c.len(), n, "objective length");

    // Columns: n structural, m artificial.
    let cols = n + m;
    let mut tab = Tableau {
        rows: m,
        cols,
        t: vec![0.0; (m + 1) * (cols + 1)],
        basis: (n..n + m).collect(),
    };
    for i in 0..m {
        let sign = if b[i] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            *tab.at_mut(i, j) = sign * a[(i, j)];
        }
        *tab.at_mut(i, n + i) = 1.0;
        *tab.at_mut(i, cols) = sign * b[i];
    }

    // Phase 1: minimize the sum of artificials.
    for j in 0..=cols {
        if (n..n + m).contains(&j) {
            continue;
        }
        let s: f64 = (0..m).map(|i| tab.at(i, j)).sum();
        *tab.at_mut(m, j) = -s;
    }
    tab.optimize(cols);
    let infeasibility = -tab.at(m, cols);
    let scale = 1.0 + b.iter().fold(0.0f64, |s, v| s.max(v.abs()));
    if infeasibility > FEASIBILITY_TOL * scale {
        return LpOutcome::Infeasible;
    }

    // Drive remaining artificials out of the basis where possible.
    for i in 0..m {
        if tab.basis[i] >= n {
            if let Some(j) = (0..n).find(|&j| tab.at(i, j).abs() > PIVOT_EPS) {
                tab.pivot(i, j);
            }
        }
    }

    // Phase 2 objective in reduced form.
    for j in 0..=cols {
        let cj = if j < n { c[j] } else { 0.0 };
        let reduced: f64 = (0..m)
            .map(|i| {
                let bj = tab.basis[i];
                let cb = if bj < n { c[bj] } else { 0.0 };
                cb * tab.at(i, j)
            })
            .sum();
        *tab.at_mut(m, j) = if j == cols { -reduced } else { cj - reduced };
    }
    if !tab.optimize(n) {
        return LpOutcome::Unbounded;
    }

    let mut x = vec![0.0; n];
    for i in 0..m {
        if tab.basis[i] < n {
            x[tab.basis[i]] = tab.rhs(i).max(0.0);
        }
    }
    let value = x.iter().zip(c).map(|(xi, ci)| xi * ci).sum();
    LpOutcome::Optimal { x, value }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    #[test]
    fn small_programs() {
        // min x + 2y s.t. x + y = 1 → (1, 0), value 1
        let out = solve(&dmatrix![1.0, 1.0], &[1.0], &[1.0, 2.0]);
        assert_eq!(out, LpOutcome::Optimal { x: vec![1.0, 0.0], value: 1.0 });

        // x − y = 2, x + y = 4 → (3, 1)
        match solve(&dmatrix![1.0, -1.0; 1.0, 1.0], &[2.0, 4.0], &[0.0, 0.0]) {
            LpOutcome::Optimal { x, .. } => {
                assert!((x[0] - 3.0).abs() < 1e-12 && (x[1] - 1.0).abs() < 1e-12)
            }
            other => panic!("{other:?}"),
        }

        // x + y = −1 has no nonnegative solution
        assert_eq!(solve(&dmatrix![1.0, 1.0], &[-1.0], &[0.0, 0.0]), LpOutcome::Infeasible);

        // min −x s.t. x − y = 0 is unbounded
        assert_eq!(solve(&dmatrix![1.0, -1.0], &[0.0], &[-1.0, 0.0]), LpOutcome::Unbounded);
    }

    #[test]
    fn redundant_rows() {
        // Duplicate constraint rows leave an artificial at zero in the basis.
        match solve(&dmatrix![1.0, 1.0, 1.0; 2.0, 2.0, 2.0], &[1.0, 2.0], &[3.0, 1.0, 2.0]) {
            LpOutcome::Optimal { x, value } => {
                assert_eq!(value, 1.0);
                assert_eq!(x, vec![0.0, 1.0, 0.0]);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn degenerate_vertex_terminates() {
        // Several atoms at the same barycenter: Bland's rule must not cycle.
        let a = dmatrix![
            1.0, -1.0, 0.0, 0.0, 1.0, -1.0;
            0.0, 0.0, 1.0, -1.0, 1.0, -1.0;
            1.0, 1.0, 1.0, 1.0, 1.0, 1.0
        ];
        match solve(&a, &[0.0, 0.0, 1.0], &[1.0, 1.0, 1.0, 1.0, 0.5, 0.5]) {
            LpOutcome::Optimal { value, .. } => assert!((value - 0.5).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
    }
}
