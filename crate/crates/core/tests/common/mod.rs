//! Shared test support: an independent dense two-phase simplex used as an
//! LP oracle, and seeded random instance builders. The oracle shares no
//! code with the solver under test.

#![allow(dead_code)]

use fairsite_core::dataset::{DataPoint, Facilities, GroupedDataset, MetricSource};
use fairsite_core::fairlp::{LpModel, RowOp};
use fairsite_core::geo::MetricKind;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Dense two-phase simplex with Bland's rule, for minimization over
/// x >= 0 with rows `a x (<=|=) b`, `b >= 0`. Small and slow on purpose.
pub mod naive_simplex {
    #[derive(Clone, Copy, PartialEq)]
    pub enum Op {
        Le,
        Eq,
    }

    pub struct DenseLp {
        pub n: usize,
        pub objective: Vec<f64>,
        pub rows: Vec<(Vec<f64>, Op, f64)>,
    }

    const EPS: f64 = 1e-9;

    /// Returns the optimal objective value, or None if infeasible.
    pub fn solve(lp: &DenseLp) -> Option<f64> {
        let m = lp.rows.len();
        // columns: x (n), slacks (one per Le row), artificials (one per row
        // that needs one)
        let n_slack = lp.rows.iter().filter(|r| r.1 == Op::Le).count();
        let total = lp.n + n_slack + m;
        let mut tableau = vec![vec![0.0; total + 1]; m];
        let mut basis = vec![0usize; m];
        let mut slack_idx = 0usize;
        for (i, (coeffs, op, rhs)) in lp.rows.iter().enumerate() {
            assert!(*rhs >= -EPS, "oracle expects rhs >= 0");
            tableau[i][..lp.n].copy_from_slice(coeffs);
            tableau[i][total] = *rhs;
            if *op == Op::Le {
                tableau[i][lp.n + slack_idx] = 1.0;
                basis[i] = lp.n + slack_idx;
                slack_idx += 1;
            }
            // every row also gets an artificial column; Le rows start basic
            // in their slack instead and the artificial stays out
            tableau[i][lp.n + n_slack + i] = 1.0;
            if *op == Op::Eq {
                basis[i] = lp.n + n_slack + i;
            }
        }

        // phase 1: minimize sum of artificials
        let mut phase1 = vec![0.0; total + 1];
        for c in lp.n + n_slack..total {
            phase1[c] = 1.0;
        }
        price_out(&mut phase1, &tableau, &basis);
        if !pivot_to_optimum(&mut tableau, &mut basis, &mut phase1, total) {
            return None;
        }
        if phase1[total] < -EPS {
            return None; // artificials cannot be driven to zero
        }
        // drive remaining artificial basics out when possible
        for i in 0..m {
            if basis[i] >= lp.n + n_slack {
                if let Some(col) = (0..lp.n + n_slack).find(|&c| tableau[i][c].abs() > EPS) {
                    pivot(&mut tableau, &mut basis, i, col, &mut phase1, total);
                }
            }
        }

        // phase 2: original objective, artificials forbidden
        let mut obj = vec![0.0; total + 1];
        obj[..lp.n].copy_from_slice(&lp.objective);
        price_out(&mut obj, &tableau, &basis);
        let artificial_floor = lp.n + n_slack;
        if !pivot_bounded(&mut tableau, &mut basis, &mut obj, total, artificial_floor) {
            return None; // unbounded; cannot happen for our models
        }
        Some(-obj[total])
    }

    fn price_out(row: &mut [f64], tableau: &[Vec<f64>], basis: &[usize]) {
        let total = row.len() - 1;
        for (i, &b) in basis.iter().enumerate() {
            let coef = row[b];
            if coef.abs() > 0.0 {
                for c in 0..=total {
                    row[c] -= coef * tableau[i][c];
                }
            }
        }
    }

    fn pivot_to_optimum(
        tableau: &mut [Vec<f64>],
        basis: &mut [usize],
        obj: &mut [f64],
        total: usize,
    ) -> bool {
        pivot_bounded(tableau, basis, obj, total, usize::MAX)
    }

    /// Bland's rule; columns >= `forbidden_from` never enter.
    fn pivot_bounded(
        tableau: &mut [Vec<f64>],
        basis: &mut [usize],
        obj: &mut [f64],
        total: usize,
        forbidden_from: usize,
    ) -> bool {
        loop {
            let entering = (0..total)
                .filter(|&c| c < forbidden_from)
                .find(|&c| obj[c] < -EPS);
            let Some(col) = entering else {
                return true;
            };
            let mut leave: Option<(usize, f64)> = None;
            for (i, row) in tableau.iter().enumerate() {
                if row[col] > EPS {
                    let ratio = row[total] / row[col];
                    match leave {
                        Some((li, lr)) => {
                            if ratio < lr - EPS || (ratio < lr + EPS && basis[i] < basis[li]) {
                                leave = Some((i, ratio));
                            }
                        }
                        None => leave = Some((i, ratio)),
                    }
                }
            }
            let Some((row_i, _)) = leave else {
                return false; // unbounded
            };
            pivot(tableau, basis, row_i, col, obj, total);
        }
    }

    fn pivot(
        tableau: &mut [Vec<f64>],
        basis: &mut [usize],
        row_i: usize,
        col: usize,
        obj: &mut [f64],
        total: usize,
    ) {
        let pivot_val = tableau[row_i][col];
        for c in 0..=total {
            tableau[row_i][c] /= pivot_val;
        }
        for i in 0..tableau.len() {
            if i != row_i {
                let f = tableau[i][col];
                if f.abs() > 0.0 {
                    for c in 0..=total {
                        tableau[i][c] -= f * tableau[row_i][c];
                    }
                }
            }
        }
        let f = obj[col];
        if f.abs() > 0.0 {
            for c in 0..=total {
                obj[c] -= f * tableau[row_i][c];
            }
        }
        basis[row_i] = col;
    }
}

/// Convert a built fair-LP model into the oracle's dense form (variable
/// upper bounds become explicit rows).
pub fn model_to_dense(model: &LpModel) -> naive_simplex::DenseLp {
    let n = model.n_vars;
    let mut rows = Vec::new();
    for row in &model.rows {
        let mut coeffs = vec![0.0; n];
        for &(c, v) in &row.coeffs {
            coeffs[c] += v;
        }
        let op = match row.op {
            RowOp::Le => naive_simplex::Op::Le,
            RowOp::Eq => naive_simplex::Op::Eq,
        };
        rows.push((coeffs, op, row.rhs));
    }
    for (v, &(lo, hi)) in model.bounds.iter().enumerate() {
        assert!(lo == 0.0, "oracle expects zero lower bounds");
        if hi.is_finite() {
            let mut coeffs = vec![0.0; n];
            coeffs[v] = 1.0;
            rows.push((coeffs, naive_simplex::Op::Le, hi));
        }
    }
    naive_simplex::DenseLp {
        n,
        objective: model.objective.clone(),
        rows,
    }
}

/// Random planar grouped instance with facilities at the points.
pub fn random_plane_instance(
    seed: u64,
    n: usize,
    m: usize,
    span: f64,
) -> GroupedDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts: Vec<(f64, f64)> = (0..n)
        .map(|_| (rng.gen::<f64>() * span, rng.gen::<f64>() * span))
        .collect();
    let points = pts
        .iter()
        .enumerate()
        .map(|(i, &(x, y))| DataPoint {
            coords: vec![x, y],
            weight: 1.0,
            group: i % m,
            entity: i,
        })
        .collect();
    GroupedDataset::new(
        points,
        (0..m).map(|g| format!("g{g}")).collect(),
        Facilities::Coords(pts.iter().map(|&(x, y)| vec![x, y]).collect()),
        MetricSource::Kernel(MetricKind::Euclidean { dim: 2 }),
    )
    .unwrap()
}

/// Nearest-open-center fair objective of a center set given by facility
/// indices; test-local so checks do not lean on library bookkeeping.
pub fn fair_objective_direct(ds: &GroupedDataset, centers: &[usize]) -> f64 {
    let mut cost = vec![0.0; ds.n_groups()];
    let mut weight = vec![0.0; ds.n_groups()];
    for (u, p) in ds.points().iter().enumerate() {
        let d = centers
            .iter()
            .map(|&c| ds.d_pf(u, c))
            .fold(f64::INFINITY, f64::min);
        cost[p.group] += p.weight * d;
        weight[p.group] += p.weight;
    }
    cost.iter()
        .zip(&weight)
        .map(|(c, w)| c / w)
        .fold(0.0, f64::max)
}
