//! The fair k-median LP in both objectives: assignment variables z over
//! point x facility pairs, opening variables y, a budget row, and one cost
//! row per group (average cost for the absolute objective, cost against the
//! group's own k-median scale for the relative one). Solved to a fractional
//! optimum, audited from scratch, exportable as a plain-text sparse model.

use crate::dataset::GroupedDataset;
use minilp::{ComparisonOp, OptimizationDirection, Problem, Variable};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

/// Primal feasibility tolerance of the audit.
pub const FEAS_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum LpError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("parse error: {0}")]
    Parse(String),
}

/// Objective mode. `RelError` carries the per-group scales
/// (K-Med-Approx of each group on its own).
#[derive(Debug, Clone)]
pub enum FairMode {
    AbsError,
    RelError { scales: Vec<f64> },
}

#[derive(Debug, Clone)]
pub struct FairLpInstance<'a> {
    pub ds: &'a GroupedDataset,
    pub k: usize,
    pub mode: FairMode,
    /// Assignment variables are created only for each point's this-many
    /// nearest facilities. `usize::MAX` builds the exact (dense) model.
    pub neighbors: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RowOp {
    Le,
    Eq,
}

#[derive(Debug, Clone)]
pub struct LpRow {
    pub coeffs: Vec<(usize, f64)>,
    pub op: RowOp,
    pub rhs: f64,
}

/// Sparse standard-form model. Variable order is facilities first (y), then
/// assignment variables point-major (z), then the objective variable.
#[derive(Debug, Clone)]
pub struct LpModel {
    pub n_vars: usize,
    pub objective: Vec<f64>,
    pub bounds: Vec<(f64, f64)>,
    pub rows: Vec<LpRow>,
    pub n_facilities: usize,
    pub n_points: usize,
    /// (point, facility, distance) per z variable, in variable order.
    pub z_meta: Vec<(usize, usize, f64)>,
    pub lambda_var: usize,
    /// Groups whose relative-error scale was zero and replaced by the floor.
    pub floored_groups: Vec<usize>,
    pub neighbors_used: usize,
}

/// Floor replacing a zero relative-error scale: tiny against the instance's
/// distance range so the group is forced to (near) zero cost.
fn rel_scale_floor(max_distance: f64) -> f64 {
    1e-9 * max_distance.max(1.0)
}

/// Build the LP. Points contribute rows weighted by their point weight, so
/// coreset inputs work unchanged.
pub fn build_fair_lp(inst: &FairLpInstance) -> Result<LpModel, LpError> {
    let ds = inst.ds;
    let (n, nf, m) = (ds.n_points(), ds.n_facilities(), ds.n_groups());
    if n == 0 || nf == 0 {
        return Err(LpError::InvalidInput("empty points or facilities".into()));
    }
    if inst.k == 0 {
        return Err(LpError::InvalidInput("k must be at least 1".into()));
    }
    if let FairMode::RelError { scales } = &inst.mode {
        if scales.len() != m {
            return Err(LpError::InvalidInput(format!(
                "{} scales for {m} groups",
                scales.len()
            )));
        }
        if scales.iter().any(|s| *s < 0.0) {
            return Err(LpError::InvalidInput("negative group scale".into()));
        }
    }
    let t = inst.neighbors.min(nf).max(1);

    // nearest-T facility list per point, ties by facility index
    let neighbor_lists: Vec<Vec<(usize, f64)>> = (0..n)
        .into_par_iter()
        .map(|u| {
            let mut ds_row: Vec<(usize, f64)> =
                (0..nf).map(|f| (f, ds.d_pf(u, f))).collect();
            ds_row.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
            ds_row.truncate(t);
            ds_row
        })
        .collect();

    let mut z_meta = Vec::new();
    let mut z_index_of = vec![Vec::new(); n]; // per point: (facility, var)
    let mut max_distance: f64 = 0.0;
    for (u, list) in neighbor_lists.iter().enumerate() {
        for &(f, d) in list {
            z_index_of[u].push((f, nf + z_meta.len()));
            z_meta.push((u, f, d));
            if d > max_distance {
                max_distance = d;
            }
        }
    }
    let lambda_var = nf + z_meta.len();
    let n_vars = lambda_var + 1;

    let mut objective = vec![0.0; n_vars];
    objective[lambda_var] = 1.0;
    let mut bounds = vec![(0.0, 1.0); n_vars];
    bounds[lambda_var] = (0.0, f64::INFINITY);

    let mut rows = Vec::new();
    // assignment rows
    for u in 0..n {
        rows.push(LpRow {
            coeffs: z_index_of[u].iter().map(|&(_, v)| (v, 1.0)).collect(),
            op: RowOp::Eq,
            rhs: 1.0,
        });
    }
    // z <= y rows
    for (zi, &(_, f, _)) in z_meta.iter().enumerate() {
        rows.push(LpRow {
            coeffs: vec![(nf + zi, 1.0), (f, -1.0)],
            op: RowOp::Le,
            rhs: 0.0,
        });
    }
    // budget row
    rows.push(LpRow {
        coeffs: (0..nf).map(|f| (f, 1.0)).collect(),
        op: RowOp::Le,
        rhs: inst.k as f64,
    });
    // group rows
    let gw = ds.group_weights();
    let mut floored_groups = Vec::new();
    let mut group_rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); m];
    for (zi, &(u, _, d)) in z_meta.iter().enumerate() {
        let p = &ds.points()[u];
        group_rows[p.group].push((nf + zi, p.weight * d));
    }
    for (g, mut coeffs) in group_rows.into_iter().enumerate() {
        let lambda_coef = match &inst.mode {
            FairMode::AbsError => {
                for c in &mut coeffs {
                    c.1 /= gw[g];
                }
                -1.0
            }
            FairMode::RelError { scales } => {
                if scales[g] > 0.0 {
                    -scales[g]
                } else {
                    floored_groups.push(g);
                    -rel_scale_floor(max_distance)
                }
            }
        };
        coeffs.push((lambda_var, lambda_coef));
        rows.push(LpRow {
            coeffs,
            op: RowOp::Le,
            rhs: 0.0,
        });
    }

    Ok(LpModel {
        n_vars,
        objective,
        bounds,
        rows,
        n_facilities: nf,
        n_points: n,
        z_meta,
        lambda_var,
        floored_groups,
        neighbors_used: t,
    })
}

/// A solved fractional relaxation.
#[derive(Debug, Clone, Serialize)]
pub struct FractionalSolution {
    pub lambda: f64,
    pub y: Vec<f64>,
    /// Sparse z support: (point, facility, value).
    pub z: Vec<(usize, usize, f64)>,
    /// Fractional connection cost per point.
    pub r: Vec<f64>,
    pub converged: bool,
    pub neighbors_used: usize,
    pub floored_groups: Vec<usize>,
}

impl FractionalSolution {
    pub fn open_mass(&self) -> f64 {
        self.y.iter().sum()
    }
}

/// Solve a built model with the bounded simplex backend. On solver failure a
/// trivially feasible solution (first k facilities open, every point on its
/// nearest open neighbor) is returned with `converged = false`.
pub fn solve_lp(model: &LpModel, k: usize) -> FractionalSolution {
    let mut problem = Problem::new(OptimizationDirection::Minimize);
    let vars: Vec<Variable> = (0..model.n_vars)
        .map(|v| problem.add_var(model.objective[v], model.bounds[v]))
        .collect();
    for row in &model.rows {
        let coeffs: Vec<(Variable, f64)> =
            row.coeffs.iter().map(|&(v, c)| (vars[v], c)).collect();
        let op = match row.op {
            RowOp::Le => ComparisonOp::Le,
            RowOp::Eq => ComparisonOp::Eq,
        };
        problem.add_constraint(&coeffs, op, row.rhs);
    }
    match problem.solve() {
        Ok(sol) => {
            let y: Vec<f64> = (0..model.n_facilities)
                .map(|f| sol[vars[f]].clamp(0.0, 1.0))
                .collect();
            let mut z = Vec::new();
            let mut r = vec![0.0; model.n_points];
            for (zi, &(u, f, d)) in model.z_meta.iter().enumerate() {
                let val = sol[vars[model.n_facilities + zi]];
                if val > 1e-12 {
                    z.push((u, f, val));
                    r[u] += d * val;
                }
            }
            FractionalSolution {
                lambda: sol[vars[model.lambda_var]],
                y,
                z,
                r,
                converged: true,
                neighbors_used: model.neighbors_used,
                floored_groups: model.floored_groups.clone(),
            }
        }
        Err(_) => fallback_solution(model, k),
    }
}

fn fallback_solution(model: &LpModel, k: usize) -> FractionalSolution {
    let nf = model.n_facilities;
    let open: Vec<usize> = (0..k.min(nf)).collect();
    let mut y = vec![0.0; nf];
    for &f in &open {
        y[f] = 1.0;
    }
    // nearest open facility per point, using the z variables we have and
    // falling back to the first open facility when the neighbor list of a
    // point contains none of them
    let mut best: Vec<Option<(usize, f64)>> = vec![None; model.n_points];
    for &(u, f, d) in &model.z_meta {
        if y[f] > 0.0 {
            match best[u] {
                Some((_, bd)) if bd <= d => {}
                _ => best[u] = Some((f, d)),
            }
        }
    }
    let mut z = Vec::new();
    let mut r = vec![0.0; model.n_points];
    for (u, b) in best.iter().enumerate() {
        let (f, d) = b.unwrap_or((open[0], f64::INFINITY));
        z.push((u, f, 1.0));
        r[u] = d;
    }
    FractionalSolution {
        lambda: f64::INFINITY,
        y,
        z,
        r,
        converged: false,
        neighbors_used: model.neighbors_used,
        floored_groups: model.floored_groups.clone(),
    }
}

/// Independent feasibility audit: every constraint residual is recomputed
/// from the dataset, not from the model that was solved.
#[derive(Debug, Clone, Serialize)]
pub struct FeasibilityAudit {
    pub max_assignment_residual: f64,
    pub max_z_over_y: f64,
    pub budget_excess: f64,
    pub max_group_excess: f64,
    pub max_residual: f64,
    pub feasible: bool,
}

pub fn audit_fractional(
    ds: &GroupedDataset,
    mode: &FairMode,
    k: usize,
    sol: &FractionalSolution,
) -> FeasibilityAudit {
    let m = ds.n_groups();
    let mut z_sum = vec![0.0; ds.n_points()];
    let mut max_z_over_y: f64 = 0.0;
    let mut group_cost = vec![0.0; m];
    for &(u, f, v) in &sol.z {
        z_sum[u] += v;
        max_z_over_y = max_z_over_y.max(v - sol.y[f]);
        group_cost[ds.points()[u].group] += ds.points()[u].weight * v * ds.d_pf(u, f);
    }
    let max_assignment_residual = z_sum
        .iter()
        .map(|s| (s - 1.0).abs())
        .fold(0.0, f64::max);
    let budget_excess = (sol.open_mass() - k as f64).max(0.0);
    let gw = ds.group_weights();
    let mut max_group_excess: f64 = 0.0;
    for g in 0..m {
        let bound = match mode {
            FairMode::AbsError => sol.lambda * gw[g],
            FairMode::RelError { scales } => {
                if scales[g] > 0.0 {
                    sol.lambda * scales[g]
                } else {
                    // floored group: audit against the same floor
                    let max_d = sol
                        .z
                        .iter()
                        .map(|&(u, f, _)| ds.d_pf(u, f))
                        .fold(0.0, f64::max);
                    sol.lambda * rel_scale_floor(max_d)
                }
            }
        };
        max_group_excess = max_group_excess.max(group_cost[g] - bound);
    }
    let scale = 1.0_f64.max(sol.lambda.abs());
    let max_residual = max_assignment_residual
        .max(max_z_over_y)
        .max(budget_excess)
        .max(max_group_excess / scale);
    FeasibilityAudit {
        max_assignment_residual,
        max_z_over_y,
        budget_excess,
        max_group_excess,
        max_residual,
        feasible: max_residual <= FEAS_TOL,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveLog {
    pub attempts: Vec<usize>,
    pub final_neighbors: usize,
    /// True when the widening budget ran out while some point still put
    /// z mass on the last facility of its truncated list. The solution is
    /// feasible either way; the reported lambda may then sit above the
    /// exact-model optimum.
    pub support_clipped: bool,
    pub audit: FeasibilityAudit,
}

/// Widening re-solves allowed before accepting a clipped support.
const MAX_RESOLVES: usize = 2;

/// Build + solve with the sparsification audit: if any point puts z mass on
/// the last (farthest) facility of its truncated neighbor list, the support
/// may be cut off, so the model is rebuilt with twice the neighbors (up to
/// a bounded number of re-solves).
pub fn solve_fair_lp(
    inst: &FairLpInstance,
) -> Result<(FractionalSolution, SolveLog), LpError> {
    let nf = inst.ds.n_facilities();
    let mut t = inst.neighbors.min(nf).max(1);
    let mut attempts = Vec::new();
    loop {
        attempts.push(t);
        let model = build_fair_lp(&FairLpInstance {
            ds: inst.ds,
            k: inst.k,
            mode: inst.mode.clone(),
            neighbors: t,
        })?;
        let sol = solve_lp(&model, inst.k);
        let truncated = t < nf && hits_last_neighbor(&model, &sol);
        if truncated && attempts.len() <= MAX_RESOLVES {
            t = (t * 2).min(nf);
            continue;
        }
        let audit = audit_fractional(inst.ds, &inst.mode, inst.k, &sol);
        return Ok((
            sol,
            SolveLog {
                attempts,
                final_neighbors: t,
                support_clipped: truncated,
                audit,
            },
        ));
    }
}

fn hits_last_neighbor(model: &LpModel, sol: &FractionalSolution) -> bool {
    use std::collections::HashMap;
    // last z variable of each point is its farthest listed neighbor
    let mut last_of: HashMap<usize, usize> = HashMap::new();
    for (zi, &(u, _, _)) in model.z_meta.iter().enumerate() {
        last_of.insert(u, zi); // later entries overwrite: point-major order
    }
    let mut z_val: HashMap<(usize, usize), f64> = HashMap::new();
    for &(u, f, v) in &sol.z {
        z_val.insert((u, f), v);
    }
    for (&u, &zi) in &last_of {
        let (_, f, _) = model.z_meta[zi];
        if z_val.get(&(u, f)).copied().unwrap_or(0.0) > 1e-9 {
            return true;
        }
    }
    false
}

/// Plain-text sparse export (format `fairlp-lp v1`, documented in
/// docs/formats.md) for cross-checking against external solvers.
pub fn export_lp(model: &LpModel) -> String {
    let mut out = String::from("fairlp-lp v1\n");
    out.push_str(&format!(
        "vars {} facilities {} points {} lambda {}\n",
        model.n_vars, model.n_facilities, model.n_points, model.lambda_var
    ));
    for (v, c) in model.objective.iter().enumerate() {
        if *c != 0.0 {
            out.push_str(&format!("c {v} {c}\n"));
        }
    }
    for (v, (lo, hi)) in model.bounds.iter().enumerate() {
        out.push_str(&format!("b {v} {lo} {hi}\n"));
    }
    for row in &model.rows {
        let op = match row.op {
            RowOp::Le => "le",
            RowOp::Eq => "eq",
        };
        out.push_str(&format!("row {op} {} {}", row.rhs, row.coeffs.len()));
        for (v, c) in &row.coeffs {
            out.push_str(&format!(" {v}:{c}"));
        }
        out.push('\n');
    }
    for (zi, (u, f, d)) in model.z_meta.iter().enumerate() {
        out.push_str(&format!("z {} {u} {f} {d}\n", model.n_facilities + zi));
    }
    out
}

pub fn import_lp(text: &str) -> Result<LpModel, LpError> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| LpError::Parse("empty".into()))?;
    if header.trim() != "fairlp-lp v1" {
        return Err(LpError::Parse(format!("unknown header `{header}`")));
    }
    let dims = lines
        .next()
        .ok_or_else(|| LpError::Parse("missing dims".into()))?;
    let d: Vec<&str> = dims.split_whitespace().collect();
    if d.len() != 8 || d[0] != "vars" {
        return Err(LpError::Parse(format!("bad dims line `{dims}`")));
    }
    let parse_usize =
        |s: &str| -> Result<usize, LpError> { s.parse().map_err(|_| LpError::Parse(s.into())) };
    let parse_f64 = |s: &str| -> Result<f64, LpError> {
        match s {
            "inf" => Ok(f64::INFINITY),
            "-inf" => Ok(f64::NEG_INFINITY),
            _ => s.parse().map_err(|_| LpError::Parse(s.into())),
        }
    };
    let n_vars = parse_usize(d[1])?;
    let n_facilities = parse_usize(d[3])?;
    let n_points = parse_usize(d[5])?;
    let lambda_var = parse_usize(d[7])?;
    let mut model = LpModel {
        n_vars,
        objective: vec![0.0; n_vars],
        bounds: vec![(0.0, 0.0); n_vars],
        rows: Vec::new(),
        n_facilities,
        n_points,
        z_meta: Vec::new(),
        lambda_var,
        floored_groups: Vec::new(),
        neighbors_used: 0,
    };
    for line in lines {
        let mut it = line.split_whitespace();
        match it.next() {
            Some("c") => {
                let v = parse_usize(it.next().ok_or_else(|| LpError::Parse(line.into()))?)?;
                let c = parse_f64(it.next().ok_or_else(|| LpError::Parse(line.into()))?)?;
                model.objective[v] = c;
            }
            Some("b") => {
                let v = parse_usize(it.next().ok_or_else(|| LpError::Parse(line.into()))?)?;
                let lo = parse_f64(it.next().ok_or_else(|| LpError::Parse(line.into()))?)?;
                let hi = parse_f64(it.next().ok_or_else(|| LpError::Parse(line.into()))?)?;
                model.bounds[v] = (lo, hi);
            }
            Some("row") => {
                let op = match it.next() {
                    Some("le") => RowOp::Le,
                    Some("eq") => RowOp::Eq,
                    other => return Err(LpError::Parse(format!("bad op {other:?}"))),
                };
                let rhs = parse_f64(it.next().ok_or_else(|| LpError::Parse(line.into()))?)?;
                let nnz = parse_usize(it.next().ok_or_else(|| LpError::Parse(line.into()))?)?;
                let mut coeffs = Vec::with_capacity(nnz);
                for tok in it {
                    let (v, c) = tok
                        .split_once(':')
                        .ok_or_else(|| LpError::Parse(tok.into()))?;
                    coeffs.push((parse_usize(v)?, parse_f64(c)?));
                }
                if coeffs.len() != nnz {
                    return Err(LpError::Parse(format!("row nnz mismatch `{line}`")));
                }
                model.rows.push(LpRow { coeffs, op, rhs });
            }
            Some("z") => {
                let _var = parse_usize(it.next().ok_or_else(|| LpError::Parse(line.into()))?)?;
                let u = parse_usize(it.next().ok_or_else(|| LpError::Parse(line.into()))?)?;
                let f = parse_usize(it.next().ok_or_else(|| LpError::Parse(line.into()))?)?;
                let d = parse_f64(it.next().ok_or_else(|| LpError::Parse(line.into()))?)?;
                model.z_meta.push((u, f, d));
            }
            Some("") | None => {}
            Some(other) => return Err(LpError::Parse(format!("unknown record `{other}`"))),
        }
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{
        integrality_gap_instance, DataPoint, Facilities, GroupedDataset, MetricSource,
    };
    use crate::geo::MetricKind;

    fn line_instance(xs: &[f64], groups: &[usize], m: usize, fxs: &[f64]) -> GroupedDataset {
        let points = xs
            .iter()
            .zip(groups)
            .enumerate()
            .map(|(i, (&x, &g))| DataPoint {
                coords: vec![x],
                weight: 1.0,
                group: g,
                entity: i,
            })
            .collect();
        GroupedDataset::new(
            points,
            (0..m).map(|g| format!("g{g}")).collect(),
            Facilities::Coords(fxs.iter().map(|&x| vec![x]).collect()),
            MetricSource::Kernel(MetricKind::Euclidean { dim: 1 }),
        )
        .unwrap()
    }

    #[test]
    fn single_point_single_facility() {
        let ds = line_instance(&[0.0], &[0], 1, &[3.0]);
        let inst = FairLpInstance {
            ds: &ds,
            k: 1,
            mode: FairMode::AbsError,
            neighbors: usize::MAX,
        };
        let (sol, log) = solve_fair_lp(&inst).unwrap();
        assert!(sol.converged);
        assert!((sol.lambda - 3.0).abs() < 1e-8);
        assert!(log.audit.feasible, "{:?}", log.audit);
    }

    #[test]
    fn gap_instance_lp_is_d_over_m() {
        for m in [3usize, 4] {
            for d in [1.0, 2.0] {
                let (ds, k) = integrality_gap_instance(m, d).unwrap();
                let inst = FairLpInstance {
                    ds: &ds,
                    k,
                    mode: FairMode::AbsError,
                    neighbors: usize::MAX,
                };
                let (sol, log) = solve_fair_lp(&inst).unwrap();
                assert!(sol.converged);
                assert!(
                    (sol.lambda - d / m as f64).abs() <= 1e-6,
                    "m={m} d={d}: lambda {}",
                    sol.lambda
                );
                assert!(log.audit.feasible);
            }
        }
    }

    #[test]
    fn zero_distances_give_zero_lambda() {
        let ds = line_instance(&[1.0, 1.0, 1.0], &[0, 1, 2], 3, &[1.0]);
        let inst = FairLpInstance {
            ds: &ds,
            k: 1,
            mode: FairMode::AbsError,
            neighbors: usize::MAX,
        };
        let (sol, _) = solve_fair_lp(&inst).unwrap();
        assert!(sol.lambda.abs() < 1e-9);
    }

    #[test]
    fn lp_lower_bounds_every_integral_center_set() {
        let ds = line_instance(
            &[0.0, 1.0, 2.0, 7.0, 8.0, 9.5],
            &[0, 1, 0, 1, 0, 1],
            2,
            &[0.0, 1.0, 2.0, 7.0, 8.0, 9.5],
        );
        let inst = FairLpInstance {
            ds: &ds,
            k: 2,
            mode: FairMode::AbsError,
            neighbors: usize::MAX,
        };
        let (sol, _) = solve_fair_lp(&inst).unwrap();
        for centers in crate::exhaustive::combinations(ds.n_facilities(), 2) {
            let (_, fair) = crate::exhaustive::fair_objective_of(&ds, &centers);
            assert!(
                sol.lambda <= fair + 1e-7,
                "lambda {} beats integral {fair} at {centers:?}",
                sol.lambda
            );
        }
    }

    #[test]
    fn abs_error_invariant_under_uniform_weight_scaling() {
        let xs = [0.0, 1.0, 2.5, 6.0, 7.5];
        let gs = [0usize, 1, 0, 1, 0];
        let ds = line_instance(&xs, &gs, 2, &xs);
        let inst = FairLpInstance {
            ds: &ds,
            k: 2,
            mode: FairMode::AbsError,
            neighbors: usize::MAX,
        };
        let (sol1, _) = solve_fair_lp(&inst).unwrap();

        let scaled_points: Vec<DataPoint> = ds
            .points()
            .iter()
            .map(|p| DataPoint {
                weight: p.weight * 7.0,
                coords: p.coords.clone(),
                group: p.group,
                entity: p.entity,
            })
            .collect();
        let ds2 = GroupedDataset::new(
            scaled_points,
            ds.group_labels().to_vec(),
            Facilities::Coords(xs.iter().map(|&x| vec![x]).collect()),
            MetricSource::Kernel(MetricKind::Euclidean { dim: 1 }),
        )
        .unwrap();
        let inst2 = FairLpInstance {
            ds: &ds2,
            k: 2,
            mode: FairMode::AbsError,
            neighbors: usize::MAX,
        };
        let (sol2, _) = solve_fair_lp(&inst2).unwrap();
        assert!((sol1.lambda - sol2.lambda).abs() < 1e-7);
    }

    #[test]
    fn rel_error_scales_with_distances() {
        let xs = [0.0, 1.0, 3.0, 8.0, 9.0, 12.0];
        let gs = [0usize, 0, 0, 1, 1, 1];
        let ds = line_instance(&xs, &gs, 2, &xs);
        let opts = crate::baseline::LocalSearchOpts::default();
        let scales: Vec<f64> = (0..2)
            .map(|g| crate::baseline::kmed_approx(&ds, g, 2, &opts).unwrap())
            .collect();
        let inst = FairLpInstance {
            ds: &ds,
            k: 2,
            mode: FairMode::RelError {
                scales: scales.clone(),
            },
            neighbors: usize::MAX,
        };
        let (sol1, _) = solve_fair_lp(&inst).unwrap();

        let c = 3.0;
        let xs2: Vec<f64> = xs.iter().map(|&x| c * x).collect();
        let ds2 = line_instance(&xs2, &gs, 2, &xs2);
        let scales2: Vec<f64> = (0..2)
            .map(|g| crate::baseline::kmed_approx(&ds2, g, 2, &opts).unwrap())
            .collect();
        for (a, b) in scales.iter().zip(&scales2) {
            assert!((b - c * a).abs() < 1e-9, "scale did not scale: {a} {b}");
        }
        let inst2 = FairLpInstance {
            ds: &ds2,
            k: 2,
            mode: FairMode::RelError { scales: scales2 },
            neighbors: usize::MAX,
        };
        let (sol2, _) = solve_fair_lp(&inst2).unwrap();
        assert!(
            (sol1.lambda - sol2.lambda).abs() < 1e-6,
            "{} vs {}",
            sol1.lambda,
            sol2.lambda
        );
    }

    #[test]
    fn rel_error_zero_scale_is_floored_and_flagged() {
        // group 1 sits exactly on a facility, so its own 1-median cost is 0
        let ds = line_instance(&[0.0, 10.0, 11.0], &[0, 1, 1], 2, &[0.0, 10.0, 11.0]);
        let inst = FairLpInstance {
            ds: &ds,
            k: 2,
            mode: FairMode::RelError {
                scales: vec![0.0, 5.0],
            },
            neighbors: usize::MAX,
        };
        let model = build_fair_lp(&inst).unwrap();
        assert_eq!(model.floored_groups, vec![0]);
        let (sol, _) = solve_fair_lp(&inst).unwrap();
        assert_eq!(sol.floored_groups, vec![0]);
    }

    #[test]
    fn sparsified_solve_matches_exact_when_audit_forces_widening() {
        // 1 facility close to nobody: points need facilities beyond their
        // nearest-1 list to satisfy opening budget
        let xs = [0.0, 0.4, 10.0, 10.4, 20.0];
        let gs = [0usize, 0, 0, 0, 0];
        let ds = line_instance(&xs, &gs, 1, &xs);
        let exact = solve_fair_lp(&FairLpInstance {
            ds: &ds,
            k: 2,
            mode: FairMode::AbsError,
            neighbors: usize::MAX,
        })
        .unwrap();
        let sparse = solve_fair_lp(&FairLpInstance {
            ds: &ds,
            k: 2,
            mode: FairMode::AbsError,
            neighbors: 1,
        })
        .unwrap();
        assert!((exact.0.lambda - sparse.0.lambda).abs() < 1e-6);
    }

    #[test]
    fn export_import_roundtrip_solves_identically() {
        let ds = line_instance(&[0.0, 2.0, 5.0, 9.0], &[0, 1, 0, 1], 2, &[0.0, 2.0, 5.0, 9.0]);
        let inst = FairLpInstance {
            ds: &ds,
            k: 2,
            mode: FairMode::AbsError,
            neighbors: usize::MAX,
        };
        let model = build_fair_lp(&inst).unwrap();
        let text = export_lp(&model);
        let back = import_lp(&text).unwrap();
        assert_eq!(model.n_vars, back.n_vars);
        assert_eq!(model.rows.len(), back.rows.len());
        let s1 = solve_lp(&model, 2);
        let s2 = solve_lp(&back, 2);
        assert!((s1.lambda - s2.lambda).abs() < 1e-9);
    }
}
