//! Adversarial instances with known optima, used as regression anchors for
//! the LP gap and the local-search trap.

use super::{DataPoint, DatasetError, Facilities, GroupedDataset, MetricSource};

/// `m` singleton groups at mutual distance `D`, with `k = m - 1` and every
/// point a candidate facility. The LP optimum is `D/m` while any integral
/// solution pays `D`, so the LP/integral ratio reaches `m`.
pub fn integrality_gap_instance(m: usize, d: f64) -> Result<(GroupedDataset, usize), DatasetError> {
    if m < 2 {
        return Err(DatasetError::InvalidInput(format!(
            "gap instance needs m >= 2, got {m}"
        )));
    }
    if !(d > 0.0) {
        return Err(DatasetError::InvalidInput(format!(
            "gap instance needs D > 0, got {d}"
        )));
    }
    let mut dist = vec![d; m * m];
    for i in 0..m {
        dist[i * m + i] = 0.0;
    }
    let points = (0..m)
        .map(|i| DataPoint {
            coords: Vec::new(),
            weight: 1.0,
            group: i,
            entity: i,
        })
        .collect();
    let labels = (0..m).map(|i| format!("g{i}")).collect();
    let ds = GroupedDataset::new(
        points,
        labels,
        Facilities::Entities((0..m).collect()),
        MetricSource::Matrix { n: m, dist },
    )?;
    Ok((ds, m - 1))
}

/// Metadata for the local-search trap. The cost formulas are the instance's
/// construction values: `trap_cost` is the group cost sum at the trap centers
/// and `constructed_optimum_cost` the bookkeeping value for the intended
/// optimum (both unnormalized sums; dividing by the common group size
/// `t + 1` leaves their ratio unchanged).
#[derive(Debug, Clone)]
pub struct TrapInstance {
    pub dataset: GroupedDataset,
    pub k: usize,
    pub t: usize,
    /// Index of the isolated point a1 (likewise b1).
    pub a1: usize,
    pub b1: usize,
    /// Indices of the blob points A2 and B2.
    pub a2: Vec<usize>,
    pub b2: Vec<usize>,
    /// t*eps + d
    pub constructed_optimum_cost: f64,
    /// t*d
    pub trap_cost: f64,
}

impl TrapInstance {
    /// trap_cost / constructed_optimum_cost, the gap local search can leave
    /// on the table.
    pub fn expected_ratio(&self) -> f64 {
        self.trap_cost / self.constructed_optimum_cost
    }
}

/// Two far-apart sets A and B, each an isolated point plus a tight blob of
/// `t` points, with groups crossing the sets (X1 = {a1} u B2,
/// X2 = {b1} u A2). Started from {a1, b1}, single-swap local search on the
/// fair objective is stuck while the real optimum sits inside the blobs.
///
/// Layout of entity indices: a1, then A2 (t points), then b1, then B2.
/// The separation `M` defaults to 1e6 * t * d when not given.
pub fn local_search_trap_instance(
    t: usize,
    d: f64,
    eps: f64,
    m_sep: Option<f64>,
) -> Result<TrapInstance, DatasetError> {
    if t < 1 {
        return Err(DatasetError::InvalidInput("trap needs t >= 1".into()));
    }
    if !(eps > 0.0 && d > eps && eps < d) {
        return Err(DatasetError::InvalidInput(format!(
            "trap needs 0 < eps < d, got eps={eps}, d={d}"
        )));
    }
    let m_sep = m_sep.unwrap_or(1e6 * t as f64 * d);
    if !(m_sep > d) {
        return Err(DatasetError::InvalidInput(format!(
            "trap needs separation M > d, got M={m_sep}"
        )));
    }
    let n = 2 * (t + 1);
    let a1 = 0usize;
    let a2: Vec<usize> = (1..=t).collect();
    let b1 = t + 1;
    let b2: Vec<usize> = (t + 2..n).collect();
    let in_a = |i: usize| i <= t;

    let mut dist = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let v = if in_a(i) != in_a(j) {
                m_sep
            } else {
                let (one, blob) = if in_a(i) { (a1, &a2) } else { (b1, &b2) };
                if i == one || j == one {
                    d
                } else {
                    debug_assert!(blob.contains(&i) && blob.contains(&j));
                    eps
                }
            };
            dist[i * n + j] = v;
        }
    }

    // groups: X1 = {a1} u B2, X2 = {b1} u A2
    let mut points = Vec::with_capacity(n);
    for i in 0..n {
        let group = if i == a1 || b2.contains(&i) { 0 } else { 1 };
        points.push(DataPoint {
            coords: Vec::new(),
            weight: 1.0,
            group,
            entity: i,
        });
    }
    let dataset = GroupedDataset::new(
        points,
        vec!["x1".into(), "x2".into()],
        Facilities::Entities((0..n).collect()),
        MetricSource::Matrix { n, dist },
    )?;
    Ok(TrapInstance {
        dataset,
        k: 2,
        t,
        a1,
        b1,
        a2,
        b2,
        constructed_optimum_cost: t as f64 * eps + d,
        trap_cost: t as f64 * d,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gap_instance_shape() {
        let (ds, k) = integrality_gap_instance(3, 1.0).unwrap();
        assert_eq!(k, 2);
        assert_eq!(ds.n_points(), 3);
        assert_eq!(ds.n_groups(), 3);
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 0.0 } else { 1.0 };
                assert_eq!(ds.d_pp(i, j), expect);
            }
        }
        assert!(integrality_gap_instance(1, 1.0).is_err());
        assert!(integrality_gap_instance(3, 0.0).is_err());
    }

    #[test]
    fn trap_distances_match_construction() {
        let t = 4;
        let (d, eps) = (1.0, 0.01);
        let trap = local_search_trap_instance(t, d, eps, None).unwrap();
        let ds = &trap.dataset;
        let m_sep = 1e6 * t as f64 * d;
        // symmetry and exact values
        for i in 0..ds.n_points() {
            assert_eq!(ds.d_pp(i, i), 0.0);
            for j in 0..ds.n_points() {
                assert_eq!(ds.d_pp(i, j), ds.d_pp(j, i));
            }
        }
        for &x in &trap.a2 {
            assert_eq!(ds.d_pp(trap.a1, x), d);
            for &y in &trap.a2 {
                if x != y {
                    assert_eq!(ds.d_pp(x, y), eps);
                }
            }
            assert_eq!(ds.d_pp(x, trap.b1), m_sep);
        }
        for &x in &trap.b2 {
            assert_eq!(ds.d_pp(trap.b1, x), d);
        }
        assert_eq!(ds.d_pp(trap.a1, trap.b1), m_sep);
    }

    #[test]
    fn trap_is_symmetric_under_ab_relabel() {
        let trap = local_search_trap_instance(3, 2.0, 0.05, None).unwrap();
        let ds = &trap.dataset;
        let n = ds.n_points();
        // swap map: a1 <-> b1, A2[i] <-> B2[i]
        let swap = |i: usize| -> usize { (i + (n / 2)) % n };
        for i in 0..n {
            for j in 0..n {
                assert_eq!(ds.d_pp(i, j), ds.d_pp(swap(i), swap(j)));
            }
        }
    }

    #[test]
    fn trap_construction_formulas() {
        let trap = local_search_trap_instance(10, 1.0, 0.01, None).unwrap();
        assert!((trap.constructed_optimum_cost - 1.1).abs() < 1e-12);
        assert!((trap.trap_cost - 10.0).abs() < 1e-12);
        assert!((trap.expected_ratio() - 10.0 / 1.1).abs() < 1e-9);
    }

    #[test]
    fn trap_parameter_ordering_enforced() {
        assert!(local_search_trap_instance(0, 1.0, 0.01, None).is_err());
        assert!(local_search_trap_instance(3, 0.01, 1.0, None).is_err());
        assert!(local_search_trap_instance(3, 1.0, 0.01, Some(0.5)).is_err());
    }
}
