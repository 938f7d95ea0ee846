//! Stacked observation operators and sparse-observability certificates.
//!
//! For a deleted-sensor set S and window length r, the stacked measurement
//! equation over steps k−r+1…k reads
//!
//! ```text
//! Y = O·x_{k−r+1} + D·U (+ stacked attack terms)
//! O = [C(S); C(S)A; …; C(S)A^{r−1}]
//! D = block lower triangular, block (i,j) = C(S)·A^{i−j−1}·B for i > j
//! ```
//!
//! where C(S) is C with the rows in S removed. A system is s-sparse
//! observable when (A, C(S)) stays observable for every size-s deletion; the
//! associated window lower bound b is the largest per-subset minimal r.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::combinat::{enumerate_subsets, CombinatError, SensorSet};
use crate::linsys::{LinearSystem, Measurements};
use crate::numeric::svd_rank;

#[derive(Debug, Error)]
pub enum ObservabilityError {
    #[error("row index {index} out of range for a {rows}-row matrix")]
    RowOutOfRange { index: usize, rows: usize },
    #[error("deleting {deleted} of {rows} rows leaves nothing to observe")]
    AllRowsDeleted { deleted: usize, rows: usize },
    #[error("window length r must be at least 1")]
    ZeroWindow,
    #[error("window end k={k} with r={r} starts before step 0")]
    WindowBeforeStart { k: usize, r: usize },
    #[error("window end k={k} needs measurements through step {k}, have 0..={available}")]
    WindowPastEnd { k: usize, available: usize },
    #[error("system is not {s}-sparse observable: deleting {failing_subset} is never full rank")]
    NotSparseObservable {
        s: usize,
        failing_subset: SensorSet,
    },
    #[error(transparent)]
    Combinat(#[from] CombinatError),
}

/// Returns `m` with the 1-based rows in `s` removed, order preserved.
pub fn delete_rows(m: &DMatrix<f64>, s: &SensorSet) -> Result<DMatrix<f64>, ObservabilityError> {
    if let Some(max) = s.max() {
        if max > m.nrows() {
            return Err(ObservabilityError::RowOutOfRange {
                index: max,
                rows: m.nrows(),
            });
        }
    }
    let keep: Vec<usize> = (0..m.nrows()).filter(|&i| !s.contains(i + 1)).collect();
    Ok(m.select_rows(&keep))
}

/// The pair (O, D) for one deleted set and window length.
#[derive(Clone, Debug, PartialEq)]
pub struct StackedOperators {
    pub subset: SensorSet,
    pub r: usize,
    /// Observability stack, (r·rows)×n where rows = q − |S|.
    pub obs: DMatrix<f64>,
    /// Input convolution stack, (r·rows)×((r−1)·p).
    pub input_map: DMatrix<f64>,
}

impl StackedOperators {
    /// Rows kept per time step (q − |S|).
    pub fn rows_per_step(&self) -> usize {
        self.obs.nrows() / self.r
    }

    /// Numerical rank of O at the shared tolerance.
    pub fn rank(&self) -> usize {
        svd_rank(&self.obs)
    }

    /// The left pseudo-inverse L = (OᵀO)⁻¹Oᵀ, computed through the SVD.
    /// Meaningful when O has full column rank (then L·O = I).
    pub fn pseudo_left_inverse(&self) -> DMatrix<f64> {
        let svd = self.obs.clone().svd(true, true);
        let eps = crate::numeric::rank_tolerance(
            self.obs.nrows(),
            self.obs.ncols(),
            svd.singular_values.max(),
        );
        svd.pseudo_inverse(eps)
            .expect("SVD pseudo-inverse cannot fail once U and V are computed")
    }
}

/// Builds O and D for the deleted set `s` over a window of length `r`.
pub fn build_stacked(
    sys: &LinearSystem,
    s: &SensorSet,
    r: usize,
) -> Result<StackedOperators, ObservabilityError> {
    if r == 0 {
        return Err(ObservabilityError::ZeroWindow);
    }
    let q = sys.sensor_count();
    s.validate_for(q)?;
    if s.len() >= q {
        return Err(ObservabilityError::AllRowsDeleted {
            deleted: s.len(),
            rows: q,
        });
    }
    let cs = delete_rows(sys.c(), s)?;
    let rows = cs.nrows();
    let n = sys.state_dim();
    let p = sys.input_dim();

    // Powers of A are shared by both stacks.
    let mut powers: Vec<DMatrix<f64>> = Vec::with_capacity(r);
    powers.push(DMatrix::identity(n, n));
    for i in 1..r {
        let next = &powers[i - 1] * sys.a();
        powers.push(next);
    }

    let mut obs = DMatrix::zeros(r * rows, n);
    for (i, pw) in powers.iter().enumerate() {
        obs.view_mut((i * rows, 0), (rows, n)).copy_from(&(&cs * pw));
    }

    let mut input_map = DMatrix::zeros(r * rows, r.saturating_sub(1) * p);
    for i in 1..r {
        for j in 0..i {
            let block = &cs * &powers[i - j - 1] * sys.b();
            input_map
                .view_mut((i * rows, j * p), (rows, p))
                .copy_from(&block);
        }
    }

    Ok(StackedOperators {
        subset: s.clone(),
        r,
        obs,
        input_map,
    })
}

/// Smallest r ∈ 1…n with rank(O) = n for the deleted set `s`, or `None`
/// if the kept sensors never become observable (rank saturates below n by
/// the Cayley–Hamilton theorem, so no r beyond n can help).
pub fn min_r_for_full_rank(sys: &LinearSystem, s: &SensorSet) -> Option<usize> {
    let n = sys.state_dim();
    if s.len() >= sys.sensor_count() {
        return None;
    }
    for r in 1..=n {
        let ops = build_stacked(sys, s, r).ok()?;
        if ops.rank() == n {
            return Some(r);
        }
    }
    None
}

/// True iff every size-`s` deletion leaves an observable pair (A, C(S)).
/// `s = q` is never observable (nothing is measured).
pub fn is_s_sparse_observable(sys: &LinearSystem, s: usize) -> Result<bool, ObservabilityError> {
    let q = sys.sensor_count();
    if s > q {
        return Err(CombinatError::SizeExceedsSensorCount { m: s, q }.into());
    }
    if s == q {
        return Ok(false);
    }
    for subset in enumerate_subsets(q, s)? {
        if min_r_for_full_rank(sys, &subset.set).is_none() {
            return Ok(false);
        }
    }
    Ok(true)
}

/// The window lower bound b = max over size-`s` deletions of the minimal
/// full-rank r. Rejected with the first failing subset (canonical order)
/// when the system is not s-sparse observable.
pub fn sparse_observable_lower_bound(
    sys: &LinearSystem,
    s: usize,
) -> Result<usize, ObservabilityError> {
    let q = sys.sensor_count();
    if s >= q {
        return Err(ObservabilityError::NotSparseObservable {
            s,
            failing_subset: SensorSet::new((1..=q.min(s)).collect()).expect("nonzero indices"),
        });
    }
    let mut b = 0;
    for subset in enumerate_subsets(q, s)? {
        match min_r_for_full_rank(sys, &subset.set) {
            Some(r) => b = b.max(r),
            None => {
                return Err(ObservabilityError::NotSparseObservable {
                    s,
                    failing_subset: subset.set,
                })
            }
        }
    }
    Ok(b)
}

/// Sparse-observability survey for one subset size.
#[derive(Clone, Debug, PartialEq)]
pub struct ObservabilityReport {
    /// The queried deletion size.
    pub s: usize,
    /// Largest s' with the system s'-sparse observable, if any.
    pub s_max: Option<usize>,
    /// Minimal full-rank window per size-`s` deletion (None = unobservable).
    pub per_subset_min_r: Vec<(SensorSet, Option<usize>)>,
    /// max over subsets of min r; None when some subset is unobservable.
    pub lower_bound_b: Option<usize>,
}

/// Sweeps all size-`s` deletions and finds the global s_max.
pub fn observability_report(
    sys: &LinearSystem,
    s: usize,
) -> Result<ObservabilityReport, ObservabilityError> {
    let q = sys.sensor_count();
    if s > q {
        return Err(CombinatError::SizeExceedsSensorCount { m: s, q }.into());
    }
    let mut per_subset = Vec::new();
    if s < q {
        for subset in enumerate_subsets(q, s)? {
            let r = min_r_for_full_rank(sys, &subset.set);
            per_subset.push((subset.set, r));
        }
    }
    let lower_bound_b = if per_subset.is_empty() {
        None
    } else {
        per_subset
            .iter()
            .map(|(_, r)| *r)
            .collect::<Option<Vec<_>>>()
            .map(|rs| rs.into_iter().max().unwrap_or(0))
    };

    // Sparse observability is monotone (deleting fewer rows keeps more
    // information), so scan upward until the first failure.
    let mut s_max = None;
    for candidate in 0..q {
        if is_s_sparse_observable(sys, candidate)? {
            s_max = Some(candidate);
        } else {
            break;
        }
    }

    Ok(ObservabilityReport {
        s,
        s_max,
        per_subset_min_r: per_subset,
        lower_bound_b,
    })
}

/// Stacked measurements Y (kept rows of y over the window) and inputs U.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementWindow {
    pub subset: SensorSet,
    pub k: usize,
    pub r: usize,
    /// [y_{k−r+1}(S); …; y_k(S)], length r·(q−|S|).
    pub stacked_outputs: DVector<f64>,
    /// [u_{k−r+1}; …; u_{k−1}], length (r−1)·p.
    pub stacked_inputs: DVector<f64>,
}

/// Stacks the measurements for the deleted set `s` over steps k−r+1…k.
pub fn stack_measurements(
    meas: &Measurements,
    s: &SensorSet,
    k: usize,
    r: usize,
) -> Result<MeasurementWindow, ObservabilityError> {
    if r == 0 {
        return Err(ObservabilityError::ZeroWindow);
    }
    if k + 1 < r {
        return Err(ObservabilityError::WindowBeforeStart { k, r });
    }
    if k >= meas.outputs.len() {
        return Err(ObservabilityError::WindowPastEnd {
            k,
            available: meas.outputs.len().saturating_sub(1),
        });
    }
    let q = meas.outputs[0].len();
    s.validate_for(q)?;
    let kept: Vec<usize> = (0..q).filter(|&i| !s.contains(i + 1)).collect();
    if kept.is_empty() {
        return Err(ObservabilityError::AllRowsDeleted {
            deleted: s.len(),
            rows: q,
        });
    }

    let start = k + 1 - r;
    let mut y = DVector::zeros(r * kept.len());
    for (block, step) in (start..=k).enumerate() {
        for (row, &sensor) in kept.iter().enumerate() {
            y[block * kept.len() + row] = meas.outputs[step][sensor];
        }
    }

    let p = meas.inputs.first().map(|u| u.len()).unwrap_or(0);
    let mut u = DVector::zeros(r.saturating_sub(1) * p);
    for (block, step) in (start..k).enumerate() {
        u.rows_mut(block * p, p).copy_from(&meas.inputs[step]);
    }

    Ok(MeasurementWindow {
        subset: s.clone(),
        k,
        r,
        stacked_outputs: y,
        stacked_inputs: u,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linsys::{simulate, InputSignal};
    use nalgebra::{dmatrix, dvector};

    fn example_system() -> LinearSystem {
        LinearSystem::autonomous(
            dmatrix![1.0, 1.0; 0.0, 1.0],
            dmatrix![1.0, 2.0; 1.0, 0.0; 1.0, 1.0],
        )
        .unwrap()
    }

    #[test]
    fn delete_rows_matches_notation() {
        let m = dmatrix![1.0, 0.0; 2.0, 3.0; 4.0, 5.0; 6.0, 6.0];
        let s = SensorSet::new(vec![1, 3, 4]).unwrap();
        assert_eq!(delete_rows(&m, &s).unwrap(), dmatrix![2.0, 3.0]);
        assert_eq!(delete_rows(&m, &SensorSet::empty()).unwrap(), m);
        let bad = SensorSet::new(vec![5]).unwrap();
        assert!(matches!(
            delete_rows(&m, &bad),
            Err(ObservabilityError::RowOutOfRange { index: 5, rows: 4 })
        ));
    }

    #[test]
    fn stacked_operator_for_known_subset() {
        let sys = example_system();
        let s = SensorSet::new(vec![1, 3]).unwrap();
        let ops = build_stacked(&sys, &s, 2).unwrap();
        assert_eq!(ops.obs, dmatrix![1.0, 0.0; 1.0, 1.0]);
        assert_eq!(ops.input_map.ncols(), 0);
        assert_eq!(ops.rank(), 2);
        let l = ops.pseudo_left_inverse();
        let expected = dmatrix![1.0, 0.0; -1.0, 1.0];
        assert!((l - expected).norm() < 1e-12);
    }

    #[test]
    fn single_step_stack_is_the_output_map() {
        let sys = example_system();
        let ops = build_stacked(&sys, &SensorSet::empty(), 1).unwrap();
        assert_eq!(ops.obs, *sys.c());
        assert_eq!(ops.input_map.ncols(), 0);
        assert_eq!(ops.rows_per_step(), 3);
    }

    #[test]
    fn full_deletion_is_rejected() {
        let sys = example_system();
        let s = SensorSet::new(vec![1, 2, 3]).unwrap();
        assert!(matches!(
            build_stacked(&sys, &s, 2),
            Err(ObservabilityError::AllRowsDeleted { .. })
        ));
    }

    #[test]
    fn input_stack_is_block_lower_triangular() {
        let sys = LinearSystem::new(
            dmatrix![0.5, 1.0; 0.0, 2.0],
            dmatrix![1.0; 3.0],
            dmatrix![1.0, 0.0; 0.0, 1.0],
        )
        .unwrap();
        let ops = build_stacked(&sys, &SensorSet::empty(), 3).unwrap();
        // First block row zero; block (i,j) = C·A^{i−j−1}·B.
        assert_eq!(ops.input_map.nrows(), 6);
        assert_eq!(ops.input_map.ncols(), 2);
        assert_eq!(ops.input_map.view((0, 0), (2, 2)), DMatrix::zeros(2, 2));
        let cb = sys.c() * sys.b();
        let cab = sys.c() * sys.a() * sys.b();
        assert_eq!(ops.input_map.view((2, 0), (2, 1)), cb.view((0, 0), (2, 1)));
        assert_eq!(ops.input_map.view((4, 1), (2, 1)), cb.view((0, 0), (2, 1)));
        assert_eq!(
            ops.input_map.view((4, 0), (2, 1)),
            cab.view((0, 0), (2, 1))
        );
    }

    #[test]
    fn minimal_window_for_example_subset() {
        let sys = example_system();
        let s = SensorSet::new(vec![1, 3]).unwrap();
        assert_eq!(min_r_for_full_rank(&sys, &s), Some(2));
        // Identity C observed in one step.
        let eye = LinearSystem::autonomous(
            dmatrix![0.3, 0.1; 0.0, 0.4],
            DMatrix::identity(2, 2),
        )
        .unwrap();
        assert_eq!(min_r_for_full_rank(&eye, &SensorSet::empty()), Some(1));
    }

    #[test]
    fn unobservable_subset_returns_none() {
        // Single sensor reading only the first state of a decoupled system.
        let sys = LinearSystem::autonomous(
            dmatrix![1.0, 0.0; 0.0, 2.0],
            dmatrix![1.0, 0.0; 0.0, 1.0],
        )
        .unwrap();
        let s = SensorSet::new(vec![2]).unwrap();
        assert_eq!(min_r_for_full_rank(&sys, &s), None);
    }

    #[test]
    fn example_system_is_two_sparse_observable() {
        let sys = example_system();
        assert!(is_s_sparse_observable(&sys, 2).unwrap());
        assert_eq!(sparse_observable_lower_bound(&sys, 2).unwrap(), 2);
        let report = observability_report(&sys, 2).unwrap();
        assert_eq!(report.s_max, Some(2));
        assert_eq!(report.lower_bound_b, Some(2));
        assert_eq!(report.per_subset_min_r.len(), 3);
    }

    #[test]
    fn zero_output_map_is_never_observable() {
        let sys =
            LinearSystem::autonomous(dmatrix![1.0, 0.0; 0.0, 1.0], DMatrix::zeros(2, 2)).unwrap();
        let report = observability_report(&sys, 0).unwrap();
        assert_eq!(report.s_max, None);
        assert_eq!(report.lower_bound_b, None);
    }

    #[test]
    fn measurement_window_stacks_kept_rows() {
        let sys = example_system();
        let traj = simulate(&sys, &dvector![2.0, 1.0], &InputSignal::Zero, None, 1).unwrap();
        let meas = traj.measurements();
        let s = SensorSet::new(vec![1, 3]).unwrap();
        let win = stack_measurements(&meas, &s, 1, 2).unwrap();
        assert_eq!(win.stacked_outputs, dvector![2.0, 3.0]);
        assert_eq!(win.stacked_inputs.len(), 0);

        let r1 = stack_measurements(&meas, &s, 1, 1).unwrap();
        assert_eq!(r1.stacked_outputs, dvector![3.0]);
    }

    #[test]
    fn window_bounds_are_checked() {
        let sys = example_system();
        let traj = simulate(&sys, &dvector![2.0, 1.0], &InputSignal::Zero, None, 1).unwrap();
        let meas = traj.measurements();
        let s = SensorSet::empty();
        assert!(matches!(
            stack_measurements(&meas, &s, 0, 2),
            Err(ObservabilityError::WindowBeforeStart { .. })
        ));
        assert!(matches!(
            stack_measurements(&meas, &s, 5, 2),
            Err(ObservabilityError::WindowPastEnd { .. })
        ));
    }

    #[test]
    fn deleting_rows_commutes_with_stacking() {
        let sys = example_system();
        let full = build_stacked(&sys, &SensorSet::empty(), 3).unwrap();
        let s = SensorSet::new(vec![2]).unwrap();
        let part = build_stacked(&sys, &s, 3).unwrap();
        // Rows {2, 5, 8} of the full stack correspond to sensor 2.
        let keep: Vec<usize> = (0..9).filter(|i| i % 3 != 1).collect();
        assert_eq!(part.obs, full.obs.select_rows(&keep));
    }
}
