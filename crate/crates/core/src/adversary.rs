//! Attack synthesis: when can a support-restricted attacker defeat each
//! reconstructor, and what does the attack look like?
//!
//! Every hypothesis "delete S" estimates x + L_S·A_{k,S}, where A_{k,S} is
//! the attack stacked over the window with S's rows removed. The bias
//! L_S·A_{k,S} is linear in the attack values, so defeat conditions are
//! linear-algebraic:
//!
//! - Equal-values search fails when enough wrong hypotheses share one
//!   nonzero bias — a fake cluster as large as the qualifying threshold.
//! - Growing-consistency fails when one wrong hypothesis has a nonzero
//!   bias that replays the plant dynamics, b_{ς+1} = A·b_ς, so its
//!   residual stays exactly zero forever.
//!
//! Synthesis solves for attack values in the nullspace of those
//! constraints; checking re-derives the biases from first principles.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::combinat::{choose, enumerate_subsets, CombinatError, SensorSet};
use crate::linsys::{AttackScenario, LinearSystem, LinsysError};
use crate::numeric::{rank_tolerance, EqTol};
use crate::observability::{build_stacked, ObservabilityError};

#[derive(Debug, Error)]
pub enum AdversaryError {
    #[error("attack support is empty; nothing to synthesize")]
    EmptySupport,
    #[error("defeating size-{order} deletions needs at least {} sensors, have {q}", order + 1)]
    Degenerate { order: usize, q: usize },
    #[error("rounds must be at least 1")]
    ZeroRounds,
    #[error("tau must be at least 1")]
    ZeroTau,
    #[error("deleting {subset} leaves a rank-deficient stack at window length {r}")]
    RankDeficientHypothesis { subset: SensorSet, r: usize },
    #[error("window needs attack values for step {needed}, certificate covers {start}..={end}")]
    StepOutOfRange {
        needed: usize,
        start: usize,
        end: usize,
    },
    #[error("attack vector at step {step} is nonzero outside the declared support {gamma}")]
    SupportViolation { step: usize, gamma: SensorSet },
    #[error("attack vector at step {step} has {got} entries, expected {expected}")]
    BadAttackDimension {
        step: usize,
        expected: usize,
        got: usize,
    },
    #[error("certificate targets the wrong method for this check")]
    TargetMismatch,
    #[error("certificate must name exactly {expected} hypothesis subset(s), has {got}")]
    BadSubsetCount { expected: usize, got: usize },
    #[error(transparent)]
    Observability(#[from] ObservabilityError),
    #[error(transparent)]
    Combinat(#[from] CombinatError),
}

/// Which reconstructor a certificate defeats.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DefeatTarget {
    Sesvs { tau: usize },
    Sesgc { rounds: usize },
}

/// An attack stacked over one window with a hypothesis' rows deleted:
/// A_{k,S} = [a_{k−r+1}(kept); …; a_k(kept)].
#[derive(Clone, Debug, PartialEq)]
pub struct StackedAttack {
    /// The deleted (hypothesis) set S.
    pub subset: SensorSet,
    /// Kept-row values, (q−|S|)·r entries, window order.
    pub stacked: DVector<f64>,
}

impl StackedAttack {
    /// Stacks `step_attacks` (full-q vectors, one per step starting at
    /// `start_step`) over the window ending at `k` with length `r`.
    pub fn from_steps(
        step_attacks: &[DVector<f64>],
        start_step: usize,
        subset: &SensorSet,
        q: usize,
        k: usize,
        r: usize,
    ) -> Result<StackedAttack, AdversaryError> {
        if r == 0 {
            return Err(ObservabilityError::ZeroWindow.into());
        }
        if k + 1 < r {
            return Err(ObservabilityError::WindowBeforeStart { k, r }.into());
        }
        let window_start = k + 1 - r;
        let end = start_step + step_attacks.len().max(1) - 1;
        if window_start < start_step || k > end || step_attacks.is_empty() {
            return Err(AdversaryError::StepOutOfRange {
                needed: if window_start < start_step { window_start } else { k },
                start: start_step,
                end,
            });
        }
        let kept: Vec<usize> = (1..=q).filter(|i| !subset.contains(*i)).collect();
        let mut stacked = DVector::zeros(kept.len() * r);
        for t in 0..r {
            let a = &step_attacks[window_start + t - start_step];
            if a.len() != q {
                return Err(AdversaryError::BadAttackDimension {
                    step: window_start + t,
                    expected: q,
                    got: a.len(),
                });
            }
            for (pos, &row) in kept.iter().enumerate() {
                stacked[t * kept.len() + pos] = a[row - 1];
            }
        }
        Ok(StackedAttack {
            subset: subset.clone(),
            stacked,
        })
    }
}

/// A concrete attack plus the hypothesis subsets it fools, with the common
/// bias they all report. Checkable against the plant without rerunning the
/// synthesizer.
#[derive(Clone, Debug, PartialEq)]
pub struct DefeatCertificate {
    pub target: DefeatTarget,
    /// The attacked sensors Γ.
    pub true_gamma: SensorSet,
    /// Equal-values target: the fake-cluster hypotheses (threshold many).
    /// Growing-consistency target: the single surviving wrong hypothesis.
    pub subsets: Vec<SensorSet>,
    /// L_S·A_{k,S}, identical for every listed subset (unit norm).
    pub bias: DVector<f64>,
    /// Full-q attack vectors, one per step, zero outside `true_gamma`.
    pub step_attacks: Vec<DVector<f64>>,
    /// Step index of `step_attacks[0]`, i.e. k − r + 1.
    pub start_step: usize,
    pub k: usize,
    pub r: usize,
}

impl DefeatCertificate {
    /// Turns the certificate into a replayable attack scenario.
    pub fn scenario(&self) -> Result<AttackScenario, LinsysError> {
        AttackScenario::from_steps(
            self.true_gamma.clone(),
            self.start_step,
            self.step_attacks.clone(),
        )
    }

    fn validate_support(&self, q: usize) -> Result<(), AdversaryError> {
        for (i, a) in self.step_attacks.iter().enumerate() {
            if a.len() != q {
                return Err(AdversaryError::BadAttackDimension {
                    step: self.start_step + i,
                    expected: q,
                    got: a.len(),
                });
            }
            for row in 1..=q {
                if a[row - 1] != 0.0 && !self.true_gamma.contains(row) {
                    return Err(AdversaryError::SupportViolation {
                        step: self.start_step + i,
                        gamma: self.true_gamma.clone(),
                    });
                }
            }
        }
        Ok(())
    }
}

/// The bias a hypothesis reports under an attack: L_S·A_{k,S}. Errors when
/// the deleted stack is rank deficient (no left inverse exists).
fn hypothesis_bias(
    sys: &LinearSystem,
    subset: &SensorSet,
    r: usize,
    cert: &DefeatCertificate,
    k: usize,
) -> Result<DVector<f64>, AdversaryError> {
    let ops = build_stacked(sys, subset, r)?;
    if ops.rank() != sys.state_dim() {
        return Err(AdversaryError::RankDeficientHypothesis {
            subset: subset.clone(),
            r,
        });
    }
    let stacked = StackedAttack::from_steps(
        &cert.step_attacks,
        cert.start_step,
        subset,
        sys.sensor_count(),
        k,
        r,
    )?;
    Ok(ops.pseudo_left_inverse() * stacked.stacked)
}

fn bias_is_nonzero(bias: &DVector<f64>) -> bool {
    bias.norm() > 1e-9
}

/// Verifies an equal-values defeat: every listed hypothesis reports the
/// same nonzero bias at window k.
pub fn check_sesvs_defeat(
    sys: &LinearSystem,
    cert: &DefeatCertificate,
) -> Result<bool, AdversaryError> {
    if !matches!(cert.target, DefeatTarget::Sesvs { .. }) {
        return Err(AdversaryError::TargetMismatch);
    }
    if cert.subsets.is_empty() {
        return Err(AdversaryError::BadSubsetCount {
            expected: 1,
            got: 0,
        });
    }
    cert.validate_support(sys.sensor_count())?;
    if !bias_is_nonzero(&cert.bias) {
        return Ok(false);
    }
    let eq = EqTol::default();
    for subset in &cert.subsets {
        let bias = hypothesis_bias(sys, subset, cert.r, cert, cert.k)?;
        if !eq.vectors_close(&bias, &cert.bias) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Verifies a growing-consistency defeat: the named hypothesis has a
/// nonzero window-k bias that replays the dynamics, b_{ς+1} = A·b_ς, for
/// every covered round — so its residuals vanish identically.
pub fn check_sesgc_defeat(
    sys: &LinearSystem,
    cert: &DefeatCertificate,
) -> Result<bool, AdversaryError> {
    let rounds = match cert.target {
        DefeatTarget::Sesgc { rounds } => rounds,
        _ => return Err(AdversaryError::TargetMismatch),
    };
    if cert.subsets.len() != 1 {
        return Err(AdversaryError::BadSubsetCount {
            expected: 1,
            got: cert.subsets.len(),
        });
    }
    cert.validate_support(sys.sensor_count())?;
    let v = &cert.subsets[0];
    let b0 = hypothesis_bias(sys, v, cert.r, cert, cert.k)?;
    let eq = EqTol::default();
    if !bias_is_nonzero(&b0) || !eq.vectors_close(&b0, &cert.bias) {
        return Ok(false);
    }
    let mut prev = b0;
    for step in 1..=rounds {
        let next = hypothesis_bias(sys, v, cert.r, cert, cert.k + step)?;
        if !eq.vectors_close(&next, &(sys.a() * &prev)) {
            return Ok(false);
        }
        prev = next;
    }
    Ok(true)
}

/// Columns spanning the nullspace of `mat` (empty-width when trivial).
/// Wide matrices are padded with zero rows first so the SVD carries a full
/// set of right singular vectors.
fn nullspace(mat: &DMatrix<f64>) -> DMatrix<f64> {
    let cols = mat.ncols();
    if mat.nrows() == 0 {
        return DMatrix::identity(cols, cols);
    }
    let padded = if mat.nrows() < cols {
        let mut p = DMatrix::zeros(cols, cols);
        p.rows_mut(0, mat.nrows()).copy_from(mat);
        p
    } else {
        mat.clone()
    };
    let svd = padded.clone().svd(false, true);
    let tol = rank_tolerance(mat.nrows(), cols, svd.singular_values.max());
    let v_t = svd.v_t.expect("SVD with V requested");
    let null_rows: Vec<usize> = (0..v_t.nrows())
        .filter(|&i| i >= svd.singular_values.len() || svd.singular_values[i] <= tol)
        .collect();
    let mut basis = DMatrix::zeros(cols, null_rows.len());
    for (j, &i) in null_rows.iter().enumerate() {
        basis.set_column(j, &v_t.row(i).transpose());
    }
    basis
}

/// Linear map from attack unknowns to the bias of hypothesis `subset`.
///
/// Unknowns are the attack values on Γ, step-major: z[t·s + j] is the value
/// on sensor gamma[j] at relative step `t` (0 = first synthesized step).
/// The hypothesis' window covers relative steps `offset..offset+r`.
fn bias_map(
    l: &DMatrix<f64>,
    subset: &SensorSet,
    gamma: &SensorSet,
    q: usize,
    r: usize,
    total_steps: usize,
    offset: usize,
) -> DMatrix<f64> {
    let kept: Vec<usize> = (1..=q).filter(|i| !subset.contains(*i)).collect();
    let s = gamma.len();
    let n = l.nrows();
    let mut m = DMatrix::zeros(n, s * total_steps);
    for t_local in 0..r {
        for (j, &g) in gamma.as_slice().iter().enumerate() {
            if let Some(pos) = kept.iter().position(|&row| row == g) {
                let col = (offset + t_local) * s + j;
                m.set_column(col, &l.column(t_local * kept.len() + pos));
            }
        }
    }
    m
}

/// Iterator over k-element index combinations of 0..n in lexicographic
/// order (no 32-element cap; used for subset-family search).
struct IndexCombos {
    n: usize,
    current: Option<Vec<usize>>,
}

fn index_combos(n: usize, k: usize) -> IndexCombos {
    IndexCombos {
        n,
        current: if k <= n { Some((0..k).collect()) } else { None },
    }
}

impl Iterator for IndexCombos {
    type Item = Vec<usize>;
    fn next(&mut self) -> Option<Vec<usize>> {
        let current = self.current.clone()?;
        let k = current.len();
        let mut next = current.clone();
        let mut advanced = false;
        for i in (0..k).rev() {
            if next[i] < self.n - (k - i) {
                next[i] += 1;
                for j in i + 1..k {
                    next[j] = next[j - 1] + 1;
                }
                advanced = true;
                break;
            }
        }
        self.current = if advanced && k > 0 { Some(next) } else { None };
        Some(current)
    }
}

/// Builds full-q per-step attack vectors from the unknown vector z.
fn attacks_from_unknowns(
    z: &DVector<f64>,
    gamma: &SensorSet,
    q: usize,
    steps: usize,
) -> Vec<DVector<f64>> {
    let s = gamma.len();
    (0..steps)
        .map(|t| {
            let mut a = DVector::zeros(q);
            for (j, &g) in gamma.as_slice().iter().enumerate() {
                a[g - 1] = z[t * s + j];
            }
            a
        })
        .collect()
}

/// Hypotheses that qualify for synthesis: right size, full-rank stack at
/// r, and not containing Γ (those would report zero bias). Returned with
/// their left inverses, canonical order.
fn candidate_hypotheses(
    sys: &LinearSystem,
    gamma: &SensorSet,
    size: usize,
    r: usize,
) -> Result<Vec<(SensorSet, DMatrix<f64>)>, AdversaryError> {
    let q = sys.sensor_count();
    let n = sys.state_dim();
    let mut out = Vec::new();
    for subset in enumerate_subsets(q, size)? {
        if gamma.is_subset_of(&subset.set) {
            continue;
        }
        let ops = build_stacked(sys, &subset.set, r)?;
        if ops.rank() != n {
            continue;
        }
        out.push((subset.set, ops.pseudo_left_inverse()));
    }
    Ok(out)
}

/// Scales z so the resulting bias has unit norm; returns the bias.
fn normalize_bias(z: &mut DVector<f64>, m0: &DMatrix<f64>) -> DVector<f64> {
    let bias = m0 * &*z;
    let norm = bias.norm();
    *z /= norm;
    bias / norm
}

/// Searches for an attack on `true_gamma` that plants a fake equal-values
/// cluster at the qualifying threshold over the window ending at `k`.
/// Returns the first certificate in canonical hypothesis order, or `None`
/// when the constraint system leaves no usable attack.
pub fn synthesize_sesvs_defeat(
    sys: &LinearSystem,
    true_gamma: &SensorSet,
    k: usize,
    r: usize,
    tau: usize,
) -> Result<Option<DefeatCertificate>, AdversaryError> {
    let q = sys.sensor_count();
    let s = true_gamma.len();
    true_gamma.validate_for(q)?;
    if s == 0 {
        return Err(AdversaryError::EmptySupport);
    }
    if tau == 0 {
        return Err(AdversaryError::ZeroTau);
    }
    if q < s + tau + 1 {
        return Err(AdversaryError::Degenerate { order: s + tau, q });
    }
    if r == 0 {
        return Err(ObservabilityError::ZeroWindow.into());
    }
    if k + 1 < r {
        return Err(ObservabilityError::WindowBeforeStart { k, r }.into());
    }

    let family = choose(q - s, tau) as usize;
    let pool = candidate_hypotheses(sys, true_gamma, s + tau, r)?;
    if pool.len() < family {
        return Ok(None);
    }
    let maps: Vec<DMatrix<f64>> = pool
        .iter()
        .map(|(subset, l)| bias_map(l, subset, true_gamma, q, r, r, 0))
        .collect();
    let n = sys.state_dim();
    let unknowns = s * r;

    for combo in index_combos(pool.len(), family) {
        let mut diffs = DMatrix::zeros(n * (family - 1), unknowns);
        for (row, &idx) in combo[1..].iter().enumerate() {
            diffs
                .rows_mut(row * n, n)
                .copy_from(&(&maps[combo[0]] - &maps[idx]));
        }
        let basis = nullspace(&diffs);
        if basis.ncols() == 0 {
            continue;
        }
        let reach = &maps[combo[0]] * &basis;
        let svd = reach.clone().svd(false, true);
        let sigma_max = svd.singular_values.max();
        if sigma_max <= rank_tolerance(reach.nrows(), reach.ncols(), sigma_max.max(1.0)) {
            continue;
        }
        let direction = svd
            .v_t
            .expect("SVD with V requested")
            .row(0)
            .transpose();
        let mut z = &basis * direction;
        let bias = normalize_bias(&mut z, &maps[combo[0]]);

        let cert = DefeatCertificate {
            target: DefeatTarget::Sesvs { tau },
            true_gamma: true_gamma.clone(),
            subsets: combo.iter().map(|&i| pool[i].0.clone()).collect(),
            bias,
            step_attacks: attacks_from_unknowns(&z, true_gamma, q, r),
            start_step: k + 1 - r,
            k,
            r,
        };
        if check_sesvs_defeat(sys, &cert)? {
            return Ok(Some(cert));
        }
    }
    Ok(None)
}

/// Searches for an attack on `true_gamma` and a wrong hypothesis v whose
/// bias replays the dynamics for `rounds` rounds — zero residuals, so
/// growing-consistency filtering never eliminates it. Returns the first
/// certificate in canonical hypothesis order, or `None`.
pub fn synthesize_sesgc_defeat(
    sys: &LinearSystem,
    true_gamma: &SensorSet,
    k: usize,
    r: usize,
    rounds: usize,
) -> Result<Option<DefeatCertificate>, AdversaryError> {
    let q = sys.sensor_count();
    let s = true_gamma.len();
    true_gamma.validate_for(q)?;
    if s == 0 {
        return Err(AdversaryError::EmptySupport);
    }
    if rounds == 0 {
        return Err(AdversaryError::ZeroRounds);
    }
    if q < s + 1 {
        return Err(AdversaryError::Degenerate { order: s, q });
    }
    if r == 0 {
        return Err(ObservabilityError::ZeroWindow.into());
    }
    if k + 1 < r {
        return Err(ObservabilityError::WindowBeforeStart { k, r }.into());
    }

    let n = sys.state_dim();
    let total_steps = r + rounds;
    let unknowns = s * total_steps;

    for (subset, l) in candidate_hypotheses(sys, true_gamma, s, r)? {
        let maps: Vec<DMatrix<f64>> = (0..=rounds)
            .map(|step| bias_map(&l, &subset, true_gamma, q, r, total_steps, step))
            .collect();
        let mut constraints = DMatrix::zeros(n * rounds, unknowns);
        for step in 0..rounds {
            constraints
                .rows_mut(step * n, n)
                .copy_from(&(&maps[step + 1] - sys.a() * &maps[step]));
        }
        let basis = nullspace(&constraints);
        if basis.ncols() == 0 {
            continue;
        }
        let reach = &maps[0] * &basis;
        let svd = reach.clone().svd(false, true);
        let sigma_max = svd.singular_values.max();
        if sigma_max <= rank_tolerance(reach.nrows(), reach.ncols(), sigma_max.max(1.0)) {
            continue;
        }
        let direction = svd
            .v_t
            .expect("SVD with V requested")
            .row(0)
            .transpose();
        let mut z = &basis * direction;
        let bias = normalize_bias(&mut z, &maps[0]);

        let cert = DefeatCertificate {
            target: DefeatTarget::Sesgc { rounds },
            true_gamma: true_gamma.clone(),
            subsets: vec![subset.clone()],
            bias,
            step_attacks: attacks_from_unknowns(&z, true_gamma, q, total_steps),
            start_step: k + 1 - r,
            k,
            r,
        };
        if check_sesgc_defeat(sys, &cert)? {
            return Ok(Some(cert));
        }
    }
    Ok(None)
}
