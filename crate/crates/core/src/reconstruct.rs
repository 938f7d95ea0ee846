//! Candidate least-squares solves and the two reconstructors.
//!
//! For every hypothesis "the attacked sensors are inside S", deleting S's
//! rows and solving `O·x = Y − D·U` over an r-step window yields one state
//! candidate. The true hypothesis always produces the true state, so:
//!
//! - *Search for equal values* (SESVS): enumerate deletions of size s+τ;
//!   at least `C(q−s, τ)` of the candidates must agree on the true state,
//!   so a cluster reaching that size reveals it.
//! - *Growing consistency* (SESGC): enumerate deletions of size s and keep
//!   only hypotheses whose estimates stay consistent with the dynamics as
//!   the window slides forward, shrinking the survivor set each round.

use nalgebra::DVector;
use thiserror::Error;

use crate::combinat::{choose, enumerate_subsets, CombinatError, SensorSet};
use crate::linsys::{LinearSystem, Measurements};
use crate::numeric::{rank_tolerance, EqTol};
use crate::observability::{
    build_stacked, min_r_for_full_rank, sparse_observable_lower_bound, stack_measurements,
    MeasurementWindow, ObservabilityError, StackedOperators,
};

#[derive(Debug, Error)]
pub enum ReconstructError {
    #[error("system is not {order}-sparse observable: removing {order} of {q} sensors leaves nothing measurable")]
    NotSparseObservableDegenerate { order: usize, q: usize },
    #[error("system is not {order}-sparse observable: deleting {failing_subset} never reaches full rank")]
    NotSparseObservable {
        order: usize,
        failing_subset: SensorSet,
    },
    #[error("tau must be at least 1")]
    ZeroTau,
    #[error("operators and window disagree: ops cover {ops_subset} at r={ops_r}, window covers {win_subset} at r={win_r}")]
    OperatorWindowMismatch {
        ops_subset: SensorSet,
        ops_r: usize,
        win_subset: SensorSet,
        win_r: usize,
    },
    #[error(transparent)]
    Observability(#[from] ObservabilityError),
    #[error(transparent)]
    Combinat(#[from] CombinatError),
}

/// One hypothesis solve.
#[derive(Clone, Debug, PartialEq)]
pub struct Candidate {
    /// 1-based position of the subset in canonical order (0 when solved
    /// standalone, outside a candidate set).
    pub ordinal: u64,
    /// The deleted (hypothesized-attacked) sensor set.
    pub subset: SensorSet,
    /// x̂ at the window start, step k − r + 1.
    pub estimate: DVector<f64>,
    /// Whether O had full column rank at the shared tolerance. Estimates
    /// from deficient stacks are minimum-norm artifacts, not states.
    pub solver_ok: bool,
}

/// All candidates for one window, in canonical subset order.
#[derive(Clone, Debug, PartialEq)]
pub struct CandidateSet {
    pub candidates: Vec<Candidate>,
    pub k: usize,
    pub r: usize,
    pub subset_size: usize,
}

/// Solves `O·x = Y − D·U` by SVD (minimum-norm solution). Algebraically
/// identical to `(OᵀO)⁻¹Oᵀ·(Y − D·U)` at full rank, but does not square the
/// condition number. Rank deficiency is reported via `solver_ok`, never an
/// error: the reconstructors decide what to do with a deficient hypothesis.
pub fn solve_candidate(
    ops: &StackedOperators,
    win: &MeasurementWindow,
) -> Result<Candidate, ReconstructError> {
    if ops.subset != win.subset || ops.r != win.r {
        return Err(ReconstructError::OperatorWindowMismatch {
            ops_subset: ops.subset.clone(),
            ops_r: ops.r,
            win_subset: win.subset.clone(),
            win_r: win.r,
        });
    }
    let rhs = if ops.input_map.ncols() > 0 {
        &win.stacked_outputs - &ops.input_map * &win.stacked_inputs
    } else {
        win.stacked_outputs.clone()
    };

    let svd = ops.obs.clone().svd(true, true);
    let sigma_max = svd.singular_values.max();
    let tol = rank_tolerance(ops.obs.nrows(), ops.obs.ncols(), sigma_max);
    let rank = svd.singular_values.iter().filter(|&&s| s > tol).count();
    let estimate = svd
        .solve(&rhs, tol)
        .expect("SVD solve with computed U, V cannot fail")
        .column(0)
        .into_owned();

    Ok(Candidate {
        ordinal: 0,
        subset: ops.subset.clone(),
        estimate,
        solver_ok: rank == ops.obs.ncols(),
    })
}

/// Builds the candidate set for deletions of size `m` over the window
/// ending at step `k` with length `r`.
pub fn candidate_set(
    sys: &LinearSystem,
    meas: &Measurements,
    k: usize,
    r: usize,
    m: usize,
) -> Result<CandidateSet, ReconstructError> {
    let q = sys.sensor_count();
    if m >= q {
        return Err(ObservabilityError::AllRowsDeleted { deleted: m, rows: q }.into());
    }
    let mut candidates = Vec::with_capacity(choose(q, m) as usize);
    for subset in enumerate_subsets(q, m)? {
        let ops = build_stacked(sys, &subset.set, r)?;
        let win = stack_measurements(meas, &subset.set, k, r)?;
        let mut cand = solve_candidate(&ops, &win)?;
        cand.ordinal = subset.ordinal;
        candidates.push(cand);
    }
    Ok(CandidateSet {
        candidates,
        k,
        r,
        subset_size: m,
    })
}

/// A group of candidates whose estimates are pairwise-linked by closeness.
#[derive(Clone, Debug, PartialEq)]
pub struct Cluster {
    /// Member ordinals, ascending.
    pub ordinals: Vec<u64>,
    /// Estimate of the lowest-ordinal member.
    pub representative: DVector<f64>,
    /// Largest coordinate deviation between any two members.
    pub spread: f64,
}

impl Cluster {
    pub fn size(&self) -> usize {
        self.ordinals.len()
    }
}

/// Single-linkage clustering of candidate estimates under `eq_tol`.
/// Transitive closure keeps the rule order-independent: if a~b and b~c,
/// all three land in one cluster even when a and c differ slightly more.
fn cluster_candidates(cands: &[&Candidate], eq_tol: EqTol) -> Vec<Cluster> {
    let n = cands.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut Vec<usize>, i: usize) -> usize {
        if parent[i] != i {
            let root = find(parent, parent[i]);
            parent[i] = root;
        }
        parent[i]
    }
    for i in 0..n {
        for j in i + 1..n {
            if eq_tol.vectors_close(&cands[i].estimate, &cands[j].estimate) {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri] = rj;
                }
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut root_of: Vec<Option<usize>> = vec![None; n];
    for i in 0..n {
        let root = find(&mut parent, i);
        match root_of[root] {
            Some(g) => groups[g].push(i),
            None => {
                root_of[root] = Some(groups.len());
                groups.push(vec![i]);
            }
        }
    }
    let mut clusters: Vec<Cluster> = groups
        .into_iter()
        .map(|members| {
            let mut spread: f64 = 0.0;
            for (a, &i) in members.iter().enumerate() {
                for &j in &members[a + 1..] {
                    let diff = (&cands[i].estimate - &cands[j].estimate).abs().max();
                    spread = spread.max(diff);
                }
            }
            let first = *members
                .iter()
                .min_by_key(|&&i| cands[i].ordinal)
                .expect("clusters are nonempty");
            Cluster {
                ordinals: {
                    let mut o: Vec<u64> = members.iter().map(|&i| cands[i].ordinal).collect();
                    o.sort_unstable();
                    o
                },
                representative: cands[first].estimate.clone(),
                spread,
            }
        })
        .collect();
    clusters.sort_by_key(|c| c.ordinals[0]);
    clusters
}

/// Reconstruction verdict.
#[derive(Clone, Debug, PartialEq)]
pub enum Outcome {
    /// Exactly one qualifying value; the state at step k − r + 1.
    Unique(DVector<f64>),
    /// Two or more irreconcilable values (adversarial or underdetermined).
    Ambiguous(Vec<DVector<f64>>),
    /// No hypothesis qualified.
    Infeasible,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Method {
    Sesvs { tau: usize },
    Sesgc { rounds: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub enum Diagnostics {
    Sesvs {
        /// All clusters found at the final window, canonical order.
        clusters: Vec<Cluster>,
        /// Cluster size needed to qualify: C(q−s, τ).
        threshold: u64,
        /// Window lengths attempted (last one is the reported r).
        windows_tried: Vec<usize>,
        /// Ordinals excluded because their stack was rank deficient.
        excluded: Vec<u64>,
    },
    Sesgc {
        /// Survivor ordinals after each round: D_1, D_2, ….
        surviving: Vec<Vec<u64>>,
        residual_tol: f64,
        /// Ordinals excluded because their stack was rank deficient.
        excluded: Vec<u64>,
    },
}

/// Outcome plus enough context to audit it. Estimates refer to the state
/// at step `k − r + 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct ReconstructionReport {
    pub outcome: Outcome,
    pub method: Method,
    pub k: usize,
    pub r: usize,
    pub diagnostics: Diagnostics,
}

/// Options for [`sesvs_reconstruct`].
#[derive(Clone, Debug)]
pub struct SesvsOptions {
    pub tau: usize,
    /// Window length; `None` derives the (s+τ)-sparse observable lower
    /// bound (and then requires the system to be (s+τ)-sparse observable).
    pub r: Option<usize>,
    pub eq_tol: EqTol,
    /// Raise r when a deficient stack could become full rank with a longer
    /// window (the "singular matrix" fallback). Structural deficiencies —
    /// subsets that can never reach full rank — do not trigger retries;
    /// they are excluded and reported instead.
    pub fallback: bool,
}

impl Default for SesvsOptions {
    fn default() -> Self {
        SesvsOptions {
            tau: 1,
            r: None,
            eq_tol: EqTol::default(),
            fallback: true,
        }
    }
}

/// Options for [`sesgc_reconstruct`].
#[derive(Clone, Debug)]
pub struct SesgcOptions {
    /// Window length; `None` derives the s-sparse observable lower bound.
    pub r: Option<usize>,
    /// Residual bound for keeping a hypothesis, ‖x'−Ax−Bu‖₂ ≤ tol.
    pub residual_tol: f64,
    /// Round cap; `None` means n + 5.
    pub max_rounds: Option<usize>,
    pub eq_tol: EqTol,
    /// Same window fallback as SESVS, off by default: sliding-window
    /// filtering already discards deficient hypotheses via residuals.
    pub fallback: bool,
}

impl Default for SesgcOptions {
    fn default() -> Self {
        SesgcOptions {
            r: None,
            residual_tol: 0.1,
            max_rounds: None,
            eq_tol: EqTol::default(),
            fallback: false,
        }
    }
}

/// Candidate sets are dense in canonical order, so ordinal j sits at j−1.
fn estimate_by_ordinal(set: &CandidateSet, ordinal: u64) -> &DVector<f64> {
    &set.candidates[(ordinal - 1) as usize].estimate
}

fn map_bound_error(e: ObservabilityError) -> ReconstructError {
    match e {
        ObservabilityError::NotSparseObservable { s, failing_subset } => {
            ReconstructError::NotSparseObservable {
                order: s,
                failing_subset,
            }
        }
        other => other.into(),
    }
}

/// A deficient subset is *fixable* when a longer window reaches full rank.
fn has_fixable_deficiency(sys: &LinearSystem, cands: &CandidateSet) -> bool {
    cands
        .candidates
        .iter()
        .filter(|c| !c.solver_ok)
        .any(|c| matches!(min_r_for_full_rank(sys, &c.subset), Some(r_full) if r_full > cands.r))
}

/// Search for equal values: enumerate deletions of size s+τ, cluster the
/// estimates, and accept the cluster(s) reaching size C(q−s, τ).
pub fn sesvs_reconstruct(
    sys: &LinearSystem,
    meas: &Measurements,
    k: usize,
    s: usize,
    opts: &SesvsOptions,
) -> Result<ReconstructionReport, ReconstructError> {
    let q = sys.sensor_count();
    let n = sys.state_dim();
    if opts.tau == 0 {
        return Err(ReconstructError::ZeroTau);
    }
    let m = s + opts.tau;
    if q < m + 1 {
        return Err(ReconstructError::NotSparseObservableDegenerate { order: m, q });
    }
    let mut r = match opts.r {
        Some(r) => r,
        None => sparse_observable_lower_bound(sys, m).map_err(map_bound_error)?,
    };

    let threshold = choose(q - s, opts.tau);
    let mut windows_tried = Vec::new();
    loop {
        windows_tried.push(r);
        let cands = candidate_set(sys, meas, k, r, m)?;
        if opts.fallback && r < n && k >= r && has_fixable_deficiency(sys, &cands) {
            r += 1;
            continue;
        }

        let usable: Vec<&Candidate> =
            cands.candidates.iter().filter(|c| c.solver_ok).collect();
        let excluded: Vec<u64> = cands
            .candidates
            .iter()
            .filter(|c| !c.solver_ok)
            .map(|c| c.ordinal)
            .collect();
        let clusters = cluster_candidates(&usable, opts.eq_tol);
        let qualifying: Vec<&Cluster> = clusters
            .iter()
            .filter(|c| c.size() as u64 >= threshold)
            .collect();
        let outcome = match qualifying.len() {
            0 => Outcome::Infeasible,
            1 => Outcome::Unique(qualifying[0].representative.clone()),
            _ => Outcome::Ambiguous(
                qualifying
                    .iter()
                    .map(|c| c.representative.clone())
                    .collect(),
            ),
        };
        return Ok(ReconstructionReport {
            outcome,
            method: Method::Sesvs { tau: opts.tau },
            k,
            r,
            diagnostics: Diagnostics::Sesvs {
                clusters,
                threshold,
                windows_tried,
                excluded,
            },
        });
    }
}

/// Growing consistency: enumerate deletions of size s and repeatedly drop
/// hypotheses whose sliding-window estimates violate the dynamics
/// `x_{t+1} = A·x_t + B·u_t` by more than `residual_tol`.
pub fn sesgc_reconstruct(
    sys: &LinearSystem,
    meas: &Measurements,
    k: usize,
    s: usize,
    opts: &SesgcOptions,
) -> Result<ReconstructionReport, ReconstructError> {
    let q = sys.sensor_count();
    let n = sys.state_dim();
    if s >= q {
        return Err(ReconstructError::NotSparseObservableDegenerate { order: s, q });
    }
    let mut r = match opts.r {
        Some(r) => r,
        None => sparse_observable_lower_bound(sys, s).map_err(map_bound_error)?,
    };

    let mut base;
    loop {
        base = candidate_set(sys, meas, k, r, s)?;
        if opts.fallback && r < n && k >= r && has_fixable_deficiency(sys, &base) {
            r += 1;
            continue;
        }
        break;
    }

    let excluded: Vec<u64> = base
        .candidates
        .iter()
        .filter(|c| !c.solver_ok)
        .map(|c| c.ordinal)
        .collect();
    let mut alive: Vec<u64> = base
        .candidates
        .iter()
        .filter(|c| c.solver_ok)
        .map(|c| c.ordinal)
        .collect();
    let max_rounds = opts.max_rounds.unwrap_or(n + 5);
    let mut surviving: Vec<Vec<u64>> = Vec::new();
    let mut rounds = 0;
    let mut prev = base.clone();

    let report = |outcome, rounds, surviving, excluded| ReconstructionReport {
        outcome,
        method: Method::Sesgc { rounds },
        k,
        r,
        diagnostics: Diagnostics::Sesgc {
            surviving,
            residual_tol: opts.residual_tol,
            excluded,
        },
    };

    let consensus = |alive: &[u64]| -> bool {
        alive.windows(2).all(|pair| {
            opts.eq_tol
                .vectors_close(estimate_by_ordinal(&base, pair[0]), estimate_by_ordinal(&base, pair[1]))
        })
    };

    if alive.is_empty() {
        return Ok(report(Outcome::Infeasible, 0, surviving, excluded));
    }
    if alive.len() == 1 || consensus(&alive) {
        let value = estimate_by_ordinal(&base, alive[0]).clone();
        return Ok(report(Outcome::Unique(value), 0, surviving, excluded));
    }

    while rounds < max_rounds {
        let k_next = k + rounds + 1;
        if k_next > meas.horizon() {
            break; // measurements exhausted; report what survived
        }
        let next = candidate_set(sys, meas, k_next, r, s)?;
        // The estimates x̂ of `prev` sit at step k_next − r; stepping them
        // once through the dynamics must land on the estimates of `next`.
        let u_index = k_next - r;
        let pu = if sys.input_dim() > 0 && u_index < meas.inputs.len() {
            sys.b() * &meas.inputs[u_index]
        } else {
            DVector::zeros(n)
        };
        alive.retain(|&j| {
            let stepped = sys.a() * estimate_by_ordinal(&prev, j) + &pu;
            let residual = (estimate_by_ordinal(&next, j) - stepped).norm();
            residual <= opts.residual_tol
        });
        rounds += 1;
        surviving.push(alive.clone());
        if alive.is_empty() {
            return Ok(report(Outcome::Infeasible, rounds, surviving, excluded));
        }
        if alive.len() == 1 || consensus(&alive) {
            let value = estimate_by_ordinal(&base, alive[0]).clone();
            return Ok(report(Outcome::Unique(value), rounds, surviving, excluded));
        }
        prev = next;
    }

    // No consensus within the data or round budget: report the distinct
    // surviving values.
    let members: Vec<&Candidate> = alive
        .iter()
        .map(|&j| &base.candidates[(j - 1) as usize])
        .collect();
    let reps: Vec<DVector<f64>> = cluster_candidates(&members, opts.eq_tol)
        .into_iter()
        .map(|c| c.representative)
        .collect();
    Ok(report(Outcome::Ambiguous(reps), rounds, surviving, excluded))
}
