//! Secure state reconstruction for discrete-time LTI systems under sparse
//! sensor attacks.
//!
//! The model is `x_{k+1} = A·x_k + B·u_k`, `y_k = C·x_k + a_k`, where the
//! attack `a_k` is supported on a fixed but unknown set Γ of at most `s`
//! sensors and is otherwise arbitrary. When enough sensor subsets remain
//! observable after deletions ("s-sparse observability"), the state can be
//! recovered exactly by solving least-squares problems over subset
//! hypotheses and comparing the resulting estimates.
//!
//! Crate layout:
//! - [`linsys`]: system model, attack scenarios, simulation.
//! - [`combinat`]: canonical subset enumeration and binomial counts.
//! - [`observability`]: stacked operators, rank certificates, sparse
//!   observability and its window lower bound.
//! - [`reconstruct`]: the candidate solver and the two reconstructors
//!   (search-for-equal-values and growing-consistency filtering).
//! - [`adversary`]: checking and synthesizing attack sequences that defeat
//!   either reconstructor.

pub mod adversary;
pub mod combinat;
pub mod linsys;
pub mod numeric;
pub mod observability;
pub mod reconstruct;

pub use combinat::{choose, enumerate_subsets, sesvs_guarantee_holds, SensorSet, SubsetIndex};
pub use linsys::{
    inject_attack, simulate, AttackScenario, InputSignal, LinearSystem, Measurements, Trajectory,
};
pub use numeric::EqTol;
pub use observability::{
    build_stacked, delete_rows, is_s_sparse_observable, min_r_for_full_rank, observability_report,
    sparse_observable_lower_bound, stack_measurements, MeasurementWindow, ObservabilityReport,
    StackedOperators,
};
pub use reconstruct::{
    candidate_set, sesgc_reconstruct, sesvs_reconstruct, solve_candidate, Candidate, CandidateSet,
    Cluster, Diagnostics, Method, Outcome, ReconstructionReport, SesgcOptions, SesvsOptions,
};
pub use adversary::{
    check_sesgc_defeat, check_sesvs_defeat, synthesize_sesgc_defeat, synthesize_sesvs_defeat,
    DefeatCertificate, DefeatTarget, StackedAttack,
};
