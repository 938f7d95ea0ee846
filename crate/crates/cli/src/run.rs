//! Executes a resolved scenario: simulate, audit, reconstruct, or search
//! for defeat certificates. Produces the data the report writers render.

use std::time::Instant;

use ssr_core::{
    candidate_set, observability_report, sesgc_reconstruct, sesvs_reconstruct,
    sparse_observable_lower_bound, sesvs_guarantee_holds, synthesize_sesgc_defeat,
    synthesize_sesvs_defeat, CandidateSet, DefeatCertificate, LinearSystem, Measurements,
    ReconstructionReport, SensorSet,
};

use crate::scenario::{resolved_file, Scenario, ScenarioFile};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("simulation failed: {0}")]
    Simulation(#[from] ssr_core::linsys::LinsysError),
    #[error("attack-synth needs an [attack] section with a nonempty gamma")]
    NoAttackSupport,
    #[error("cannot derive a window for synthesis: {0}; set [run] r explicitly")]
    SynthWindow(String),
    #[error("attack synthesis failed: {0}")]
    Synthesis(#[from] ssr_core::adversary::AdversaryError),
    #[error("audit failed: {0}")]
    Audit(#[from] ssr_core::observability::ObservabilityError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SynthTarget {
    Sesvs,
    Sesgc,
}

/// One row of the majority-guarantee table: with hypotheses of size s+τ,
/// a cluster of C(q−s, τ) equal values is decisive iff `holds`.
#[derive(Clone, Debug)]
pub struct GuaranteeRow {
    pub tau: usize,
    pub family_size: u64,
    pub threshold: u64,
    pub holds: bool,
}

/// Observability survey attached to every report.
#[derive(Clone, Debug)]
pub struct AuditData {
    pub state_dim: usize,
    pub sensors: usize,
    pub inputs: usize,
    pub s: usize,
    pub s_max: Option<usize>,
    /// Minimal full-rank window per size-s deletion; None = never.
    pub subset_bounds: Vec<(SensorSet, Option<usize>)>,
    /// max over size-s deletions (the window bound b); None when some
    /// deletion is never full rank.
    pub window_bound: Option<usize>,
    pub hypothesis_size: usize,
    /// Same survey for the majority search's size-(s+τ) deletions; empty
    /// when s+τ ≥ q (no hypothesis leaves a sensor standing).
    pub hypothesis_bounds: Vec<(SensorSet, Option<usize>)>,
    pub hypothesis_bound: Option<usize>,
    pub guarantee: Vec<GuaranteeRow>,
}

pub fn audit_data(sys: &LinearSystem, s: usize, tau: usize) -> Result<AuditData, RunError> {
    let q = sys.sensor_count();
    let base = observability_report(sys, s)?;
    let (hyp_bounds, hyp_bound) = if s + tau < q {
        let rep = observability_report(sys, s + tau)?;
        (rep.per_subset_min_r, rep.lower_bound_b)
    } else {
        (Vec::new(), None)
    };
    let guarantee = (1..q.saturating_sub(s))
        .map(|t| {
            let holds = sesvs_guarantee_holds(q, s, t).unwrap_or(false);
            GuaranteeRow {
                tau: t,
                family_size: ssr_core::choose(q, s + t),
                threshold: ssr_core::choose(q - s, t),
                holds,
            }
        })
        .collect();
    Ok(AuditData {
        state_dim: sys.state_dim(),
        sensors: q,
        inputs: sys.input_dim(),
        s,
        s_max: base.s_max,
        subset_bounds: base.per_subset_min_r,
        window_bound: base.lower_bound_b,
        hypothesis_size: s + tau,
        hypothesis_bounds: hyp_bounds,
        hypothesis_bound: hyp_bound,
        guarantee,
    })
}

/// One reconstructor's run: the report plus the candidate set at its
/// final window, or the reason it could not run.
#[derive(Debug)]
pub struct MethodRun {
    pub name: &'static str,
    pub result: Result<(ReconstructionReport, CandidateSet), String>,
    pub millis: f64,
}

#[derive(Debug)]
pub struct SynthRun {
    pub target: SynthTarget,
    pub true_gamma: SensorSet,
    pub k: usize,
    pub r: usize,
    /// τ for the majority target, certified rounds for the consistency
    /// target.
    pub depth: usize,
    pub certificate: Option<DefeatCertificate>,
    pub millis: f64,
}

/// Everything a report needs, in render order.
#[derive(Debug)]
pub struct Artifacts {
    pub resolved: ScenarioFile,
    pub horizon: usize,
    pub audit: AuditData,
    pub methods: Vec<MethodRun>,
    pub synth: Option<SynthRun>,
}

/// Window length a method will start from: the explicit override or the
/// observability lower bound for its deletion size.
fn planned_window(
    sys: &LinearSystem,
    explicit: Option<usize>,
    size: usize,
) -> Result<usize, String> {
    match explicit {
        Some(r) => Ok(r),
        None => sparse_observable_lower_bound(sys, size).map_err(|e| e.to_string()),
    }
}

/// The default data horizon: enough history for the latest window plus a
/// full round budget for the consistency filter.
fn default_horizon(scenario: &Scenario) -> usize {
    let n = scenario.system.state_dim();
    let mut max_k = 0;
    let mut consider = |size: usize| {
        let r = planned_window(&scenario.system, scenario.r, size).unwrap_or(n);
        let k = scenario.k.unwrap_or(r.saturating_sub(1));
        max_k = max_k.max(k);
    };
    if scenario.method.runs_sesvs() {
        consider(scenario.s + scenario.tau);
    }
    if scenario.method.runs_sesgc() {
        consider(scenario.s);
    }
    max_k + n + 6
}

fn run_sesvs(scenario: &Scenario, meas: &Measurements) -> MethodRun {
    let start = Instant::now();
    let size = scenario.s + scenario.tau;
    let result = planned_window(&scenario.system, scenario.r, size).and_then(|r_plan| {
        let k = scenario.k.unwrap_or(r_plan.saturating_sub(1));
        let opts = ssr_core::SesvsOptions {
            tau: scenario.tau,
            r: scenario.r,
            eq_tol: scenario.eq_tol,
            fallback: scenario.fallback.unwrap_or(true),
        };
        let report = sesvs_reconstruct(&scenario.system, meas, k, scenario.s, &opts)
            .map_err(|e| e.to_string())?;
        let cands = candidate_set(&scenario.system, meas, report.k, report.r, size)
            .map_err(|e| e.to_string())?;
        Ok((report, cands))
    });
    MethodRun {
        name: "sesvs",
        result,
        millis: start.elapsed().as_secs_f64() * 1e3,
    }
}

fn run_sesgc(scenario: &Scenario, meas: &Measurements) -> MethodRun {
    let start = Instant::now();
    let result = planned_window(&scenario.system, scenario.r, scenario.s).and_then(|r_plan| {
        let k = scenario.k.unwrap_or(r_plan.saturating_sub(1));
        let opts = ssr_core::SesgcOptions {
            r: scenario.r,
            residual_tol: scenario.residual_tol,
            max_rounds: scenario.max_rounds,
            eq_tol: scenario.eq_tol,
            fallback: scenario.fallback.unwrap_or(false),
        };
        let report = sesgc_reconstruct(&scenario.system, meas, k, scenario.s, &opts)
            .map_err(|e| e.to_string())?;
        let cands = candidate_set(&scenario.system, meas, report.k, report.r, scenario.s)
            .map_err(|e| e.to_string())?;
        Ok((report, cands))
    });
    MethodRun {
        name: "sesgc",
        result,
        millis: start.elapsed().as_secs_f64() * 1e3,
    }
}

/// The `reconstruct` verb: simulate the scenario once, then run every
/// selected method on the recorded measurements.
pub fn run_reconstruct(scenario: &Scenario) -> Result<Artifacts, RunError> {
    let horizon = scenario.horizon.unwrap_or_else(|| default_horizon(scenario));
    let traj = ssr_core::simulate(
        &scenario.system,
        &scenario.x0,
        &scenario.input,
        scenario.attack.as_ref(),
        horizon,
    )?;
    let meas = traj.measurements();

    let mut methods = Vec::new();
    if scenario.method.runs_sesvs() {
        methods.push(run_sesvs(scenario, &meas));
    }
    if scenario.method.runs_sesgc() {
        methods.push(run_sesgc(scenario, &meas));
    }

    Ok(Artifacts {
        resolved: resolved_file(scenario, horizon),
        horizon,
        audit: audit_data(&scenario.system, scenario.s, scenario.tau)?,
        methods,
        synth: None,
    })
}

/// The `audit` verb: the observability survey alone.
pub fn run_audit(scenario: &Scenario) -> Result<Artifacts, RunError> {
    let horizon = scenario.horizon.unwrap_or_else(|| default_horizon(scenario));
    Ok(Artifacts {
        resolved: resolved_file(scenario, horizon),
        horizon,
        audit: audit_data(&scenario.system, scenario.s, scenario.tau)?,
        methods: Vec::new(),
        synth: None,
    })
}

/// The `attack-synth` verb: search for an attack sequence, supported on
/// the scenario's gamma, that defeats the targeted reconstructor.
pub fn run_attack_synth(scenario: &Scenario, target: SynthTarget) -> Result<Artifacts, RunError> {
    let gamma = scenario
        .attack
        .as_ref()
        .map(|a| a.gamma().clone())
        .filter(|g| !g.is_empty())
        .ok_or(RunError::NoAttackSupport)?;
    let sys = &scenario.system;
    let size = match target {
        SynthTarget::Sesvs => gamma.len() + scenario.tau,
        SynthTarget::Sesgc => gamma.len(),
    };
    let r = planned_window(sys, scenario.r, size).map_err(RunError::SynthWindow)?;
    let k = scenario.k.unwrap_or(r.saturating_sub(1));

    let start = Instant::now();
    let (depth, certificate) = match target {
        SynthTarget::Sesvs => (
            scenario.tau,
            synthesize_sesvs_defeat(sys, &gamma, k, r, scenario.tau)?,
        ),
        SynthTarget::Sesgc => {
            let rounds = scenario.rounds.unwrap_or(2);
            (rounds, synthesize_sesgc_defeat(sys, &gamma, k, r, rounds)?)
        }
    };
    let millis = start.elapsed().as_secs_f64() * 1e3;

    let horizon = scenario.horizon.unwrap_or(k + sys.state_dim() + 6);
    Ok(Artifacts {
        resolved: resolved_file(scenario, horizon),
        horizon,
        audit: audit_data(sys, gamma.len(), scenario.tau)?,
        methods: Vec::new(),
        synth: Some(SynthRun {
            target,
            true_gamma: gamma,
            k,
            r,
            depth,
            certificate,
            millis,
        }),
    })
}

/// Process exit code for a finished run: 0 reconstructed/found, 2
/// ambiguous, 3 infeasible/none. (Config errors exit 1 before this.)
pub fn exit_code(artifacts: &Artifacts) -> i32 {
    if let Some(synth) = &artifacts.synth {
        return if synth.certificate.is_some() { 0 } else { 3 };
    }
    if artifacts.methods.is_empty() {
        return 0; // audit
    }
    artifacts
        .methods
        .iter()
        .map(|m| match &m.result {
            Ok((report, _)) => match report.outcome {
                ssr_core::Outcome::Unique(_) => 0,
                ssr_core::Outcome::Ambiguous(_) => 2,
                ssr_core::Outcome::Infeasible => 3,
            },
            Err(_) => 3,
        })
        .min()
        .unwrap_or(3)
}
