//! Report writers. The machine format is TOML with a fixed key order and
//! fixed float formatting (12 significant digits), so identical runs
//! produce byte-identical documents; timings appear only in the human
//! format. The `[resolved]` table echoes the fully expanded scenario and
//! re-parses as a scenario file.

use std::fmt::Write as _;

use nalgebra::DVector;
use ssr_core::{CandidateSet, Diagnostics, Method, Outcome, SensorSet};

use crate::run::{Artifacts, MethodRun, SynthRun, SynthTarget};
use crate::scenario::ScenarioFile;

pub const SCHEMA: &str = "ssr.report.v1";

// ---------------------------------------------------------------------
// Formatting primitives

/// 12 significant digits, exponent form: parses back as a TOML float.
fn num(x: f64) -> String {
    format!("{:.11e}", x)
}

fn num_list(values: impl IntoIterator<Item = f64>) -> String {
    let inner: Vec<String> = values.into_iter().map(num).collect();
    format!("[{}]", inner.join(", "))
}

fn vec_list(v: &DVector<f64>) -> String {
    num_list(v.iter().copied())
}

fn int_list<T: ToString>(values: &[T]) -> String {
    let inner: Vec<String> = values.iter().map(T::to_string).collect();
    format!("[{}]", inner.join(", "))
}

fn subset_list(s: &SensorSet) -> String {
    int_list(s.as_slice())
}

fn matrix_list(rows: &[Vec<f64>]) -> String {
    let inner: Vec<String> = rows
        .iter()
        .map(|row| num_list(row.iter().copied()))
        .collect();
    format!("[{}]", inner.join(", "))
}

fn toml_quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for ch in s.chars() {
        match ch {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            c if (c as u32) < 0x20 => {
                let _ = write!(out, "\\u{:04X}", c as u32);
            }
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

fn outcome_status(outcome: &Outcome) -> &'static str {
    match outcome {
        Outcome::Unique(_) => "unique",
        Outcome::Ambiguous(_) => "ambiguous",
        Outcome::Infeasible => "infeasible",
    }
}

fn status_rank(status: &str) -> u8 {
    match status {
        "unique" => 0,
        "ambiguous" => 2,
        "infeasible" => 3,
        _ => 4,
    }
}

fn overall_status(artifacts: &Artifacts) -> &'static str {
    if let Some(synth) = &artifacts.synth {
        return if synth.certificate.is_some() {
            "found"
        } else {
            "none"
        };
    }
    if artifacts.methods.is_empty() {
        return "ok";
    }
    let mut best = "error";
    for m in &artifacts.methods {
        let status = match &m.result {
            Ok((report, _)) => outcome_status(&report.outcome),
            Err(_) => "error",
        };
        if status_rank(status) < status_rank(best) {
            best = status;
        }
    }
    best
}

// ---------------------------------------------------------------------
// Machine format

fn write_audit_machine(out: &mut String, artifacts: &Artifacts) {
    let a = &artifacts.audit;
    out.push_str("[audit]\n");
    let _ = writeln!(out, "state_dim = {}", a.state_dim);
    let _ = writeln!(out, "sensors = {}", a.sensors);
    let _ = writeln!(out, "inputs = {}", a.inputs);
    let _ = writeln!(out, "s = {}", a.s);
    let _ = writeln!(out, "hypothesis_size = {}", a.hypothesis_size);
    if let Some(s_max) = a.s_max {
        let _ = writeln!(out, "s_max = {}", s_max);
    }
    if let Some(b) = a.window_bound {
        let _ = writeln!(out, "window_bound = {}", b);
    }
    if let Some(b) = a.hypothesis_bound {
        let _ = writeln!(out, "hypothesis_bound = {}", b);
    }
    let bounds = |rows: &[(SensorSet, Option<usize>)]| -> String {
        let inner: Vec<String> = rows
            .iter()
            .map(|(subset, min_r)| match min_r {
                Some(r) => format!("{{ subset = {}, min_r = {} }}", subset_list(subset), r),
                None => format!("{{ subset = {} }}", subset_list(subset)),
            })
            .collect();
        format!("[{}]", inner.join(", "))
    };
    let _ = writeln!(out, "subset_bounds = {}", bounds(&a.subset_bounds));
    if !a.hypothesis_bounds.is_empty() {
        let _ = writeln!(
            out,
            "hypothesis_subset_bounds = {}",
            bounds(&a.hypothesis_bounds)
        );
    }
    if !a.guarantee.is_empty() {
        let rows: Vec<String> = a
            .guarantee
            .iter()
            .map(|g| {
                format!(
                    "{{ tau = {}, family_size = {}, threshold = {}, holds = {} }}",
                    g.tau, g.family_size, g.threshold, g.holds
                )
            })
            .collect();
        let _ = writeln!(out, "guarantee = [{}]", rows.join(", "));
    }
}

fn write_candidates_machine(out: &mut String, cands: &CandidateSet) {
    let rows: Vec<String> = cands
        .candidates
        .iter()
        .map(|c| {
            format!(
                "{{ ordinal = {}, subset = {}, solver_ok = {}, estimate = {} }}",
                c.ordinal,
                subset_list(&c.subset),
                c.solver_ok,
                vec_list(&c.estimate)
            )
        })
        .collect();
    let _ = writeln!(out, "candidates = [{}]", rows.join(", "));
}

fn write_method_machine(out: &mut String, m: &MethodRun) {
    out.push_str("[[method]]\n");
    let _ = writeln!(out, "name = {}", toml_quote(m.name));
    match &m.result {
        Err(message) => {
            out.push_str("status = \"error\"\n");
            let _ = writeln!(out, "error = {}", toml_quote(message));
        }
        Ok((report, cands)) => {
            let _ = writeln!(out, "status = {}", toml_quote(outcome_status(&report.outcome)));
            let _ = writeln!(out, "k = {}", report.k);
            let _ = writeln!(out, "r = {}", report.r);
            match &report.method {
                Method::Sesvs { tau } => {
                    let _ = writeln!(out, "tau = {}", tau);
                }
                Method::Sesgc { rounds } => {
                    let _ = writeln!(out, "rounds = {}", rounds);
                }
            }
            match &report.diagnostics {
                Diagnostics::Sesvs {
                    clusters,
                    threshold,
                    windows_tried,
                    excluded,
                } => {
                    let _ = writeln!(out, "threshold = {}", threshold);
                    let _ = writeln!(out, "windows_tried = {}", int_list(windows_tried));
                    let _ = writeln!(out, "excluded = {}", int_list(excluded));
                    let rows: Vec<String> = clusters
                        .iter()
                        .map(|c| {
                            format!(
                                "{{ ordinals = {}, spread = {}, representative = {} }}",
                                int_list(&c.ordinals),
                                num(c.spread),
                                vec_list(&c.representative)
                            )
                        })
                        .collect();
                    let _ = writeln!(out, "clusters = [{}]", rows.join(", "));
                }
                Diagnostics::Sesgc {
                    surviving,
                    residual_tol,
                    excluded,
                } => {
                    let _ = writeln!(out, "residual_tol = {}", num(*residual_tol));
                    let _ = writeln!(out, "excluded = {}", int_list(excluded));
                    let rounds: Vec<String> = surviving.iter().map(|d| int_list(d)).collect();
                    let _ = writeln!(out, "surviving = [{}]", rounds.join(", "));
                }
            }
            match &report.outcome {
                Outcome::Unique(x) => {
                    let _ = writeln!(out, "estimate = {}", vec_list(x));
                }
                Outcome::Ambiguous(reps) => {
                    let rows: Vec<String> = reps.iter().map(vec_list).collect();
                    let _ = writeln!(out, "representatives = [{}]", rows.join(", "));
                }
                Outcome::Infeasible => {}
            }
            write_candidates_machine(out, cands);
        }
    }
}

fn write_synth_machine(out: &mut String, synth: &SynthRun) {
    out.push_str("[synthesis]\n");
    let target = match synth.target {
        SynthTarget::Sesvs => "sesvs",
        SynthTarget::Sesgc => "sesgc",
    };
    let _ = writeln!(out, "target = {}", toml_quote(target));
    match synth.target {
        SynthTarget::Sesvs => {
            let _ = writeln!(out, "tau = {}", synth.depth);
        }
        SynthTarget::Sesgc => {
            let _ = writeln!(out, "rounds = {}", synth.depth);
        }
    }
    let _ = writeln!(out, "true_gamma = {}", subset_list(&synth.true_gamma));
    let _ = writeln!(out, "k = {}", synth.k);
    let _ = writeln!(out, "r = {}", synth.r);

    if let Some(cert) = &synth.certificate {
        out.push('\n');
        out.push_str("[certificate]\n");
        let _ = writeln!(out, "start_step = {}", cert.start_step);
        let _ = writeln!(out, "bias = {}", vec_list(&cert.bias));
        let subsets: Vec<String> = cert.subsets.iter().map(subset_list).collect();
        let _ = writeln!(out, "subsets = [{}]", subsets.join(", "));
        let attacks: Vec<String> = cert
            .step_attacks
            .iter()
            .enumerate()
            .map(|(i, values)| {
                format!(
                    "{{ step = {}, values = {} }}",
                    cert.start_step + i,
                    vec_list(values)
                )
            })
            .collect();
        let _ = writeln!(out, "attacks = [{}]", attacks.join(", "));
    }
}

fn write_resolved_machine(out: &mut String, file: &ScenarioFile) {
    out.push_str("[resolved.system]\n");
    if let Some(a) = &file.system.a {
        let _ = writeln!(out, "a = {}", matrix_list(a));
    }
    if let Some(b) = &file.system.b {
        let _ = writeln!(out, "b = {}", matrix_list(b));
    }
    if let Some(c) = &file.system.c {
        let _ = writeln!(out, "c = {}", matrix_list(c));
    }
    if let Some(initial) = &file.initial {
        out.push('\n');
        out.push_str("[resolved.initial]\n");
        let _ = writeln!(out, "x0 = {}", num_list(initial.x0.iter().copied()));
    }
    if let Some(input) = &file.input {
        out.push('\n');
        out.push_str("[resolved.input]\n");
        if let Some(c) = &input.constant {
            let _ = writeln!(out, "constant = {}", num_list(c.iter().copied()));
        }
        if let Some(exprs) = &input.expr {
            let quoted: Vec<String> = exprs.iter().map(|e| toml_quote(e)).collect();
            let _ = writeln!(out, "expr = [{}]", quoted.join(", "));
        }
        if let Some(steps) = &input.steps {
            let _ = writeln!(out, "steps = {}", matrix_list(steps));
        }
    }
    if let Some(attack) = &file.attack {
        out.push('\n');
        out.push_str("[resolved.attack]\n");
        let _ = writeln!(out, "gamma = {}", int_list(&attack.gamma));
        if !attack.signals.is_empty() {
            out.push('\n');
            out.push_str("[resolved.attack.signals]\n");
            for (key, text) in &attack.signals {
                let _ = writeln!(out, "{} = {}", key, toml_quote(text));
            }
        }
    }
    out.push('\n');
    out.push_str("[resolved.run]\n");
    let run = &file.run;
    if let Some(method) = &run.method {
        let _ = writeln!(out, "method = {}", toml_quote(method));
    }
    if let Some(s) = run.s {
        let _ = writeln!(out, "s = {}", s);
    }
    if let Some(tau) = run.tau {
        let _ = writeln!(out, "tau = {}", tau);
    }
    if let Some(r) = run.r {
        let _ = writeln!(out, "r = {}", r);
    }
    if let Some(k) = run.k {
        let _ = writeln!(out, "k = {}", k);
    }
    if let Some(horizon) = run.horizon {
        let _ = writeln!(out, "horizon = {}", horizon);
    }
    if let Some(v) = run.eq_tol_abs {
        let _ = writeln!(out, "eq_tol_abs = {}", num(v));
    }
    if let Some(v) = run.eq_tol_rel {
        let _ = writeln!(out, "eq_tol_rel = {}", num(v));
    }
    if let Some(v) = run.residual_tol {
        let _ = writeln!(out, "residual_tol = {}", num(v));
    }
    if let Some(v) = run.max_rounds {
        let _ = writeln!(out, "max_rounds = {}", v);
    }
    if let Some(v) = run.fallback {
        let _ = writeln!(out, "fallback = {}", v);
    }
    if let Some(v) = run.rounds {
        let _ = writeln!(out, "rounds = {}", v);
    }
}

pub fn machine_report(artifacts: &Artifacts, verb: &str) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "schema = {}", toml_quote(SCHEMA));
    let _ = writeln!(out, "verb = {}", toml_quote(verb));
    let _ = writeln!(out, "status = {}", toml_quote(overall_status(artifacts)));
    let _ = writeln!(out, "horizon = {}", artifacts.horizon);
    out.push('\n');
    write_audit_machine(&mut out, artifacts);
    for m in &artifacts.methods {
        out.push('\n');
        write_method_machine(&mut out, m);
    }
    if let Some(synth) = &artifacts.synth {
        out.push('\n');
        write_synth_machine(&mut out, synth);
    }
    out.push('\n');
    write_resolved_machine(&mut out, &artifacts.resolved);
    out
}

// ---------------------------------------------------------------------
// Human format

fn plain_vec(v: &DVector<f64>) -> String {
    let inner: Vec<String> = v.iter().map(|x| x.to_string()).collect();
    format!("[{}]", inner.join(", "))
}

fn brace_set(s: &SensorSet) -> String {
    let inner: Vec<String> = s.iter().map(|i| i.to_string()).collect();
    format!("{{{}}}", inner.join(","))
}

fn write_audit_human(out: &mut String, artifacts: &Artifacts) {
    let a = &artifacts.audit;
    out.push_str("observability audit\n");
    let s_max = a
        .s_max
        .map(|v| v.to_string())
        .unwrap_or_else(|| "none".into());
    let bound = a
        .window_bound
        .map(|v| v.to_string())
        .unwrap_or_else(|| "none".into());
    let _ = writeln!(
        out,
        "  deletions of size s = {}: window bound b = {}, s_max = {}",
        a.s, bound, s_max
    );
    let never: Vec<String> = a
        .subset_bounds
        .iter()
        .filter(|(_, r)| r.is_none())
        .map(|(subset, _)| brace_set(subset))
        .collect();
    if !never.is_empty() {
        let _ = writeln!(out, "  never full rank at size {}: {}", a.s, never.join(", "));
    }
    if !a.hypothesis_bounds.is_empty() {
        let bound = a
            .hypothesis_bound
            .map(|v| v.to_string())
            .unwrap_or_else(|| "none".into());
        let _ = writeln!(
            out,
            "  hypotheses of size s+tau = {}: window bound = {}",
            a.hypothesis_size, bound
        );
        let never: Vec<String> = a
            .hypothesis_bounds
            .iter()
            .filter(|(_, r)| r.is_none())
            .map(|(subset, _)| brace_set(subset))
            .collect();
        if !never.is_empty() {
            let _ = writeln!(
                out,
                "  never full rank at size {}: {}",
                a.hypothesis_size,
                never.join(", ")
            );
        }
    }
    for g in &a.guarantee {
        let verdict = if g.holds {
            "attack-proof majority"
        } else {
            "majority can be faked"
        };
        let _ = writeln!(
            out,
            "  tau = {}: {} hypotheses, cluster threshold {} -> {}",
            g.tau, g.family_size, g.threshold, verdict
        );
    }
}

fn write_method_human(out: &mut String, m: &MethodRun) {
    match &m.result {
        Err(message) => {
            let _ = writeln!(out, "{}: error ({:.3} ms)", m.name, m.millis);
            let _ = writeln!(out, "  {}", message);
        }
        Ok((report, cands)) => {
            let _ = writeln!(
                out,
                "{}: {} ({:.3} ms)",
                m.name,
                outcome_status(&report.outcome),
                m.millis
            );
            match &report.diagnostics {
                Diagnostics::Sesvs {
                    clusters,
                    threshold,
                    windows_tried,
                    excluded,
                } => {
                    let tau = match report.method {
                        Method::Sesvs { tau } => tau,
                        _ => 0,
                    };
                    let _ = writeln!(
                        out,
                        "  k = {}, r = {}, tau = {}, cluster threshold = {}",
                        report.k, report.r, tau, threshold
                    );
                    let _ = writeln!(out, "  windows tried: {}", int_list(windows_tried));
                    if !excluded.is_empty() {
                        let _ = writeln!(
                            out,
                            "  excluded (rank-deficient window): {}",
                            int_list(excluded)
                        );
                    }
                    for c in clusters {
                        let _ = writeln!(
                            out,
                            "  cluster {} spread {:.3e} -> {}",
                            int_list(&c.ordinals),
                            c.spread,
                            plain_vec(&c.representative)
                        );
                    }
                }
                Diagnostics::Sesgc {
                    surviving,
                    residual_tol,
                    excluded,
                } => {
                    let rounds = match report.method {
                        Method::Sesgc { rounds } => rounds,
                        _ => 0,
                    };
                    let _ = writeln!(
                        out,
                        "  k = {}, r = {}, rounds = {}, residual_tol = {}",
                        report.k, report.r, rounds, residual_tol
                    );
                    if !excluded.is_empty() {
                        let _ = writeln!(
                            out,
                            "  excluded (rank-deficient window): {}",
                            int_list(excluded)
                        );
                    }
                    for (i, alive) in surviving.iter().enumerate() {
                        let _ = writeln!(out, "  round {}: surviving {}", i + 1, int_list(alive));
                    }
                }
            }
            match &report.outcome {
                Outcome::Unique(x) => {
                    let _ = writeln!(out, "  estimate: {}", plain_vec(x));
                }
                Outcome::Ambiguous(reps) => {
                    for rep in reps {
                        let _ = writeln!(out, "  surviving value: {}", plain_vec(rep));
                    }
                }
                Outcome::Infeasible => {
                    out.push_str("  no hypothesis qualified\n");
                }
            }
            out.push_str("  candidates (ordinal, deleted sensors, window solve, estimate):\n");
            for c in &cands.candidates {
                let ok = if c.solver_ok { "ok" } else { "deficient" };
                let _ = writeln!(
                    out,
                    "    {:>3}  {:<16} {:<9} {}",
                    c.ordinal,
                    brace_set(&c.subset),
                    ok,
                    plain_vec(&c.estimate)
                );
            }
        }
    }
}

fn write_synth_human(out: &mut String, synth: &SynthRun) {
    let target = match synth.target {
        SynthTarget::Sesvs => "sesvs",
        SynthTarget::Sesgc => "sesgc",
    };
    let depth_label = match synth.target {
        SynthTarget::Sesvs => "tau",
        SynthTarget::Sesgc => "rounds",
    };
    let _ = writeln!(
        out,
        "synthesis: target {} ({} = {}), support {}, k = {}, r = {} ({:.3} ms)",
        target,
        depth_label,
        synth.depth,
        brace_set(&synth.true_gamma),
        synth.k,
        synth.r,
        synth.millis
    );
    match &synth.certificate {
        None => {
            out.push_str("  no defeating attack exists for this support and window\n");
        }
        Some(cert) => {
            let _ = writeln!(out, "  bias: {}", plain_vec(&cert.bias));
            let subsets: Vec<String> = cert.subsets.iter().map(brace_set).collect();
            let _ = writeln!(out, "  fooled hypotheses: {}", subsets.join(", "));
            let _ = writeln!(out, "  attack values (support {}):", brace_set(&cert.true_gamma));
            for (i, values) in cert.step_attacks.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "    step {}: {}",
                    cert.start_step + i,
                    plain_vec(values)
                );
            }
        }
    }
}

pub fn human_report(artifacts: &Artifacts, verb: &str) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "ssr {} -> {}", verb, overall_status(artifacts));
    let a = &artifacts.audit;
    let _ = writeln!(
        out,
        "system: {} states, {} sensors, {} inputs, data steps 0..{}",
        a.state_dim, a.sensors, a.inputs, artifacts.horizon
    );
    out.push('\n');
    write_audit_human(&mut out, artifacts);
    for m in &artifacts.methods {
        out.push('\n');
        write_method_human(&mut out, m);
    }
    if let Some(synth) = &artifacts.synth {
        out.push('\n');
        write_synth_human(&mut out, synth);
    }
    out
}
