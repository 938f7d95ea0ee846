//! Scenario files: the TOML schema the CLI consumes, the named builtin
//! scenarios, and resolution into core types ready to simulate.
//!
//! A file either spells out the system matrices or names a builtin:
//!
//! ```toml
//! [system]
//! builtin = "fourdim"        # or: a = [[..],..], b = [[..],..], c = [[..],..]
//!
//! [initial]
//! x0 = [25.2, -16.2, 123.3, 4.9]
//!
//! [input]                    # absent → zero input
//! constant = [3.6]           # or: expr = ["9.5 + 0.1*sin(k)"], or steps = [[..],..]
//!
//! [attack]                   # absent → clean run
//! gamma = [1, 3, 4, 6]
//! [attack.signals]           # sensors of gamma with no signal stay silent
//! 1 = "2000 + k/(k+1)"
//!
//! [run]
//! method = "both"            # "sesvs" | "sesgc" | "both"
//! s = 4                      # defaults to |gamma| when an attack is declared
//! ```
//!
//! Naming a builtin fills in every section; explicitly written sections
//! override it ([initial]/[input]/[attack] wholesale, [run] key by key).

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use ssr_core::{AttackScenario, EqTol, InputSignal, LinearSystem, SensorSet};

use crate::expr::{Expr, ExprError};

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("config does not parse: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("unknown builtin '{name}' (known: example1, example2, example3, fourdim, three_inertia)")]
    UnknownBuiltin { name: String },
    #[error("[system] names a builtin and spells out matrices; pick one")]
    BuiltinWithMatrices,
    #[error("[system] needs either a builtin name or both matrices a and c")]
    MissingSystem,
    #[error("matrix '{name}' has rows of differing lengths")]
    RaggedMatrix { name: &'static str },
    #[error("matrix '{name}' is empty")]
    EmptyMatrix { name: &'static str },
    #[error("missing [initial] section (x0)")]
    MissingInitial,
    #[error("[input] must set exactly one of constant, expr, steps")]
    InputChoice,
    #[error("bad expression in {field}: {source}")]
    BadExpr {
        field: String,
        source: ExprError,
    },
    #[error("attack signal key '{key}' is not a sensor index")]
    BadSensorKey { key: String },
    #[error("attack signal for sensor {sensor} lies outside gamma {gamma}")]
    SignalOffSupport { sensor: usize, gamma: String },
    #[error("run needs s (or an [attack] with gamma to default it from)")]
    MissingS,
    #[error("s = {s} must be smaller than the sensor count q = {q}")]
    STooLarge { s: usize, q: usize },
    #[error("unknown method '{got}' (expected sesvs, sesgc, or both)")]
    BadMethod { got: String },
    #[error("system definition rejected: {0}")]
    System(#[from] ssr_core::linsys::LinsysError),
    #[error("gamma rejected: {0}")]
    Gamma(#[from] ssr_core::combinat::CombinatError),
}

// ---------------------------------------------------------------------
// On-disk schema

#[derive(Clone, Debug, Default, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub system: SystemSection,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial: Option<InitialSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<InputSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub attack: Option<AttackSection>,
    #[serde(default)]
    pub run: RunSection,
}

#[derive(Clone, Debug, Default, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub builtin: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c: Option<Vec<Vec<f64>>>,
}

#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    pub x0: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct InputSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub constant: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expr: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<Vec<Vec<f64>>>,
}

#[derive(Clone, Debug, Default, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct AttackSection {
    pub gamma: Vec<usize>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub signals: BTreeMap<String, String>,
}

#[derive(Clone, Debug, Default, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub method: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eq_tol_abs: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eq_tol_rel: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residual_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_rounds: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fallback: Option<bool>,
    /// Recursion depth certified by `attack-synth --target sesgc`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rounds: Option<usize>,
}

impl RunSection {
    /// Key-by-key overlay: explicit values in `over` win.
    fn merged_over(&self, base: &RunSection) -> RunSection {
        RunSection {
            method: self.method.clone().or_else(|| base.method.clone()),
            s: self.s.or(base.s),
            tau: self.tau.or(base.tau),
            r: self.r.or(base.r),
            k: self.k.or(base.k),
            horizon: self.horizon.or(base.horizon),
            eq_tol_abs: self.eq_tol_abs.or(base.eq_tol_abs),
            eq_tol_rel: self.eq_tol_rel.or(base.eq_tol_rel),
            residual_tol: self.residual_tol.or(base.residual_tol),
            max_rounds: self.max_rounds.or(base.max_rounds),
            fallback: self.fallback.or(base.fallback),
            rounds: self.rounds.or(base.rounds),
        }
    }
}

// ---------------------------------------------------------------------
// Builtins

fn three_sensor_file() -> ScenarioFile {
    ScenarioFile {
        system: SystemSection {
            builtin: None,
            a: Some(vec![vec![1.0, 1.0], vec![0.0, 1.0]]),
            b: None,
            c: Some(vec![vec![1.0, 2.0], vec![1.0, 0.0], vec![1.0, 1.0]]),
        },
        ..Default::default()
    }
}

/// Three-inertia drive train: positions/velocities of three coupled
/// inertias, seven mixed position sensors, discretized at T = 5 ms.
fn three_inertia_matrices() -> (Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let (k1, k2, t) = (1.38, 1.38, 0.005);
    let (j1, j2, j3) = (0.01, 0.02, 0.03);
    let (b1, b2, b3) = (0.006, 0.006, 0.006);
    let a = vec![
        vec![1.0, t, 0.0, 0.0, 0.0, 0.0],
        vec![-k1 * t / j1, 1.0 - b1 * t / j1, k1 * t / j1, 0.0, 0.0, 0.0],
        vec![0.0, 0.0, 1.0, t, 0.0, 0.0],
        vec![
            k1 * t / j2,
            0.0,
            -(k1 + k2) * t / j2,
            1.0 - b2 * t / j2,
            k2 * t / j2,
            0.0,
        ],
        vec![0.0, 0.0, 0.0, 0.0, 1.0, t],
        vec![0.0, 0.0, k2 * t / j3, 0.0, -k2 * t / j3, 1.0 - b3 * t / j3],
    ];
    let b = vec![
        vec![0.0],
        vec![t / j1],
        vec![0.0],
        vec![0.0],
        vec![0.0],
        vec![0.0],
    ];
    let c = vec![
        vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        vec![0.0, 0.0, 1.0, 0.0, 0.0, 0.0],
        vec![0.0, 0.0, 0.0, 0.0, 1.0, 0.0],
        vec![1.0, 0.0, -1.0, 0.0, 0.0, 0.0],
        vec![1.0, 0.0, 0.0, 0.0, -1.0, 0.0],
        vec![1.0, 0.0, 1.0, 0.0, -1.0, 0.0],
        vec![1.0, 0.0, -1.0, 0.0, 1.0, 0.0],
    ];
    (a, b, c)
}

fn signals(pairs: &[(usize, &str)]) -> BTreeMap<String, String> {
    pairs
        .iter()
        .map(|(i, e)| (i.to_string(), e.to_string()))
        .collect()
}

pub fn builtin(name: &str) -> Option<ScenarioFile> {
    let file = match name {
        // Two-state, three-sensor pedagogical system; the clean run whose
        // two-step sensor-2 window pins x0 = [2, 1].
        "example1" => ScenarioFile {
            initial: Some(InitialSection { x0: vec![2.0, 1.0] }),
            run: RunSection {
                method: Some("sesgc".into()),
                s: Some(2),
                ..Default::default()
            },
            ..three_sensor_file()
        },
        // Same system, two sensors under constant offsets: the candidate
        // list contains the truth but no method can single it out.
        "example2" => ScenarioFile {
            initial: Some(InitialSection { x0: vec![1.0, 2.0] }),
            attack: Some(AttackSection {
                gamma: vec![1, 2],
                signals: signals(&[(1, "2"), (2, "3")]),
            }),
            run: RunSection {
                method: Some("sesgc".into()),
                s: Some(2),
                ..Default::default()
            },
            ..three_sensor_file()
        },
        // One attacked sensor: majority voting over two-sensor hypotheses
        // recovers the state uniquely.
        "example3" => ScenarioFile {
            initial: Some(InitialSection { x0: vec![2.0, 1.0] }),
            attack: Some(AttackSection {
                gamma: vec![1],
                signals: signals(&[(1, "3.5")]),
            }),
            run: RunSection {
                method: Some("sesvs".into()),
                s: Some(1),
                tau: Some(1),
                ..Default::default()
            },
            ..three_sensor_file()
        },
        // Four states, six sensors, four attacked: drifts on 1 and 3,
        // oscillations on 4 and 6.
        "fourdim" => ScenarioFile {
            system: SystemSection {
                builtin: None,
                a: Some(vec![
                    vec![2.3, -0.6, 3.8, 0.4],
                    vec![3.2, -1.6, 0.7, 0.4],
                    vec![1.7, 2.8, 5.2, 4.3],
                    vec![-3.1, 2.4, 3.7, 4.8],
                ]),
                b: Some(vec![vec![1.0], vec![1.0], vec![1.0], vec![1.0]]),
                c: Some(vec![
                    vec![1.0, 0.0, 0.0, 1.0],
                    vec![1.0, 0.0, 1.0, 0.0],
                    vec![1.0, 1.0, 0.0, 0.0],
                    vec![0.0, 1.0, 1.0, 0.0],
                    vec![0.0, 1.0, 0.0, 1.0],
                    vec![0.0, 0.0, 1.0, 1.0],
                ]),
            },
            initial: Some(InitialSection {
                x0: vec![25.2, -16.2, 123.3, 4.9],
            }),
            input: Some(InputSection {
                constant: Some(vec![3.6]),
                ..Default::default()
            }),
            attack: Some(AttackSection {
                gamma: vec![1, 3, 4, 6],
                signals: signals(&[
                    (1, "2000 + k/(k+1)"),
                    (3, "3000 + k/(k+2)"),
                    (4, "1500*sin(2*k+1)"),
                    (6, "3000*cos(2*k+3)"),
                ]),
            }),
            run: RunSection {
                method: Some("both".into()),
                s: Some(4),
                horizon: Some(5),
                ..Default::default()
            },
        },
        // Three-inertia drive train under a four-sensor attack. The
        // majority search needs the explicit r = 4: one five-sensor
        // deletion never reaches full rank, so the automatic bound does
        // not exist for hypotheses of size five.
        "three_inertia" => {
            let (a, b, c) = three_inertia_matrices();
            ScenarioFile {
                system: SystemSection {
                    builtin: None,
                    a: Some(a),
                    b: Some(b),
                    c: Some(c),
                },
                initial: Some(InitialSection {
                    x0: vec![0.2, 1.2, 0.19, 1.1, 0.3, 1.6],
                }),
                input: Some(InputSection {
                    expr: Some(vec!["9.5 + 0.1*sin(k)".into()]),
                    ..Default::default()
                }),
                attack: Some(AttackSection {
                    gamma: vec![1, 2, 3, 4],
                    signals: signals(&[
                        (1, "125 + sqrt(k)"),
                        (2, "143*cos(k)"),
                        (3, "234*sin(k+1) - 143*cos(k)"),
                        (4, "16 - 80*sin(k+3)"),
                    ]),
                }),
                run: RunSection {
                    method: Some("sesvs".into()),
                    s: Some(4),
                    r: Some(4),
                    horizon: Some(5),
                    ..Default::default()
                },
            }
        }
        _ => return None,
    };
    Some(file)
}

// ---------------------------------------------------------------------
// Resolution

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MethodChoice {
    Sesvs,
    Sesgc,
    Both,
}

impl MethodChoice {
    pub fn runs_sesvs(self) -> bool {
        matches!(self, MethodChoice::Sesvs | MethodChoice::Both)
    }

    pub fn runs_sesgc(self) -> bool {
        matches!(self, MethodChoice::Sesgc | MethodChoice::Both)
    }
}

/// A scenario ready to simulate, plus the fully expanded file it came
/// from (builtin replaced by explicit matrices) for the report echo.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub file: ScenarioFile,
    pub system: LinearSystem,
    pub x0: DVector<f64>,
    pub input: InputSignal,
    pub attack: Option<AttackScenario>,
    pub method: MethodChoice,
    pub s: usize,
    pub tau: usize,
    pub r: Option<usize>,
    pub k: Option<usize>,
    pub horizon: Option<usize>,
    pub eq_tol: EqTol,
    pub residual_tol: f64,
    pub max_rounds: Option<usize>,
    pub fallback: Option<bool>,
    pub rounds: Option<usize>,
}

fn to_matrix(name: &'static str, rows: &[Vec<f64>]) -> Result<DMatrix<f64>, ScenarioError> {
    if rows.is_empty() || rows[0].is_empty() {
        return Err(ScenarioError::EmptyMatrix { name });
    }
    let ncols = rows[0].len();
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(ScenarioError::RaggedMatrix { name });
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

fn parse_exprs(field: &str, texts: &[String]) -> Result<Vec<Expr>, ScenarioError> {
    texts
        .iter()
        .map(|t| {
            Expr::parse(t).map_err(|source| ScenarioError::BadExpr {
                field: field.to_string(),
                source,
            })
        })
        .collect()
}

#[cfg(test)]
pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let file: ScenarioFile = toml::from_str(text)?;
    resolve(file)
}

pub fn resolve(user: ScenarioFile) -> Result<Scenario, ScenarioError> {
    // Expand the builtin, if any, underneath the user's sections.
    let file = match &user.system.builtin {
        Some(name) => {
            if user.system.a.is_some() || user.system.b.is_some() || user.system.c.is_some() {
                return Err(ScenarioError::BuiltinWithMatrices);
            }
            let base = builtin(name).ok_or_else(|| ScenarioError::UnknownBuiltin {
                name: name.clone(),
            })?;
            ScenarioFile {
                system: base.system,
                initial: user.initial.or(base.initial),
                input: user.input.or(base.input),
                attack: user.attack.or(base.attack),
                run: user.run.merged_over(&base.run),
            }
        }
        None => user,
    };

    let a = to_matrix("a", file.system.a.as_deref().ok_or(ScenarioError::MissingSystem)?)?;
    let c = to_matrix("c", file.system.c.as_deref().ok_or(ScenarioError::MissingSystem)?)?;
    let b = match &file.system.b {
        Some(rows) => to_matrix("b", rows)?,
        None => DMatrix::zeros(a.nrows(), 0),
    };
    let system = LinearSystem::new(a, b, c)?;
    let q = system.sensor_count();

    let x0 = DVector::from_vec(
        file.initial
            .as_ref()
            .ok_or(ScenarioError::MissingInitial)?
            .x0
            .clone(),
    );

    let input = match &file.input {
        None => InputSignal::Zero,
        Some(sec) => {
            let picks =
                sec.constant.is_some() as u8 + sec.expr.is_some() as u8 + sec.steps.is_some() as u8;
            if picks != 1 {
                return Err(ScenarioError::InputChoice);
            }
            if let Some(c) = &sec.constant {
                InputSignal::Constant(DVector::from_vec(c.clone()))
            } else if let Some(texts) = &sec.expr {
                let exprs = parse_exprs("input.expr", texts)?;
                InputSignal::Fn(std::sync::Arc::new(move |k| {
                    DVector::from_iterator(exprs.len(), exprs.iter().map(|e| e.eval(k)))
                }))
            } else {
                InputSignal::Steps(
                    sec.steps
                        .as_ref()
                        .unwrap()
                        .iter()
                        .map(|v| DVector::from_vec(v.clone()))
                        .collect(),
                )
            }
        }
    };

    let attack = match &file.attack {
        None => None,
        Some(sec) => {
            let gamma = SensorSet::new(sec.gamma.clone())?;
            gamma.validate_for(q)?;
            let mut parsed: Vec<(usize, Expr)> = Vec::new();
            for (key, text) in &sec.signals {
                let sensor: usize = key
                    .parse()
                    .map_err(|_| ScenarioError::BadSensorKey { key: key.clone() })?;
                if !gamma.contains(sensor) {
                    return Err(ScenarioError::SignalOffSupport {
                        sensor,
                        gamma: gamma.to_string(),
                    });
                }
                let expr =
                    Expr::parse(text).map_err(|source| ScenarioError::BadExpr {
                        field: format!("attack.signals.{key}"),
                        source,
                    })?;
                parsed.push((sensor, expr));
            }
            Some(AttackScenario::from_fn(gamma, move |k, i| {
                parsed
                    .iter()
                    .find(|(sensor, _)| *sensor == i)
                    .map(|(_, e)| e.eval(k))
                    .unwrap_or(0.0)
            }))
        }
    };

    let s = match file.run.s {
        Some(s) => s,
        None => match &file.attack {
            Some(sec) => sec.gamma.len(),
            None => return Err(ScenarioError::MissingS),
        },
    };
    if s >= q {
        return Err(ScenarioError::STooLarge { s, q });
    }

    let method = match file.run.method.as_deref().unwrap_or("both") {
        "sesvs" => MethodChoice::Sesvs,
        "sesgc" => MethodChoice::Sesgc,
        "both" => MethodChoice::Both,
        other => {
            return Err(ScenarioError::BadMethod {
                got: other.to_string(),
            })
        }
    };

    let eq_tol = EqTol {
        abs: file.run.eq_tol_abs.unwrap_or(EqTol::default().abs),
        rel: file.run.eq_tol_rel.unwrap_or(EqTol::default().rel),
    };

    Ok(Scenario {
        system,
        x0,
        input,
        attack,
        method,
        s,
        tau: file.run.tau.unwrap_or(1),
        r: file.run.r,
        k: file.run.k,
        horizon: file.run.horizon,
        eq_tol,
        residual_tol: file.run.residual_tol.unwrap_or(0.1),
        max_rounds: file.run.max_rounds,
        fallback: file.run.fallback,
        rounds: file.run.rounds,
        file,
    })
}

/// The scenario as it should be echoed in reports: builtin expanded,
/// defaults for method/s/tau/tolerances made explicit, plus the horizon
/// the run actually used. Re-parsing the echo resolves to the same run.
pub fn resolved_file(scenario: &Scenario, horizon_used: usize) -> ScenarioFile {
    let mut file = scenario.file.clone();
    file.run.method = Some(
        match scenario.method {
            MethodChoice::Sesvs => "sesvs",
            MethodChoice::Sesgc => "sesgc",
            MethodChoice::Both => "both",
        }
        .to_string(),
    );
    file.run.s = Some(scenario.s);
    file.run.tau = Some(scenario.tau);
    file.run.horizon = Some(horizon_used);
    file.run.eq_tol_abs = Some(scenario.eq_tol.abs);
    file.run.eq_tol_rel = Some(scenario.eq_tol.rel);
    file.run.residual_tol = Some(scenario.residual_tol);
    file
}
