//! Discrete-time LTI system model with additive sensor attacks.
//!
//! Dynamics: `x_{k+1} = A·x_k + B·u_k`, measurements `y_k = C·x_k + a_k`
//! with `Supp(a_k) ⊆ Γ` for a fixed attacked-sensor set Γ. Sensor indices
//! are 1-based everywhere in the public API.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::combinat::SensorSet;

#[derive(Debug, Error)]
pub enum LinsysError {
    #[error("A must be square and nonempty; got {rows}x{cols}")]
    BadStateMatrix { rows: usize, cols: usize },
    #[error("B must have {n} rows to match A; got {rows}x{cols}")]
    BadInputMatrix { n: usize, rows: usize, cols: usize },
    #[error("C must have {n} columns and at least one row; got {rows}x{cols}")]
    BadOutputMatrix { n: usize, rows: usize, cols: usize },
    #[error("matrix entries must be finite")]
    NonFiniteEntry,
    #[error("{what} has dimension {got}, expected {expected}")]
    DimensionMismatch {
        what: &'static str,
        got: usize,
        expected: usize,
    },
    #[error("attack set {gamma} is not contained in sensor range 1..={q}")]
    GammaOutOfRange { gamma: SensorSet, q: usize },
    #[error("attack step {k}: value on sensor {sensor} outside the declared support {gamma}")]
    SupportViolation {
        k: usize,
        sensor: usize,
        gamma: SensorSet,
    },
    #[error("input signal provides {available} steps, need step {k}")]
    InputExhausted { k: usize, available: usize },
    #[error("attack signal provides {available} steps, need step {k}")]
    AttackExhausted { k: usize, available: usize },
}

/// The system triple (A, B, C). `p = 0` (autonomous) is allowed via an
/// `n×0` input matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearSystem {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    c: DMatrix<f64>,
}

impl LinearSystem {
    pub fn new(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        c: DMatrix<f64>,
    ) -> Result<Self, LinsysError> {
        let n = a.nrows();
        if n == 0 || a.ncols() != n {
            return Err(LinsysError::BadStateMatrix {
                rows: a.nrows(),
                cols: a.ncols(),
            });
        }
        if b.nrows() != n {
            return Err(LinsysError::BadInputMatrix {
                n,
                rows: b.nrows(),
                cols: b.ncols(),
            });
        }
        if c.ncols() != n || c.nrows() == 0 {
            return Err(LinsysError::BadOutputMatrix {
                n,
                rows: c.nrows(),
                cols: c.ncols(),
            });
        }
        for m in [&a, &b, &c] {
            if m.iter().any(|v| !v.is_finite()) {
                return Err(LinsysError::NonFiniteEntry);
            }
        }
        Ok(LinearSystem { a, b, c })
    }

    /// Autonomous system (no input, `p = 0`).
    pub fn autonomous(a: DMatrix<f64>, c: DMatrix<f64>) -> Result<Self, LinsysError> {
        let n = a.nrows();
        LinearSystem::new(a, DMatrix::zeros(n, 0), c)
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }

    /// State dimension n.
    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    /// Input dimension p (may be 0).
    pub fn input_dim(&self) -> usize {
        self.b.ncols()
    }

    /// Sensor count q.
    pub fn sensor_count(&self) -> usize {
        self.c.nrows()
    }
}

/// Input sequence u_0, u_1, … supplied to [`simulate`].
#[derive(Clone)]
pub enum InputSignal {
    /// All-zero input (any p, including p = 0).
    Zero,
    /// The same p-vector at every step.
    Constant(DVector<f64>),
    /// Explicit per-step values; simulation fails past the end.
    Steps(Vec<DVector<f64>>),
    /// Closure of the step index.
    Fn(Arc<dyn Fn(usize) -> DVector<f64> + Send + Sync>),
}

impl fmt::Debug for InputSignal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InputSignal::Zero => write!(f, "InputSignal::Zero"),
            InputSignal::Constant(u) => write!(f, "InputSignal::Constant({u:?})"),
            InputSignal::Steps(v) => write!(f, "InputSignal::Steps(len={})", v.len()),
            InputSignal::Fn(_) => write!(f, "InputSignal::Fn(..)"),
        }
    }
}

impl InputSignal {
    fn at(&self, k: usize, p: usize) -> Result<DVector<f64>, LinsysError> {
        let u = match self {
            InputSignal::Zero => DVector::zeros(p),
            InputSignal::Constant(u) => u.clone(),
            InputSignal::Steps(steps) => steps
                .get(k)
                .cloned()
                .ok_or(LinsysError::InputExhausted {
                    k,
                    available: steps.len(),
                })?,
            InputSignal::Fn(f) => f(k),
        };
        if u.len() != p {
            return Err(LinsysError::DimensionMismatch {
                what: "input vector",
                got: u.len(),
                expected: p,
            });
        }
        Ok(u)
    }
}

/// Per-step attack values on the support Γ.
#[derive(Clone)]
enum AttackSignal {
    /// Explicit full-q attack vectors per step (validated against Γ).
    Steps(Vec<DVector<f64>>),
    /// Closure (step k, sensor i ∈ Γ) → value; sensors outside Γ are 0.
    Fn(Arc<dyn Fn(usize, usize) -> f64 + Send + Sync>),
}

/// A fixed attacked-sensor set Γ together with its attack signal.
#[derive(Clone)]
pub struct AttackScenario {
    gamma: SensorSet,
    signal: AttackSignal,
}

impl fmt::Debug for AttackScenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "AttackScenario {{ gamma: {} }}", self.gamma)
    }
}

impl AttackScenario {
    /// Attack from a closure of (step, sensor); evaluated only on Γ, so the
    /// support invariant holds by construction.
    pub fn from_fn(
        gamma: SensorSet,
        signal: impl Fn(usize, usize) -> f64 + Send + Sync + 'static,
    ) -> Self {
        AttackScenario {
            gamma,
            signal: AttackSignal::Fn(Arc::new(signal)),
        }
    }

    /// Attack from explicit per-step full-q vectors starting at step
    /// `start`. Every vector must be zero off Γ; violations are rejected so
    /// a bad fixture cannot silently widen the support.
    pub fn from_steps(
        gamma: SensorSet,
        start: usize,
        steps: Vec<DVector<f64>>,
    ) -> Result<Self, LinsysError> {
        for (offset, vec) in steps.iter().enumerate() {
            for (row, &v) in vec.iter().enumerate() {
                if v != 0.0 && !gamma.contains(row + 1) {
                    return Err(LinsysError::SupportViolation {
                        k: start + offset,
                        sensor: row + 1,
                        gamma: gamma.clone(),
                    });
                }
            }
        }
        // Pad with zero vectors so step indices 0..start are defined.
        let q = steps.first().map(|v| v.len()).unwrap_or(0);
        let mut padded = vec![DVector::zeros(q); start];
        padded.extend(steps);
        Ok(AttackScenario {
            gamma,
            signal: AttackSignal::Steps(padded),
        })
    }

    pub fn gamma(&self) -> &SensorSet {
        &self.gamma
    }

    /// The attack vector a_k (full q length, zero off Γ).
    pub fn at(&self, k: usize, q: usize) -> Result<DVector<f64>, LinsysError> {
        match &self.signal {
            AttackSignal::Steps(steps) => {
                let v = steps.get(k).ok_or(LinsysError::AttackExhausted {
                    k,
                    available: steps.len(),
                })?;
                if v.len() != q {
                    return Err(LinsysError::DimensionMismatch {
                        what: "attack vector",
                        got: v.len(),
                        expected: q,
                    });
                }
                Ok(v.clone())
            }
            AttackSignal::Fn(f) => {
                let mut a = DVector::zeros(q);
                for i in self.gamma.iter() {
                    a[i - 1] = f(k, i);
                }
                Ok(a)
            }
        }
    }
}

/// Simulated states, inputs and outputs over steps 0…K.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    /// x_0 … x_K.
    pub states: Vec<DVector<f64>>,
    /// u_0 … u_{K−1} (empty vectors when p = 0).
    pub inputs: Vec<DVector<f64>>,
    /// C·x_k for k = 0…K.
    pub clean_outputs: Vec<DVector<f64>>,
    /// y_k = C·x_k + a_k for k = 0…K.
    pub measured_outputs: Vec<DVector<f64>>,
}

impl Trajectory {
    /// Last step index K.
    pub fn horizon(&self) -> usize {
        self.states.len() - 1
    }

    /// The measurement record the reconstructors consume.
    pub fn measurements(&self) -> Measurements {
        Measurements {
            outputs: self.measured_outputs.clone(),
            inputs: self.inputs.clone(),
        }
    }
}

/// Measured outputs y_0…y_K and applied inputs u_0…u_{K−1}; all a
/// reconstructor may see.
#[derive(Clone, Debug, PartialEq)]
pub struct Measurements {
    pub outputs: Vec<DVector<f64>>,
    pub inputs: Vec<DVector<f64>>,
}

impl Measurements {
    pub fn horizon(&self) -> usize {
        self.outputs.len().saturating_sub(1)
    }
}

/// Runs the recurrence for `steps` transitions, returning steps 0…K=`steps`.
pub fn simulate(
    sys: &LinearSystem,
    x0: &DVector<f64>,
    inputs: &InputSignal,
    attack: Option<&AttackScenario>,
    steps: usize,
) -> Result<Trajectory, LinsysError> {
    let n = sys.state_dim();
    let p = sys.input_dim();
    let q = sys.sensor_count();
    if x0.len() != n {
        return Err(LinsysError::DimensionMismatch {
            what: "initial state",
            got: x0.len(),
            expected: n,
        });
    }
    if let Some(att) = attack {
        if att
            .gamma()
            .max()
            .is_some_and(|max| max > q)
        {
            return Err(LinsysError::GammaOutOfRange {
                gamma: att.gamma().clone(),
                q,
            });
        }
    }

    let mut states = Vec::with_capacity(steps + 1);
    let mut input_log = Vec::with_capacity(steps);
    let mut clean = Vec::with_capacity(steps + 1);
    let mut measured = Vec::with_capacity(steps + 1);
    states.push(x0.clone());

    for k in 0..=steps {
        let y_clean = &sys.c * &states[k];
        let y = match attack {
            Some(att) => &y_clean + att.at(k, q)?,
            None => y_clean.clone(),
        };
        clean.push(y_clean);
        measured.push(y);
        if k < steps {
            let u = inputs.at(k, p)?;
            let next = &sys.a * &states[k] + &sys.b * &u;
            states.push(next);
            input_log.push(u);
        }
    }

    Ok(Trajectory {
        states,
        inputs: input_log,
        clean_outputs: clean,
        measured_outputs: measured,
    })
}

/// Adds the step-`k` attack to one clean output vector.
pub fn inject_attack(
    clean: &DVector<f64>,
    attack: &AttackScenario,
    k: usize,
) -> Result<DVector<f64>, LinsysError> {
    let q = clean.len();
    attack.gamma().validate_for(q).map_err(|_| {
        LinsysError::GammaOutOfRange {
            gamma: attack.gamma().clone(),
            q,
        }
    })?;
    Ok(clean + attack.at(k, q)?)
}
