//! Lagrangians `L(t, x, v)` on `I × TM`.
//!
//! A Lagrangian is either a closure in `(t, x, v)` or a table of costs keyed
//! by `(step, from, to)` on a time-expanded graph. `+∞` is an admissible
//! value and removes the corresponding edge from every solver, which is how
//! state constraints are expressed.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use crate::error::{ensure, Error, Result};
use crate::metric::norm;

type LagrangianFn = dyn Fn(f64, &[f64], &[f64]) -> f64 + Send + Sync;

#[derive(Clone)]
enum Source {
    Function(Arc<LagrangianFn>),
    Table { entries: HashMap<(usize, usize, usize), f64>, default: f64 },
}

/// An evaluable cost on `I × TM` with optional structural flags.
///
/// The flags are metadata: `fiberwise_convex` is required by
/// [`jensen_reduce`](crate::transport::jensen_reduce), and
/// `superlinear` declares a constant `c` with `L ≥ c(‖v‖ − 1)`. Both can be
/// spot-checked with [`Lagrangian::check_convexity`] and
/// [`Lagrangian::check_growth`].
#[derive(Clone)]
pub struct Lagrangian {
    source: Source,
    fiberwise_convex: bool,
    superlinear: Option<f64>,
    label: String,
}

impl fmt::Debug for Lagrangian {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Lagrangian")
            .field("label", &self.label)
            .field("fiberwise_convex", &self.fiberwise_convex)
            .field("superlinear", &self.superlinear)
            .finish_non_exhaustive()
    }
}

impl Lagrangian {
    pub fn from_fn(eval: impl Fn(f64, &[f64], &[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self { source: Source::Function(Arc::new(eval)), fiberwise_convex: false, superlinear: None, label: "fn".into() }
    }

    /// `scale · ‖v‖² / 2`. Convex, and superlinear with `c = scale / 2`.
    pub fn quadratic(scale: f64) -> Self {
        Self::from_fn(move |_, _, v| 0.5 * scale * v.iter().map(|c| c * c).sum::<f64>())
            .convex(true)
            .superlinear(0.5 * scale)
            .labelled(format!("quadratic({scale})"))
    }

    /// `‖v‖²/2 − U(x)` with a potential `U`.
    pub fn mechanical(potential: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self::from_fn(move |_, x, v| 0.5 * v.iter().map(|c| c * c).sum::<f64>() - potential(x))
            .convex(true)
            .labelled("mechanical")
    }

    /// A constant, e.g. `L ≡ 0` or `L ≡ 1`.
    pub fn constant(c: f64) -> Self {
        Self::from_fn(move |_, _, _| c).convex(true).labelled(format!("constant({c})"))
    }

    /// Edge costs keyed by `(k, i, j)`. Missing entries take `default`, which
    /// may be `+∞`.
    pub fn table(entries: HashMap<(usize, usize, usize), f64>, default: f64) -> Self {
        Self {
            source: Source::Table { entries, default },
            fiberwise_convex: false,
            superlinear: None,
            label: "table".into(),
        }
    }

    pub fn convex(mut self, flag: bool) -> Self {
        self.fiberwise_convex = flag;
        self
    }

    pub fn superlinear(mut self, c: f64) -> Self {
        self.superlinear = Some(c);
        self
    }

    pub fn labelled(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn is_fiberwise_convex(&self) -> bool {
        self.fiberwise_convex
    }

    pub fn superlinear_constant(&self) -> Option<f64> {
        self.superlinear
    }

    pub fn is_table(&self) -> bool {
        matches!(self.source, Source::Table { .. })
    }

    /// `L(t, x, v)`. Tables have no value off the graph and report an error.
    pub fn value(&self, t: f64, x: &[f64], v: &[f64]) -> Result<f64> {
        match &self.source {
            Source::Function(f) => check(f(t, x, v), t, x, v),
            Source::Table { .. } => Err(Error::Evaluation(
                "a tabulated Lagrangian is only defined on graph edges".into(),
            )),
        }
    }

    /// Cost of edge `(i, j)` at step `k`, i.e. `L(t_k, x_i, v_ij)`.
    pub fn edge_value(&self, k: usize, i: usize, j: usize, t: f64, x: &[f64], v: &[f64]) -> Result<f64> {
        match &self.source {
            Source::Function(f) => check(f(t, x, v), t, x, v),
            Source::Table { entries, default } => {
                let value = *entries.get(&(k, i, j)).unwrap_or(default);
                ensure!(!value.is_nan() && value != f64::NEG_INFINITY, Evaluation, "table entry ({k}, {i}, {j}) is {value}");
                Ok(value)
            }
        }
    }

    /// Midpoint-convexity on the segments `[u, w]` supplied by the caller.
    /// Returns the largest violation found.
    pub fn check_convexity(&self, samples: &[(f64, Vec<f64>, Vec<f64>, Vec<f64>)]) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for (t, x, u, w) in samples {
            let mid: Vec<f64> = u.iter().zip(w).map(|(a, b)| 0.5 * (a + b)).collect();
            let lhs = self.value(*t, x, &mid)?;
            let rhs = 0.5 * (self.value(*t, x, u)? + self.value(*t, x, w)?);
            if lhs.is_finite() && rhs.is_finite() {
                worst = worst.max(lhs - rhs);
            }
        }
        Ok(worst)
    }

    /// Largest violation of the declared bound `L ≥ c(‖v‖ − 1)` on the points.
    pub fn check_growth(&self, samples: &[(f64, Vec<f64>, Vec<f64>)]) -> Result<f64> {
        let Some(c) = self.superlinear else { return Ok(0.0) };
        let mut worst: f64 = 0.0;
        for (t, x, v) in samples {
            let l = self.value(*t, x, v)?;
            worst = worst.max(c * (norm(v) - 1.0) - l);
        }
        Ok(worst)
    }
}

fn check(value: f64, t: f64, x: &[f64], v: &[f64]) -> Result<f64> {
    ensure!(
        !value.is_nan() && value != f64::NEG_INFINITY,
        Evaluation,
        "Lagrangian is {value} at t = {t}, x = {x:?}, v = {v:?}"
    );
    Ok(value)
}
