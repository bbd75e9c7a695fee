//! Young measures on `I × X` stored as one fiber measure per time slice.
//!
//! The time marginal of a Young measure is the normalized Lebesgue measure
//! `λ` on `I = [a, b]`. On a grid of `n` steps each slice carries `λ`-weight
//! `1/n`, and the measure is the product `λ ⊗ η_t`: integrating `f` means
//! `(1/n) Σ_k ∫ f(t_k, ·) dη_{t_k}`. Keeping the slices separate makes the
//! disintegration a plain accessor.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::metric::{norm, DiscreteMeasure, MetricSpace};

/// Uniform partition of `[a, b]` into `n_steps` intervals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub a: f64,
    pub b: f64,
    #[serde(rename = "n")]
    pub n_steps: usize,
}

impl TimeGrid {
    pub fn new(a: f64, b: f64, n_steps: usize) -> Result<Self> {
        let grid = Self { a, b, n_steps };
        grid.validate()?;
        Ok(grid)
    }

    pub fn unit(n_steps: usize) -> Result<Self> {
        Self::new(0.0, 1.0, n_steps)
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(self.a.is_finite() && self.b.is_finite() && self.a < self.b, Validation, "time interval [{}, {}] is empty", self.a, self.b);
        ensure!(self.n_steps > 0, Validation, "time grid needs at least one step");
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        (self.b - self.a) / self.n_steps as f64
    }

    /// `t_k = a + k Δt`, for `k = 0..=n`.
    pub fn time(&self, k: usize) -> f64 {
        if k == self.n_steps {
            self.b
        } else {
            self.a + k as f64 * self.dt()
        }
    }

    /// `λ`-weight of one slice.
    pub fn slice_weight(&self) -> f64 {
        1.0 / self.n_steps as f64
    }
}

/// Caratheodory integrands are finite everywhere; normal integrands may take
/// the value `+∞`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IntegrandKind {
    Caratheodory,
    Normal,
}

type FiberFn = dyn Fn(f64, &[f64]) -> f64 + Send + Sync;

/// A cost `f(t, p)` on `I × X`.
///
/// When the fiber is a tangent bundle the point `p` is `(x, v)` flattened,
/// and `velocity_offset` marks where `v` starts; the growth bound
/// `|f| ≤ ‖f‖₁ (1 + ‖v‖)` is measured against that tail. With the default
/// offset of zero the whole point counts.
#[derive(Clone)]
pub struct Integrand {
    eval: Arc<FiberFn>,
    kind: IntegrandKind,
    growth_bound: Option<f64>,
    velocity_offset: usize,
}

impl fmt::Debug for Integrand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Integrand")
            .field("kind", &self.kind)
            .field("growth_bound", &self.growth_bound)
            .field("velocity_offset", &self.velocity_offset)
            .finish_non_exhaustive()
    }
}

impl Integrand {
    pub fn caratheodory(eval: impl Fn(f64, &[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self { eval: Arc::new(eval), kind: IntegrandKind::Caratheodory, growth_bound: None, velocity_offset: 0 }
    }

    pub fn normal(eval: impl Fn(f64, &[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self { eval: Arc::new(eval), kind: IntegrandKind::Normal, growth_bound: None, velocity_offset: 0 }
    }

    pub fn with_growth_bound(mut self, bound: f64) -> Self {
        self.growth_bound = Some(bound);
        self
    }

    pub fn with_velocity_offset(mut self, offset: usize) -> Self {
        self.velocity_offset = offset;
        self
    }

    pub fn kind(&self) -> IntegrandKind {
        self.kind
    }

    pub fn growth_bound(&self) -> Option<f64> {
        self.growth_bound
    }

    /// Evaluates and checks admissibility of the returned value.
    pub fn eval(&self, t: f64, p: &[f64]) -> Result<f64> {
        let v = (self.eval)(t, p);
        if v.is_nan() || v == f64::NEG_INFINITY {
            return Err(Error::Evaluation(format!("integrand is {v} at t = {t}, p = {p:?}")));
        }
        if v == f64::INFINITY {
            ensure!(self.kind == IntegrandKind::Normal, Evaluation, "Caratheodory integrand is +∞ at t = {t}, p = {p:?}");
            return Ok(v);
        }
        if let Some(bound) = self.growth_bound {
            let speed = norm(p.get(self.velocity_offset..).unwrap_or(&[]));
            ensure!(
                v.abs() <= bound * (1.0 + speed) * (1.0 + 1e-12),
                Validation,
                "|f| = {} exceeds the declared growth bound {bound}·(1 + {speed})",
                v.abs()
            );
        }
        Ok(v)
    }
}

/// A probability measure on `I × X` with time marginal `λ`, kept as its
/// disintegration `η_t` over a [`TimeGrid`].
#[derive(Debug, Clone)]
pub struct YoungMeasure {
    grid: TimeGrid,
    slices: Vec<DiscreteMeasure>,
}

impl YoungMeasure {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn slices(&self) -> &[DiscreteMeasure] {
        &self.slices
    }

    pub fn fiber_space(&self) -> &Arc<MetricSpace> {
        self.slices[0].space()
    }

    /// Mass of the atom `(t_k, p_i)` in the product measure.
    pub fn atom_mass(&self, k: usize, i: usize) -> f64 {
        self.slices[k].weight(i) * self.grid.slice_weight()
    }

    /// Total mass of the product representation; one up to rounding.
    pub fn total_mass(&self) -> f64 {
        (0..self.slices.len())
            .map(|k| (0..self.fiber_space().len()).map(|i| self.atom_mass(k, i)).sum::<f64>())
            .sum()
    }
}

/// `λ ⊗ η_t` from one normalized slice per step.
pub fn product(grid: TimeGrid, slices: Vec<DiscreteMeasure>) -> Result<YoungMeasure> {
    grid.validate()?;
    ensure!(
        slices.len() == grid.n_steps,
        Validation,
        "{} slices for a {}-step grid",
        slices.len(),
        grid.n_steps
    );
    let space = slices[0].space().clone();
    ensure!(
        slices.iter().all(|s| s.space().same_as(&space)),
        Config,
        "slices live on different fiber spaces"
    );
    Ok(YoungMeasure { grid, slices })
}

/// The slices `η_{t_k}` of a Young measure.
pub fn disintegrate(eta: &YoungMeasure) -> Vec<DiscreteMeasure> {
    eta.slices.clone()
}

/// `∫ f dη = (1/n) Σ_k Σ_i η_{t_k}(p_i) f(t_k, p_i)`.
///
/// Atoms without mass are not evaluated, so a normal integrand may be `+∞`
/// off the support. The result is `+∞` when it is `+∞` on the support.
pub fn integrate_young(f: &Integrand, eta: &YoungMeasure) -> Result<f64> {
    let space = eta.fiber_space();
    let mut total = 0.0;
    for (k, slice) in eta.slices.iter().enumerate() {
        let t = eta.grid.time(k);
        let mut inner = 0.0;
        for (i, &w) in slice.weights().iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            inner += w * f.eval(t, space.point(i))?;
        }
        total += inner;
    }
    Ok(total * eta.grid.slice_weight())
}
