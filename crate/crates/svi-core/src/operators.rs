//! Stochastic operator abstraction: per-sample maps, sample-average
//! estimators, and the residual functions used for stopping and analysis.

use std::any::Any;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::{add_scaled, norm2, sub};
use crate::rng::RngStream;
use crate::sets::FeasibleSet;

/// One realization of the random element. The payload is problem-specific
/// (a realized matrix/vector tuple, window moments, ...) so the same batch
/// can be re-applied at several points, as the line search requires.
pub struct Sample(Box<dyn Any + Send + Sync>);

impl Sample {
    pub fn new<T: Any + Send + Sync>(payload: T) -> Self {
        Sample(Box::new(payload))
    }

    pub fn downcast_ref<T: Any>(&self) -> Option<&T> {
        self.0.downcast_ref::<T>()
    }
}

/// A batch of i.i.d. samples of size S_k.
pub struct SampleBatch {
    samples: Vec<Sample>,
}

impl SampleBatch {
    pub fn new(samples: Vec<Sample>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptyBatch);
        }
        Ok(SampleBatch { samples })
    }

    pub fn size(&self) -> usize {
        self.samples.len()
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }
}

type SamplerFn = dyn Fn(&mut RngStream) -> Sample + Send + Sync;
type ApplyFn = dyn Fn(&Sample, &[f64]) -> Vec<f64> + Send + Sync;
type BatchApplyFn = dyn Fn(&SampleBatch, &[f64]) -> Vec<f64> + Send + Sync;
type MeanFn = dyn Fn(&[f64]) -> Vec<f64> + Send + Sync;

/// A stochastic variational inequality instance: a feasible set X, a
/// per-sample operator T(xi, .), and optionally the exact mean operator
/// H(x) = E[T(xi, x)] when a closed or quadrature form exists.
pub struct StochasticProblem {
    dim: usize,
    set: FeasibleSet,
    sampler: Arc<SamplerFn>,
    apply: Arc<ApplyFn>,
    batch_apply: Option<Arc<BatchApplyFn>>,
    exact_mean: Option<Arc<MeanFn>>,
}

impl StochasticProblem {
    pub fn new(
        set: FeasibleSet,
        sampler: impl Fn(&mut RngStream) -> Sample + Send + Sync + 'static,
        apply: impl Fn(&Sample, &[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        StochasticProblem {
            dim: set.dim(),
            set,
            sampler: Arc::new(sampler),
            apply: Arc::new(apply),
            batch_apply: None,
            exact_mean: None,
        }
    }

    pub fn with_exact_mean(
        mut self,
        mean: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        self.exact_mean = Some(Arc::new(mean));
        self
    }

    /// Install a fused batch estimator. It must compute exactly the
    /// sample average of `apply` over the batch (up to summation
    /// roundoff); generators install one when the samples share structure
    /// worth hoisting out of the per-sample loop.
    pub fn with_batch_operator(
        mut self,
        f: impl Fn(&SampleBatch, &[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        self.batch_apply = Some(Arc::new(f));
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn set(&self) -> &FeasibleSet {
        &self.set
    }

    pub fn has_exact_mean(&self) -> bool {
        self.exact_mean.is_some()
    }

    pub fn draw_sample(&self, stream: &mut RngStream) -> Sample {
        (self.sampler)(stream)
    }

    /// T(xi, x) for one realized sample.
    pub fn apply(&self, sample: &Sample, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        let out = (self.apply)(sample, x);
        debug_assert_eq!(out.len(), self.dim);
        Ok(out)
    }

    /// H(x) = E[T(xi, x)] when available.
    pub fn exact_mean(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        match &self.exact_mean {
            Some(f) => Ok(f(x)),
            None => Err(Error::MeanUnavailable),
        }
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: x.len() });
        }
        Ok(())
    }

    /// Draw a batch of `size` i.i.d. samples from `stream`.
    pub fn sample_batch(&self, size: usize, stream: &mut RngStream) -> Result<SampleBatch> {
        if size == 0 {
            return Err(Error::EmptyBatch);
        }
        SampleBatch::new((0..size).map(|_| self.draw_sample(stream)).collect())
    }

    /// Sample-average estimator H_batch(x) = (1/S) sum_j T(xi_j, x).
    pub fn empirical_operator(&self, batch: &SampleBatch, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        if let Some(f) = &self.batch_apply {
            let out = f(batch, x);
            debug_assert_eq!(out.len(), self.dim);
            return Ok(out);
        }
        let mut acc = vec![0.0; self.dim];
        for s in batch.samples() {
            let t = self.apply(s, x)?;
            for (a, v) in acc.iter_mut().zip(&t) {
                *a += v;
            }
        }
        let inv = 1.0 / batch.size() as f64;
        for a in acc.iter_mut() {
            *a *= inv;
        }
        Ok(acc)
    }

    /// Exact residual r_t(x) = ||P_X(x - t H(x)) - x||; zero exactly at
    /// solutions of the variational inequality.
    pub fn exact_residual(&self, x: &[f64], t: f64) -> Result<f64> {
        if !(t > 0.0) {
            return Err(Error::InvalidStep(t));
        }
        let h = self.exact_mean(x)?;
        let p = self.set.project(&add_scaled(x, -t, &h))?;
        Ok(norm2(&sub(&p, x)))
    }

    /// Empirical residual ||P_X(x - H_batch(x)) - x|| at unit step.
    pub fn empirical_residual(&self, batch: &SampleBatch, x: &[f64]) -> Result<f64> {
        let h = self.empirical_operator(batch, x)?;
        let p = self.set.project(&add_scaled(x, -1.0, &h))?;
        Ok(norm2(&sub(&p, x)))
    }

    /// Sample-average oracle errors at the two evaluation points of one
    /// iteration: eps1 = H_xi(x_k) - H(x_k), eps2 = H_eta(y_half) -
    /// H(y_half), eps3 = H_xi(y_half) - H(y_half).
    pub fn oracle_errors(
        &self,
        batch_xi: &SampleBatch,
        batch_eta: &SampleBatch,
        x_k: &[f64],
        y_half: &[f64],
    ) -> Result<OracleErrors> {
        let h_x = self.exact_mean(x_k)?;
        let h_y = self.exact_mean(y_half)?;
        let eps1 = sub(&self.empirical_operator(batch_xi, x_k)?, &h_x);
        let eps2 = sub(&self.empirical_operator(batch_eta, y_half)?, &h_y);
        let eps3 = sub(&self.empirical_operator(batch_xi, y_half)?, &h_y);
        Ok(OracleErrors { eps1, eps2, eps3 })
    }
}

/// Diagnostic oracle-error triple for problems with an exact mean.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleErrors {
    pub eps1: Vec<f64>,
    pub eps2: Vec<f64>,
    pub eps3: Vec<f64>,
}
