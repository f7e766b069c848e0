//! Simulation design with sparse outlier shifts and the Monte Carlo harness
//! comparing the robust estimator with the non-robust baseline.
//!
//! Design, with columns numbered from 1 and `t = Phi^{-1}(1 - eps)`:
//!
//! ```text
//! x_i ~ N(0, I_p)
//! d_i = x_i' beta1 + z * 1{x_{11,i} >= t} + xi1_i,   beta1_j = 10 for 6 <= j <= 10
//! y_i = alpha d_i + x_i' beta + z * 1{x_{6,i} >= t} + xi_i,   beta_j = 10 for 1 <= j <= 5
//! ```
//!
//! with standard normal noise. Each replication draws from its own ChaCha8
//! stream selected by the replication index, so results do not depend on
//! the number of worker threads.

use std::fmt::Write as _;
use std::time::Instant;

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, PenaltyPlan};
use crate::error::{Error, Result};
use crate::first_stage::SolverOptions;
use crate::inference::{normal_quantile, two_step_fit, InferenceResult};
use crate::scalar::Scalar;

/// Fraction of failed replications above which a run is rejected.
pub const MAX_FAILURE_RATE: f64 = 0.05;

const OUTCOME_TRIGGER: usize = 5;
const TREATMENT_TRIGGER: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub n: usize,
    pub p: usize,
    /// Outlier propensity.
    pub eps: f64,
    /// Outlier shift magnitude.
    pub z: f64,
    /// True treatment effect. Bias and coverage are location-equivariant so
    /// the value is arbitrary; defaults to 1.
    pub alpha_true: f64,
    pub reps: usize,
    pub seed: u64,
    pub c_const: f64,
    pub level: f64,
    pub outer_iters: usize,
    pub lasso_tol: f64,
    pub include_biased_baseline: bool,
    pub workers: usize,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            n: 500,
            p: 500,
            eps: 0.005,
            z: 20.0,
            alpha_true: 1.0,
            reps: 1000,
            seed: 42,
            c_const: 1.01,
            level: 0.95,
            outer_iters: 10,
            lasso_tol: 1e-8,
            include_biased_baseline: true,
            workers: 1,
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.n < 2 {
            return Err(Error::TooFewObservations(self.n));
        }
        if !(0.0..1.0).contains(&self.eps) {
            return bad(format!("eps must lie in [0, 1), got {}", self.eps));
        }
        if self.eps > 0.0 && self.p <= TREATMENT_TRIGGER {
            return bad(format!(
                "outliers are triggered by control 11, so p must be at least 11 when eps > 0 (p = {})",
                self.p
            ));
        }
        if self.reps == 0 {
            return bad("reps must be at least 1".into());
        }
        if self.workers == 0 {
            return bad("workers must be at least 1".into());
        }
        if self.outer_iters == 0 {
            return bad("outer_iters must be at least 1".into());
        }
        if !(self.c_const > 1.0) {
            return bad(format!("c_const must exceed 1, got {}", self.c_const));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return bad(format!("level must lie in (0, 1), got {}", self.level));
        }
        if !(self.lasso_tol > 0.0) {
            return bad("lasso_tol must be positive".into());
        }
        if !self.z.is_finite() || !self.alpha_true.is_finite() {
            return bad("z and alpha_true must be finite".into());
        }
        Ok(())
    }

    fn solver_options<T: Scalar>(&self) -> SolverOptions<T> {
        SolverOptions {
            max_outer_iters: self.outer_iters,
            lasso_tol: T::lit(self.lasso_tol),
            ..SolverOptions::default()
        }
    }
}

/// Ground truth of one simulated dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct DgpTruth {
    pub alpha: f64,
    pub beta: Array1<f64>,
    pub beta1: Array1<f64>,
    pub gamma: Array1<f64>,
    pub gamma1: Array1<f64>,
    pub threshold: f64,
}

fn rep_rng(seed: u64, rep_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep_index);
    rng
}

/// Draws one dataset. Draw order: X row by row, then the treatment noise,
/// then the outcome noise.
pub fn generate_dgp<T: Scalar>(
    config: &SimulationConfig,
    rep_index: u64,
) -> Result<(Dataset<T>, DgpTruth)> {
    config.validate()?;
    let (n, p) = (config.n, config.p);
    let mut rng = rep_rng(config.seed, rep_index);
    let x: Array2<f64> = Array2::from_shape_simple_fn((n, p), || rng.sample(StandardNormal));
    let xi1: Array1<f64> = Array1::from_shape_simple_fn(n, || rng.sample(StandardNormal));
    let xi: Array1<f64> = Array1::from_shape_simple_fn(n, || rng.sample(StandardNormal));

    let beta1 = Array1::from_shape_fn(p, |j| if (5..10).contains(&j) { 10.0 } else { 0.0 });
    let beta = Array1::from_shape_fn(p, |j| if j < 5 { 10.0 } else { 0.0 });
    let threshold = if config.eps > 0.0 {
        normal_quantile(1.0 - config.eps)
    } else {
        f64::INFINITY
    };
    let shift = |col: usize| -> Array1<f64> {
        Array1::from_shape_fn(n, |i| {
            if col < p && x[[i, col]] >= threshold {
                config.z
            } else {
                0.0
            }
        })
    };
    let gamma1 = shift(TREATMENT_TRIGGER);
    let gamma = shift(OUTCOME_TRIGGER);

    let d = x.dot(&beta1) + &gamma1 + &xi1;
    let y = &d * config.alpha_true + x.dot(&beta) + &gamma + &xi;

    let data = Dataset::new(
        y.mapv(T::lit),
        d.mapv(T::lit).insert_axis(ndarray::Axis(1)),
        x.mapv(T::lit),
    )?;
    Ok((
        data,
        DgpTruth {
            alpha: config.alpha_true,
            beta,
            beta1,
            gamma,
            gamma1,
            threshold,
        },
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateRecord {
    pub alpha_hat: f64,
    pub std_error: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
    pub hit: bool,
}

impl EstimateRecord {
    fn from_result<T: Scalar>(res: &InferenceResult<T>, alpha_true: f64) -> Self {
        let lo = res.ci_lower[0].as_f64();
        let hi = res.ci_upper[0].as_f64();
        EstimateRecord {
            alpha_hat: res.alpha_hat[0].as_f64(),
            std_error: res.std_errors[0].as_f64(),
            ci_lower: lo,
            ci_upper: hi,
            hit: lo <= alpha_true && alpha_true <= hi,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepRecord {
    pub rep_index: u64,
    pub robust: Option<EstimateRecord>,
    pub biased: Option<EstimateRecord>,
    /// True outlier counts in the outcome and treatment equations.
    pub outliers_outcome: usize,
    pub outliers_treatment: usize,
    pub error: Option<String>,
}

impl RepRecord {
    pub fn failed(&self) -> bool {
        self.error.is_some()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSummary {
    pub bias: f64,
    /// Divisor-`reps` variance, so `mse = bias^2 + variance`.
    pub variance: f64,
    pub mse: f64,
    pub coverage: f64,
    pub reps: usize,
}

impl EstimatorSummary {
    /// Summarizes estimates in the given order.
    pub fn from_estimates(estimates: &[EstimateRecord], alpha_true: f64) -> Self {
        let m = estimates.len() as f64;
        let mean = estimates.iter().map(|e| e.alpha_hat).sum::<f64>() / m;
        let variance = estimates
            .iter()
            .map(|e| (e.alpha_hat - mean).powi(2))
            .sum::<f64>()
            / m;
        let mse = estimates
            .iter()
            .map(|e| (e.alpha_hat - alpha_true).powi(2))
            .sum::<f64>()
            / m;
        let coverage = estimates.iter().filter(|e| e.hit).count() as f64 / m;
        EstimatorSummary {
            bias: mean - alpha_true,
            variance,
            mse,
            coverage,
            reps: estimates.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonteCarloReport {
    pub schema_version: u32,
    pub config: SimulationConfig,
    pub robust: EstimatorSummary,
    pub biased: Option<EstimatorSummary>,
    pub reps_completed: usize,
    pub reps_failed: usize,
    /// Not serialized so that reports are reproducible byte for byte.
    #[serde(skip)]
    pub wall_time_secs: f64,
    #[serde(skip)]
    pub records: Vec<RepRecord>,
}

fn run_rep<T: Scalar>(config: &SimulationConfig, rep_index: u64) -> RepRecord {
    let mut record = RepRecord {
        rep_index,
        robust: None,
        biased: None,
        outliers_outcome: 0,
        outliers_treatment: 0,
        error: None,
    };
    let outcome = (|| -> Result<()> {
        let (data, truth) = generate_dgp::<T>(config, rep_index)?;
        record.outliers_outcome = truth.gamma.iter().filter(|&&g| g != 0.0).count();
        record.outliers_treatment = truth.gamma1.iter().filter(|&&g| g != 0.0).count();
        let plan = PenaltyPlan::default_for(config.n, config.p, 1, T::lit(config.c_const))?;
        let opts = config.solver_options::<T>();
        let level = T::lit(config.level);
        let robust = two_step_fit(&data, &plan, &opts, level)?;
        record.robust = Some(EstimateRecord::from_result(&robust, config.alpha_true));
        if config.include_biased_baseline {
            let biased = two_step_fit(&data, &plan.without_shifts(), &opts, level)?;
            record.biased = Some(EstimateRecord::from_result(&biased, config.alpha_true));
        }
        Ok(())
    })();
    if let Err(e) = outcome {
        record.robust = None;
        record.biased = None;
        record.error = Some(e.to_string());
    }
    record
}

/// Runs all replications on a dedicated pool of `config.workers` threads and
/// aggregates them in replication order.
pub fn run_monte_carlo<T: Scalar>(config: &SimulationConfig) -> Result<MonteCarloReport> {
    config.validate()?;
    let start = Instant::now();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("cannot build worker pool: {e}")))?;
    let records: Vec<RepRecord> = pool.install(|| {
        (0..config.reps as u64)
            .into_par_iter()
            .map(|r| run_rep::<T>(config, r))
            .collect()
    });

    let failed = records.iter().filter(|r| r.failed()).count();
    if failed as f64 > MAX_FAILURE_RATE * config.reps as f64 || failed == config.reps {
        return Err(Error::TooManyFailures {
            failed,
            total: config.reps,
        });
    }
    let robust: Vec<EstimateRecord> = records.iter().filter_map(|r| r.robust).collect();
    let biased: Vec<EstimateRecord> = records.iter().filter_map(|r| r.biased).collect();

    Ok(MonteCarloReport {
        schema_version: 1,
        config: config.clone(),
        robust: EstimatorSummary::from_estimates(&robust, config.alpha_true),
        biased: config
            .include_biased_baseline
            .then(|| EstimatorSummary::from_estimates(&biased, config.alpha_true)),
        reps_completed: config.reps - failed,
        reps_failed: failed,
        wall_time_secs: start.elapsed().as_secs_f64(),
        records,
    })
}

impl MonteCarloReport {
    /// Rows bias / var / MSE / Coverage, one column per estimator.
    pub fn format_table(&self) -> String {
        let mut out = String::new();
        let c = &self.config;
        let _ = writeln!(
            out,
            "p={} n={} eps={} z={} reps={}",
            c.p, c.n, c.eps, c.z, self.reps_completed
        );
        let _ = writeln!(out, "{:<10}{:>14}{:>14}", "", "robust", "biased");
        let r = &self.robust;
        let b = self.biased.as_ref();
        let rows = [
            ("bias", r.bias, b.map(|b| b.bias)),
            ("var", r.variance, b.map(|b| b.variance)),
            ("MSE", r.mse, b.map(|b| b.mse)),
            ("Coverage", r.coverage, b.map(|b| b.coverage)),
        ];
        for (name, robust, biased) in rows {
            let biased = biased
                .map(|v| format!("{v:>14.4e}"))
                .unwrap_or_else(|| format!("{:>14}", "-"));
            let _ = writeln!(out, "{name:<10}{robust:>14.4e}{biased}");
        }
        out
    }

    /// One line per replication, comma separated with a header.
    pub fn records_csv(&self) -> String {
        let mut out = String::from(
            "rep_index,status,alpha_hat_robust,se_robust,ci_lo_robust,ci_hi_robust,hit_robust,\
             alpha_hat_biased,se_biased,ci_lo_biased,ci_hi_biased,hit_biased,\
             outliers_outcome,outliers_treatment\n",
        );
        let fmt = |e: &Option<EstimateRecord>| match e {
            Some(e) => format!(
                "{:.16e},{:.16e},{:.16e},{:.16e},{}",
                e.alpha_hat, e.std_error, e.ci_lower, e.ci_upper, e.hit as u8
            ),
            None => ",,,,".to_string(),
        };
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                r.rep_index,
                if r.failed() { "failed" } else { "ok" },
                fmt(&r.robust),
                fmt(&r.biased),
                r.outliers_outcome,
                r.outliers_treatment
            );
        }
        out
    }
}
