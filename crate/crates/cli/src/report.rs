//! Serialized form of a fit. Matrices are row-major nested arrays; row
//! indices are 0-based data rows.

use serde::Serialize;

use orthoreg::{InferenceResult, PenaltyPlan, SolverOptions};

use crate::csvio::fmt_f64;
use crate::FitArgs;

#[derive(Debug, Serialize)]
pub struct FirstStageReport {
    pub response: String,
    pub lambda_beta: f64,
    pub lambda_gamma: f64,
    pub sigma_hat: f64,
    pub selected_controls: usize,
    pub selected_control_names: Vec<String>,
    pub outlier_rows: Vec<usize>,
    pub outer_iters: usize,
    pub converged: bool,
    pub objective_trace: Vec<f64>,
}

#[derive(Debug, Serialize)]
pub struct FitReport {
    pub schema_version: u32,
    pub data: String,
    pub outcome: String,
    pub treatments: Vec<String>,
    pub controls: Vec<String>,
    pub n: usize,
    pub level: f64,
    pub penalty_c: f64,
    pub solver: SolverOptions<f64>,
    pub alpha_hat: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub ci_lower: Vec<f64>,
    pub ci_upper: Vec<f64>,
    pub sigma_hat: f64,
    pub sigma_xi_hat: Vec<Vec<f64>>,
    pub first_stages: Vec<FirstStageReport>,
    pub warnings: Vec<String>,
}

impl FitReport {
    pub fn new(
        args: &FitArgs,
        controls: &[String],
        plan: &PenaltyPlan<f64>,
        opts: &SolverOptions<f64>,
        result: &InferenceResult<f64>,
    ) -> Self {
        let summary = result.to_report();
        let first_stages = result
            .first_stages
            .iter()
            .enumerate()
            .map(|(k, fit)| {
                let selected = fit.selected_controls();
                FirstStageReport {
                    response: if k == 0 {
                        args.outcome.clone()
                    } else {
                        args.treatments[k - 1].clone()
                    },
                    lambda_beta: plan.lambda_beta[k],
                    lambda_gamma: plan.lambda_gamma[k],
                    sigma_hat: fit.sigma_hat_k,
                    selected_controls: selected.len(),
                    selected_control_names: selected.iter().map(|&j| controls[j].clone()).collect(),
                    outlier_rows: fit.outlier_set.clone(),
                    outer_iters: fit.outer_iters,
                    converged: fit.converged,
                    objective_trace: fit.trace.clone(),
                }
            })
            .collect();
        FitReport {
            schema_version: 1,
            data: args.data.display().to_string(),
            outcome: args.outcome.clone(),
            treatments: args.treatments.clone(),
            controls: controls.to_vec(),
            n: result.n(),
            level: summary.level,
            penalty_c: plan.c_const,
            solver: opts.clone(),
            alpha_hat: summary.alpha_hat,
            std_errors: summary.std_errors,
            ci_lower: summary.ci_lower,
            ci_upper: summary.ci_upper,
            sigma_hat: summary.sigma_hat,
            sigma_xi_hat: summary.sigma_xi_hat,
            first_stages,
            warnings: summary.warnings,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    /// One row per treatment.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("treatment,alpha_hat,std_error,ci_lower,ci_upper,level\n");
        for (k, name) in self.treatments.iter().enumerate() {
            out.push_str(&format!(
                "{name},{},{},{},{},{}\n",
                fmt_f64(self.alpha_hat[k]),
                fmt_f64(self.std_errors[k]),
                fmt_f64(self.ci_lower[k]),
                fmt_f64(self.ci_upper[k]),
                self.level
            ));
        }
        out
    }
}
