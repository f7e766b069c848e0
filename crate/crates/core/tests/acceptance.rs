//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails. Run with `cargo test -p orthoreg --test acceptance`.

mod common;

use common::*;
use ndarray::{Array1, Array2, Axis};
use orthoreg::linalg::symmetric_eigenvalues;
use orthoreg::prox::{lasso_kkt_violation, lasso_objective};
use orthoreg::sim::MonteCarloReport;
use orthoreg::{
    default_penalties, fit_first_stage, lasso_fit, orthogonal_moment, run_monte_carlo,
    soft_threshold, two_step_fit, ColumnScaler, Dataset, LassoProblem, PenaltyPlan,
    SimulationConfig, SolverOptions,
};
use rand::seq::SliceRandom;
use rand::Rng;

struct Ledger {
    failed: usize,
    total: usize,
}

impl Ledger {
    fn check(&mut self, id: &str, what: &str, ok: bool, detail: String) {
        self.total += 1;
        if !ok {
            self.failed += 1;
        }
        println!(
            "{} {id:<4} {what} ({detail})",
            if ok { "PASS" } else { "FAIL" }
        );
    }
}

fn workers() -> usize {
    std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
}

fn within(v: f64, lo: f64, hi: f64) -> bool {
    v >= lo && v <= hi
}

fn run(config: SimulationConfig) -> MonteCarloReport {
    let report = run_monte_carlo::<f64>(&config).expect("simulation runs");
    print!("{}", report.format_table());
    report
}

fn contaminated_n500(l: &mut Ledger) {
    let report = run(SimulationConfig {
        n: 500,
        p: 500,
        eps: 0.005,
        z: 20.0,
        reps: 500,
        seed: 42,
        workers: workers(),
        ..SimulationConfig::default()
    });
    let r = report.robust;
    let b = report.biased.unwrap();
    l.check(
        "C1",
        "robust |bias| <= 0.02",
        r.bias.abs() <= 0.02,
        format!("bias {:.4}", r.bias),
    );
    l.check(
        "C1",
        "robust MSE in [0.004, 0.016]",
        within(r.mse, 0.004, 0.016),
        format!("mse {:.4}", r.mse),
    );
    l.check(
        "C1",
        "robust coverage in [0.87, 0.96]",
        within(r.coverage, 0.87, 0.96),
        format!("coverage {:.3}", r.coverage),
    );
    l.check(
        "C1",
        "biased bias >= 0.5",
        b.bias >= 0.5,
        format!("bias {:.4}", b.bias),
    );
    l.check(
        "C1",
        "biased MSE >= 0.4",
        b.mse >= 0.4,
        format!("mse {:.4}", b.mse),
    );
    l.check(
        "C1",
        "biased coverage <= 0.10",
        b.coverage <= 0.10,
        format!("coverage {:.3}", b.coverage),
    );
    l.check(
        "C1",
        "robust MSE below biased MSE",
        r.mse < b.mse,
        format!("{:.4} vs {:.4}", r.mse, b.mse),
    );
}

fn contaminated_n1000(l: &mut Ledger) {
    let report = run(SimulationConfig {
        n: 1000,
        p: 1000,
        eps: 0.0025,
        z: 40.0,
        reps: 200,
        seed: 42,
        workers: workers(),
        ..SimulationConfig::default()
    });
    let r = report.robust;
    let b = report.biased.unwrap();
    l.check(
        "C2",
        "robust coverage in [0.84, 0.96]",
        within(r.coverage, 0.84, 0.96),
        format!("coverage {:.3}", r.coverage),
    );
    l.check(
        "C2",
        "robust MSE <= 0.01",
        r.mse <= 0.01,
        format!("mse {:.4}", r.mse),
    );
    l.check(
        "C2",
        "biased coverage <= 0.25",
        b.coverage <= 0.25,
        format!("coverage {:.3}", b.coverage),
    );
    l.check(
        "C2",
        "biased MSE >= 0.03",
        b.mse >= 0.03,
        format!("mse {:.4}", b.mse),
    );
}

fn convex_oracles(l: &mut Ledger) {
    let mut g = rng(2024);
    let mut worst_robust: f64 = 0.0;
    let mut worst_capped: f64 = 0.0;
    let mut worst_lasso: f64 = 0.0;
    for _ in 0..50 {
        let n = g.random_range(8..=25);
        let p = g.random_range(1..=3);
        let x = gaussian_matrix(&mut g, n, p);
        let mut y = x.column(0).to_owned() * 1.5 + gaussian_vector(&mut g, n);
        let row = g.random_range(0..n);
        y[row] += g.random_range(5.0..20.0);
        let (lb0, _) = default_penalties(n, p, 1.01).unwrap();
        let lb = lb0 * g.random_range(0.2..1.0);
        let lg = (n as f64).sqrt() * g.random_range(0.4..0.95);

        let scaler = ColumnScaler::from_design(x.view());
        let (ob, oc) = robust_oracle(&x, &y, lb, lg);
        let best = robust_obj(&x, &y, lb, lg, &ob, &oc);
        let gap = |max_outer_iters: usize| {
            let opts = SolverOptions {
                max_outer_iters,
                ..SolverOptions::default()
            };
            let fit = fit_first_stage(y.view(), x.view(), &scaler, lb, lg, &opts).unwrap();
            let lib = robust_obj(
                &x,
                &y,
                lb,
                lg,
                fit.beta_hat.as_slice().unwrap(),
                fit.gamma_hat.as_slice().unwrap(),
            );
            (lib - best).abs()
        };
        worst_robust = worst_robust.max(gap(1000));
        worst_capped = worst_capped.max(gap(SolverOptions::<f64>::default().max_outer_iters));

        let lambda = g.random_range(0.05..1.0);
        let w: Vec<f64> = (0..p).map(|_| g.random_range(0.5..1.5)).collect();
        let wa = Array1::from(w.clone());
        let sol = lasso_fit(&LassoProblem::new(x.view(), y.view(), wa.view(), lambda)).unwrap();
        let oracle = lasso_oracle(&x, &y, &w, lambda);
        let lib = lasso_objective(x.view(), y.view(), wa.view(), lambda, sol.coef.view());
        worst_lasso = worst_lasso.max((lib - lasso_obj(&x, &y, &w, lambda, &oracle)).abs());
    }
    l.check(
        "C3",
        "first-stage objective within 1e-6 of oracle",
        worst_robust <= 1e-6,
        format!("worst gap {worst_robust:.2e}"),
    );
    println!("INFO C3   with the default 10-iteration cap the worst gap is {worst_capped:.2e}");
    l.check(
        "C3",
        "lasso objective within 1e-6 of oracle",
        worst_lasso <= 1e-6,
        format!("worst gap {worst_lasso:.2e}"),
    );
}

fn shifted_instance(seed: u64, n: usize, p: usize, k: usize) -> Dataset<f64> {
    let mut g = rng(seed);
    let x = gaussian_matrix(&mut g, n, p);
    let mut d = gaussian_matrix(&mut g, n, k);
    for j in 0..k {
        let col = x.column(j % p).to_owned();
        d.column_mut(j).scaled_add(0.8, &col);
    }
    d[[1, 0]] += 15.0;
    let mut y = d.sum_axis(Axis(1)) + x.column(0).to_owned() * 1.5 + gaussian_vector(&mut g, n);
    y[n / 2] += 25.0;
    Dataset::new(y, d, x).unwrap()
}

fn invariants(l: &mut Ledger) {
    // objective monotonicity and lasso KKT at termination
    let mut worst_rise: f64 = f64::NEG_INFINITY;
    let mut worst_kkt: f64 = 0.0;
    for seed in 0..30 {
        let mut g = rng(seed);
        let (n, p) = (60, 20);
        let x = gaussian_matrix(&mut g, n, p);
        let mut y = x.column(2).to_owned() * 3.0 + gaussian_vector(&mut g, n);
        y[seed as usize % n] += 30.0;
        let scaler = ColumnScaler::from_design(x.view());
        let (lb, lg) = default_penalties(n, p, 1.01).unwrap();
        let fit = fit_first_stage(
            y.view(),
            x.view(),
            &scaler,
            lb,
            lg,
            &SolverOptions::default(),
        )
        .unwrap();
        for w in fit.trace.windows(2) {
            worst_rise = worst_rise.max((w[1] - w[0]) / (1.0 + w[0].abs()));
        }
        let weights = Array1::from_shape_fn(p, |_| g.random_range(0.5..1.5));
        let problem = LassoProblem::new(x.view(), y.view(), weights.view(), 0.2);
        let sol = lasso_fit(&problem).unwrap();
        worst_kkt = worst_kkt.max(lasso_kkt_violation(&problem, sol.coef.view()));
    }
    l.check(
        "C4",
        "objective non-increasing over outer iterations",
        worst_rise <= 1e-10,
        format!("worst relative rise {worst_rise:.2e}"),
    );
    l.check(
        "C4",
        "lasso KKT residual <= 1e-8",
        worst_kkt <= 1e-8,
        format!("worst {worst_kkt:.2e}"),
    );

    // soft-threshold closed form
    let mut g = rng(77);
    let mismatches = (0..1_000_000)
        .filter(|_| {
            let r: f64 = g.random_range(-10.0..10.0);
            let tau: f64 = g.random_range(0.0..5.0);
            soft_threshold(r, tau) != r.signum() * (r.abs() - tau).max(0.0)
        })
        .count();
    l.check(
        "C4",
        "soft_threshold matches closed form on 1e6 pairs",
        mismatches == 0,
        format!("{mismatches} mismatches"),
    );

    // second stage: normal equations and PSD gram
    let mut worst_moment: f64 = 0.0;
    let mut min_eig = f64::INFINITY;
    for seed in 0..20 {
        let k = 1 + seed as usize % 3;
        let data = shifted_instance(seed, 50, 8, k);
        let plan = PenaltyPlan::default_for(50, 8, k, 1.01).unwrap();
        let result = two_step_fit(&data, &plan, &SolverOptions::default(), 0.95).unwrap();
        worst_moment = orthogonal_moment(&result)
            .iter()
            .fold(worst_moment, |m, v| m.max(v.abs()));
        min_eig = min_eig.min(symmetric_eigenvalues(result.sigma_xi_hat.view())[0]);
    }
    l.check(
        "C4",
        "orthogonal moment <= 1e-8",
        worst_moment <= 1e-8,
        format!("worst {worst_moment:.2e}"),
    );
    l.check(
        "C4",
        "Sigma_xi PSD",
        min_eig >= -1e-10,
        format!("min eigenvalue {min_eig:.3e}"),
    );

    // homogeneity under response scaling
    let mut g = rng(5);
    let (n, p) = (30, 6);
    let x = gaussian_matrix(&mut g, n, p);
    let mut y = x.column(0).to_owned() * 2.0 + gaussian_vector(&mut g, n);
    y[4] += 20.0;
    let scaler = ColumnScaler::from_design(x.view());
    let (lb, lg) = default_penalties(n, p, 1.01).unwrap();
    let tight = |scale: f64| SolverOptions {
        max_outer_iters: 1000,
        lasso_tol: 1e-11 * scale,
        objective_tol: 1e-15,
        ..SolverOptions::default()
    };
    let base = fit_first_stage(y.view(), x.view(), &scaler, lb, lg, &tight(1.0)).unwrap();
    let mut worst_rel: f64 = 0.0;
    for a in [0.5, 2.0, 3.0, 10.0] {
        let ys = &y * a;
        let fit = fit_first_stage(ys.view(), x.view(), &scaler, lb, lg, &tight(a)).unwrap();
        let rel = |u: f64, v: f64| (u - a * v).abs() / (a * v.abs()).max(1.0);
        worst_rel = worst_rel.max(rel(fit.sigma_hat_k, base.sigma_hat_k));
        for (u, v) in fit
            .beta_hat
            .iter()
            .chain(fit.gamma_hat.iter())
            .zip(base.beta_hat.iter().chain(base.gamma_hat.iter()))
        {
            worst_rel = worst_rel.max(rel(*u, *v));
        }
    }
    l.check(
        "C4",
        "first stage homogeneous under response scaling",
        worst_rel <= 1e-10,
        format!("worst relative error {worst_rel:.2e}"),
    );

    // permutation invariance
    let data = shifted_instance(11, 40, 6, 2);
    let plan = PenaltyPlan::default_for(40, 6, 2, 1.01).unwrap();
    let opts = SolverOptions {
        max_outer_iters: 1000,
        lasso_tol: 1e-12,
        objective_tol: 1e-15,
        ..SolverOptions::default()
    };
    let base = two_step_fit(&data, &plan, &opts, 0.95).unwrap();
    let mut order: Vec<usize> = (0..40).collect();
    let mut worst_obj: f64 = 0.0;
    let mut worst_alpha: f64 = 0.0;
    for s in 0..5 {
        order.shuffle(&mut rng(s));
        let other = two_step_fit(&data.permute_rows(&order).unwrap(), &plan, &opts, 0.95).unwrap();
        for (a, b) in base.first_stages.iter().zip(&other.first_stages) {
            worst_obj =
                worst_obj.max((a.objective() - b.objective()).abs() / (1.0 + a.objective()));
        }
        for (a, b) in base.alpha_hat.iter().zip(other.alpha_hat.iter()) {
            worst_alpha = worst_alpha.max((a - b).abs());
        }
    }
    l.check(
        "C4",
        "row permutation leaves the fit unchanged",
        worst_obj <= 1e-12 && worst_alpha <= 1e-6,
        format!("objective {worst_obj:.1e}, alpha {worst_alpha:.1e}"),
    );

    // worker invariance
    let config = SimulationConfig {
        n: 100,
        p: 40,
        eps: 0.03,
        z: 15.0,
        reps: 24,
        seed: 3,
        ..SimulationConfig::default()
    };
    let reports: Vec<String> = [1, 2, 8]
        .iter()
        .map(|&w| {
            let r = run_monte_carlo::<f64>(&SimulationConfig {
                workers: w,
                ..config.clone()
            })
            .unwrap();
            format!("{:?}|{}", (r.robust, r.biased), r.records_csv())
        })
        .collect();
    let same = reports.windows(2).all(|w| w[0] == w[1]);
    l.check(
        "C4",
        "report identical with 1, 2 and 8 workers",
        same,
        "bitwise comparison".into(),
    );
}

fn degenerate(l: &mut Ledger) {
    let report = run(SimulationConfig {
        n: 200,
        p: 200,
        eps: 0.0,
        z: 0.0,
        reps: 200,
        seed: 42,
        workers: workers(),
        ..SimulationConfig::default()
    });
    let r = report.robust;
    let b = report.biased.unwrap();
    l.check(
        "C5",
        "no outliers: robust coverage in [0.90, 1.00]",
        within(r.coverage, 0.90, 1.0),
        format!("coverage {:.3}", r.coverage),
    );
    l.check(
        "C5",
        "no outliers: biased coverage in [0.90, 1.00]",
        within(b.coverage, 0.90, 1.0),
        format!("coverage {:.3}", b.coverage),
    );

    let mut g = rng(8);
    let (n, p) = (30, 5);
    let x = gaussian_matrix(&mut g, n, p);
    let y = gaussian_vector(&mut g, n) * 3.0;
    let scaler = ColumnScaler::from_design(x.view());
    let s0 = (y.iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt();
    let lb = (0..p)
        .map(|j| x.column(j).dot(&y).abs() / (s0 * scaler.psi()[j]))
        .fold(0.0, f64::max)
        * 1.01;
    let lg = y.iter().map(|v| v.abs()).fold(0.0, f64::max) / s0 * 1.01;
    let fit = fit_first_stage(
        y.view(),
        x.view(),
        &scaler,
        lb,
        lg,
        &SolverOptions::default(),
    )
    .unwrap();
    let zero = fit
        .beta_hat
        .iter()
        .chain(fit.gamma_hat.iter())
        .all(|&v| v == 0.0);
    l.check(
        "C5",
        "full shrinkage gives beta = gamma = 0",
        zero,
        format!("lambda_beta {lb:.3}, lambda_gamma {lg:.3}"),
    );

    let mut worst: f64 = 0.0;
    for seed in 0..10 {
        let mut g = rng(100 + seed);
        let k = 1 + seed as usize % 3;
        let d = gaussian_matrix(&mut g, 40, k);
        let y = d.dot(&Array1::from_elem(k, -0.4)) + gaussian_vector(&mut g, 40);
        let data = Dataset::new(y.clone(), d.clone(), Array2::zeros((40, 0))).unwrap();
        let plan = PenaltyPlan::new(vec![0.0; k + 1], vec![0.0; k + 1], 1.01).unwrap();
        let result = two_step_fit(&data, &plan, &SolverOptions::default(), 0.95).unwrap();
        let ols = normal_equations(&d, y.as_slice().unwrap());
        for (a, b) in result.alpha_hat.iter().zip(&ols) {
            worst = worst.max((a - b).abs());
        }
    }
    l.check(
        "C5",
        "p = 0 reduces to OLS of y on D",
        worst <= 1e-10,
        format!("worst gap {worst:.2e}"),
    );
}

fn main() {
    let mut l = Ledger {
        failed: 0,
        total: 0,
    };
    let start = std::time::Instant::now();
    contaminated_n500(&mut l);
    contaminated_n1000(&mut l);
    convex_oracles(&mut l);
    invariants(&mut l);
    degenerate(&mut l);
    println!(
        "{} of {} checks passed in {:.0}s",
        l.total - l.failed,
        l.total,
        start.elapsed().as_secs_f64()
    );
    if l.failed > 0 {
        std::process::exit(1);
    }
}
