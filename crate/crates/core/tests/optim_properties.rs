use rand::Rng;
use robust_risk::catoni::{solve_catoni, RootSolveSettings};
use robust_risk::datagen::{
    default_w_star, regression_dataset, regression_dataset_with_noise, NoiseLaw, RegressionData, RngStream,
};
use robust_risk::influence::InfluenceSpec;
use robust_risk::models::{ModelProblem, Regression};
use robust_risk::optim::{direction, dw_gd, erm_gd, geometric_median_select, robust_gd, Direction, GDConfig};

fn precise() -> RootSolveSettings {
    RootSolveSettings::with_abs_tol(1e-14)
}

fn risk_estimate(problem: &Regression<'_>, w: &[f64], alpha: f64, spec: &InfluenceSpec) -> f64 {
    let mut losses = vec![0.0; problem.n_samples()];
    problem.losses_into(w, &mut losses);
    solve_catoni(&losses, alpha, spec, &precise()).unwrap()
}

fn fd_gradient(problem: &Regression<'_>, w: &[f64], alpha: f64, spec: &InfluenceSpec) -> Vec<f64> {
    (0..w.len())
        .map(|j| {
            let h = 1e-6 * w[j].abs().max(1.0);
            let mut up = w.to_vec();
            let mut down = w.to_vec();
            up[j] += h;
            down[j] -= h;
            (risk_estimate(problem, &up, alpha, spec) - risk_estimate(problem, &down, alpha, spec)) / (2.0 * h)
        })
        .collect()
}

#[test]
fn weighted_gradient_is_derivative_of_root_map() {
    let data = regression_dataset(3, 80, &default_w_star(3), 2.5, &mut RngStream::new(11, 0).rng()).unwrap();
    let problem = Regression::squared(&data);
    let mut rng = RngStream::new(11, 1).rng();
    for spec in [InfluenceSpec::wide(1.5).unwrap(), InfluenceSpec::wide(1.8).unwrap()] {
        let mut cfg = GDConfig::new(0.15, spec);
        cfg.root = precise();
        for _ in 0..5 {
            let w: Vec<f64> = (0..3).map(|_| rng.random_range(-1.5..1.5)).collect();
            let g = direction(&problem, &w, &cfg, Direction::Erm).unwrap().g;
            let fd = fd_gradient(&problem, &w, cfg.alpha, &spec);
            for (a, b) in g.iter().zip(&fd) {
                assert!((a - b).abs() < 1e-5, "{g:?} vs {fd:?}");
            }
        }
    }
}

#[test]
fn erm_stationary_point_is_stationary_for_root_map() {
    let data = regression_dataset(2, 100, &default_w_star(2), 3.0, &mut RngStream::new(12, 0).rng()).unwrap();
    let problem = Regression::squared(&data);
    let spec = InfluenceSpec::wide(1.5).unwrap();
    let mut cfg = GDConfig::new(0.1, spec);
    cfg.root = precise();
    cfg.stop_grad_norm = 1e-6;
    cfg.gamma = 0.2;
    cfg.record_trace = false;
    let res = erm_gd(&problem, &[0.0, 0.0], &cfg).unwrap();
    let g_norm = direction(&problem, &res.w, &cfg, Direction::Erm).unwrap().g.iter().map(|x| x * x).sum::<f64>().sqrt();
    assert!(g_norm <= cfg.stop_grad_norm, "did not converge: {g_norm}");
    let fd = fd_gradient(&problem, &res.w, cfg.alpha, &spec);
    let fd_norm = fd.iter().map(|x| x * x).sum::<f64>().sqrt();
    assert!(fd_norm <= cfg.stop_grad_norm + 1e-4, "{fd_norm}");
}

#[test]
fn robust_gd_loss_is_monotone_on_noiseless_quadratic() {
    let d = 4;
    let w_star = vec![0.5, -1.0, 2.0, 0.0];
    let data: RegressionData =
        regression_dataset_with_noise(d, 300, &w_star, NoiseLaw::Zero, &mut RngStream::new(13, 0).rng()).unwrap();
    let problem = Regression::squared(&data);
    // L = 2·λ_max(XᵀX/n); bound λ_max by the trace
    let trace: f64 = data.x.iter().map(|x| x * x).sum::<f64>() / data.n as f64;
    let gamma = 4.0 / (9.0 * 2.0 * trace);
    for spec in [InfluenceSpec::narrow(1.5).unwrap(), InfluenceSpec::bounded(1.5, 3.0, 3.0).unwrap()] {
        let mut cfg = GDConfig::new(0.05, spec);
        cfg.gamma = gamma;
        cfg.t_max = 100;
        let res = robust_gd(&problem, &[0.0; 4], &cfg).unwrap();
        let losses: Vec<f64> = res.trace.records.iter().map(|r| r.objective).collect();
        assert!(losses.windows(2).all(|p| p[1] <= p[0] + 1e-12), "{losses:?}");
        assert!(losses.last().unwrap() < &(0.5 * losses[0]));
    }
}

#[test]
fn dw_proxy_tracks_exact_root() {
    let n = 1000;
    let p = 1.5;
    let alpha = (n as f64).powf(-1.0 / p);
    let data = regression_dataset_with_noise(3, n, &default_w_star(3), NoiseLaw::Gaussian, &mut RngStream::new(14, 0).rng())
        .unwrap();
    let problem = Regression::squared(&data);
    let spec = InfluenceSpec::wide(p).unwrap();
    let mut cfg = GDConfig::new(alpha, spec);
    cfg.t_max = 100;
    cfg.gamma = 0.05;
    let res = dw_gd(&problem, &[1.0, 1.0, 1.0], &cfg).unwrap();
    for r in res.trace.records.iter().skip(1) {
        let exact = risk_estimate(&problem, &r.w, alpha, &spec);
        let bound = 6.0 * r.t as f64 * (n as f64).ln() * (alpha + alpha.powf(p - 1.0));
        assert!((r.mu_hat.unwrap() - exact).abs() <= bound, "t = {}", r.t);
    }
}

#[test]
fn optimizers_are_deterministic() {
    let data = regression_dataset(3, 120, &default_w_star(3), 1.0, &mut RngStream::new(15, 0).rng()).unwrap();
    let problem = Regression::squared(&data);
    let mut cfg = GDConfig::new(0.1, InfluenceSpec::narrow(1.5).unwrap());
    cfg.t_max = 60;
    for run in [erm_gd, robust_gd, dw_gd] {
        let a = run(&problem, &[0.3, 0.1, -0.2], &cfg).unwrap();
        let b = run(&problem, &[0.3, 0.1, -0.2], &cfg).unwrap();
        assert_eq!(a, b);
    }
}

/// Exhaustive recomputation: all pairwise distances, explicit median, first argmin.
fn brute_force_geomedian(points: &[Vec<f64>]) -> usize {
    let m = points.len();
    let mut best = (f64::INFINITY, 0);
    for i in 0..m {
        let mut ds = Vec::new();
        for j in 0..m {
            if i != j {
                let s: f64 = points[i].iter().zip(&points[j]).map(|(a, b)| (a - b) * (a - b)).sum();
                ds.push(s.sqrt());
            }
        }
        ds.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let r = if ds.len() % 2 == 1 {
            ds[ds.len() / 2]
        } else {
            (ds[ds.len() / 2 - 1] + ds[ds.len() / 2]) / 2.0
        };
        if r < best.0 {
            best = (r, i);
        }
    }
    best.1
}

#[test]
fn geometric_median_matches_brute_force() {
    let mut rng = RngStream::new(16, 0).rng();
    for m in [2usize, 3, 6, 7, 10] {
        for _ in 0..20 {
            let pts: Vec<Vec<f64>> = (0..m).map(|_| (0..3).map(|_| rng.random_range(-5.0..5.0)).collect()).collect();
            assert_eq!(geometric_median_select(&pts).unwrap().index, brute_force_geomedian(&pts));
        }
    }
}
