//! Finite-difference behaviour of the Holevo gradient at random points.

use holevo_core::channel::random_channel;
use holevo_core::cli::experiments::run_grad_check;
use holevo_core::cli::streams::random_ensemble;
use holevo_core::cli::{ExperimentSpec, Scenario};
use holevo_core::holevo::{finite_diff_gradient, holevo_gradient, KrausGradient};

fn max_error(a: &KrausGradient, b: &KrausGradient) -> f64 {
    a.max_deviation_per_operator(b)
        .into_iter()
        .fold(0.0, f64::max)
}

#[test]
fn central_differences_converge_quadratically() {
    for seed in 0..5 {
        let ch = random_channel(3, 4, 5, 100 + seed).unwrap();
        let e = random_ensemble(3, 3, 200 + seed).unwrap().to_ensemble();
        let exact = holevo_gradient(&ch, &e, 1e-12).unwrap();
        let errors: Vec<f64> = [1e-3, 5e-4, 2.5e-4]
            .iter()
            .map(|&h| max_error(&finite_diff_gradient(&ch, &e, h).unwrap(), &exact))
            .collect();
        for pair in errors.windows(2) {
            let ratio = pair[0] / pair[1];
            assert!(
                (3.0..5.0).contains(&ratio),
                "seed {seed}: ratio {ratio}, errors {errors:?}"
            );
        }

        // The change between successive halvings shrinks like the step squared too.
        let fd = |h| finite_diff_gradient(&ch, &e, h).unwrap();
        let d1 = max_error(&fd(1e-3), &fd(5e-4));
        let d2 = max_error(&fd(5e-4), &fd(2.5e-4));
        assert!((3.0..5.0).contains(&(d1 / d2)), "seed {seed}: {d1} vs {d2}");
    }
}

#[test]
fn default_grad_check_passes() {
    let spec = ExperimentSpec::new(Scenario::GradCheck);
    let report = run_grad_check(&spec).unwrap();
    assert_eq!(report.points.len(), 20);
    for p in &report.points {
        assert!(p.interior);
        assert!(p.cosine > 1.0 - 1e-6, "trial {}: {}", p.trial, p.cosine);
        assert!(p.max_deviation.iter().all(|d| *d < 1e-6));
    }
    assert!(report.all_pass);
}
