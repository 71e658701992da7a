//! Simulation oracles for the regression engine: parameter recovery,
//! Wald-interval coverage across families, Hessian cross-partial symmetry,
//! and stepwise selection behavior on known generating processes.

use dah_core::dist::Law;
use dah_core::regression::{
    fd_gradient, fit_component, stepwise_select, Candidate, ComponentSpec, CovariateTable, Family,
    Link, ObservationBound, ParamSpec, ResponseData, ResponseStructure, TermSpec, ZeroHandling,
};
use dah_core::rng::SeedTree;

fn flat_betas(fit: &dah_core::regression::FitResult) -> Vec<f64> {
    fit.spec.params.iter().flat_map(|p| p.beta.iter().copied()).collect()
}

#[test]
fn zero_inflated_censored_count_intercepts_recovered_within_three_se() {
    let tree = SeedTree::new(0x5ca1e_0f_f1);
    let mut rng = tree.stream("zicpig-recovery", &[0]);
    let n = 5000;
    let truth_pi = 0.1_f64;
    let truth_mu = 2.55_f64;
    let truth_phi = 4.37_f64;
    let generator = Law::poisson_inverse_gaussian(truth_mu, truth_phi)
        .unwrap()
        .zero_inflated(truth_pi)
        .unwrap()
        .right_censored(86)
        .unwrap();
    let y: Vec<f64> = (0..n).map(|_| generator.sample(&mut rng) as f64).collect();

    let design = dah_core::regression::DesignMatrix::intercept_only(n);
    let structure = ResponseStructure {
        zero: ZeroHandling::Inflated,
        censor: ObservationBound::Fixed(86),
        ..ResponseStructure::default()
    };
    let spec = ComponentSpec::intercept_only(Family::PoissonInverseGaussian, structure);
    let fit = fit_component(&spec, &design, &ResponseData::plain(&y), 2.0).unwrap();
    assert!(fit.diagnostics.converged);

    let betas = flat_betas(&fit);
    let truth =
        [truth_mu.ln(), truth_phi.ln(), (truth_pi / (1.0 - truth_pi)).ln()];
    for ((est, se), want) in betas.iter().zip(&fit.se).zip(truth) {
        assert!(
            se.is_finite() && *se > 0.0,
            "degenerate SE in recovery fit: {:?}",
            fit.se
        );
        assert!(
            (est - want).abs() <= 3.0 * se,
            "estimate {est:.4} vs truth {want:.4} beyond 3 x {se:.4}"
        );
    }
}

#[test]
fn intercept_mle_covers_generating_values_across_families() {
    // 99% Wald coverage per coefficient, checked jointly per seed; at least
    // 95 of 100 seeds must cover for every family.
    let cases: Vec<(Family, ResponseStructure, Law, Vec<f64>)> = vec![
        (
            Family::Bernoulli,
            ResponseStructure::plain(),
            Law::bernoulli(0.3).unwrap(),
            vec![(0.3_f64 / 0.7).ln()],
        ),
        (
            Family::Poisson,
            ResponseStructure::plain(),
            Law::poisson(2.55).unwrap(),
            vec![2.55_f64.ln()],
        ),
        (
            Family::NegativeBinomial,
            ResponseStructure::plain(),
            Law::negative_binomial(2.55, 1.2).unwrap(),
            vec![2.55_f64.ln(), 1.2_f64.ln()],
        ),
        (
            Family::PoissonInverseGaussian,
            ResponseStructure::plain(),
            Law::poisson_inverse_gaussian(2.55, 4.37).unwrap(),
            vec![2.55_f64.ln(), 4.37_f64.ln()],
        ),
        (
            Family::BetaBinomial,
            ResponseStructure {
                trials: ObservationBound::Fixed(20),
                ..ResponseStructure::default()
            },
            Law::beta_binomial(20, 0.3, 0.8).unwrap(),
            vec![(0.3_f64 / 0.7).ln(), 0.8_f64.ln()],
        ),
        (
            Family::LogNormal,
            ResponseStructure::plain(),
            Law::log_normal(1.5, 0.6).unwrap(),
            vec![1.5, 0.6_f64.ln()],
        ),
        (
            Family::BetaProportion,
            ResponseStructure::plain(),
            Law::beta_proportion(0.3, 5.0).unwrap(),
            vec![(0.3_f64 / 0.7).ln(), 5.0_f64.ln()],
        ),
    ];

    let n = 10_000;
    let seeds = 100;
    let z99 = 2.5758293035489004;
    let tree = SeedTree::new(0xc0ff_ee);
    let design = dah_core::regression::DesignMatrix::intercept_only(n);

    for (family, structure, generator, truth) in cases {
        let mut covered = 0;
        for seed in 0..seeds {
            let mut rng = tree.stream("coverage", &[family_tag(family), seed]);
            let y: Vec<f64> = if family.is_discrete() {
                (0..n).map(|_| generator.sample(&mut rng) as f64).collect()
            } else {
                (0..n).map(|_| generator.sample_real(&mut rng)).collect()
            };
            let spec = ComponentSpec::intercept_only(family, structure);
            let Ok(fit) = fit_component(&spec, &design, &ResponseData::plain(&y), 2.0) else {
                continue;
            };
            assert!(fit.p_values.iter().all(|p| (0.0..=1.0).contains(p)));
            let betas = flat_betas(&fit);
            let hit = betas
                .iter()
                .zip(&fit.se)
                .zip(&truth)
                .all(|((b, s), t)| s.is_finite() && (b - t).abs() <= z99 * s);
            if hit {
                covered += 1;
            }
        }
        assert!(
            covered >= 95,
            "{family:?}: only {covered}/100 seeds covered the generating values"
        );
    }
}

fn family_tag(family: Family) -> u64 {
    match family {
        Family::Bernoulli => 1,
        Family::Poisson => 2,
        Family::NegativeBinomial => 3,
        Family::PoissonInverseGaussian => 4,
        Family::BetaBinomial => 5,
        Family::LogNormal => 6,
        Family::BetaProportion => 7,
    }
}

#[test]
fn cross_partial_hessian_is_symmetric() {
    // Mixed partials computed in both orders from independent gradient
    // stencils must agree to 1e-6 relative on the dominant scale.
    let tree = SeedTree::new(77);
    let mut rng = tree.stream("hessian", &[0]);
    let n = 800;
    let x: Vec<f64> = (0..n).map(|i| f64::from(i as i32 % 5) / 2.0 - 1.0).collect();
    let mut table = CovariateTable::new();
    table.add_numeric("x", x.clone()).unwrap();
    let (design, _) = table.design(&[TermSpec::Main("x".into())]).unwrap();
    let y: Vec<f64> = x
        .iter()
        .map(|&xi| {
            Law::negative_binomial((0.8 + 0.5 * xi).exp(), 0.7).unwrap().sample(&mut rng) as f64
        })
        .collect();

    let mut spec =
        ComponentSpec::intercept_only(Family::NegativeBinomial, ResponseStructure::plain());
    spec.params[0] = ParamSpec::with_columns("mu", Link::Log, vec![0, 1]);
    let data = ResponseData::plain(&y);
    let fit = fit_component(&spec, &design, &data, 2.0).unwrap();
    let at = flat_betas(&fit);

    // Reconstruct the mean negative log-likelihood through the public fit
    // surface: evaluate via a fresh fit spec whose likelihood we can probe
    // with the distribution layer directly.
    let eval = |beta: &[f64]| -> f64 {
        let mut total = 0.0;
        for (i, &yi) in y.iter().enumerate() {
            let eta_mu = beta[0] + beta[1] * design.row(i)[1];
            let law = Law::negative_binomial(eta_mu.exp(), beta[2].exp()).unwrap();
            total += law.ln_pmf(yi as i64);
        }
        -total / y.len() as f64
    };

    let p = at.len();

    // Four-point central stencil evaluated independently for (i,j) and
    // (j,i): the inference Hessian must be symmetric within 1e-6 relative.
    let stencil = |i: usize, j: usize| -> f64 {
        let hi = 1e-3 * at[i].abs().max(1.0);
        let hj = 1e-3 * at[j].abs().max(1.0);
        let probe = |si: f64, sj: f64| {
            let mut x = at.clone();
            x[i] += si * hi;
            x[j] += sj * hj;
            eval(&x)
        };
        (probe(1.0, 1.0) - probe(1.0, -1.0) - probe(-1.0, 1.0) + probe(-1.0, -1.0))
            / (4.0 * hi * hj)
    };
    let mut table_scale = 0.0_f64;
    let mut stencil_values = vec![vec![0.0_f64; p]; p];
    for i in 0..p {
        for j in 0..p {
            if i != j {
                stencil_values[i][j] = stencil(i, j);
                table_scale = table_scale.max(stencil_values[i][j].abs());
            }
        }
    }
    for i in 0..p {
        for j in (i + 1)..p {
            assert!(
                (stencil_values[i][j] - stencil_values[j][i]).abs()
                    <= 1e-6 * table_scale.max(1.0),
                "stencil asymmetry at ({i},{j}): {} vs {}",
                stencil_values[i][j],
                stencil_values[j][i]
            );
        }
    }

    // Mixed partials from independent finite-difference gradients carry
    // amplified rounding noise; they must still agree to a coarser bound.
    let mut mixed = vec![vec![0.0_f64; p]; p];
    for i in 0..p {
        let h = 1e-3 * at[i].abs().max(1.0);
        let mut up = at.clone();
        up[i] += h;
        let mut down = at.clone();
        down[i] -= h;
        let mut f = eval;
        let gu = fd_gradient(&mut f, &up);
        let gd = fd_gradient(&mut f, &down);
        for j in 0..p {
            mixed[i][j] = (gu[j] - gd[j]) / (2.0 * h);
        }
    }
    let scale = mixed
        .iter()
        .flat_map(|r| r.iter())
        .fold(0.0_f64, |m, v| m.max(v.abs()));
    for i in 0..p {
        for j in 0..p {
            assert!(
                (mixed[i][j] - mixed[j][i]).abs() <= 2e-4 * scale.max(1.0),
                "asymmetry at ({i},{j}): {} vs {}",
                mixed[i][j],
                mixed[j][i]
            );
        }
    }
}

fn stepwise_replicate(
    effect: f64,
    n: usize,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> (bool, bool) {
    let x: Vec<f64> = (0..n).map(|i| if i % 2 == 0 { -0.5 } else { 0.5 }).collect();
    let mut table = CovariateTable::new();
    table.add_numeric("x", x.clone()).unwrap();
    let (design, groups) = table.design(&[TermSpec::Main("x".into())]).unwrap();
    let y: Vec<f64> = x
        .iter()
        .map(|&xi| Law::poisson((1.0 + effect * xi).exp()).unwrap().sample(rng) as f64)
        .collect();
    let base = ComponentSpec::intercept_only(Family::Poisson, ResponseStructure::plain());
    let data = ResponseData::plain(&y);
    let candidates = vec![Candidate::main("x", groups[0].clone())];
    let selected = stepwise_select(&base, &design, &data, &candidates, 2.0).unwrap();
    let intercept_fit = fit_component(&base, &design, &data, 2.0).unwrap();
    assert!(selected.fit.gaic <= intercept_fit.gaic + 1e-9);
    let kept = selected.fit.coefficient_names.iter().any(|c| c == "mu:x");
    (kept, selected.warnings.is_empty())
}

#[test]
fn stepwise_keeps_noise_out_and_strong_signals_in() {
    let tree = SeedTree::new(0x57e9);

    let mut intercept_only = 0;
    for rep in 0..100 {
        let mut rng = tree.stream("stepwise-noise", &[rep]);
        let (kept, clean) = stepwise_replicate(0.0, 500, &mut rng);
        assert!(clean);
        if !kept {
            intercept_only += 1;
        }
    }
    assert!(
        intercept_only >= 80,
        "noise predictor excluded in only {intercept_only}/100 replicates"
    );

    let mut selected_count = 0;
    for rep in 0..100 {
        let mut rng = tree.stream("stepwise-strong", &[rep]);
        // Effect around seven Wald SEs at this design and sample size.
        let (kept, _) = stepwise_replicate(0.4, 500, &mut rng);
        if kept {
            selected_count += 1;
        }
    }
    assert_eq!(selected_count, 100, "strong predictor missed in some replicates");
}
