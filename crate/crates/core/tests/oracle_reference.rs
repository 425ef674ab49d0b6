use ibkit_core::oracle::{
    equivalence_check_with, ib_iterate_bernoulli, ib_iterate_categorical, kl_gaussian_limit, run_to_fixed_point,
    EquivalenceConfig, IbKind, IbProblem, IbState,
};
use ibkit_core::tensor::Matrix;
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn gaussian(rows: usize, cols: usize, seed: u64) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Matrix::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut rng))
}

fn to_na(m: &Matrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.data())
}

/// KL(N(a, Sa) || N(b, Sb)) by the textbook formula.
fn gaussian_kl(a: &DVector<f64>, sa: &DMatrix<f64>, b: &DVector<f64>, sb: &DMatrix<f64>) -> f64 {
    let k = a.len() as f64;
    let sb_inv = sb.clone().try_inverse().unwrap();
    let diff = b - a;
    let maha = (diff.transpose() * &sb_inv * &diff)[(0, 0)];
    0.5 * ((&sb_inv * sa).trace() + maha - k + (sb.determinant() / sa.determinant()).ln())
}

#[test]
fn kl_limit_matches_generic_gaussian_kl() {
    let n = 3;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut draw = || -> f64 { StandardNormal.sample(&mut rng) };
    let l = DMatrix::from_fn(n, n, |_, _| draw());
    let sigma = &l * l.transpose() + DMatrix::identity(n, n) * 0.5;
    let c = DVector::from_fn(n, |_, _| draw());
    let mu = DVector::from_fn(n, |_, _| draw());

    let eps: f64 = 1e-6;
    let generic = gaussian_kl(&c, &(DMatrix::identity(n, n) * eps * eps), &mu, &sigma);
    // Drop the ε-dependent constants: −N/2 from the trace-free part and −N log ε.
    let reduced = generic + 0.5 * n as f64 + n as f64 * eps.ln();

    let sigma_m = Matrix::from_vec(n, n, sigma.iter().copied().collect()).unwrap();
    let ours = kl_gaussian_limit(c.as_slice(), mu.as_slice(), &sigma_m.transpose()).unwrap();
    assert!((ours - reduced).abs() < 1e-6, "{ours} vs {reduced}");
}

struct Reference {
    q: Vec<Vec<f64>>,
    priors: Vec<f64>,
    centers: Vec<Vec<f64>>,
}

fn channel(x: &Matrix, j: usize) -> DVector<f64> {
    DVector::from_fn(x.rows(), |r, _| x.get(r, j))
}

fn reference_update(x: &Matrix, q: Vec<Vec<f64>>, total: f64) -> Reference {
    let (n, d) = x.shape();
    let k = q.len();
    let masses: Vec<f64> = q.iter().map(|row| row.iter().sum()).collect();
    let priors = masses.iter().map(|m| m / total).collect();
    let centers = (0..k)
        .map(|c| {
            (0..n)
                .map(|r| (0..d).map(|j| q[c][j] * x.get(r, j)).sum::<f64>() / masses[c])
                .collect()
        })
        .collect();
    Reference { q, priors, centers }
}

/// Per-(j, c) probabilities computed one at a time from nalgebra inverses.
fn categorical_reference(problem: &IbProblem, state: &IbState) -> Reference {
    let x = problem.channels();
    let d = x.cols();
    let k = state.num_clusters();
    let sigma = to_na(state.sigma());
    let sigma_inv = sigma.clone().try_inverse().unwrap();
    let log_det = sigma.determinant().ln();
    let mut q = vec![vec![0.0; d]; k];
    for j in 0..d {
        let c_j = channel(x, j);
        let weights: Vec<f64> = (0..k)
            .map(|c| {
                let diff = &c_j - channel(state.centers(), c);
                let kl = 0.5 * ((diff.transpose() * &sigma_inv * &diff)[(0, 0)] + log_det);
                state.priors()[c] * (-problem.beta() * kl).exp()
            })
            .collect();
        let total: f64 = weights.iter().sum();
        for c in 0..k {
            q[c][j] = weights[c] / total;
        }
    }
    reference_update(x, q, d as f64)
}

/// `q = p(c)/max p · exp(β μᵀΣ⁻¹c) / (exp(β μᵀΣ⁻¹c) + exp(b))`, valid for
/// unit-norm centers.
fn bernoulli_reference(problem: &IbProblem, state: &IbState, b: f64) -> Reference {
    let x = problem.channels();
    let d = x.cols();
    let k = state.num_clusters();
    let sigma_inv = to_na(state.sigma()).try_inverse().unwrap();
    let max_prior = state.priors().iter().copied().fold(0.0, f64::max);
    let mut q = vec![vec![0.0; d]; k];
    for j in 0..d {
        let c_j = channel(x, j);
        for c in 0..k {
            let score = problem.beta() * (channel(state.centers(), c).transpose() * &sigma_inv * &c_j)[(0, 0)];
            q[c][j] = state.priors()[c] / max_prior * score.exp() / (score.exp() + b.exp());
        }
    }
    let total = q.iter().flatten().sum();
    reference_update(x, q, total)
}

fn assert_matches(next: &IbState, reference: &Reference, tol: f64) {
    for (c, row) in reference.q.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            assert!((next.assignments().get(c, j) - v).abs() < tol, "q[{c},{j}]");
        }
        assert!((next.priors()[c] - reference.priors[c]).abs() < tol, "p[{c}]");
        for (r, v) in reference.centers[c].iter().enumerate() {
            assert!((next.centers().get(r, c) - v).abs() < tol, "mu[{r},{c}]");
        }
    }
}

#[test]
fn categorical_step_matches_scalar_loops() {
    let problem = IbProblem::new(gaussian(4, 6, 11), 1.0, 1e-6, 6).unwrap();
    let mut state = IbState::initial(&problem).unwrap();
    for _ in 0..3 {
        let next = ib_iterate_categorical(&problem, &state).unwrap();
        assert_matches(&next, &categorical_reference(&problem, &state), 1e-12);
        let mass: f64 = next.masses().iter().sum();
        assert!((mass - 6.0).abs() < 1e-9);
        for j in 0..6 {
            let col: f64 = (0..6).map(|c| next.assignments().get(c, j)).sum();
            assert!((col - 1.0).abs() < 1e-12);
        }
        state = next;
    }
}

#[test]
fn bernoulli_step_matches_scalar_loops() {
    let problem = IbProblem::new(gaussian(4, 6, 11), 1.0, 1e-6, 6).unwrap();
    let mut state = IbState::initial(&problem).unwrap();
    state.normalize_centers().unwrap();
    let next = ib_iterate_bernoulli(&problem, &state, 1.0).unwrap();
    assert_matches(&next, &bernoulli_reference(&problem, &state, 1.0), 1e-12);
    assert!(next.assignments().data().iter().all(|&v| v > 0.0 && v < 1.0));

    // Second step from non-uniform priors, centers renormalized.
    let mut state = next;
    state.normalize_centers().unwrap();
    let next = ib_iterate_bernoulli(&problem, &state, 1.0).unwrap();
    assert_matches(&next, &bernoulli_reference(&problem, &state, 1.0), 1e-12);
}

#[test]
fn fixed_point_is_permutation_equivariant() {
    let x = gaussian(4, 6, 21);
    let perm = [3usize, 0, 5, 1, 4, 2];
    let xp = Matrix::from_fn(4, 6, |r, j| x.get(r, perm[j]));
    for kind in [IbKind::Softmax, IbKind::Sigmoid] {
        let run = |x: &Matrix| {
            let problem = IbProblem::new(x.clone(), 0.5, 1e-6, 6).unwrap();
            let state = IbState::initial(&problem).unwrap();
            run_to_fixed_point(&problem, state, kind, 1.0).unwrap().state
        };
        let a = run(&x);
        let b = run(&xp);
        for c in 0..6 {
            for j in 0..6 {
                let diff = (b.assignments().get(c, j) - a.assignments().get(perm[c], perm[j])).abs();
                assert!(diff < 1e-8, "{kind:?} ({c},{j}) {diff}");
            }
        }
    }
}

#[test]
fn equivalence_holds_beyond_the_default_instance() {
    for (tokens, channels, beta) in [(4, 6, 0.5), (5, 8, 2.0), (3, 3, 1.0)] {
        let cfg = EquivalenceConfig {
            tokens,
            channels,
            beta,
            ..Default::default()
        };
        for seed in 0..10 {
            for kind in [IbKind::Softmax, IbKind::Sigmoid] {
                let out = equivalence_check_with(seed, kind, &cfg).unwrap();
                assert!(out.deviation < 1e-10, "{cfg:?} {out:?}");
            }
        }
    }
}
