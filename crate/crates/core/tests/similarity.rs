use basket_core::ppmx::{
    categorical_bayes_identity, continuous_bayes_identity, count_bayes_identity, log_product_similarity,
    similarity_categorical, similarity_continuous, similarity_count, CovariateValue, DirichletHyper, GammaHyper,
    NormalInvChiSq, SimilarityHyper, SimilarityKind,
};
use proptest::prelude::*;

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

/// Dirichlet-multinomial probability of an ordered sequence by sequential Polya-urn products.
fn dm_oracle(values: &[usize], weights: &[f64]) -> f64 {
    let total: f64 = weights.iter().sum();
    let mut seen = vec![0.0; weights.len()];
    let mut p = 1.0;
    for (t, &v) in values.iter().enumerate() {
        p *= (weights[v] + seen[v]) / (total + t as f64);
        seen[v] += 1.0;
    }
    p
}

#[test]
fn binary_uniform_dirichlet_values() {
    let h = DirichletHyper::uniform(2);
    assert!(rel(similarity_categorical(&[1, 1], &h).unwrap(), 1.0 / 3.0) < 1e-12);
    assert!(rel(similarity_categorical(&[1, 0], &h).unwrap(), 1.0 / 6.0) < 1e-12);
    assert!(rel(similarity_categorical(&[1], &h).unwrap(), 0.5) < 1e-12);
}

#[test]
fn poisson_gamma_zero() {
    let h = GammaHyper::new(1.0, 1.0).unwrap();
    assert!(rel(similarity_count(&[0], &h).unwrap(), 0.5) < 1e-12);
}

#[test]
fn poisson_gamma_against_series() {
    // ∫ Π Pois(x_i | λ) Gamma(λ | a, b) dλ in closed form via the negative-binomial chain rule.
    let h = GammaHyper::new(2.5, 1.5).unwrap();
    let xs = [3i64, 0, 1, 4];
    let mut p = 1.0;
    let (mut a, mut b) = (h.shape, h.rate);
    for &x in &xs {
        // NB(x | a, b/(b+1)) = Γ(a+x)/(Γ(a) x!) (b/(b+1))^a (1/(b+1))^x
        let mut ratio = 1.0;
        for t in 0..x {
            ratio *= (a + t as f64) / (t as f64 + 1.0);
        }
        p *= ratio * (b / (b + 1.0)).powf(a) * (1.0 / (b + 1.0)).powi(x as i32);
        a += x as f64;
        b += 1.0;
    }
    assert!(rel(similarity_count(&xs, &h).unwrap(), p) < 1e-10);
}

/// Density of the normal-inverse-chi-square prior written out directly.
fn nix_density(h: &NormalInvChiSq, mu: f64, v: f64) -> f64 {
    let half = h.nu / 2.0;
    let inv_chi = (half).powf(half) / statrs::function::gamma::gamma(half) * h.s2.powf(half) * v.powf(-(half + 1.0))
        * (-h.nu * h.s2 / (2.0 * v)).exp();
    let var = v / h.k;
    inv_chi * (-(mu - h.m).powi(2) / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var).sqrt()
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

#[test]
fn continuous_similarity_matches_quadrature() {
    let h = NormalInvChiSq::new(0.3, 0.5, 4.0, 0.8).unwrap();
    let xs = [0.1, 0.9, -0.4];
    let lik = |mu: f64, v: f64| -> f64 {
        xs.iter()
            .map(|x| (-(x - mu) * (x - mu) / (2.0 * v)).exp() / (2.0 * std::f64::consts::PI * v).sqrt())
            .product()
    };
    // v = e^t, dv = e^t dt.
    let inner = |t: f64| {
        let v = t.exp();
        simpson(|mu| lik(mu, v) * nix_density(&h, mu, v), -8.0, 8.0, 800) * v
    };
    let oracle = simpson(inner, -7.0, 5.0, 800);
    let got = similarity_continuous(&xs, &h);
    assert!(rel(got, oracle) < 1e-6, "{got} vs {oracle}");
}

#[test]
fn bayes_identity_is_probe_independent() {
    let d = DirichletHyper::new(vec![0.5, 1.0, 2.0]).unwrap();
    let vals = [0, 2, 2, 1, 2];
    let direct = similarity_categorical(&vals, &d).unwrap();
    for probe in [[0.2, 0.3, 0.5], [0.6, 0.1, 0.3], [0.01, 0.01, 0.98]] {
        assert!(rel(categorical_bayes_identity(&vals, &d, &probe).unwrap(), direct) < 1e-10);
    }
    let n = NormalInvChiSq::new(0.0, 1.0, 3.0, 1.0).unwrap();
    let xs = [0.5, -1.0, 2.0];
    let direct = similarity_continuous(&xs, &n);
    for (mu, v) in [(0.0, 1.0), (1.5, 0.2), (-2.0, 5.0)] {
        assert!(rel(continuous_bayes_identity(&xs, &n, mu, v).unwrap(), direct) < 1e-10);
    }
    let g = GammaHyper::new(2.0, 0.5).unwrap();
    let cs = [1i64, 4, 0];
    let direct = similarity_count(&cs, &g).unwrap();
    for rate in [0.3, 1.0, 7.0] {
        assert!(rel(count_bayes_identity(&cs, &g, rate).unwrap(), direct) < 1e-10);
    }
}

#[test]
fn product_similarity_factorizes_and_skips_missing() {
    let hyper = SimilarityHyper::new(vec![
        SimilarityKind::Categorical(DirichletHyper::uniform(2)),
        SimilarityKind::Categorical(DirichletHyper::uniform(3)),
        SimilarityKind::Constant,
    ]);
    use CovariateValue::*;
    let a = [Category(1), Category(0), Category(1)];
    let b = [Missing, Category(2), Category(0)];
    let c = [Category(1), Category(2), Missing];
    let rows: Vec<&[CovariateValue]> = vec![&a, &b, &c];
    let oracle = dm_oracle(&[1, 1], &[1.0, 1.0]) * dm_oracle(&[0, 2, 2], &[1.0, 1.0, 1.0]);
    assert!(rel(log_product_similarity(&rows, &hyper).unwrap().exp(), oracle) < 1e-12);
}

proptest! {
    #[test]
    fn categorical_matches_urn_oracle(vals in prop::collection::vec(0usize..4, 1..30), w in prop::collection::vec(0.05f64..5.0, 4)) {
        let h = DirichletHyper::new(w.clone()).unwrap();
        let got = similarity_categorical(&vals, &h).unwrap();
        prop_assert!(rel(got, dm_oracle(&vals, &w)) < 1e-9);
    }

    #[test]
    fn categorical_is_exchangeable(mut vals in prop::collection::vec(0usize..3, 1..20), seed in any::<u64>()) {
        let h = DirichletHyper::new(vec![0.7, 1.3, 2.0]).unwrap();
        let before = similarity_categorical(&vals, &h).unwrap();
        let k = (seed as usize) % vals.len();
        vals.rotate_left(k);
        vals.reverse();
        prop_assert!(rel(similarity_categorical(&vals, &h).unwrap(), before) < 1e-12);
    }

    #[test]
    fn homogeneous_beats_mixed(n in 2usize..40) {
        let h = DirichletHyper::uniform(2);
        let pure = similarity_categorical(&vec![1; n], &h).unwrap();
        let mut mixed = vec![1; n];
        mixed[0] = 0;
        prop_assert!(pure > similarity_categorical(&mixed, &h).unwrap());
    }

    #[test]
    fn bayes_identity_any_probe(vals in prop::collection::vec(0usize..3, 1..15), a in 0.05f64..0.9, b in 0.05f64..0.9) {
        prop_assume!(a + b < 0.99);
        let h = DirichletHyper::new(vec![1.0, 0.5, 2.0]).unwrap();
        let probe = [a, b, 1.0 - a - b];
        let direct = similarity_categorical(&vals, &h).unwrap();
        prop_assert!(rel(categorical_bayes_identity(&vals, &h, &probe).unwrap(), direct) < 1e-9);
    }
}
