use infmodel::reproduction::{reproduce_oracle, Backend, ReproPlan};
use infmodel::transport::{HasQuantiles, DEFAULT_K};
use infmodel::{gaussian_pdf, Density, Grid};

#[test]
fn spectral_matches_quadrature_oracle() {
    let g = Grid::new(-12.0, 12.0, 128).unwrap();
    let plan = ReproPlan::new(g, 1.0).unwrap();
    let n = Density::gaussian_mixture(g, &[(0.3, -2.0, 0.8), (0.7, 1.5, 1.2)]).unwrap();
    let m = Density::gaussian_mixture(g, &[(0.5, 0.5, 0.4), (0.5, -1.0, 2.0)]).unwrap();
    let fast = plan.apply(&n, &m).unwrap().density;
    let slow = reproduce_oracle(&g, 1.0, &n, &m).unwrap();
    assert!(fast.sup_distance(&slow).unwrap() < 1e-6);
}

#[test]
fn backends_agree_on_default_grid() {
    let g = Grid::default();
    let n = Density::gaussian_mixture(g, &[(0.6, -3.0, 0.5), (0.4, 4.0, 2.0)]).unwrap();
    let spectral = ReproPlan::new(g, 1.0).unwrap().apply_self(&n).unwrap().density;
    let direct = ReproPlan::with_backend(g, 1.0, Backend::Direct)
        .unwrap()
        .apply_self(&n)
        .unwrap()
        .density;
    assert!(spectral.sup_distance(&direct).unwrap() < 1e-12);
}

/// Two narrow parents at `a` and `b`: the offspring law is the Gaussian
/// `Γ_{σ² + v/2}` centred at the midparent, in closed form.
#[test]
fn narrow_parents_give_midparent_gaussian() {
    let g = Grid::new(-20.0, 20.0, 4096).unwrap();
    let (a, b, v, sigma2) = (-3.0, 5.0, 0.01, 1.0);
    let plan = ReproPlan::new(g, sigma2).unwrap();
    let n = Density::gaussian(g, a, v).unwrap();
    let m = Density::gaussian(g, b, v).unwrap();
    let t = plan.apply(&n, &m).unwrap().density;
    let exact = Density::from_fn(g, |x| gaussian_pdf(x - 1.0, sigma2 + v / 2.0).unwrap()).unwrap();
    assert!(t.sup_distance(&exact).unwrap() < 1e-6);
    assert!((t.mean() - 1.0).abs() < 1e-10);
}

#[test]
fn gaussian_quantiles_match_closed_form_distance() {
    // W₂ between Gaussians: √(Δμ² + (s₁ − s₂)²)
    let g = Grid::default();
    let n = Density::gaussian(g, -1.0, 1.0).unwrap();
    let m = Density::gaussian(g, 2.0, 4.0).unwrap();
    let w = n.quantiles(DEFAULT_K).w2(&m.quantiles(DEFAULT_K));
    let exact = (9.0f64 + 1.0).sqrt();
    assert!((w - exact).abs() < 2e-3, "{w} vs {exact}");
}
