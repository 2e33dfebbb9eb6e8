use harmorse::jacobi::{self, KillingSection, Section};
use harmorse::quadrature::{QuadratureGrid, Resolution};
use harmorse::SphereMap;
use nalgebra::DMatrix;

fn default_grid() -> QuadratureGrid {
    QuadratureGrid::new(Resolution::DEFAULT).unwrap()
}

#[test]
fn hopf_has_index_four_with_eigenvalue_minus_one() {
    let h = SphereMap::hopf();
    let g = default_grid();
    let b = jacobi::build_basis(&h, 3).unwrap();
    let p = jacobi::assemble(&b, &g).unwrap();
    assert!((&p.a - p.a.transpose()).amax() <= 1e-12 * p.a.amax());
    // directions killed by the projection: Y·c parallel to u
    assert_eq!(p.filtered_dims(), 1 + 4);
    let s = jacobi::spectrum(&p, 0.05, 0.05).unwrap();
    eprintln!("{:?}", &s.eigenvalues[..12]);
    assert_eq!(s.count_below(-0.5), 4);
    assert_eq!(s.index_count, 4);
    for l in &s.eigenvalues[..4] {
        assert!((l + 1.0).abs() < 1e-6, "{l}");
    }
    assert!(!s.eigenvalues.iter().any(|&l| l > -0.5 && l < -0.05));

    // the −1 eigenspace is spanned by the projections of ⟨dh, X^l⟩
    let proj: Vec<_> = (1..=4)
        .map(|l| p.project(&b.moments(&KillingSection { map: &h, l }, &g).unwrap()))
        .collect();
    let proj = DMatrix::from_columns(&proj);
    let eig = s.eigenvectors.columns(0, 4).into_owned();
    let angle = jacobi::max_principal_angle(&eig, &proj);
    assert!(angle < 1e-4, "{angle}");
}

#[test]
fn killing_sections_lie_in_degree_three_span() {
    let h = SphereMap::hopf();
    let g = default_grid();
    let b = jacobi::build_basis(&h, 3).unwrap();
    let p = jacobi::assemble(&b, &g).unwrap();
    for l in 1..=4 {
        let w = KillingSection { map: &h, l };
        let norm = g.integrate(|x| Ok(w.value(x)?.norm_squared())).unwrap();
        let y = p.project(&b.moments(&w, &g).unwrap());
        let resid = (norm - y.norm_squared()) / norm;
        assert!(resid.abs() < 1e-8, "{resid}");
        assert!((p.rayleigh(&y) + 1.0).abs() < 1e-8);
    }
}

#[test]
fn index_count_is_monotone_and_settles_at_four() {
    let h = SphereMap::hopf();
    let g = default_grid();
    let counts: Vec<usize> = (1..=4)
        .map(|n| {
            let b = jacobi::build_basis(&h, n).unwrap();
            jacobi::spectrum(&jacobi::assemble(&b, &g).unwrap(), 0.05, 0.05).unwrap().index_count
        })
        .collect();
    eprintln!("{counts:?}");
    assert!(counts.windows(2).all(|w| w[0] <= w[1]));
    assert_eq!(counts[2], 4);
    assert_eq!(counts[3], 4);
}
