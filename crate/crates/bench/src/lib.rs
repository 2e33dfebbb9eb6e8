//! Shared inputs for the benchmarks.

use harmorse::quadrature::Resolution;
use harmorse::{rng, PointS3, QuadratureGrid, SphereMap};

pub const MAPS: [&str; 4] = ["hopf", "blaschke(z^2;1)∘hopf", "hopf∘conf(0.3,0,0.2,0)", "equator(0.9,0,0)"];

pub fn points(n: usize, seed: u64) -> Vec<PointS3> {
    let mut r = rng::seeded(seed);
    (0..n).map(|_| rng::point_s3(&mut r)).collect()
}

pub fn map(spec: &str) -> SphereMap {
    SphereMap::parse(spec).expect("benchmark map parses")
}

pub fn grid(n_eta: usize, n_xi: usize) -> QuadratureGrid {
    QuadratureGrid::new(Resolution::new(n_eta, n_xi, n_xi).expect("valid resolution")).expect("grid")
}
