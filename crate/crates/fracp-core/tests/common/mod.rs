//! Shared fixtures for the integration suites.

use std::sync::Arc;

use fracp_core::*;

pub fn quad() -> QuadratureScheme {
    QuadratureScheme::default()
}

/// Deterministic values in [-1, 1].
pub fn rng_values(n: usize, seed: u64) -> Vec<f64> {
    let mut state = seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).max(1);
    (0..n)
        .map(|_| {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
        })
        .collect()
}

pub struct Solved {
    pub spec: KernelSpec,
    pub omega: Region,
    pub result: SolveResult,
}

/// Solve a 1D problem with strictly positive data on box [-2, 2],
/// omega = (-1, 1); u > 0 everywhere by the maximum principle.
pub fn solved_positive(h: f64, s: f64, p: f64, seed: u64) -> Solved {
    let lat = Lattice::new(1, h, &[(-2.0, 2.0)]).unwrap();
    let omega = Region::from_ball(lat.clone(), &Ball::new(Point::x(0.0), 1.0).unwrap());
    let spec = KernelSpec::modulated(1, s, p, 1.0, 2.0, seed).unwrap();
    let g = GridFunction::from_fn(
        lat,
        |q| 1.0 + 0.25 * (2.0 * q.0[0]).sin(),
        FarField::Constant { value: 1.0 },
    )
    .unwrap();
    let result = solve_dirichlet(&spec, &omega, &g, &SolverConfig::default(), &quad()).unwrap();
    assert!(result.converged, "fixture solve did not converge");
    Solved { spec, omega, result }
}

/// Solve on a wide box with positive data near omega and a negative bump on
/// exterior nodes far outside the outer ball, so Tail(u_-) > 0 while u >= 0
/// on the outer ball.
pub fn solved_with_negative_far_bump(h: f64, s: f64, p: f64, seed: u64, bump: f64) -> Solved {
    let lat = Lattice::new(1, h, &[(-8.0, 8.0)]).unwrap();
    let omega = Region::from_ball(lat.clone(), &Ball::new(Point::x(0.0), 1.0).unwrap());
    let spec = KernelSpec::modulated(1, s, p, 1.0, 2.0, seed).unwrap();
    let bump_ball = Ball::new(Point::x(5.0), 1.0).unwrap();
    let g = GridFunction::from_fn(
        lat,
        move |q| {
            if bump_ball.contains(q) {
                -bump
            } else {
                1.0
            }
        },
        FarField::Constant { value: 1.0 },
    )
    .unwrap();
    let result = solve_dirichlet(&spec, &omega, &g, &SolverConfig::default(), &quad()).unwrap();
    assert!(result.converged, "fixture solve did not converge");
    Solved { spec, omega, result }
}

/// A classified supersolution that is not a solution: pointwise minimum of
/// two solutions with the same kernel.
pub fn strict_supersolution(h: f64, s: f64, p: f64, seed: u64) -> (KernelSpec, Region, GridFunction) {
    let lat = Lattice::new(1, h, &[(-2.0, 2.0)]).unwrap();
    let omega = Region::from_ball(lat.clone(), &Ball::new(Point::x(0.0), 1.0).unwrap());
    let spec = KernelSpec::modulated(1, s, p, 1.0, 2.0, seed).unwrap();
    let g1 = GridFunction::from_fn(
        lat.clone(),
        |q| 1.0 + 0.5 * q.0[0].sin(),
        FarField::Constant { value: 1.0 },
    )
    .unwrap();
    let g2 = GridFunction::from_fn(
        lat.clone(),
        |q| 1.3 - 0.6 * (0.9 * q.0[0]).cos(),
        FarField::Constant { value: 0.8 },
    )
    .unwrap();
    let cfg = SolverConfig::default();
    let u1 = solve_dirichlet(&spec, &omega, &g1, &cfg, &quad()).unwrap();
    let u2 = solve_dirichlet(&spec, &omega, &g2, &cfg, &quad()).unwrap();
    let vals: Vec<f64> =
        u1.u.values().iter().zip(u2.u.values()).map(|(a, b)| a.min(*b)).collect();
    let m = GridFunction::new(lat, vals, FarField::Constant { value: 0.8 }).unwrap();
    (spec, omega, m)
}

pub fn lattice_1d(h: f64, half_width: f64) -> Arc<Lattice> {
    Lattice::new(1, h, &[(-half_width, half_width)]).unwrap()
}
