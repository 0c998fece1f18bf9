use fracp_core::*;
use std::time::Instant;

fn main() {
    let q = QuadratureScheme::default();
    let cfg = SweepConfig {
        dim: 1,
        bounds: vec![(-2.0, 2.0)],
        mesh_h: vec![1.0 / 8.0, 1.0 / 16.0],
        seeds: (0..50).collect(),
        p_values: vec![1.5],
        s_values: vec![0.5],
        kernel: SweepKernel::Modulated,
        lambda_min: 1.0,
        lambda_max: 2.0,
        omega: OmegaSpec::Ball { center: Point::x(0.0), radius: 1.0 },
        report: ReportParams {
            family: ReportFamily::Harnack,
            x0: Point::x(0.0),
            r: 0.4,
            r_outer: 0.9,
            candidate: 100.0,
        },
        solver: SolverConfig::default(),
        quad: q,
    };
    let t = Instant::now();
    let summary = constant_sweep(&cfg, &|lat| {
        GridFunction::from_fn(
            lat.clone(),
            |pt| 1.0 + 0.25 * (2.0 * pt.0[0]).sin(),
            FarField::Constant { value: 1.0 },
        )
    })
    .unwrap();
    println!("sweep p=1.5: {} rows {} failures in {:?}", summary.rows.len(), summary.failures.len(), t.elapsed());
}
