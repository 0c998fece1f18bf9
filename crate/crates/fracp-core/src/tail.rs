//! The nonlocal tail
//! `Tail(v; x0, R) = [ R^{sp} int_{R^n \ B_R} |v(y)|^{p-1} |y - x0|^{-n-sp} dy ]^{1/(p-1)}`
//! split into a lattice part and an analytic far-field part. The tail
//! carries no kernel, so no ellipticity bracketing is involved here.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gridfn::{GridFunction, TruncSign};
use crate::lattice::Point;
use crate::par::sum_indexed;
use crate::quad::{exterior_table, QuadratureScheme};

/// Tail value together with its quadrature breakdown. The parts store the
/// raw integral `int |v|^{p-1} |y-x0|^{-n-sp}` before the `R^{sp}` weighting
/// and the final `1/(p-1)` power, so that
/// `value = (R^{sp} (grid_part + farfield_part))^{1/(p-1)}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TailValue {
    pub value: f64,
    pub grid_part: f64,
    pub farfield_part: f64,
    #[serde(rename = "R")]
    pub radius: f64,
    pub x0: Point,
    pub p: f64,
    pub s: f64,
    pub dim: usize,
}

/// Compute `Tail(v; x0, R)` for the order parameters `(s, p)`.
///
/// Grid part: all box nodes with `|y - x0| > R` (strict, mirroring the open
/// ball convention), weight `h^n`. Far-field part: adaptive radial
/// quadrature of the descriptor over `{|y - x0| > R} \ box`.
pub fn tail(
    v: &GridFunction,
    x0: &Point,
    radius: f64,
    s: f64,
    p: f64,
    quad: &QuadratureScheme,
) -> Result<TailValue> {
    if !(radius > 0.0) {
        return Err(Error::Precondition(format!("tail needs R > 0, got {radius}")));
    }
    let lat = v.lattice();
    let dim = lat.dim();
    let sp = s * p;
    if !lat.contains(x0) {
        return Err(Error::Precondition("tail center must lie inside the box".into()));
    }
    let growth = v.far_field().growth_exponent();
    if growth * (p - 1.0) >= sp - 1e-12 {
        return Err(Error::NonIntegrableFarField(format!(
            "far field grows like |y|^{growth}; tail needs growth * (p-1) < s p = {sp}"
        )));
    }
    let order = dim as f64 + sp;
    let hn = lat.cell_volume();
    let grid_part = sum_indexed(lat.node_count(), |i| {
        let y = lat.position(i);
        let d = y.dist(x0);
        if d > radius {
            v.value(i).abs().powf(p - 1.0) * d.powf(-order) * hn
        } else {
            0.0
        }
    });
    let ff = v.far_field().clone();
    let table = exterior_table(lat, quad, x0, sp, 1.0, radius, &|_, y| {
        ff.eval(y).abs().powf(p - 1.0)
    })?;
    let farfield_part = table.integrate(|_, y| ff.eval(y).abs().powf(p - 1.0));
    let raw = grid_part + farfield_part;
    let value = (radius.powf(sp) * raw).powf(1.0 / (p - 1.0));
    Ok(TailValue { value, grid_part, farfield_part, radius, x0: *x0, p, s, dim })
}

/// The positivity-expansion offset
/// `d = 1/2 (r/R)^{sp/(p-1)} Tail(u_-; x0, R)`.
pub fn tail_offset_d(
    u: &GridFunction,
    x0: &Point,
    r: f64,
    radius: f64,
    s: f64,
    p: f64,
    quad: &QuadratureScheme,
) -> Result<f64> {
    if !(r > 0.0 && r < radius) {
        return Err(Error::Precondition(format!("need 0 < r < R, got r = {r}, R = {radius}")));
    }
    let neg = u.truncation(0.0, TruncSign::Minus);
    let t = tail(&neg, x0, radius, s, p, quad)?;
    Ok(0.5 * (r / radius).powf(s * p / (p - 1.0)) * t.value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridfn::FarField;
    use crate::lattice::Lattice;
    use approx::assert_relative_eq;

    fn quad() -> QuadratureScheme {
        QuadratureScheme::default()
    }

    #[test]
    fn zero_function_has_zero_tail() {
        let lat = Lattice::new(1, 0.25, &[(-4.0, 4.0)]).unwrap();
        let v = GridFunction::constant(lat, 0.0);
        let t = tail(&v, &Point::x(0.0), 1.0, 0.5, 2.0, &quad()).unwrap();
        assert_eq!(t.value, 0.0);
        assert_eq!(t.grid_part, 0.0);
        assert_eq!(t.farfield_part, 0.0);
    }

    #[test]
    fn constant_one_closed_form() {
        // n=1, p=2, s=1/2, v = 1, R=1: Tail = (2 / (sp))^{1/(p-1)} = 2
        let lat = Lattice::new(1, 1.0 / 64.0, &[(-4.0, 4.0)]).unwrap();
        let v = GridFunction::constant(lat, 1.0);
        let t = tail(&v, &Point::x(0.0), 1.0, 0.5, 2.0, &quad()).unwrap();
        assert_relative_eq!(t.value, 2.0, max_relative = 0.02);
        assert_relative_eq!(
            t.value,
            (t.radius.powf(1.0) * (t.grid_part + t.farfield_part)).powf(1.0),
            max_relative = 1e-14
        );
    }

    #[test]
    fn tail_is_degree_one_homogeneous() {
        let lat = Lattice::new(1, 0.125, &[(-4.0, 4.0)]).unwrap();
        let v = GridFunction::from_fn(
            lat,
            |p| (1.0 + p.0[0].abs()).recip(),
            FarField::RadialPower { amplitude: 1.0, exponent: 1.0, center: Point::x(0.0) },
        )
        .unwrap();
        for &(s, p) in &[(0.5, 2.0), (0.4, 3.0)] {
            let t1 = tail(&v, &Point::x(0.0), 1.0, s, p, &quad()).unwrap();
            let t3 = tail(&v.scaled(3.0), &Point::x(0.0), 1.0, s, p, &quad()).unwrap();
            assert_relative_eq!(t3.value, 3.0 * t1.value, max_relative = 1e-10);
        }
    }

    #[test]
    fn tail_monotone_in_magnitude_and_raw_integral_nonincreasing_in_radius() {
        let lat = Lattice::new(1, 0.125, &[(-4.0, 4.0)]).unwrap();
        let small =
            GridFunction::from_fn(lat.clone(), |p| 0.3 * p.0[0].cos().abs(), FarField::Constant {
                value: 0.3,
            })
            .unwrap();
        let big = GridFunction::from_fn(lat.clone(), |p| 0.3 * p.0[0].cos().abs() + 0.2, FarField::Constant {
            value: 0.5,
        })
        .unwrap();
        let ts = tail(&small, &Point::x(0.0), 1.0, 0.5, 2.0, &quad()).unwrap();
        let tb = tail(&big, &Point::x(0.0), 1.0, 0.5, 2.0, &quad()).unwrap();
        assert!(ts.value <= tb.value);

        let t1 = tail(&big, &Point::x(0.0), 1.0, 0.5, 2.0, &quad()).unwrap();
        let t2 = tail(&big, &Point::x(0.0), 2.0, 0.5, 2.0, &quad()).unwrap();
        assert!(
            t2.grid_part + t2.farfield_part <= t1.grid_part + t1.farfield_part + 1e-12,
            "raw integral must not increase with R"
        );
    }

    #[test]
    fn quadrature_stable_under_refinement() {
        let mut prev: Option<f64> = None;
        for &h in &[1.0 / 32.0, 1.0 / 64.0, 1.0 / 128.0] {
            let lat = Lattice::new(1, h, &[(-4.0, 4.0)]).unwrap();
            let v = GridFunction::constant(lat, 1.0);
            let t = tail(&v, &Point::x(0.0), 1.0, 0.5, 2.0, &quad()).unwrap();
            if let Some(p) = prev {
                assert!((t.value - p).abs() / p <= 0.01, "refinement moved tail by > 1%");
            }
            prev = Some(t.value);
        }
    }

    #[test]
    fn offset_d_vanishes_for_nonnegative_u_and_scales() {
        let lat = Lattice::new(1, 0.25, &[(-4.0, 4.0)]).unwrap();
        let u = GridFunction::from_fn(lat.clone(), |p| p.0[0].abs(), FarField::Constant {
            value: 4.0,
        })
        .unwrap();
        let d = tail_offset_d(&u, &Point::x(0.0), 0.5, 1.0, 0.5, 2.0, &quad()).unwrap();
        assert_eq!(d, 0.0);

        let w = GridFunction::from_fn(lat, |p| p.0[0], FarField::Constant { value: -1.0 }).unwrap();
        let d1 = tail_offset_d(&w, &Point::x(0.0), 0.5, 1.0, 0.5, 2.0, &quad()).unwrap();
        let d2 = tail_offset_d(&w.scaled(2.0), &Point::x(0.0), 0.5, 1.0, 0.5, 2.0, &quad()).unwrap();
        assert_relative_eq!(d2, 2.0 * d1, max_relative = 1e-10);
        assert!(tail_offset_d(&w, &Point::x(0.0), 1.0, 1.0, 0.5, 2.0, &quad()).is_err());
    }

    #[test]
    fn offset_d_approaches_half_tail_as_r_approaches_big_r() {
        let lat = Lattice::new(1, 0.25, &[(-4.0, 4.0)]).unwrap();
        let w = GridFunction::constant(lat, -1.0);
        let t = tail(&w.negative_part(), &Point::x(0.0), 1.0, 0.5, 2.0, &quad()).unwrap();
        let d = tail_offset_d(&w, &Point::x(0.0), 0.999999, 1.0, 0.5, 2.0, &quad()).unwrap();
        assert_relative_eq!(d, 0.5 * t.value, max_relative = 1e-5);
    }
}
