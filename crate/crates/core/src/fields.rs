//! Analytic magnetic fields, the island source term and Poincare sections.

use crate::error::{Error, Result};
use crate::mesh::Point;
use crate::parallel::{trace_point, MagneticField, ParallelConfig};
use std::io::Write;
use std::sync::Arc;

/// Single-island flux function `psi = (r - r1)^2 + delta (r - 1/2)(1 - r) cos(theta)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IslandFieldParams {
    pub delta: f64,
    pub r1: f64,
}

impl Default for IslandFieldParams {
    fn default() -> Self {
        Self { delta: 0.05, r1: 0.7 }
    }
}

impl IslandFieldParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.delta) || !(self.r1 > 0.0 && self.r1 < 1.0) {
            return Err(Error::InvalidParameter(format!("island parameters out of range: {self:?}")));
        }
        Ok(())
    }

    pub fn psi(&self, x: f64, y: f64) -> f64 {
        let r = x.hypot(y);
        let c = if r > 0.0 { x / r } else { 1.0 };
        (r - self.r1).powi(2) + self.delta * (r - 0.5) * (1.0 - r) * c
    }
}

/// `B = (d psi / dy, -d psi / dx)`.
pub fn island_field_eval(x: f64, y: f64, p: &IslandFieldParams) -> Result<Point> {
    let r = x.hypot(y);
    if r < 1e-14 {
        return Err(Error::FieldEvaluation { x, y, reason: "polar origin".into() });
    }
    let (c, s) = (x / r, y / r);
    let psi_r = 2.0 * (r - p.r1) + p.delta * c * (1.5 - 2.0 * r);
    let psi_t = -p.delta * (r - 0.5) * (1.0 - r) * s;
    let psi_x = psi_r * c - psi_t * s / r;
    let psi_y = psi_r * s + psi_t * c / r;
    Ok([psi_y, -psi_x])
}

/// `Q = 4 (1 - r^2)^8`.
pub fn island_source(x: f64, y: f64) -> f64 {
    4.0 * (1.0 - (x * x + y * y)).powi(8)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IslandField(pub IslandFieldParams);

impl MagneticField for IslandField {
    fn eval(&self, p: Point) -> Result<Point> {
        island_field_eval(p[0], p[1], &self.0)
    }
}

/// Field lookup by name: `island`, `circular` (island with `delta = 0`),
/// `zero`. Further fields (e.g. equilibria read from files) plug in here.
pub fn field_by_name(name: &str, params: IslandFieldParams) -> Result<Arc<dyn MagneticField>> {
    match name {
        "island" => {
            params.validate()?;
            Ok(Arc::new(IslandField(params)))
        }
        "circular" => Ok(Arc::new(IslandField(IslandFieldParams { delta: 0.0, ..params }))),
        "zero" => Ok(Arc::new(|_p: Point| Ok([0.0, 0.0])) as Arc<dyn MagneticField>),
        other => Err(Error::UnknownField(other.to_string())),
    }
}

/// Iterates of the forward map from one seed.
#[derive(Debug, Clone, PartialEq)]
pub struct PoincareOrbit {
    pub seed: usize,
    /// Point after each transit, starting with the seed (transit 0).
    pub points: Vec<Point>,
    /// True if the orbit left the unit disk and was cut short.
    pub truncated: bool,
}

pub fn poincare_section(
    field: &dyn MagneticField,
    seeds: &[Point],
    n_transits: usize,
    cfg: &ParallelConfig,
) -> Result<Vec<PoincareOrbit>> {
    seeds
        .iter()
        .enumerate()
        .map(|(seed, &p0)| {
            let mut orbit = PoincareOrbit { seed, points: vec![p0], truncated: false };
            let mut p = p0;
            for _ in 0..n_transits {
                p = trace_point(field, p, 1.0, cfg)?;
                if p[0].hypot(p[1]) > 1.0 {
                    orbit.truncated = true;
                    break;
                }
                orbit.points.push(p);
            }
            Ok(orbit)
        })
        .collect()
}

/// Poincare CSV with columns `seed,transit,x,y`.
pub fn write_poincare_csv<W: Write>(mut w: W, orbits: &[PoincareOrbit]) -> Result<()> {
    writeln!(w, "seed,transit,x,y")?;
    for o in orbits {
        for (k, p) in o.points.iter().enumerate() {
            writeln!(w, "{},{k},{:.12e},{:.12e}", o.seed, p[0], p[1])?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn o_circle_is_stagnant() {
        let p = IslandFieldParams { delta: 0.0, r1: 0.7 };
        let b = island_field_eval(0.7 * 0.6, 0.7 * 0.8, &p).unwrap();
        assert!(b[0].abs() < 1e-15 && b[1].abs() < 1e-15);
    }

    #[test]
    fn unperturbed_field_is_tangential() {
        let p = IslandFieldParams { delta: 0.0, r1: 0.7 };
        for &(x, y) in &[(0.3, -0.2), (-0.8, 0.1), (0.05, 0.9)] {
            let b = island_field_eval(x, y, &p).unwrap();
            assert!((b[0] * x + b[1] * y).abs() < 1e-15);
        }
    }

    #[test]
    fn origin_rejected() {
        assert!(island_field_eval(0.0, 0.0, &IslandFieldParams::default()).is_err());
    }

    #[test]
    fn source_values() {
        assert_eq!(island_source(0.0, 0.0), 4.0);
        assert_eq!(island_source(1.0, 0.0), 0.0);
        assert_eq!(island_source(0.5, 0.0), 0.40045166015625);
        assert!((island_source(0.3, 0.4) - island_source(0.5, 0.0)).abs() < 1e-15);
    }

    #[test]
    fn registry() {
        assert!(field_by_name("island", IslandFieldParams::default()).is_ok());
        assert!(matches!(field_by_name("helical", IslandFieldParams::default()), Err(Error::UnknownField(_))));
        let z = field_by_name("zero", IslandFieldParams::default()).unwrap();
        assert_eq!(z.eval([0.2, 0.1]).unwrap(), [0.0, 0.0]);
    }

    #[test]
    fn zero_transits_returns_seeds() {
        let f = IslandField(IslandFieldParams::default());
        let o = poincare_section(&f, &[[0.5, 0.0], [-0.7, 0.0]], 0, &ParallelConfig::default()).unwrap();
        assert_eq!(o[1].points, vec![[-0.7, 0.0]]);
        let mut buf = Vec::new();
        write_poincare_csv(&mut buf, &o).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "seed,transit,x,y\n0,0,5.000000000000e-1,0.000000000000e0\n1,0,-7.000000000000e-1,0.000000000000e0\n");
    }
}
