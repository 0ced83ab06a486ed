//! Parametric initial-pressure phantoms supported in the disk `K`.

use std::str::FromStr;

use crate::error::{Error, Result};
use crate::grid::{Grid2D, RealField};
use crate::tv::DEFAULT_K_RADIUS;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Primitive {
    Disk {
        center: [f64; 2],
        radius: f64,
        intensity: f64,
    },
    Ellipse {
        center: [f64; 2],
        radii: [f64; 2],
        /// Counterclockwise rotation of the first semi-axis, radians.
        rotation: f64,
        intensity: f64,
    },
    Annulus {
        center: [f64; 2],
        inner: f64,
        outer: f64,
        intensity: f64,
    },
}

impl Primitive {
    fn center(&self) -> [f64; 2] {
        match *self {
            Primitive::Disk { center, .. } | Primitive::Ellipse { center, .. } | Primitive::Annulus { center, .. } => {
                center
            }
        }
    }

    fn intensity(&self) -> f64 {
        match *self {
            Primitive::Disk { intensity, .. }
            | Primitive::Ellipse { intensity, .. }
            | Primitive::Annulus { intensity, .. } => intensity,
        }
    }

    fn extent(&self) -> f64 {
        let [cx, cy] = self.center();
        let c = (cx * cx + cy * cy).sqrt();
        match *self {
            Primitive::Disk { radius, .. } => c + radius,
            Primitive::Ellipse { radii, .. } => c + radii[0].max(radii[1]),
            Primitive::Annulus { outer, .. } => c + outer,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Primitive::Disk { radius, .. } => radius > 0.0,
            Primitive::Ellipse { radii, .. } => radii[0] > 0.0 && radii[1] > 0.0,
            Primitive::Annulus { inner, outer, .. } => inner >= 0.0 && outer > inner,
        };
        if !ok || !(self.intensity() >= 0.0) || !self.extent().is_finite() {
            return Err(Error::InvalidParameter(format!("invalid phantom primitive {self:?}")));
        }
        Ok(())
    }

    /// Approximate signed distance to the primitive's boundary (negative inside).
    fn signed_distance(&self, x: f64, y: f64) -> f64 {
        let [cx, cy] = self.center();
        let (dx, dy) = (x - cx, y - cy);
        match *self {
            Primitive::Disk { radius, .. } => (dx * dx + dy * dy).sqrt() - radius,
            Primitive::Ellipse { radii, rotation, .. } => {
                let (s, c) = rotation.sin_cos();
                let u = c * dx + s * dy;
                let v = -s * dx + c * dy;
                let (a, b) = (radii[0], radii[1]);
                let q = ((u / a).powi(2) + (v / b).powi(2)).sqrt();
                if q == 0.0 {
                    return -a.min(b);
                }
                let grad = ((u / (a * a)).powi(2) + (v / (b * b)).powi(2)).sqrt() / q;
                (q - 1.0) / grad
            }
            Primitive::Annulus { inner, outer, .. } => {
                let r = (dx * dx + dy * dy).sqrt();
                (r - outer).max(inner - r)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhantomSpec {
    pub primitives: Vec<Primitive>,
    /// Radius of the support disk the phantom must stay inside.
    pub k_radius: f64,
    /// Linear edge ramp one cell wide; `false` gives pure indicators.
    pub anti_alias: bool,
}

impl PhantomSpec {
    pub fn new(primitives: Vec<Primitive>) -> Self {
        Self {
            primitives,
            k_radius: DEFAULT_K_RADIUS,
            anti_alias: true,
        }
    }

    /// Sum of the primitive indicators times their intensities.
    pub fn render(&self, grid: Grid2D) -> Result<RealField> {
        let margin = if self.anti_alias { 0.5 * grid.h() } else { 0.0 };
        for p in &self.primitives {
            p.validate()?;
            if p.extent() + margin > self.k_radius {
                return Err(Error::InvalidParameter(format!(
                    "phantom primitive {p:?} leaves the support disk of radius {}",
                    self.k_radius
                )));
            }
        }
        let h = grid.h();
        let anti_alias = self.anti_alias;
        Ok(RealField::from_fn(grid, |x, y| {
            self.primitives
                .iter()
                .map(|p| {
                    let d = p.signed_distance(x, y);
                    let w = if anti_alias {
                        (0.5 - d / h).clamp(0.0, 1.0)
                    } else if d <= 0.0 {
                        1.0
                    } else {
                        0.0
                    };
                    w * p.intensity()
                })
                .sum()
        }))
    }
}

/// Built-in phantoms used by the pipeline and the acceptance runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StockPhantom {
    /// One off-centre disk.
    Disk,
    /// A rotated ellipse next to a fainter small disk.
    Ellipses,
    /// An off-centre ring.
    Annulus,
}

impl StockPhantom {
    pub const ALL: [StockPhantom; 3] = [StockPhantom::Disk, StockPhantom::Ellipses, StockPhantom::Annulus];

    pub fn name(self) -> &'static str {
        match self {
            StockPhantom::Disk => "disk",
            StockPhantom::Ellipses => "ellipses",
            StockPhantom::Annulus => "annulus",
        }
    }

    pub fn spec(self) -> PhantomSpec {
        let primitives = match self {
            StockPhantom::Disk => vec![Primitive::Disk {
                center: [0.3, 0.2],
                radius: 0.25,
                intensity: 1.0,
            }],
            StockPhantom::Ellipses => vec![
                Primitive::Ellipse {
                    center: [-0.25, 0.1],
                    radii: [0.35, 0.18],
                    rotation: 0.5,
                    intensity: 1.0,
                },
                Primitive::Disk {
                    center: [0.3, -0.3],
                    radius: 0.15,
                    intensity: 0.6,
                },
            ],
            StockPhantom::Annulus => vec![Primitive::Annulus {
                center: [0.1, -0.15],
                inner: 0.2,
                outer: 0.4,
                intensity: 0.8,
            }],
        };
        PhantomSpec::new(primitives)
    }
}

impl FromStr for StockPhantom {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        StockPhantom::ALL.into_iter().find(|p| p.name() == s).ok_or_else(|| {
            Error::InvalidParameter(format!("unknown phantom '{s}' (expected disk, ellipses or annulus)"))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn empty_spec_is_zero() {
        let grid = Grid2D::new(4.0, 32).unwrap();
        assert_eq!(PhantomSpec::new(vec![]).render(grid).unwrap(), RealField::zeros(grid));
    }

    #[test]
    fn disk_area_quadrature() {
        let grid = Grid2D::new(4.0, 256).unwrap();
        for r in [0.2, 0.37, 0.5] {
            let spec = PhantomSpec::new(vec![Primitive::Disk {
                center: [0.1, -0.05],
                radius: r,
                intensity: 1.0,
            }]);
            let f = spec.render(grid).unwrap();
            let area = f.values().iter().sum::<f64>() * grid.h() * grid.h();
            assert!((area / (PI * r * r) - 1.0).abs() <= 0.02, "r={r}: {area}");
        }
    }

    #[test]
    fn ellipse_area_quadrature() {
        let grid = Grid2D::new(4.0, 256).unwrap();
        let spec = PhantomSpec::new(vec![Primitive::Ellipse {
            center: [0.0, 0.1],
            radii: [0.4, 0.2],
            rotation: 0.7,
            intensity: 2.0,
        }]);
        let f = spec.render(grid).unwrap();
        let area = f.values().iter().sum::<f64>() * grid.h() * grid.h() / 2.0;
        assert!((area / (PI * 0.08) - 1.0).abs() <= 0.02, "{area}");
    }

    #[test]
    fn disjoint_disks_add() {
        let grid = Grid2D::new(4.0, 64).unwrap();
        let a = Primitive::Disk {
            center: [-0.3, 0.0],
            radius: 0.2,
            intensity: 1.0,
        };
        let b = Primitive::Disk {
            center: [0.3, 0.1],
            radius: 0.15,
            intensity: 0.5,
        };
        let both = PhantomSpec::new(vec![a, b]).render(grid).unwrap();
        let sum = PhantomSpec::new(vec![a])
            .render(grid)
            .unwrap()
            .combine(1.0, &PhantomSpec::new(vec![b]).render(grid).unwrap(), 1.0)
            .unwrap();
        assert_eq!(both, sum);
    }

    #[test]
    fn rejects_escaping_primitive() {
        let grid = Grid2D::new(4.0, 64).unwrap();
        let spec = PhantomSpec::new(vec![Primitive::Disk {
            center: [0.6, 0.0],
            radius: 0.3,
            intensity: 1.0,
        }]);
        assert!(spec.render(grid).is_err());
    }

    #[test]
    fn stock_phantoms_are_admissible() {
        let grid = Grid2D::new(4.0, 128).unwrap();
        for p in StockPhantom::ALL {
            let f = p.spec().render(grid).unwrap();
            assert!(f.values().iter().all(|&v| v >= 0.0));
            assert!(f.linf_norm() > 0.5);
            for i in 0..128 {
                for j in 0..128 {
                    let [x, y] = grid.node(i, j);
                    if x * x + y * y > 0.85 * 0.85 {
                        assert_eq!(f.get(i, j), 0.0);
                    }
                }
            }
            assert_eq!(p.name().parse::<StockPhantom>().unwrap(), p);
        }
        assert!("blob".parse::<StockPhantom>().is_err());
    }

    #[test]
    fn indicator_mode_is_binary() {
        let grid = Grid2D::new(4.0, 64).unwrap();
        let mut spec = StockPhantom::Disk.spec();
        spec.anti_alias = false;
        let f = spec.render(grid).unwrap();
        assert!(f.values().iter().all(|&v| v == 0.0 || v == 1.0));
    }
}
