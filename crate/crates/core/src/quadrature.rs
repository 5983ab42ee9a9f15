//! Symmetric quadrature rules on triangles in barycentric coordinates.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TriangleRule {
    pub degree: usize,
    /// Barycentric coordinates and weights; weights sum to one.
    pub points: Vec<([f64; 3], f64)>,
}

fn orbit3(a: f64, w: f64) -> [([f64; 3], f64); 3] {
    let b = (1.0 - a) / 2.0;
    [([a, b, b], w), ([b, a, b], w), ([b, b, a], w)]
}

impl TriangleRule {
    /// Smallest stored rule that integrates polynomials of total degree
    /// `order` exactly.
    pub fn with_order(order: usize) -> Result<Self> {
        let points: Vec<([f64; 3], f64)> = match order {
            1 => vec![([1.0 / 3.0; 3], 1.0)],
            2 => orbit3(2.0 / 3.0, 1.0 / 3.0).to_vec(),
            3 | 4 => {
                let mut p = orbit3(0.108_103_018_168_070, 0.223_381_589_678_011).to_vec();
                p.extend(orbit3(0.816_847_572_980_459, 0.109_951_743_655_322));
                p
            }
            5 => {
                let mut p = vec![([1.0 / 3.0; 3], 0.225)];
                p.extend(orbit3(0.059_715_871_789_770, 0.132_394_152_788_506));
                p.extend(orbit3(0.797_426_985_353_087, 0.125_939_180_544_827));
                p
            }
            _ => return Err(Error::QuadratureOrder(order)),
        };
        let degree = match order {
            3 => 4,
            d => d,
        };
        Ok(Self { degree, points })
    }

    /// Six-point degree-4 rule.
    pub fn degree4() -> Self {
        Self::with_order(4).expect("degree 4 rule exists")
    }
}
