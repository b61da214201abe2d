use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rigid drift: in-plane rotation about the image center plus translation.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AffineParams {
    pub theta_deg: f64,
    pub tx_px: f64,
    pub ty_px: f64,
}

impl AffineParams {
    pub const IDENTITY: AffineParams = AffineParams {
        theta_deg: 0.0,
        tx_px: 0.0,
        ty_px: 0.0,
    };

    pub fn new(theta_deg: f64, tx_px: f64, ty_px: f64) -> Self {
        Self {
            theta_deg,
            tx_px,
            ty_px,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.theta_deg.is_finite() && self.tx_px.is_finite() && self.ty_px.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "affine parameters must be finite, got {self:?}"
            )));
        }
        if self.theta_deg.abs() >= 180.0 {
            return Err(Error::OutOfRange {
                what: "theta_deg",
                value: self.theta_deg,
                lo: -180.0,
                hi: 180.0,
            });
        }
        Ok(())
    }

    pub fn translation_norm(&self) -> f64 {
        self.tx_px.hypot(self.ty_px)
    }
}

/// 2x3 matrix `[[a, b, c], [d, e, f]]` acting on centered pixel coordinates
/// `(u, v) = (col - (W-1)/2, row - (H-1)/2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineMatrix {
    pub m: [[f64; 3]; 2],
}

impl AffineMatrix {
    pub const IDENTITY: AffineMatrix = AffineMatrix {
        m: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
    };

    pub fn translation(tx: f64, ty: f64) -> Self {
        Self {
            m: [[1.0, 0.0, tx], [0.0, 1.0, ty]],
        }
    }

    /// `[[cos, -sin, tx], [sin, cos, ty]]`. With row 0 displayed on top,
    /// positive angles turn content counterclockwise on screen.
    pub fn from_params(params: &AffineParams) -> Result<Self> {
        if !(params.theta_deg.is_finite() && params.tx_px.is_finite() && params.ty_px.is_finite())
        {
            return Err(Error::InvalidParameter(format!(
                "affine parameters must be finite, got {params:?}"
            )));
        }
        let (s, c) = params.theta_deg.to_radians().sin_cos();
        Ok(Self {
            m: [[c, -s, params.tx_px], [s, c, params.ty_px]],
        })
    }

    pub fn det(&self) -> f64 {
        self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0]
    }

    pub fn inverse(&self) -> Result<Self> {
        let det = self.det();
        if !det.is_finite() || det.abs() <= 1e-12 {
            return Err(Error::SingularTransform { det });
        }
        let [[a, b, c], [d, e, f]] = self.m;
        let ia = e / det;
        let ib = -b / det;
        let id = -d / det;
        let ie = a / det;
        Ok(Self {
            m: [
                [ia, ib, -(ia * c + ib * f)],
                [id, ie, -(id * c + ie * f)],
            ],
        })
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &AffineMatrix) -> Self {
        let [[a, b, c], [d, e, f]] = self.m;
        let [[p, q, r], [s, t, u]] = other.m;
        Self {
            m: [
                [a * p + b * s, a * q + b * t, a * r + b * u + c],
                [d * p + e * s, d * q + e * t, d * r + e * u + f],
            ],
        }
    }

    pub fn apply(&self, u: f64, v: f64) -> (f64, f64) {
        (
            self.m[0][0] * u + self.m[0][1] * v + self.m[0][2],
            self.m[1][0] * u + self.m[1][1] * v + self.m[1][2],
        )
    }

    /// Reads rotation and translation back out of a rigid matrix.
    pub fn to_params(&self) -> AffineParams {
        AffineParams {
            theta_deg: self.m[1][0].atan2(self.m[0][0]).to_degrees(),
            tx_px: self.m[0][2],
            ty_px: self.m[1][2],
        }
    }

    pub fn max_abs_diff(&self, other: &AffineMatrix) -> f64 {
        let mut worst: f64 = 0.0;
        for r in 0..2 {
            for c in 0..3 {
                worst = worst.max((self.m[r][c] - other.m[r][c]).abs());
            }
        }
        worst
    }
}

/// Builds the rigid drift matrix for `params`.
pub fn build_affine_matrix(params: &AffineParams) -> Result<AffineMatrix> {
    AffineMatrix::from_params(params)
}

pub fn invert_affine(m: &AffineMatrix) -> Result<AffineMatrix> {
    m.inverse()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: &AffineMatrix, b: [[f64; 3]; 2], tol: f64) -> bool {
        a.max_abs_diff(&AffineMatrix { m: b }) < tol
    }

    #[test]
    fn identity_and_quarter_turn() {
        let m = build_affine_matrix(&AffineParams::IDENTITY).unwrap();
        assert_eq!(m, AffineMatrix::IDENTITY);
        let q = build_affine_matrix(&AffineParams::new(90.0, 0.0, 0.0)).unwrap();
        assert!(close(&q, [[0.0, -1.0, 0.0], [1.0, 0.0, 0.0]], 1e-15));
    }

    #[test]
    fn five_degrees() {
        // cos 5° = 0.9961946981, sin 5° = 0.0871557427
        let m = build_affine_matrix(&AffineParams::new(5.0, 5.0, 5.0)).unwrap();
        assert!(close(
            &m,
            [[0.99619, -0.08716, 5.0], [0.08716, 0.99619, 5.0]],
            5e-6
        ));
        assert!((m.m[0][0] - 0.996_194_698_1).abs() < 1e-10);
        assert!((m.m[1][0] - 0.087_155_742_7).abs() < 1e-10);
    }

    #[test]
    fn rejects_non_finite() {
        assert!(build_affine_matrix(&AffineParams::new(f64::NAN, 0.0, 0.0)).is_err());
        assert!(build_affine_matrix(&AffineParams::new(0.0, f64::INFINITY, 0.0)).is_err());
    }

    #[test]
    fn inverse_cases() {
        assert_eq!(
            invert_affine(&AffineMatrix::IDENTITY).unwrap(),
            AffineMatrix::IDENTITY
        );
        let t = invert_affine(&AffineMatrix::translation(3.0, -2.0)).unwrap();
        assert!(close(&t, [[1.0, 0.0, -3.0], [0.0, 1.0, 2.0]], 0.0 + 1e-15));

        let m = build_affine_matrix(&AffineParams::new(30.0, 4.0, 1.0)).unwrap();
        let inv = invert_affine(&m).unwrap();
        // R(-30°) applied to -t
        let back = build_affine_matrix(&AffineParams::new(-30.0, 0.0, 0.0)).unwrap();
        let (ex, ey) = back.apply(-4.0, -1.0);
        assert!(close(&inv, [[back.m[0][0], back.m[0][1], ex], [back.m[1][0], back.m[1][1], ey]], 1e-12));
        assert!(m.compose(&inv).max_abs_diff(&AffineMatrix::IDENTITY) < 1e-9);
    }

    #[test]
    fn singular_inverse_fails() {
        let m = AffineMatrix {
            m: [[1.0, 2.0, 0.0], [2.0, 4.0, 0.0]],
        };
        assert!(matches!(m.inverse(), Err(Error::SingularTransform { .. })));
    }

    proptest! {
        #[test]
        fn rigid_block_and_readback(theta in -179.9f64..179.9, tx in -200.0f64..200.0, ty in -200.0f64..200.0) {
            let p = AffineParams::new(theta, tx, ty);
            let m = build_affine_matrix(&p).unwrap();
            prop_assert!((m.det() - 1.0).abs() < 1e-9);
            let q = m.to_params();
            prop_assert!((q.theta_deg - theta).abs() < 1e-9);
            prop_assert!((q.tx_px - tx).abs() < 1e-9 && (q.ty_px - ty).abs() < 1e-9);
            let inv = m.inverse().unwrap();
            prop_assert!(m.compose(&inv).max_abs_diff(&AffineMatrix::IDENTITY) < 1e-9);
        }
    }
}
