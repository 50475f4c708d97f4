//! Small dense linear-algebra helpers shared by the simulator and its adjoint:
//! quadratic B-spline stencils, 3x3 polar decomposition, and a sign-corrected
//! SVD that always returns proper rotations.

use nalgebra::{Matrix3, Vector3};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Quadratic B-spline weights and derivatives over the 3x3x3 node stencil of
/// one particle. `grad` and `hess` are derivatives with respect to the
/// particle position (per axis, in units of 1/h and 1/h^2).
#[derive(Debug, Clone, Copy)]
pub struct SplineStencil {
    /// Index of the lowest node of the stencil along each axis.
    pub base: [i64; 3],
    /// Fractional position of the particle relative to `base`, in cell units.
    pub frac: Vec3,
    /// Per-axis weights for node offsets 0, 1, 2.
    pub w: [[f64; 3]; 3],
    /// Per-axis first derivatives d w / d x_p.
    pub dw: [[f64; 3]; 3],
    /// Per-axis second derivatives d^2 w / d x_p^2.
    pub ddw: [[f64; 3]; 3],
}

impl SplineStencil {
    pub fn new(pos: Vec3, inv_h: f64) -> Self {
        let mut base = [0i64; 3];
        let mut frac = Vec3::zeros();
        let mut w = [[0.0; 3]; 3];
        let mut dw = [[0.0; 3]; 3];
        let mut ddw = [[0.0; 3]; 3];
        for a in 0..3 {
            let x = pos[a] * inv_h;
            let b = (x - 0.5).floor();
            let f = x - b;
            base[a] = b as i64;
            frac[a] = f;
            // quadratic B-spline on node offsets 0,1,2; f in [0.5, 1.5)
            w[a][0] = 0.5 * (1.5 - f) * (1.5 - f);
            w[a][1] = 0.75 - (f - 1.0) * (f - 1.0);
            w[a][2] = 0.5 * (f - 0.5) * (f - 0.5);
            dw[a][0] = -(1.5 - f) * inv_h;
            dw[a][1] = -2.0 * (f - 1.0) * inv_h;
            dw[a][2] = (f - 0.5) * inv_h;
            ddw[a][0] = inv_h * inv_h;
            ddw[a][1] = -2.0 * inv_h * inv_h;
            ddw[a][2] = inv_h * inv_h;
        }
        SplineStencil { base, frac, w, dw, ddw }
    }

    /// Combined weight of the node at offset (i, j, k).
    #[inline]
    pub fn weight(&self, i: usize, j: usize, k: usize) -> f64 {
        self.w[0][i] * self.w[1][j] * self.w[2][k]
    }

    /// Gradient of the combined weight with respect to the particle position.
    #[inline]
    pub fn weight_grad(&self, i: usize, j: usize, k: usize) -> Vec3 {
        Vec3::new(
            self.dw[0][i] * self.w[1][j] * self.w[2][k],
            self.w[0][i] * self.dw[1][j] * self.w[2][k],
            self.w[0][i] * self.w[1][j] * self.dw[2][k],
        )
    }

    /// Hessian of the combined weight with respect to the particle position.
    pub fn weight_hess(&self, i: usize, j: usize, k: usize) -> Mat3 {
        let (a, b, c) = (self.w[0][i], self.w[1][j], self.w[2][k]);
        let (da, db, dc) = (self.dw[0][i], self.dw[1][j], self.dw[2][k]);
        let (dda, ddb, ddc) = (self.ddw[0][i], self.ddw[1][j], self.ddw[2][k]);
        Mat3::new(
            dda * b * c, da * db * c, da * b * dc,
            da * db * c, a * ddb * c, a * db * dc,
            da * b * dc, a * db * dc, a * b * ddc,
        )
    }
}

/// Adjugate (transposed cofactor matrix); `m * adjugate(m) = det(m) * I`.
#[inline]
pub fn adjugate(m: &Mat3) -> Mat3 {
    Mat3::new(
        m[(1, 1)] * m[(2, 2)] - m[(1, 2)] * m[(2, 1)],
        m[(0, 2)] * m[(2, 1)] - m[(0, 1)] * m[(2, 2)],
        m[(0, 1)] * m[(1, 2)] - m[(0, 2)] * m[(1, 1)],
        m[(1, 2)] * m[(2, 0)] - m[(1, 0)] * m[(2, 2)],
        m[(0, 0)] * m[(2, 2)] - m[(0, 2)] * m[(2, 0)],
        m[(0, 2)] * m[(1, 0)] - m[(0, 0)] * m[(1, 2)],
        m[(1, 0)] * m[(2, 1)] - m[(1, 1)] * m[(2, 0)],
        m[(0, 1)] * m[(2, 0)] - m[(0, 0)] * m[(2, 1)],
        m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)],
    )
}

/// SVD `F = U diag(sigma) V^T` with `U`, `V` proper rotations. If either
/// factor of the plain SVD has negative determinant the sign is transferred
/// to the smallest singular value, so `sigma` may contain one negative entry
/// when `det(F) < 0`.
pub fn svd_proper(f: &Mat3) -> (Mat3, Vec3, Mat3) {
    let svd = f.svd(true, true);
    let mut u = svd.u.unwrap();
    let mut vt = svd.v_t.unwrap();
    let mut s = Vec3::new(
        svd.singular_values[0],
        svd.singular_values[1],
        svd.singular_values[2],
    );
    // nalgebra sorts singular values descending; index 2 is the smallest.
    if u.determinant() < 0.0 {
        for r in 0..3 {
            u[(r, 2)] = -u[(r, 2)];
        }
        s[2] = -s[2];
    }
    if vt.determinant() < 0.0 {
        for c in 0..3 {
            vt[(2, c)] = -vt[(2, c)];
        }
        s[2] = -s[2];
    }
    (u, s, vt.transpose())
}

/// Polar decomposition `F = R S` with `R` a proper rotation and `S` symmetric.
///
/// Fast path is the Newton iteration `X <- (X + X^-T)/2`, which converges
/// quadratically for well-conditioned `F` with positive determinant; falls
/// back to the sign-corrected SVD otherwise.
pub fn polar_decomp(f: &Mat3) -> (Mat3, Mat3) {
    let det = f.determinant();
    if det > 1e-8 {
        let mut x = *f;
        for _ in 0..24 {
            let d = x.determinant();
            if d.abs() < 1e-12 {
                break;
            }
            let inv_t = adjugate(&x).transpose() / d;
            let next = (x + inv_t) * 0.5;
            let delta = (next - x).norm();
            x = next;
            if delta < 1e-14 {
                let s = x.transpose() * f;
                // symmetrize away iteration round-off
                return (x, (s + s.transpose()) * 0.5);
            }
        }
    }
    let (u, s, v) = svd_proper(f);
    let r = u * v.transpose();
    let sym = v * Mat3::from_diagonal(&s) * v.transpose();
    (r, (sym + sym.transpose()) * 0.5)
}

/// Axial vector of the skew part of `m`: `axial(m)_k = (m_skew)_{ji}` with
/// `skew(v) w = v x w` convention, so `skew(axial(skew_part(m))) = skew_part(m)`.
#[inline]
pub fn axial_of_skew_part(m: &Mat3) -> Vec3 {
    Vec3::new(
        0.5 * (m[(2, 1)] - m[(1, 2)]),
        0.5 * (m[(0, 2)] - m[(2, 0)]),
        0.5 * (m[(1, 0)] - m[(0, 1)]),
    )
}

/// Cross-product matrix: `skew(v) * w = v x w`.
#[inline]
pub fn skew(v: &Vec3) -> Mat3 {
    Mat3::new(0.0, -v[2], v[1], v[2], 0.0, -v[0], -v[1], v[0], 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_rotation(rng: &mut ChaCha8Rng) -> Mat3 {
        let axis = Vec3::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5);
        let angle = rng.gen::<f64>() * std::f64::consts::TAU;
        nalgebra::Rotation3::new(axis.normalize() * angle).into_inner()
    }

    fn random_f(rng: &mut ChaCha8Rng) -> Mat3 {
        loop {
            let m = Mat3::from_fn(|_, _| 1.0 * (rng.gen::<f64>() - 0.5)) + Mat3::identity();
            if m.determinant() > 0.05 {
                return m;
            }
        }
    }

    #[test]
    fn stencil_partition_of_unity() {
        let st = SplineStencil::new(Vec3::new(0.1234, 0.567, 0.891), 1.0 / 0.05);
        let mut sum = 0.0;
        let mut gsum = Vec3::zeros();
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    sum += st.weight(i, j, k);
                    gsum += st.weight_grad(i, j, k);
                }
            }
        }
        assert_relative_eq!(sum, 1.0, epsilon = 1e-12);
        assert!(gsum.norm() < 1e-10);
    }

    #[test]
    fn stencil_linear_reproduction() {
        // sum_i grad_w (x_i - x_p)^T = I and sum_i w (x_i - x_p) = 0
        let h = 0.05;
        let pos = Vec3::new(0.1234, 0.567, 0.891);
        let st = SplineStencil::new(pos, 1.0 / h);
        let mut first_moment = Vec3::zeros();
        let mut grad_moment = Mat3::zeros();
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    let node = Vec3::new(
                        (st.base[0] + i as i64) as f64 * h,
                        (st.base[1] + j as i64) as f64 * h,
                        (st.base[2] + k as i64) as f64 * h,
                    );
                    let d = node - pos;
                    first_moment += st.weight(i, j, k) * d;
                    grad_moment += st.weight_grad(i, j, k) * d.transpose();
                }
            }
        }
        assert!(first_moment.norm() < 1e-12);
        assert_relative_eq!(grad_moment, Mat3::identity(), epsilon = 1e-10);
    }

    #[test]
    fn stencil_grad_matches_fd() {
        let h = 0.05;
        let pos = Vec3::new(0.1234, 0.567, 0.891);
        let st = SplineStencil::new(pos, 1.0 / h);
        let eps = 1e-6;
        for a in 0..3 {
            let mut pp = pos;
            pp[a] += eps;
            let mut pm = pos;
            pm[a] -= eps;
            let sp = SplineStencil::new(pp, 1.0 / h);
            let sm = SplineStencil::new(pm, 1.0 / h);
            assert_eq!(sp.base, st.base, "fd step crossed a cell boundary");
            for i in 0..3 {
                for j in 0..3 {
                    for k in 0..3 {
                        let fd = (sp.weight(i, j, k) - sm.weight(i, j, k)) / (2.0 * eps);
                        assert_relative_eq!(st.weight_grad(i, j, k)[a], fd, epsilon = 1e-6);
                        let gfd = (sp.weight_grad(i, j, k) - sm.weight_grad(i, j, k)) / (2.0 * eps);
                        let hcol = st.weight_hess(i, j, k).column(a).into_owned();
                        assert!((hcol - gfd).norm() < 1e-5);
                    }
                }
            }
        }
    }

    #[test]
    fn polar_identity_and_rotations() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let rot = random_rotation(&mut rng);
            let (r, s) = polar_decomp(&rot);
            assert_relative_eq!(r, rot, epsilon = 1e-10);
            assert_relative_eq!(s, Mat3::identity(), epsilon = 1e-10);
        }
    }

    #[test]
    fn polar_reconstructs_and_is_proper() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let f = random_f(&mut rng);
            let (r, s) = polar_decomp(&f);
            assert_relative_eq!(r * s, f, epsilon = 1e-9);
            assert_relative_eq!(r * r.transpose(), Mat3::identity(), epsilon = 1e-10);
            assert_relative_eq!(r.determinant(), 1.0, epsilon = 1e-10);
            assert_relative_eq!(s, s.transpose(), epsilon = 1e-10);
        }
    }

    #[test]
    fn svd_proper_handles_reflections() {
        let f = Mat3::from_diagonal(&Vec3::new(-2.0, 1.0, 0.5));
        let (u, s, v) = svd_proper(&f);
        assert_relative_eq!(u.determinant(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(v.determinant(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(u * Mat3::from_diagonal(&s) * v.transpose(), f, epsilon = 1e-10);
        assert!(s.iter().filter(|x| **x < 0.0).count() == 1);
    }

    #[test]
    fn adjugate_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = random_f(&mut rng);
        assert_relative_eq!(m * adjugate(&m), Mat3::identity() * m.determinant(), epsilon = 1e-12);
    }
}
