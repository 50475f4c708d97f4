//! Spatially varying elastic material from Gaussian-ellipsoid prototypes and
//! the Fixed Corotated constitutive model.
//!
//! Each prototype carries a learnable Young's modulus (optimized in log space)
//! and Poisson's ratio (optimized through a bounded sigmoid map). Per-point
//! material is a softmax-of-negative-Mahalanobis-distance blend of the
//! prototypes; the blend weights are fixed at rest positions and only the
//! elastic parameters are learned.

use crate::error::{Error, Result};
use crate::math::{adjugate, axial_of_skew_part, polar_decomp, skew, svd_proper, Mat3, Vec3};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Lower/upper bounds of the Poisson-ratio parameterization.
pub const NU_MIN: f64 = -0.999;
pub const NU_MAX: f64 = 0.499;

/// Map an unconstrained scalar into the physical Poisson-ratio range.
#[inline]
pub fn nu_from_raw(raw: f64) -> f64 {
    let s = 1.0 / (1.0 + (-raw).exp());
    NU_MIN + (NU_MAX - NU_MIN) * s
}

/// Derivative of [`nu_from_raw`].
#[inline]
pub fn d_nu_d_raw(raw: f64) -> f64 {
    let s = 1.0 / (1.0 + (-raw).exp());
    (NU_MAX - NU_MIN) * s * (1.0 - s)
}

/// Inverse of [`nu_from_raw`]; `nu` must lie strictly inside the range.
pub fn raw_from_nu(nu: f64) -> f64 {
    let s = (nu - NU_MIN) / (NU_MAX - NU_MIN);
    (s / (1.0 - s)).ln()
}

/// P Gaussian-ellipsoid material prototypes with learnable elastic parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MaterialPrototypeSet {
    pub centers: Vec<[f64; 3]>,
    /// Rotation matrices, row-major.
    pub orientations: Vec<[[f64; 3]; 3]>,
    /// Diagonal of the scale matrix (units 1/length^2); all entries positive.
    pub scales: Vec<[f64; 3]>,
    pub log_young: Vec<f64>,
    pub nu_raw: Vec<f64>,
}

impl MaterialPrototypeSet {
    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn young(&self, p: usize) -> f64 {
        self.log_young[p].exp()
    }

    pub fn poisson(&self, p: usize) -> f64 {
        nu_from_raw(self.nu_raw[p])
    }

    /// Quadratic form Q_p = V_p^T Lambda_p V_p of prototype `p`.
    pub fn q_matrix(&self, p: usize) -> Mat3 {
        let v = Mat3::from_fn(|r, c| self.orientations[p][r][c]);
        let l = Mat3::from_diagonal(&Vec3::from(self.scales[p]));
        v.transpose() * l * v
    }

    pub fn center(&self, p: usize) -> Vec3 {
        Vec3::from(self.centers[p])
    }

    /// Place `count` prototypes at a seeded uniform draw of cloud points,
    /// with identity orientation and isotropic scale set from the mean
    /// nearest-prototype spacing. All prototypes start at (`young`, `nu`).
    pub fn uniform_in_cloud(
        points: &[Vec3],
        count: usize,
        young: f64,
        nu: f64,
        seed: u64,
    ) -> Result<Self> {
        if points.is_empty() || count == 0 {
            return Err(Error::Input("prototype placement needs points and count >= 1".into()));
        }
        let count = count.min(points.len());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut idx: Vec<usize> = sample(&mut rng, points.len(), count).into_iter().collect();
        idx.sort_unstable();
        let centers: Vec<[f64; 3]> = idx.iter().map(|&i| points[i].into()).collect();

        // mean nearest-neighbor spacing among centers sets the ellipsoid size
        let mut mean_nn = 0.0;
        if count > 1 {
            for (a, ca) in centers.iter().enumerate() {
                let mut best = f64::INFINITY;
                for (b, cb) in centers.iter().enumerate() {
                    if a == b {
                        continue;
                    }
                    let d2 = (Vec3::from(*ca) - Vec3::from(*cb)).norm_squared();
                    best = best.min(d2);
                }
                mean_nn += best.sqrt();
            }
            mean_nn /= count as f64;
        } else {
            // single prototype: scale from the cloud extent
            let lo = points.iter().fold(Vec3::repeat(f64::INFINITY), |a, p| a.inf(p));
            let hi = points.iter().fold(Vec3::repeat(f64::NEG_INFINITY), |a, p| a.sup(p));
            mean_nn = (hi - lo).norm().max(1e-9);
        }
        let q = 1.0 / (mean_nn * mean_nn).max(1e-18);
        Ok(MaterialPrototypeSet {
            orientations: vec![[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]; count],
            scales: vec![[q, q, q]; count],
            log_young: vec![young.ln(); count],
            nu_raw: vec![raw_from_nu(nu); count],
            centers,
        })
    }
}

/// Material blended down to per-point Lame parameters.
#[derive(Debug, Clone)]
pub struct PerPointMaterial {
    /// Row-stochastic N x P weights, row-major.
    pub weights: Vec<f64>,
    pub prototype_count: usize,
    pub young: Vec<f64>,
    pub poisson: Vec<f64>,
    pub mu: Vec<f64>,
    pub lambda: Vec<f64>,
}

impl PerPointMaterial {
    pub fn len(&self) -> usize {
        self.young.len()
    }

    pub fn weight(&self, n: usize, p: usize) -> f64 {
        self.weights[n * self.prototype_count + p]
    }
}

/// Squared Mahalanobis distance `(x - c)^T Q (x - c)`.
#[inline]
pub fn mahalanobis(x: Vec3, center: Vec3, q: &Mat3) -> f64 {
    let d = x - center;
    d.dot(&(q * d))
}

/// Softmax-of-negative-distance blend weights, N x P row-major.
///
/// Nearer prototypes receive larger weight; `sharpness` scales the distances
/// before the softmax.
pub fn prototype_weights(points: &[Vec3], protos: &MaterialPrototypeSet, sharpness: f64) -> Vec<f64> {
    let p_count = protos.len();
    let qs: Vec<Mat3> = (0..p_count).map(|p| protos.q_matrix(p)).collect();
    let centers: Vec<Vec3> = (0..p_count).map(|p| protos.center(p)).collect();
    let mut out = vec![0.0; points.len() * p_count];
    let mut logits = vec![0.0; p_count];
    for (n, x) in points.iter().enumerate() {
        let mut max_logit = f64::NEG_INFINITY;
        for p in 0..p_count {
            let l = -sharpness * mahalanobis(*x, centers[p], &qs[p]);
            logits[p] = l;
            max_logit = max_logit.max(l);
        }
        let mut sum = 0.0;
        for p in 0..p_count {
            let e = (logits[p] - max_logit).exp();
            out[n * p_count + p] = e;
            sum += e;
        }
        for p in 0..p_count {
            out[n * p_count + p] /= sum;
        }
    }
    out
}

/// Lame parameters from Young's modulus and Poisson's ratio.
pub fn lame_params(young: f64, nu: f64) -> Result<(f64, f64)> {
    if !(nu > -1.0 && nu < 0.5) {
        return Err(Error::Input(format!("poisson ratio {nu} outside (-1, 0.5)")));
    }
    if young <= 0.0 {
        return Err(Error::Input(format!("young's modulus {young} must be positive")));
    }
    let mu = young / (2.0 * (1.0 + nu));
    let lambda = young * nu / ((1.0 + nu) * (1.0 - 2.0 * nu));
    Ok((mu, lambda))
}

/// Blend prototype parameters through the weights and convert to Lame form.
pub fn blend_material(weights: Vec<f64>, protos: &MaterialPrototypeSet) -> Result<PerPointMaterial> {
    let p_count = protos.len();
    assert!(p_count > 0 && weights.len() % p_count == 0);
    let n = weights.len() / p_count;
    let e_p: Vec<f64> = (0..p_count).map(|p| protos.young(p)).collect();
    let nu_p: Vec<f64> = (0..p_count).map(|p| protos.poisson(p)).collect();
    let mut young = vec![0.0; n];
    let mut poisson = vec![0.0; n];
    let mut mu = vec![0.0; n];
    let mut lambda = vec![0.0; n];
    for i in 0..n {
        let row = &weights[i * p_count..(i + 1) * p_count];
        let e: f64 = row.iter().zip(&e_p).map(|(w, e)| w * e).sum();
        let nu: f64 = row.iter().zip(&nu_p).map(|(w, v)| w * v).sum();
        let (m, l) = lame_params(e, nu)?;
        young[i] = e;
        poisson[i] = nu;
        mu[i] = m;
        lambda[i] = l;
    }
    Ok(PerPointMaterial {
        weights,
        prototype_count: p_count,
        young,
        poisson,
        mu,
        lambda,
    })
}

/// Pull per-point Lame adjoints back to prototype parameter gradients.
///
/// Returns `(d_log_young, d_nu_raw)`, both of length P.
pub fn backprop_material(
    mat: &PerPointMaterial,
    protos: &MaterialPrototypeSet,
    mu_bar: &[f64],
    lambda_bar: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let p_count = protos.len();
    let mut d_log_young = vec![0.0; p_count];
    let mut d_nu_raw = vec![0.0; p_count];
    for n in 0..mat.len() {
        let e = mat.young[n];
        let nu = mat.poisson[n];
        let d = (1.0 + nu) * (1.0 - 2.0 * nu);
        let dmu_de = 1.0 / (2.0 * (1.0 + nu));
        let dmu_dnu = -e / (2.0 * (1.0 + nu) * (1.0 + nu));
        let dlam_de = nu / d;
        let dlam_dnu = e * (1.0 + 2.0 * nu * nu) / (d * d);
        let e_bar = mu_bar[n] * dmu_de + lambda_bar[n] * dlam_de;
        let nu_bar = mu_bar[n] * dmu_dnu + lambda_bar[n] * dlam_dnu;
        for p in 0..p_count {
            let w = mat.weight(n, p);
            d_log_young[p] += w * e_bar * protos.young(p);
            d_nu_raw[p] += w * nu_bar * d_nu_d_raw(protos.nu_raw[p]);
        }
    }
    (d_log_young, d_nu_raw)
}

/// Running count of inverted-element evaluations (det F <= 0).
pub static INVERSION_COUNT: std::sync::atomic::AtomicU64 = std::sync::atomic::AtomicU64::new(0);

/// Fixed Corotated strain energy density.
pub fn fixed_corotated_energy(f: &Mat3, mu: f64, lambda: f64) -> f64 {
    let j = f.determinant();
    if j <= 0.0 {
        INVERSION_COUNT.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
    }
    let (_, s, _) = svd_proper(f);
    let dev: f64 = s.iter().map(|x| (x - 1.0) * (x - 1.0)).sum();
    mu * dev + 0.5 * lambda * (j - 1.0) * (j - 1.0)
}

/// First Piola-Kirchhoff stress `P = 2 mu (F - R) + lambda (J - 1) J F^-T`.
///
/// `J F^-T` is evaluated as the cofactor matrix, which stays finite for
/// singular `F`.
pub fn pk1_stress(f: &Mat3, mu: f64, lambda: f64) -> Mat3 {
    if f.determinant() <= 0.0 {
        INVERSION_COUNT.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
    }
    let (r, _) = polar_decomp(f);
    let j = f.determinant();
    let cof = adjugate(f).transpose();
    2.0 * mu * (f - r) + lambda * (j - 1.0) * cof
}

/// VJP of the cofactor map: given adjoint `a_bar` of `cof(F)`, returns the
/// contribution to `F_bar`. Uses `cof(F)_ij = 1/2 e_ipq e_jrs F_pr F_qs`,
/// so `d cof_ij / d F_kl = e_ikq e_jls F_qs`.
fn cofactor_vjp(f: &Mat3, a_bar: &Mat3) -> Mat3 {
    // third index and sign of the permutation (i, k, third)
    const THIRD: [[usize; 3]; 3] = [[9, 2, 1], [2, 9, 0], [1, 0, 9]];
    const SIGN: [[f64; 3]; 3] = [[0.0, 1.0, -1.0], [-1.0, 0.0, 1.0], [1.0, -1.0, 0.0]];
    let mut out = Mat3::zeros();
    for k in 0..3 {
        for l in 0..3 {
            let mut acc = 0.0;
            for i in 0..3 {
                if i == k {
                    continue;
                }
                let q = THIRD[i][k];
                let si = SIGN[i][k];
                for j in 0..3 {
                    if j == l {
                        continue;
                    }
                    let s = THIRD[j][l];
                    let sj = SIGN[j][l];
                    acc += si * sj * a_bar[(i, j)] * f[(q, s)];
                }
            }
            out[(k, l)] = acc;
        }
    }
    out
}

/// Reverse-mode derivative of [`pk1_stress`]: given the output adjoint
/// `p_bar`, returns `(F_bar, mu_bar, lambda_bar)`.
///
/// The rotation sensitivity uses the closed-form polar-decomposition
/// derivative `dR = R skew(2 G^-1 axial(skew(R^T dF)))` with
/// `G = tr(S) I - S`; `G` is safeguarded when singular values nearly cancel.
pub fn pk1_vjp(f: &Mat3, mu: f64, lambda: f64, p_bar: &Mat3) -> (Mat3, f64, f64) {
    let (r, s) = polar_decomp(f);
    let j = f.determinant();
    let cof = adjugate(f).transpose();

    let mu_bar = 2.0 * (f - r).dot(p_bar);
    let lambda_bar = (j - 1.0) * cof.dot(p_bar);

    // direct F term
    let mut f_bar = 2.0 * mu * p_bar;

    // rotation term: R_bar = -2 mu * p_bar
    let g = Mat3::identity() * s.trace() - s;
    let mut det_g = g.determinant();
    if det_g.abs() < 1e-8 {
        det_g = if det_g >= 0.0 { 1e-8 } else { -1e-8 };
    }
    let g_inv = adjugate(&g).transpose() / det_g;
    let b = axial_of_skew_part(&(r.transpose() * (-2.0 * mu * p_bar)));
    f_bar += r * skew(&(2.0 * (g_inv * b)));

    // J term: dJ = <cof, dF>
    f_bar += lambda * cof.dot(p_bar) * cof;

    // cofactor term
    f_bar += lambda * (j - 1.0) * cofactor_vjp(f, p_bar);

    (f_bar, mu_bar, lambda_bar)
}
