//! Object pose from 2D-3D correspondences.
//!
//! The minimal solver is the classical three-point problem: depths along the
//! three bearing rays satisfy a quartic, each admissible root gives a
//! camera-frame triangle that is aligned to the object-frame triangle with an
//! SVD. RANSAC samples four correspondences per iteration, uses the fourth to
//! pick among the quartic's solutions, and the winning consensus set is
//! polished with Gauss-Newton on the reprojection error.

use nalgebra::{DMatrix, Matrix3, Rotation3, UnitQuaternion, Vector2, Vector3, Vector6};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use super::{CameraIntrinsics, GeometryError, RigidPose};

/// One 3D object point paired with its pixel observation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correspondence {
    pub point3d: Vector3<f64>,
    pub point2d: Vector2<f64>,
    pub visible: bool,
}

impl Correspondence {
    pub fn new(point3d: Vector3<f64>, point2d: Vector2<f64>) -> Self {
        Self {
            point3d,
            point2d,
            visible: true,
        }
    }
}

/// RANSAC parameters; defaults are tuned for pixel-accurate point tracks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RansacConfig {
    pub inlier_threshold_px: f64,
    pub confidence: f64,
    pub max_iterations: usize,
    pub min_inlier_ratio: f64,
    pub seed: u64,
}

impl Default for RansacConfig {
    fn default() -> Self {
        Self {
            inlier_threshold_px: 4.0,
            confidence: 0.999,
            max_iterations: 500,
            min_inlier_ratio: 0.3,
            seed: 0,
        }
    }
}

/// Estimated object-to-camera pose with its supporting correspondences.
#[derive(Debug, Clone, PartialEq)]
pub struct PnpResult {
    pub pose_obj_to_cam: RigidPose,
    /// Indices into the input correspondence slice, ascending.
    pub inliers: Vec<usize>,
    /// Root mean square reprojection error over the inliers, in pixels.
    pub reprojection_rmse: f64,
}

/// Rotation of the object in the world frame, given the camera-to-world pose.
pub fn world_rotation(pnp: &PnpResult, camera_pose: &RigidPose) -> UnitQuaternion<f64> {
    camera_pose.rotation * pnp.pose_obj_to_cam.rotation
}

const COLLINEARITY_TOL: f64 = 1e-8;
const GN_MAX_ITERATIONS: usize = 20;
const GN_STEP_TOL: f64 = 1e-10;

/// Estimates the object-to-camera pose from the visible correspondences.
pub fn solve_pnp_ransac(
    correspondences: &[Correspondence],
    intrinsics: &CameraIntrinsics,
    config: &RansacConfig,
) -> Result<PnpResult, GeometryError> {
    intrinsics.validate()?;
    let usable: Vec<(usize, Vector3<f64>, Vector2<f64>)> = correspondences
        .iter()
        .enumerate()
        .filter(|(_, c)| c.visible)
        .map(|(i, c)| (i, c.point3d, c.point2d))
        .collect();
    let n = usable.len();
    if n < 4 {
        return Err(GeometryError::TooFewPoints(n));
    }
    if points_are_collinear(usable.iter().map(|(_, p, _)| *p)) {
        return Err(GeometryError::NoConsensus(
            "3D points are collinear".to_string(),
        ));
    }

    let bearings: Vec<Vector3<f64>> = usable
        .iter()
        .map(|(_, _, px)| intrinsics.bearing(px))
        .collect();

    let mut rng = ChaCha12Rng::seed_from_u64(config.seed);
    let min_inliers = 4usize.max((config.min_inlier_ratio * n as f64).ceil() as usize);

    let mut best: Option<(Vec<usize>, f64, RigidPose)> = None;
    let mut needed = config.max_iterations;
    let mut iter = 0;
    while iter < needed.min(config.max_iterations) {
        iter += 1;
        let sample = rand::seq::index::sample(&mut rng, n, 4).into_vec();
        let pts: Vec<Vector3<f64>> = sample.iter().map(|&i| usable[i].1).collect();
        if sample_is_degenerate(&pts) {
            continue;
        }
        let candidates = p3p_grunert(
            &[pts[0], pts[1], pts[2]],
            &[bearings[sample[0]], bearings[sample[1]], bearings[sample[2]]],
        );
        // The fourth correspondence picks among the up-to-four P3P solutions.
        let probe3d = usable[sample[3]].1;
        let probe2d = usable[sample[3]].2;
        let mut pose = None;
        let mut pose_err = f64::INFINITY;
        for cand in candidates {
            if let Some(e) = reprojection_error(&cand, intrinsics, &probe3d, &probe2d) {
                if e < pose_err {
                    pose_err = e;
                    pose = Some(cand);
                }
            }
        }
        let Some(pose) = pose else { continue };

        let (inliers, sq_sum) = classify_inliers(&pose, intrinsics, &usable, config);
        let better = match &best {
            None => !inliers.is_empty(),
            Some((bi, bsq, _)) => {
                inliers.len() > bi.len() || (inliers.len() == bi.len() && sq_sum < *bsq)
            }
        };
        if better && inliers.len() >= 4 {
            let ratio = inliers.len() as f64 / n as f64;
            needed = iterations_for_confidence(config.confidence, ratio, config.max_iterations);
            best = Some((inliers, sq_sum, pose));
        }
    }

    let Some((inliers, sq_sum, pose)) = best else {
        return Err(GeometryError::NoConsensus(format!(
            "no model found in {iter} iterations"
        )));
    };
    if inliers.len() < min_inliers {
        return Err(GeometryError::NoConsensus(format!(
            "best model has {} inliers, need {min_inliers}",
            inliers.len()
        )));
    }

    // Polish on the consensus set, reclassify with the polished pose, and
    // polish once more in case the support set grew.
    let mut final_pose = pose;
    let mut final_inliers = inliers;
    let mut final_sq = sq_sum;
    for _ in 0..2 {
        let support: Vec<(Vector3<f64>, Vector2<f64>)> = final_inliers
            .iter()
            .map(|&i| (usable[i].1, usable[i].2))
            .collect();
        let refined = refine_pose(&final_pose, &support, intrinsics);
        let (refined_inliers, refined_sq) = classify_inliers(&refined, intrinsics, &usable, config);
        if refined_inliers.len() > final_inliers.len()
            || (refined_inliers.len() == final_inliers.len() && refined_sq <= final_sq)
        {
            final_pose = refined;
            final_inliers = refined_inliers;
            final_sq = refined_sq;
        } else {
            break;
        }
    }

    let rmse = (final_sq / final_inliers.len() as f64).sqrt();
    Ok(PnpResult {
        pose_obj_to_cam: final_pose,
        inliers: final_inliers.iter().map(|&i| usable[i].0).collect(),
        reprojection_rmse: rmse,
    })
}

/// True when the centered point cloud has rank below two.
fn points_are_collinear(points: impl Iterator<Item = Vector3<f64>> + Clone) -> bool {
    let pts: Vec<Vector3<f64>> = points.collect();
    let centroid = pts.iter().sum::<Vector3<f64>>() / pts.len() as f64;
    let mut m = DMatrix::<f64>::zeros(pts.len(), 3);
    for (i, p) in pts.iter().enumerate() {
        m.set_row(i, &(p - centroid).transpose());
    }
    let sv = m.singular_values();
    sv.len() < 2 || sv[1] < COLLINEARITY_TOL
}

fn sample_is_degenerate(pts: &[Vector3<f64>]) -> bool {
    for i in 0..pts.len() {
        for j in (i + 1)..pts.len() {
            if (pts[i] - pts[j]).norm_squared() < 1e-16 {
                return true;
            }
        }
    }
    // The minimal solver works on the first three; reject a flat triangle.
    let cross = (pts[1] - pts[0]).cross(&(pts[2] - pts[0]));
    cross.norm() < COLLINEARITY_TOL
}

fn classify_inliers(
    pose: &RigidPose,
    intrinsics: &CameraIntrinsics,
    usable: &[(usize, Vector3<f64>, Vector2<f64>)],
    config: &RansacConfig,
) -> (Vec<usize>, f64) {
    let mut inliers = Vec::new();
    let mut sq_sum = 0.0;
    for (i, (_, p3, p2)) in usable.iter().enumerate() {
        if let Some(e) = reprojection_error(pose, intrinsics, p3, p2) {
            if e < config.inlier_threshold_px {
                inliers.push(i);
                sq_sum += e * e;
            }
        }
    }
    (inliers, sq_sum)
}

fn reprojection_error(
    pose: &RigidPose,
    intrinsics: &CameraIntrinsics,
    point3d: &Vector3<f64>,
    point2d: &Vector2<f64>,
) -> Option<f64> {
    let p_cam = pose.transform_point(point3d);
    match intrinsics.project_camera_point(&p_cam) {
        Ok(px) => Some((px - point2d).norm()),
        Err(_) => None,
    }
}

fn iterations_for_confidence(confidence: f64, inlier_ratio: f64, cap: usize) -> usize {
    if inlier_ratio >= 1.0 {
        return 1;
    }
    let denom = (1.0 - inlier_ratio.powi(4)).ln();
    if denom >= 0.0 {
        return cap;
    }
    let needed = ((1.0 - confidence).ln() / denom).ceil();
    if needed.is_finite() && needed >= 0.0 {
        (needed as usize).clamp(1, cap)
    } else {
        cap
    }
}

/// Grunert's solution of the three-point problem.
///
/// `ps` are object-frame points, `fs` unit bearings in the camera frame.
/// Returns every pose with all three depths positive; the caller
/// disambiguates with extra correspondences.
fn p3p_grunert(ps: &[Vector3<f64>; 3], fs: &[Vector3<f64>; 3]) -> Vec<RigidPose> {
    let aa = (ps[1] - ps[2]).norm_squared();
    let bb = (ps[0] - ps[2]).norm_squared();
    let cc = (ps[0] - ps[1]).norm_squared();
    if bb < 1e-16 || aa < 1e-16 || cc < 1e-16 {
        return Vec::new();
    }
    let cos_alpha = fs[1].dot(&fs[2]);
    let cos_beta = fs[0].dot(&fs[2]);
    let cos_gamma = fs[0].dot(&fs[1]);

    let m = aa / bb;
    let n = cc / bb;

    // With s2 = u*s1 and s3 = v*s1 the three law-of-cosines constraints
    // reduce to u = N(v)/D(v) and a quartic in v.
    let q_poly = [1.0, -2.0 * cos_beta, 1.0];
    let mut n_poly = scale(&q_poly, m - n);
    n_poly[0] += 1.0;
    n_poly[2] -= 1.0;
    let d_poly = [2.0 * cos_gamma, -2.0 * cos_alpha];

    let dd = poly_mul(&d_poly, &d_poly);
    let mut quartic = poly_mul(&n_poly, &n_poly);
    quartic = poly_sub(&quartic, &scale_vec(&poly_mul(&n_poly, &d_poly), 2.0 * cos_gamma));
    quartic = poly_add(&quartic, &dd);
    quartic = poly_sub(&quartic, &scale_vec(&poly_mul(&q_poly, &dd), n));

    let mut poses = Vec::new();
    for v in real_roots(&quartic) {
        if v <= 0.0 {
            continue;
        }
        let d_val = d_poly[0] + d_poly[1] * v;
        if d_val.abs() < 1e-12 {
            continue;
        }
        let n_val = n_poly[0] + n_poly[1] * v + n_poly[2] * v * v;
        let u = n_val / d_val;
        if u <= 0.0 {
            continue;
        }
        let q_val = 1.0 + v * v - 2.0 * v * cos_beta;
        if q_val <= 1e-16 {
            continue;
        }
        let s1 = (bb / q_val).sqrt();
        let cam_pts = [s1 * fs[0], u * s1 * fs[1], v * s1 * fs[2]];
        poses.push(align_point_triples(ps, &cam_pts));
    }
    poses
}

/// Least-squares rigid alignment mapping `src` onto `dst` (Kabsch).
fn align_point_triples(src: &[Vector3<f64>; 3], dst: &[Vector3<f64>; 3]) -> RigidPose {
    let cs = (src[0] + src[1] + src[2]) / 3.0;
    let cd = (dst[0] + dst[1] + dst[2]) / 3.0;
    let mut h = Matrix3::zeros();
    for k in 0..3 {
        h += (src[k] - cs) * (dst[k] - cd).transpose();
    }
    let svd = h.svd(true, true);
    let u = svd.u.unwrap();
    let v_t = svd.v_t.unwrap();
    let mut d = Matrix3::identity();
    d[(2, 2)] = (v_t.transpose() * u.transpose()).determinant().signum();
    let r = v_t.transpose() * d * u.transpose();
    let rotation = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(r));
    let translation = cd - r * cs;
    RigidPose::new(rotation, translation)
}

/// Gauss-Newton on reprojection error with a left-multiplied twist update.
fn refine_pose(
    initial: &RigidPose,
    points: &[(Vector3<f64>, Vector2<f64>)],
    intrinsics: &CameraIntrinsics,
) -> RigidPose {
    let mut pose = *initial;
    let mut last_err = total_squared_error(&pose, points, intrinsics);
    for _ in 0..GN_MAX_ITERATIONS {
        let mut jtj = nalgebra::Matrix6::<f64>::zeros();
        let mut jtr = Vector6::<f64>::zeros();
        for (p3, p2) in points {
            let pc = pose.transform_point(p3);
            if pc.z <= 1e-12 {
                continue;
            }
            let inv_z = 1.0 / pc.z;
            let proj = Vector2::new(
                intrinsics.fx * pc.x * inv_z + intrinsics.cx,
                intrinsics.fy * pc.y * inv_z + intrinsics.cy,
            );
            let r = proj - p2;
            // d(pixel)/d(camera point)
            let j_proj = nalgebra::Matrix2x3::new(
                intrinsics.fx * inv_z,
                0.0,
                -intrinsics.fx * pc.x * inv_z * inv_z,
                0.0,
                intrinsics.fy * inv_z,
                -intrinsics.fy * pc.y * inv_z * inv_z,
            );
            // d(camera point)/d(twist), translation block then rotation block
            let mut j_point = nalgebra::Matrix3x6::zeros();
            j_point
                .view_mut((0, 0), (3, 3))
                .copy_from(&Matrix3::identity());
            j_point.view_mut((0, 3), (3, 3)).copy_from(&skew(&-pc));
            let j = j_proj * j_point;
            jtj += j.transpose() * j;
            jtr += j.transpose() * r;
        }
        let step = match nalgebra::Cholesky::new(jtj) {
            Some(ch) => ch.solve(&(-jtr)),
            None => match jtj.lu().solve(&(-jtr)) {
                Some(s) => s,
                None => break,
            },
        };
        let delta = RigidPose::new(
            UnitQuaternion::from_scaled_axis(Vector3::new(step[3], step[4], step[5])),
            Vector3::new(step[0], step[1], step[2]),
        );
        let candidate = delta.compose(&pose);
        let err = total_squared_error(&candidate, points, intrinsics);
        if err > last_err {
            break;
        }
        pose = candidate;
        last_err = err;
        if step.norm() < GN_STEP_TOL {
            break;
        }
    }
    pose
}

fn total_squared_error(
    pose: &RigidPose,
    points: &[(Vector3<f64>, Vector2<f64>)],
    intrinsics: &CameraIntrinsics,
) -> f64 {
    points
        .iter()
        .map(|(p3, p2)| match reprojection_error(pose, intrinsics, p3, p2) {
            Some(e) => e * e,
            None => 1e12,
        })
        .sum()
}

fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

fn scale(p: &[f64; 3], s: f64) -> [f64; 3] {
    [p[0] * s, p[1] * s, p[2] * s]
}

fn scale_vec(p: &[f64], s: f64) -> Vec<f64> {
    p.iter().map(|c| c * s).collect()
}

fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, ca) in a.iter().enumerate() {
        for (j, cb) in b.iter().enumerate() {
            out[i + j] += ca * cb;
        }
    }
    out
}

fn poly_add(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len().max(b.len())];
    for (i, c) in a.iter().enumerate() {
        out[i] += c;
    }
    for (i, c) in b.iter().enumerate() {
        out[i] += c;
    }
    out
}

fn poly_sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    poly_add(a, &scale_vec(b, -1.0))
}

/// Real roots of a polynomial (ascending coefficients) via the companion matrix.
fn real_roots(coeffs: &[f64]) -> Vec<f64> {
    let mut c = coeffs.to_vec();
    while let Some(&last) = c.last() {
        if last.abs() < 1e-14 && c.len() > 1 {
            c.pop();
        } else {
            break;
        }
    }
    let degree = c.len() - 1;
    if degree == 0 {
        return Vec::new();
    }
    if degree == 1 {
        return vec![-c[0] / c[1]];
    }
    let lead = c[degree];
    let mut companion = DMatrix::<f64>::zeros(degree, degree);
    for i in 1..degree {
        companion[(i, i - 1)] = 1.0;
    }
    for i in 0..degree {
        companion[(i, degree - 1)] = -c[i] / lead;
    }
    let eig = companion.complex_eigenvalues();
    eig.iter()
        .filter(|z| z.im.abs() <= 1e-8 * z.re.abs().max(1.0))
        .map(|z| z.re)
        .collect()
}
