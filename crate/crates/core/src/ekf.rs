//! Six-state UAV filter: velocity and position in the UGV-centred NED frame.
//!
//! ```text
//!  x = [v_N, v_E, v_D, r_N, r_E, r_D]
//! ```
//!
//! Dynamics are linear (constant velocity), so the error-state correction
//! `x <- x + K (z - h(x))` followed by a reset is the same computation as a
//! total-state EKF; that is what is implemented here.
//!
//! Every measurement Jacobian `H` is the derivative of the predicted
//! measurement `h(x)` with respect to the state. The published error-state
//! Jacobians for the UWB, camera and LIDAR differ from these by an overall
//! sign (their perturbation runs the other way). Flipping the sign of `H`
//! flips `K` as well, so `K H` and the covariance update are unchanged.
//!
//! Covariance updates use the Joseph form with the prior covariance:
//! `P <- (I - K H) P (I - K H)^T + K R K^T`, followed by symmetrization.

use nalgebra::{DMatrix, Matrix3, Matrix6, SMatrix, SVector, SymmetricEigen, Vector3, Vector6};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type StateVector = Vector6<f64>;
pub type Covariance = Matrix6<f64>;

/// Innovation covariances with a condition number above this are treated as
/// singular.
pub const MAX_INNOVATION_CONDITION: f64 = 1e12;
/// Minimum UAV-UGV distance for the range and bearing models.
pub const MIN_RANGE_M: f64 = 0.1;
/// Minimum |sin(elevation)| for the camera model.
pub const MIN_SIN_ELEVATION: f64 = 0.05;
/// Minimum cos(pitch) cos(roll) for the altimeter model.
pub const MIN_TILT_COSINE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum EkfError {
    #[error("innovation covariance is singular (condition number {condition:e})")]
    SingularInnovation { condition: f64 },
    #[error("attitude too steep for the altimeter model (cos pitch * cos roll = {cos_product})")]
    AttitudeSingularity { cos_product: f64 },
    #[error("UAV too close to the UGV for a range/bearing model (range {range} m)")]
    NearOrigin { range: f64 },
    #[error("line of sight too close to the camera horizon (sin elevation = {sin_elevation})")]
    HorizonSingularity { sin_elevation: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeliefState {
    pub x: StateVector,
    pub p: Covariance,
    pub t: f64,
}

impl BeliefState {
    /// Zero velocity at `position` with `P = I`.
    pub fn at_rest(position: Vector3<f64>) -> Self {
        let mut x = StateVector::zeros();
        x.fixed_rows_mut::<3>(3).copy_from(&position);
        BeliefState {
            x,
            p: Covariance::identity(),
            t: 0.0,
        }
    }

    pub fn velocity(&self) -> Vector3<f64> {
        self.x.fixed_rows::<3>(0).into_owned()
    }

    pub fn position(&self) -> Vector3<f64> {
        self.x.fixed_rows::<3>(3).into_owned()
    }

    pub fn set_velocity(&mut self, v: Vector3<f64>) {
        self.x.fixed_rows_mut::<3>(0).copy_from(&v);
    }

    pub fn position_covariance(&self) -> Matrix3<f64> {
        self.p.fixed_view::<3, 3>(3, 3).into_owned()
    }

    pub fn asymmetry(&self) -> f64 {
        (self.p - self.p.transpose()).abs().max()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        SymmetricEigen::new(self.p).eigenvalues.min()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Attitude {
    pub pitch: f64,
    pub roll: f64,
}

/// How the LIDAR noise is inflated when few points fall on the UAV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum GammaModel {
    Fixed {
        gamma: f64,
    },
    /// Point count falls off with the square of range, normalized to the
    /// count at `ref_range_m`; `gamma = clamp(N_ref / N, 1, max)`.
    RangeFalloff {
        ref_range_m: f64,
        max: f64,
    },
}

impl Default for GammaModel {
    fn default() -> Self {
        GammaModel::RangeFalloff {
            ref_range_m: 5.0,
            max: 100.0,
        }
    }
}

impl GammaModel {
    pub fn gamma(&self, range: f64) -> f64 {
        match *self {
            GammaModel::Fixed { gamma } => gamma.max(1.0),
            GammaModel::RangeFalloff { ref_range_m, max } => {
                let ratio = range / ref_range_m;
                (ratio * ratio).clamp(1.0, max.max(1.0))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseConfig {
    pub q: Covariance,
    pub r_alt: f64,
    pub r_uwb: f64,
    pub r_cam: Matrix3<f64>,
    pub r_lidar: Matrix3<f64>,
    pub gamma_model: GammaModel,
    /// Prediction step, seconds.
    pub ts: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            q: Covariance::from_diagonal(&Vector6::new(0.01, 0.01, 0.01, 1.0, 1.0, 1.0)),
            r_alt: 0.01,
            r_uwb: 0.01,
            r_cam: Matrix3::identity() * 1e-4,
            r_lidar: Matrix3::identity() * 0.0225,
            gamma_model: GammaModel::default(),
            ts: 1.0 / 50.0,
        }
    }
}

fn is_symmetric_psd<const N: usize>(m: &SMatrix<f64, N, N>) -> bool
where
    nalgebra::Const<N>: nalgebra::DimMin<nalgebra::Const<N>, Output = nalgebra::Const<N>>,
{
    if m.iter().any(|v| !v.is_finite()) {
        return false;
    }
    let scale = m.abs().max().max(1.0);
    if (m - m.transpose()).abs().max() > 1e-12 * scale {
        return false;
    }
    sym_eigenvalues(m).into_iter().fold(f64::INFINITY, f64::min) >= -1e-12 * scale
}

/// Eigenvalues of a symmetric matrix of any fixed size.
fn sym_eigenvalues<const N: usize>(m: &SMatrix<f64, N, N>) -> Vec<f64> {
    if N == 1 {
        return vec![m[(0, 0)]];
    }
    let dynamic = DMatrix::from_column_slice(N, N, m.as_slice());
    SymmetricEigen::new(dynamic).eigenvalues.iter().copied().collect()
}

impl NoiseConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !is_symmetric_psd(&self.q) {
            return Err("Q must be symmetric positive semidefinite".into());
        }
        if !is_symmetric_psd(&self.r_cam) {
            return Err("R_cam must be symmetric positive semidefinite".into());
        }
        if !is_symmetric_psd(&self.r_lidar) {
            return Err("R_lidar must be symmetric positive semidefinite".into());
        }
        if !(self.r_alt.is_finite() && self.r_alt >= 0.0) {
            return Err("r_alt must be a non-negative variance".into());
        }
        if !(self.r_uwb.is_finite() && self.r_uwb >= 0.0) {
            return Err("r_uwb must be a non-negative variance".into());
        }
        if !(self.ts.is_finite() && self.ts > 0.0) {
            return Err("prediction step must be positive".into());
        }
        match self.gamma_model {
            GammaModel::Fixed { gamma } if !(gamma.is_finite() && gamma >= 1.0) => {
                Err("fixed LIDAR gamma must be >= 1".into())
            }
            GammaModel::RangeFalloff { ref_range_m, max }
                if !(ref_range_m > 0.0 && max >= 1.0 && ref_range_m.is_finite() && max.is_finite()) =>
            {
                Err("LIDAR gamma falloff needs ref_range_m > 0 and max >= 1".into())
            }
            _ => Ok(()),
        }
    }
}

/// Constant-velocity transition `[[I, 0], [ts I, I]]` over `[v; r]`.
pub fn transition(ts: f64) -> Covariance {
    let mut phi = Covariance::identity();
    for i in 0..3 {
        phi[(3 + i, i)] = ts;
    }
    phi
}

pub fn predict(b: &BeliefState, cfg: &NoiseConfig) -> BeliefState {
    let phi = transition(cfg.ts);
    let p = phi * b.p * phi.transpose() + cfg.q;
    BeliefState {
        x: phi * b.x,
        p: (p + p.transpose()) * 0.5,
        t: b.t + cfg.ts,
    }
}

fn condition_number<const M: usize>(s: &SMatrix<f64, M, M>) -> f64
where
    nalgebra::Const<M>: nalgebra::DimMin<nalgebra::Const<M>, Output = nalgebra::Const<M>>,
{
    let eig = sym_eigenvalues(s);
    let (lo, hi) = eig.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), v| {
        (lo.min(v.abs()), hi.max(v.abs()))
    });
    if eig.iter().any(|&v| v <= 0.0) || lo == 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

/// `K = P H^T (H P H^T + R)^-1`.
pub fn kalman_gain<const M: usize>(
    p: &Covariance,
    h: &SMatrix<f64, M, 6>,
    r: &SMatrix<f64, M, M>,
) -> Result<SMatrix<f64, 6, M>, EkfError>
where
    nalgebra::Const<M>: nalgebra::DimMin<nalgebra::Const<M>, Output = nalgebra::Const<M>>,
{
    let s = h * p * h.transpose() + r;
    let s = (s + s.transpose()) * 0.5;
    let condition = condition_number(&s);
    if condition.is_nan() || condition > MAX_INNOVATION_CONDITION {
        return Err(EkfError::SingularInnovation { condition });
    }
    let s_inv = s
        .try_inverse()
        .ok_or(EkfError::SingularInnovation { condition })?;
    Ok(p * h.transpose() * s_inv)
}

pub fn joseph_update<const M: usize>(
    b: &BeliefState,
    h: &SMatrix<f64, M, 6>,
    r_eff: &SMatrix<f64, M, M>,
    innovation: &SVector<f64, M>,
) -> Result<BeliefState, EkfError>
where
    nalgebra::Const<M>: nalgebra::DimMin<nalgebra::Const<M>, Output = nalgebra::Const<M>>,
{
    let k = kalman_gain(&b.p, h, r_eff)?;
    let i_kh = Covariance::identity() - k * h;
    let p = i_kh * b.p * i_kh.transpose() + k * r_eff * k.transpose();
    Ok(BeliefState {
        x: b.x + k * innovation,
        p: (p + p.transpose()) * 0.5,
        t: b.t,
    })
}

// ---- measurement models -----------------------------------------------------

fn position_of(x: &StateVector) -> Vector3<f64> {
    x.fixed_rows::<3>(3).into_owned()
}

fn range_of(x: &StateVector) -> Result<f64, EkfError> {
    let range = position_of(x).norm();
    if range > MIN_RANGE_M {
        Ok(range)
    } else {
        Err(EkfError::NearOrigin { range })
    }
}

fn tilt_cosine(att: Attitude) -> Result<f64, EkfError> {
    let c = att.pitch.cos() * att.roll.cos();
    if c > MIN_TILT_COSINE {
        Ok(c)
    } else {
        Err(EkfError::AttitudeSingularity { cos_product: c })
    }
}

/// Slant distance to the ground seen by a body-fixed downward rangefinder.
pub fn altimeter_predict(x: &StateVector, att: Attitude) -> Result<f64, EkfError> {
    Ok(-x[5] / tilt_cosine(att)?)
}

pub fn altimeter_jacobian(att: Attitude) -> Result<SMatrix<f64, 1, 6>, EkfError> {
    let c = tilt_cosine(att)?;
    let mut h = SMatrix::<f64, 1, 6>::zeros();
    h[5] = -1.0 / c;
    Ok(h)
}

pub fn uwb_predict(x: &StateVector) -> Result<f64, EkfError> {
    range_of(x)
}

pub fn uwb_jacobian(x: &StateVector) -> Result<SMatrix<f64, 1, 6>, EkfError> {
    let d = range_of(x)?;
    let r = position_of(x);
    let mut h = SMatrix::<f64, 1, 6>::zeros();
    for i in 0..3 {
        h[3 + i] = r[i] / d;
    }
    Ok(h)
}

/// Sine of the line-of-sight elevation above the horizontal plane through
/// the UGV, `atan2(-r_D, |r_NE|)`.
pub fn camera_sin_elevation(x: &StateVector) -> Result<f64, EkfError> {
    let d = range_of(x)?;
    Ok(-x[5] / d)
}

/// Noise inflation `1 / sin(elevation)` with its horizon guard.
pub fn camera_noise_scale(x: &StateVector) -> Result<f64, EkfError> {
    let s = camera_sin_elevation(x)?;
    if s.abs() > MIN_SIN_ELEVATION {
        Ok(1.0 / s.abs())
    } else {
        Err(EkfError::HorizonSingularity { sin_elevation: s })
    }
}

pub fn camera_predict(x: &StateVector) -> Result<Vector3<f64>, EkfError> {
    let d = range_of(x)?;
    Ok(position_of(x) / d)
}

/// Jacobian of `r / |r|`: `(|r|^2 I - r r^T) / |r|^3` in the position columns.
pub fn camera_jacobian(x: &StateVector) -> Result<SMatrix<f64, 3, 6>, EkfError> {
    let d = range_of(x)?;
    let r = position_of(x);
    let block = (Matrix3::identity() * (d * d) - r * r.transpose()) / (d * d * d);
    let mut h = SMatrix::<f64, 3, 6>::zeros();
    h.fixed_view_mut::<3, 3>(0, 3).copy_from(&block);
    Ok(h)
}

pub fn lidar_predict(x: &StateVector) -> Vector3<f64> {
    position_of(x)
}

pub fn lidar_jacobian() -> SMatrix<f64, 3, 6> {
    let mut h = SMatrix::<f64, 3, 6>::zeros();
    h.fixed_view_mut::<3, 3>(0, 3).copy_from(&Matrix3::identity());
    h
}

pub fn altimeter_update(
    b: &BeliefState,
    z: f64,
    att: Attitude,
    cfg: &NoiseConfig,
) -> Result<BeliefState, EkfError> {
    let h = altimeter_jacobian(att)?;
    let innovation = SVector::<f64, 1>::new(z - altimeter_predict(&b.x, att)?);
    joseph_update(b, &h, &SMatrix::<f64, 1, 1>::new(cfg.r_alt), &innovation)
}

pub fn uwb_update(b: &BeliefState, z: f64, cfg: &NoiseConfig) -> Result<BeliefState, EkfError> {
    let h = uwb_jacobian(&b.x)?;
    let innovation = SVector::<f64, 1>::new(z - uwb_predict(&b.x)?);
    joseph_update(b, &h, &SMatrix::<f64, 1, 1>::new(cfg.r_uwb), &innovation)
}

pub fn camera_update(b: &BeliefState, z: &Vector3<f64>, cfg: &NoiseConfig) -> Result<BeliefState, EkfError> {
    let scale = camera_noise_scale(&b.x)?;
    let h = camera_jacobian(&b.x)?;
    let innovation = z - camera_predict(&b.x)?;
    joseph_update(b, &h, &(cfg.r_cam * scale), &innovation)
}

pub fn lidar_update(
    b: &BeliefState,
    z: &Vector3<f64>,
    gamma: f64,
    cfg: &NoiseConfig,
) -> Result<BeliefState, EkfError> {
    let gamma = gamma.max(1.0);
    let innovation = z - lidar_predict(&b.x);
    joseph_update(b, &lidar_jacobian(), &(cfg.r_lidar * gamma), &innovation)
}
