//! Gyroscope + accelerometer attitude fusion (Madgwick, IMU-only variant).
//!
//! Only the gravity direction is needed downstream; yaw is unobservable
//! without a magnetometer and is left to drift with the gyro.

use crate::geometry::{UnitQuaternion, Vec3};
use crate::{math, Error, Result};

/// Standard gravity, m/s^2.
pub const GRAVITY: f64 = 9.80665;

pub const DEFAULT_BETA: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImuSample {
    /// Body angular rate, rad/s.
    pub gyro: Vec3,
    /// Specific force in the body frame, m/s^2; a level sensor at rest reads
    /// `+g` on body z.
    pub accel: Vec3,
    /// Seconds since the previous sample.
    pub dt: f64,
}

impl ImuSample {
    pub fn validate(&self) -> Result<()> {
        if !self.gyro.is_finite() || !self.accel.is_finite() || !self.dt.is_finite() {
            return Err(Error::InvalidInput("IMU sample must be finite"));
        }
        if self.dt <= 0.0 {
            return Err(Error::InvalidInput("IMU sample dt must be positive"));
        }
        Ok(())
    }

    /// Accelerometer magnitude lies inside `(0.5 g, 1.5 g)`.
    pub fn accel_trusted(&self) -> bool {
        let n = self.accel.norm();
        n > 0.5 * GRAVITY && n < 1.5 * GRAVITY
    }
}

/// Body-to-world orientation and the gradient step gain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientationState {
    pub q: UnitQuaternion,
    pub beta: f64,
}

impl Default for OrientationState {
    fn default() -> Self {
        Self {
            q: UnitQuaternion::IDENTITY,
            beta: DEFAULT_BETA,
        }
    }
}

impl OrientationState {
    pub fn new(q: UnitQuaternion, beta: f64) -> Result<Self> {
        if !beta.is_finite() || beta < 0.0 {
            return Err(Error::InvalidInput("beta must be finite and non-negative"));
        }
        Ok(Self {
            q: q.normalize(),
            beta,
        })
    }

    /// Roll and pitch from a single accelerometer reading, zero yaw.
    ///
    /// Seeds the filter near the true attitude; starting from identity with
    /// the sensor upside down would sit on the objective's saddle point.
    pub fn from_accel(accel: Vec3, beta: f64) -> Result<Self> {
        if !accel.is_finite() || accel.norm() == 0.0 {
            return Err(Error::InvalidInput("accelerometer reading must be non-zero"));
        }
        let roll = math::atan2(accel.y, accel.z);
        let pitch = math::atan2(-accel.x, math::hypot(accel.y, accel.z));
        let q_roll = UnitQuaternion::from_axis_angle(Vec3::X, roll);
        let q_pitch = UnitQuaternion::from_axis_angle(Vec3::Y, pitch);
        Self::new(q_pitch * q_roll, beta)
    }

    /// Tilt from level in radians: angle between body z and world up.
    pub fn tilt(&self) -> f64 {
        let up = gravity_up(self);
        math::acos(up.z.clamp(-1.0, 1.0))
    }
}

/// One filter step. Non-finite samples are rejected and leave the caller's
/// state untouched.
pub fn madgwick_update(state: &OrientationState, s: &ImuSample) -> Result<OrientationState> {
    s.validate()?;
    let q = state.q;
    let (q0, q1, q2, q3) = (q.w, q.x, q.y, q.z);

    // q_dot = 1/2 q (x) (0, w)
    let (gx, gy, gz) = (s.gyro.x, s.gyro.y, s.gyro.z);
    let mut dq = [
        0.5 * (-q1 * gx - q2 * gy - q3 * gz),
        0.5 * (q0 * gx + q2 * gz - q3 * gy),
        0.5 * (q0 * gy - q1 * gz + q3 * gx),
        0.5 * (q0 * gz + q1 * gy - q2 * gx),
    ];

    if s.accel_trusted() && state.beta > 0.0 {
        let a = s.accel * (1.0 / s.accel.norm());
        // f = R(q)^T e_z - a, J its Jacobian in q
        let f1 = 2.0 * (q1 * q3 - q0 * q2) - a.x;
        let f2 = 2.0 * (q0 * q1 + q2 * q3) - a.y;
        let f3 = 2.0 * (0.5 - q1 * q1 - q2 * q2) - a.z;
        let grad = [
            -2.0 * q2 * f1 + 2.0 * q1 * f2,
            2.0 * q3 * f1 + 2.0 * q0 * f2 - 4.0 * q1 * f3,
            -2.0 * q0 * f1 + 2.0 * q3 * f2 - 4.0 * q2 * f3,
            2.0 * q1 * f1 + 2.0 * q2 * f2,
        ];
        let n = math::sqrt(grad.iter().map(|g| g * g).sum());
        if n > 0.0 && n.is_finite() {
            for (d, g) in dq.iter_mut().zip(grad) {
                *d -= state.beta * g / n;
            }
        }
    }

    let next = UnitQuaternion::new_normalize(
        q0 + s.dt * dq[0],
        q1 + s.dt * dq[1],
        q2 + s.dt * dq[2],
        q3 + s.dt * dq[3],
    );
    Ok(OrientationState { q: next, ..*state })
}

/// World up expressed in the body frame.
pub fn gravity_up(state: &OrientationState) -> Vec3 {
    state.q.inverse().rotate(Vec3::Z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::{FRAC_PI_2, PI};

    fn level(dt: f64) -> ImuSample {
        ImuSample {
            gyro: Vec3::ZERO,
            accel: Vec3::new(0.0, 0.0, GRAVITY),
            dt,
        }
    }

    #[test]
    fn equilibrium_stays_put() {
        let mut s = OrientationState::default();
        for _ in 0..100 {
            s = madgwick_update(&s, &level(0.01)).unwrap();
        }
        assert_eq!(s.q, UnitQuaternion::IDENTITY);
    }

    #[test]
    fn pure_gyro_spin() {
        let mut s = OrientationState::new(UnitQuaternion::IDENTITY, 0.0).unwrap();
        let sample = ImuSample {
            gyro: Vec3::new(0.0, 0.0, FRAC_PI_2),
            accel: Vec3::new(0.0, 0.0, GRAVITY),
            dt: 0.01,
        };
        for _ in 0..100 {
            s = madgwick_update(&s, &sample).unwrap();
        }
        let truth = UnitQuaternion::from_axis_angle(Vec3::Z, FRAC_PI_2);
        assert!(s.q.angle_to(&truth).to_degrees() < 0.5);
    }

    #[test]
    fn static_tilt_converges() {
        let q0 = UnitQuaternion::from_axis_angle(Vec3::X, 30f64.to_radians());
        let mut s = OrientationState::new(q0, 0.1).unwrap();
        let mut last = s.tilt();
        for k in 0..1000 {
            s = madgwick_update(&s, &level(0.01)).unwrap();
            let t = s.tilt();
            // monotone until the fixed-size step starts to chatter around level
            if last > 2.0 * 0.1 * 0.01 {
                assert!(t <= last + 1e-12, "step {k}: {t} > {last}");
            }
            last = t;
        }
        assert!(last.to_degrees() < 1.0);
    }

    #[test]
    fn untrusted_accel_skips_correction() {
        let q0 = UnitQuaternion::from_axis_angle(Vec3::X, 0.3);
        let s = OrientationState::new(q0, 0.5).unwrap();
        let free_fall = ImuSample {
            gyro: Vec3::ZERO,
            accel: Vec3::new(0.0, 0.0, 0.1),
            dt: 0.01,
        };
        assert_eq!(madgwick_update(&s, &free_fall).unwrap().q, s.q);
    }

    #[test]
    fn rejects_bad_samples() {
        let s = OrientationState::default();
        let mut bad = level(0.01);
        bad.gyro.x = f64::NAN;
        assert!(madgwick_update(&s, &bad).is_err());
        assert!(madgwick_update(&s, &level(0.0)).is_err());
        assert!(OrientationState::new(UnitQuaternion::IDENTITY, -1.0).is_err());
    }

    #[test]
    fn gravity_up_cases() {
        assert_eq!(gravity_up(&OrientationState::default()), Vec3::Z);
        let q = UnitQuaternion::from_axis_angle(Vec3::X, FRAC_PI_2);
        let up = gravity_up(&OrientationState::new(q, 0.1).unwrap());
        // R_x(90)^T e_z = (0, 1, 0)
        assert!((up - Vec3::new(0.0, 1.0, 0.0)).norm() < 1e-9);
        let expected = q.inverse().rotate(Vec3::Z);
        assert!((up - expected).norm() < 1e-12);
    }

    #[test]
    fn accel_seeding() {
        let s = OrientationState::from_accel(Vec3::new(0.0, 0.0, -GRAVITY), 0.1).unwrap();
        let up = gravity_up(&s);
        assert!((up - Vec3::new(0.0, 0.0, -1.0)).norm() < 1e-12);
        assert!((s.tilt() - PI).abs() < 1e-12);
        assert!((s.q.rotate(Vec3::X) - Vec3::X).norm() < 1e-12);

        let tilted = UnitQuaternion::from_axis_angle(Vec3::new(1.0, 1.0, 0.0), 0.4);
        let accel = tilted.inverse().rotate(Vec3::new(0.0, 0.0, GRAVITY));
        let s = OrientationState::from_accel(accel, 0.1).unwrap();
        assert!((gravity_up(&s) - accel * (1.0 / GRAVITY)).norm() < 1e-12);
    }
}
