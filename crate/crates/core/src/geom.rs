//! Small fixed-size vector types used for scene geometry.

use crate::num::Real;
use serde::{Deserialize, Serialize};
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2<T> {
    pub x: T,
    pub y: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3<T> {
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Real> Vec2<T> {
    pub const fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero())
    }

    pub fn norm(self) -> T {
        self.x.hypot(self.y)
    }

    pub fn extend(self, z: T) -> Vec3<T> {
        Vec3::new(self.x, self.y, z)
    }
}

impl<T: Real> Vec3<T> {
    pub const fn new(x: T, y: T, z: T) -> Self {
        Self { x, y, z }
    }

    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero(), T::zero())
    }

    pub fn unit_x() -> Self {
        Self::new(T::one(), T::zero(), T::zero())
    }

    pub fn unit_z() -> Self {
        Self::new(T::zero(), T::zero(), T::one())
    }

    pub fn dot(self, o: Self) -> T {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Self) -> Self {
        Self::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm_squared(self) -> T {
        self.dot(self)
    }

    pub fn norm(self) -> T {
        self.norm_squared().sqrt()
    }

    /// Unit vector in the same direction, or `None` for a (near) zero vector.
    pub fn try_normalize(self) -> Option<Self> {
        let n = self.norm();
        if n > T::epsilon() && n.is_finite() {
            Some(self / n)
        } else {
            None
        }
    }

    pub fn normalize(self) -> Self {
        self.try_normalize().expect("normalize of a zero vector")
    }

    pub fn distance(self, o: Self) -> T {
        (self - o).norm()
    }

    pub fn xy(self) -> Vec2<T> {
        Vec2::new(self.x, self.y)
    }

    pub fn lerp(self, o: Self, t: T) -> Self {
        self + (o - self) * t
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    /// Rotation about the world z axis.
    pub fn rotate_z(self, angle: T) -> Self {
        let (s, c) = angle.sin_cos();
        Self::new(c * self.x - s * self.y, s * self.x + c * self.y, self.z)
    }

    /// Any unit vector orthogonal to `self` (assumed unit).
    pub fn any_orthogonal(self) -> Self {
        let helper = if self.z.abs() < T::lit(0.9) {
            Self::unit_z()
        } else {
            Self::unit_x()
        };
        helper.cross(self).normalize()
    }
}

macro_rules! impl_vec_ops {
    ($ty:ident { $($f:ident),+ }) => {
        impl<T: Real> Add for $ty<T> {
            type Output = Self;
            fn add(self, o: Self) -> Self { Self { $($f: self.$f + o.$f),+ } }
        }
        impl<T: Real> AddAssign for $ty<T> {
            fn add_assign(&mut self, o: Self) { $(self.$f = self.$f + o.$f;)+ }
        }
        impl<T: Real> Sub for $ty<T> {
            type Output = Self;
            fn sub(self, o: Self) -> Self { Self { $($f: self.$f - o.$f),+ } }
        }
        impl<T: Real> Mul<T> for $ty<T> {
            type Output = Self;
            fn mul(self, s: T) -> Self { Self { $($f: self.$f * s),+ } }
        }
        impl<T: Real> Div<T> for $ty<T> {
            type Output = Self;
            fn div(self, s: T) -> Self { Self { $($f: self.$f / s),+ } }
        }
        impl<T: Real> Neg for $ty<T> {
            type Output = Self;
            fn neg(self) -> Self { Self { $($f: -self.$f),+ } }
        }
    };
}

impl_vec_ops!(Vec2 { x, y });
impl_vec_ops!(Vec3 { x, y, z });

/// Orthonormal rotation stored as its three columns.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation<T> {
    cols: [Vec3<T>; 3],
}

impl<T: Real> Rotation<T> {
    pub fn identity() -> Self {
        Self {
            cols: [
                Vec3::unit_x(),
                Vec3::new(T::zero(), T::one(), T::zero()),
                Vec3::unit_z(),
            ],
        }
    }

    /// Builds the frame `(forward, up × forward, up)` with `up` re-orthogonalised.
    fn frame(forward: Vec3<T>) -> [Vec3<T>; 3] {
        let up_hint = if forward.cross(Vec3::unit_z()).norm() > T::lit(1e-6) {
            Vec3::unit_z()
        } else {
            Vec3::unit_x()
        };
        let side = up_hint.cross(forward).normalize();
        let up = forward.cross(side);
        [forward, side, up]
    }

    /// Rotation taking direction `from` onto direction `to`, keeping the
    /// world-vertical reference plane of each direction aligned.
    pub fn aligning(from: Vec3<T>, to: Vec3<T>) -> Self {
        let a = Self::frame(from.normalize());
        let b = Self::frame(to.normalize());
        // R = B * A^T
        let mut cols = [Vec3::zero(); 3];
        for (j, col) in cols.iter_mut().enumerate() {
            let e = match j {
                0 => Vec3::unit_x(),
                1 => Vec3::new(T::zero(), T::one(), T::zero()),
                _ => Vec3::unit_z(),
            };
            let local = Vec3::new(a[0].dot(e), a[1].dot(e), a[2].dot(e));
            *col = b[0] * local.x + b[1] * local.y + b[2] * local.z;
        }
        Self { cols }
    }

    pub fn apply(&self, v: Vec3<T>) -> Vec3<T> {
        self.cols[0] * v.x + self.cols[1] * v.y + self.cols[2] * v.z
    }
}
