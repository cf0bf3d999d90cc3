//! Small complex-number and Jones-vector helpers used by the optical model.

use core::ops::{Add, Mul, Neg, Sub};

#[allow(unused_imports)]
use num_traits::Float;

/// Complex value, `re + i im`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Cx {
    pub re: f64,
    pub im: f64,
}

impl Cx {
    pub const ZERO: Cx = Cx { re: 0.0, im: 0.0 };

    pub fn new(re: f64, im: f64) -> Self {
        Cx { re, im }
    }

    pub fn from_polar(mag: f64, phase: f64) -> Self {
        Cx::new(mag * phase.cos(), mag * phase.sin())
    }

    pub fn abs2(self) -> f64 {
        self.re * self.re + self.im * self.im
    }

    pub fn abs(self) -> f64 {
        self.abs2().sqrt()
    }

    pub fn arg(self) -> f64 {
        self.im.atan2(self.re)
    }

    pub fn conj(self) -> Self {
        Cx::new(self.re, -self.im)
    }

    pub fn scale(self, f: f64) -> Self {
        Cx::new(self.re * f, self.im * f)
    }

    /// Multiply by `e^{i phase}`.
    pub fn rotated(self, phase: f64) -> Self {
        self * Cx::from_polar(1.0, phase)
    }
}

impl Add for Cx {
    type Output = Cx;
    fn add(self, o: Cx) -> Cx {
        Cx::new(self.re + o.re, self.im + o.im)
    }
}

impl Sub for Cx {
    type Output = Cx;
    fn sub(self, o: Cx) -> Cx {
        Cx::new(self.re - o.re, self.im - o.im)
    }
}

impl Mul for Cx {
    type Output = Cx;
    fn mul(self, o: Cx) -> Cx {
        Cx::new(
            self.re * o.re - self.im * o.im,
            self.re * o.im + self.im * o.re,
        )
    }
}

impl Neg for Cx {
    type Output = Cx;
    fn neg(self) -> Cx {
        Cx::new(-self.re, -self.im)
    }
}

/// Two-polarization field amplitude: component `s` rides the signal
/// polarization axis, `r` the (orthogonal) reference axis.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Jones {
    pub s: Cx,
    pub r: Cx,
}

impl Jones {
    pub const ZERO: Jones = Jones { s: Cx::ZERO, r: Cx::ZERO };

    pub fn new(s: Cx, r: Cx) -> Self {
        Jones { s, r }
    }

    pub fn scale(self, f: f64) -> Self {
        Jones::new(self.s.scale(f), self.r.scale(f))
    }

    pub fn rotated(self, phase: f64) -> Self {
        Jones::new(self.s.rotated(phase), self.r.rotated(phase))
    }
}

/// 2x2 unitary acting on Jones vectors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolUnitary {
    pub m: [[Cx; 2]; 2],
}

impl PolUnitary {
    pub fn identity() -> Self {
        PolUnitary {
            m: [
                [Cx::new(1.0, 0.0), Cx::ZERO],
                [Cx::ZERO, Cx::new(1.0, 0.0)],
            ],
        }
    }

    /// Rotation by `angle` about the sigma_1 axis (45-degree fiber squeezer).
    pub fn rot_x(angle: f64) -> Self {
        let (c, s) = ((angle / 2.0).cos(), (angle / 2.0).sin());
        PolUnitary {
            m: [
                [Cx::new(c, 0.0), Cx::new(0.0, -s)],
                [Cx::new(0.0, -s), Cx::new(c, 0.0)],
            ],
        }
    }

    /// Rotation by `angle` about the sigma_2 axis (plane rotation).
    pub fn rot_y(angle: f64) -> Self {
        let (c, s) = ((angle / 2.0).cos(), (angle / 2.0).sin());
        PolUnitary {
            m: [
                [Cx::new(c, 0.0), Cx::new(-s, 0.0)],
                [Cx::new(s, 0.0), Cx::new(c, 0.0)],
            ],
        }
    }

    /// Rotation by `angle` about the sigma_3 axis (0-degree fiber squeezer).
    pub fn rot_z(angle: f64) -> Self {
        let (c, s) = ((angle / 2.0).cos(), (angle / 2.0).sin());
        PolUnitary {
            m: [
                [Cx::new(c, -s), Cx::ZERO],
                [Cx::ZERO, Cx::new(c, s)],
            ],
        }
    }

    /// `self * other` (apply `other` first).
    pub fn compose(&self, other: &PolUnitary) -> Self {
        let mut m = [[Cx::ZERO; 2]; 2];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = self.m[i][0] * other.m[0][j] + self.m[i][1] * other.m[1][j];
            }
        }
        PolUnitary { m }
    }

    pub fn apply(&self, v: &Jones) -> Jones {
        Jones::new(
            self.m[0][0] * v.s + self.m[0][1] * v.r,
            self.m[1][0] * v.s + self.m[1][1] * v.r,
        )
    }
}

/// Wrap an angle to `[-pi, pi)`.
pub fn wrap_angle(a: f64) -> f64 {
    let two_pi = 2.0 * core::f64::consts::PI;
    let mut w = a % two_pi;
    if w < -core::f64::consts::PI {
        w += two_pi;
    } else if w >= core::f64::consts::PI {
        w -= two_pi;
    }
    w
}
