//! Operator construction in the electron-major basis.

use nalgebra::{Complex, Matrix2, Matrix4, Vector4};

pub type C64 = Complex<f64>;
pub type Mat2 = Matrix2<C64>;
pub type Mat4 = Matrix4<C64>;
pub type Vec4 = Vector4<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

pub fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Single spin-1/2 operators in the (↓, ↑) ordering.
pub fn half_x() -> Mat2 {
    Mat2::new(ZERO, c(0.5), c(0.5), ZERO)
}

pub fn half_y() -> Mat2 {
    Mat2::new(ZERO, C64::new(0.0, 0.5), C64::new(0.0, -0.5), ZERO)
}

pub fn half_z() -> Mat2 {
    Mat2::new(c(-0.5), ZERO, ZERO, c(0.5))
}

pub fn kron(a: &Mat2, b: &Mat2) -> Mat4 {
    Mat4::from_fn(|r, col| a[(r / 2, col / 2)] * b[(r % 2, col % 2)])
}

pub fn sx() -> Mat4 {
    kron(&half_x(), &Mat2::identity())
}
pub fn sy() -> Mat4 {
    kron(&half_y(), &Mat2::identity())
}
pub fn sz() -> Mat4 {
    kron(&half_z(), &Mat2::identity())
}
pub fn ix() -> Mat4 {
    kron(&Mat2::identity(), &half_x())
}
pub fn iy() -> Mat4 {
    kron(&Mat2::identity(), &half_y())
}
pub fn iz() -> Mat4 {
    kron(&Mat2::identity(), &half_z())
}

/// `m_z` eigenvalue (±1/2) of the electron in basis state `k`.
pub fn electron_mz(k: usize) -> f64 {
    if k / 2 == 1 {
        0.5
    } else {
        -0.5
    }
}

/// `m_z` eigenvalue (±1/2) of the nucleus in basis state `k`.
pub fn nuclear_mz(k: usize) -> f64 {
    if k % 2 == 1 {
        0.5
    } else {
        -0.5
    }
}

pub fn max_abs(m: &Mat4) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}
