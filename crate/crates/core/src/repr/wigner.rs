//! Rotations and Wigner-D matrices.
//!
//! Euler angles are z-y-z and active: `R = Rz(alpha) Ry(beta) Rz(gamma)`.
//! `D_{m'm}(R) = exp(-i m' alpha) d_{m'm}(beta) exp(-i m gamma)`, rows and
//! columns ordered m = -l..=l.

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::Rng64;
use crate::scalar::C64;

pub type Mat3 = [[f64; 3]; 3];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rotation {
    m: Mat3,
}

fn rz(t: f64) -> Mat3 {
    let (s, c) = t.sin_cos();
    [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]]
}

fn ry(t: f64) -> Mat3 {
    let (s, c) = t.sin_cos();
    [[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]]
}

fn matmul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut o = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            o[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    o
}

impl Rotation {
    pub fn identity() -> Self {
        Rotation { m: rz(0.0) }
    }

    pub fn from_euler(alpha: f64, beta: f64, gamma: f64) -> Self {
        Rotation {
            m: matmul(&matmul(&rz(alpha), &ry(beta)), &rz(gamma)),
        }
    }

    pub fn about_z(theta: f64) -> Self {
        Rotation { m: rz(theta) }
    }

    /// Uniform random rotation (unit quaternion from three uniforms).
    pub fn random(rng: &mut Rng64) -> Self {
        let (u1, u2, u3): (f64, f64, f64) = (rng.gen(), rng.gen(), rng.gen());
        let tau = std::f64::consts::TAU;
        let a = (1.0 - u1).sqrt();
        let b = u1.sqrt();
        let (w, x, y, z) = (a * (tau * u2).sin(), a * (tau * u2).cos(), b * (tau * u3).sin(), b * (tau * u3).cos());
        Rotation {
            m: [
                [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - z * w), 2.0 * (x * z + y * w)],
                [2.0 * (x * y + z * w), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - x * w)],
                [2.0 * (x * z - y * w), 2.0 * (y * z + x * w), 1.0 - 2.0 * (x * x + y * y)],
            ],
        }
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.m
    }

    /// `self * other`: apply `other` first.
    pub fn compose(&self, other: &Rotation) -> Rotation {
        Rotation {
            m: matmul(&self.m, &other.m),
        }
    }

    pub fn inverse(&self) -> Rotation {
        let mut t = [[0.0; 3]; 3];
        for (i, row) in self.m.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                t[j][i] = *v;
            }
        }
        Rotation { m: t }
    }

    pub fn apply(&self, v: &[f64; 3]) -> [f64; 3] {
        let m = &self.m;
        [
            m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
            m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
            m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
        ]
    }

    /// z-y-z angles with beta in [0, pi]; gamma = 0 at the poles.
    pub fn euler(&self) -> (f64, f64, f64) {
        let m = &self.m;
        let beta = m[2][2].clamp(-1.0, 1.0).acos();
        let sb = beta.sin();
        if sb > 1e-12 {
            (m[1][2].atan2(m[0][2]), beta, m[2][1].atan2(-m[2][0]))
        } else if m[2][2] > 0.0 {
            (m[1][0].atan2(m[0][0]), 0.0, 0.0)
        } else {
            ((-m[1][0]).atan2(-m[0][0]), std::f64::consts::PI, 0.0)
        }
    }
}

fn fact(n: i64) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Wigner small-d matrix `d^l_{m'm}(beta)`.
pub fn wigner_small_d(l: usize, beta: f64) -> Vec<Vec<f64>> {
    let l = l as i64;
    let (s, c) = (beta / 2.0).sin_cos();
    let n = (2 * l + 1) as usize;
    let mut d = vec![vec![0.0; n]; n];
    for mp in -l..=l {
        for m in -l..=l {
            let pre = (fact(l + mp) * fact(l - mp) * fact(l + m) * fact(l - m)).sqrt();
            let kmin = 0.max(m - mp);
            let kmax = (l + m).min(l - mp);
            let mut sum = 0.0;
            for k in kmin..=kmax {
                let sign = if (k - m + mp) % 2 == 0 { 1.0 } else { -1.0 };
                let den = fact(l + m - k) * fact(k) * fact(l - k - mp) * fact(k - m + mp);
                sum += sign / den * c.powi((2 * l - 2 * k + m - mp) as i32) * s.powi((2 * k - m + mp) as i32);
            }
            d[(mp + l) as usize][(m + l) as usize] = pre * sum;
        }
    }
    d
}

pub fn wigner_d_euler(l: usize, alpha: f64, beta: f64, gamma: f64) -> Vec<Vec<C64>> {
    let small = wigner_small_d(l, beta);
    let li = l as i64;
    small
        .iter()
        .enumerate()
        .map(|(r, row)| {
            let mp = r as i64 - li;
            row.iter()
                .enumerate()
                .map(|(cidx, &v)| {
                    let m = cidx as i64 - li;
                    C64::from_polar(v, -(mp as f64) * alpha - (m as f64) * gamma)
                })
                .collect()
        })
        .collect()
}

/// `D^l(R)`, erroring beyond `l_max`.
pub fn wigner_d(l: usize, r: &Rotation, l_max: usize) -> Result<Vec<Vec<C64>>> {
    if l > l_max {
        return Err(Error::IndexOutOfRange { index: l, bound: l_max + 1 });
    }
    let (a, b, g) = r.euler();
    Ok(wigner_d_euler(l, a, b, g))
}

pub fn cmatmul(a: &[Vec<C64>], b: &[Vec<C64>]) -> Vec<Vec<C64>> {
    let n = a.len();
    let p = b[0].len();
    (0..n)
        .map(|i| (0..p).map(|j| (0..b.len()).map(|k| a[i][k] * b[k][j]).sum()).collect())
        .collect()
}

pub fn cmax_diff(a: &[Vec<C64>], b: &[Vec<C64>]) -> f64 {
    a.iter()
        .flatten()
        .zip(b.iter().flatten())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ident(n: usize) -> Vec<Vec<C64>> {
        (0..n)
            .map(|i| (0..n).map(|j| C64::new(if i == j { 1.0 } else { 0.0 }, 0.0)).collect())
            .collect()
    }

    #[test]
    fn identity_and_z_rotation() {
        for l in 0..4 {
            let d = wigner_d(l, &Rotation::identity(), 3).unwrap();
            assert!(cmax_diff(&d, &ident(2 * l + 1)) < 1e-14);
        }
        let th = 0.7;
        let d = wigner_d(1, &Rotation::about_z(th), 3).unwrap();
        for (i, m) in (-1i64..=1).enumerate() {
            assert!((d[i][i] - C64::from_polar(1.0, -(m as f64) * th)).norm() < 1e-14);
        }
        assert!(wigner_d(4, &Rotation::identity(), 3).is_err());
    }

    #[test]
    fn unitary_and_homomorphic() {
        let mut rng = crate::rng::seeded(2);
        for _ in 0..50 {
            let r1 = Rotation::random(&mut rng);
            let r2 = Rotation::random(&mut rng);
            for l in 0..=3 {
                let d1 = wigner_d(l, &r1, 3).unwrap();
                let dh: Vec<Vec<C64>> = (0..d1.len()).map(|i| (0..d1.len()).map(|j| d1[j][i].conj()).collect()).collect();
                assert!(cmax_diff(&cmatmul(&dh, &d1), &ident(2 * l + 1)) < 1e-10);
                let d2 = wigner_d(l, &r2, 3).unwrap();
                let d21 = wigner_d(l, &r2.compose(&r1), 3).unwrap();
                assert!(cmax_diff(&cmatmul(&d2, &d1), &d21) < 1e-9);
            }
        }
    }

    #[test]
    fn euler_round_trip() {
        let r = Rotation::from_euler(0.3, 1.1, -2.0);
        let (a, b, g) = r.euler();
        assert!((a - 0.3).abs() < 1e-12 && (b - 1.1).abs() < 1e-12 && (g + 2.0).abs() < 1e-12);
    }
}
