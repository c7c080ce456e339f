//! Complex spherical harmonics with the Condon-Shortley phase.

use crate::error::{Error, Result};
use crate::scalar::C64;

const UNIT_TOL: f64 = 1e-9;

/// Associated Legendre `P_l^m(x)` for m >= 0, phase (-1)^m included.
fn legendre(l: usize, m: usize, x: f64) -> f64 {
    let somx2 = ((1.0 - x) * (1.0 + x)).max(0.0).sqrt();
    let mut pmm = 1.0;
    let mut fact = 1.0;
    for _ in 0..m {
        pmm *= -fact * somx2;
        fact += 2.0;
    }
    if l == m {
        return pmm;
    }
    let mut pmmp1 = x * (2 * m + 1) as f64 * pmm;
    if l == m + 1 {
        return pmmp1;
    }
    let mut pll = 0.0;
    for ll in (m + 2)..=l {
        pll = (x * (2 * ll - 1) as f64 * pmmp1 - (ll + m - 1) as f64 * pmm) / (ll - m) as f64;
        pmm = pmmp1;
        pmmp1 = pll;
    }
    pll
}

fn check_unit(dir: &[f64; 3]) -> Result<()> {
    let n = (dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]).sqrt();
    if (n - 1.0).abs() > UNIT_TOL {
        return Err(Error::NonUnitDirection(n));
    }
    Ok(())
}

pub fn sph_harm(l: usize, m: i64, dir: &[f64; 3]) -> Result<C64> {
    if m.unsigned_abs() as usize > l {
        return Err(Error::IndexOutOfRange { index: m.unsigned_abs() as usize, bound: l + 1 });
    }
    check_unit(dir)?;
    let ma = m.unsigned_abs() as usize;
    let x = dir[2].clamp(-1.0, 1.0);
    let phi = dir[1].atan2(dir[0]);
    let mut ratio = 1.0;
    for k in (l - ma + 1)..=(l + ma) {
        ratio /= k as f64;
    }
    let norm = ((2 * l + 1) as f64 / (4.0 * std::f64::consts::PI) * ratio).sqrt();
    let y = C64::from_polar(norm * legendre(l, ma, x), ma as f64 * phi);
    Ok(if m >= 0 {
        y
    } else if ma.is_multiple_of(2) {
        y.conj()
    } else {
        -y.conj()
    })
}

/// All `Y_lm` for l <= l_max, index `l*l + m + l`.
pub fn sph_harm_all(l_max: usize, dir: &[f64; 3]) -> Result<Vec<C64>> {
    let mut out = Vec::with_capacity((l_max + 1) * (l_max + 1));
    for l in 0..=l_max {
        for m in -(l as i64)..=(l as i64) {
            out.push(sph_harm(l, m, dir)?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn closed_values() {
        let y00 = sph_harm(0, 0, &[0.6, 0.0, 0.8]).unwrap();
        assert!((y00.re - 0.5 / PI.sqrt()).abs() < 1e-15);
        let y10 = sph_harm(1, 0, &[0.0, 0.0, 1.0]).unwrap();
        assert!((y10.re - (3.0 / (4.0 * PI)).sqrt()).abs() < 1e-15);
        let y11 = sph_harm(1, 1, &[1.0, 0.0, 0.0]).unwrap();
        assert!((y11.re + (3.0 / (8.0 * PI)).sqrt()).abs() < 1e-15);
        assert!(matches!(sph_harm(1, 0, &[1.0, 1.0, 0.0]), Err(Error::NonUnitDirection(_))));
    }

    #[test]
    fn addition_theorem() {
        let mut rng = crate::rng::seeded(8);
        for _ in 0..20 {
            let p = crate::rng::point(&mut rng, 1.0);
            let n = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
            let d = [p[0] / n, p[1] / n, p[2] / n];
            for l in 0..=3usize {
                let s: f64 = (-(l as i64)..=l as i64).map(|m| sph_harm(l, m, &d).unwrap().norm_sqr()).sum();
                assert!((s - (2 * l + 1) as f64 / (4.0 * PI)).abs() < 1e-12);
            }
        }
    }
}
