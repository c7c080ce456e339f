//! Point-cloud layers with Clebsch-Gordan coefficients built by lowering
//! operators and spherical harmonics from Cartesian polynomials.

use std::collections::HashMap;
use std::f64::consts::PI;

use crate::scalar::C64;

/// Clebsch-Gordan tables for integer spins, each pair `(j1, j2)` built by
/// lowering the stretched state and Gram-Schmidt on the top states.
#[derive(Clone, Debug, Default)]
pub struct CgLowering {
    tables: HashMap<(i64, i64), HashMap<(i64, i64), Vec<f64>>>,
}

fn basis_index(j1: i64, j2: i64, m1: i64, m2: i64) -> usize {
    ((m1 + j1) * (2 * j2 + 1) + (m2 + j2)) as usize
}

fn table(j1: i64, j2: i64) -> HashMap<(i64, i64), Vec<f64>> {
    let dim = ((2 * j1 + 1) * (2 * j2 + 1)) as usize;
    let lower = |v: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; dim];
        for m1 in -j1..=j1 {
            for m2 in -j2..=j2 {
                let c = v[basis_index(j1, j2, m1, m2)];
                if c == 0.0 {
                    continue;
                }
                if m1 > -j1 {
                    let f = ((j1 * (j1 + 1) - m1 * (m1 - 1)) as f64).sqrt();
                    out[basis_index(j1, j2, m1 - 1, m2)] += f * c;
                }
                if m2 > -j2 {
                    let f = ((j2 * (j2 + 1) - m2 * (m2 - 1)) as f64).sqrt();
                    out[basis_index(j1, j2, m1, m2 - 1)] += f * c;
                }
            }
        }
        out
    };
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let mut states: HashMap<(i64, i64), Vec<f64>> = HashMap::new();
    for jj in ((j1 - j2).abs()..=(j1 + j2)).rev() {
        // Top state |jj, jj>, orthogonal to every |J, jj> with J > jj.
        let mut best: Option<Vec<f64>> = None;
        for m1 in -j1..=j1 {
            let m2 = jj - m1;
            if m2.abs() > j2 {
                continue;
            }
            let mut v = vec![0.0; dim];
            v[basis_index(j1, j2, m1, m2)] = 1.0;
            for big in (jj + 1)..=(j1 + j2) {
                let u = &states[&(big, jj)];
                let p = dot(&v, u);
                v.iter_mut().zip(u).for_each(|(a, b)| *a -= p * b);
            }
            if best.as_ref().is_none_or(|b| dot(&v, &v) > dot(b, b)) {
                best = Some(v);
            }
        }
        let mut v = best.expect("top state exists");
        let norm = dot(&v, &v).sqrt();
        let sign = if v[basis_index(j1, j2, j1, jj - j1)] < 0.0 { -1.0 } else { 1.0 };
        v.iter_mut().for_each(|a| *a *= sign / norm);
        states.insert((jj, jj), v.clone());
        for m in ((-jj + 1)..=jj).rev() {
            let f = ((jj * (jj + 1) - m * (m - 1)) as f64).sqrt();
            v = lower(&v).into_iter().map(|a| a / f).collect();
            states.insert((jj, m - 1), v.clone());
        }
    }
    states
}

impl CgLowering {
    pub fn new() -> Self {
        Self::default()
    }

    /// `<j1 m1; j2 m2 | j m>`.
    pub fn get(&mut self, j1: i64, m1: i64, j2: i64, m2: i64, j: i64, m: i64) -> f64 {
        if m1.abs() > j1 || m2.abs() > j2 || m.abs() > j || m1 + m2 != m || j < (j1 - j2).abs() || j > j1 + j2 {
            return 0.0;
        }
        let t = self.tables.entry((j1, j2)).or_insert_with(|| table(j1, j2));
        t[&(j, m)][basis_index(j1, j2, m1, m2)]
    }
}

/// Convenience wrapper building a fresh table.
pub fn cg_lowering(j1: i64, m1: i64, j2: i64, m2: i64, j: i64, m: i64) -> f64 {
    CgLowering::new().get(j1, m1, j2, m2, j, m)
}

/// `Y_l^m` on a unit vector for `l <= 3`, Condon-Shortley phase.
pub fn sph_harm_cartesian(l: usize, m: i64, r: [f64; 3]) -> C64 {
    let (x, y, z) = (r[0], r[1], r[2]);
    let p = C64::new(x, y);
    let q = C64::new(x, -y);
    let s = |v: f64| v.sqrt();
    match (l, m) {
        (0, 0) => C64::new(0.5 * s(1.0 / PI), 0.0),
        (1, -1) => q * (0.5 * s(3.0 / (2.0 * PI))),
        (1, 0) => C64::new(0.5 * s(3.0 / PI) * z, 0.0),
        (1, 1) => p * (-0.5 * s(3.0 / (2.0 * PI))),
        (2, -2) => q * q * (0.25 * s(15.0 / (2.0 * PI))),
        (2, -1) => q * (0.5 * s(15.0 / (2.0 * PI)) * z),
        (2, 0) => C64::new(0.25 * s(5.0 / PI) * (3.0 * z * z - 1.0), 0.0),
        (2, 1) => p * (-0.5 * s(15.0 / (2.0 * PI)) * z),
        (2, 2) => p * p * (0.25 * s(15.0 / (2.0 * PI))),
        (3, -3) => q * q * q * (0.125 * s(35.0 / PI)),
        (3, -2) => q * q * (0.25 * s(105.0 / (2.0 * PI)) * z),
        (3, -1) => q * (0.125 * s(21.0 / PI) * (5.0 * z * z - 1.0)),
        (3, 0) => C64::new(0.25 * s(7.0 / PI) * (5.0 * z * z * z - 3.0 * z), 0.0),
        (3, 1) => p * (-0.125 * s(21.0 / PI) * (5.0 * z * z - 1.0)),
        (3, 2) => p * p * (0.25 * s(105.0 / (2.0 * PI)) * z),
        (3, 3) => p * p * p * (-0.125 * s(35.0 / PI)),
        _ => panic!("cartesian harmonics cover l <= 3 and |m| <= l"),
    }
}

/// Gaussians with centres spread over `[0, cutoff]` and width `cutoff / count`.
pub fn gaussian_basis(r: f64, count: usize, cutoff: f64) -> Vec<f64> {
    let width = cutoff / count as f64;
    let mut out = Vec::with_capacity(count);
    for j in 0..count {
        let c = if count == 1 { cutoff / 2.0 } else { cutoff * j as f64 / (count as f64 - 1.0) };
        let t = (r - c) / width;
        out.push((-0.5 * t * t).exp());
    }
    out
}

fn rel(a: [f64; 3], b: [f64; 3]) -> Option<(f64, [f64; 3])> {
    let v = [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    (n > 1e-12).then(|| (n, [v[0] / n, v[1] / n, v[2] / n]))
}

fn idx(l: i64, m: i64) -> usize {
    (l * l + l + m) as usize
}

/// Kernel components `R^l(r) Y^l_m(dir)` in `(l, m)` order.
fn kernel(weights: &[Vec<f64>], count: usize, cutoff: f64, r: f64, dir: [f64; 3]) -> Vec<C64> {
    let g = gaussian_basis(r, count, cutoff);
    let mut out = Vec::new();
    for (l, w) in weights.iter().enumerate() {
        let rl: f64 = w.iter().zip(&g).map(|(a, b)| a * b).sum();
        for m in -(l as i64)..=(l as i64) {
            out.push(sph_harm_cartesian(l, m, dir) * rl);
        }
    }
    out
}

/// `sum C(l1 m1, l2 m2 | l m) k_(l1 m1) s_(l2 m2)` truncated at `l_max`.
fn cg_product(cg: &mut CgLowering, l_max: i64, k: &[C64], s: &[C64]) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); ((l_max + 1) * (l_max + 1)) as usize];
    for l1 in 0..=l_max {
        for m1 in -l1..=l1 {
            let a = k[idx(l1, m1)];
            if a == C64::new(0.0, 0.0) {
                continue;
            }
            for l2 in 0..=l_max {
                for m2 in -l2..=l2 {
                    let b = s[idx(l2, m2)];
                    for l in (l1 - l2).abs()..=(l1 + l2).min(l_max) {
                        let m = m1 + m2;
                        if m.abs() <= l {
                            out[idx(l, m)] += a * b * cg.get(l1, m1, l2, m2, l, m);
                        }
                    }
                }
            }
        }
    }
    out
}

/// `out_a = sum_(b != a) K(r_a - r_b) (x) s_b` with `radial[l][j]` weights.
pub fn tfn(points: &[[f64; 3]], feats: &[Vec<C64>], radial: &[Vec<f64>], cutoff: f64) -> Vec<Vec<C64>> {
    let l_max = radial.len() as i64 - 1;
    let count = radial[0].len();
    let mut cg = CgLowering::new();
    let fd = ((l_max + 1) * (l_max + 1)) as usize;
    let mut out = vec![vec![C64::new(0.0, 0.0); fd]; points.len()];
    for a in 0..points.len() {
        for b in 0..points.len() {
            if a == b {
                continue;
            }
            if let Some((r, dir)) = rel(points[a], points[b]) {
                let k = kernel(radial, count, cutoff, r, dir);
                for (o, v) in out[a].iter_mut().zip(cg_product(&mut cg, l_max, &k, &feats[b])) {
                    *o += v;
                }
            }
        }
    }
    out
}

/// Attention over `neighbours[a]`: `q_a = wq_l s_a`, `k_ab`, `v_ab` as in
/// [`tfn`], score `sum C(l m, l' m' | 0 0) q k`, softmax over neighbours.
pub fn se3_attention(
    points: &[[f64; 3]],
    feats: &[Vec<C64>],
    radial_k: &[Vec<f64>],
    radial_v: &[Vec<f64>],
    wq: &[f64],
    cutoff: f64,
    neighbours: &[Vec<usize>],
) -> Vec<Vec<C64>> {
    let l_max = radial_k.len() as i64 - 1;
    let count = radial_k[0].len();
    let fd = ((l_max + 1) * (l_max + 1)) as usize;
    let mut cg = CgLowering::new();
    let mut out = vec![vec![C64::new(0.0, 0.0); fd]; points.len()];
    for (a, nb) in neighbours.iter().enumerate() {
        let mut q = feats[a].clone();
        for l in 0..=l_max {
            for m in -l..=l {
                q[idx(l, m)] *= wq[l as usize];
            }
        }
        let mut scores = Vec::new();
        let mut values = Vec::new();
        for &b in nb {
            let (r, dir) = rel(points[a], points[b]).expect("distinct neighbour");
            let kk = cg_product(&mut cg, l_max, &kernel(radial_k, count, cutoff, r, dir), &feats[b]);
            let vv = cg_product(&mut cg, l_max, &kernel(radial_v, count, cutoff, r, dir), &feats[b]);
            let mut s = C64::new(0.0, 0.0);
            for l in 0..=l_max {
                for m in -l..=l {
                    s += q[idx(l, m)] * kk[idx(l, -m)] * cg.get(l, m, l, -m, 0, 0);
                }
            }
            scores.push(s.exp());
            values.push(vv);
        }
        let z: C64 = scores.iter().sum();
        for (s, v) in scores.iter().zip(&values) {
            for (o, x) in out[a].iter_mut().zip(v) {
                *o += s / z * x;
            }
        }
    }
    out
}

/// Planar layer: `out_a[n] = sum_(b != a) sum_(n1 + n2 = n) R_n1(rho) e^(i n1 phi) s_b[n2]`.
pub fn harmonic(points: &[[f64; 3]], feats: &[Vec<C64>], radial: &[Vec<f64>], cutoff: f64) -> Vec<Vec<C64>> {
    let nm = (radial.len() as i64 - 1) / 2;
    let count = radial[0].len();
    let dim = radial.len();
    let mut out = vec![vec![C64::new(0.0, 0.0); dim]; points.len()];
    for a in 0..points.len() {
        for b in 0..points.len() {
            let (dx, dy) = (points[a][0] - points[b][0], points[a][1] - points[b][1]);
            let rho = (dx * dx + dy * dy).sqrt();
            if a == b || rho < 1e-12 {
                continue;
            }
            let phi = dy.atan2(dx);
            let g = gaussian_basis(rho, count, cutoff);
            for n1 in -nm..=nm {
                let w = &radial[(n1 + nm) as usize];
                let k = C64::from_polar(w.iter().zip(&g).map(|(x, y)| x * y).sum::<f64>(), n1 as f64 * phi);
                for n2 in -nm..=nm {
                    let n = n1 + n2;
                    if n.abs() <= nm {
                        out[a][(n + nm) as usize] += k * feats[b][(n2 + nm) as usize];
                    }
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_coefficients() {
        let mut cg = CgLowering::new();
        assert!((cg.get(1, 1, 1, -1, 0, 0) - 1.0 / 3f64.sqrt()).abs() < 1e-14);
        assert!((cg.get(1, 0, 1, 0, 0, 0) + 1.0 / 3f64.sqrt()).abs() < 1e-14);
        assert!((cg.get(1, 1, 1, 0, 2, 1) - 0.5f64.sqrt()).abs() < 1e-14);
        assert!((cg.get(1, 0, 1, 0, 1, 0)).abs() < 1e-14);
        assert!((cg.get(2, 0, 1, 0, 3, 0) - (9.0f64 / 15.0).sqrt()).abs() < 1e-14);
    }

    #[test]
    fn harmonics_are_normalised_on_axis() {
        let z = [0.0, 0.0, 1.0];
        for l in 0..=3usize {
            let want = ((2 * l + 1) as f64 / (4.0 * PI)).sqrt();
            assert!((sph_harm_cartesian(l, 0, z).re - want).abs() < 1e-14);
            for m in 1..=(l as i64) {
                assert!(sph_harm_cartesian(l, m, z).norm() < 1e-15);
            }
        }
    }
}
