//! Clebsch-Gordan coefficients, Condon-Shortley phase, Racah's closed form.

use std::sync::OnceLock;

const MAX_FACT: usize = 200;

fn ln_fact_table() -> &'static [f64] {
    static T: OnceLock<Vec<f64>> = OnceLock::new();
    T.get_or_init(|| {
        let mut t = vec![0.0; MAX_FACT + 1];
        for n in 1..=MAX_FACT {
            t[n] = t[n - 1] + (n as f64).ln();
        }
        t
    })
}

fn lf(n: i64) -> f64 {
    ln_fact_table()[n as usize]
}

/// `<l1 m1; l2 m2 | l m>`. Selection-rule violations give exactly 0.
pub fn cg(l1: i64, m1: i64, l2: i64, m2: i64, l: i64, m: i64) -> f64 {
    if l1 < 0 || l2 < 0 || l < 0 {
        return 0.0;
    }
    if m1.abs() > l1 || m2.abs() > l2 || m.abs() > l {
        return 0.0;
    }
    if m != m1 + m2 || l < (l1 - l2).abs() || l > l1 + l2 {
        return 0.0;
    }
    let pre = 0.5
        * (((2 * l + 1) as f64).ln() + lf(l + l1 - l2) + lf(l - l1 + l2) + lf(l1 + l2 - l)
            - lf(l1 + l2 + l + 1)
            + lf(l + m)
            + lf(l - m)
            + lf(l1 - m1)
            + lf(l1 + m1)
            + lf(l2 - m2)
            + lf(l2 + m2));
    let kmin = 0.max(l2 - l - m1).max(l1 - l + m2);
    let kmax = (l1 + l2 - l).min(l1 - m1).min(l2 + m2);
    let mut sum = 0.0;
    for k in kmin..=kmax {
        let den = lf(k) + lf(l1 + l2 - l - k) + lf(l1 - m1 - k) + lf(l2 + m2 - k) + lf(l - l2 + m1 + k) + lf(l - l1 - m2 + k);
        let term = (pre - den).exp();
        sum += if k % 2 == 0 { term } else { -term };
    }
    sum
}

/// Dense lookup over l1, l2, l <= l_max.
#[derive(Clone, Debug)]
pub struct CgTable {
    l_max: usize,
    vals: Vec<f64>,
}

fn lm_index(l: i64, m: i64) -> usize {
    (l * l + m + l) as usize
}

impl CgTable {
    pub fn new(l_max: usize) -> Self {
        let n = (l_max + 1) * (l_max + 1);
        let mut vals = vec![0.0; n * n * n];
        let lm = l_max as i64;
        for l1 in 0..=lm {
            for m1 in -l1..=l1 {
                for l2 in 0..=lm {
                    for m2 in -l2..=l2 {
                        for l in 0..=lm {
                            let m = m1 + m2;
                            if m.abs() <= l {
                                vals[(lm_index(l1, m1) * n + lm_index(l2, m2)) * n + lm_index(l, m)] = cg(l1, m1, l2, m2, l, m);
                            }
                        }
                    }
                }
            }
        }
        CgTable { l_max, vals }
    }

    pub fn l_max(&self) -> usize {
        self.l_max
    }

    pub fn get(&self, l1: i64, m1: i64, l2: i64, m2: i64, l: i64, m: i64) -> f64 {
        let lm = self.l_max as i64;
        if l1 > lm || l2 > lm || l > lm || m1.abs() > l1 || m2.abs() > l2 || m.abs() > l {
            return 0.0;
        }
        let n = (self.l_max + 1) * (self.l_max + 1);
        self.vals[(lm_index(l1, m1) * n + lm_index(l2, m2)) * n + lm_index(l, m)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_values() {
        assert_eq!(cg(0, 0, 0, 0, 0, 0), 1.0);
        assert!((cg(1, 1, 1, -1, 0, 0) - 1.0 / 3f64.sqrt()).abs() < 1e-15);
        assert!(cg(1, 0, 1, 0, 1, 0).abs() < 1e-15);
        assert!((cg(1, 1, 1, 1, 2, 2) - 1.0).abs() < 1e-14);
        assert!((cg(1, 0, 1, 0, 2, 0) - (2.0f64 / 3.0).sqrt()).abs() < 1e-14);
        assert_eq!(cg(1, 1, 1, 1, 1, 1), 0.0);
    }

    #[test]
    fn orthogonality_both_ways() {
        for l1 in 0..=3i64 {
            for l2 in 0..=3i64 {
                // sum over m1 m2 of C^{lm} C^{l'm'}
                for l in (l1 - l2).abs()..=l1 + l2 {
                    for lp in (l1 - l2).abs()..=l1 + l2 {
                        for m in -l..=l {
                            for mp in -lp..=lp {
                                let mut s = 0.0;
                                for m1 in -l1..=l1 {
                                    for m2 in -l2..=l2 {
                                        s += cg(l1, m1, l2, m2, l, m) * cg(l1, m1, l2, m2, lp, mp);
                                    }
                                }
                                let e = if l == lp && m == mp { 1.0 } else { 0.0 };
                                assert!((s - e).abs() < 1e-12, "{l1} {l2} {l} {m} {lp} {mp}: {s}");
                            }
                        }
                    }
                }
                // sum over l m of C_{m1 m2} C_{m1' m2'}
                for m1 in -l1..=l1 {
                    for m2 in -l2..=l2 {
                        for m1p in -l1..=l1 {
                            for m2p in -l2..=l2 {
                                let mut s = 0.0;
                                for l in (l1 - l2).abs()..=l1 + l2 {
                                    for m in -l..=l {
                                        s += cg(l1, m1, l2, m2, l, m) * cg(l1, m1p, l2, m2p, l, m);
                                    }
                                }
                                let e = if m1 == m1p && m2 == m2p { 1.0 } else { 0.0 };
                                assert!((s - e).abs() < 1e-12);
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn table_matches_formula() {
        let t = CgTable::new(2);
        assert_eq!(t.get(1, 1, 1, -1, 0, 0), cg(1, 1, 1, -1, 0, 0));
        assert_eq!(t.get(2, 1, 1, 0, 2, 1), cg(2, 1, 1, 0, 2, 1));
        assert_eq!(t.get(2, 2, 2, 2, 4, 4), 0.0);
    }
}
