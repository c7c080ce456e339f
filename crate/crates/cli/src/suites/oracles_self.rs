//! Sanity checks on the oracles themselves: closed forms and invariances
//! that do not go through the engine.

use std::sync::Arc;

use pi_engine::algebra::make_b1;
use pi_engine::oracles::{self, AttnWeights, Injection, Mat, Readout, StepRule};
use pi_engine::tensor::{tensor_space, Role, TensorElement};
use pi_engine::{rng, Result, C64};

use super::Ctx;
use crate::cases::CaseSpec;

fn diff(a: &Mat, b: &Mat) -> f64 {
    a.iter()
        .zip(b)
        .flat_map(|(x, y)| x.iter().zip(y).map(|(u, v)| (u - v).abs()))
        .fold(0.0, f64::max)
}

fn weights(r: &mut rng::Rng64, d: usize) -> AttnWeights {
    AttnWeights { wq: rng::mat(r, d, d, 1.0), wk: rng::mat(r, d, d, 1.0), wv: rng::mat(r, d, d, 1.0) }
}

fn matvec(m: &Mat, v: &[f64]) -> Vec<f64> {
    m.iter().map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum()).collect()
}

fn attention_single_token(seed: u64) -> Result<f64> {
    let mut r = rng::seeded(seed);
    let w = weights(&mut r, 3);
    let x = rng::mat(&mut r, 1, 3, 1.0);
    let out = oracles::attention(&x, &w, f64::exp, false, true);
    Ok(diff(&out, &vec![matvec(&w.wv, &x[0])]))
}

fn cross_attention_permutation(seed: u64) -> Result<f64> {
    let mut r = rng::seeded(seed);
    let w = weights(&mut r, 3);
    let x = rng::mat(&mut r, 4, 3, 1.0);
    let y = rng::mat(&mut r, 5, 3, 1.0);
    let base = oracles::cross_attention(&x, &y, &w);
    let perm = [3, 0, 4, 1, 2];
    let yp: Mat = perm.iter().map(|&i| y[i].clone()).collect();
    let xp: Mat = [2, 0, 3, 1].iter().map(|&i| x[i].clone()).collect();
    let keys = diff(&oracles::cross_attention(&x, &yp, &w), &base);
    let out = oracles::cross_attention(&xp, &y, &w);
    let want: Mat = [2, 0, 3, 1].iter().map(|&i| base[i].clone()).collect();
    Ok(keys.max(diff(&out, &want)))
}

fn attention_zero_values(seed: u64) -> Result<f64> {
    let mut r = rng::seeded(seed);
    let mut w = weights(&mut r, 3);
    w.wv = vec![vec![0.0; 3]; 3];
    let out = oracles::attention(&rng::mat(&mut r, 4, 3, 1.0), &w, f64::exp, true, true);
    Ok(diff(&out, &vec![vec![0.0; 3]; 4]))
}

fn ssm_zero_input(seed: u64) -> Result<f64> {
    let mut r = rng::seeded(seed);
    let lam = rng::mat(&mut r, 2, 3, 1.0);
    let y = oracles::recurrence(
        &vec![vec![0.0; 2]; 6],
        &lam,
        &Injection::Fixed(rng::mat(&mut r, 2, 3, 1.0)),
        &Readout::Fixed(rng::mat(&mut r, 2, 3, 1.0)),
        &StepRule::Zoh(0.2),
    );
    Ok(diff(&y, &vec![vec![0.0; 2]; 6]))
}

/// `lambda = 0`, unit injection and readout: the state is `dt` times the
/// running sum of the inputs.
fn euler_cumulative_sum(seed: u64) -> Result<f64> {
    let mut r = rng::seeded(seed);
    let dt = 0.25;
    let xs = rng::mat(&mut r, 8, 1, 1.0);
    let y = oracles::recurrence(
        &xs,
        &vec![vec![0.0]],
        &Injection::Fixed(vec![vec![1.0]]),
        &Readout::Fixed(vec![vec![1.0]]),
        &StepRule::Euler(dt),
    );
    let mut acc = 0.0;
    let want: Mat = xs
        .iter()
        .map(|x| {
            acc += dt * x[0];
            vec![acc]
        })
        .collect();
    Ok(diff(&y, &want))
}

/// After an impulse, Euler and ZOH differ in relative terms by `O(dt^2)`,
/// so halving `dt` divides the gap by about four. Returns `|ratio - 4|`.
fn zoh_euler_ratio() -> Result<f64> {
    let gap = |dt: f64| {
        let run = |rule| {
            oracles::recurrence(
                &vec![vec![1.0], vec![0.0]],
                &vec![vec![-1.0]],
                &Injection::Fixed(vec![vec![1.0]]),
                &Readout::Fixed(vec![vec![1.0]]),
                &rule,
            )[1][0]
        };
        let (z, e) = (run(StepRule::Zoh(dt)), run(StepRule::Euler(dt)));
        ((z - e) / z).abs()
    };
    Ok((gap(0.01) / gap(0.005) - 4.0).abs())
}

/// A lone point has no neighbours, so its update is exactly zero.
fn geometric_isolated(seed: u64) -> Result<f64> {
    let mut r = rng::seeded(seed);
    let radial = rng::mat(&mut r, 2, 3, 1.0);
    let pts = [[0.3, -0.2, 0.1]];
    let f = vec![rng::cvec(&mut r, 4, 1.0)];
    let out = oracles::tfn(&pts, &f, &radial, 2.0);
    Ok(out.iter().flatten().map(|v| v.norm()).fold(0.0, f64::max))
}

/// With `l = 0` the kernel is `R(r) Y00`, so each output is a weighted sum.
fn tfn_scalar(seed: u64) -> Result<f64> {
    let mut r = rng::seeded(seed);
    let w = rng::vec(&mut r, 3, 1.0);
    let pts = [[0.0, 0.0, 0.0], [0.6, 0.0, 0.0], [0.0, 0.3, 0.4]];
    let f: Vec<Vec<C64>> = (0..3).map(|a| vec![C64::new(a as f64 + 1.0, 0.0)]).collect();
    let out = oracles::tfn(&pts, &f, std::slice::from_ref(&w), 2.0);
    let y00 = 0.5 / std::f64::consts::PI.sqrt();
    let mut err: f64 = 0.0;
    for a in 0..3 {
        let mut want = 0.0;
        for b in (0..3).filter(|&b| b != a) {
            let d: f64 = (0..3).map(|k| (pts[a][k] - pts[b][k]).powi(2)).sum::<f64>().sqrt();
            let rb: f64 = oracles::gaussian_basis(d, 3, 2.0).iter().zip(&w).map(|(x, y)| x * y).sum();
            want += rb * y00 * (b as f64 + 1.0);
        }
        err = err.max((out[a][0] - C64::new(want, 0.0)).norm());
    }
    Ok(err)
}

fn conv_tapwise(seed: u64) -> Result<f64> {
    let mut r = rng::seeded(seed);
    let x = rng::mat(&mut r, 7, 6, 1.0);
    let k = rng::mat(&mut r, 3, 2, 1.0);
    Ok(diff(&oracles::xcorr2d(&x, &k), &oracles::xcorr2d_tapwise(&x, &k)))
}

/// `d/dk <g, xcorr(x, k)>` against central differences.
fn conv_kernel_grad(seed: u64) -> Result<f64> {
    let mut r = rng::seeded(seed);
    let x = rng::mat(&mut r, 5, 5, 1.0);
    let k = rng::mat(&mut r, 3, 3, 1.0);
    let g = rng::mat(&mut r, 5, 5, 1.0);
    let f = |k: &Mat| -> f64 {
        oracles::xcorr2d(&x, k).iter().zip(&g).flat_map(|(a, b)| a.iter().zip(b).map(|(u, v)| u * v)).sum()
    };
    let grad = oracles::xcorr2d_kernel_grad(&x, &g, 3, 3);
    let h = 1e-5;
    let mut err: f64 = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            let (mut kp, mut km) = (k.clone(), k.clone());
            kp[i][j] += h;
            km[i][j] -= h;
            err = err.max(((f(&kp) - f(&km)) / (2.0 * h) - grad[i][j]).abs());
        }
    }
    Ok(err)
}

fn b1_space(n: usize) -> Result<pi_engine::tensor::Space> {
    tensor_space(vec![Arc::new(make_b1(n)?)], vec![Role::Positional])
}

fn basis(space: &pi_engine::tensor::Space, i: usize) -> Result<TensorElement> {
    let mut v = vec![C64::new(0.0, 0.0); space.size()];
    v[i] = C64::new(1.0, 0.0);
    TensorElement::from_dense(space, v)
}

fn bruteforce_zero(seed: u64) -> Result<f64> {
    let space = b1_space(4)?;
    let x = TensorElement::from_dense(&space, rng::cvec(&mut rng::seeded(seed), space.size(), 1.0))?;
    let z = oracles::multiply_bruteforce(&x, &TensorElement::zero(&space))?;
    Ok(z.max_abs_diff(&TensorElement::zero(&space)))
}

/// `f_i f_j = delta_ij f_0` for positions, `f_0` acts as the unit.
fn bruteforce_b1() -> Result<f64> {
    let space = b1_space(3)?;
    let mut err: f64 = 0.0;
    for i in 0..4 {
        for j in 0..4 {
            let p = oracles::multiply_bruteforce(&basis(&space, i)?, &basis(&space, j)?)?;
            let want = match (i, j) {
                (0, k) | (k, 0) => basis(&space, k)?,
                (a, b) if a == b => basis(&space, 0)?,
                _ => TensorElement::zero(&space),
            };
            err = err.max(p.max_abs_diff(&want));
        }
    }
    Ok(err)
}

fn known_values() -> Result<f64> {
    let pi = std::f64::consts::PI;
    let cg = (oracles::cg_lowering(1, 1, 1, -1, 0, 0) - 1.0 / 3f64.sqrt()).abs();
    let y = (oracles::sph_harm_cartesian(1, 0, [0.0, 0.0, 1.0]) - C64::new((3.0 / (4.0 * pi)).sqrt(), 0.0)).norm();
    Ok(cg.max(y))
}

pub fn cases(ctx: Ctx) -> Vec<CaseSpec> {
    let tol = ctx.cfg.tol("oracle", 1e-12);
    let s = ctx.seed;
    let mut v = vec![
        CaseSpec::new("oracles-self/attention-single-token", s, tol, move || attention_single_token(s)),
        CaseSpec::new("oracles-self/cross-attention-permutation", s, tol, move || cross_attention_permutation(s)),
        CaseSpec::new("oracles-self/attention-zero-values", s, 0.0, move || attention_zero_values(s)),
        CaseSpec::new("oracles-self/ssm-zero-input", s, 0.0, move || ssm_zero_input(s)),
        CaseSpec::new("oracles-self/euler-cumulative-sum", s, tol, move || euler_cumulative_sum(s)),
        CaseSpec::new("oracles-self/zoh-euler-local-ratio", s, 0.05, zoh_euler_ratio),
        CaseSpec::new("oracles-self/tfn-isolated-points", s, 0.0, move || geometric_isolated(s)),
        CaseSpec::new("oracles-self/tfn-scalar-by-hand", s, tol, move || tfn_scalar(s)),
        CaseSpec::new("oracles-self/conv-tapwise", s, tol, move || conv_tapwise(s)),
        CaseSpec::new("oracles-self/conv-kernel-grad", s, 1e-7, move || conv_kernel_grad(s)),
        CaseSpec::new("oracles-self/bruteforce-zero", s, 0.0, move || bruteforce_zero(s)),
        CaseSpec::new("oracles-self/bruteforce-b1-relations", s, 0.0, bruteforce_b1),
    ];
    v.push(CaseSpec::new("oracles-self/known-values", s, tol, known_values));
    v
}
