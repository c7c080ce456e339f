//! Equivariance checks and their negative controls.

use std::sync::Arc;

use pi_engine::autodiff::ParamStore;
use pi_engine::interaction::conv::{build_conv2d, ConvConfig, ConvConstraint};
use pi_engine::interaction::geometric::{
    build_harmonic, build_se3_attention, build_tfn, HarmonicConfig, KernelKind, PointLayer, RadialBasis, Se3Config,
    TfnConfig,
};
use pi_engine::interaction::bind;
use pi_engine::repr::{check_equivariance, GroupElement};
use pi_engine::structural::NeighbourTable;
use pi_engine::tensor::{embed_image2d, TensorElement};
use pi_engine::{rng, Result, C64};

use super::{store, Ctx};
use crate::cases::CaseSpec;

pub const GROUPS: &[&str] = &["translation", "so2", "so3", "all"];

fn conv_defect(constraint: ConvConstraint, size: usize, trials: usize, seed: u64) -> Result<f64> {
    let cfg = ConvConfig::new(size, size, 3, 3, constraint).cyclic();
    let s = store(cfg.param_shapes(), seed, 1.0);
    let b = build_conv2d::<C64>(&cfg, &s.to_params())?;
    let space = b.expr.space().clone();
    Ok(check_equivariance(
        |x: &TensorElement| b.expr.eval(&bind("X", x.clone())),
        |r| GroupElement::random_translation(r, size, size),
        |r| embed_image2d(&rng::mat(r, size, size, 1.0), &space).expect("image fits"),
        trials,
        0.0,
        seed,
    )?
    .max_defect)
}

fn identity_defect(seed: u64) -> Result<f64> {
    let layer = tfn_layer(KernelKind::Unconstrained, 3, 0, seed)?;
    point_defect(&layer, |_| GroupElement::Identity, 3, 1, 3, false, seed)
}

fn point_defect<G>(
    layer: &PointLayer<C64>,
    group: G,
    n: usize,
    fd: usize,
    trials: usize,
    planar: bool,
    seed: u64,
) -> Result<f64>
where
    G: Fn(&mut rng::Rng64) -> GroupElement + Sync + Send,
{
    Ok(check_equivariance(
        |x: &TensorElement| layer.apply(x),
        group,
        |r| {
            let pts: Vec<[f64; 3]> = (0..n)
                .map(|_| {
                    let mut p = rng::point(r, 0.8);
                    if planar {
                        p[2] = 0.0;
                    }
                    p
                })
                .collect();
            let f: Vec<Vec<C64>> = (0..n).map(|_| rng::cvec(r, fd, 1.0)).collect();
            layer.embed(&pts, &f).expect("points fit")
        },
        trials,
        0.0,
        seed,
    )?
    .max_defect)
}

fn radial() -> RadialBasis {
    RadialBasis::default()
}

fn harmonic_layer(kernel: KernelKind, n: usize, n_max: usize, seed: u64) -> Result<PointLayer<C64>> {
    let cfg = HarmonicConfig { n_points: n, n_max, radial: radial(), kernel };
    build_harmonic(&cfg, &store(cfg.param_shapes(), seed, 1.0).to_params())
}

fn tfn_layer(kernel: KernelKind, n: usize, l_max: usize, seed: u64) -> Result<PointLayer<C64>> {
    let cfg = TfnConfig { n_points: n, l_max, radial: radial(), kernel };
    build_tfn(&cfg, &store(cfg.param_shapes(), seed, 1.0).to_params())
}

fn se3_layer(kernel: KernelKind, n: usize, l_max: usize, seed: u64) -> Result<PointLayer<C64>> {
    let cfg = Se3Config { n_points: n, l_max, radial: radial(), kernel };
    let s: ParamStore = store(cfg.param_shapes(), seed, 1.0);
    let table = Arc::new(NeighbourTable::new((0..n).map(|a| (0..n).filter(|&b| b != a).collect()).collect())?);
    build_se3_attention(&cfg, &s.to_params(), table)
}

pub fn cases(which: &str, ctx: Ctx) -> Option<Vec<CaseSpec>> {
    if !GROUPS.contains(&which) {
        return None;
    }
    let c = ctx.cfg;
    let trials = c.int("equivariance", "trials", 20);
    let rotations = c.int("equivariance", "rotations", 20);
    let l_max = c.int("equivariance", "l_max", 2);
    let n = c.int("equivariance", "points", 4);
    let neg = c.tol("negative_control", 1e-3);
    let s = ctx.seed;
    let fd = (l_max + 1) * (l_max + 1);
    let mut v = Vec::new();
    let want = |g: &str| which == "all" || which == g;
    if want("translation") {
        let tol = c.tol("translation", 1e-12);
        v.push(CaseSpec::new("equivariance/translation/conv-cyclic", s, tol, move || {
            conv_defect(ConvConstraint::Symmetric, 6, trials, s)
        }));
        v.push(
            CaseSpec::new("equivariance/translation/negative-control/conv-free", s, neg, move || {
                conv_defect(ConvConstraint::Free, 6, trials, s)
            })
            .at_least(),
        );
        v.push(CaseSpec::new("equivariance/identity", s, 0.0, move || identity_defect(s)));
    }
    if want("so2") {
        let tol = c.tol("so2", 1e-8);
        v.push(CaseSpec::new("equivariance/so2/harmonic", s, tol, move || {
            point_defect(&harmonic_layer(KernelKind::Equivariant, n, 2, s)?, GroupElement::random_so2, n, 5, trials, true, s)
        }));
        v.push(
            CaseSpec::new("equivariance/so2/negative-control/harmonic", s, neg, move || {
                point_defect(
                    &harmonic_layer(KernelKind::Unconstrained, n, 2, s)?,
                    GroupElement::random_so2,
                    n,
                    5,
                    trials,
                    true,
                    s,
                )
            })
            .at_least(),
        );
    }
    if want("so3") {
        let tol = c.tol("so3", 1e-6);
        for (name, se3) in [("tfn", false), ("se3-attention", true)] {
            let build = move |k| if se3 { se3_layer(k, n, l_max, s) } else { tfn_layer(k, n, l_max, s) };
            v.push(CaseSpec::new(format!("equivariance/so3/{name}"), s, tol, move || {
                point_defect(&build(KernelKind::Equivariant)?, GroupElement::random_so3, n, fd, rotations, false, s)
            }));
            v.push(
                CaseSpec::new(format!("equivariance/so3/negative-control/{name}"), s, neg, move || {
                    point_defect(&build(KernelKind::Unconstrained)?, GroupElement::random_so3, n, fd, rotations, false, s)
                })
                .at_least(),
            );
        }
    }
    Some(v)
}
