//! Named builders with sample inputs, so the order command and the gradient
//! suite can treat every layer alike.

use std::sync::Arc;

use pi_engine::autodiff::{ParamStore, Params};
use pi_engine::interaction::attention::{build_attention, AttentionConfig, AttentionVariant};
use pi_engine::interaction::conv::{build_conv2d, read_image, ConvConfig, ConvConstraint};
use pi_engine::interaction::dynamics::{build_dynamics, Discretization, DynamicsConfig, DynamicsKind};
use pi_engine::interaction::gating::{build_gating, build_quadratic, embed_vector, read_vector, GatingConfig};
use pi_engine::interaction::geometric::{
    build_harmonic, build_se3_attention, build_tfn, HarmonicConfig, KernelKind, RadialBasis, Se3Config, TfnConfig,
};
use pi_engine::interaction::tpa::{build_tpa, TpaConfig};
use pi_engine::interaction::{bind, Bindings, Expr, Manifest};
use pi_engine::structural::NeighbourTable;
use pi_engine::tensor::embed_image2d;
use pi_engine::{rng, Activation, Coeff, Error, Result, C64};

use crate::config::RunConfig;

pub type Mat = Vec<Vec<f64>>;

/// Builder names accepted by `order` and covered by the gradient suite.
pub const NAMES: &[&str] = &[
    "conv",
    "conv-free",
    "conv-regularized",
    "gating",
    "quad",
    "attention",
    "attention-causal",
    "attention-multihead",
    "attention-rank-r",
    "attention-cross",
    "ssm",
    "mamba",
    "discrete-mamba",
    "tpa",
    "harmonic",
    "tfn",
    "se3-attention",
];

#[derive(Clone, Debug)]
pub enum Model {
    Conv { cfg: ConvConfig, image: Mat },
    Gating { cfg: GatingConfig, x: Vec<f64>, y: Vec<f64> },
    Quadratic { dim: usize, x: Vec<f64> },
    Attention { cfg: AttentionConfig, x: Mat, y: Option<Mat> },
    Dynamics { cfg: DynamicsConfig, xs: Mat },
    Tpa { cfg: TpaConfig, x: Mat },
    Harmonic { cfg: HarmonicConfig, points: Vec<[f64; 3]>, feats: Vec<Vec<C64>> },
    Tfn { cfg: TfnConfig, points: Vec<[f64; 3]>, feats: Vec<Vec<C64>> },
    Se3 { cfg: Se3Config, table: Arc<NeighbourTable>, points: Vec<[f64; 3]>, feats: Vec<Vec<C64>> },
}

/// Sizes used by [`Model::named`]; overridable from `[order]`.
#[derive(Clone, Copy, Debug)]
pub struct Sizes {
    pub n: usize,
    pub d: usize,
    pub heads: usize,
    pub rank: usize,
    pub l_max: usize,
    pub points: usize,
}

impl Default for Sizes {
    fn default() -> Self {
        Sizes { n: 4, d: 4, heads: 2, rank: 2, l_max: 1, points: 4 }
    }
}

impl Sizes {
    pub fn from_config(c: &RunConfig) -> Self {
        let d = Sizes::default();
        Sizes {
            n: c.int("order", "n", d.n),
            d: c.int("order", "d", d.d),
            heads: c.int("order", "heads", d.heads),
            rank: c.int("order", "rank", d.rank),
            l_max: c.int("order", "l_max", d.l_max),
            points: c.int("order", "points", d.points),
        }
    }
}

fn cloud(r: &mut rng::Rng64, n: usize, planar: bool) -> Vec<[f64; 3]> {
    (0..n)
        .map(|_| {
            let mut p = rng::point(r, 1.0);
            if planar {
                p[2] = 0.0;
            }
            p
        })
        .collect()
}

fn feats(r: &mut rng::Rng64, n: usize, fd: usize) -> Vec<Vec<C64>> {
    (0..n).map(|_| rng::cvec(r, fd, 1.0)).collect()
}

fn all_pairs(n: usize) -> Arc<NeighbourTable> {
    Arc::new(NeighbourTable::new((0..n).map(|a| (0..n).filter(|&b| b != a).collect()).collect()).expect("valid table"))
}

impl Model {
    /// Builder `name` with inputs drawn from `seed`.
    pub fn named(name: &str, s: Sizes, seed: u64) -> Result<Model> {
        if s.n == 0 || s.d == 0 || s.points == 0 {
            return Err(Error::InvalidDimension("sizes must be positive".into()));
        }
        let mut r = rng::derive(seed, 101);
        let (n, d) = (s.n, s.d);
        let attn = |variant| Model::Attention {
            cfg: AttentionConfig::new(n, d, variant),
            x: rng::mat(&mut rng::derive(seed, 102), n, d, 1.0),
            y: None,
        };
        let dynamics = |kind, disc| Model::Dynamics {
            cfg: DynamicsConfig { d, n: s.rank.max(1), kind, disc },
            xs: rng::mat(&mut rng::derive(seed, 103), n, d, 1.0),
        };
        let fd = (s.l_max + 1) * (s.l_max + 1);
        Ok(match name {
            "conv" | "conv-free" | "conv-regularized" => {
                let constraint = match name {
                    "conv" => ConvConstraint::Symmetric,
                    "conv-free" => ConvConstraint::Free,
                    _ => ConvConstraint::Regularized,
                };
                let size = n.max(3);
                Model::Conv {
                    cfg: ConvConfig::new(size, size, 2, 2, constraint),
                    image: rng::mat(&mut r, size, size, 1.0),
                }
            }
            "gating" => Model::Gating {
                cfg: GatingConfig { dim: d, func: Activation::Sigmoid },
                x: rng::vec(&mut r, d, 1.0),
                y: rng::vec(&mut r, d, 1.0),
            },
            "quad" => Model::Quadratic { dim: d, x: rng::vec(&mut r, d, 1.0) },
            "attention" => attn(AttentionVariant::Softmax),
            "attention-causal" => attn(AttentionVariant::CausalUnnormalized(Activation::Elu)),
            "attention-multihead" => attn(AttentionVariant::Multihead { heads: s.heads }),
            "attention-rank-r" => attn(AttentionVariant::RankR { rank: s.rank }),
            "attention-cross" => {
                let m = n + 1;
                Model::Attention {
                    cfg: AttentionConfig::new(n, d, AttentionVariant::Cross { m }),
                    x: rng::mat(&mut r, n, d, 1.0),
                    y: Some(rng::mat(&mut r, m, d, 1.0)),
                }
            }
            "ssm" => dynamics(DynamicsKind::Ssm, Discretization::Zoh { dt: 0.3 }),
            "mamba" => dynamics(DynamicsKind::Mamba, Discretization::Euler { dt: 0.3 }),
            "discrete-mamba" => dynamics(DynamicsKind::Mamba, Discretization::SelectiveZoh),
            "tpa" => Model::Tpa {
                cfg: TpaConfig {
                    n,
                    d,
                    heads: s.heads,
                    head_dim: 2,
                    rank_q: s.rank,
                    rank_k: 1,
                    rank_v: s.rank,
                },
                x: rng::mat(&mut r, n, d, 1.0),
            },
            "harmonic" => Model::Harmonic {
                cfg: HarmonicConfig {
                    n_points: s.points,
                    n_max: s.l_max.max(1),
                    radial: RadialBasis::default(),
                    kernel: KernelKind::Equivariant,
                },
                points: cloud(&mut r, s.points, true),
                feats: feats(&mut r, s.points, 2 * s.l_max.max(1) + 1),
            },
            "tfn" => Model::Tfn {
                cfg: TfnConfig {
                    n_points: s.points,
                    l_max: s.l_max,
                    radial: RadialBasis::default(),
                    kernel: KernelKind::Equivariant,
                },
                points: cloud(&mut r, s.points, false),
                feats: feats(&mut r, s.points, fd),
            },
            "se3-attention" => Model::Se3 {
                cfg: Se3Config {
                    n_points: s.points,
                    l_max: s.l_max,
                    radial: RadialBasis::default(),
                    kernel: KernelKind::Equivariant,
                },
                table: all_pairs(s.points),
                points: cloud(&mut r, s.points, false),
                feats: feats(&mut r, s.points, fd),
            },
            other => {
                return Err(Error::Config(format!(
                    "unknown builder `{other}`; expected one of {}",
                    NAMES.join(", ")
                )))
            }
        })
    }

    pub fn param_shapes(&self) -> Vec<(String, Vec<usize>)> {
        let own = |v: Vec<(&str, Vec<usize>)>| v.into_iter().map(|(n, s)| (n.to_string(), s)).collect();
        match self {
            Model::Conv { cfg, .. } => own(cfg.param_shapes()),
            Model::Gating { cfg, .. } => own(cfg.param_shapes()),
            Model::Quadratic { dim, .. } => vec![("w".into(), vec![*dim, *dim])],
            Model::Attention { cfg, .. } => own(cfg.param_shapes()),
            Model::Dynamics { cfg, .. } => own(cfg.param_shapes()),
            Model::Tpa { cfg, .. } => cfg.param_shapes(),
            Model::Harmonic { cfg, .. } => own(cfg.param_shapes()),
            Model::Tfn { cfg, .. } => own(cfg.param_shapes()),
            Model::Se3 { cfg, .. } => own(cfg.param_shapes()),
        }
    }

    /// Random parameters; dynamics get a stable negative `lambda`.
    pub fn init(&self, seed: u64, scale: f64) -> ParamStore {
        let mut s = ParamStore::new(seed);
        let mut r = rng::derive(seed, 104);
        for (name, shape) in self.param_shapes() {
            s.insert_random(&name, shape, scale, &mut r);
        }
        if let (Model::Dynamics { .. }, Ok(l)) = (self, s.block_mut("lambda")) {
            l.values.iter_mut().for_each(|v| *v = -0.2 - v.abs());
        }
        s
    }

    /// Flattened real and imaginary readouts.
    pub fn outputs<T: Coeff>(&self, p: &Params<T>) -> Result<Vec<T>> {
        let flat = |m: Vec<Vec<T>>| m.into_iter().flatten().collect::<Vec<T>>();
        Ok(match self {
            Model::Conv { cfg, image } => {
                let b = build_conv2d(cfg, p)?;
                let mut out = flat(read_image(&b.expr.eval(&bind("X", embed_image2d(image, b.expr.space())?))?)?);
                if let Some(reg) = b.aux.get("l_reg") {
                    out.push(*reg);
                }
                out
            }
            Model::Gating { cfg, x, y } => {
                let b = build_gating(cfg, p)?;
                let mut bi = Bindings::new();
                bi.insert("X".into(), embed_vector(&b, x)?);
                bi.insert("Y".into(), embed_vector(&b, y)?);
                read_vector(&b.expr.eval(&bi)?)
            }
            Model::Quadratic { dim, x } => {
                let b = build_quadratic(*dim, p)?;
                read_vector(&b.expr.eval(&bind("X", embed_vector(&b, x)?))?)
            }
            Model::Attention { cfg, x, y } => flat(build_attention(cfg, p)?.forward(x, y.as_deref())?),
            Model::Dynamics { cfg, xs } => flat(build_dynamics(cfg, p)?.run(xs)?.outputs),
            Model::Tpa { cfg, x } => flat(build_tpa(cfg, p)?.forward(x)?),
            Model::Harmonic { cfg, points, feats } => flat(build_harmonic(cfg, p)?.forward(points, feats)?),
            Model::Tfn { cfg, points, feats } => flat(build_tfn(cfg, p)?.forward(points, feats)?),
            Model::Se3 { cfg, table, points, feats } => {
                flat(build_se3_attention(cfg, p, table.clone())?.forward(points, feats)?)
            }
        })
    }

    /// The built expression (the state update for dynamics) and manifest.
    pub fn expr(&self, p: &Params<C64>) -> Result<(Expr<C64>, Manifest)> {
        Ok(match self {
            Model::Conv { cfg, .. } => {
                let b = build_conv2d(cfg, p)?;
                (b.expr, b.manifest)
            }
            Model::Gating { cfg, .. } => {
                let b = build_gating(cfg, p)?;
                (b.expr, b.manifest)
            }
            Model::Quadratic { dim, .. } => {
                let b = build_quadratic(*dim, p)?;
                (b.expr, b.manifest)
            }
            Model::Attention { cfg, .. } => {
                let b = build_attention(cfg, p)?.built;
                (b.expr, b.manifest)
            }
            Model::Dynamics { cfg, .. } => {
                let dy = build_dynamics(cfg, p)?;
                (dy.update, dy.manifest)
            }
            Model::Tpa { cfg, .. } => {
                let b = build_tpa(cfg, p)?.built;
                (b.expr, b.manifest)
            }
            Model::Harmonic { cfg, .. } => {
                let b = build_harmonic(cfg, p)?.built;
                (b.expr, b.manifest)
            }
            Model::Tfn { cfg, .. } => {
                let b = build_tfn(cfg, p)?.built;
                (b.expr, b.manifest)
            }
            Model::Se3 { cfg, table, .. } => {
                let b = build_se3_attention(cfg, p, table.clone())?.built;
                (b.expr, b.manifest)
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_name_builds_and_evaluates() {
        for name in NAMES {
            let m = Model::named(name, Sizes::default(), 1).unwrap();
            let p = m.init(2, 0.5).to_params::<C64>();
            let out = m.outputs(&p).unwrap();
            assert!(!out.is_empty() && out.iter().all(|v| v.norm().is_finite()), "{name}");
            m.expr(&p).unwrap();
        }
        assert!(Model::named("nope", Sizes::default(), 1).is_err());
    }
}
