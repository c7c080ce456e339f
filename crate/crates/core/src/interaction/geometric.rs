//! Rotation-equivariant point-cloud layers.
//!
//! Features live on `P (x) P (x) R` where `R` is the SO(2) charge algebra or
//! the SO(3) irrep algebra. Kernels are built from the relative positions
//! `r_a - r_b` carried by the input, so rotating the input (features and
//! positions) rotates the kernel with it.

use std::f64::consts::PI;
use std::sync::Arc;

use super::expr::{ExprBuilder, KernelFn, Manifest};
use super::{Bindings, Built};
use crate::algebra::{make_b1, make_b2, TruncationPolicy};
use crate::autodiff::Params;
use crate::error::{Error, Result};
use crate::repr::{lm_index, make_so2_algebra, make_so3_algebra, sph_harm_all};
use crate::scalar::{Activation, Coeff, C64};
use crate::structural::{compose, NeighbourTable, StructuralOperator};
use crate::tensor::{embed_field3d, tensor_space, Role, Space, TensorElement};

/// Gaussian radial basis `exp(-(r - c_j)^2 / (2 s^2))` with centres spread
/// over `[0, cutoff]` and width `s = cutoff / count`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RadialBasis {
    pub count: usize,
    pub cutoff: f64,
}

impl RadialBasis {
    pub fn eval(&self, r: f64) -> Vec<f64> {
        let s = self.cutoff / self.count as f64;
        (0..self.count)
            .map(|j| {
                let c = if self.count == 1 {
                    0.5 * self.cutoff
                } else {
                    self.cutoff * j as f64 / (self.count - 1) as f64
                };
                (-(r - c).powi(2) / (2.0 * s * s)).exp()
            })
            .collect()
    }
}

impl Default for RadialBasis {
    fn default() -> Self {
        RadialBasis { count: 3, cutoff: 2.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KernelKind {
    /// Radial profile times the matching angular harmonic.
    Equivariant,
    /// Radial profile times a direction-independent angular factor (or, for
    /// SO(2), a factor that ignores the charge). Breaks equivariance.
    Unconstrained,
}

/// Fixed direction used by unconstrained SO(3) kernels.
const FIXED_DIR: [f64; 3] = [0.3, -0.5, 0.812_403_840_463_596];

fn radial<T: Coeff>(w: &[T], basis: &[f64]) -> T {
    w.iter().zip(basis).fold(T::zero(), |acc, (wj, b)| acc + wj.scale(*b))
}

fn rows<T: Coeff>(params: &Params<T>, name: &str, shape: &[usize]) -> Result<Vec<Vec<T>>> {
    Ok(params.get_shaped(name, shape)?.matrix())
}

fn unit(v: [f64; 3]) -> Option<(f64, [f64; 3])> {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    (n > 1e-12).then(|| (n, [v[0] / n, v[1] / n, v[2] / n]))
}

fn diff(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

/// Pair kernel `K(r_a - r_b)` for `a != b`; `offset` is 1 on B1 factors.
fn pair_kernel<T: Coeff>(
    space: Space<T>,
    offset: usize,
    f: impl Fn([f64; 3]) -> Result<Vec<(usize, T)>> + Send + Sync + 'static,
) -> KernelFn<T> {
    Arc::new(move |pos: &[[f64; 3]]| {
        let mut entries = Vec::new();
        for (a, pa) in pos.iter().enumerate() {
            for (b, pb) in pos.iter().enumerate() {
                if a == b {
                    continue;
                }
                for (j, v) in f(diff(pa, pb))? {
                    entries.push((space.ravel(&[a + offset, b + offset, j])?, v));
                }
            }
        }
        TensorElement::from_flat(&space, entries)
    })
}

/// SO(3) kernel `K^l_m(r) = R^l(|r|) Y^l_m(r_hat)`.
fn so3_kernel<T: Coeff>(
    l_max: usize,
    basis: RadialBasis,
    w: Vec<Vec<T>>,
    kind: KernelKind,
) -> impl Fn([f64; 3]) -> Result<Vec<(usize, T)>> + Send + Sync + 'static {
    move |r| {
        let Some((len, dir)) = unit(r) else {
            return Ok(Vec::new());
        };
        let phi = basis.eval(len);
        let ang_dir = match kind {
            KernelKind::Equivariant => dir,
            KernelKind::Unconstrained => FIXED_DIR,
        };
        let y = sph_harm_all(l_max, &ang_dir)?;
        let mut out = Vec::new();
        for (l, wl) in w.iter().enumerate() {
            let rl = radial(wl, &phi);
            for m in -(l as i64)..=(l as i64) {
                let i = lm_index(l, m);
                out.push((i, rl * T::from_c64(y[i])));
            }
        }
        Ok(out)
    }
}

fn param_map(v: Vec<(&str, Vec<usize>)>) -> std::collections::BTreeMap<String, Vec<usize>> {
    v.into_iter().map(|(n, s)| (n.to_string(), s)).collect()
}

/// A geometric layer: slot `S`, output read per point and basis index.
#[derive(Clone, Debug)]
pub struct PointLayer<T: Coeff> {
    pub built: Built<T>,
    /// 1 on B1 positional factors, 0 on B2.
    offset: usize,
    n_points: usize,
}

impl<T: Coeff> PointLayer<T> {
    pub fn space(&self) -> &Space<T> {
        self.built.expr.space()
    }

    pub fn embed(&self, points: &[[f64; 3]], features: &[Vec<C64>]) -> Result<TensorElement<T>> {
        if points.len() != self.n_points {
            return Err(Error::PositionMismatch(format!(
                "{} points for a layer of {}",
                points.len(),
                self.n_points
            )));
        }
        embed_field3d(points, features, self.space())
    }

    /// `out[a][j]` from the origin column.
    pub fn read(&self, el: &TensorElement<T>) -> Result<Vec<Vec<T>>> {
        let fd = self.space().dims()[2];
        (0..self.n_points)
            .map(|a| (0..fd).map(|j| el.get(&[a + self.offset, 0, j])).collect())
            .collect()
    }

    pub fn apply(&self, x: &TensorElement<T>) -> Result<TensorElement<T>> {
        self.built.expr.eval(&Bindings::from([("S".to_string(), x.clone())]))
    }

    pub fn forward(&self, points: &[[f64; 3]], features: &[Vec<C64>]) -> Result<Vec<Vec<T>>> {
        self.read(&self.apply(&self.embed(points, features)?)?)
    }
}

/// `O_K(S) = K S^t` with kernel computed from the positions of `S`.
fn kernel_conv<T: Coeff>(space: &Space<T>, kernel: KernelFn<T>) -> Result<super::Expr<T>> {
    let mut b = ExprBuilder::new(space);
    let s = b.slot("S");
    let k = b.kernel("K", s, kernel)?;
    let out = b.mult(k, s, StructuralOperator::Flip { a: 0, b: 1 }, StructuralOperator::Identity)?;
    b.finish(out)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HarmonicConfig {
    pub n_points: usize,
    pub n_max: usize,
    pub radial: RadialBasis,
    pub kernel: KernelKind,
}

impl HarmonicConfig {
    pub fn param_shapes(&self) -> Vec<(&'static str, Vec<usize>)> {
        vec![("radial", vec![2 * self.n_max + 1, self.radial.count])]
    }
}

/// Planar layer with `K_n(r) = R_n(|r|) e^(i n phi)`, positions in the xy-plane.
pub fn build_harmonic<T: Coeff>(cfg: &HarmonicConfig, params: &Params<T>) -> Result<PointLayer<T>> {
    let b1 = Arc::new(make_b1(cfg.n_points)?.lift::<T>());
    let space = tensor_space(
        vec![
            b1.clone(),
            b1,
            Arc::new(make_so2_algebra(cfg.n_max, TruncationPolicy::Drop).lift::<T>()),
        ],
        vec![Role::Positional, Role::Positional, Role::Feature],
    )?;
    let w = rows(params, "radial", &cfg.param_shapes()[0].1)?;
    let (basis, kind, nm) = (cfg.radial, cfg.kernel, cfg.n_max as i64);
    let kernel = pair_kernel(space.clone(), 1, move |r| {
        let rho = (r[0] * r[0] + r[1] * r[1]).sqrt();
        if rho < 1e-12 {
            return Ok(Vec::new());
        }
        let phi = r[1].atan2(r[0]);
        let bv = basis.eval(rho);
        Ok((-nm..=nm)
            .map(|n| {
                let ang = match kind {
                    KernelKind::Equivariant => C64::from_polar(1.0, n as f64 * phi),
                    KernelKind::Unconstrained => C64::new(0.5 + r[0] / rho, 0.0),
                };
                let i = (n + nm) as usize;
                (i, radial(&w[i], &bv) * T::from_c64(ang))
            })
            .collect())
    });
    let expr = kernel_conv(&space, kernel)?;
    let manifest = Manifest::new("harmonic", &expr)?.with_params(param_map(cfg.param_shapes()));
    Ok(PointLayer {
        built: Built::new(manifest, expr),
        offset: 1,
        n_points: cfg.n_points,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TfnConfig {
    pub n_points: usize,
    pub l_max: usize,
    pub radial: RadialBasis,
    pub kernel: KernelKind,
}

impl TfnConfig {
    pub fn param_shapes(&self) -> Vec<(&'static str, Vec<usize>)> {
        vec![("radial", vec![self.l_max + 1, self.radial.count])]
    }
}

/// Tensor-field layer `out_a = sum_(b != a) K(r_a - r_b) s_b` with products in
/// the irrep algebra (components above `l_max` dropped).
pub fn build_tfn<T: Coeff>(cfg: &TfnConfig, params: &Params<T>) -> Result<PointLayer<T>> {
    let b1 = Arc::new(make_b1(cfg.n_points)?.lift::<T>());
    let space = tensor_space(
        vec![
            b1.clone(),
            b1,
            Arc::new(make_so3_algebra(cfg.l_max, TruncationPolicy::Drop).lift::<T>()),
        ],
        vec![Role::Positional, Role::Positional, Role::Feature],
    )?;
    let w = rows(params, "radial", &cfg.param_shapes()[0].1)?;
    let kernel = pair_kernel(space.clone(), 1, so3_kernel(cfg.l_max, cfg.radial, w, cfg.kernel));
    let expr = kernel_conv(&space, kernel)?;
    let manifest = Manifest::new("tfn", &expr)?.with_params(param_map(cfg.param_shapes()));
    Ok(PointLayer {
        built: Built::new(manifest, expr),
        offset: 1,
        n_points: cfg.n_points,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Se3Config {
    pub n_points: usize,
    pub l_max: usize,
    pub radial: RadialBasis,
    pub kernel: KernelKind,
}

impl Se3Config {
    pub fn param_shapes(&self) -> Vec<(&'static str, Vec<usize>)> {
        let l = self.l_max + 1;
        vec![
            ("radial_k", vec![l, self.radial.count]),
            ("radial_v", vec![l, self.radial.count]),
            ("wq", vec![l]),
        ]
    }
}

/// Attention over a neighbour table: `S^Q` is a per-degree scaling of `S`,
/// `S^K` and `S^V` are kernel products, and scores are the `l = 0`
/// component of `S^Q S^K`, exponentiated and normalised over neighbours.
pub fn build_se3_attention<T: Coeff>(
    cfg: &Se3Config,
    params: &Params<T>,
    table: Arc<NeighbourTable>,
) -> Result<PointLayer<T>> {
    if table.len() != cfg.n_points {
        return Err(Error::ShapeMismatch(format!(
            "neighbour table has {} rows for {} points",
            table.len(),
            cfg.n_points
        )));
    }
    let b2 = Arc::new(make_b2(cfg.n_points)?.lift::<T>());
    let space = tensor_space(
        vec![
            b2.clone(),
            b2,
            Arc::new(make_so3_algebra(cfg.l_max, TruncationPolicy::Drop).lift::<T>()),
        ],
        vec![Role::Positional, Role::Positional, Role::Feature],
    )?;
    let shapes = cfg.param_shapes();
    let wk = rows(params, "radial_k", &shapes[0].1)?;
    let wv = rows(params, "radial_v", &shapes[1].1)?;
    let wq = params.get_shaped("wq", &shapes[2].1)?;
    let fd = space.dims()[2];
    let mut qmat = vec![vec![T::zero(); fd]; fd];
    for l in 0..=cfg.l_max {
        for m in -(l as i64)..=(l as i64) {
            let i = lm_index(l, m);
            qmat[i][i] = wq.values[l];
        }
    }
    let flip = || StructuralOperator::Flip { a: 0, b: 1 };
    let mut b = ExprBuilder::new(&space);
    let s = b.slot("S");
    let kk = b.kernel(
        "K",
        s,
        pair_kernel(space.clone(), 0, so3_kernel(cfg.l_max, cfg.radial, wk, cfg.kernel)),
    )?;
    let kv = b.kernel(
        "V",
        s,
        pair_kernel(space.clone(), 0, so3_kernel(cfg.l_max, cfg.radial, wv, cfg.kernel)),
    )?;
    let sk = b.mult(kk, s, flip(), StructuralOperator::Identity)?;
    let sv = b.mult(kv, s, flip(), StructuralOperator::Identity)?;
    let sq = b.structural(StructuralOperator::FactorLinear { factor: 2, matrix: qmat }, s)?;
    let att = b.mult(
        sq,
        sk,
        StructuralOperator::Identity,
        compose(vec![
            StructuralOperator::ScalarProj { factor: 2, keep: vec![0] },
            StructuralOperator::Activation {
                func: Activation::Exp,
                support: Some(vec![None, None, Some(vec![0])]),
            },
            StructuralOperator::Neighbourhood {
                query: 0,
                key: 1,
                table: table.clone(),
                collapse: false,
            },
            StructuralOperator::Normalize { axis: 1 },
        ]),
    )?;
    let out = b.mult(
        att,
        sv,
        StructuralOperator::Identity,
        StructuralOperator::Neighbourhood {
            query: 0,
            key: 1,
            table,
            collapse: true,
        },
    )?;
    let expr = b.finish(out)?;
    let manifest = Manifest::new("se3_attention", &expr)?
        .with_params(param_map(shapes))
        .note("query is a per-degree scaling of the input");
    Ok(PointLayer {
        built: Built::new(manifest, expr),
        offset: 0,
        n_points: cfg.n_points,
    })
}

/// Points on a circle of radius `r` in the xy-plane.
pub fn ring(n: usize, r: f64) -> Vec<[f64; 3]> {
    (0..n)
        .map(|k| {
            let t = 2.0 * PI * k as f64 / n as f64;
            [r * t.cos(), r * t.sin(), 0.0]
        })
        .collect()
}
