use pi_engine::autodiff::{grad, grad_check, symmetry_regularizer, train, Objective, ParamStore, Params, Sgd, TrainConfig};
use pi_engine::interaction::attention::{build_attention, AttentionConfig, AttentionVariant};
use pi_engine::interaction::bind;
use pi_engine::interaction::conv::{build_conv2d, read_image, ConvConfig, ConvConstraint};
use pi_engine::oracles;
use pi_engine::tensor::embed_image2d;
use pi_engine::{rng, Coeff, Result};

type Mat = Vec<Vec<f64>>;

fn conv_out<T: Coeff>(cfg: &ConvConfig, p: &Params<T>, x: &Mat) -> Result<Vec<Vec<T>>> {
    let b = build_conv2d(cfg, p)?;
    read_image(&b.expr.eval(&bind("X", embed_image2d(x, b.expr.space())?))?)
}

struct FitIdentity {
    cfg: ConvConfig,
    images: Vec<Mat>,
}

impl Objective for FitIdentity {
    fn loss<T: Coeff>(&self, p: &Params<T>) -> Result<T> {
        let mut acc = T::zero();
        let mut n = 0;
        for x in &self.images {
            for (row, want) in conv_out(&self.cfg, p, x)?.iter().zip(x) {
                for (y, t) in row.iter().zip(want) {
                    acc = acc + (*y - T::from_real(*t)).norm_sqr();
                    n += 1;
                }
            }
        }
        Ok(acc.scale(1.0 / n as f64))
    }
}

#[test]
fn one_by_one_conv_learns_identity() {
    let cfg = ConvConfig::new(4, 4, 1, 1, ConvConstraint::Symmetric);
    let mut r = rng::seeded(3);
    let obj = FitIdentity { cfg, images: (0..2).map(|_| rng::mat(&mut r, 4, 4, 1.0)).collect() };
    let mut s = ParamStore::new(0);
    s.insert("kernel", vec![1, 1], vec![0.2]).unwrap();
    let tc = TrainConfig { steps: 200, sgd: Sgd { lr: 0.5, momentum: 0.0 }, ..Default::default() };
    let trace = train(&obj, &mut s, &tc).unwrap();
    assert!(trace.final_loss().unwrap() < 1e-6, "{:?}", trace.final_loss());
    assert!((s.block("kernel").unwrap().values[0] - 1.0).abs() < 1e-3);
}

struct Probe {
    cfg: ConvConfig,
    x: Mat,
    g: Mat,
}

impl Objective for Probe {
    fn loss<T: Coeff>(&self, p: &Params<T>) -> Result<T> {
        let out = conv_out(&self.cfg, p, &self.x)?;
        let mut acc = T::zero();
        for (row, grow) in out.iter().zip(&self.g) {
            for (y, w) in row.iter().zip(grow) {
                acc = acc + y.scale(*w);
            }
        }
        Ok(acc)
    }
}

#[test]
fn conv_kernel_gradient_is_patch_correlation() {
    let mut r = rng::seeded(9);
    let cfg = ConvConfig::new(5, 6, 3, 2, ConvConstraint::Symmetric);
    let obj = Probe { cfg, x: rng::mat(&mut r, 5, 6, 1.0), g: rng::mat(&mut r, 5, 6, 1.0) };
    let mut s = ParamStore::new(0);
    s.insert_random("kernel", vec![3, 2], 1.0, &mut r);
    let (_, g) = grad(&obj, &s).unwrap();
    let want = oracles::xcorr2d_kernel_grad(&obj.x, &obj.g, 3, 2);
    for (a, b) in g.iter().zip(want.iter().flatten()) {
        assert!((a - b).abs() < 1e-12, "{a} {b}");
    }
}

struct AttnFit {
    cfg: AttentionConfig,
    x: Mat,
    target: Mat,
}

impl Objective for AttnFit {
    fn loss<T: Coeff>(&self, p: &Params<T>) -> Result<T> {
        let out = build_attention(&self.cfg, p)?.forward(&self.x, None)?;
        let mut acc = T::zero();
        for (row, t) in out.iter().zip(&self.target) {
            for (y, v) in row.iter().zip(t) {
                acc = acc + (*y - T::from_real(*v)).norm_sqr();
            }
        }
        Ok(acc)
    }
}

#[test]
fn attention_gradients_match_finite_differences() {
    let cfg = AttentionConfig::new(4, 3, AttentionVariant::Softmax);
    let mut r = rng::seeded(21);
    let obj = AttnFit { cfg, x: rng::mat(&mut r, 4, 3, 1.0), target: rng::mat(&mut r, 4, 3, 1.0) };
    let mut s = ParamStore::new(0);
    for (n, shape) in cfg.param_shapes() {
        s.insert_random(n, shape, 0.7, &mut r);
    }
    let idx: Vec<usize> = (0..20).map(|i| (i * 7) % s.len()).collect();
    for c in grad_check(&obj, &s, &idx).unwrap() {
        assert!(c.rel_err <= 1e-5, "{c:?}");
    }
}

struct Reg;

impl Objective for Reg {
    fn loss<T: Coeff>(&self, p: &Params<T>) -> Result<T> {
        symmetry_regularizer(p.get("lambda")?)
    }
}

#[test]
fn regularizer_gradient_matches_finite_differences() {
    let mut s = ParamStore::new(0);
    s.insert_random("lambda", vec![2, 4, 4], 1.0, &mut rng::seeded(5));
    let all: Vec<usize> = (0..s.len()).collect();
    for c in grad_check(&Reg, &s, &all).unwrap() {
        assert!(c.rel_err <= 1e-6, "{c:?}");
    }
}

#[test]
fn training_is_deterministic() {
    let cfg = ConvConfig::new(4, 4, 2, 2, ConvConstraint::Symmetric);
    let mut r = rng::seeded(1);
    let obj = FitIdentity { cfg, images: vec![rng::mat(&mut r, 4, 4, 1.0)] };
    let mut a = ParamStore::new(0);
    a.insert_random("kernel", vec![2, 2], 0.5, &mut r);
    let mut b = a.clone();
    let tc = TrainConfig { steps: 20, sgd: Sgd { lr: 0.1, momentum: 0.9 }, ..Default::default() };
    assert_eq!(train(&obj, &mut a, &tc).unwrap(), train(&obj, &mut b, &tc).unwrap());
    assert_eq!(a.flat(), b.flat());
}
