//! Diagonal state-space models and Mamba-style selective updates.
//!
//! Space `B2(d) (x) A` with feature basis
//! `[e0, hidden 1..=N, channels N+1..=N+d, unit u = N+d+1]`. Inputs are
//! embedded at the channels with the slot origin broadcast; the hidden state
//! lives at `(alpha, 1+i)`; readouts land at `(alpha, 0)`. `e_u` is a left
//! unit so a gate stored at `(alpha, u)` acts as a per-slot scale.

use std::sync::Arc;

use super::expr::{compose_input, Expr, ExprBuilder, Filter, Manifest, MultiplicationOperator, NodeId};
use super::{Bindings, Built};
use crate::algebra::{make_b2, Algebra, AxiomFlags};
use crate::autodiff::Params;
use crate::error::{Error, Result};
use crate::scalar::{Activation, Coeff, Field};
use crate::structural::{compose, StructuralOperator};
use crate::tensor::{embed_hidden, multiply, tensor_space, EmbeddingSpec, Role, Space, TensorElement};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Discretization {
    /// `H <- H + dt (Lambda H + inj)`.
    Euler { dt: f64 },
    /// `H <- exp(dt Lambda) H + dt inj`.
    Zoh { dt: f64 },
    /// `H <- H + G (Lambda H) + G inj` with the input-dependent gate `G`.
    SelectiveEuler,
    /// `H <- exp(G Lambda) H + G inj`.
    SelectiveZoh,
}

impl Discretization {
    pub fn is_selective(self) -> bool {
        matches!(self, Discretization::SelectiveEuler | Discretization::SelectiveZoh)
    }

    pub fn name(self) -> &'static str {
        match self {
            Discretization::Euler { .. } => "euler",
            Discretization::Zoh { .. } => "zoh",
            Discretization::SelectiveEuler => "selective-euler",
            Discretization::SelectiveZoh => "selective-zoh",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DynamicsKind {
    /// Input-independent `B`, `C`.
    Ssm,
    /// `B`, `C` read from the input through the structure constants.
    Mamba,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DynamicsConfig {
    /// Channels (slots).
    pub d: usize,
    /// Hidden size per channel.
    pub n: usize,
    pub kind: DynamicsKind,
    pub disc: Discretization,
}

impl DynamicsConfig {
    pub fn param_shapes(&self) -> Vec<(&'static str, Vec<usize>)> {
        let (d, n) = (self.d, self.n);
        let mut v = vec![("lambda", vec![d, n])];
        match self.kind {
            DynamicsKind::Ssm => {
                v.push(("b", vec![d, n]));
                v.push(("c", vec![d, n]));
            }
            DynamicsKind::Mamba => {
                v.push(("wb", vec![n, d]));
                v.push(("wc", vec![n, d]));
            }
        }
        if self.disc.is_selective() {
            v.push(("wg", vec![d, d]));
            v.push(("bg", vec![d]));
        }
        v
    }

    pub fn feature_dim(&self) -> usize {
        self.n + self.d + 2
    }
    fn hidden(&self, i: usize) -> usize {
        1 + i
    }
    fn chan(&self, a: usize) -> usize {
        self.n + 1 + a
    }
    fn unit(&self) -> usize {
        self.n + self.d + 1
    }
}

/// Hidden-state update and readout, stepped by [`Dynamics::run`].
#[derive(Clone, Debug)]
pub struct Dynamics<T: Coeff> {
    pub cfg: DynamicsConfig,
    pub space: Space<T>,
    /// Input term of the update in slot `X`; gated when selective.
    pub update: Expr<T>,
    /// The gate node inside `update`.
    pub gate_node: Option<NodeId>,
    /// Readout in slots `H` (and `X` for Mamba).
    pub readout: Expr<T>,
    /// `Lambda = sum lambda_(alpha i) g_alpha (x) e_(1+i)`.
    pub generator: TensorElement<T>,
    pub manifest: Manifest,
}

#[derive(Clone, Debug)]
pub struct Trajectory<T: Coeff> {
    /// `y[t][alpha]`.
    pub outputs: Vec<Vec<T>>,
    pub states: Vec<TensorElement<T>>,
}

fn feature_algebra<T: Coeff>(cfg: &DynamicsConfig, params: &Params<T>) -> Result<Algebra<T>> {
    let (d, n) = (cfg.d, cfg.n);
    let one = T::one();
    let mut e = Vec::new();
    match cfg.kind {
        DynamicsKind::Ssm => {
            for i in 0..n {
                e.push((cfg.hidden(i), 0, cfg.hidden(i), one));
                e.push((cfg.hidden(i), cfg.hidden(i), 0, one));
            }
        }
        DynamicsKind::Mamba => {
            let wb = params.get_shaped("wb", &[n, d])?;
            let wc = params.get_shaped("wc", &[n, d])?;
            for i in 0..n {
                for a in 0..d {
                    e.push((cfg.chan(a), 0, cfg.hidden(i), wb.at(&[i, a])));
                    e.push((cfg.chan(a), cfg.hidden(i), 0, wc.at(&[i, a])));
                }
            }
        }
    }
    for k in 0..cfg.feature_dim() {
        e.push((cfg.unit(), k, k, one));
    }
    Algebra::generic("ssm_features", cfg.feature_dim(), e, Field::Real, AxiomFlags::none())
}

fn slot_feature_element<T: Coeff>(
    space: &Space<T>,
    rows: usize,
    cols: usize,
    value: impl Fn(usize, usize) -> Option<(usize, T)>,
) -> Result<TensorElement<T>> {
    let mut entries = Vec::new();
    for a in 0..rows {
        for i in 0..cols {
            if let Some((f, v)) = value(a, i) {
                entries.push((space.ravel(&[a, f])?, v));
            }
        }
    }
    TensorElement::from_flat(space, entries)
}

/// Gate `G = F_sigmoid(W_g X + b)` stored at `(beta, u)`.
fn gate_expr<T: Coeff>(cfg: &DynamicsConfig, space: &Space<T>, params: &Params<T>) -> Result<Expr<T>> {
    let (d, fd, u) = (cfg.d, cfg.feature_dim(), cfg.unit());
    let wg = params.get_shaped("wg", &[d, d])?;
    let bg = params.get_shaped("bg", &[d])?;
    let wt = slot_feature_element(space, d, d, |b, a| Some((cfg.chan(a), wg.at(&[b, a]))))?;
    let mut sum_into_u = vec![vec![T::zero(); fd]; fd];
    for a in 0..d {
        sum_into_u[u][cfg.chan(a)] = T::one();
    }
    let bias = slot_feature_element(space, d, 1, |b, _| Some((u, bg.values[b])))?;
    let mut g = ExprBuilder::new(space);
    let x = g.slot("X");
    let wx = g.structural(
        compose(vec![
            StructuralOperator::Scale { weights: wt },
            StructuralOperator::FactorLinear { factor: 1, matrix: sum_into_u },
        ]),
        x,
    )?;
    let bn = g.constant("bg", bias, true)?;
    let pre = g.sum(vec![wx, bn])?;
    let out = g.structural(
        StructuralOperator::Activation {
            func: Activation::Sigmoid,
            support: Some(vec![None, Some(vec![u])]),
        },
        pre,
    )?;
    g.finish(out)
}

pub fn build_dynamics<T: Coeff>(cfg: &DynamicsConfig, params: &Params<T>) -> Result<Dynamics<T>> {
    if cfg.d == 0 || cfg.n == 0 {
        return Err(Error::InvalidDimension("dynamics needs d, N >= 1".into()));
    }
    let (d, n) = (cfg.d, cfg.n);
    let space = tensor_space(
        vec![Arc::new(make_b2(d)?.lift::<T>()), Arc::new(feature_algebra(cfg, params)?)],
        vec![Role::Hidden, Role::Feature],
    )?;
    let lam = params.get_shaped("lambda", &[d, n])?;
    let generator = slot_feature_element(&space, d, n, |a, i| Some((cfg.hidden(i), lam.at(&[a, i]))))?;
    let transpose = StructuralOperator::HiddenTranspose {
        slot: 0,
        feature: 1,
        channel_offset: cfg.chan(0),
    };

    let (injection, readout) = match cfg.kind {
        DynamicsKind::Ssm => {
            let bb = params.get_shaped("b", &[d, n])?;
            let cb = params.get_shaped("c", &[d, n])?;
            let b_el = slot_feature_element(&space, d, n, |a, i| Some((cfg.hidden(i), bb.at(&[a, i]))))?;
            let c_el = slot_feature_element(&space, d, n, |a, i| Some((cfg.hidden(i), cb.at(&[a, i]))))?;
            let inj = MultiplicationOperator::new(Filter::Element(b_el))
                .with_pre(transpose)
                .to_expr(&space, "X")?;
            let ro = MultiplicationOperator::new(Filter::Element(c_el)).to_expr(&space, "H")?;
            (inj, ro)
        }
        DynamicsKind::Mamba => {
            let inj = MultiplicationOperator::new(Filter::Slot("X".into()))
                .with_pre(transpose)
                .to_expr(&space, "X")?;
            let ro = MultiplicationOperator::new(Filter::Slot("X".into())).to_expr(&space, "H")?;
            (inj, ro)
        }
    };
    let (update, gate_node) = if cfg.disc.is_selective() {
        let gate = gate_expr(cfg, &space, params)?;
        let u = compose_input(&MultiplicationOperator::new(Filter::Expr(Box::new(gate))), &injection)?;
        let g = match &u.nodes()[u.output()] {
            super::Node::Mult { filter, .. } => *filter,
            _ => unreachable!("compose_input ends in a product"),
        };
        (u, Some(g))
    } else {
        (injection, None)
    };
    let builder = match cfg.kind {
        DynamicsKind::Ssm => "ssm",
        DynamicsKind::Mamba => "mamba",
    };
    let manifest = Manifest::new(builder, &update)?
        .with_params(cfg.param_shapes().into_iter().map(|(n, s)| (n.into(), s)).collect())
        .note(&format!("discretization {}", cfg.disc.name()));
    Ok(Dynamics {
        cfg: *cfg,
        space,
        update,
        gate_node,
        readout,
        generator,
        manifest,
    })
}

fn check_finite<T: Coeff>(el: &TensorElement<T>, step: usize) -> Result<()> {
    if el.nonzeros().iter().any(|(_, v)| {
        let c = v.value();
        !c.re.is_finite() || !c.im.is_finite()
    }) {
        return Err(Error::NonFinite { step });
    }
    Ok(())
}

impl<T: Coeff> Dynamics<T> {
    pub fn embed(&self, x: &[f64]) -> Result<TensorElement<T>> {
        if x.len() != self.cfg.d {
            return Err(Error::ShapeMismatch(format!("input has {} channels, expected {}", x.len(), self.cfg.d)));
        }
        embed_hidden(x, &self.space, &EmbeddingSpec::hidden(self.cfg.chan(0)))
    }

    /// An input-shaped element with coefficients `k[alpha]`, for replacing a
    /// slot occurrence by a trainable constant.
    pub fn constant_input(&self, k: &[T]) -> Result<TensorElement<T>> {
        if k.len() != self.cfg.d {
            return Err(Error::ShapeMismatch(format!("constant has {} channels, expected {}", k.len(), self.cfg.d)));
        }
        let ones = self.embed(&vec![1.0; self.cfg.d])?;
        let c0 = self.cfg.chan(0);
        let entries = ones
            .nonzeros()
            .into_iter()
            .map(|(f, _)| (f, k[self.space.unravel(f)[1] - c0]))
            .collect();
        TensorElement::from_flat(&self.space, entries)
    }

    /// Occurrences of `X` in the update as (gate, injection filter,
    /// transposed input); the gate is `None` unless selective.
    pub fn occurrences(&self) -> (Option<NodeId>, NodeId, NodeId) {
        let occ = self.update.occurrences("X");
        match self.cfg.kind {
            DynamicsKind::Mamba => (occ.get(2).copied(), occ[0], occ[1]),
            // The SSM injection filter is the constant B.
            DynamicsKind::Ssm => (occ.get(1).copied(), usize::MAX, occ[0]),
        }
    }

    /// Replace an occurrence in the update by a trainable constant.
    pub fn replace_slot(&self, occurrence: NodeId, name: &str, value: TensorElement<T>) -> Result<Self> {
        let mut out = self.clone();
        out.update = self.update.replace_slot(occurrence, name, value)?;
        Ok(out)
    }

    /// `y_alpha` from a readout element.
    pub fn read_output(&self, el: &TensorElement<T>) -> Result<Vec<T>> {
        (0..self.cfg.d).map(|a| el.get(&[a, 0])).collect()
    }

    /// `h[alpha][i]` from a state element.
    pub fn read_state(&self, el: &TensorElement<T>) -> Result<Vec<Vec<T>>> {
        (0..self.cfg.d)
            .map(|a| (0..self.cfg.n).map(|i| el.get(&[a, self.cfg.hidden(i)])).collect())
            .collect()
    }

    /// One update of the hidden state.
    pub fn step(&self, h: &TensorElement<T>, x: &TensorElement<T>, step: usize) -> Result<TensorElement<T>> {
        let mut b = Bindings::new();
        b.insert("X".to_string(), x.clone());
        let ids: Vec<NodeId> = std::iter::once(self.update.output()).chain(self.gate_node).collect();
        let vals = self.update.eval_many(&b, &ids)?;
        let inj = &vals[0];
        let next = match self.cfg.disc {
            Discretization::Euler { dt } => h.add(&self.generator.hadamard(h)?.add(inj)?.scale(T::from_real(dt)))?,
            Discretization::Zoh { dt } => {
                let decay = StructuralOperator::Activation {
                    func: Activation::Exp,
                    support: Some(vec![None, Some((1..=self.cfg.n).collect())]),
                }
                .apply(&self.generator.scale(T::from_real(dt)))?;
                decay.hadamard(h)?.add(&inj.scale(T::from_real(dt)))?
            }
            Discretization::SelectiveEuler => {
                let g = &vals[1];
                h.add(&multiply(g, &self.generator.hadamard(h)?)?)?.add(inj)?
            }
            Discretization::SelectiveZoh => {
                let g = &vals[1];
                let decay = StructuralOperator::Activation {
                    func: Activation::Exp,
                    support: Some(vec![None, Some((1..=self.cfg.n).collect())]),
                }
                .apply(&multiply(g, &self.generator)?)?;
                decay.hadamard(h)?.add(inj)?
            }
        };
        check_finite(&next, step)?;
        Ok(next)
    }

    /// Run from `H = 0` over `xs[t][alpha]`, reading out after each update.
    pub fn run(&self, xs: &[Vec<f64>]) -> Result<Trajectory<T>> {
        let mut h = TensorElement::zero(&self.space);
        let mut outputs = Vec::with_capacity(xs.len());
        let mut states = Vec::with_capacity(xs.len());
        for (t, x) in xs.iter().enumerate() {
            let xe = self.embed(x)?;
            h = self.step(&h, &xe, t)?;
            let mut b = Bindings::new();
            b.insert("X".to_string(), xe);
            b.insert("H".to_string(), h.clone());
            let y = self.readout.eval(&b)?;
            check_finite(&y, t)?;
            outputs.push(self.read_output(&y)?);
            states.push(h.clone());
        }
        Ok(Trajectory { outputs, states })
    }

    /// The update wrapped as a [`Built`] for order queries.
    pub fn built(&self) -> Built<T> {
        Built::new(self.manifest.clone(), self.update.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::ParamStore;
    use crate::rng;
    use crate::scalar::{sigmoid, C64};

    fn store(cfg: &DynamicsConfig, seed: u64) -> ParamStore {
        let mut s = ParamStore::new(seed);
        let mut r = rng::seeded(seed);
        for (n, shape) in cfg.param_shapes() {
            s.insert_random(n, shape, 0.8, &mut r);
        }
        s
    }

    fn cfg(kind: DynamicsKind, disc: Discretization) -> DynamicsConfig {
        DynamicsConfig { d: 2, n: 3, kind, disc }
    }

    #[test]
    fn orders() {
        let cases = [
            (DynamicsKind::Ssm, Discretization::Euler { dt: 0.1 }, 1),
            (DynamicsKind::Mamba, Discretization::Euler { dt: 0.1 }, 2),
            (DynamicsKind::Mamba, Discretization::SelectiveZoh, 3),
            (DynamicsKind::Ssm, Discretization::SelectiveEuler, 2),
        ];
        for (kind, disc, want) in cases {
            let c = cfg(kind, disc);
            let dy = build_dynamics::<C64>(&c, &store(&c, 1).to_params()).unwrap();
            assert_eq!(dy.update.self_interaction_order("X").unwrap(), want, "{kind:?} {disc:?}");
        }
    }

    #[test]
    fn single_selective_step_by_hand() {
        let c = cfg(DynamicsKind::Mamba, Discretization::SelectiveZoh);
        let s = store(&c, 4);
        let dy = build_dynamics::<C64>(&c, &s.to_params()).unwrap();
        let x = [0.3, -0.7];
        let tr = dy.run(&[x.to_vec()]).unwrap();
        let h = dy.read_state(&tr.states[0]).unwrap();
        let (wb, wc) = (s.block("wb").unwrap(), s.block("wc").unwrap());
        let (wg, bg) = (s.block("wg").unwrap(), s.block("bg").unwrap());
        let mut y = [0.0; 2];
        for a in 0..2 {
            let delta = sigmoid((0..2).map(|b| wg.at(&[a, b]) * x[b]).sum::<f64>() + bg.values[a]);
            for i in 0..3 {
                let bx: f64 = (0..2).map(|b| wb.at(&[i, b]) * x[b]).sum();
                let want = delta * bx * x[a];
                assert!((h[a][i].re - want).abs() < 1e-14);
                let cx: f64 = (0..2).map(|b| wc.at(&[i, b]) * x[b]).sum();
                y[a] += cx * want;
            }
            assert!((tr.outputs[0][a].re - y[a]).abs() < 1e-14);
        }
    }

    #[test]
    fn replacing_the_gate_drops_order() {
        let c = cfg(DynamicsKind::Mamba, Discretization::SelectiveZoh);
        let dy = build_dynamics::<C64>(&c, &store(&c, 2).to_params()).unwrap();
        let (g, inj, tr) = dy.occurrences();
        assert!(inj != tr);
        let k = dy.embed(&[1.0, 1.0]).unwrap();
        let r = dy.replace_slot(g.unwrap(), "k", k).unwrap();
        assert_eq!(r.update.self_interaction_order("X").unwrap(), 2);
        assert!(r.run(&vec![vec![0.1, 0.2]; 3]).is_ok());
    }

    #[test]
    fn blow_up_reports_step() {
        let c = cfg(DynamicsKind::Ssm, Discretization::Euler { dt: 1.0 });
        let mut s = store(&c, 0);
        s.block_mut("lambda").unwrap().values.iter_mut().for_each(|v| *v = 1e200);
        let dy = build_dynamics::<C64>(&c, &s.to_params()).unwrap();
        let err = dy.run(&vec![vec![1.0, 1.0]; 5]).unwrap_err();
        assert!(matches!(err, Error::NonFinite { .. }), "{err:?}");
    }
}
