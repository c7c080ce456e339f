//! Product-interaction expressions: DAGs of multiplication operators over one
//! tensor space.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::scalar::{Coeff, C64};
use crate::structural::StructuralOperator;
use crate::tensor::{multiply, same_space, Space, TensorElement};

pub type NodeId = usize;

/// Builds a filter from sample positions, e.g. `K(r_a - r_b)`.
pub type KernelFn<T> = Arc<dyn Fn(&[[f64; 3]]) -> Result<TensorElement<T>> + Send + Sync>;

pub type Bindings<T = C64> = BTreeMap<String, TensorElement<T>>;

#[derive(Clone)]
pub enum Node<T: Coeff = C64> {
    Slot {
        name: String,
    },
    Constant {
        name: String,
        value: TensorElement<T>,
        trainable: bool,
    },
    /// Filter computed from the positions carried by `source`'s value.
    Kernel {
        name: String,
        source: NodeId,
        build: KernelFn<T>,
    },
    /// `post(filter * pre(input))`.
    Mult {
        filter: NodeId,
        input: NodeId,
        pre: StructuralOperator<T>,
        post: StructuralOperator<T>,
    },
    Structural {
        op: StructuralOperator<T>,
        arg: NodeId,
    },
    Sum(Vec<NodeId>),
}

impl<T: Coeff> fmt::Debug for Node<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Node::Slot { name } => write!(f, "slot({name})"),
            Node::Constant { name, trainable, .. } => write!(f, "const({name}, trainable={trainable})"),
            Node::Kernel { name, source, .. } => write!(f, "kernel({name} <- #{source})"),
            Node::Mult { filter, input, pre, post } => write!(
                f,
                "mult(#{filter}, #{input}, pre={}, post={})",
                pre.kind_name(),
                post.kind_name()
            ),
            Node::Structural { op, arg } => write!(f, "{}(#{arg})", op.kind_name()),
            Node::Sum(ids) => write!(f, "sum({ids:?})"),
        }
    }
}

impl<T: Coeff> Node<T> {
    fn children(&self) -> Vec<NodeId> {
        match self {
            Node::Slot { .. } | Node::Constant { .. } => vec![],
            Node::Kernel { source, .. } => vec![*source],
            Node::Mult { filter, input, .. } => vec![*filter, *input],
            Node::Structural { arg, .. } => vec![*arg],
            Node::Sum(ids) => ids.clone(),
        }
    }

    fn remapped(&self, off: usize) -> Node<T> {
        match self {
            Node::Kernel { name, source, build } => Node::Kernel {
                name: name.clone(),
                source: source + off,
                build: build.clone(),
            },
            Node::Mult { filter, input, pre, post } => Node::Mult {
                filter: filter + off,
                input: input + off,
                pre: pre.clone(),
                post: post.clone(),
            },
            Node::Structural { op, arg } => Node::Structural {
                op: op.clone(),
                arg: arg + off,
            },
            Node::Sum(ids) => Node::Sum(ids.iter().map(|i| i + off).collect()),
            other => other.clone(),
        }
    }
}

/// Nodes are stored children-first, so the DAG is acyclic by construction.
#[derive(Clone, Debug)]
pub struct Expr<T: Coeff = C64> {
    space: Space<T>,
    nodes: Vec<Node<T>>,
    output: NodeId,
}

pub struct ExprBuilder<T: Coeff = C64> {
    space: Space<T>,
    nodes: Vec<Node<T>>,
}

impl<T: Coeff> ExprBuilder<T> {
    pub fn new(space: &Space<T>) -> Self {
        ExprBuilder {
            space: space.clone(),
            nodes: Vec::new(),
        }
    }

    fn push(&mut self, node: Node<T>) -> NodeId {
        self.nodes.push(node);
        self.nodes.len() - 1
    }

    fn check_ids(&self, ids: &[NodeId]) -> Result<()> {
        match ids.iter().find(|&&i| i >= self.nodes.len()) {
            Some(&i) => Err(Error::IndexOutOfRange {
                index: i,
                bound: self.nodes.len(),
            }),
            None => Ok(()),
        }
    }

    pub fn slot(&mut self, name: &str) -> NodeId {
        self.push(Node::Slot { name: name.into() })
    }

    pub fn constant(&mut self, name: &str, value: TensorElement<T>, trainable: bool) -> Result<NodeId> {
        if !same_space(value.space(), &self.space) {
            return Err(Error::SpaceMismatch(value.space().name().into(), self.space.name().into()));
        }
        Ok(self.push(Node::Constant {
            name: name.into(),
            value,
            trainable,
        }))
    }

    pub fn kernel(&mut self, name: &str, source: NodeId, build: KernelFn<T>) -> Result<NodeId> {
        self.check_ids(&[source])?;
        Ok(self.push(Node::Kernel {
            name: name.into(),
            source,
            build,
        }))
    }

    pub fn mult(
        &mut self,
        filter: NodeId,
        input: NodeId,
        pre: StructuralOperator<T>,
        post: StructuralOperator<T>,
    ) -> Result<NodeId> {
        self.check_ids(&[filter, input])?;
        pre.validate(&self.space)?;
        post.validate(&self.space)?;
        Ok(self.push(Node::Mult { filter, input, pre, post }))
    }

    pub fn structural(&mut self, op: StructuralOperator<T>, arg: NodeId) -> Result<NodeId> {
        self.check_ids(&[arg])?;
        op.validate(&self.space)?;
        Ok(self.push(Node::Structural { op, arg }))
    }

    pub fn sum(&mut self, ids: Vec<NodeId>) -> Result<NodeId> {
        self.check_ids(&ids)?;
        Ok(self.push(Node::Sum(ids)))
    }

    /// Copy `other`'s nodes in and return the id of its output.
    pub fn append(&mut self, other: &Expr<T>) -> Result<NodeId> {
        if !same_space(&other.space, &self.space) {
            return Err(Error::SpaceMismatch(other.space.name().into(), self.space.name().into()));
        }
        let off = self.nodes.len();
        self.nodes.extend(other.nodes.iter().map(|n| n.remapped(off)));
        Ok(other.output + off)
    }

    pub fn finish(self, output: NodeId) -> Result<Expr<T>> {
        self.check_ids(&[output])?;
        Ok(Expr {
            space: self.space,
            nodes: self.nodes,
            output,
        })
    }
}

impl<T: Coeff> Expr<T> {
    pub fn space(&self) -> &Space<T> {
        &self.space
    }
    pub fn nodes(&self) -> &[Node<T>] {
        &self.nodes
    }
    pub fn output(&self) -> NodeId {
        self.output
    }

    fn reachable(&self) -> Vec<bool> {
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![self.output];
        while let Some(n) = stack.pop() {
            if !seen[n] {
                seen[n] = true;
                stack.extend(self.nodes[n].children());
            }
        }
        seen
    }

    /// Distinct slot names reachable from the output.
    pub fn slots(&self) -> Vec<String> {
        let live = self.reachable();
        let mut names: Vec<String> = self
            .nodes
            .iter()
            .enumerate()
            .filter_map(|(i, n)| match n {
                Node::Slot { name } if live[i] => Some(name.clone()),
                _ => None,
            })
            .collect();
        names.sort();
        names.dedup();
        names
    }

    /// Node ids of the live occurrences of `slot`, in node order.
    pub fn occurrences(&self, slot: &str) -> Vec<NodeId> {
        let live = self.reachable();
        self.nodes
            .iter()
            .enumerate()
            .filter(|(i, n)| live[*i] && matches!(n, Node::Slot { name } if name == slot))
            .map(|(i, _)| i)
            .collect()
    }

    /// Names of trainable constants.
    pub fn trainable_constants(&self) -> Vec<String> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Constant { name, trainable: true, .. } => Some(name.clone()),
                _ => None,
            })
            .collect()
    }

    pub fn eval(&self, bindings: &Bindings<T>) -> Result<TensorElement<T>> {
        Ok(self.eval_many(bindings, &[self.output])?.pop().expect("one value"))
    }

    /// Values of the requested live nodes.
    pub fn eval_many(&self, bindings: &Bindings<T>, ids: &[NodeId]) -> Result<Vec<TensorElement<T>>> {
        let live = self.reachable();
        if let Some(&bad) = ids.iter().find(|&&i| i >= live.len() || !live[i]) {
            return Err(Error::IndexOutOfRange { index: bad, bound: self.nodes.len() });
        }
        let mut vals: Vec<Option<TensorElement<T>>> = vec![None; self.nodes.len()];
        for (i, node) in self.nodes.iter().enumerate() {
            if !live[i] {
                continue;
            }
            let get = |id: NodeId, vals: &[Option<TensorElement<T>>]| vals[id].clone().expect("children first");
            let v = match node {
                Node::Slot { name } => {
                    let v = bindings.get(name).ok_or_else(|| Error::UnboundSlot(name.clone()))?;
                    if !same_space(v.space(), &self.space) {
                        return Err(Error::SpaceMismatch(v.space().name().into(), self.space.name().into()));
                    }
                    v.clone()
                }
                Node::Constant { value, .. } => value.clone(),
                Node::Kernel { name, source, build } => {
                    let src = get(*source, &vals);
                    let pos = src
                        .positions()
                        .ok_or_else(|| Error::PositionMismatch(format!("kernel `{name}` needs positions")))?;
                    let k = build(pos)?;
                    if !same_space(k.space(), &self.space) {
                        return Err(Error::SpaceMismatch(k.space().name().into(), self.space.name().into()));
                    }
                    k.with_positions(Some(pos.clone()))
                }
                Node::Mult { filter, input, pre, post } => {
                    let k = get(*filter, &vals);
                    let x = pre.apply(&get(*input, &vals))?;
                    post.apply(&multiply(&k, &x)?)?
                }
                Node::Structural { op, arg } => op.apply(&get(*arg, &vals))?,
                Node::Sum(ids) => {
                    let mut acc = TensorElement::zero(&self.space);
                    for id in ids {
                        acc = acc.add(&get(*id, &vals))?;
                    }
                    acc
                }
            };
            vals[i] = Some(v);
        }
        Ok(ids.iter().map(|&i| vals[i].clone().expect("live node")).collect())
    }

    /// Polynomial degree of `slot` in the output. Activations, normalisation
    /// and other structural maps keep the degree of their argument; a sum
    /// takes the largest degree.
    pub fn self_interaction_order(&self, slot: &str) -> Result<usize> {
        if self.occurrences(slot).is_empty() {
            return Err(Error::UnknownSlot(slot.into()));
        }
        let mut deg = vec![0usize; self.nodes.len()];
        for (i, n) in self.nodes.iter().enumerate() {
            deg[i] = match n {
                Node::Slot { name } => usize::from(name == slot),
                Node::Constant { .. } | Node::Kernel { .. } => 0,
                Node::Mult { filter, input, .. } => deg[*filter] + deg[*input],
                Node::Structural { arg, .. } => deg[*arg],
                Node::Sum(ids) => ids.iter().map(|j| deg[*j]).max().unwrap_or(0),
            };
        }
        Ok(deg[self.output])
    }

    /// Bind one occurrence of a slot to a trainable constant.
    pub fn replace_slot(&self, occurrence: NodeId, name: &str, value: TensorElement<T>) -> Result<Expr<T>> {
        if !matches!(self.nodes.get(occurrence), Some(Node::Slot { .. })) {
            return Err(Error::UnknownOccurrence(occurrence));
        }
        if !same_space(value.space(), &self.space) {
            return Err(Error::SpaceMismatch(value.space().name().into(), self.space.name().into()));
        }
        let mut out = self.clone();
        out.nodes[occurrence] = Node::Constant {
            name: name.into(),
            value,
            trainable: true,
        };
        Ok(out)
    }

    /// One line per node, for manifests and debugging.
    pub fn describe(&self) -> Vec<String> {
        self.nodes
            .iter()
            .enumerate()
            .map(|(i, n)| format!("#{i} {n:?}{}", if i == self.output { " <- out" } else { "" }))
            .collect()
    }
}

/// Filter of a multiplication operator.
#[derive(Clone, Debug)]
pub enum Filter<T: Coeff = C64> {
    Element(TensorElement<T>),
    Slot(String),
    /// Filter computed from slots, e.g. a gate `F(W(X))`.
    Expr(Box<Expr<T>>),
}

/// `X -> post(K * pre(X))`.
#[derive(Clone, Debug)]
pub struct MultiplicationOperator<T: Coeff = C64> {
    pub pre: StructuralOperator<T>,
    pub filter: Filter<T>,
    pub post: StructuralOperator<T>,
}

impl<T: Coeff> MultiplicationOperator<T> {
    pub fn new(filter: Filter<T>) -> Self {
        MultiplicationOperator {
            pre: StructuralOperator::Identity,
            filter,
            post: StructuralOperator::Identity,
        }
    }

    pub fn with_pre(mut self, op: StructuralOperator<T>) -> Self {
        self.pre = op;
        self
    }

    pub fn with_post(mut self, op: StructuralOperator<T>) -> Self {
        self.post = op;
        self
    }

    fn filter_node(&self, b: &mut ExprBuilder<T>) -> Result<NodeId> {
        match &self.filter {
            Filter::Element(k) => b.constant("K", k.clone(), false),
            Filter::Slot(name) => Ok(b.slot(name)),
            Filter::Expr(e) => b.append(e),
        }
    }

    /// The operator as an expression in `input`.
    pub fn to_expr(&self, space: &Space<T>, input: &str) -> Result<Expr<T>> {
        let mut b = ExprBuilder::new(space);
        let k = self.filter_node(&mut b)?;
        let x = b.slot(input);
        let out = b.mult(k, x, self.pre.clone(), self.post.clone())?;
        b.finish(out)
    }
}

/// `post(K * pre(x))` with the filter bound.
pub fn apply_mult<T: Coeff>(op: &MultiplicationOperator<T>, x: &TensorElement<T>) -> Result<TensorElement<T>> {
    let k = match &op.filter {
        Filter::Element(k) => k,
        Filter::Slot(name) => return Err(Error::UnboundSlot(name.clone())),
        Filter::Expr(e) => return Err(Error::UnboundSlot(e.slots().join(","))),
    };
    op.post.apply(&multiply(k, &op.pre.apply(x)?)?)
}

/// First composition rule: the outer filter becomes `inner`'s output and the
/// outer operator acts on slot `input`.
pub fn compose_filter<T: Coeff>(outer: &MultiplicationOperator<T>, inner: &Expr<T>, input: &str) -> Result<Expr<T>> {
    let mut b = ExprBuilder::new(inner.space());
    let k = b.append(inner)?;
    let x = b.slot(input);
    let out = b.mult(k, x, outer.pre.clone(), outer.post.clone())?;
    b.finish(out)
}

/// Second composition rule: the outer operator keeps its filter and acts on
/// `inner`'s output.
pub fn compose_input<T: Coeff>(outer: &MultiplicationOperator<T>, inner: &Expr<T>) -> Result<Expr<T>> {
    let mut b = ExprBuilder::new(inner.space());
    let w = b.append(inner)?;
    let k = outer.filter_node(&mut b)?;
    let out = b.mult(k, w, outer.pre.clone(), outer.post.clone())?;
    b.finish(out)
}

/// Shape and order summary emitted with every builder.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Manifest {
    pub builder: String,
    pub space: String,
    pub dims: Vec<usize>,
    pub orders: BTreeMap<String, usize>,
    pub params: BTreeMap<String, Vec<usize>>,
    pub truncation: Option<String>,
    pub notes: Vec<String>,
}

impl Manifest {
    pub fn new<T: Coeff>(builder: &str, expr: &Expr<T>) -> Result<Self> {
        let mut orders = BTreeMap::new();
        for s in expr.slots() {
            orders.insert(s.clone(), expr.self_interaction_order(&s)?);
        }
        let space = expr.space();
        let truncation = space
            .factors()
            .iter()
            .find_map(|a| a.truncation().map(|t| t.policy.name().to_string()));
        Ok(Manifest {
            builder: builder.into(),
            space: space.name().into(),
            dims: space.dims().to_vec(),
            orders,
            params: BTreeMap::new(),
            truncation,
            notes: Vec::new(),
        })
    }

    pub fn with_params(mut self, params: BTreeMap<String, Vec<usize>>) -> Self {
        self.params = params;
        self
    }

    pub fn note(mut self, s: &str) -> Self {
        self.notes.push(s.into());
        self
    }
}
