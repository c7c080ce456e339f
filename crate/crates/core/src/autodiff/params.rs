//! Named parameter blocks.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::tape::{CVar, Var};
use crate::error::{Error, Result};
use crate::rng::{self, Rng64};
use crate::scalar::{Coeff, C64};

#[derive(Clone, Debug)]
pub struct Block<T> {
    pub shape: Vec<usize>,
    pub values: Vec<T>,
}

impl<T: Copy> Block<T> {
    pub fn new(shape: Vec<usize>, values: Vec<T>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != values.len() {
            return Err(Error::ShapeMismatch(format!("{} values for shape {:?}", values.len(), shape)));
        }
        Ok(Block { shape, values })
    }

    pub fn at(&self, idx: &[usize]) -> T {
        let mut flat = 0;
        for (i, d) in idx.iter().zip(&self.shape) {
            flat = flat * d + i;
        }
        self.values[flat]
    }

    /// Rows of a rank-2 block.
    pub fn matrix(&self) -> Vec<Vec<T>> {
        let cols = *self.shape.last().unwrap_or(&1);
        self.values.chunks(cols.max(1)).map(<[T]>::to_vec).collect()
    }

    pub fn expect_shape(&self, name: &str, shape: &[usize]) -> Result<()> {
        if self.shape != shape {
            return Err(Error::ShapeMismatch(format!(
                "block `{name}` has shape {:?}, expected {:?}",
                self.shape, shape
            )));
        }
        Ok(())
    }
}

/// Parameter values in the evaluation scalar type.
#[derive(Clone, Debug)]
pub struct Params<T: Coeff = C64> {
    blocks: BTreeMap<String, Block<T>>,
}

impl<T: Coeff> Default for Params<T> {
    fn default() -> Self {
        Params { blocks: BTreeMap::new() }
    }
}

impl<T: Coeff> Params<T> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: &str, block: Block<T>) {
        self.blocks.insert(name.to_string(), block);
    }

    pub fn get(&self, name: &str) -> Result<&Block<T>> {
        self.blocks.get(name).ok_or_else(|| Error::MissingBlock(name.to_string()))
    }

    pub fn get_shaped(&self, name: &str, shape: &[usize]) -> Result<&Block<T>> {
        let b = self.get(name)?;
        b.expect_shape(name, shape)?;
        Ok(b)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.blocks.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.blocks.keys().map(String::as_str)
    }

    /// Shapes of every block, for manifests.
    pub fn shapes(&self) -> BTreeMap<String, Vec<usize>> {
        self.blocks.iter().map(|(k, b)| (k.clone(), b.shape.clone())).collect()
    }
}

/// Real trainable values plus their last gradients.
#[derive(Clone, Debug, Default)]
pub struct ParamStore {
    blocks: BTreeMap<String, Block<f64>>,
    grads: BTreeMap<String, Vec<f64>>,
    pub seed: u64,
}

impl ParamStore {
    pub fn new(seed: u64) -> Self {
        ParamStore {
            seed,
            ..Default::default()
        }
    }

    pub fn insert(&mut self, name: &str, shape: Vec<usize>, values: Vec<f64>) -> Result<()> {
        let b = Block::new(shape, values)?;
        self.grads.insert(name.to_string(), vec![0.0; b.values.len()]);
        self.blocks.insert(name.to_string(), b);
        Ok(())
    }

    /// Uniform values in (-scale, scale).
    pub fn insert_random(&mut self, name: &str, shape: Vec<usize>, scale: f64, rng: &mut Rng64) {
        let n = shape.iter().product();
        let v = rng::vec(rng, n, scale);
        self.insert(name, shape, v).expect("shape matches");
    }

    pub fn block(&self, name: &str) -> Result<&Block<f64>> {
        self.blocks.get(name).ok_or_else(|| Error::MissingBlock(name.to_string()))
    }

    pub fn block_mut(&mut self, name: &str) -> Result<&mut Block<f64>> {
        self.blocks.get_mut(name).ok_or_else(|| Error::MissingBlock(name.to_string()))
    }

    pub fn grad(&self, name: &str) -> Result<&[f64]> {
        self.grads
            .get(name)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::MissingBlock(name.to_string()))
    }

    pub fn set_grads(&mut self, flat: &[f64]) {
        let mut off = 0;
        for g in self.grads.values_mut() {
            let n = g.len();
            g.copy_from_slice(&flat[off..off + n]);
            off += n;
        }
    }

    pub fn names(&self) -> Vec<String> {
        self.blocks.keys().cloned().collect()
    }

    pub fn len(&self) -> usize {
        self.blocks.values().map(|b| b.values.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All values in block-name order.
    pub fn flat(&self) -> Vec<f64> {
        self.blocks.values().flat_map(|b| b.values.iter().copied()).collect()
    }

    pub fn set_flat(&mut self, v: &[f64]) {
        let mut off = 0;
        for b in self.blocks.values_mut() {
            let n = b.values.len();
            b.values.copy_from_slice(&v[off..off + n]);
            off += n;
        }
    }

    /// Location of flat index `i` as (block name, offset).
    pub fn locate(&self, mut i: usize) -> Option<(String, usize)> {
        for (k, b) in &self.blocks {
            if i < b.values.len() {
                return Some((k.clone(), i));
            }
            i -= b.values.len();
        }
        None
    }

    pub fn to_params<T: Coeff>(&self) -> Params<T> {
        Params {
            blocks: self
                .blocks
                .iter()
                .map(|(k, b)| {
                    (
                        k.clone(),
                        Block {
                            shape: b.shape.clone(),
                            values: b.values.iter().map(|v| T::from_real(*v)).collect(),
                        },
                    )
                })
                .collect(),
        }
    }

    /// Fresh tape leaves for every value, in flat order.
    pub fn to_taped(&self) -> (Params<CVar>, Vec<Var>) {
        let mut leaves = Vec::with_capacity(self.len());
        let blocks = self
            .blocks
            .iter()
            .map(|(k, b)| {
                let values = b
                    .values
                    .iter()
                    .map(|v| {
                        let l = Var::leaf(*v);
                        leaves.push(l);
                        CVar::real(l)
                    })
                    .collect();
                (k.clone(), Block { shape: b.shape.clone(), values })
            })
            .collect();
        (Params { blocks }, leaves)
    }

    /// Checkpoint text: one `param <name> <shape>` header per block followed
    /// by its values, numbers as in the algebra files.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, b) in &self.blocks {
            let shape: Vec<String> = b.shape.iter().map(usize::to_string).collect();
            writeln!(s, "param {k} {}", shape.join("x")).unwrap();
            for v in &b.values {
                writeln!(s, "{v:.16e}").unwrap();
            }
        }
        s
    }

    pub fn from_text(text: &str, seed: u64) -> Result<Self> {
        let mut store = ParamStore::new(seed);
        let mut cur: Option<(String, Vec<usize>, Vec<f64>)> = None;
        let finish = |c: Option<(String, Vec<usize>, Vec<f64>)>, store: &mut ParamStore| -> Result<()> {
            if let Some((n, s, v)) = c {
                store.insert(&n, s, v)?;
            }
            Ok(())
        };
        for (ln, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix("param ") {
                finish(cur.take(), &mut store)?;
                let mut it = rest.split_whitespace();
                let name = it.next().unwrap_or_default().to_string();
                let shape = it
                    .next()
                    .unwrap_or_default()
                    .split('x')
                    .map(|d| d.parse::<usize>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|_| Error::Parse { line: ln + 1, msg: "bad shape".into() })?;
                cur = Some((name, shape, Vec::new()));
            } else {
                let v: f64 = line.parse().map_err(|_| Error::Parse {
                    line: ln + 1,
                    msg: format!("bad number `{line}`"),
                })?;
                cur.as_mut()
                    .ok_or_else(|| Error::Parse { line: ln + 1, msg: "value before header".into() })?
                    .2
                    .push(v);
            }
        }
        finish(cur.take(), &mut store)?;
        Ok(store)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checkpoint_round_trip() {
        let mut s = ParamStore::new(1);
        let mut r = crate::rng::seeded(1);
        s.insert_random("w", vec![2, 3], 1.0, &mut r);
        s.insert_random("b", vec![3], 1.0, &mut r);
        let t = ParamStore::from_text(&s.to_text(), 1).unwrap();
        assert_eq!(t.flat(), s.flat());
        assert_eq!(t.block("w").unwrap().shape, vec![2, 3]);
        assert_eq!(s.locate(3), Some(("w".to_string(), 0)));
    }

    #[test]
    fn block_indexing() {
        let b = Block::new(vec![2, 2, 2], (0..8).map(|v| v as f64).collect()).unwrap();
        assert_eq!(b.at(&[1, 0, 1]), 5.0);
        assert!(Block::new(vec![2], vec![1.0]).is_err());
        let p: Params = ParamStore::new(0).to_params();
        assert_eq!(p.get("x").unwrap_err(), Error::MissingBlock("x".into()));
    }
}
