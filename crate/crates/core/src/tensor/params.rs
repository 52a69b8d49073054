use std::collections::BTreeMap;

use ndarray::ArrayD;

use super::tape::Tensor;

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub value: Tensor,
    pub grad: Tensor,
    /// Buffers such as batch-norm running statistics are stored here too,
    /// with `trainable = false`.
    pub trainable: bool,
}

/// Named parameters, iterated in name order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    params: BTreeMap<String, Param>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Tensor, trainable: bool) {
        let grad = ArrayD::zeros(value.raw_dim());
        self.params.insert(
            name.into(),
            Param {
                value,
                grad,
                trainable,
            },
        );
    }

    pub fn get(&self, name: &str) -> Option<&Param> {
        self.params.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Param> {
        self.params.get_mut(name)
    }

    pub fn value(&self, name: &str) -> Option<&Tensor> {
        self.params.get(name).map(|p| &p.value)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.params.contains_key(name)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.params.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Param)> {
        self.params.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Param)> {
        self.params.iter_mut().map(|(k, v)| (k.as_str(), v))
    }

    pub fn zero_grad(&mut self) {
        for p in self.params.values_mut() {
            p.grad.fill(0.0);
        }
    }

    /// Total number of trainable scalars.
    pub fn n_trainable(&self) -> usize {
        self.params
            .values()
            .filter(|p| p.trainable)
            .map(|p| p.value.len())
            .sum()
    }

    /// Copies values (not gradients) of every entry from `other`; names and shapes must match.
    pub fn load_values(&mut self, other: &ParamStore) -> Result<(), String> {
        if self.params.len() != other.params.len() {
            return Err(format!(
                "expected {} tensors, found {}",
                self.params.len(),
                other.params.len()
            ));
        }
        for (name, p) in self.params.iter_mut() {
            let src = other
                .params
                .get(name)
                .ok_or_else(|| format!("missing tensor '{name}'"))?;
            if src.value.shape() != p.value.shape() {
                return Err(format!(
                    "tensor '{name}' has shape {:?}, expected {:?}",
                    src.value.shape(),
                    p.value.shape()
                ));
            }
            p.value.assign(&src.value);
        }
        Ok(())
    }
}
