use std::cell::{Ref, RefCell};
use std::rc::Rc;

use ndarray::{Array2, ArrayD, Axis, Ix2, IxDyn, Slice};

use super::params::ParamStore;

pub type Tensor = ArrayD<f64>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TensorError {
    #[error("{op}: incompatible shapes {shapes}")]
    Shape { op: &'static str, shapes: String },
    #[error("{op}: {message}")]
    Invalid { op: &'static str, message: String },
    #[error("backward needs a scalar loss, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),
    #[error("unknown parameter '{0}'")]
    UnknownParam(String),
}

type BackFn = Box<dyn Fn(&Tensor) -> Vec<Tensor>>;

struct Node {
    value: Rc<Tensor>,
    parents: Vec<usize>,
    backward: Option<BackFn>,
    requires_grad: bool,
    param: Option<String>,
}

/// Records operations in execution order; node ids are therefore a
/// topological order and backward walks them in reverse.
#[derive(Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
}

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    id: usize,
}

impl std::fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Var#{}{:?}", self.id, self.shape())
    }
}

fn shapes_of(arrays: &[&Tensor]) -> String {
    arrays
        .iter()
        .map(|a| format!("{:?}", a.shape()))
        .collect::<Vec<_>>()
        .join(" and ")
}

pub(crate) fn broadcast_shape(a: &[usize], b: &[usize]) -> Option<Vec<usize>> {
    let n = a.len().max(b.len());
    let mut out = vec![0; n];
    for i in 0..n {
        let da = if i + a.len() >= n {
            a[i + a.len() - n]
        } else {
            1
        };
        let db = if i + b.len() >= n {
            b[i + b.len() - n]
        } else {
            1
        };
        out[i] = match (da, db) {
            (x, y) if x == y => x,
            (1, y) => y,
            (x, 1) => x,
            _ => return None,
        };
    }
    Some(out)
}

/// Sums a broadcast gradient back down to `shape`.
pub(crate) fn reduce_to(grad: &Tensor, shape: &[usize]) -> Tensor {
    let mut g = grad.clone();
    while g.ndim() > shape.len() {
        g = g.sum_axis(Axis(0));
    }
    for (i, &s) in shape.iter().enumerate() {
        if s == 1 && g.shape()[i] != 1 {
            g = g.sum_axis(Axis(i)).insert_axis(Axis(i));
        }
    }
    g
}

fn reshaped(a: &Tensor, shape: &[usize]) -> Tensor {
    a.as_standard_layout()
        .into_owned()
        .into_shape_with_order(IxDyn(shape))
        .expect("element count checked")
}

fn as2(a: &Tensor) -> ndarray::ArrayView2<'_, f64> {
    a.view().into_dimensionality::<Ix2>().expect("rank checked")
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn push(
        &self,
        value: Tensor,
        parents: Vec<usize>,
        backward: Option<BackFn>,
        requires_grad: bool,
        param: Option<String>,
    ) -> Var<'_> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            value: Rc::new(value),
            parents,
            backward,
            requires_grad,
            param,
        });
        Var {
            tape: self,
            id: nodes.len() - 1,
        }
    }

    fn op(&self, value: Tensor, parents: &[Var<'_>], backward: BackFn) -> Var<'_> {
        let requires = {
            let nodes = self.nodes.borrow();
            parents.iter().any(|p| nodes[p.id].requires_grad)
        };
        let ids = parents.iter().map(|p| p.id).collect();
        if requires {
            self.push(value, ids, Some(backward), true, None)
        } else {
            self.push(value, ids, None, false, None)
        }
    }

    /// A leaf that receives a gradient.
    pub fn leaf(&self, value: Tensor) -> Var<'_> {
        self.push(value, vec![], None, true, None)
    }

    pub fn constant(&self, value: Tensor) -> Var<'_> {
        self.push(value, vec![], None, false, None)
    }

    pub fn scalar(&self, x: f64) -> Var<'_> {
        self.constant(ArrayD::from_elem(IxDyn(&[]), x))
    }

    /// Copies a named parameter onto the tape. Trainable parameters get
    /// gradients that [`Gradients::accumulate_into`] adds back to the store.
    pub fn param(&self, store: &ParamStore, name: &str) -> Result<Var<'_>, TensorError> {
        let p = store
            .get(name)
            .ok_or_else(|| TensorError::UnknownParam(name.to_string()))?;
        Ok(self.push(
            p.value.clone(),
            vec![],
            None,
            p.trainable,
            Some(name.to_string()),
        ))
    }

    fn value_rc(&self, id: usize) -> Rc<Tensor> {
        self.nodes.borrow()[id].value.clone()
    }

    pub fn backward(&self, loss: Var<'_>) -> Result<Gradients, TensorError> {
        let nodes = self.nodes.borrow();
        let lv = &nodes[loss.id].value;
        if lv.len() != 1 {
            return Err(TensorError::NonScalarLoss(lv.shape().to_vec()));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; nodes.len()];
        grads[loss.id] = Some(ArrayD::ones(lv.raw_dim()));
        for id in (0..=loss.id).rev() {
            let Some(g) = grads[id].take() else { continue };
            let node = &nodes[id];
            if let Some(back) = &node.backward {
                let parent_grads = back(&g);
                for (&p, pg) in node.parents.iter().zip(parent_grads) {
                    if !nodes[p].requires_grad {
                        continue;
                    }
                    match &mut grads[p] {
                        Some(acc) => *acc += &pg,
                        slot @ None => *slot = Some(pg),
                    }
                }
            }
            grads[id] = Some(g);
        }
        let params = nodes
            .iter()
            .enumerate()
            .filter_map(|(i, n)| n.param.clone().map(|name| (i, name)))
            .collect();
        Ok(Gradients { grads, params })
    }
}

/// Result of one backward pass.
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
    params: Vec<(usize, String)>,
}

impl Gradients {
    pub fn wrt(&self, v: Var<'_>) -> Option<&Tensor> {
        self.grads.get(v.id).and_then(|g| g.as_ref())
    }

    /// Adds parameter gradients to the store's gradient buffers.
    pub fn accumulate_into(&self, store: &mut ParamStore) {
        for (id, name) in &self.params {
            if let (Some(g), Some(p)) = (&self.grads[*id], store.get_mut(name)) {
                if p.trainable {
                    p.grad += g;
                }
            }
        }
    }
}

impl<'t> Var<'t> {
    pub fn id(&self) -> usize {
        self.id
    }

    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    pub fn value(&self) -> Ref<'t, Tensor> {
        Ref::map(self.tape.nodes.borrow(), |n| n[self.id].value.as_ref())
    }

    pub fn shape(&self) -> Vec<usize> {
        self.value().shape().to_vec()
    }

    pub fn item(&self) -> f64 {
        *self.value().first().expect("non-empty tensor")
    }

    fn rc(&self) -> Rc<Tensor> {
        self.tape.value_rc(self.id)
    }

    fn binary(
        self,
        other: Var<'t>,
        op: &'static str,
        f: fn(f64, f64) -> f64,
        grad: fn(&Tensor, &Tensor, &Tensor) -> (Tensor, Tensor),
    ) -> Result<Var<'t>, TensorError> {
        let (a, b) = (self.rc(), other.rc());
        let shape = broadcast_shape(a.shape(), b.shape()).ok_or_else(|| TensorError::Shape {
            op,
            shapes: shapes_of(&[&a, &b]),
        })?;
        let ab = a.broadcast(IxDyn(&shape)).unwrap();
        let bb = b.broadcast(IxDyn(&shape)).unwrap();
        let mut out = ArrayD::zeros(IxDyn(&shape));
        ndarray::Zip::from(&mut out)
            .and(&ab)
            .and(&bb)
            .for_each(|o, &x, &y| *o = f(x, y));
        let back = Box::new(move |g: &Tensor| {
            let (ga, gb) = grad(g, &a, &b);
            vec![reduce_to(&ga, a.shape()), reduce_to(&gb, b.shape())]
        });
        Ok(self.tape.op(out, &[self, other], back))
    }

    pub fn add(self, other: Var<'t>) -> Result<Var<'t>, TensorError> {
        self.binary(other, "add", |x, y| x + y, |g, _, _| (g.clone(), g.clone()))
    }

    pub fn sub(self, other: Var<'t>) -> Result<Var<'t>, TensorError> {
        self.binary(other, "sub", |x, y| x - y, |g, _, _| (g.clone(), -g))
    }

    pub fn mul(self, other: Var<'t>) -> Result<Var<'t>, TensorError> {
        self.binary(other, "mul", |x, y| x * y, |g, a, b| (g * b, g * a))
    }

    fn unary(
        self,
        value: Tensor,
        grad: impl Fn(&Tensor, &Tensor, &Tensor) -> Tensor + 'static,
    ) -> Var<'t> {
        let a = self.rc();
        let out = Rc::new(value);
        let saved = out.clone();
        let back = Box::new(move |g: &Tensor| vec![grad(g, &a, &saved)]);
        let v = self.tape.op((*out).clone(), &[self], back);
        v
    }

    pub fn scale(self, c: f64) -> Var<'t> {
        let v = self.value().mapv(|x| c * x);
        self.unary(v, move |g, _, _| g * c)
    }

    pub fn add_scalar(self, c: f64) -> Var<'t> {
        let v = self.value().mapv(|x| x + c);
        self.unary(v, |g, _, _| g.clone())
    }

    pub fn neg(self) -> Var<'t> {
        self.scale(-1.0)
    }

    pub fn powf(self, p: f64) -> Var<'t> {
        let v = self.value().mapv(|x| x.powf(p));
        self.unary(v, move |g, a, _| g * &a.mapv(|x| p * x.powf(p - 1.0)))
    }

    pub fn square(self) -> Var<'t> {
        let v = self.value().mapv(|x| x * x);
        self.unary(v, |g, a, _| g * &a.mapv(|x| 2.0 * x))
    }

    pub fn sigmoid(self) -> Var<'t> {
        let v = self.value().mapv(sigmoid);
        self.unary(v, |g, _, y| g * &y.mapv(|s| s * (1.0 - s)))
    }

    /// x·σ(x)
    pub fn swish(self) -> Var<'t> {
        let v = self.value().mapv(|x| x * sigmoid(x));
        self.unary(v, |g, a, _| {
            g * &a.mapv(|x| {
                let s = sigmoid(x);
                s + x * s * (1.0 - s)
            })
        })
    }

    pub fn matmul(self, other: Var<'t>) -> Result<Var<'t>, TensorError> {
        let (a, b) = (self.rc(), other.rc());
        if a.ndim() != 2 || b.ndim() != 2 || a.shape()[1] != b.shape()[0] {
            return Err(TensorError::Shape {
                op: "matmul",
                shapes: shapes_of(&[&a, &b]),
            });
        }
        let out = as2(&a).dot(&as2(&b)).into_dyn();
        let back = Box::new(move |g: &Tensor| {
            let g2 = as2(g);
            let ga: Array2<f64> = g2.dot(&as2(&b).t());
            let gb: Array2<f64> = as2(&a).t().dot(&g2);
            vec![ga.into_dyn(), gb.into_dyn()]
        });
        Ok(self.tape.op(out, &[self, other], back))
    }

    pub fn reshape(self, shape: &[usize]) -> Result<Var<'t>, TensorError> {
        let a = self.rc();
        if shape.iter().product::<usize>() != a.len() {
            return Err(TensorError::Shape {
                op: "reshape",
                shapes: format!("{:?} and {:?}", a.shape(), shape),
            });
        }
        let orig = a.shape().to_vec();
        let out = reshaped(&a, shape);
        Ok(self
            .tape
            .op(out, &[self], Box::new(move |g| vec![reshaped(g, &orig)])))
    }

    /// Slice `len` entries starting at `start` along `axis`.
    pub fn narrow(self, axis: usize, start: usize, len: usize) -> Result<Var<'t>, TensorError> {
        let a = self.rc();
        if axis >= a.ndim() || start + len > a.shape()[axis] {
            return Err(TensorError::Shape {
                op: "narrow",
                shapes: format!(
                    "{:?} with axis {axis} range {start}..{}",
                    a.shape(),
                    start + len
                ),
            });
        }
        let out = a
            .slice_axis(Axis(axis), Slice::from(start..start + len))
            .to_owned();
        let shape = a.raw_dim();
        let back = Box::new(move |g: &Tensor| {
            let mut full = ArrayD::zeros(shape.clone());
            full.slice_axis_mut(Axis(axis), Slice::from(start..start + len))
                .assign(g);
            vec![full]
        });
        Ok(self.tape.op(out, &[self], back))
    }

    pub fn sum_axis(self, axis: usize) -> Result<Var<'t>, TensorError> {
        let a = self.rc();
        if axis >= a.ndim() {
            return Err(TensorError::Shape {
                op: "sum_axis",
                shapes: format!("{:?} with axis {axis}", a.shape()),
            });
        }
        let out = a.sum_axis(Axis(axis));
        let shape = a.raw_dim();
        let back = Box::new(move |g: &Tensor| {
            vec![g
                .clone()
                .insert_axis(Axis(axis))
                .broadcast(shape.clone())
                .unwrap()
                .to_owned()]
        });
        Ok(self.tape.op(out, &[self], back))
    }

    pub fn mean_axis(self, axis: usize) -> Result<Var<'t>, TensorError> {
        let n = self.value().shape().get(axis).copied().unwrap_or(1);
        if n == 0 {
            return Err(TensorError::Shape {
                op: "mean_axis",
                shapes: format!("{:?} with axis {axis}", self.shape()),
            });
        }
        Ok(self.sum_axis(axis)?.scale(1.0 / n as f64))
    }

    /// Sum of all entries, as a rank-0 tensor.
    pub fn sum(self) -> Var<'t> {
        let a = self.rc();
        let out = ArrayD::from_elem(IxDyn(&[]), a.sum());
        let shape = a.raw_dim();
        self.tape.op(
            out,
            &[self],
            Box::new(move |g: &Tensor| vec![ArrayD::from_elem(shape.clone(), g.sum())]),
        )
    }

    pub fn mean(self) -> Var<'t> {
        let n = self.value().len().max(1);
        self.sum().scale(1.0 / n as f64)
    }

    /// Rows `indices` of axis 0 (a gather).
    pub fn index_select(self, indices: Rc<Vec<usize>>) -> Result<Var<'t>, TensorError> {
        let a = self.rc();
        let rows = a.shape().first().copied().unwrap_or(0);
        if a.ndim() == 0 || indices.iter().any(|&i| i >= rows) {
            return Err(TensorError::Shape {
                op: "index_select",
                shapes: format!("{:?} with index beyond axis 0", a.shape()),
            });
        }
        let out = a.select(Axis(0), &indices);
        let shape = a.shape().to_vec();
        let back = Box::new(move |g: &Tensor| vec![scatter_rows(g, &indices, shape[0])]);
        Ok(self.tape.op(out, &[self], back))
    }

    /// out[indices[i]] += self[i] along axis 0, with `n_out` output rows.
    pub fn scatter_add(
        self,
        indices: Rc<Vec<usize>>,
        n_out: usize,
    ) -> Result<Var<'t>, TensorError> {
        let a = self.rc();
        if a.ndim() == 0 || a.shape()[0] != indices.len() || indices.iter().any(|&i| i >= n_out) {
            return Err(TensorError::Shape {
                op: "scatter_add",
                shapes: format!(
                    "{:?} with {} indices into {n_out} rows",
                    a.shape(),
                    indices.len()
                ),
            });
        }
        let out = scatter_rows(&a, &indices, n_out);
        let back = Box::new(move |g: &Tensor| vec![g.select(Axis(0), &indices)]);
        Ok(self.tape.op(out, &[self], back))
    }

    /// √(Σ x² + 1e-8) over `axis`; the small offset keeps the gradient finite at zero.
    pub fn l2_norm(self, axis: usize) -> Result<Var<'t>, TensorError> {
        Ok(self.square().sum_axis(axis)?.add_scalar(1e-8).powf(0.5))
    }

    pub fn dot(self, other: Var<'t>, axis: usize) -> Result<Var<'t>, TensorError> {
        self.mul(other)?.sum_axis(axis)
    }

    /// x·W + b with W stored as (in, out).
    pub fn linear(self, weight: Var<'t>, bias: Option<Var<'t>>) -> Result<Var<'t>, TensorError> {
        let y = self.matmul(weight)?;
        match bias {
            Some(b) => y.add(b),
            None => Ok(y),
        }
    }
}

pub fn concat<'t>(parts: &[Var<'t>], axis: usize) -> Result<Var<'t>, TensorError> {
    let first = parts.first().ok_or(TensorError::Invalid {
        op: "concat",
        message: "no inputs".into(),
    })?;
    let values: Vec<Rc<Tensor>> = parts.iter().map(|p| p.rc()).collect();
    let views: Vec<_> = values.iter().map(|v| v.view()).collect();
    let out = ndarray::concatenate(Axis(axis), &views).map_err(|_| TensorError::Shape {
        op: "concat",
        shapes: values
            .iter()
            .map(|v| format!("{:?}", v.shape()))
            .collect::<Vec<_>>()
            .join(" and "),
    })?;
    let widths: Vec<usize> = values.iter().map(|v| v.shape()[axis]).collect();
    let back = Box::new(move |g: &Tensor| {
        let mut start = 0;
        widths
            .iter()
            .map(|&w| {
                let piece = g
                    .slice_axis(Axis(axis), Slice::from(start..start + w))
                    .to_owned();
                start += w;
                piece
            })
            .collect()
    });
    Ok(first.tape.op(out, parts, back))
}

fn scatter_rows(a: &Tensor, indices: &[usize], n_out: usize) -> Tensor {
    let mut shape = a.shape().to_vec();
    shape[0] = n_out;
    let mut out = ArrayD::zeros(IxDyn(&shape));
    for (i, &t) in indices.iter().enumerate() {
        let mut row = out.index_axis_mut(Axis(0), t);
        row += &a.index_axis(Axis(0), i);
    }
    out
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
