use std::cell::RefCell;
use std::collections::HashMap;
use std::rc::Rc;

use super::{Float, Tensor};

type BackFn<T> = Box<dyn FnOnce(&Tensor<T>) -> Vec<Option<Tensor<T>>>>;

struct Node<T> {
    value: Rc<Tensor<T>>,
    parents: Vec<usize>,
    backward: Option<BackFn<T>>,
    requires_grad: bool,
    param: Option<usize>,
}

/// Records a computation so gradients can be pulled back through it.
///
/// A tape built with [`Tape::inference`] stores values only; backward
/// closures (and the activations they capture) are never recorded.
pub struct Tape<T: Float> {
    nodes: RefCell<Vec<Node<T>>>,
    param_nodes: RefCell<HashMap<usize, usize>>,
    grad_enabled: bool,
}

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t, T: Float> {
    pub(crate) tape: &'t Tape<T>,
    pub(crate) id: usize,
}

impl<T: Float> std::fmt::Debug for Var<'_, T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Var#{}{:?}", self.id, self.value().shape())
    }
}

impl<T: Float> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Float> Tape<T> {
    pub fn new() -> Self {
        Tape {
            nodes: RefCell::new(Vec::new()),
            param_nodes: RefCell::new(HashMap::new()),
            grad_enabled: true,
        }
    }

    /// A tape that records values only.
    pub fn inference() -> Self {
        Tape {
            grad_enabled: false,
            ..Self::new()
        }
    }

    pub fn grad_enabled(&self) -> bool {
        self.grad_enabled
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn insert(&self, node: Node<T>) -> Var<'_, T> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(node);
        Var {
            tape: self,
            id: nodes.len() - 1,
        }
    }

    /// A value that never receives gradient.
    pub fn constant(&self, value: Tensor<T>) -> Var<'_, T> {
        self.insert(Node {
            value: Rc::new(value),
            parents: Vec::new(),
            backward: None,
            requires_grad: false,
            param: None,
        })
    }

    /// A leaf whose gradient is reported by [`Tape::backward`].
    pub fn leaf(&self, value: Tensor<T>) -> Var<'_, T> {
        self.insert(Node {
            value: Rc::new(value),
            parents: Vec::new(),
            backward: None,
            requires_grad: self.grad_enabled,
            param: None,
        })
    }

    /// Leaf bound to parameter slot `index`; repeated calls return the same node.
    /// Slots are keyed by index alone, so a tape should only ever see one
    /// parameter store.
    pub fn param(&self, index: usize, value: &Tensor<T>) -> Var<'_, T> {
        if let Some(&id) = self.param_nodes.borrow().get(&index) {
            return Var { tape: self, id };
        }
        let v = self.insert(Node {
            value: Rc::new(value.clone()),
            parents: Vec::new(),
            backward: None,
            requires_grad: self.grad_enabled,
            param: Some(index),
        });
        self.param_nodes.borrow_mut().insert(index, v.id);
        v
    }

    pub(crate) fn push(
        &self,
        value: impl Into<Rc<Tensor<T>>>,
        parents: &[Var<'_, T>],
        backward: impl FnOnce(&Tensor<T>) -> Vec<Option<Tensor<T>>> + 'static,
    ) -> Var<'_, T> {
        let requires_grad = self.grad_enabled && {
            let nodes = self.nodes.borrow();
            parents.iter().any(|p| nodes[p.id].requires_grad)
        };
        self.insert(Node {
            value: value.into(),
            parents: if requires_grad {
                parents.iter().map(|p| p.id).collect()
            } else {
                Vec::new()
            },
            backward: if requires_grad {
                Some(Box::new(backward))
            } else {
                None
            },
            requires_grad,
            param: None,
        })
    }

    pub(crate) fn value_of(&self, id: usize) -> Rc<Tensor<T>> {
        Rc::clone(&self.nodes.borrow()[id].value)
    }

    pub(crate) fn requires_grad(&self, id: usize) -> bool {
        self.nodes.borrow()[id].requires_grad
    }

    /// Reverse sweep from a scalar `loss`. Consumes the recorded closures, so
    /// a tape can be differentiated once.
    pub fn backward(&self, loss: Var<'_, T>) -> Gradients<T> {
        assert_eq!(loss.value().numel(), 1, "backward needs a scalar loss");
        let mut nodes = self.nodes.borrow_mut();
        let mut grads: Vec<Option<Tensor<T>>> = (0..nodes.len()).map(|_| None).collect();
        grads[loss.id] = Some(Tensor::full(nodes[loss.id].value.shape(), T::one()));
        let mut out = Gradients {
            by_param: HashMap::new(),
            by_node: HashMap::new(),
        };
        for id in (0..=loss.id).rev() {
            let Some(g) = grads[id].take() else { continue };
            let node = &mut nodes[id];
            if let Some(back) = node.backward.take() {
                let parent_grads = back(&g);
                debug_assert_eq!(parent_grads.len(), node.parents.len());
                for (&pid, pg) in node.parents.iter().zip(parent_grads) {
                    let Some(pg) = pg else { continue };
                    match &mut grads[pid] {
                        Some(acc) => acc.add_assign(&pg),
                        slot => *slot = Some(pg),
                    }
                }
            } else if node.requires_grad {
                match node.param {
                    Some(p) => {
                        out.by_param.insert(p, g);
                    }
                    None => {
                        out.by_node.insert(id, g);
                    }
                }
            }
        }
        out
    }
}

/// Gradients produced by [`Tape::backward`].
#[derive(Debug, Default)]
pub struct Gradients<T> {
    by_param: HashMap<usize, Tensor<T>>,
    by_node: HashMap<usize, Tensor<T>>,
}

impl<T: Float> Gradients<T> {
    /// Gradient of a parameter slot, `None` when it did not influence the loss.
    pub fn param(&self, index: usize) -> Option<&Tensor<T>> {
        self.by_param.get(&index)
    }

    /// Gradient of a [`Tape::leaf`].
    pub fn wrt(&self, v: Var<'_, T>) -> Option<&Tensor<T>> {
        self.by_node.get(&v.id)
    }

    pub fn params(&self) -> impl Iterator<Item = (usize, &Tensor<T>)> {
        self.by_param.iter().map(|(&k, v)| (k, v))
    }

    pub fn into_params(self) -> HashMap<usize, Tensor<T>> {
        self.by_param
    }
}

impl<'t, T: Float> Var<'t, T> {
    pub fn value(&self) -> Rc<Tensor<T>> {
        self.tape.value_of(self.id)
    }

    pub fn shape(&self) -> Vec<usize> {
        self.value().shape().to_vec()
    }

    pub fn tape(&self) -> &'t Tape<T> {
        self.tape
    }

    pub fn requires_grad(&self) -> bool {
        self.tape.requires_grad(self.id)
    }

    /// Scalar value of a single-element var.
    pub fn item(&self) -> T {
        let v = self.value();
        assert_eq!(v.numel(), 1);
        v.data()[0]
    }
}
