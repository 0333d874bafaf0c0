use std::cell::{Ref, RefCell};
use std::collections::HashSet;
use std::rc::Rc;
use std::sync::atomic::{AtomicU64, Ordering};

use super::array::Array;
use crate::error::{CoreError, Result};

static NEXT_ID: AtomicU64 = AtomicU64::new(0);

type BackFn = Box<dyn Fn(&Array, &[Var])>;

struct Node {
    id: u64,
    value: RefCell<Array>,
    needs_grad: bool,
    grad: RefCell<Option<Array>>,
    parents: Vec<Var>,
    backward: Option<BackFn>,
}

/// A value in the computation graph. Cloning is cheap (shared node).
///
/// Gradient accumulation is additive across uses within one backward pass
/// and across passes until [`Var::zero_grad`] is called.
#[derive(Clone)]
pub struct Var {
    node: Rc<Node>,
}

impl Var {
    fn new(value: Array, needs_grad: bool, parents: Vec<Var>, backward: Option<BackFn>) -> Self {
        Var {
            node: Rc::new(Node {
                id: NEXT_ID.fetch_add(1, Ordering::Relaxed),
                value: RefCell::new(value),
                needs_grad,
                grad: RefCell::new(None),
                parents,
                backward,
            }),
        }
    }

    /// Leaf that participates in gradient computation (a trainable value).
    pub fn leaf(value: Array) -> Self {
        Var::new(value, true, Vec::new(), None)
    }

    /// Leaf excluded from gradient computation.
    pub fn constant(value: Array) -> Self {
        Var::new(value, false, Vec::new(), None)
    }

    pub(crate) fn from_op(value: Array, parents: Vec<Var>, backward: BackFn) -> Result<Self> {
        value.check_finite("operation output")?;
        let needs_grad = parents.iter().any(|p| p.needs_grad());
        let backward = if needs_grad { Some(backward) } else { None };
        Ok(Var::new(value, needs_grad, parents, backward))
    }

    pub fn needs_grad(&self) -> bool {
        self.node.needs_grad
    }

    pub fn value(&self) -> Ref<'_, Array> {
        self.node.value.borrow()
    }

    pub fn value_clone(&self) -> Array {
        self.node.value.borrow().clone()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.node.value.borrow().shape().to_vec()
    }

    /// Replace the value of a leaf. Only meaningful between graph builds.
    pub fn set_value(&self, value: Array) {
        debug_assert!(self.node.parents.is_empty(), "set_value on non-leaf");
        *self.node.value.borrow_mut() = value;
    }

    pub fn grad(&self) -> Option<Array> {
        self.node.grad.borrow().clone()
    }

    pub fn zero_grad(&self) {
        *self.node.grad.borrow_mut() = None;
    }

    pub(crate) fn accumulate_grad(&self, g: &Array) {
        if !self.node.needs_grad {
            return;
        }
        let mut slot = self.node.grad.borrow_mut();
        match slot.as_mut() {
            Some(acc) => acc.add_assign(g),
            None => *slot = Some(g.clone()),
        }
    }

    /// Reverse-mode pass from a scalar output.
    pub fn backward(&self) -> Result<()> {
        {
            let v = self.value();
            if v.len() != 1 {
                return Err(CoreError::Shape(
                    "backward requires a scalar output".into(),
                ));
            }
        }
        self.accumulate_grad(&Array::scalar(1.0));

        // Nodes are created in topological order, so decreasing id is a
        // valid reverse topological order.
        let mut reachable: Vec<Var> = Vec::new();
        let mut seen: HashSet<u64> = HashSet::new();
        let mut stack = vec![self.clone()];
        while let Some(v) = stack.pop() {
            if !v.node.needs_grad || !seen.insert(v.node.id) {
                continue;
            }
            for p in &v.node.parents {
                stack.push(p.clone());
            }
            reachable.push(v);
        }
        reachable.sort_by(|a, b| b.node.id.cmp(&a.node.id));

        for v in &reachable {
            let grad = v.node.grad.borrow().clone();
            if let (Some(g), Some(back)) = (grad, v.node.backward.as_ref()) {
                back(&g, &v.node.parents);
                // Intermediate grads are no longer needed once propagated.
                if v.node.backward.is_some() {
                    *v.node.grad.borrow_mut() = None;
                }
            }
        }
        // Restore this node's own grad if it was an intermediate (useful for
        // callers inspecting the output grad); leaves keep theirs.
        Ok(())
    }
}

/// Named trainable array. Frozen parameters never receive optimiser updates.
#[derive(Clone)]
pub struct Parameter {
    pub name: String,
    pub var: Var,
    pub frozen: bool,
}

impl Parameter {
    pub fn new(name: impl Into<String>, value: Array) -> Self {
        Parameter {
            name: name.into(),
            var: Var::leaf(value),
            frozen: false,
        }
    }

    pub fn frozen(name: impl Into<String>, value: Array) -> Self {
        Parameter {
            name: name.into(),
            var: Var::leaf(value),
            frozen: true,
        }
    }

    pub fn value(&self) -> Array {
        self.var.value_clone()
    }

    pub fn set_value(&self, value: Array) {
        self.var.set_value(value);
    }
}
