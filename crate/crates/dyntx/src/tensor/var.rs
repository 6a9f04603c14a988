//! Reverse-mode automatic differentiation over `ndarray` tensors.
//!
//! A [`Var`] is a reference-counted node in a dynamically built DAG. Ops only
//! record parents and a backward closure when some ancestor requires
//! gradients, so inference code built from the same ops retains nothing and
//! frees intermediates as they go out of scope.

use super::scalar::Scalar;
use ndarray::ArrayD;
use std::cell::RefCell;
use std::collections::HashSet;
use std::rc::Rc;

/// Computes gradient contributions for each parent given (node, upstream grad).
pub(crate) type BackwardFn<F> =
    Box<dyn Fn(&Node<F>, &ArrayD<F>) -> Vec<Option<ArrayD<F>>>>;

pub struct Node<F: Scalar> {
    pub(crate) data: ArrayD<F>,
    pub(crate) grad: RefCell<Option<ArrayD<F>>>,
    pub(crate) requires_grad: bool,
    pub(crate) parents: Vec<Var<F>>,
    pub(crate) backward: Option<BackwardFn<F>>,
}

#[derive(Clone)]
pub struct Var<F: Scalar>(pub(crate) Rc<Node<F>>);

impl<F: Scalar> Var<F> {
    /// Leaf node. Trainable leaves collect gradients during `backward`.
    pub fn leaf(data: ArrayD<F>, requires_grad: bool) -> Self {
        Var(Rc::new(Node {
            data,
            grad: RefCell::new(None),
            requires_grad,
            parents: Vec::new(),
            backward: None,
        }))
    }

    pub fn constant(data: ArrayD<F>) -> Self {
        Self::leaf(data, false)
    }

    /// Internal op constructor. Skips all bookkeeping when no parent needs grads.
    pub(crate) fn from_op(
        data: ArrayD<F>,
        parents: Vec<Var<F>>,
        backward: BackwardFn<F>,
    ) -> Self {
        let requires_grad = parents.iter().any(|p| p.0.requires_grad);
        if !requires_grad {
            return Self::constant(data);
        }
        Var(Rc::new(Node {
            data,
            grad: RefCell::new(None),
            requires_grad: true,
            parents,
            backward: Some(backward),
        }))
    }

    pub fn data(&self) -> &ArrayD<F> {
        &self.0.data
    }

    pub fn shape(&self) -> &[usize] {
        self.0.data.shape()
    }

    pub fn requires_grad(&self) -> bool {
        self.0.requires_grad
    }

    /// Value of a 0-dimensional tensor.
    pub fn scalar_value(&self) -> F {
        debug_assert_eq!(self.0.data.ndim(), 0, "scalar_value on non-scalar");
        self.0.data.iter().next().copied().unwrap_or_else(F::zero)
    }

    /// Removes and returns the accumulated gradient (leaves only, after `backward`).
    pub fn take_grad(&self) -> Option<ArrayD<F>> {
        self.0.grad.borrow_mut().take()
    }

    /// Backpropagate from a scalar root with seed gradient 1.
    pub fn backward(&self) {
        assert_eq!(self.0.data.ndim(), 0, "backward requires a scalar root");
        self.backward_with(ArrayD::ones(self.0.data.raw_dim()));
    }

    pub fn backward_with(&self, seed: ArrayD<F>) {
        if !self.0.requires_grad {
            return;
        }
        assert_eq!(seed.shape(), self.0.data.shape(), "seed shape mismatch");
        accumulate(&self.0.grad, seed);

        // Iterative DFS postorder over parent edges; every listed node is an
        // ancestor of the root, so its gradient is complete by the time the
        // reversed order reaches it.
        let order = topo_postorder(self);
        for var in order.iter().rev() {
            let node = &*var.0;
            let Some(backward) = &node.backward else {
                continue;
            };
            let upstream = node
                .grad
                .borrow_mut()
                .take()
                .expect("interior node missing gradient");
            let contributions = backward(node, &upstream);
            debug_assert_eq!(contributions.len(), node.parents.len());
            for (parent, contribution) in node.parents.iter().zip(contributions) {
                if !parent.0.requires_grad {
                    continue;
                }
                let g = contribution.expect("missing gradient for differentiable parent");
                debug_assert_eq!(g.shape(), parent.0.data.shape());
                accumulate(&parent.0.grad, g);
            }
        }
    }
}

fn accumulate<F: Scalar>(slot: &RefCell<Option<ArrayD<F>>>, g: ArrayD<F>) {
    let mut slot = slot.borrow_mut();
    match slot.as_mut() {
        Some(existing) => *existing += &g,
        None => *slot = Some(g),
    }
}

fn topo_postorder<F: Scalar>(root: &Var<F>) -> Vec<Var<F>> {
    let mut order = Vec::new();
    let mut visited: HashSet<*const Node<F>> = HashSet::new();
    // stack of (node, next parent index to visit)
    let mut stack: Vec<(Var<F>, usize)> = Vec::new();
    if visited.insert(Rc::as_ptr(&root.0)) {
        stack.push((root.clone(), 0));
    }
    while let Some((var, idx)) = stack.pop() {
        let parents = &var.0.parents;
        let mut advanced = false;
        let mut i = idx;
        while i < parents.len() {
            let p = &parents[i];
            i += 1;
            if p.0.requires_grad && visited.insert(Rc::as_ptr(&p.0)) {
                stack.push((var.clone(), i));
                stack.push((p.clone(), 0));
                advanced = true;
                break;
            }
        }
        if !advanced {
            order.push(var);
        }
    }
    order
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr0;

    fn scalar(v: f64, grad: bool) -> Var<f64> {
        Var::leaf(arr0(v).into_dyn(), grad)
    }

    #[test]
    fn reused_node_accumulates_gradient() {
        // y = x * x; dy/dx = 2x
        let x = scalar(3.0, true);
        let y = x.mul(&x);
        y.backward();
        let g = x.take_grad().unwrap();
        assert_eq!(g.iter().next().copied().unwrap(), 6.0);
    }

    #[test]
    fn constant_branches_are_pruned() {
        let x = scalar(2.0, false);
        let y = x.mul(&x).add(&x);
        assert!(!y.requires_grad());
        assert!(y.0.parents.is_empty());
    }

    #[test]
    fn diamond_graph_gradients() {
        // z = (x + x) * x = 2x^2; dz/dx = 4x
        let x = scalar(5.0, true);
        let s = x.add(&x);
        let z = s.mul(&x);
        z.backward();
        let g = x.take_grad().unwrap();
        assert_eq!(g.iter().next().copied().unwrap(), 20.0);
    }
}
