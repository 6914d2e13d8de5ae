//! Reverse-mode differentiation over small dense vectors and matrices.
//!
//! The engine is a flat tape ([`Graph`]) of vector-valued nodes. Learned
//! tensors live in a [`ParamSet`]; a graph borrows the set read-only and its
//! reverse sweep accumulates into a [`Gradients`] buffer of matching shapes,
//! so several graphs can run against the same parameters before a single
//! optimizer update.
//!
//! ```
//! use autodiff::{Graph, Gradients, ParamSet, Tensor};
//!
//! let mut params = ParamSet::new();
//! let w = params.add("w", Tensor::new(vec![2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap()).unwrap();
//! let mut g = Graph::new(&params);
//! let x = g.input(vec![1.0, -1.0]);
//! let y = g.matvec(w, x);
//! let loss = g.sum(y);
//! let mut grads = Gradients::zeros_like(&params);
//! g.backward(loss, &mut grads).unwrap();
//! assert_eq!(grads.get(w), &[1.0, -1.0, 1.0, -1.0]);
//! ```

mod container;
mod error;
pub mod gradcheck;
mod graph;
pub mod nn;
pub mod optim;
mod params;
mod tensor;

pub use container::{load_params, read_params, save_params, write_params, FORMAT_VERSION};
pub use error::{AutodiffError, Result};
pub use graph::{Adjoints, Graph, Var};
pub use params::{Gradients, ParamId, ParamSet};
pub use tensor::Tensor;
