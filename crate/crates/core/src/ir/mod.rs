//! Per-instruction SSA behavior graphs.

pub mod build;
pub mod dot;
pub mod eval;
pub mod graph;

pub use build::{build_all, build_behavior, canonicalize};
pub use dot::{export_dot, export_text};
pub use eval::{apply_pure, effect_of, eval_node, evaluate, Effect, Inputs};
pub use graph::{BehaviorGraph, Node, NodeId, NodeKind};
