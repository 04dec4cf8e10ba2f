//! Exact rational tools for toric models with rational maximum likelihood
//! estimators: Horn pairs, lattice polytopes and multinomial staged trees.

pub mod exactmath;
pub mod families;
pub mod horn;
pub mod oracle;
pub mod polytope;
pub mod stagedtree;

pub use exactmath::{IntMatrix, MPoly, Rat};
pub use families::{Family, Family2DParams, PrismatoidParams, TreeVariant};
pub use horn::HornPair;
pub use polytope::LatticePolytope;
pub use stagedtree::{StagedTree, TreeBuilder};
