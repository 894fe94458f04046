//! Hausdorff dimension of Schottky limit sets in H^n and of boundaries of
//! metric-tree actions, Lorentzian realization of hyperbolic-type kernels, and
//! the degeneration pipeline relating the two.

pub mod hyperbolic;
pub mod isometry;
pub mod numeric;
pub mod sampling;
pub mod words;
pub mod disk;
pub mod geometry;
pub mod mcmullen;
pub mod schottky;
pub mod dimension;
pub mod tree;
pub mod kernels;
pub mod degeneration;
