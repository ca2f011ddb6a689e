//! Recursive skeletonization: a hierarchical compress-then-eliminate
//! factorization of a kernel matrix over a box tree.

mod factor;
mod proxy;
mod tree;

pub use factor::{factorize, SkelFactor, SkelStats};
pub use proxy::{proxy_points, ProxyConfig};
pub use tree::{BoxTree, TreeBox, TreeMode};
