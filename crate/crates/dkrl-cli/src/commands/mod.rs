pub mod bandit;
pub mod bench;
pub mod fit;
pub mod gen;
