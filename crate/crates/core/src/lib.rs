pub mod catalog;
pub mod cli;
pub mod euclid;
pub mod exact;
pub mod foliation;
pub mod group;
pub mod numerics;
pub mod quat;
pub mod specfile;
