//! Sparse storage, bandwidth-reducing ordering and the band LU used for the
//! direct solves.

pub mod band;
pub mod ordering;
pub mod sparse;

pub use band::{BandLu, SparseLu};
pub use sparse::{axpy, dot, norm2, stack_blocks, SparseBlock, TripletBuilder};
