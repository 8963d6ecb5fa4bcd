pub mod codec;
pub mod exemplar;
pub mod mulkern;
pub mod ring;
pub mod rlwe;
pub mod perfmodel;
pub mod rng;
pub mod storage;
