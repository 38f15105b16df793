pub mod numerics;
pub mod codec;
pub mod ptm;
pub mod tm;
pub mod transformer;
pub mod harness;
