pub mod cut;
pub mod fjump;
pub mod gen;
pub mod flower;
pub mod lit;
pub mod lp;
pub mod model;
pub mod opb;
pub mod propcf;
pub mod search;
pub mod rlt;
pub mod symmetry;

pub use lit::{Lit, Var};
pub use opb::{parse, Instance, ParseError, ParseOptions, Status};
