pub mod diff;
pub mod eval;
pub mod expr;
pub mod pde;
pub mod search;
