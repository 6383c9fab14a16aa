pub mod bounds;
pub mod capacity;
pub mod chain;
pub mod cli;
pub mod error;
pub mod io;
pub mod killed;
pub mod linalg;
pub mod models;
pub mod sim;
