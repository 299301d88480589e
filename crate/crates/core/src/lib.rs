pub mod analysis;
pub mod clock;
pub mod game;
pub mod log;
pub mod net;
pub mod policy;
pub mod shell;
pub mod sim;
pub mod solver;
