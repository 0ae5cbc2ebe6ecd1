pub mod envelope;
pub mod inputs;
pub mod lp;
pub mod markov;
pub mod matrix;
pub mod mdp;
pub mod occupancy;
pub mod scenario;
pub mod schedule;
pub mod thermal;
