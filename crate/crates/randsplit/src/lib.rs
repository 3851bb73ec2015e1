//! Random splitting of conservative quadratic flows: exact polynomial vector
//! field algebra, model construction for the Lorenz-96 and truncated 2D Euler
//! families, closed-form and adaptive flow maps, the splitting Markov chain
//! with its tangent cocycle, Lyapunov spectrum estimation, and Lie-bracket
//! rank certification.

pub mod certifier;
pub mod cli;
pub mod engine;
pub mod flows;
pub mod lyapunov;
pub mod models;
pub mod vecfield;
