//! Grasp classifier: a small LeNet-style CNN with its own forward and
//! backward passes, a Caffe-style SGD solver and a binary model format.

pub mod io;
pub mod network;
pub mod real;
pub mod solver;
pub mod train;

pub use io::{load_model, save_model};
pub use network::{Architecture, CnnModel, Network};
pub use solver::{backward_step, LrSchedule, Sgd, SolverConfig};
pub use train::{accuracy, predict_indices, predict_scores, train, Init, LogEntry, TrainLog};
