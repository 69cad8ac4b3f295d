//! Dense numerical substrate: tensors, LSTM cells, bidirectional encoding,
//! softmax cross-entropy, SGD and a finite-difference gradient checker.

mod gradcheck;
mod loss;
mod lstm;
mod optim;
mod tensor;

pub use gradcheck::{grad_check, GradCheckReport, Objective};
pub use loss::softmax_xent;
pub use lstm::{bi_encode, lstm_cell_step, BiEncoderParams, BiTrace, LstmCellParams, LstmTrace, FORGET_BIAS};
pub use optim::{sgd_step, ParamSet};
pub use tensor::{sigmoid, Tensor};

pub(crate) use tensor::{add_assign, matvec_acc, matvec_t_acc, outer_acc};
