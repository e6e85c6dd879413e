//! Dense tensors (oracle paths) and tensor trains.

mod dense;
mod tt;

pub use dense::{inner, DenseTensor, DENSE_ELEMENT_CAP};
pub use tt::{left_unfolding, qr_positive, right_unfolding, tt_svd, ShiftDirection, TensorTrain, Truncation};

pub(crate) use tt::{dims, left_transfer, right_transfer};
