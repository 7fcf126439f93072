//! N-function algebra for the `(p, δ)` family and the associated
//! tensor maps `A`, `A_a`, `F` and `F*`.

mod maps;
mod nfunction;
mod tensor;

pub use maps::{
    default_eps, map_f, map_fstar, op_a, op_a_jacobian, op_a_shifted, op_a_shifted_jacobian,
    op_a_shifted_shift_derivative,
};
pub use nfunction::{
    default_alpha, Conjugate, NFunction, ShiftedNFunction, YoungFunction, ALPHA_TABLE,
    VALUE_TOLERANCE,
};
pub use tensor::{Tensor2, Tensor4};
