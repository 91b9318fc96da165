//! Pattern functions and the CPS sampling kernel.

pub mod cache;
mod pattern;
mod sampling;
mod table;

pub use pattern::{
    check_s, fast_path_error, pattern_function, pattern_function_fast, pattern_function_quadrature,
    pattern_matrix_fast, s_from_eta, FAST_PATH_BUDGET, ORACLE_TOLERANCE,
};
pub use sampling::{
    kernel_truncation, reconstruct_cps_exact, sampling_kernel, sampling_kernel_with_order, EpsilonKernel, KernelQuery,
};
pub use table::{
    build_kernel_table, max_order, pair_count, pair_index, probe_bound, Interpolation, KernelBound, KernelTable, XGrid,
    MAX_ORDER_IDEAL, MAX_ORDER_LOSSY, PROBE_ORDER,
};
