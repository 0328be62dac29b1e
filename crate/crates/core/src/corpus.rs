//! Bundled example programs and specifications.

pub const BUFFER: &str = include_str!("../corpus/buffer.rp");
pub const BUFFER_BODY: &str = include_str!("../corpus/buffer_body.rp");
pub const EX2_LHS: &str = include_str!("../corpus/ex2_lhs.rp");
pub const EX2_RHS: &str = include_str!("../corpus/ex2_rhs.rp");
pub const CHOICE: &str = include_str!("../corpus/choice.rp");
pub const SKIP: &str = include_str!("../corpus/skip.rp");
pub const STOP: &str = include_str!("../corpus/stop.rp");
pub const A_STOP: &str = include_str!("../corpus/a_stop.rp");
pub const COUNTER: &str = include_str!("../corpus/counter.rp");
pub const SPIN: &str = include_str!("../corpus/spin.rp");
pub const DLF_SPEC: &str = include_str!("../corpus/dlf.rc");
pub const ORDER_SPEC: &str = include_str!("../corpus/order.rc");

/// Every bundled program, by file name.
pub const PROGRAMS: &[(&str, &str)] = &[
    ("buffer.rp", BUFFER),
    ("buffer_body.rp", BUFFER_BODY),
    ("ex2_lhs.rp", EX2_LHS),
    ("ex2_rhs.rp", EX2_RHS),
    ("choice.rp", CHOICE),
    ("skip.rp", SKIP),
    ("stop.rp", STOP),
    ("a_stop.rp", A_STOP),
    ("counter.rp", COUNTER),
    ("spin.rp", SPIN),
];
