#[allow(dead_code)]
pub mod exprs;
#[allow(dead_code)]
pub mod split_fsm;
