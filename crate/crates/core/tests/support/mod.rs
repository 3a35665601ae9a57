#![allow(dead_code)]

pub mod weights;
pub mod incremental;
pub mod worked;
pub mod model;
pub mod dsl;
