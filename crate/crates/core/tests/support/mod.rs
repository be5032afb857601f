#![allow(dead_code)]

pub mod bigfloat;
