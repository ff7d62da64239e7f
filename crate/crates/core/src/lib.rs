#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod contact;
pub mod epidemic;
pub mod error;
pub mod experiment;
pub mod geometry;
pub mod mobility;
pub mod points;
pub mod render;
pub mod rng;
pub mod static_model;
pub mod stats;
pub mod street;
pub mod union_find;

pub use error::{Error, Result};
pub use geometry::{Point, Window};
