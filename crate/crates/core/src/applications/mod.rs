//! Uses of a fitted limit surface: quasi-static pushing and free sliding.

pub mod push;
pub mod sliding;
