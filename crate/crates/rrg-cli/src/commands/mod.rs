pub mod data;
pub mod evaluate;
pub mod pipeline;
pub mod statistics;
pub mod training;
