pub mod bounds;
pub mod detect;
pub mod estimate;
pub mod export;
pub mod ffchain;
pub mod simulate;
