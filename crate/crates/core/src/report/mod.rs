pub mod svg;
pub mod upsample;
