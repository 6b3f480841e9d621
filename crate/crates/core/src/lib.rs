pub mod backends;
pub mod cache;
pub mod digest;
pub mod document;
pub mod extract;
mod fsutil;
pub mod pipeline;
pub mod score;
pub mod synthesis;
pub mod template;
