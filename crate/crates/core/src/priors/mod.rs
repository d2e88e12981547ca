//! Prior ingestion (PFM depth maps, TUM pose files) and depth scale alignment.

mod pfm;
mod scale;
mod tum;

pub use pfm::{load_depth_map, load_pfm, parse_pfm, write_pfm, Endianness};
pub use scale::{median_scale, shift_and_scale, ScaleAlignment, ScaleMode};
pub use tum::{format_tum, load_relative_poses, load_tum, parse_tum, write_tum, TumRecords};
