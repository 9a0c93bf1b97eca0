//! Netpbm I/O, pixel feature extraction, and label rendering.

mod features;
mod pnm;
mod render;

pub use features::{
    default_pos_scale, filter_bank_features, filter_plane, srgb_to_lab, to_gray_features, to_lab,
    Kernel, PixelFeatureMap,
};
pub use pnm::{decode_label_pgm16, encode_label_pgm16, load_ppm, write_ppm, Image};
pub use render::render_labels;
