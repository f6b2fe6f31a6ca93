//! Dataset containers, file formats and preprocessing.

mod dataset;
mod idx;
mod mstn;
mod synth;
mod transform;

pub use dataset::{load_file, Dataset, Manifest, Split};
pub use idx::{encode_idx, parse_idx, read_idx, write_idx};
pub use mstn::{encode_mstn, parse_mstn, read_mstn, write_mstn, MSTN_VERSION};
pub use synth::{synth_dataset, synth_garments, GARMENT_SIZE};
pub use transform::{
    extract_patches, from_band_major, resize_bilinear, select_bands, to_band_major,
};
