//! IDX and MSTN files, preprocessing, and a dataset manifest.

use spckd::data::{
    encode_idx, extract_patches, read_mstn, resize_bilinear, select_bands, synth_garments, write_idx, write_mstn,
    Manifest, Split, GARMENT_SIZE,
};
use spckd::numerics::Tensor;

fn main() -> spckd::Result<()> {
    let dir = std::env::temp_dir().join("spckd_data_example");
    std::fs::create_dir_all(&dir).map_err(|e| spckd::Error::Io { path: dir.clone(), source: e })?;

    // grayscale garments in the MNIST container
    let n = 64;
    let pixels = synth_garments(11, n);
    write_idx(dir.join("train.idx"), &[n, GARMENT_SIZE, GARMENT_SIZE], &pixels)?;
    write_idx(dir.join("test.idx"), &[16, GARMENT_SIZE, GARMENT_SIZE], &synth_garments(12, 16))?;
    println!("IDX header: {:02x?}", &encode_idx(&[n, 28, 28], &pixels)?[..8]);

    // an 8-band stack, tiled into patches
    let cube = Tensor::new(
        [1, 40, 40, 31],
        (0..40 * 40 * 31).map(|i| ((i % 97) as f32) / 96.0).collect(),
    )?;
    write_mstn(&cube, dir.join("cube.mstn"))?;
    let back = read_mstn(dir.join("cube.mstn"))?;
    assert_eq!(back, cube);
    let img = Tensor::new([40, 40, 31], back.into_data())?;
    let img = select_bands(&resize_bilinear(&img, 40, 40)?, 8)?;
    let patches = extract_patches(&img, 20)?;
    println!("MSTN cube -> {} patches of {:?}", patches.len(), patches[0].shape());

    let manifest = Manifest {
        entries: vec![(Split::Train, dir.join("train.idx")), (Split::Test, dir.join("test.idx"))],
    };
    manifest.write(dir.join("garments.manifest"))?;
    let train = Manifest::read(dir.join("garments.manifest"))?
        .load(Split::Train)?
        .expect("train split")
        .resized(32, 32)?;
    println!(
        "manifest train split: {} scenes of {}x{}x{} ({})",
        train.len(),
        train.height,
        train.width,
        train.bands,
        train.provenance
    );
    Ok(())
}
