//! Shared fixtures for the criterion benchmarks.

use coca::affinity::{build_affinities, AffinityConfig, AffinityMasks};
use coca::compactness::init_pixel_attrs;
use coca::encoder::{encode_pixels, EncoderConfig};
use coca::scene::{generate_scene, SceneSpec};
use coca::{Image, NodeAttrs, Tensor};

/// A seeded multi-object scene of side `n`.
pub fn scene_image(n: usize, seed: u64) -> Image {
    generate_scene(&SceneSpec::new(n, n, (3, 6), seed), 0).expect("fixture scene").image
}

/// Affinity masks and pixel attributes for one `side x side` window cut
/// from the top-left corner of a scene.
pub fn window_fixture(side: usize) -> (AffinityMasks, NodeAttrs) {
    let img = scene_image(64.max(side), 1);
    let f = encode_pixels(&img, &EncoderConfig::default()).expect("encoding");
    let rows: Vec<Vec<f64>> =
        (0..side * side).map(|p| f.values.row((p / side) * img.width + p % side).to_vec()).collect();
    let masks = build_affinities(&Tensor::from_rows(&rows).expect("rows"), &AffinityConfig::default()).expect("masks");
    (masks, init_pixel_attrs(side, side))
}
