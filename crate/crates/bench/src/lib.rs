//! Shared fixtures for the benchmarks.

use oge_core::synth::{ScenarioParams, SceneGenerator};
use oge_core::{assemble_mrl_matrix, build_mask, FeatureMatrix, GridSpec, HdrImage, CALIBRATED_ELLIPSE};

/// One synthetic scene at the given side length.
pub fn scene(size: usize) -> HdrImage {
    let params = ScenarioParams {
        n_scenes: 1,
        size,
        seed: 11,
        ..Default::default()
    };
    SceneGenerator::new(&params).unwrap().scene(0).unwrap().image
}

/// An MRL-375 matrix built from `n` synthetic scenes.
pub fn mrl_matrix(n: usize) -> FeatureMatrix {
    let params = ScenarioParams {
        n_scenes: n,
        size: 120,
        seed: 12,
        ..Default::default()
    };
    let gen = SceneGenerator::new(&params).unwrap();
    let mask = build_mask(GridSpec::new(25).unwrap(), &CALIBRATED_ELLIPSE).unwrap();
    let mut vectors = Vec::new();
    let mut labels = Vec::new();
    for id in 0..n {
        let s = gen.scene(id).unwrap();
        vectors.push(oge_core::pipeline::image_mrl(&s.image, &mask, &Default::default()).unwrap());
        labels.push(s.label);
    }
    assemble_mrl_matrix(&vectors, &labels, None).unwrap()
}
