//! Shared fixtures for the criterion benches.

use irsradar_core::scene::{build_channels, draw_reflectivities};
use irsradar_core::{ChannelSet, Reflectivities, SceneConfig, UberInit};

pub struct Fixture {
    pub scene: SceneConfig,
    pub channels: ChannelSet,
    pub alpha: Reflectivities,
    pub init: UberInit,
}

/// Reference geometry with `n_irs` platforms and a fixed seed.
pub fn fixture(n_irs: usize) -> Fixture {
    let scene = SceneConfig::reference(n_irs);
    let channels = build_channels(&scene).expect("reference scene is valid");
    let alpha = draw_reflectivities(n_irs, 1);
    let init = UberInit::standard(&scene, 1);
    Fixture {
        scene,
        channels,
        alpha,
        init,
    }
}
