//! Model bundle: one parameter store plus every network built over it.

use crate::discriminators::{SpatialDisc, TemporalDisc};
use crate::encoders::{AppearanceEncoder, FrameEncoder};
use crate::error::{Error, Result};
use crate::generator::Generator;
use crate::nn::{Leaves, ParamGroup, ParamStore};
use crate::tensor::Scalar;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ModelConfig {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    /// Strided encoder stack widths; the last entry is the dynamics-code depth.
    pub enc_widths: Vec<usize>,
    /// Width of the input-resolution appearance skip features.
    pub skip_channels: usize,
    /// Channels of the recurrent generator state at bottleneck resolution.
    pub gru_hidden: usize,
    /// Decoder widths, one per upsampling level (bottleneck upward).
    pub dec_widths: Vec<usize>,
    pub spatial_disc_widths: Vec<usize>,
    pub temporal_disc_widths: Vec<usize>,
    /// Kernel size of the stride-2 upsampling convolutions.
    pub up_kernel: usize,
    /// Extra seeded noise channels concatenated to the dynamics code (0 = off;
    /// generation is then a deterministic function of source and target).
    pub noise_channels: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            channels: 1,
            height: 32,
            width: 32,
            enc_widths: vec![16, 32, 64],
            skip_channels: 8,
            gru_hidden: 32,
            dec_widths: vec![32, 16, 8],
            spatial_disc_widths: vec![16, 32, 64],
            temporal_disc_widths: vec![8, 16, 32],
            up_kernel: 2,
            noise_channels: 0,
        }
    }
}

impl ModelConfig {
    pub fn levels(&self) -> usize {
        self.enc_widths.len()
    }

    /// Spatial size of the dynamics code / generator state.
    pub fn bottleneck_hw(&self) -> (usize, usize) {
        let d = 1 << self.levels();
        (self.height / d, self.width / d)
    }

    pub fn dynamics_channels(&self) -> usize {
        *self.enc_widths.last().expect("non-empty enc_widths")
    }

    pub fn validate(&self) -> Result<()> {
        if self.enc_widths.is_empty() {
            return Err(Error::Config("enc_widths must be non-empty".into()));
        }
        if self.dec_widths.len() != self.enc_widths.len() {
            return Err(Error::Config(format!(
                "dec_widths has {} levels but enc_widths has {}",
                self.dec_widths.len(),
                self.enc_widths.len()
            )));
        }
        let d = 1 << self.levels();
        if self.height % d != 0 || self.width % d != 0 {
            return Err(Error::Config(format!(
                "{}x{} not divisible by 2^{} (encoder levels)",
                self.height,
                self.width,
                self.levels()
            )));
        }
        if self.height / d == 0 || self.width / d == 0 {
            return Err(Error::Config("bottleneck collapses to zero size".into()));
        }
        if self.channels == 0 {
            return Err(Error::Config("channels must be >= 1".into()));
        }
        if self.spatial_disc_widths.is_empty() || self.temporal_disc_widths.is_empty() {
            return Err(Error::Config("discriminator widths must be non-empty".into()));
        }
        if self.up_kernel < 2 {
            return Err(Error::Config("up_kernel must be >= 2".into()));
        }
        Ok(())
    }

    /// Channels of the appearance level consumed at decoder step `i` (0 =
    /// first upsampling step from the bottleneck).
    pub fn skip_level_channels(&self, i: usize) -> usize {
        let level = self.levels() - 1 - i;
        if level == 0 {
            self.skip_channels
        } else {
            self.enc_widths[level - 1]
        }
    }
}

pub struct Model<F: Scalar> {
    pub store: ParamStore<F>,
    pub config: ModelConfig,
    pub appearance_enc: AppearanceEncoder,
    pub frame_enc: FrameEncoder,
    pub generator: Generator,
    pub spatial_disc: SpatialDisc,
    pub temporal_disc: TemporalDisc,
}

impl<F: Scalar> Model<F> {
    /// Build all networks with He-style init from `seed`.
    pub fn build(config: &ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let appearance_enc = AppearanceEncoder::new(&mut store, &mut rng, config);
        let frame_enc = FrameEncoder::new(&mut store, &mut rng, config);
        let generator = Generator::new(&mut store, &mut rng, config);
        let spatial_disc = SpatialDisc::new(&mut store, &mut rng, config);
        let temporal_disc = TemporalDisc::new(&mut store, &mut rng, config);
        Ok(Model {
            store,
            config: config.clone(),
            appearance_enc,
            frame_enc,
            generator,
            spatial_disc,
            temporal_disc,
        })
    }

    /// Leaves with nothing trainable (inference).
    pub fn frozen_leaves(&self) -> Leaves<F> {
        self.store.leaves(|_| false)
    }

    /// Leaves with only the generator/encoder group trainable.
    pub fn generator_leaves(&self) -> Leaves<F> {
        self.store.leaves(|g| g == ParamGroup::Generator)
    }

    /// Leaves with only the two discriminators trainable.
    pub fn discriminator_leaves(&self) -> Leaves<F> {
        self.store
            .leaves(|g| matches!(g, ParamGroup::SpatialDisc | ParamGroup::TemporalDisc))
    }
}
