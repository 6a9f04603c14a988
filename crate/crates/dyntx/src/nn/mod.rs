//! Parameter storage, layers, and optimization shared by all networks.

pub mod adam;
pub mod gru;
pub mod layers;
pub mod params;

pub use adam::Adam;
pub use gru::ConvGru;
pub use layers::{lrelu, Conv2d, Conv3d, ConvTranspose2d, LEAKY_SLOPE};
pub use params::{Leaves, ParamGroup, ParamId, ParamStore};
