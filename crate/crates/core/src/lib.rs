//! Compactness-guided hierarchical clustering for unsupervised multi-object
//! image segmentation.
//!
//! Pixels are encoded as fixed color and position features, then a stack of
//! layers clusters non-overlapping windows of nodes. Within a window every
//! node proposes a soft affinity mask; masks are scored by how closely their
//! mass distribution resembles a disk around the proposing node, and the
//! most compact proposals are emitted one after another by stick-breaking.
//! Pooled clusters become the nodes of the next layer, and the per-layer
//! masks compose into pixel-level object slots.
//!
//! ```
//! use coca::{coca_net, AnchorMode, EncoderConfig, Image, LayerConfig, StopPolicy};
//!
//! let mut img = Image::filled(8, 8, [0.0, 0.0, 0.0]);
//! for r in 2..6 {
//!     for c in 2..6 {
//!         img.set_pixel(r, c, [1.0, 0.0, 0.0]);
//!     }
//! }
//! let layers = [LayerConfig::new(1, StopPolicy::Fixed(3), 4.0)];
//! let out = coca_net(&img, &layers, &EncoderConfig::default(), AnchorMode::Compact).unwrap();
//! assert_eq!(out.hard_labels.len(), 64);
//! ```

pub mod affinity;
pub mod compactness;
pub mod config;
pub mod encoder;
pub mod error;
pub mod heatmap;
pub mod hierarchy;
pub mod image;
pub mod metrics;
pub mod pnm;
pub mod run;
pub mod sbc;
pub mod scaling;
pub mod scene;
pub mod tensor;
pub mod util;

pub use affinity::{build_affinities, AffinityConfig, AffinityMasks, DegenerateRowPolicy, Projection};
pub use compactness::{compactness_scores, init_pixel_attrs, CompactnessScores, NodeAttrs};
pub use config::RunConfig;
pub use encoder::{encode_pixels, EncoderConfig};
pub use error::{CocaError, Result};
pub use hierarchy::{coca_layer, coca_net, Dendrogram, LayerConfig, LayerState, NetOutput};
pub use image::Image;
pub use metrics::{ari, fg_filter, msc, LabelMap};
pub use sbc::{sbc_cluster, AnchorMode, ClusterMasks, Scope, StopPolicy};
pub use scene::{generate_scene, Scene, SceneSpec};
pub use tensor::{FeatureMap, Tensor, WindowLayout};
