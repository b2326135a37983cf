//! Fingerprint classification and search toolkit.
//!
//! The crate turns raw grayscale fingerprint images into compact 32-symbol
//! ridge-orientation-flow codes plus minutiae features, partitions the
//! enrolled records into six pattern classes with a link-based agglomerative
//! clusterer, and answers identification queries with a two-phase search
//! (global class match, then local Euclidean verification) over the
//! clustered database.
//!
//! Modules follow the processing order:
//!
//! * [`imaging`] — PGM I/O and the preprocessing chain (enhancement,
//!   binarization, segmentation, thinning).
//! * [`orientation`] — block orientation field, core point detection and the
//!   10-bit core location code.
//! * [`rfpcode`] — ridge-flow walk emitting the 32-code record; meta-base
//!   assembly.
//! * [`minutiae`] — 5×5-window minutiae detection and false-minutiae removal.
//! * [`cluster`] — link-based (`fprock`) and classical linkage clustering,
//!   plus the misclassification-error metric.
//! * [`search`] — profile hierarchy, two-phase identification search and
//!   evaluation metrics (penetration rate, retrieval accuracy).
//! * [`synth`] — seeded synthetic data: labeled code records, zero-pole
//!   orientation fields and rendered ridge images.
//! * [`store`] — text file formats for meta-bases and cluster models.
//! * [`pipeline`] — end-to-end image → record glue used by enrollment.

pub mod cluster;
pub mod imaging;
pub mod minutiae;
pub mod orientation;
pub mod pipeline;
pub mod rfpcode;
pub mod search;
pub mod store;
pub mod synth;

pub use cluster::{
    fprock_cluster, linkage_cluster, misclassification_error, ClusterError, ClusterModel, Linkage,
    SimilarityParams,
};
pub use imaging::{BinaryImage, GrayImage, ImagingError, RoiMask};
pub use minutiae::{Minutia, MinutiaKind, MinutiaeSet};
pub use orientation::{CoreBits, CoreKind, CorePoint, OrientationField};
pub use rfpcode::{ClassLabel, MetaBase, RidgeFlowPattern, RFP_LEN};
pub use search::{QueryTuple, SearchIndex, SearchResult};
pub use store::StoreError;
