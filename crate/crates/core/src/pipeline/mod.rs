//! Observation preprocessing, translation-map codec, and dataset storage.

mod preprocess;
mod store;
mod tmap;

pub use preprocess::{preprocess_depth, DepthObservation};
pub use store::{read_dataset, write_dataset, Dataset, Manifest, StoredSample, DATASET_VERSION};
pub use tmap::{
    decode_translation_map, dequantize, encode_translation_map, quantize, CanonicalFlatMesh,
    TranslationMap, TMAP_CLIP,
};
