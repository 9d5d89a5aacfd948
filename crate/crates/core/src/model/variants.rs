//! Declarative registry of the ten model variants.
//!
//! Variants differ along three axes: spatial analyzer architecture,
//! its initialization tag, and whether the temporal analyzer is attached.
//! The registry only *describes* the matrix; binding tags to concrete
//! analyzer backends happens in the run configuration, so the same
//! experiment layout runs with toy or exported backends alike.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpatialArch {
    ResNet50,
    SwinB,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitTag {
    ImageNet1k,
    Iqa,
    Vqa,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariantSpec {
    pub id: String,
    pub spatial_arch: SpatialArch,
    pub initialization: InitTag,
    /// Whether the temporal quality analyzer is attached.
    pub temporal: bool,
}

impl VariantSpec {
    fn new(id: &str, spatial_arch: SpatialArch, initialization: InitTag, temporal: bool) -> Self {
        Self { id: id.to_string(), spatial_arch, initialization, temporal }
    }

    /// A free-form variant outside the standard matrix.
    pub fn custom(id: &str, temporal: bool) -> Self {
        Self::new(id, SpatialArch::ResNet50, InitTag::ImageNet1k, temporal)
    }
}

/// The standard ten-variant experiment matrix, in order I..X.
pub fn variant_registry() -> Vec<VariantSpec> {
    use InitTag::*;
    use SpatialArch::*;
    vec![
        VariantSpec::new("I", ResNet50, ImageNet1k, false),
        VariantSpec::new("II", ResNet50, Iqa, false),
        VariantSpec::new("III", ResNet50, Vqa, false),
        VariantSpec::new("IV", ResNet50, ImageNet1k, true),
        VariantSpec::new("V", ResNet50, Iqa, true),
        VariantSpec::new("VI", ResNet50, Vqa, true),
        VariantSpec::new("VII", SwinB, ImageNet1k, false),
        VariantSpec::new("VIII", SwinB, Vqa, false),
        VariantSpec::new("IX", SwinB, ImageNet1k, true),
        VariantSpec::new("X", SwinB, Vqa, true),
    ]
}

/// Looks a variant up by its roman-numeral id (case-insensitive).
pub fn variant_by_id(id: &str) -> Option<VariantSpec> {
    let id = id.to_uppercase();
    variant_registry().into_iter().find(|v| v.id == id)
}
