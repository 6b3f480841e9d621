use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// The six garment edit types.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EditCategory {
    ObjectRemoval,
    ObjectReplacement,
    ObjectAddition,
    MaterialReplacement,
    ColorAlteration,
    StructuralAlteration,
}

impl EditCategory {
    pub const ALL: [EditCategory; 6] = [
        Self::ObjectRemoval,
        Self::ObjectReplacement,
        Self::ObjectAddition,
        Self::MaterialReplacement,
        Self::ColorAlteration,
        Self::StructuralAlteration,
    ];

    /// Also the template file stem.
    pub fn snake_case(self) -> &'static str {
        match self {
            Self::ObjectRemoval => "object_removal",
            Self::ObjectReplacement => "object_replacement",
            Self::ObjectAddition => "object_addition",
            Self::MaterialReplacement => "material_replacement",
            Self::ColorAlteration => "color_alteration",
            Self::StructuralAlteration => "structural_alteration",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            Self::ObjectRemoval => "Object Removal",
            Self::ObjectReplacement => "Object Replacement",
            Self::ObjectAddition => "Object Addition",
            Self::MaterialReplacement => "Material Replacement",
            Self::ColorAlteration => "Color Alteration",
            Self::StructuralAlteration => "Structural Alteration",
        }
    }

    /// One-line definition used to constrain proposals of this type.
    pub fn definition(self) -> &'static str {
        match self {
            Self::ObjectRemoval => "Eliminate specified garment components (e.g., pockets, hoods).",
            Self::ObjectReplacement => "Substitute garment elements with alternative designs.",
            Self::ObjectAddition => "Add new decorative or practical elements.",
            Self::MaterialReplacement => "Alter textile composition (e.g., cotton to silk).",
            Self::ColorAlteration => "Modify color while preserving texture.",
            Self::StructuralAlteration => "Reshape the silhouette (e.g., flare to straight cut).",
        }
    }
}

impl fmt::Display for EditCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.snake_case())
    }
}

impl FromStr for EditCategory {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: String = s.trim().to_ascii_lowercase().replace([' ', '-'], "_");
        Self::ALL.into_iter().find(|c| c.snake_case() == key).ok_or_else(|| format!("unknown edit category {s:?}"))
    }
}
