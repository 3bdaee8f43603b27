//! Part-level attribute vocabulary: 29 colors, 10 patterns & markings,
//! 13 materials, 3 reflectance levels.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};

pub const COLORS: [&str; 29] = [
    "black",
    "light blue",
    "blue",
    "dark blue",
    "light brown",
    "brown",
    "dark brown",
    "light green",
    "green",
    "dark green",
    "light grey",
    "grey",
    "dark grey",
    "light orange",
    "orange",
    "dark orange",
    "light pink",
    "pink",
    "dark pink",
    "light purple",
    "purple",
    "dark purple",
    "light red",
    "red",
    "dark red",
    "white",
    "light yellow",
    "yellow",
    "dark yellow",
];

pub const PATTERNS_MARKINGS: [&str; 10] = [
    "plain",
    "striped",
    "dotted",
    "checkered",
    "woven",
    "studded",
    "perforated",
    "floral",
    "logo",
    "text",
];

pub const MATERIALS: [&str; 13] = [
    "stone", "wood", "rattan", "fabric", "crochet", "wool", "leather", "velvet", "metal", "paper",
    "plastic", "glass", "ceramic",
];

pub const REFLECTANCE: [&str; 3] = ["opaque", "translucent", "transparent"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttributeKind {
    Color,
    PatternMarking,
    Material,
    Reflectance,
}

/// Canonical spelling: lowercase, underscores as spaces, `gray` as `grey`.
pub fn canonical(attr: &str) -> String {
    attr.trim().to_lowercase().replace('_', " ").replace("gray", "grey")
}

pub fn kind_of(attr: &str) -> Option<AttributeKind> {
    let a = canonical(attr);
    let a = a.as_str();
    if COLORS.contains(&a) {
        Some(AttributeKind::Color)
    } else if PATTERNS_MARKINGS.contains(&a) {
        Some(AttributeKind::PatternMarking)
    } else if MATERIALS.contains(&a) {
        Some(AttributeKind::Material)
    } else if REFLECTANCE.contains(&a) {
        Some(AttributeKind::Reflectance)
    } else {
        None
    }
}

/// Attributes of one part-level region, grouped by kind.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PartAttributes {
    #[cfg_attr(feature = "serde", serde(default))]
    pub colors: Vec<String>,
    #[cfg_attr(feature = "serde", serde(default))]
    pub patterns_markings: Vec<String>,
    #[cfg_attr(feature = "serde", serde(default))]
    pub materials: Vec<String>,
    #[cfg_attr(feature = "serde", serde(default))]
    pub reflectance: Vec<String>,
}

impl PartAttributes {
    /// Sorts a flat attribute list into kinds.
    pub fn from_flat<S: AsRef<str>>(attrs: &[S]) -> Result<Self> {
        let mut out = Self::default();
        for a in attrs {
            let a = a.as_ref();
            let slot = match kind_of(a) {
                Some(AttributeKind::Color) => &mut out.colors,
                Some(AttributeKind::PatternMarking) => &mut out.patterns_markings,
                Some(AttributeKind::Material) => &mut out.materials,
                Some(AttributeKind::Reflectance) => &mut out.reflectance,
                None => return Err(Error::UnknownAttribute(String::from(a))),
            };
            slot.push(canonical(a));
        }
        Ok(out)
    }

    /// All attributes in color, pattern, material, reflectance order, each
    /// checked against the vocabulary of its group.
    pub fn checked_list(&self) -> Result<Vec<String>> {
        let groups = [
            (&self.colors, AttributeKind::Color),
            (&self.patterns_markings, AttributeKind::PatternMarking),
            (&self.materials, AttributeKind::Material),
            (&self.reflectance, AttributeKind::Reflectance),
        ];
        let mut out = Vec::new();
        for (values, kind) in groups {
            for v in values {
                if kind_of(v) != Some(kind) {
                    return Err(Error::UnknownAttribute(v.clone()));
                }
                out.push(canonical(v));
            }
        }
        if out.is_empty() {
            return Err(Error::UnknownAttribute(String::from("(no attributes)")));
        }
        Ok(out)
    }
}

/// `object` or `object:part` category name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartCategory<'a> {
    pub object: &'a str,
    pub part: Option<&'a str>,
}

impl<'a> PartCategory<'a> {
    pub fn parse(category: &'a str) -> Self {
        match category.split_once(':') {
            Some((object, part)) => Self {
                object: object.trim(),
                part: Some(part.trim()),
            },
            None => Self {
                object: category.trim(),
                part: None,
            },
        }
    }
}
