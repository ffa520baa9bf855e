//! The closed catalog of relation types used for relation hints and
//! relation-based idea expansion.
//!
//! The catalog follows the ConceptNet taxonomy minus its catch-all
//! "Related to" type, which is deliberately absent: it is not a variant and
//! [`RelationType::parse`] rejects it like any other unknown label.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RelationType {
    IsA,
    PartOf,
    UsedFor,
    CapableOf,
    AtLocation,
    HasA,
    Desires,
    Causes,
    HasProperty,
    Synonym,
    Antonym,
    DerivedFrom,
    InstanceOf,
}

impl RelationType {
    pub const ALL: [RelationType; 13] = [
        RelationType::IsA,
        RelationType::PartOf,
        RelationType::UsedFor,
        RelationType::CapableOf,
        RelationType::AtLocation,
        RelationType::HasA,
        RelationType::Desires,
        RelationType::Causes,
        RelationType::HasProperty,
        RelationType::Synonym,
        RelationType::Antonym,
        RelationType::DerivedFrom,
        RelationType::InstanceOf,
    ];

    pub fn label(self) -> &'static str {
        match self {
            RelationType::IsA => "Is a",
            RelationType::PartOf => "Part of",
            RelationType::UsedFor => "Used for",
            RelationType::CapableOf => "Capable of",
            RelationType::AtLocation => "At location",
            RelationType::HasA => "Has a",
            RelationType::Desires => "Desires",
            RelationType::Causes => "Causes",
            RelationType::HasProperty => "Has property",
            RelationType::Synonym => "Synonym",
            RelationType::Antonym => "Antonym",
            RelationType::DerivedFrom => "Derived from",
            RelationType::InstanceOf => "Instance of",
        }
    }

    /// Short gloss shown next to each type in prompts and pickers.
    pub fn gloss(self) -> &'static str {
        match self {
            RelationType::IsA => "Indicates that one concept is a type or category of another.",
            RelationType::PartOf => "Indicates that one concept is a part of another.",
            RelationType::UsedFor => "Describes what something is used for.",
            RelationType::CapableOf => {
                "Describes an action or activity that a concept is capable of doing."
            }
            RelationType::AtLocation => {
                "Indicates where something is typically found or where an event occurs."
            }
            RelationType::HasA => "Indicates that one concept possesses another.",
            RelationType::Desires => "Indicates a desire or need associated with a concept.",
            RelationType::Causes => "Describes an event or action that leads to a particular result.",
            RelationType::HasProperty => "Indicates a characteristic or property of a concept.",
            RelationType::Synonym => {
                "Indicates that two concepts have the same or very similar meanings."
            }
            RelationType::Antonym => "Indicates that two concepts have opposite meanings.",
            RelationType::DerivedFrom => {
                "Indicates that one concept is derived from another, often used for words that have a common root or origin."
            }
            RelationType::InstanceOf => {
                "Similar to IsA, but typically used for instances of a class or category."
            }
        }
    }

    /// Lenient match: case, spacing, underscores and hyphens are ignored,
    /// so "desires", "Part_of" and "AtLocation" all resolve.
    pub fn parse(raw: &str) -> Option<RelationType> {
        let key = normalize(raw);
        Self::ALL.into_iter().find(|t| normalize(t.label()) == key)
    }

    /// Bullet list used to fill the `relationList` prompt placeholder.
    pub fn catalog_listing() -> String {
        Self::ALL
            .iter()
            .map(|t| format!("- \"{}\": {}", t.label(), t.gloss()))
            .collect::<Vec<_>>()
            .join("\n")
    }
}

fn normalize(raw: &str) -> String {
    raw.chars()
        .filter(|c| c.is_alphanumeric())
        .flat_map(char::to_lowercase)
        .collect()
}

impl fmt::Display for RelationType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, thiserror::Error)]
#[error("unknown relation type: {0}")]
pub struct UnknownRelationType(pub String);

impl FromStr for RelationType {
    type Err = UnknownRelationType;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        RelationType::parse(s).ok_or_else(|| UnknownRelationType(s.to_string()))
    }
}

impl Serialize for RelationType {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.label())
    }
}

impl<'de> Deserialize<'de> for RelationType {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        raw.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_has_thirteen_distinct_labels() {
        let mut labels: Vec<_> = RelationType::ALL.iter().map(|t| t.label()).collect();
        labels.sort();
        labels.dedup();
        assert_eq!(labels.len(), 13);
    }

    #[test]
    fn related_to_is_not_a_relation_type() {
        assert!(RelationType::parse("Related to").is_none());
        assert!(RelationType::parse("RelatedTo").is_none());
        assert!(!RelationType::catalog_listing().contains("Related to"));
    }

    #[test]
    fn lenient_parsing() {
        assert_eq!(RelationType::parse("desires"), Some(RelationType::Desires));
        assert_eq!(RelationType::parse("Part_of"), Some(RelationType::PartOf));
        assert_eq!(RelationType::parse("AtLocation"), Some(RelationType::AtLocation));
        assert_eq!(RelationType::parse(" instance-of "), Some(RelationType::InstanceOf));
    }

    #[test]
    fn serializes_as_label() {
        let json = serde_json::to_string(&RelationType::HasProperty).unwrap();
        assert_eq!(json, "\"Has property\"");
        let back: RelationType = serde_json::from_str(&json).unwrap();
        assert_eq!(back, RelationType::HasProperty);
        assert!(serde_json::from_str::<RelationType>("\"Related to\"").is_err());
    }
}
