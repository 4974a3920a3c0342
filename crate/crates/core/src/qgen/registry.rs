use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::multi::{AggregationKind, ComparisonKind, SelectionKind};
use super::single::{
    AttributeKind, CompositionalKind, DepthKind, ObjectKind, PositionKind, RelationKind, SegKind,
};

macro_rules! generators {
    ($( $variant:ident => $name:literal, $family:ident($kind:expr), $multi:literal; )*) => {
        /// Every registered generator. Names are stable identifiers used in
        /// recipes, template files, and output records.
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub enum Generator {
            $($variant,)*
        }

        impl Generator {
            pub const ALL: &'static [Generator] = &[$(Generator::$variant,)*];

            pub fn name(self) -> &'static str {
                match self {
                    $(Generator::$variant => $name,)*
                }
            }

            pub fn family(self) -> Family {
                match self {
                    $(Generator::$variant => Family::$family($kind),)*
                }
            }

            pub fn is_multi(self) -> bool {
                match self {
                    $(Generator::$variant => $multi,)*
                }
            }
        }
    };
}

generators! {
    ExistsObject => "ExistsObjectGenerator", Object(ObjectKind::ExistsObject), false;
    MostObject => "MostObjectGenerator", Object(ObjectKind::MostObject), false;
    LeastObject => "LeastObjectGenerator", Object(ObjectKind::LeastObject), false;
    LeftMostObject => "LeftMostObjectGenerator", Position(PositionKind::LeftMost), false;
    RightMostObject => "RightMostObjectGenerator", Position(PositionKind::RightMost), false;
    TopMostObject => "TopMostObjectGenerator", Position(PositionKind::TopMost), false;
    BottomMostObject => "BottomMostObjectGenerator", Position(PositionKind::BottomMost), false;
    ExistsAttribute => "ExistsAttributeGenerator", Attribute(AttributeKind::ExistsAttribute), false;
    AttributeBBox => "AttributeBBoxGenerator", Attribute(AttributeKind::AttributeBBox), false;
    TypedAttributeBBox => "TypedAttributeBBoxGenerator", Attribute(AttributeKind::TypedAttributeBBox), false;
    ExistsRelation => "ExistsRelationGenerator", Relation(RelationKind::ExistsRelation), false;
    RelationBBox => "RelationBBoxGenerator", Relation(RelationKind::RelationBBox), false;
    HeadRelation => "HeadRelationGenerator", Relation(RelationKind::HeadRelation), false;
    SameObjectSeg => "SameObjectSegGenerator", Segmentation(SegKind::SameObjectSeg), false;
    DiffObjectSeg => "DiffObjectSegGenerator", Segmentation(SegKind::DiffObjectSeg), false;
    CloserPoint => "CloserPointGenerator", Depth(DepthKind::CloserPoint), false;
    FartherPoint => "FartherPointGenerator", Depth(DepthKind::FartherPoint), false;
    CloserObject => "CloserObjectGenerator", Depth(DepthKind::CloserObject), false;
    FartherObject => "FartherObjectGenerator", Depth(DepthKind::FartherObject), false;
    CloserToAnchorObject => "CloserToAnchorObjectGenerator", Depth(DepthKind::CloserToAnchorObject), false;
    FartherToAnchorObject => "FartherToAnchorObjectGenerator", Depth(DepthKind::FartherToAnchorObject), false;
    SceneGraphObjectQA => "SceneGraphObjectQAGenerator", Compositional(CompositionalKind::SceneGraphObjectQA), false;
    SceneGraphRelationQA => "SceneGraphRelationQAGenerator", Compositional(CompositionalKind::SceneGraphRelationQA), false;
    SceneGraphAttributeQA => "SceneGraphAttributeQAGenerator", Compositional(CompositionalKind::SceneGraphAttributeQA), false;
    HasRelationMulti => "HasRelationMultiGenerator", Selection(SelectionKind::HasRelationMulti), true;
    HasNotRelationMulti => "HasNotRelationMultiGenerator", Selection(SelectionKind::HasNotRelationMulti), true;
    HasObjectMulti => "HasObjectMultiGenerator", Selection(SelectionKind::HasObjectMulti), true;
    HasNotObjectMulti => "HasNotObjectMultiGenerator", Selection(SelectionKind::HasNotObjectMulti), true;
    HasAttributedObjectMulti => "HasAttributedObjectMultiGenerator", Selection(SelectionKind::HasAttributedObjectMulti), true;
    HasNotAttributedObjectMulti => "HasNotAttributedObjectMultiGenerator", Selection(SelectionKind::HasNotAttributedObjectMulti), true;
    HasMostObjectMulti => "HasMostObjectMultiGenerator", Selection(SelectionKind::HasMostObjectMulti), true;
    HasLeastObjectMulti => "HasLeastObjectMultiGenerator", Selection(SelectionKind::HasLeastObjectMulti), true;
    CommonObjectMulti => "CommonObjectMultiGenerator", Comparison(ComparisonKind::CommonObjectMulti), true;
    CommonAttributeMulti => "CommonAttributeMultiGenerator", Comparison(ComparisonKind::CommonAttributeMulti), true;
    CountObjectMulti => "CountObjectMultiGenerator", Aggregation(AggregationKind::CountObjectMulti), true;
    CountAttributeObjectMulti => "CountAttributeObjectMultiGenerator", Aggregation(AggregationKind::CountAttributeObjectMulti), true;
    CompareRelationMulti => "CompareRelationMultiGenerator", Comparison(ComparisonKind::CompareRelationMulti), true;
    CompareAttributeMulti => "CompareAttributeMultiGenerator", Comparison(ComparisonKind::CompareAttributeMulti), true;
}

/// The operation family a generator belongs to, with its kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Object(ObjectKind),
    Position(PositionKind),
    Attribute(AttributeKind),
    Relation(RelationKind),
    Segmentation(SegKind),
    Depth(DepthKind),
    Compositional(CompositionalKind),
    Selection(SelectionKind),
    Comparison(ComparisonKind),
    Aggregation(AggregationKind),
}

impl Generator {
    pub fn single() -> impl Iterator<Item = Generator> {
        Generator::ALL.iter().copied().filter(|g| !g.is_multi())
    }

    pub fn multi() -> impl Iterator<Item = Generator> {
        Generator::ALL.iter().copied().filter(|g| g.is_multi())
    }

    pub fn from_name(name: &str) -> Option<Generator> {
        Generator::ALL.iter().copied().find(|g| g.name() == name)
    }
}

impl fmt::Display for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Generator {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Generator::from_name(s).ok_or_else(|| format!("unknown generator {s:?}"))
    }
}

impl Serialize for Generator {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for Generator {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
