//! Substitution rules, hierarchical patches and their Delone sets.

pub mod builtin;
pub mod cyclo;
pub mod delone;
pub mod parse;
pub mod patch;
pub mod rule;
pub mod stats;

pub use builtin::{block_rule, builtin, chair, penrose_triangles, table, BUILTIN_NAMES};
pub use cyclo::{FieldCoord, Isometry};
pub use delone::{delone_set, exact_centroid, DeloneSetWindow, PointGrid, Window};
pub use parse::{load_rule, parse_rule, to_rule_file};
pub use patch::{generate, generate_with, tile_count, HierarchicalPatch, TileIndex, TileInstance, DEFAULT_TILE_CAP};
pub use rule::{exact_area_form, validate_rule, ChildSpec, IsometrySpec, Prototile, SubstitutionRule, ValidationReport};
pub use stats::{geometry_stats, rule_geometry, GeometryStats};
