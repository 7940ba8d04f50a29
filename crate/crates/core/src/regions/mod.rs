//! Grid regions, point and tile counting, and density statistics.

pub mod count;
pub mod deviation;
pub mod fits;
pub mod region;

pub use count::{
    cell_index, cell_of, count_checks, count_points, count_tiles, patch_covers, polygon_in_region, region_in_window, tiles_inside,
    tiles_meeting, CountChecks, PointCounter, TileCounts,
};
pub use deviation::{
    density_deviation, e_profile, e_profile_with, fit_deviation, laczkovich_ratio, repetitivity_estimate,
    window_area, DensityFit, EEntry, EProfile, LaczkovichRatio, RepetitivityEntry, RepetitivityEstimate,
    RepetitivityOptions, UnitGrid, MIN_TRANSLATES,
};
pub use fits::{check_fits, fitting_delta, ComponentFit, FitsReport};
pub use region::{
    hat_completion, random_connected_region, random_rect_union, random_simple_region, Cell, Facet, GridRegion, HatPiece,
};
