//! Printable placement sheets: height map, marker board, page tiling and PDF.

mod board;
mod document;
mod heightmap;

pub use board::{
    markers_per_edge, parse_marker_dictionary, BoardLayout, MarkerBoardSpec, MarkerDictionary, PlacedMarker,
    BUILTIN_DICTIONARY,
};
pub use document::{
    compose_printout, compose_sheet, plan_tiles, tile_sheet, PrintoutDocument, PrintoutOptions, PrintoutPage, Sheet,
    TilePlan, DEFAULT_OVERLAP_MM, MIN_PAGE_MM,
};
pub use heightmap::{gray_level, render_heightmap, HeightMapImage, DEFAULT_DPI};
