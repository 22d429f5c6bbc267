//! On-disk artifacts: binary grids, CSV tables, raster previews.

pub mod csv;
pub mod hfgm;
pub mod ppm;
