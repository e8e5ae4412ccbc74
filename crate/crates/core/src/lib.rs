//! Flow-feature analysis for gridded ocean model output.
//!
//! The crate is organized as a pipeline over a rectilinear
//! longitude/latitude/depth grid:
//!
//! * [`grid`] holds axes, masked fields and interpolation,
//! * [`ingest`] loads NetCDF or raw datasets and crops them,
//! * [`fields`] derives speed, vorticity, curl and Okubo-Weiss fields,
//! * [`topology`] extracts persistence-simplified minima of 2D slices,
//! * [`tracer`] seeds and integrates streamlines and pathlines,
//! * [`eddy`] detects and delimits eddies from speed minima,
//! * [`fronts`] extracts isovolume boundary fronts and tracks them,
//! * [`profile`] samples vertical needles, sections and isosurface depths,
//! * [`export`] writes VTK, CSV and JSON outputs.

pub mod cli;
pub mod eddy;
pub mod export;
pub mod fields;
pub mod fronts;
pub mod grid;
pub mod ingest;
pub mod profile;
pub mod synth;

pub mod topology;
pub mod tracer;
