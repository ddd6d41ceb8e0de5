//! Registration, analysis and freehand-style synthesis of vector sketches.
//!
//! Modules follow the data flow: [`sketch`] and [`raster`] hold the data
//! model, [`pixreg`] warps a freehand sketch onto its tracing, [`simfit`]
//! derives sketch- and stroke-level similarity registrations from that,
//! [`analysis`] measures drawings, and [`synthesis`] generates
//! freehand-style sketches from tracings.

pub mod analysis;
pub mod distance;
pub mod error;
pub mod export;
pub mod fixtures;
pub mod geom;
pub mod io;
pub mod pixreg;
pub mod raster;
pub mod simfit;
pub mod sketch;
pub mod synthesis;

pub use error::{Error, Result};
pub use geom::Vec2;
pub use sketch::{
    load_sketch, resample_stroke, save_sketch, Group, Point, Sketch, Stroke, StrokeKind,
};
