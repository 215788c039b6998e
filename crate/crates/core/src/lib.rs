pub mod contours;
pub mod error;
pub mod exact;
pub mod field;
pub mod geometry;
pub mod mc;
mod grid;
pub mod scalar;
pub mod union_find;

pub use error::{Error, Result};
pub use geometry::{Adjacency, Region, Site};
pub use scalar::Real;

pub type FieldSpec64 = field::FieldSpec<f64>;
pub type FieldSpec32 = field::FieldSpec<f32>;
pub type CouplingSpec64 = field::CouplingSpec<f64>;
pub type CouplingSpec32 = field::CouplingSpec<f32>;
pub type ExactResult64 = exact::ExactResult<f64>;
pub type ExactResult32 = exact::ExactResult<f32>;
pub type Ensemble2 = exact::Ensemble<2, f64>;
pub type Ensemble3 = exact::Ensemble<3, f64>;
pub type Region2 = geometry::Region<2>;
pub type Region3 = geometry::Region<3>;
pub type Site2 = geometry::Site<2>;
pub type Site3 = geometry::Site<3>;
