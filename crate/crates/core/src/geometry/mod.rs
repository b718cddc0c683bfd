//! Periodic perforated domains on grids.
//!
//! A [`PeriodicDomain`] is the cell-centre raster of a `Z^d`-periodic open
//! set `E` on the unit cell `Q = (0,1)^d`. Cubes `hQ` are anchored at the
//! origin, `hQ = (0,h)^d`, and their integer translates are `alpha + hQ`.

mod component;
mod domain;
mod grid;
mod path;
mod region;
mod shape;

pub use component::{component_selection, component_selection_with, label_components, ComponentMask, DEFAULT_K_MAX};
pub use domain::{rasterize_domain, PeriodicConnectivity, PeriodicDomain};
pub use grid::{GridShape, MAX_DIM};
pub use path::{find_discrete_path, DiscretePath, PathPlanner};
pub use region::{retract, BoxGrid, BoxRegion};
pub use shape::{DomainSpec, Shape};
