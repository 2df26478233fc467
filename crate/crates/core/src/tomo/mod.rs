//! Straight-ray traveltime tomography: sensors on the inscribed circle, the
//! normalized ray matrix, and measurement corruption.

mod measurement;
mod ray;
mod sensors;

pub use measurement::{add_gaussian_noise, erase, forward, Measurement};
pub use ray::{build_ray_matrix, build_ray_matrix_with, segment_weights, RayMatrix};
pub use sensors::{place_sensors, SensorArray};
