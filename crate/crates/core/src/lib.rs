//! Dynamic scene graphs from egocentric observation streams.
//!
//! The pipeline watches a stream of camera poses, hand positions, and 2D point
//! tracks, decides when a hand starts and stops manipulating an object, tracks
//! the object's 6DoF pose through the interaction, and writes the final pose
//! back into a 3D scene graph so the map stays current.

pub mod eval;
pub mod geometry;
pub mod interaction;
pub mod io;
pub mod scene_graph;
pub mod sim;
pub mod tracker;
