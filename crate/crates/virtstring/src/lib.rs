//! Exact-arithmetic invariants of virtual strings and virtual knots.
//!
//! A virtual string is an oriented circle with `2m` distinguished points
//! partitioned into `m` ordered pairs (arrows).  This crate implements the
//! combinatorics of such strings: parsing and canonical forms, the polynomial
//! invariants `u` and their covering refinements, skew-symmetric based
//! matrices with their primitive reduction and genus, filling enumeration and
//! cobordism obstructions, the homotopy move engine, the Lie cobracket, and
//! the skein polynomial of virtual knots.
//!
//! All arithmetic is exact: integers, big integers and rationals only.

pub mod filling;
pub mod lie;
pub mod matrix;
pub mod moves;
pub mod poly;
pub mod skein;
pub mod string;

pub use poly::IntPoly;
pub use string::{ArrowDiagram, CanonicalCode, OpenString, Role, VirtualString};
