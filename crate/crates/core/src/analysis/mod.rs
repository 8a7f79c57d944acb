//! Derived quantities: crystal shape, spacing, coupling statistics and scans.

pub mod delaunay;
pub mod scan;
pub mod shape;
pub mod stats;

pub use delaunay::{delaunay, Triangulation};
pub use scan::{ScanKind, ScanOptions, ScanPoint, ScanResult};
pub use shape::{distortion_ratio, fit_ellipse, nn_spacing, Ellipse, Spacing};
pub use stats::{angular_correlation, fit_power_law, histogram, Histogram, PowerLawFit, RangePolicy, Subshell};
