//! Temporal-bound annotation toolkit.
//!
//! Start here:
//! - [`model`] holds intervals, classes, videos and annotation records.
//! - [`io`] reads and writes the CSV and JSON file formats.
//! - [`consistency`] measures inter-annotator agreement.
//! - [`perturb`] generates boundary-perturbed segments around a label.
//! - [`harness`] builds folds, augments training sets and scores predictions.
//! - [`synth`] is a seeded synthetic benchmark with a nearest-centroid classifier.
//!
//! ```
//! use rubicon_core::model::{iou, TimeInterval};
//! let a = TimeInterval::new(10.0, 12.0).unwrap();
//! let b = TimeInterval::new(10.5, 12.0).unwrap();
//! assert_eq!(iou(&a, &b), 0.75);
//! ```

pub mod consistency;
pub mod diagnostics;
pub mod harness;
pub mod io;
pub mod model;
pub mod perturb;
pub mod synth;

/// Keeps the guide's code samples compiling against the current API.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../README.md")]
    mod readme {}
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/intervals.md")]
    mod intervals {}
    #[doc = include_str!("../../../book/src/file-formats.md")]
    mod file_formats {}
    #[doc = include_str!("../../../book/src/consistency.md")]
    mod consistency {}
    #[doc = include_str!("../../../book/src/perturbation.md")]
    mod perturbation {}
    #[doc = include_str!("../../../book/src/harness.md")]
    mod harness {}
    #[doc = include_str!("../../../book/src/synthetic.md")]
    mod synthetic {}
    #[doc = include_str!("../../../book/src/service.md")]
    mod service {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
