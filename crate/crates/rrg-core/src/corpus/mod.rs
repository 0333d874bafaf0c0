//! Synthetic corpus: finding catalogue, image rendering and normalisation,
//! study generation, stratified sampling, splits, and dataset files.

pub mod catalogue;
pub mod generate;
pub mod image;
pub mod io;
pub mod sample;
pub mod split;

pub use catalogue::{
    change_sentence, invert_findings_section, Change, Finding, Motif, Shape, ALL_FINDINGS,
};
pub use generate::{generate_corpus, StudyImage, StudyRecord, View, IMAGE_SIZE};
pub use image::{normalise_image, read_pgm, render_image, write_pgm, GrayImage};
pub use io::{read_manifest, read_split, write_split, DatasetManifest, StoredStudy};
pub use sample::stratified_sample;
pub use split::{split_dataset, SplitSet};
