//! Image loading, class reduction, and the feature-table format.

mod dataset;
mod image;
mod loader;
mod table;

pub use dataset::{load_dataset, reduce_classes, ClassReduction, LabeledDataset};
pub use image::{flip_horizontal, GrayImage};
pub use loader::{
    load_image, parse_csv_matrix, read_labels, write_labels, write_pgm16, ImageFormat, LabelEntry,
    LABELS_FILE,
};
pub use table::{header as table_header, read_feature_table, write_feature_table, BASE_COLUMNS, PF_COLUMNS};
