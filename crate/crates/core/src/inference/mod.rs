//! From posterior draws to point estimates, partial-information partitions,
//! label alignments, Q-matrices and structural parameters.

mod assign;
mod backsolve;
mod estimate;
mod partial_info;
mod qrecon;

pub use assign::{
    align_labels, class_distance, hungarian, hungarian_rect, total_variation, LabelAlignment,
};
pub use backsolve::{back_solve_params, BackSolved};
pub use estimate::{
    default_threshold, posterior_mean, truncate_classes, PointEstimate, Truncation,
};
pub use partial_info::{
    cluster_all, cluster_partial_info, item_distance, merge_partial_info_threshold,
    merge_threshold, partial_info_accuracy, ClusterOptions,
};
pub use qrecon::{
    inconsistent_items, q_rows_for_coding, reconstruct_q, Coding, QReconstruction,
    MAX_AUTO_CLASSES, MAX_AUTO_CODINGS,
};
