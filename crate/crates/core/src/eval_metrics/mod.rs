//! Evaluation metrics, repeated-run protocols and PCA export.

mod confusion;
mod pca;
mod protocol;
mod report;
mod roc;

pub use confusion::{binary_counts, macro_f1, one_vs_rest, overall_accuracy, ConfusionCounts};
pub use pca::{pca_project, write_projection_csv, PcaBasis, Projection};
pub use protocol::{
    dataset_digest, loao_population, run_loao, run_protocol, score_loao, LoaoNegatives, ProtocolConfig, Task,
    TARGET_FPR,
};
pub use report::{
    class_accuracy_key, class_f1_key, EvalReport, MeanStd, ModelReport, RunRecord, RunStatus, ACCURACY, AUROC,
    MACRO_F1, TPR_AT_5FPR,
};
pub use roc::{roc_auroc, tpr_at_fpr, RocCurve};
