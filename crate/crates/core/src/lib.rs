//! Flow-based IoT intrusion detection workbench.
//!
//! Parses Zeek `conn.log.labeled` captures, encodes them into numeric
//! feature matrices, and trains and evaluates six detectors — a linear SVM,
//! level-wise and leaf-wise gradient-boosted trees, Isolation Forest, Local
//! Outlier Factor and a replay-based deep reinforcement learning agent —
//! under a shared cross-validation and evaluation protocol with embedded
//! reference scores to compare against.

pub mod data;
pub mod drl;
pub mod error;
pub mod flow;
pub mod gbdt;
pub mod harness;
pub mod iforest;
pub mod lof;
pub mod metrics;
pub mod nn;
pub mod preprocess;
pub mod svm;
pub mod synth;
pub mod util;

pub use data::Matrix;
pub use drl::{is_stable, train_agent, Agent, AgentConfig, Experience, ReplayMemory};
pub use error::{Error, Result};
pub use flow::{
    parse_conn_log, parse_conn_log_file, parse_conn_log_str, summarize_capture, write_conn_log,
    BinaryLabel, CaptureSummary, FlowRecord,
};
pub use gbdt::{gbdt_predict, gbdt_train, GbdtConfig, GbdtEnsemble, Growth, SplitMethod, TreeNode};
pub use harness::{
    compare_runs, cross_validate, default_grid, final_evaluate, fit_model, grid_search,
    render_report, EvalRun, ModelConfig, ModelKind, Phase, TrainedModel,
};
pub use iforest::{
    anomaly_score, expected_path_length_c, iforest_fit, iforest_fit_predict, IForestConfig,
    IForestModel, IsolationTree,
};
pub use lof::{lof_fit, lof_fit_predict, KdTree, LofConfig, LofModel};
pub use metrics::{
    binary_metrics, confusion, confusion_named, macro_f1_present, macro_metrics, BinaryMetrics,
    ConfusionMatrix, MetricReport,
};
pub use nn::{AdamState, Mlp, OutputActivation};
pub use preprocess::{
    build_feature_schema, carve_subsets, class_order, consolidate_labels, drop_single_sample_classes,
    make_folds, prepare_capture, split_flows, split_train_eval, stratified_split_indices,
    subsample_contamination, vectorize, EncodedDataset, FeatureSchema, Scenario, SplitSpec,
};
pub use svm::{svm_predict, train_linear_svm, train_ova, LinearSvmModel, SvmConfig};
