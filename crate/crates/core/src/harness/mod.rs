//! End-to-end simulation: data, partitioning, the three training
//! pipelines and their reports.

mod data;
mod run;

pub use data::{
    build_federation, generate_synthetic, load_file_backed, partition, DataSource, FederatedData,
    FederationSpec, Partition,
};
pub use run::{
    comm_cost, evaluate, run_ae_dpfl, run_dp_fedavg, run_fedavg, run_knn_dpfl, run_scheme,
    AeConfig, CommCost, GradientConfig, KChoice, KnnConfig, MeanStd, RunReport, Scheme,
    SchemeConfig,
};
