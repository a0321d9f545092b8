#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dm/core_math.hpp"
#include "dm/data.hpp"
#include "dm/edf.hpp"
#include "dm/network.hpp"
#include "dm/optim.hpp"

namespace dm {

enum class SchemeKind { Loss, LossDN, DmEdf };

// How per-example logit gradients are synthesized: a plain loss, its
// derivative-normalized variant, or a DM emphasis density family.
struct WeightScheme {
    SchemeKind kind = SchemeKind::Loss;
    LossKind loss;
    EdfFamily family;

    std::string name() const;
};

struct DatasetSource {
    enum class Kind { Synthetic, Csv, Dmbin } kind = Kind::Synthetic;
    std::string path;
    std::size_t csv_classes = 2;
    SyntheticSpec synthetic;
};

struct RunConfig {
    DatasetSource source;
    CorruptionSpec corruption;
    std::optional<std::vector<std::size_t>> imbalance_keep;
    double split_fraction = 0.8;
    WeightScheme scheme;
    std::vector<std::size_t> hidden_dims = {8};
    Activation activation = Activation::ReLU;
    double dropout_rate = 0.0;
    OptimizerSpec optimizer;
    LrSchedule schedule;
    std::size_t batch_size = 32;
    std::uint64_t total_iterations = 2000;
    std::uint64_t eval_every = 100;
    std::uint64_t seed = 0;
    std::string output_dir;
};

// Flat "key = value" config file with '#' comments and dotted keys.
RunConfig parse_run_config(const std::string& path);
RunConfig parse_run_config_text(const std::string& text);
// Full resolved config, including defaulted values, for run_meta.txt.
std::string render_run_config(const RunConfig& cfg);

struct MetricsRow {
    std::uint64_t iteration = 0;
    double train_accuracy_corrupted = 0.0;
    double train_accuracy_intact = 0.0;
    double val_accuracy = 0.0;
    double mean_p_clean = -1.0;   // -1 marks "subset absent"
    double mean_p_noisy = -1.0;
    double mean_weight = 0.0;
    double emphasis_variance_batch = 0.0;
    double learning_rate = 0.0;
};

struct RunResult {
    std::vector<MetricsRow> metrics;
    double best_val_accuracy = 0.0;
    std::uint64_t best_iteration = 0;
    double final_val_accuracy = 0.0;
    std::string checkpoint_path;  // best-val checkpoint, empty when no output_dir
    Mlp final_net;
};

struct PreparedData {
    Dataset train;  // corrupted per config
    Dataset val;    // trusted (clean labels)
};

// Source -> optional imbalance subsample -> stratified split -> corrupt the
// train part only.
PreparedData prepare_data(const RunConfig& cfg);

// The full training loop on already prepared data.
RunResult run_on(const RunConfig& cfg, const Dataset& train, const Dataset& val);

RunResult run_training(const RunConfig& cfg);

struct SubsetAccuracy {
    double vs_observed = 0.0;
    double vs_clean = 0.0;
    std::optional<double> on_clean_subset;
    std::optional<double> on_noisy_subset;
};

SubsetAccuracy eval_subsets(const Mlp& net, const Dataset& ds);

struct PiDynamics {
    std::optional<double> mean_p_clean;
    std::optional<double> mean_p_noisy;
};

// Mean probability of the observed label, partitioned by corruption flag.
PiDynamics track_pi_dynamics(const std::vector<std::vector<double>>& probs,
                             const Dataset& ds, const std::vector<std::size_t>& batch_indices);

// Relabel the train set with the net's predictions and retrain from scratch
// with unchanged hyperparameters.
RunResult label_correct_and_retrain(const RunConfig& cfg, const Mlp& trained_net,
                                    const Dataset& train, const Dataset& val);

struct SweepRow {
    double lambda = 0.0;
    double beta = 0.0;
    double mode = 0.0;
    double best = 0.0;
    double final_acc = 0.0;
    bool failed = false;
    std::string error;
};

// Runs each config; a failing run is recorded and the sweep continues.
// Rows come back sorted by (lambda, beta).
std::vector<SweepRow> sweep(const std::vector<RunConfig>& configs);
std::string render_sweep_csv(const std::vector<SweepRow>& rows);

// CSV "p,raw_weight,normalized_weight" at n uniform samples of p.
void export_edf_curve(const EdfFamily& family, int n_points, const std::string& path);

void write_metrics_csv(const std::vector<MetricsRow>& rows, const std::string& path);

}  // namespace dm
