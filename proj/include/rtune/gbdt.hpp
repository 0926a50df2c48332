#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "rtune/core.hpp"

namespace rtune {

// Row-major feature table with a parallel target column. Feature order is
// fixed: per-dimension level indices (as reals), LOD index, cpu_freq, gpu_freq.
struct FeatureMatrix {
    std::size_t n_features = 0;
    std::vector<double> values;   // row-major, n_rows * n_features
    std::vector<double> targets;  // n_rows

    std::size_t n_rows() const { return n_features ? values.size() / n_features : 0; }
    double at(std::size_t row, std::size_t feature) const { return values[row * n_features + feature]; }
    std::span<const double> row(std::size_t r) const {
        return std::span<const double>(values).subspan(r * n_features, n_features);
    }
};

// Features for every sample of a dataset; target picks the ssim or time_ms
// column. Throws ValidationError for an unknown target name.
FeatureMatrix make_features(const Dataset& data, std::string_view target);

// Flat binary tree. Internal nodes route left when feature value < threshold.
struct TreeNode {
    std::int32_t feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    double value = 0.0;  // leaf prediction (mean residual)
    std::int32_t left = -1;
    std::int32_t right = -1;

    bool is_leaf() const { return feature < 0; }
};

struct RegressionTree {
    std::vector<TreeNode> nodes;  // nodes[0] is the root

    double predict_row(std::span<const double> features) const;
};

struct TrainConfig {
    std::size_t n_estimators = 100;
    double learning_rate = 0.1;
    int depth_min = 1;
    int depth_max = 30;
    double train_fraction = 0.7;  // 7:3 split
    std::size_t min_samples_leaf = 5;
    std::uint64_t seed = 0;

    void validate() const;
};

struct GbdtModel {
    std::string target;  // "ssim" | "time_ms"
    double base_prediction = 0.0;
    double learning_rate = 0.1;
    int max_depth = 0;
    double validation_mae = 0.0;
    std::size_t n_features = 0;
    std::vector<RegressionTree> trees;

    double predict_row(std::span<const double> features) const;
};

// Per-candidate-depth record from the outer depth search.
struct DepthSearchEntry {
    int depth = 0;
    double validation_mae = 0.0;
    std::vector<double> train_sse_by_round;
};

struct TrainReport {
    std::vector<DepthSearchEntry> depth_search;
    int selected_depth = 0;
    std::size_t n_train = 0;
    std::size_t n_valid = 0;
};

// Deterministic shuffle by cfg.seed, first floor(train_fraction * n) rows to
// train, remainder to validation. Throws TrainingError when |data| < 10.
std::pair<FeatureMatrix, FeatureMatrix> split_dataset(const Dataset& data, std::string_view target,
                                                      const TrainConfig& cfg);

// Greedy top-down CART on squared error. Candidate thresholds are midpoints
// between consecutive distinct sorted feature values; the split minimizing the
// children's summed SSE wins, ties to the lowest feature index then the
// lowest threshold. Nodes stop at the depth limit, below 2*min_samples_leaf
// samples, or when no split reduces SSE; a candidate split must leave
// min_samples_leaf samples on each side.
RegressionTree fit_tree(const FeatureMatrix& features, std::span<const double> residuals, int max_depth,
                        std::size_t min_samples_leaf);

// The full protocol: for each candidate depth, boost n_estimators rounds of
// squared-error trees on the training split, score MAE on the validation
// split; pick the depth with minimum validation MAE (ties to the smaller
// depth) and retrain at it. `report`, when given, receives the search trace.
GbdtModel train(const Dataset& data, std::string_view target, const TrainConfig& cfg,
                TrainReport* report = nullptr);

// base_prediction + learning_rate * sum of tree outputs, per row.
std::vector<double> predict(const GbdtModel& model, const FeatureMatrix& features);

// Model file: JSON with fields target, base_prediction, learning_rate,
// max_depth, validation_mae, n_features, trees[] (nested node objects).
std::string serialize_model(const GbdtModel& model);
void save_model(const GbdtModel& model, const std::string& path);
GbdtModel load_model(const std::string& path);

// FNV-1a64 over the canonical serialization (the exact bytes save_model writes).
std::uint64_t model_fingerprint(const GbdtModel& model);

}  // namespace rtune
