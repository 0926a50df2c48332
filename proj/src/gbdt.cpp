#include "rtune/gbdt.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "rtune/errors.hpp"
#include "rtune/textio.hpp"

namespace rtune {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Column-major copy plus per-feature row orderings, computed once per
// training set and shared by every tree of every boosting round.
struct FeatureIndex {
    std::size_t n_rows = 0;
    std::size_t n_features = 0;
    std::vector<std::vector<double>> columns;         // [feature][row]
    std::vector<std::vector<std::uint32_t>> orders;   // rows sorted by (value, row)

    explicit FeatureIndex(const FeatureMatrix& X)
        : n_rows(X.n_rows()), n_features(X.n_features), columns(X.n_features), orders(X.n_features) {
        for (std::size_t f = 0; f < n_features; ++f) {
            auto& col = columns[f];
            col.resize(n_rows);
            for (std::size_t r = 0; r < n_rows; ++r) {
                col[r] = X.at(r, f);
            }
            auto& ord = orders[f];
            ord.resize(n_rows);
            std::iota(ord.begin(), ord.end(), 0u);
            std::sort(ord.begin(), ord.end(), [&col](std::uint32_t a, std::uint32_t b) {
                if (col[a] != col[b]) return col[a] < col[b];
                return a < b;
            });
        }
    }
};

struct FrontierNode {
    std::int32_t tree_index = -1;
    int depth = 0;
    std::size_t count = 0;
    double sum = 0.0;
    double sumsq = 0.0;
    double rmin = kInf;
    double rmax = -kInf;
    bool splittable = false;
    bool will_split = false;
    // best candidate so far; strict < while scanning (feature asc, threshold
    // asc) implements the tie rules: lowest feature index, lowest threshold
    double best_sse = kInf;
    std::int32_t best_feature = -1;
    double best_threshold = 0.0;
    std::int32_t left_slot = -1;
    std::int32_t right_slot = -1;
};

bool node_splittable(const FrontierNode& n, int max_depth, std::size_t min_samples_leaf) {
    return n.depth < max_depth && n.count >= 2 * min_samples_leaf && n.rmin < n.rmax;
}

double node_sse(const FrontierNode& n) {
    return std::max(0.0, n.sumsq - n.sum * n.sum / static_cast<double>(n.count));
}

// Level-order CART growth. One sweep over each feature's global sort order
// per level evaluates every frontier node's candidate splits at once.
// `row_values`, when given, receives each row's leaf prediction.
RegressionTree fit_tree_indexed(const FeatureIndex& idx, std::span<const double> residuals, int max_depth,
                                std::size_t min_samples_leaf, std::vector<double>* row_values) {
    const std::size_t n = idx.n_rows;
    const std::size_t n_feat = idx.n_features;
    if (n == 0 || residuals.size() != n) {
        throw ValidationError("fit_tree: features and residuals must be non-empty and the same length");
    }
    if (max_depth < 1) {
        throw ValidationError("fit_tree: max_depth must be >= 1");
    }
    if (min_samples_leaf < 1) {
        throw ValidationError("fit_tree: min_samples_leaf must be >= 1");
    }

    RegressionTree tree;
    tree.nodes.emplace_back();
    if (row_values) row_values->assign(n, 0.0);

    std::vector<FrontierNode> frontier(1);
    {
        FrontierNode& root = frontier[0];
        root.tree_index = 0;
        root.depth = 0;
        root.count = n;
        for (double r : residuals) {
            root.sum += r;
            root.sumsq += r * r;
            root.rmin = std::min(root.rmin, r);
            root.rmax = std::max(root.rmax, r);
        }
        root.splittable = node_splittable(root, max_depth, min_samples_leaf);
    }
    // frontier slot of each row; -1 once the row's node is a finished leaf
    std::vector<std::int32_t> row_slot(n, 0);

    struct SweepState {
        double prev_value = 0.0;
        std::size_t left_count = 0;
        double left_sum = 0.0;
        double left_sumsq = 0.0;
    };
    std::vector<SweepState> state;

    while (!frontier.empty()) {
        bool any_splittable = false;
        for (const auto& node : frontier) {
            any_splittable |= node.splittable;
        }

        if (any_splittable) {
            for (std::size_t f = 0; f < n_feat; ++f) {
                state.assign(frontier.size(), SweepState{});
                const auto& col = idx.columns[f];
                for (std::uint32_t row : idx.orders[f]) {
                    std::int32_t slot = row_slot[row];
                    if (slot < 0) continue;
                    FrontierNode& node = frontier[static_cast<std::size_t>(slot)];
                    if (!node.splittable) continue;
                    SweepState& st = state[static_cast<std::size_t>(slot)];
                    const double v = col[row];
                    if (st.left_count > 0 && v != st.prev_value) {
                        const std::size_t n_left = st.left_count;
                        const std::size_t n_right = node.count - n_left;
                        if (n_left >= min_samples_leaf && n_right >= min_samples_leaf) {
                            const double sum_r = node.sum - st.left_sum;
                            const double sumsq_r = node.sumsq - st.left_sumsq;
                            const double sse_l =
                                st.left_sumsq - st.left_sum * st.left_sum / static_cast<double>(n_left);
                            const double sse_r = sumsq_r - sum_r * sum_r / static_cast<double>(n_right);
                            const double sse = std::max(0.0, sse_l) + std::max(0.0, sse_r);
                            const double thr = (st.prev_value + v) / 2.0;
                            if (st.prev_value < thr && sse < node.best_sse) {
                                node.best_sse = sse;
                                node.best_feature = static_cast<std::int32_t>(f);
                                node.best_threshold = thr;
                            }
                        }
                    }
                    const double r = residuals[row];
                    st.left_count += 1;
                    st.left_sum += r;
                    st.left_sumsq += r * r;
                    st.prev_value = v;
                }
            }
        }

        // Decide each frontier node: split, or finalize as a leaf.
        std::vector<FrontierNode> children;
        for (auto& node : frontier) {
            node.will_split =
                node.splittable && node.best_feature >= 0 && node.best_sse < node_sse(node);
            TreeNode& tn = tree.nodes[static_cast<std::size_t>(node.tree_index)];
            if (!node.will_split) {
                tn.feature = -1;
                tn.value = node.sum / static_cast<double>(node.count);
                continue;
            }
            tn.feature = node.best_feature;
            tn.threshold = node.best_threshold;
            tn.left = static_cast<std::int32_t>(tree.nodes.size());
            tn.right = tn.left + 1;
            tree.nodes.emplace_back();
            tree.nodes.emplace_back();

            node.left_slot = static_cast<std::int32_t>(children.size());
            node.right_slot = node.left_slot + 1;
            FrontierNode child;
            child.depth = node.depth + 1;
            child.tree_index = tn.left;
            children.push_back(child);
            child.tree_index = tn.right;
            children.push_back(child);
        }

        // Route rows: finished leaves record their prediction, split rows
        // move to a child slot and feed its statistics.
        for (std::size_t row = 0; row < n; ++row) {
            std::int32_t slot = row_slot[row];
            if (slot < 0) continue;
            const FrontierNode& node = frontier[static_cast<std::size_t>(slot)];
            if (!node.will_split) {
                if (row_values) {
                    (*row_values)[row] = tree.nodes[static_cast<std::size_t>(node.tree_index)].value;
                }
                row_slot[row] = -1;
                continue;
            }
            const double v = idx.columns[static_cast<std::size_t>(node.best_feature)][row];
            std::int32_t child_slot = v < node.best_threshold ? node.left_slot : node.right_slot;
            row_slot[row] = child_slot;
            FrontierNode& child = children[static_cast<std::size_t>(child_slot)];
            const double r = residuals[row];
            child.count += 1;
            child.sum += r;
            child.sumsq += r * r;
            child.rmin = std::min(child.rmin, r);
            child.rmax = std::max(child.rmax, r);
        }
        for (auto& child : children) {
            child.splittable = node_splittable(child, max_depth, min_samples_leaf);
        }
        frontier = std::move(children);
    }
    return tree;
}

struct BoostOutcome {
    std::vector<RegressionTree> trees;
    std::vector<double> train_sse_by_round;
    double base_prediction = 0.0;
};

BoostOutcome boost(const FeatureIndex& idx, std::span<const double> targets, const TrainConfig& cfg,
                   int depth) {
    const std::size_t n = idx.n_rows;
    BoostOutcome out;
    out.base_prediction = std::accumulate(targets.begin(), targets.end(), 0.0) / static_cast<double>(n);
    out.trees.reserve(cfg.n_estimators);
    out.train_sse_by_round.reserve(cfg.n_estimators);

    std::vector<double> pred(n, out.base_prediction);
    std::vector<double> residual(n);
    std::vector<double> row_delta;
    for (std::size_t i = 0; i < n; ++i) {
        residual[i] = targets[i] - pred[i];
    }
    for (std::size_t round = 0; round < cfg.n_estimators; ++round) {
        out.trees.push_back(
            fit_tree_indexed(idx, residual, depth, cfg.min_samples_leaf, &row_delta));
        double sse = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            pred[i] += cfg.learning_rate * row_delta[i];
            residual[i] = targets[i] - pred[i];
            sse += residual[i] * residual[i];
        }
        out.train_sse_by_round.push_back(sse);
    }
    return out;
}

double validation_mae(const GbdtModel& model, const FeatureMatrix& valid) {
    double abs_sum = 0.0;
    for (std::size_t r = 0; r < valid.n_rows(); ++r) {
        abs_sum += std::abs(model.predict_row(valid.row(r)) - valid.targets[r]);
    }
    return abs_sum / static_cast<double>(valid.n_rows());
}

GbdtModel assemble_model(std::string_view target, const TrainConfig& cfg, int depth, BoostOutcome&& b,
                         std::size_t n_features) {
    GbdtModel m;
    m.target = std::string(target);
    m.base_prediction = b.base_prediction;
    m.learning_rate = cfg.learning_rate;
    m.max_depth = depth;
    m.n_features = n_features;
    m.trees = std::move(b.trees);
    return m;
}

nlohmann::json node_to_json(const RegressionTree& tree, std::int32_t index) {
    const TreeNode& node = tree.nodes[static_cast<std::size_t>(index)];
    nlohmann::json j;
    if (node.is_leaf()) {
        j["value"] = node.value;
    } else {
        j["feature"] = node.feature;
        j["threshold"] = node.threshold;
        j["left"] = node_to_json(tree, node.left);
        j["right"] = node_to_json(tree, node.right);
    }
    return j;
}

std::int32_t node_from_json(const nlohmann::json& j, RegressionTree& tree, std::size_t n_features) {
    if (!j.is_object()) {
        throw FormatError("model: tree node is not an object");
    }
    std::int32_t index = static_cast<std::int32_t>(tree.nodes.size());
    tree.nodes.emplace_back();
    if (j.contains("value")) {
        if (j.size() != 1 || !j["value"].is_number()) {
            throw FormatError("model: malformed leaf node");
        }
        tree.nodes[static_cast<std::size_t>(index)].value = j["value"].get<double>();
        return index;
    }
    if (!j.contains("feature") || !j.contains("threshold") || !j.contains("left") || !j.contains("right") ||
        j.size() != 4) {
        throw FormatError("model: malformed internal node");
    }
    const std::int64_t feature = j["feature"].get<std::int64_t>();
    if (feature < 0 || static_cast<std::size_t>(feature) >= n_features) {
        throw FormatError("model: node feature index out of range");
    }
    const double threshold = j["threshold"].get<double>();
    std::int32_t left = node_from_json(j["left"], tree, n_features);
    std::int32_t right = node_from_json(j["right"], tree, n_features);
    TreeNode& node = tree.nodes[static_cast<std::size_t>(index)];
    node.feature = static_cast<std::int32_t>(feature);
    node.threshold = threshold;
    node.left = left;
    node.right = right;
    return index;
}

}  // namespace

void TrainConfig::validate() const {
    if (n_estimators < 1) throw TrainingError("n_estimators must be >= 1");
    if (!(learning_rate > 0.0 && learning_rate <= 1.0)) {
        throw TrainingError("learning_rate must lie in (0, 1]");
    }
    if (depth_min < 1 || depth_min > depth_max) {
        throw TrainingError("depth search range is empty or invalid");
    }
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
        throw TrainingError("train_fraction must lie in (0, 1)");
    }
    if (min_samples_leaf < 1) throw TrainingError("min_samples_leaf must be >= 1");
}

FeatureMatrix make_features(const Dataset& data, std::string_view target) {
    bool want_ssim = target == "ssim";
    if (!want_ssim && target != "time_ms") {
        throw ValidationError("unknown target '" + std::string(target) + "' (expected ssim or time_ms)");
    }
    const std::size_t k = data.space.dimension_count();
    FeatureMatrix X;
    X.n_features = k + 3;
    X.values.reserve(data.samples.size() * X.n_features);
    X.targets.reserve(data.samples.size());
    for (const auto& s : data.samples) {
        for (std::uint32_t idx : s.point.params.indices) {
            X.values.push_back(static_cast<double>(idx));
        }
        X.values.push_back(static_cast<double>(s.point.lod));
        X.values.push_back(s.point.cpu_freq_mhz);
        X.values.push_back(s.point.gpu_freq_mhz);
        X.targets.push_back(want_ssim ? s.outcome.ssim : s.outcome.time_ms);
    }
    return X;
}

double RegressionTree::predict_row(std::span<const double> features) const {
    const TreeNode* node = &nodes[0];
    while (!node->is_leaf()) {
        node = features[static_cast<std::size_t>(node->feature)] < node->threshold
                   ? &nodes[static_cast<std::size_t>(node->left)]
                   : &nodes[static_cast<std::size_t>(node->right)];
    }
    return node->value;
}

double GbdtModel::predict_row(std::span<const double> features) const {
    double acc = 0.0;
    for (const auto& tree : trees) {
        acc += tree.predict_row(features);
    }
    return base_prediction + learning_rate * acc;
}

std::pair<FeatureMatrix, FeatureMatrix> split_dataset(const Dataset& data, std::string_view target,
                                                      const TrainConfig& cfg) {
    cfg.validate();
    const std::size_t n = data.samples.size();
    if (n < 10) {
        throw TrainingError("dataset too small: " + std::to_string(n) + " samples (need >= 10)");
    }
    std::vector<std::uint32_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0u);
    std::mt19937_64 rng(cfg.seed);
    std::shuffle(perm.begin(), perm.end(), rng);

    // the nudge keeps exact ratios (0.7 * 10) from rounding below the floor
    const std::size_t n_train = static_cast<std::size_t>(std::floor(cfg.train_fraction * n + 1e-9));

    FeatureMatrix all = make_features(data, target);
    FeatureMatrix train;
    FeatureMatrix valid;
    train.n_features = valid.n_features = all.n_features;
    for (std::size_t i = 0; i < n; ++i) {
        FeatureMatrix& dst = i < n_train ? train : valid;
        auto row = all.row(perm[i]);
        dst.values.insert(dst.values.end(), row.begin(), row.end());
        dst.targets.push_back(all.targets[perm[i]]);
    }
    return {std::move(train), std::move(valid)};
}

RegressionTree fit_tree(const FeatureMatrix& features, std::span<const double> residuals, int max_depth,
                        std::size_t min_samples_leaf) {
    FeatureIndex idx(features);
    return fit_tree_indexed(idx, residuals, max_depth, min_samples_leaf, nullptr);
}

GbdtModel train(const Dataset& data, std::string_view target, const TrainConfig& cfg, TrainReport* report) {
    cfg.validate();
    auto [train_X, valid_X] = split_dataset(data, target, cfg);
    FeatureIndex idx(train_X);

    const int n_candidates = cfg.depth_max - cfg.depth_min + 1;
    std::vector<DepthSearchEntry> entries(static_cast<std::size_t>(n_candidates));

    // Candidate depths are independent; a small worker pool keeps memory flat
    // and the result identical to a sequential search.
    std::atomic<int> next{0};
    auto run_candidate = [&](int i) {
        const int depth = cfg.depth_min + i;
        BoostOutcome b = boost(idx, train_X.targets, cfg, depth);
        auto& entry = entries[static_cast<std::size_t>(i)];
        entry.depth = depth;
        entry.train_sse_by_round = b.train_sse_by_round;
        GbdtModel candidate = assemble_model(target, cfg, depth, std::move(b), train_X.n_features);
        entry.validation_mae = validation_mae(candidate, valid_X);
    };
    unsigned n_threads = std::min<unsigned>(std::thread::hardware_concurrency(),
                                            static_cast<unsigned>(n_candidates));
    if (n_threads <= 1 || n_candidates == 1) {
        for (int i = 0; i < n_candidates; ++i) run_candidate(i);
    } else {
        std::vector<std::thread> pool;
        pool.reserve(n_threads);
        for (unsigned t = 0; t < n_threads; ++t) {
            pool.emplace_back([&]() {
                while (true) {
                    int i = next.fetch_add(1);
                    if (i >= n_candidates) break;
                    run_candidate(i);
                }
            });
        }
        for (auto& th : pool) th.join();
    }

    std::size_t best = 0;
    for (std::size_t i = 1; i < entries.size(); ++i) {
        if (entries[i].validation_mae < entries[best].validation_mae) best = i;  // ties: smaller depth
    }
    const int selected = entries[best].depth;

    BoostOutcome final_boost = boost(idx, train_X.targets, cfg, selected);
    GbdtModel model = assemble_model(target, cfg, selected, std::move(final_boost), train_X.n_features);
    model.validation_mae = validation_mae(model, valid_X);

    if (report) {
        report->depth_search = std::move(entries);
        report->selected_depth = selected;
        report->n_train = train_X.n_rows();
        report->n_valid = valid_X.n_rows();
    }
    return model;
}

std::vector<double> predict(const GbdtModel& model, const FeatureMatrix& features) {
    if (features.n_features != model.n_features) {
        throw ValidationError("feature width " + std::to_string(features.n_features) +
                              " does not match model width " + std::to_string(model.n_features));
    }
    std::vector<double> out;
    out.reserve(features.n_rows());
    for (std::size_t r = 0; r < features.n_rows(); ++r) {
        out.push_back(model.predict_row(features.row(r)));
    }
    return out;
}

std::string serialize_model(const GbdtModel& model) {
    nlohmann::json j;
    j["target"] = model.target;
    j["base_prediction"] = model.base_prediction;
    j["learning_rate"] = model.learning_rate;
    j["max_depth"] = model.max_depth;
    j["validation_mae"] = model.validation_mae;
    j["n_features"] = model.n_features;
    nlohmann::json trees = nlohmann::json::array();
    for (const auto& tree : model.trees) {
        trees.push_back(node_to_json(tree, 0));
    }
    j["trees"] = std::move(trees);
    return j.dump(2) + "\n";
}

void save_model(const GbdtModel& model, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw FormatError("cannot open '" + path + "' for writing");
    }
    out << serialize_model(model);
    if (!out) {
        throw FormatError("write failed for '" + path + "'");
    }
}

GbdtModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw FormatError("cannot open '" + path + "'");
    }
    std::stringstream buf;
    buf << in.rdbuf();
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(buf.str());
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError(path + ": " + e.what());
    }
    try {
        GbdtModel m;
        m.target = j.at("target").get<std::string>();
        if (m.target != "ssim" && m.target != "time_ms") {
            throw FormatError(path + ": unknown target '" + m.target + "'");
        }
        m.base_prediction = j.at("base_prediction").get<double>();
        m.learning_rate = j.at("learning_rate").get<double>();
        if (!(m.learning_rate > 0.0 && m.learning_rate <= 1.0)) {
            throw FormatError(path + ": learning_rate out of range");
        }
        m.max_depth = j.at("max_depth").get<int>();
        m.validation_mae = j.at("validation_mae").get<double>();
        m.n_features = j.at("n_features").get<std::size_t>();
        if (m.n_features < 1) {
            throw FormatError(path + ": n_features must be >= 1");
        }
        for (const auto& tj : j.at("trees")) {
            RegressionTree tree;
            node_from_json(tj, tree, m.n_features);
            m.trees.push_back(std::move(tree));
        }
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path + ": " + e.what());
    }
}

std::uint64_t model_fingerprint(const GbdtModel& model) {
    return fnv1a64(serialize_model(model));
}

}  // namespace rtune
