#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace frans {

struct MetaInstance {
    std::string series_id;
    std::vector<double> x;       // static features
    std::vector<double> errors;  // per-base-model validation error, >= 0
};

struct ObjectiveResult {
    double loss = 0.0;
    std::vector<double> grad;
    std::vector<double> hess;
};

inline constexpr double kHessianFloor = 1e-6;

/// Expected error of the softmax(z) combination: loss = sum_m w_m c_m, with its gradient
/// w_j (c_j - loss) and floored diagonal Hessian.
ObjectiveResult weighted_error_objective(std::span<const double> scores, std::span<const double> errors);

std::vector<double> softmax(std::span<const double> scores);

struct TreeNode {
    // internal node when feature >= 0: go left when x[feature] < threshold
    int feature = -1;
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;  // leaf output, already scaled by the learning rate
};

struct RegressionTree {
    std::vector<TreeNode> nodes;  // nodes[0] is the root
    double predict(std::span<const double> x) const;
    std::size_t depth() const;
};

struct GbdtParams {
    std::size_t rounds = 100;
    std::size_t max_depth = 3;
    double eta = 0.1;
    double lambda = 1.0;
    std::size_t min_child = 5;
};

struct GbdtModel {
    std::size_t n_outputs = 0;
    std::size_t n_features = 0;
    GbdtParams params;
    std::vector<RegressionTree> trees;      // round-major: trees[r * n_outputs + j]
    std::vector<double> training_loss;      // mean objective after each round

    std::vector<double> raw_scores(std::span<const double> x) const;
};

/// Newton boosting: each round fits one tree per output on the current gradients/Hessians.
/// A tree whose step would raise the training loss is shrunk by halving (and dropped if that
/// fails), so the logged loss never increases.
GbdtModel fit_gbdt(const std::vector<MetaInstance>& instances, const GbdtParams& params, std::uint64_t seed);

/// Combination weights: softmax of the summed tree outputs.
std::vector<double> predict_weights(const GbdtModel& model, std::span<const double> x);

/// Weighted average of per-model forecasts, forecasts[m][k].
std::vector<double> combine(std::span<const double> weights, const std::vector<std::vector<double>>& forecasts);

double mean_objective(const GbdtModel& model, const std::vector<MetaInstance>& instances);

void save_gbdt(std::ostream& out, const GbdtModel& model, const std::vector<std::string>& model_names);
GbdtModel load_gbdt(std::istream& in, std::vector<std::string>* model_names);

}  // namespace frans
