#include "frans/metalearner.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "frans/serialize.hpp"

namespace frans {

namespace {

constexpr const char* kGbdtMagic = "frans-gbdt";
constexpr int kGbdtVersion = 1;

struct SplitChoice {
    bool found = false;
    int feature = -1;
    double threshold = 0.0;
    double gain = 0.0;
};

class TreeBuilder {
public:
    TreeBuilder(const std::vector<MetaInstance>& data, std::span<const double> grad, std::span<const double> hess,
                const GbdtParams& params)
        : data_(data), grad_(grad), hess_(hess), params_(params) {}

    RegressionTree build() {
        std::vector<std::size_t> all(data_.size());
        std::iota(all.begin(), all.end(), 0);
        tree_.nodes.clear();
        grow(all, 0);
        return tree_;
    }

private:
    double leaf_weight(double g, double h) const { return -g / (h + params_.lambda); }
    double score(double g, double h) const { return g * g / (h + params_.lambda); }

    SplitChoice best_split(const std::vector<std::size_t>& rows) const {
        SplitChoice best;
        double g_total = 0.0, h_total = 0.0;
        for (std::size_t r : rows) {
            g_total += grad_[r];
            h_total += hess_[r];
        }
        const double parent = score(g_total, h_total);
        const std::size_t dims = data_.front().x.size();
        std::vector<std::size_t> sorted = rows;
        for (std::size_t f = 0; f < dims; ++f) {
            std::stable_sort(sorted.begin(), sorted.end(),
                             [&](std::size_t a, std::size_t b) { return data_[a].x[f] < data_[b].x[f]; });
            double g_left = 0.0, h_left = 0.0;
            for (std::size_t i = 0; i + 1 < sorted.size(); ++i) {
                g_left += grad_[sorted[i]];
                h_left += hess_[sorted[i]];
                const std::size_t n_left = i + 1;
                const std::size_t n_right = sorted.size() - n_left;
                if (n_left < params_.min_child) continue;
                if (n_right < params_.min_child) break;
                const double here = data_[sorted[i]].x[f];
                const double next = data_[sorted[i + 1]].x[f];
                if (!(here < next)) continue;
                const double gain =
                    0.5 * (score(g_left, h_left) + score(g_total - g_left, h_total - h_left) - parent);
                if (gain > best.gain + 1e-12) {
                    best.found = true;
                    best.feature = static_cast<int>(f);
                    best.threshold = here + (next - here) / 2.0;
                    best.gain = gain;
                }
            }
        }
        return best;
    }

    int grow(const std::vector<std::size_t>& rows, std::size_t depth) {
        const int id = static_cast<int>(tree_.nodes.size());
        tree_.nodes.emplace_back();
        double g = 0.0, h = 0.0;
        for (std::size_t r : rows) {
            g += grad_[r];
            h += hess_[r];
        }
        SplitChoice split;
        if (depth < params_.max_depth && rows.size() >= 2 * params_.min_child) split = best_split(rows);
        if (!split.found) {
            tree_.nodes[static_cast<std::size_t>(id)].value = params_.eta * leaf_weight(g, h);
            return id;
        }
        std::vector<std::size_t> left, right;
        for (std::size_t r : rows) {
            (data_[r].x[static_cast<std::size_t>(split.feature)] < split.threshold ? left : right).push_back(r);
        }
        const int l = grow(left, depth + 1);
        const int rgt = grow(right, depth + 1);
        TreeNode& node = tree_.nodes[static_cast<std::size_t>(id)];
        node.feature = split.feature;
        node.threshold = split.threshold;
        node.left = l;
        node.right = rgt;
        return id;
    }

    const std::vector<MetaInstance>& data_;
    std::span<const double> grad_;
    std::span<const double> hess_;
    const GbdtParams& params_;
    RegressionTree tree_;
};

void scale_leaves(RegressionTree& tree, double factor) {
    for (TreeNode& n : tree.nodes) {
        if (n.feature < 0) n.value *= factor;
    }
}

double mean_loss(const std::vector<std::vector<double>>& scores, const std::vector<MetaInstance>& data) {
    double total = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const std::vector<double> w = softmax(scores[i]);
        for (std::size_t m = 0; m < w.size(); ++m) total += w[m] * data[i].errors[m];
    }
    return total / static_cast<double>(data.size());
}

}  // namespace

std::vector<double> softmax(std::span<const double> scores) {
    std::vector<double> w(scores.size());
    if (scores.empty()) return w;
    const double peak = *std::max_element(scores.begin(), scores.end());
    double total = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        w[i] = std::exp(scores[i] - peak);
        total += w[i];
    }
    for (double& v : w) v /= total;
    return w;
}

ObjectiveResult weighted_error_objective(std::span<const double> scores, std::span<const double> errors) {
    if (scores.size() != errors.size()) throw std::invalid_argument("objective: score/error dimension mismatch");
    ObjectiveResult r;
    const std::vector<double> w = softmax(scores);
    for (std::size_t m = 0; m < w.size(); ++m) r.loss += w[m] * errors[m];
    r.grad.resize(w.size());
    r.hess.resize(w.size());
    for (std::size_t j = 0; j < w.size(); ++j) {
        const double diff = errors[j] - r.loss;
        r.grad[j] = w[j] * diff;
        r.hess[j] = std::max(w[j] * diff * (1.0 - 2.0 * w[j]), kHessianFloor);
    }
    return r;
}

double RegressionTree::predict(std::span<const double> x) const {
    if (nodes.empty()) return 0.0;
    std::size_t i = 0;
    while (nodes[i].feature >= 0) {
        const TreeNode& n = nodes[i];
        i = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] < n.threshold ? n.left : n.right);
    }
    return nodes[i].value;
}

std::size_t RegressionTree::depth() const {
    if (nodes.empty()) return 0;
    std::vector<std::pair<std::size_t, std::size_t>> stack{{0, 0}};
    std::size_t deepest = 0;
    while (!stack.empty()) {
        auto [i, d] = stack.back();
        stack.pop_back();
        deepest = std::max(deepest, d);
        if (nodes[i].feature >= 0) {
            stack.emplace_back(static_cast<std::size_t>(nodes[i].left), d + 1);
            stack.emplace_back(static_cast<std::size_t>(nodes[i].right), d + 1);
        }
    }
    return deepest;
}

std::vector<double> GbdtModel::raw_scores(std::span<const double> x) const {
    if (x.size() != n_features) {
        throw std::invalid_argument("GBDT: feature vector has " + std::to_string(x.size()) + " values, model expects " +
                                    std::to_string(n_features));
    }
    std::vector<double> z(n_outputs, 0.0);
    for (std::size_t t = 0; t < trees.size(); ++t) z[t % n_outputs] += trees[t].predict(x);
    return z;
}

GbdtModel fit_gbdt(const std::vector<MetaInstance>& instances, const GbdtParams& params, std::uint64_t /*seed*/) {
    if (instances.size() < 10) {
        throw std::invalid_argument("fit_gbdt: need at least 10 instances, got " + std::to_string(instances.size()));
    }
    if (instances.size() < params.min_child) {
        throw std::invalid_argument("fit_gbdt: fewer instances than the minimum leaf size");
    }
    const std::size_t dims = instances.front().x.size();
    const std::size_t outputs = instances.front().errors.size();
    if (outputs == 0) throw std::invalid_argument("fit_gbdt: no base models");
    for (const MetaInstance& m : instances) {
        if (m.x.size() != dims) throw std::invalid_argument("fit_gbdt: inconsistent feature dimension for " + m.series_id);
        if (m.errors.size() != outputs) throw std::invalid_argument("fit_gbdt: inconsistent error dimension for " + m.series_id);
        for (double c : m.errors) {
            if (!std::isfinite(c) || c < 0.0) throw std::invalid_argument("fit_gbdt: invalid error value for " + m.series_id);
        }
        for (double v : m.x) {
            if (!std::isfinite(v)) throw std::invalid_argument("fit_gbdt: non-finite feature for " + m.series_id);
        }
    }

    GbdtModel model;
    model.n_outputs = outputs;
    model.n_features = dims;
    model.params = params;
    const std::size_t n = instances.size();
    std::vector<std::vector<double>> scores(n, std::vector<double>(outputs, 0.0));
    std::vector<double> grad(n), hess(n);
    double current = mean_loss(scores, instances);

    for (std::size_t round = 0; round < params.rounds; ++round) {
        for (std::size_t j = 0; j < outputs; ++j) {
            for (std::size_t i = 0; i < n; ++i) {
                const ObjectiveResult r = weighted_error_objective(scores[i], instances[i].errors);
                grad[i] = r.grad[j];
                hess[i] = r.hess[j];
            }
            RegressionTree tree = TreeBuilder(instances, grad, hess, params).build();
            std::vector<double> step(n);
            for (std::size_t i = 0; i < n; ++i) step[i] = tree.predict(instances[i].x);

            // backtrack: the floored Hessian can overshoot on this nonconvex objective
            double factor = 1.0;
            bool accepted = false;
            for (int attempt = 0; attempt < 30; ++attempt) {
                std::vector<std::vector<double>> trial = scores;
                for (std::size_t i = 0; i < n; ++i) trial[i][j] += factor * step[i];
                const double loss = mean_loss(trial, instances);
                if (loss <= current) {
                    scores = std::move(trial);
                    current = loss;
                    accepted = true;
                    break;
                }
                factor *= 0.5;
            }
            scale_leaves(tree, accepted ? factor : 0.0);
            model.trees.push_back(std::move(tree));
        }
        model.training_loss.push_back(current);
    }
    return model;
}

std::vector<double> predict_weights(const GbdtModel& model, std::span<const double> x) {
    for (double v : x) {
        if (!std::isfinite(v)) throw std::invalid_argument("predict_weights: non-finite feature");
    }
    return softmax(model.raw_scores(x));
}

std::vector<double> combine(std::span<const double> weights, const std::vector<std::vector<double>>& forecasts) {
    if (weights.size() != forecasts.size()) {
        throw std::invalid_argument("combine: " + std::to_string(weights.size()) + " weights for " +
                                    std::to_string(forecasts.size()) + " forecasts");
    }
    if (forecasts.empty()) return {};
    const std::size_t h = forecasts.front().size();
    std::vector<double> out(h, 0.0);
    for (std::size_t m = 0; m < forecasts.size(); ++m) {
        if (forecasts[m].size() != h) throw std::invalid_argument("combine: forecasts differ in length");
        for (std::size_t k = 0; k < h; ++k) out[k] += weights[m] * forecasts[m][k];
    }
    return out;
}

double mean_objective(const GbdtModel& model, const std::vector<MetaInstance>& instances) {
    std::vector<std::vector<double>> scores;
    for (const MetaInstance& m : instances) scores.push_back(model.raw_scores(m.x));
    return mean_loss(scores, instances);
}

void save_gbdt(std::ostream& out, const GbdtModel& model, const std::vector<std::string>& model_names) {
    out << kGbdtMagic << ' ' << kGbdtVersion << '\n';
    out << "outputs " << model.n_outputs << " features " << model.n_features << '\n';
    out << "models";
    for (const std::string& name : model_names) out << ' ' << name;
    out << '\n';
    const GbdtParams& p = model.params;
    out << "params " << p.rounds << ' ' << p.max_depth << ' ' << format_double(p.eta) << ' ' << format_double(p.lambda)
        << ' ' << p.min_child << '\n';
    out << "loss " << model.training_loss.size();
    for (double l : model.training_loss) out << ' ' << format_double(l);
    out << '\n';
    out << "trees " << model.trees.size() << '\n';
    for (const RegressionTree& t : model.trees) {
        out << "tree " << t.nodes.size() << '\n';
        for (const TreeNode& n : t.nodes) {
            out << n.feature << ' ' << format_double(n.threshold) << ' ' << n.left << ' ' << n.right << ' '
                << format_double(n.value) << '\n';
        }
    }
    out << "end\n";
}

GbdtModel load_gbdt(std::istream& stream, std::vector<std::string>* model_names) {
    TokenReader in(stream);
    in.expect(kGbdtMagic);
    const std::uint64_t version = in.next_uint();
    if (version != kGbdtVersion) throw std::runtime_error("unsupported GBDT format version " + std::to_string(version));
    GbdtModel m;
    in.expect("outputs");
    m.n_outputs = in.next_uint();
    in.expect("features");
    m.n_features = in.next_uint();
    in.expect("models");
    std::vector<std::string> names;
    for (std::size_t i = 0; i < m.n_outputs; ++i) names.push_back(in.next());
    if (model_names) *model_names = names;
    in.expect("params");
    m.params.rounds = in.next_uint();
    m.params.max_depth = in.next_uint();
    m.params.eta = in.next_double();
    m.params.lambda = in.next_double();
    m.params.min_child = in.next_uint();
    in.expect("loss");
    m.training_loss.resize(in.next_uint());
    for (double& l : m.training_loss) l = in.next_double();
    in.expect("trees");
    m.trees.resize(in.next_uint());
    for (RegressionTree& t : m.trees) {
        in.expect("tree");
        t.nodes.resize(in.next_uint());
        for (TreeNode& n : t.nodes) {
            n.feature = static_cast<int>(in.next_int());
            n.threshold = in.next_double();
            n.left = static_cast<int>(in.next_int());
            n.right = static_cast<int>(in.next_int());
            n.value = in.next_double();
            const auto size = static_cast<int>(t.nodes.size());
            if (n.feature >= 0 && (n.left <= 0 || n.right <= 0 || n.left >= size || n.right >= size ||
                                   static_cast<std::size_t>(n.feature) >= m.n_features)) {
                throw std::runtime_error("GBDT model: malformed tree node");
            }
        }
    }
    in.expect("end");
    return m;
}

}  // namespace frans
