#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numbers>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "faultlab/eval/metrics.hpp"
#include "faultlab/features.hpp"
#include "faultlab/nncore/adam.hpp"
#include "faultlab/nncore/checkpoint.hpp"
#include "faultlab/simgen.hpp"

namespace faultlab::seg {

/// mean, std, min, max, slope for each channel.
inline constexpr std::size_t kStatsPerChannel = 5;
inline constexpr std::size_t kNumFeatures = kStatsPerChannel * kNumChannels;

struct WindowFeatures {
    std::vector<double> x;
    int label = sim::kNoFault;
    std::size_t start = 0;
};

/// Summary statistics of records [start, start+len) of a T x 3 matrix.
inline std::vector<double> window_stats(const nn::Tensor2& raw, std::size_t start, std::size_t len) {
    require(len >= 1 && start + len <= raw.rows, "window_stats: window outside series");
    std::vector<double> f;
    f.reserve(kStatsPerChannel * raw.cols);
    const double n = static_cast<double>(len);
    const double tbar = (n - 1.0) / 2.0;
    double tss = 0.0;
    for (std::size_t k = 0; k < len; ++k) tss += (static_cast<double>(k) - tbar) * (static_cast<double>(k) - tbar);
    for (std::size_t c = 0; c < raw.cols; ++c) {
        double sum = 0.0, mn = raw(start, c), mx = raw(start, c);
        for (std::size_t k = 0; k < len; ++k) {
            const double v = raw(start + k, c);
            sum += v;
            mn = std::min(mn, v);
            mx = std::max(mx, v);
        }
        const double mean = sum / n;
        double ss = 0.0, cov = 0.0;
        for (std::size_t k = 0; k < len; ++k) {
            const double d = raw(start + k, c) - mean;
            ss += d * d;
            cov += (static_cast<double>(k) - tbar) * d;
        }
        f.push_back(mean);
        f.push_back(std::sqrt(ss / n));
        f.push_back(mn);
        f.push_back(mx);
        f.push_back(tss > 0 ? cov / tss : 0.0);
    }
    return f;
}

/// Majority label, ties toward the lower class id.
inline int majority_label(const sim::TimeSeriesDataset& ds, std::size_t start, std::size_t len) {
    std::array<std::size_t, sim::kNumClasses + 1> counts{};
    for (std::size_t t = start; t < start + len; ++t) ++counts[static_cast<std::size_t>(ds.records[t].fault_class)];
    int best = 1;
    for (int c = 2; c <= sim::kNumClasses; ++c)
        if (counts[static_cast<std::size_t>(c)] > counts[static_cast<std::size_t>(best)]) best = c;
    return best;
}

inline std::vector<WindowFeatures> windowize(const sim::TimeSeriesDataset& ds, std::size_t window, std::size_t stride) {
    require(window >= 1 && stride >= 1, "windowize: window and stride must be >= 1");
    if (window > ds.size())
        throw InputError("windowize: window " + std::to_string(window) + " exceeds series length " + std::to_string(ds.size()));
    const auto raw = feature_matrix(ds);
    std::vector<WindowFeatures> rows;
    for (std::size_t s = 0; s + window <= ds.size(); s += stride)
        rows.push_back({window_stats(raw, s, window), majority_label(ds, s, window), s});
    return rows;
}

enum class ClassifierKind { decision_tree, random_forest, naive_bayes, logistic_regression, sgd_linear, linear_svm };

inline constexpr std::array<ClassifierKind, 6> kAllKinds{ClassifierKind::decision_tree, ClassifierKind::random_forest,
                                                         ClassifierKind::naive_bayes, ClassifierKind::logistic_regression,
                                                         ClassifierKind::sgd_linear, ClassifierKind::linear_svm};

inline std::string_view to_string(ClassifierKind k) {
    switch (k) {
        case ClassifierKind::decision_tree: return "dt";
        case ClassifierKind::random_forest: return "rf";
        case ClassifierKind::naive_bayes: return "nb";
        case ClassifierKind::logistic_regression: return "lr";
        case ClassifierKind::sgd_linear: return "sgd";
        case ClassifierKind::linear_svm: return "svm";
    }
    return "rf";
}

inline ClassifierKind kind_from_string(std::string_view s) {
    for (auto k : kAllKinds)
        if (s == to_string(k)) return k;
    throw InputError("unknown classifier kind '" + std::string(s) + "' (expected dt, rf, nb, lr, sgd or svm)");
}

enum class SgdLoss { hinge, log };

struct ClassifierConfig {
    std::size_t max_depth = 12;
    std::size_t min_samples_split = 2;
    std::size_t n_trees = 25;
    std::size_t max_features = 0;  // 0: round(sqrt(d)) for forests, all features for a single tree
    bool bootstrap = true;
    double nb_var_smoothing = 1e-9;
    double l2 = 1e-4;
    std::size_t gd_iterations = 1500;
    double gd_learning_rate = 0.1;
    std::size_t sgd_epochs = 600;
    double sgd_eta0 = 0.3;
    SgdLoss sgd_loss = SgdLoss::hinge;
    bool sgd_average = true;  // average the iterates after the first epoch
    std::uint64_t seed = 0;
};

struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    std::vector<double> dist;  // class distribution at leaves, indexed like ClassifierModel::classes

    friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

struct DecisionTree {
    std::vector<TreeNode> nodes;

    const std::vector<double>& leaf(std::span<const double> x) const {
        std::size_t k = 0;
        while (nodes[k].feature >= 0)
            k = static_cast<std::size_t>(x[static_cast<std::size_t>(nodes[k].feature)] <= nodes[k].threshold ? nodes[k].left
                                                                                                           : nodes[k].right);
        return nodes[k].dist;
    }

    friend bool operator==(const DecisionTree&, const DecisionTree&) = default;
};

struct GaussianNb {
    std::vector<double> log_prior;  // per class
    nn::Tensor2 mean;               // classes x features
    nn::Tensor2 var;

    friend bool operator==(const GaussianNb&, const GaussianNb&) = default;
};

struct LinearModel {
    nn::Tensor2 w;  // classes x features, on standardized inputs
    std::vector<double> b;
    ChannelScaler scaler;

    friend bool operator==(const LinearModel&, const LinearModel&) = default;
};

struct ClassifierModel {
    ClassifierKind kind = ClassifierKind::random_forest;
    std::vector<int> classes;  // ascending labels
    std::size_t n_features = 0;
    bool trained = false;
    std::vector<DecisionTree> trees;
    GaussianNb nb;
    LinearModel linear;

    friend bool operator==(const ClassifierModel&, const ClassifierModel&) = default;
};

struct Prediction {
    int label = 1;
    std::vector<double> scores;  // per entry of model.classes
};

namespace detail {

inline double gini(const std::vector<double>& counts, double n) {
    if (n <= 0) return 0.0;
    double s = 1.0;
    for (double c : counts) s -= (c / n) * (c / n);
    return s;
}

struct TreeBuilder {
    const std::vector<WindowFeatures>& rows;
    const std::vector<std::size_t>& class_index;  // per row
    std::size_t n_classes;
    std::size_t max_depth;
    std::size_t min_split;
    std::size_t max_features;  // features examined per split
    Rng rng;
    DecisionTree tree;

    int build(std::vector<std::size_t> idx, std::size_t depth) {
        std::vector<double> counts(n_classes, 0.0);
        for (auto i : idx) counts[class_index[i]] += 1.0;
        const double n = static_cast<double>(idx.size());
        const int node_id = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();
        const double parent = gini(counts, n);

        int best_f = -1;
        double best_thr = 0.0, best_imp = parent - 1e-12;
        if (depth < max_depth && idx.size() >= min_split && parent > 0.0) {
            const std::size_t d = rows.front().x.size();
            std::vector<std::size_t> feats(d);
            std::iota(feats.begin(), feats.end(), std::size_t{0});
            if (max_features < d) {
                shuffle(feats.begin(), feats.end(), rng);
                feats.resize(max_features);
                std::sort(feats.begin(), feats.end());
            }
            std::vector<std::size_t> order = idx;
            for (auto f : feats) {
                std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
                    return rows[a].x[f] < rows[b].x[f] || (rows[a].x[f] == rows[b].x[f] && a < b);
                });
                std::vector<double> left(n_classes, 0.0), right = counts;
                for (std::size_t k = 0; k + 1 < order.size(); ++k) {
                    const auto ci = class_index[order[k]];
                    left[ci] += 1.0;
                    right[ci] -= 1.0;
                    const double a = rows[order[k]].x[f], b = rows[order[k + 1]].x[f];
                    if (a == b) continue;
                    const double nl = static_cast<double>(k + 1), nr = n - nl;
                    const double imp = (nl * gini(left, nl) + nr * gini(right, nr)) / n;
                    if (imp < best_imp) {
                        best_imp = imp;
                        best_f = static_cast<int>(f);
                        best_thr = a + (b - a) / 2.0;
                        if (!(best_thr > a && best_thr < b) && !(best_thr == a)) best_thr = a;
                    }
                }
            }
        }
        if (best_f < 0) {
            for (double& c : counts) c /= n;
            tree.nodes[static_cast<std::size_t>(node_id)].dist = std::move(counts);
            return node_id;
        }
        std::vector<std::size_t> li, ri;
        for (auto i : idx) (rows[i].x[static_cast<std::size_t>(best_f)] <= best_thr ? li : ri).push_back(i);
        tree.nodes[static_cast<std::size_t>(node_id)].feature = best_f;
        tree.nodes[static_cast<std::size_t>(node_id)].threshold = best_thr;
        const int l = build(std::move(li), depth + 1);
        const int r = build(std::move(ri), depth + 1);
        tree.nodes[static_cast<std::size_t>(node_id)].left = l;
        tree.nodes[static_cast<std::size_t>(node_id)].right = r;
        return node_id;
    }
};

inline std::vector<double> raw_scores(const ClassifierModel& m, std::span<const double> x) {
    const std::size_t C = m.classes.size();
    std::vector<double> s(C, 0.0);
    switch (m.kind) {
        case ClassifierKind::decision_tree:
        case ClassifierKind::random_forest: {
            for (const auto& t : m.trees) {
                const auto& d = t.leaf(x);
                for (std::size_t c = 0; c < C; ++c) s[c] += d[c];
            }
            for (double& v : s) v /= static_cast<double>(m.trees.size());
            break;
        }
        case ClassifierKind::naive_bayes: {
            for (std::size_t c = 0; c < C; ++c) {
                double l = m.nb.log_prior[c];
                for (std::size_t j = 0; j < x.size(); ++j) {
                    const double var = m.nb.var(c, j);
                    const double d = x[j] - m.nb.mean(c, j);
                    l -= 0.5 * (std::log(2.0 * std::numbers::pi * var) + d * d / var);
                }
                s[c] = l;
            }
            break;
        }
        default: {
            for (std::size_t c = 0; c < C; ++c) {
                double v = m.linear.b[c];
                for (std::size_t j = 0; j < x.size(); ++j)
                    v += m.linear.w(c, j) * (x[j] - m.linear.scaler.mean[j]) / m.linear.scaler.scale[j];
                s[c] = v;
            }
        }
    }
    return s;
}

inline std::vector<double> standardize(const LinearModel& lm, std::span<const double> x) {
    std::vector<double> z(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) z[j] = (x[j] - lm.scaler.mean[j]) / lm.scaler.scale[j];
    return z;
}

/// Accumulates gradient of the configured multiclass loss for one row.
/// Returns the row's loss.
inline double linear_row_grad(const LinearModel& lm, std::span<const double> z, std::size_t y, bool hinge,
                              nn::Tensor2& gw, std::vector<double>& gb, double weight) {
    const std::size_t C = lm.b.size();
    std::vector<double> s(C);
    for (std::size_t c = 0; c < C; ++c) {
        double v = lm.b[c];
        for (std::size_t j = 0; j < z.size(); ++j) v += lm.w(c, j) * z[j];
        s[c] = v;
    }
    if (hinge) {
        // Crammer-Singer: max(0, 1 + max_{c != y} s_c - s_y)
        std::size_t worst = y == 0 ? 1 : 0;
        for (std::size_t c = 0; c < C; ++c)
            if (c != y && s[c] > s[worst]) worst = c;
        const double margin = 1.0 + s[worst] - s[y];
        if (margin <= 0.0) return 0.0;
        for (std::size_t j = 0; j < z.size(); ++j) {
            gw(worst, j) += weight * z[j];
            gw(y, j) -= weight * z[j];
        }
        gb[worst] += weight;
        gb[y] -= weight;
        return margin;
    }
    nn::softmax_inplace(s);
    const double loss = -std::log(std::max(s[y], 1e-300));
    for (std::size_t c = 0; c < C; ++c) {
        const double g = weight * (s[c] - (c == y ? 1.0 : 0.0));
        gb[c] += g;
        for (std::size_t j = 0; j < z.size(); ++j) gw(c, j) += g * z[j];
    }
    return loss;
}

inline ChannelScaler fit_row_scaler(const std::vector<WindowFeatures>& rows, const std::vector<std::size_t>& idx) {
    nn::Tensor2 x(idx.size(), rows[idx.front()].x.size());
    for (std::size_t k = 0; k < idx.size(); ++k) std::copy(rows[idx[k]].x.begin(), rows[idx[k]].x.end(), x.row(k).begin());
    return ChannelScaler::fit(x);
}

}  // namespace detail

inline void check_rows(const std::vector<WindowFeatures>& rows) {
    if (rows.empty()) throw InputError("train_classifier: no rows");
    const auto d = rows.front().x.size();
    for (const auto& r : rows) {
        require_shape(r.x.size() == d, "train_classifier: rows differ in dimensionality");
        for (double v : r.x)
            if (!std::isfinite(v)) throw InputError("train_classifier: non-finite feature");
    }
}

inline ClassifierModel train_classifier(ClassifierKind kind, const std::vector<WindowFeatures>& rows,
                                        const ClassifierConfig& cfg = {}) {
    check_rows(rows);
    ClassifierModel m;
    m.kind = kind;
    m.n_features = rows.front().x.size();
    for (const auto& r : rows) m.classes.push_back(r.label);
    std::sort(m.classes.begin(), m.classes.end());
    m.classes.erase(std::unique(m.classes.begin(), m.classes.end()), m.classes.end());
    if (m.classes.size() < 2)
        throw InputError("train_classifier: need at least two classes, got only class " + std::to_string(m.classes.front()));
    const std::size_t C = m.classes.size(), d = m.n_features, n = rows.size();
    std::vector<std::size_t> cls(n);
    for (std::size_t i = 0; i < n; ++i)
        cls[i] = static_cast<std::size_t>(std::lower_bound(m.classes.begin(), m.classes.end(), rows[i].label) - m.classes.begin());
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), std::size_t{0});
    Rng rng(mix64(cfg.seed ^ (0x5c1a55ULL + static_cast<std::uint64_t>(kind))));

    switch (kind) {
        case ClassifierKind::decision_tree: {
            detail::TreeBuilder b{rows, cls, C, cfg.max_depth, cfg.min_samples_split, d, Rng(0), {}};
            b.build(all, 0);
            m.trees.push_back(std::move(b.tree));
            break;
        }
        case ClassifierKind::random_forest: {
            const std::size_t mf = cfg.max_features
                                       ? std::min(cfg.max_features, d)
                                       : std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(std::sqrt(static_cast<double>(d)))));
            for (std::size_t t = 0; t < cfg.n_trees; ++t) {
                std::vector<std::size_t> sample = all;
                if (cfg.bootstrap)
                    for (auto& s : sample) s = static_cast<std::size_t>(uniform_int(rng, 0, static_cast<std::int64_t>(n - 1)));
                detail::TreeBuilder b{rows, cls, C, cfg.max_depth, cfg.min_samples_split, mf, Rng(rng()), {}};
                b.build(std::move(sample), 0);
                m.trees.push_back(std::move(b.tree));
            }
            break;
        }
        case ClassifierKind::naive_bayes: {
            m.nb.log_prior.assign(C, 0.0);
            m.nb.mean = nn::Tensor2(C, d);
            m.nb.var = nn::Tensor2(C, d);
            std::vector<double> count(C, 0.0);
            for (std::size_t i = 0; i < n; ++i) {
                count[cls[i]] += 1.0;
                for (std::size_t j = 0; j < d; ++j) m.nb.mean(cls[i], j) += rows[i].x[j];
            }
            for (std::size_t c = 0; c < C; ++c)
                for (std::size_t j = 0; j < d; ++j) m.nb.mean(c, j) /= count[c];
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < d; ++j) {
                    const double dv = rows[i].x[j] - m.nb.mean(cls[i], j);
                    m.nb.var(cls[i], j) += dv * dv;
                }
            // variance floor relative to the widest feature, as in common Gaussian NB implementations
            double max_var = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
                double mu = 0.0, ss = 0.0;
                for (const auto& r : rows) mu += r.x[j];
                mu /= static_cast<double>(n);
                for (const auto& r : rows) ss += (r.x[j] - mu) * (r.x[j] - mu);
                max_var = std::max(max_var, ss / static_cast<double>(n));
            }
            const double eps = std::max(cfg.nb_var_smoothing * max_var, 1e-300);
            for (std::size_t c = 0; c < C; ++c) {
                m.nb.log_prior[c] = std::log(count[c] / static_cast<double>(n));
                for (std::size_t j = 0; j < d; ++j) m.nb.var(c, j) = m.nb.var(c, j) / count[c] + eps;
            }
            break;
        }
        case ClassifierKind::logistic_regression:
        case ClassifierKind::linear_svm: {
            auto& lm = m.linear;
            lm.scaler = detail::fit_row_scaler(rows, all);
            lm.w = nn::Tensor2(C, d);
            lm.b.assign(C, 0.0);
            std::vector<std::vector<double>> z(n);
            for (std::size_t i = 0; i < n; ++i) z[i] = detail::standardize(lm, rows[i].x);
            const bool hinge = kind == ClassifierKind::linear_svm;
            nn::AdamState opt(nn::AdamConfig{cfg.gd_learning_rate, 0.9, 0.999, 1e-8}, C * d + C);
            nn::Tensor2 gw(C, d);
            std::vector<double> gb(C);
            for (std::size_t it = 0; it < cfg.gd_iterations; ++it) {
                std::fill(gw.data.begin(), gw.data.end(), 0.0);
                std::fill(gb.begin(), gb.end(), 0.0);
                for (std::size_t i = 0; i < n; ++i) detail::linear_row_grad(lm, z[i], cls[i], hinge, gw, gb, 1.0 / static_cast<double>(n));
                for (std::size_t k = 0; k < gw.size(); ++k) gw.data[k] += cfg.l2 * lm.w.data[k];
                nn::adam_step({std::span<double>(lm.w.data), std::span<double>(lm.b)}, {std::span<double>(gw.data), std::span<double>(gb)}, opt);
            }
            break;
        }
        case ClassifierKind::sgd_linear: {
            auto& lm = m.linear;
            lm.scaler = detail::fit_row_scaler(rows, all);
            lm.w = nn::Tensor2(C, d);
            lm.b.assign(C, 0.0);
            std::vector<std::vector<double>> z(n);
            for (std::size_t i = 0; i < n; ++i) z[i] = detail::standardize(lm, rows[i].x);
            nn::Tensor2 gw(C, d);
            std::vector<double> gb(C);
            std::vector<std::size_t> order = all;
            std::size_t step = 0, averaged = 0;
            nn::Tensor2 avg_w(C, d);
            std::vector<double> avg_b(C, 0.0);
            for (std::size_t e = 0; e < cfg.sgd_epochs; ++e) {
                shuffle(order.begin(), order.end(), rng);
                for (auto i : order) {
                    const double eta = cfg.sgd_eta0 / (1.0 + cfg.sgd_eta0 * cfg.l2 * static_cast<double>(step++));
                    std::fill(gw.data.begin(), gw.data.end(), 0.0);
                    std::fill(gb.begin(), gb.end(), 0.0);
                    detail::linear_row_grad(lm, z[i], cls[i], cfg.sgd_loss == SgdLoss::hinge, gw, gb, 1.0);
                    for (std::size_t k = 0; k < gw.size(); ++k) lm.w.data[k] -= eta * (gw.data[k] + cfg.l2 * lm.w.data[k]);
                    for (std::size_t c = 0; c < C; ++c) lm.b[c] -= eta * gb[c];
                    if (cfg.sgd_average && e > 0) {
                        const double a = 1.0 / static_cast<double>(++averaged);
                        for (std::size_t k = 0; k < gw.size(); ++k) avg_w.data[k] += a * (lm.w.data[k] - avg_w.data[k]);
                        for (std::size_t c = 0; c < C; ++c) avg_b[c] += a * (lm.b[c] - avg_b[c]);
                    }
                }
            }
            if (averaged > 0) {
                lm.w = std::move(avg_w);
                lm.b = std::move(avg_b);
            }
            break;
        }
    }
    m.trained = true;
    return m;
}

/// Argmax of the kind's scores; ties go to the lowest class id.
inline Prediction predict(const ClassifierModel& m, std::span<const double> x) {
    if (!m.trained) throw InputError("predict: classifier is not trained");
    require_shape(x.size() == m.n_features, "predict: row has " + std::to_string(x.size()) + " features, model expects " +
                                                std::to_string(m.n_features));
    Prediction p{m.classes.front(), detail::raw_scores(m, x)};
    std::size_t best = 0;
    for (std::size_t c = 1; c < p.scores.size(); ++c)
        if (p.scores[c] > p.scores[best]) best = c;
    p.label = m.classes[best];
    return p;
}

/// Class distribution over labels 1..n_labels (index label-1). Tree kinds use
/// leaf frequencies; the others take a softmax of their scores.
inline std::vector<double> label_probabilities(const ClassifierModel& m, std::span<const double> x,
                                               std::size_t n_labels = sim::kNumClasses) {
    auto s = predict(m, x).scores;
    if (m.kind != ClassifierKind::decision_tree && m.kind != ClassifierKind::random_forest) nn::softmax_inplace(s);
    std::vector<double> out(n_labels, 0.0);
    for (std::size_t c = 0; c < m.classes.size(); ++c) out[static_cast<std::size_t>(m.classes[c] - 1)] = s[c];
    return out;
}

/// Stratified fold assignment: rows are grouped by class, shuffled within the
/// class, laid end to end and dealt round-robin, so fold sizes differ by at
/// most one.
inline std::vector<std::size_t> stratified_folds(const std::vector<WindowFeatures>& rows, std::size_t k, std::uint64_t seed) {
    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < rows.size(); ++i) by_class[rows[i].label].push_back(i);
    Rng rng(mix64(seed ^ 0xf01dULL));
    std::vector<std::size_t> fold(rows.size());
    std::size_t pos = 0;
    for (auto& [label, idx] : by_class) {
        shuffle(idx.begin(), idx.end(), rng);
        for (auto i : idx) fold[i] = pos++ % k;
    }
    return fold;
}

inline eval::EvalReport crossval_10fold(const std::vector<WindowFeatures>& rows, ClassifierKind kind,
                                        const ClassifierConfig& cfg, std::uint64_t seed, std::size_t k = 10) {
    if (rows.size() < k)
        throw InputError("crossval: " + std::to_string(rows.size()) + " rows is fewer than " + std::to_string(k) + " folds");
    const auto fold = stratified_folds(rows, k, seed);
    int max_label = 1;
    for (const auto& r : rows) max_label = std::max(max_label, r.label);
    eval::EvalReport report;
    report.variant = std::string(to_string(kind));
    report.pooled = eval::ConfusionMatrix(static_cast<std::size_t>(max_label));
    for (std::size_t f = 0; f < k; ++f) {
        std::vector<WindowFeatures> train, test;
        for (std::size_t i = 0; i < rows.size(); ++i) (fold[i] == f ? test : train).push_back(rows[i]);
        ClassifierConfig fc = cfg;
        fc.seed = mix64(seed + f);
        const auto model = train_classifier(kind, train, fc);
        std::vector<int> preds, truth;
        for (const auto& r : test) {
            preds.push_back(predict(model, r.x).label);
            truth.push_back(r.label);
        }
        const auto cm = eval::confusion(preds, truth, report.pooled.classes);
        report.pooled += cm;
        report.folds.push_back(eval::metrics(cm));
    }
    eval::aggregate(report);
    return report;
}

inline nlohmann::json to_checkpoint(const ClassifierModel& m, std::size_t window, std::size_t stride) {
    auto j = nn::make_checkpoint("segclass");
    nlohmann::json meta{{"classifier", std::string(to_string(m.kind))},
                        {"classes", m.classes},
                        {"n_features", m.n_features},
                        {"window", window},
                        {"stride", stride},
                        {"trained", m.trained}};
    nlohmann::json trees = nlohmann::json::array();
    for (const auto& t : m.trees) {
        std::vector<int> feature, left, right;
        std::vector<double> threshold, dist;
        for (const auto& nd : t.nodes) {
            feature.push_back(nd.feature);
            left.push_back(nd.left);
            right.push_back(nd.right);
            threshold.push_back(nd.threshold);
            dist.insert(dist.end(), nd.dist.begin(), nd.dist.end());
        }
        trees.push_back({{"feature", feature}, {"threshold", threshold}, {"left", left}, {"right", right}, {"leaf_dist", dist}});
    }
    meta["trees"] = trees;
    if (m.kind == ClassifierKind::naive_bayes)
        meta["naive_bayes"] = {{"log_prior", m.nb.log_prior}, {"mean", nn::tensor_json(m.nb.mean)}, {"var", nn::tensor_json(m.nb.var)}};
    if (!m.linear.b.empty())
        meta["linear"] = {{"w", nn::tensor_json(m.linear.w)}, {"b", m.linear.b}, {"scaler", m.linear.scaler.to_json()}};
    j["meta"] = meta;
    return j;
}

struct SegclassCheckpoint {
    ClassifierModel model;
    std::size_t window = 16;
    std::size_t stride = 8;
};

inline SegclassCheckpoint classifier_from_checkpoint(const nlohmann::json& j) {
    nn::check_header(j, "segclass");
    const auto& meta = j.at("meta");
    SegclassCheckpoint out;
    auto& m = out.model;
    m.kind = kind_from_string(meta.at("classifier").get<std::string>());
    m.classes = meta.at("classes").get<std::vector<int>>();
    m.n_features = meta.at("n_features").get<std::size_t>();
    m.trained = meta.at("trained").get<bool>();
    out.window = meta.at("window").get<std::size_t>();
    out.stride = meta.at("stride").get<std::size_t>();
    for (const auto& tj : meta.at("trees")) {
        DecisionTree t;
        const auto feature = tj.at("feature").get<std::vector<int>>();
        const auto left = tj.at("left").get<std::vector<int>>();
        const auto right = tj.at("right").get<std::vector<int>>();
        const auto threshold = tj.at("threshold").get<std::vector<double>>();
        const auto dist = tj.at("leaf_dist").get<std::vector<double>>();
        std::size_t off = 0;
        for (std::size_t k = 0; k < feature.size(); ++k) {
            TreeNode nd{feature[k], threshold[k], left[k], right[k], {}};
            if (nd.feature < 0) {
                if (off + m.classes.size() > dist.size()) throw ParseError("segclass checkpoint: truncated leaf table");
                nd.dist.assign(dist.begin() + static_cast<long>(off), dist.begin() + static_cast<long>(off + m.classes.size()));
                off += m.classes.size();
            }
            t.nodes.push_back(std::move(nd));
        }
        m.trees.push_back(std::move(t));
    }
    if (meta.contains("naive_bayes")) {
        const auto& nb = meta.at("naive_bayes");
        m.nb.log_prior = nb.at("log_prior").get<std::vector<double>>();
        m.nb.mean = nn::tensor_from_json(nb.at("mean"));
        m.nb.var = nn::tensor_from_json(nb.at("var"));
    }
    if (meta.contains("linear")) {
        const auto& lj = meta.at("linear");
        m.linear.w = nn::tensor_from_json(lj.at("w"));
        m.linear.b = lj.at("b").get<std::vector<double>>();
        m.linear.scaler = ChannelScaler::from_json(lj.at("scaler"));
    }
    return out;
}

}  // namespace faultlab::seg
