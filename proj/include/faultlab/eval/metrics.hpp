#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "faultlab/error.hpp"
#include "faultlab/log.hpp"
#include "faultlab/random.hpp"

namespace faultlab::eval {

/// Counts indexed [truth][prediction] over labels 1..classes.
struct ConfusionMatrix {
    std::size_t classes = 0;
    std::vector<std::uint64_t> counts;

    ConfusionMatrix() = default;
    explicit ConfusionMatrix(std::size_t c) : classes(c), counts(c * c, 0) {}

    std::uint64_t& at(int truth, int pred) { return counts[idx(truth, pred)]; }
    std::uint64_t at(int truth, int pred) const { return counts[idx(truth, pred)]; }

    std::uint64_t total() const {
        std::uint64_t s = 0;
        for (auto v : counts) s += v;
        return s;
    }

    ConfusionMatrix& operator+=(const ConfusionMatrix& o) {
        require_shape(o.classes == classes, "ConfusionMatrix: class count mismatch");
        for (std::size_t k = 0; k < counts.size(); ++k) counts[k] += o.counts[k];
        return *this;
    }

    friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

private:
    std::size_t idx(int truth, int pred) const {
        return static_cast<std::size_t>(truth - 1) * classes + static_cast<std::size_t>(pred - 1);
    }
};

inline ConfusionMatrix confusion(std::span<const int> preds, std::span<const int> truth, std::size_t classes) {
    require_shape(preds.size() == truth.size(), "confusion: predictions and truth differ in length");
    ConfusionMatrix cm(classes);
    const int c = static_cast<int>(classes);
    for (std::size_t t = 0; t < preds.size(); ++t) {
        if (truth[t] < 1 || truth[t] > c || preds[t] < 1 || preds[t] > c)
            throw InputError("confusion: label outside 1.." + std::to_string(classes) + " at position " + std::to_string(t));
        ++cm.at(truth[t], preds[t]);
    }
    return cm;
}

/// Macro one-vs-rest averages over the classes present in the truth.
/// `balanced_accuracy` is the mean per-class recall; `accuracy` is the plain
/// fraction correct.
struct MetricSet {
    double balanced_accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double specificity = 0.0;
    double f1 = 0.0;
    double accuracy = 0.0;
    std::size_t undefined_terms = 0;  // empty denominators counted as 0

    friend bool operator==(const MetricSet&, const MetricSet&) = default;
};

/// The five reported metrics, in table column order.
inline constexpr std::array<const char*, 5> kMetricColumns{"Accuracy", "Precision", "Recall", "Specificity", "F1"};

inline std::array<double, 5> columns(const MetricSet& m) {
    return {m.balanced_accuracy, m.precision, m.recall, m.specificity, m.f1};
}

inline MetricSet metrics(const ConfusionMatrix& cm) {
    const std::uint64_t total = cm.total();
    if (cm.classes == 0 || total == 0) throw InputError("metrics: empty confusion matrix");
    const int C = static_cast<int>(cm.classes);
    std::vector<std::uint64_t> row(cm.classes, 0), col(cm.classes, 0);
    std::uint64_t diag = 0;
    for (int i = 1; i <= C; ++i)
        for (int j = 1; j <= C; ++j) {
            row[static_cast<std::size_t>(i - 1)] += cm.at(i, j);
            col[static_cast<std::size_t>(j - 1)] += cm.at(i, j);
            if (i == j) diag += cm.at(i, j);
        }

    MetricSet m;
    std::size_t present = 0;
    auto ratio = [&](double num, double den) {
        if (den > 0) return num / den;
        ++m.undefined_terms;
        return 0.0;
    };
    for (int c = 1; c <= C; ++c) {
        const auto k = static_cast<std::size_t>(c - 1);
        if (row[k] == 0) continue;
        ++present;
        const double tp = static_cast<double>(cm.at(c, c));
        const double fn = static_cast<double>(row[k]) - tp;
        const double fp = static_cast<double>(col[k]) - tp;
        const double tn = static_cast<double>(total) - tp - fn - fp;
        const double p = ratio(tp, tp + fp);
        const double r = ratio(tp, tp + fn);
        const double s = ratio(tn, tn + fp);
        const double f = ratio(2.0 * p * r, p + r);
        m.precision += p;
        m.recall += r;
        m.specificity += s;
        m.f1 += f;
    }
    const double n = static_cast<double>(present);
    m.precision /= n;
    m.recall /= n;
    m.specificity /= n;
    m.f1 /= n;
    m.balanced_accuracy = m.recall;
    m.accuracy = static_cast<double>(diag) / static_cast<double>(total);
    if (m.undefined_terms)
        log::warn("metrics: " + std::to_string(m.undefined_terms) + " undefined per-class term(s) counted as 0");
    return m;
}

struct EvalReport {
    std::string variant;
    std::vector<MetricSet> folds;
    MetricSet mean;
    MetricSet std;  // population standard deviation across folds
    ConfusionMatrix pooled;
    std::size_t skipped_folds = 0;
};

/// Fills mean and std from the per-fold metric sets.
inline void aggregate(EvalReport& r) {
    require(!r.folds.empty(), "aggregate: no folds");
    const double n = static_cast<double>(r.folds.size());
    auto fields = [](MetricSet& m) {
        return std::array<double*, 6>{&m.balanced_accuracy, &m.precision, &m.recall, &m.specificity, &m.f1, &m.accuracy};
    };
    r.mean = {};
    r.std = {};
    auto mean_f = fields(r.mean);
    auto std_f = fields(r.std);
    for (auto f : r.folds) {
        auto ff = fields(f);
        for (std::size_t k = 0; k < ff.size(); ++k) *mean_f[k] += *ff[k] / n;
    }
    for (auto f : r.folds) {
        auto ff = fields(f);
        for (std::size_t k = 0; k < ff.size(); ++k) *std_f[k] += (*ff[k] - *mean_f[k]) * (*ff[k] - *mean_f[k]) / n;
    }
    for (auto p : std_f) *p = std::sqrt(*p);
}

/// One contiguous training block from the first half and one test block from
/// the second half, per fold.
struct FoldSpan {
    std::size_t train_start = 0;
    std::size_t train_len = 0;
    std::size_t test_start = 0;
    std::size_t test_len = 0;

    friend bool operator==(const FoldSpan&, const FoldSpan&) = default;
};

struct SeqCvPlan {
    std::size_t total = 0;
    std::uint64_t seed = 0;
    std::vector<FoldSpan> folds;

    friend bool operator==(const SeqCvPlan&, const SeqCvPlan&) = default;
};

inline constexpr double kBlockMinFraction = 0.5;
inline constexpr double kBlockMaxFraction = 0.8;

inline SeqCvPlan seq_cv_plan(std::size_t total, std::size_t folds, std::uint64_t seed) {
    if (total < 20) throw InputError("seq_cv_plan: need at least 20 samples, got " + std::to_string(total));
    require(folds >= 1, "seq_cv_plan: need at least one fold");
    const std::size_t first = total / 2;
    const std::size_t second = total - first;
    auto bounds = [](std::size_t half) {
        const auto lo = static_cast<std::size_t>(std::ceil(kBlockMinFraction * static_cast<double>(half)));
        const auto hi = static_cast<std::size_t>(std::floor(kBlockMaxFraction * static_cast<double>(half)));
        return std::pair{lo, hi};
    };
    const auto [tr_lo, tr_hi] = bounds(first);
    const auto [te_lo, te_hi] = bounds(second);
    if (tr_lo > tr_hi || te_lo > te_hi || tr_lo == 0) throw InputError("seq_cv_plan: series too short for block limits");

    SeqCvPlan plan{total, seed, {}};
    Rng rng(mix64(seed ^ 0xc5ULL));
    for (std::size_t f = 0; f < folds; ++f) {
        FoldSpan s;
        s.train_len = static_cast<std::size_t>(uniform_int(rng, static_cast<std::int64_t>(tr_lo), static_cast<std::int64_t>(tr_hi)));
        s.train_start = static_cast<std::size_t>(uniform_int(rng, 0, static_cast<std::int64_t>(first - s.train_len)));
        s.test_len = static_cast<std::size_t>(uniform_int(rng, static_cast<std::int64_t>(te_lo), static_cast<std::int64_t>(te_hi)));
        s.test_start = first + static_cast<std::size_t>(uniform_int(rng, 0, static_cast<std::int64_t>(second - s.test_len)));
        plan.folds.push_back(s);
    }
    return plan;
}

enum class ReportFormat { csv, markdown };

/// "mean±std" in percent, three significant digits each.
inline std::string format_cell(double mean, double sd) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3g\xC2\xB1%.3g", 100.0 * mean, 100.0 * sd);
    return buf;
}

inline std::string render_report(const std::vector<EvalReport>& reports, ReportFormat fmt) {
    std::ostringstream out;
    if (fmt == ReportFormat::markdown) {
        out << "| Variant |";
        for (auto c : kMetricColumns) out << ' ' << c << " |";
        out << "\n|---|";
        for (std::size_t k = 0; k < kMetricColumns.size(); ++k) out << "---|";
        out << '\n';
        for (const auto& r : reports) {
            out << "| " << r.variant << " |";
            const auto m = columns(r.mean), s = columns(r.std);
            for (std::size_t k = 0; k < m.size(); ++k) out << ' ' << format_cell(m[k], s[k]) << " |";
            out << '\n';
        }
    } else {
        out << "Variant";
        for (auto c : kMetricColumns) out << ',' << c;
        out << '\n';
        for (const auto& r : reports) {
            out << r.variant;
            const auto m = columns(r.mean), s = columns(r.std);
            for (std::size_t k = 0; k < m.size(); ++k) out << ',' << format_cell(m[k], s[k]);
            out << '\n';
        }
    }
    return out.str();
}

struct ReportRow {
    std::string variant;
    std::array<std::string, 5> cells;
    friend bool operator==(const ReportRow&, const ReportRow&) = default;
};

/// Parses a CSV report produced by render_report.
inline std::vector<ReportRow> read_report_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw ParseError("report: missing header", 1);
    std::string expected = "Variant";
    for (auto c : kMetricColumns) expected += std::string(",") + c;
    if (line != expected) throw ParseError("report: unexpected header '" + line + "'", 1);
    std::vector<ReportRow> rows;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::istringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) f.push_back(cell);
        if (f.size() != 6) throw ParseError("report: expected 6 fields", lineno);
        ReportRow r{f[0], {}};
        std::copy(f.begin() + 1, f.end(), r.cells.begin());
        rows.push_back(r);
    }
    return rows;
}

inline std::string render_rows_csv(const std::vector<ReportRow>& rows) {
    std::ostringstream out;
    out << "Variant";
    for (auto c : kMetricColumns) out << ',' << c;
    out << '\n';
    for (const auto& r : rows) {
        out << r.variant;
        for (const auto& c : r.cells) out << ',' << c;
        out << '\n';
    }
    return out.str();
}

}  // namespace faultlab::eval
