#include <algorithm>
#include <cmath>
#include <map>

#include <gtest/gtest.h>

#include "faultlab/segclass.hpp"

using namespace faultlab;
using namespace faultlab::seg;

namespace {

std::vector<WindowFeatures> blobs(std::size_t per_class, std::uint64_t seed, double scale = 1.0) {
    Rng rng(seed);
    const double centers[3][2] = {{0, 0}, {10, 0}, {0, 10}};
    std::vector<WindowFeatures> rows;
    for (int c = 0; c < 3; ++c)
        for (std::size_t i = 0; i < per_class; ++i)
            rows.push_back({{scale * (centers[c][0] + 0.5 * normal(rng)), scale * (centers[c][1] + 0.5 * normal(rng))},
                            c + 1,
                            0});
    return rows;
}

sim::TimeSeriesDataset labelled(const std::vector<int>& labels) {
    sim::TimeSeriesDataset ds;
    ds.regime = sim::Regime::mixed;
    for (std::size_t t = 0; t < labels.size(); ++t) {
        sim::TelemetryRecord r;
        r.timestamp = static_cast<std::int64_t>(t);
        r.energy = static_cast<double>(t);
        r.cpu = 0.5;
        r.duration = 2.0 * static_cast<double>(t) + 1.0;
        r.fault_class = labels[t];
        r.anomaly = labels[t] != sim::kNoFault;
        ds.records.push_back(r);
    }
    return ds;
}

}  // namespace

TEST(WindowStats, HandComputedValues) {
    nn::Tensor2 raw = nn::Tensor2::from_rows({{1, 5, 0}, {2, 5, 0}, {3, 5, 0}, {6, 5, 4}});
    const auto f = window_stats(raw, 0, 4);
    ASSERT_EQ(f.size(), kNumFeatures);
    EXPECT_DOUBLE_EQ(f[0], 3.0);
    EXPECT_NEAR(f[1], std::sqrt(3.5), 1e-12);
    EXPECT_DOUBLE_EQ(f[2], 1.0);
    EXPECT_DOUBLE_EQ(f[3], 6.0);
    // slope of 1,2,3,6 against 0..3: cov 8 / 5
    EXPECT_NEAR(f[4], 1.6, 1e-12);
    EXPECT_DOUBLE_EQ(f[5], 5.0);
    EXPECT_DOUBLE_EQ(f[6], 0.0);
    EXPECT_DOUBLE_EQ(f[9], 0.0);
    EXPECT_NEAR(f[14], 1.2, 1e-12);
}

TEST(Windowize, MajorityLabelTiesGoLow) {
    const auto ds = labelled({3, 3, 5, 5, 5, 5, 2, 2});
    const auto rows = windowize(ds, 4, 2);
    ASSERT_EQ(rows.size(), 3u);
    EXPECT_EQ(rows[0].label, 3);  // 3,3,5,5 tie
    EXPECT_EQ(rows[1].label, 5);
    EXPECT_EQ(rows[2].label, 2);  // 5,5,2,2 tie
    EXPECT_EQ(rows[2].start, 4u);
    EXPECT_NEAR(rows[0].x[4], 1.0, 1e-12);
    EXPECT_NEAR(rows[0].x[14], 2.0, 1e-12);
}

TEST(Windowize, RejectsWindowLongerThanSeries) {
    EXPECT_THROW(windowize(labelled({1, 1, 1}), 4, 1), InputError);
    EXPECT_THROW(windowize(labelled({1, 1, 1}), 2, 0), Error);
}

TEST(Classifier, SeparableDataIsLearnedByEveryKind) {
    const auto train = blobs(40, 1);
    const auto test = blobs(20, 2);
    for (auto kind : kAllKinds) {
        const auto m = train_classifier(kind, train, {.seed = 4});
        std::size_t correct = 0;
        for (const auto& r : test) correct += predict(m, r.x).label == r.label;
        EXPECT_EQ(correct, test.size()) << to_string(kind);
    }
}

TEST(Classifier, NaiveBayesBoundaryAtMidpoint) {
    std::vector<WindowFeatures> rows;
    Rng rng(9);
    for (int i = 0; i < 2000; ++i) {
        rows.push_back({{-3.0 + normal(rng)}, 1, 0});
        rows.push_back({{3.0 + normal(rng)}, 2, 0});
    }
    const auto m = train_classifier(ClassifierKind::naive_bayes, rows);
    double boundary = std::nan("");
    int prev = predict(m, std::vector<double>{-3.0}).label;
    for (double x = -3.0; x <= 3.0; x += 0.001) {
        const int l = predict(m, std::vector<double>{x}).label;
        if (l != prev) {
            boundary = x;
            break;
        }
    }
    EXPECT_EQ(prev, 1);
    EXPECT_NEAR(boundary, 0.0, 0.2);
}

TEST(Classifier, SingleFullTreeForestEqualsDecisionTree) {
    const auto rows = blobs(30, 5);
    ClassifierConfig cfg{.n_trees = 1, .max_features = 2, .bootstrap = false, .seed = 77};
    const auto rf = train_classifier(ClassifierKind::random_forest, rows, cfg);
    const auto dt = train_classifier(ClassifierKind::decision_tree, rows, cfg);
    ASSERT_EQ(rf.trees.size(), 1u);
    EXPECT_EQ(rf.trees[0], dt.trees[0]);
    for (const auto& r : blobs(10, 6)) EXPECT_EQ(predict(rf, r.x).label, predict(dt, r.x).label);
}

TEST(Classifier, ZeroWeightLinearPredictsLowestClass) {
    ClassifierModel m;
    m.kind = ClassifierKind::logistic_regression;
    for (int c = 1; c <= 11; ++c) m.classes.push_back(c);
    m.n_features = kNumFeatures;
    m.trained = true;
    m.linear.w = nn::Tensor2(11, kNumFeatures);
    m.linear.b.assign(11, 0.0);
    m.linear.scaler = {std::vector<double>(kNumFeatures, 0.0), std::vector<double>(kNumFeatures, 1.0)};
    EXPECT_EQ(predict(m, std::vector<double>(kNumFeatures, 3.0)).label, 1);
    const auto p = label_probabilities(m, std::vector<double>(kNumFeatures, 3.0));
    EXPECT_NEAR(p[0], 1.0 / 11.0, 1e-12);
    EXPECT_EQ(p[11], 0.0);
}

TEST(Classifier, TreeIsScaleInvariant) {
    const auto rows = blobs(30, 11);
    const auto scaled = blobs(30, 11, 10.0);
    const auto a = train_classifier(ClassifierKind::decision_tree, rows);
    const auto b = train_classifier(ClassifierKind::decision_tree, scaled);
    const auto probe = blobs(15, 12);
    const auto probe10 = blobs(15, 12, 10.0);
    for (std::size_t i = 0; i < probe.size(); ++i) EXPECT_EQ(predict(a, probe[i].x).label, predict(b, probe10[i].x).label);
}

TEST(Classifier, SingleClassAndBadInputsRejected) {
    std::vector<WindowFeatures> one{{{1.0}, 2, 0}, {{2.0}, 2, 0}};
    EXPECT_THROW(train_classifier(ClassifierKind::decision_tree, one), InputError);
    EXPECT_THROW(train_classifier(ClassifierKind::decision_tree, {}), InputError);
    std::vector<WindowFeatures> bad{{{1.0}, 1, 0}, {{std::nan("")}, 2, 0}};
    EXPECT_THROW(train_classifier(ClassifierKind::naive_bayes, bad), InputError);
    const auto m = train_classifier(ClassifierKind::decision_tree, blobs(5, 1));
    EXPECT_THROW(predict(m, std::vector<double>{1.0}), ShapeError);
    EXPECT_THROW(predict(ClassifierModel{}, std::vector<double>{1.0, 2.0}), InputError);
}

TEST(Classifier, TrainingIsDeterministic) {
    const auto rows = blobs(20, 3);
    for (auto kind : kAllKinds) EXPECT_EQ(train_classifier(kind, rows, {.seed = 8}), train_classifier(kind, rows, {.seed = 8}));
}

TEST(CrossValidation, StratifiedFoldSizesDifferByAtMostOne) {
    std::vector<WindowFeatures> rows;
    const int per_class[4] = {13, 7, 22, 3};
    for (int c = 0; c < 4; ++c)
        for (int i = 0; i < per_class[c]; ++i) rows.push_back({{0.0}, c + 1, 0});
    const auto fold = stratified_folds(rows, 10, 21);
    std::vector<std::size_t> sizes(10, 0);
    for (auto f : fold) ++sizes[f];
    EXPECT_LE(*std::max_element(sizes.begin(), sizes.end()) - *std::min_element(sizes.begin(), sizes.end()), 1u);
    for (int c = 1; c <= 4; ++c) {
        std::vector<std::size_t> per(10, 0);
        for (std::size_t i = 0; i < rows.size(); ++i)
            if (rows[i].label == c) ++per[fold[i]];
        EXPECT_LE(*std::max_element(per.begin(), per.end()) - *std::min_element(per.begin(), per.end()), 1u);
    }
}

TEST(CrossValidation, PooledMatrixMatchesBruteForceScoring) {
    const auto rows = blobs(25, 17);
    const auto report = crossval_10fold(rows, ClassifierKind::naive_bayes, {}, 3);
    EXPECT_EQ(report.folds.size(), 10u);
    EXPECT_EQ(report.pooled.total(), rows.size());
    // replay the folds independently
    const auto fold = stratified_folds(rows, 10, 3);
    eval::ConfusionMatrix replay(3);
    for (std::size_t f = 0; f < 10; ++f) {
        std::vector<WindowFeatures> train;
        for (std::size_t i = 0; i < rows.size(); ++i)
            if (fold[i] != f) train.push_back(rows[i]);
        const auto m = train_classifier(ClassifierKind::naive_bayes, train);
        for (std::size_t i = 0; i < rows.size(); ++i)
            if (fold[i] == f) {
                // brute force: evaluate every class score and take the first maximum
                const auto s = predict(m, rows[i].x).scores;
                std::size_t best = 0;
                for (std::size_t c = 0; c < s.size(); ++c)
                    if (s[c] > s[best]) best = c;
                ++replay.at(rows[i].label, m.classes[best]);
            }
    }
    EXPECT_EQ(replay.counts, report.pooled.counts);
    EXPECT_NEAR(report.mean.balanced_accuracy, 1.0, 1e-12);
}

TEST(CrossValidation, TooFewRowsRejected) {
    EXPECT_THROW(crossval_10fold(blobs(2, 1), ClassifierKind::decision_tree, {}, 1), InputError);
}

TEST(Checkpoint, RoundTripIsExactForEveryKind) {
    const auto rows = blobs(15, 4);
    for (auto kind : kAllKinds) {
        const auto m = train_classifier(kind, rows, {.n_trees = 3, .seed = 2});
        const auto text = nn::dump_checkpoint(to_checkpoint(m, 16, 8));
        const auto back = classifier_from_checkpoint(nlohmann::json::parse(text));
        EXPECT_EQ(back.model, m) << to_string(kind);
        EXPECT_EQ(back.window, 16u);
        EXPECT_EQ(back.stride, 8u);
    }
}

TEST(Checkpoint, WrongKindRejected) {
    EXPECT_THROW(classifier_from_checkpoint(nn::make_checkpoint("changepoint-autoencoder")), Error);
}
