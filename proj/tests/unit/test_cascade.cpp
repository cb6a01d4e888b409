#include <cmath>
#include <filesystem>
#include <numeric>

#include <gtest/gtest.h>

#include "faultlab/cascade.hpp"

using namespace faultlab;
using namespace faultlab::cascade;

namespace {

sim::TimeSeriesDataset make(sim::Regime r, std::size_t len, std::uint64_t seed, double rate = 0.01) {
    sim::SimConfig c;
    c.seed = seed;
    c.length = len;
    c.fault_rate = rate;
    return sim::generate_dataset(r, c);
}

CascadeConfig small_config() {
    CascadeConfig c;
    c.seed = 3;
    c.cpd.train.max_epochs = 4;
    c.cpd.max_train_windows = 300;
    c.seg.n_trees = 10;
    c.task2.max_epochs = 6;
    c.task3.max_epochs = 6;
    return c;
}

struct SmallRun {
    sim::TimeSeriesDataset normal, anomaly, mixed, test;
    SmtcnnModels full;
};

const SmallRun& small_run() {
    static const SmallRun run = [] {
        SmallRun r;
        r.normal = make(sim::Regime::normal_only, 3000, 21);
        r.anomaly = make(sim::Regime::anomaly_only, 8432, 22);
        r.mixed = make(sim::Regime::mixed, 4000, 23, 0.03);
        r.test = make(sim::Regime::mixed, 1500, 24, 0.03);
        r.full = smtcnn_train_full(r.mixed, r.normal, r.anomaly, small_config());
        return r;
    }();
    return run;
}

Tensor2 noise_inputs(std::size_t T, std::size_t cols, std::uint64_t seed) {
    Rng rng(seed);
    Tensor2 x(T, cols);
    for (double& v : x.data) v = normal(rng);
    return x;
}

double direct_sequence_loss(const std::vector<Tensor2>& probs, const std::vector<std::vector<int>>& ys) {
    double s = 0.0;
    for (std::size_t n = 0; n < probs.size(); ++n)
        for (std::size_t t = 0; t < ys[n].size(); ++t) s -= std::log(probs[n](t, static_cast<std::size_t>(ys[n][t] - 1)));
    return s / static_cast<double>(probs.size());
}

}  // namespace

TEST(Task1, NoChangePointsGivesEmptyMask) {
    cpd::AutoencoderModel m(3, 8, 2, 4);
    m.threshold = {0.0, 0.0, 3.0, 1.0};
    std::vector<double> errors(40 - 8 + 1, 0.5);
    const auto r = task1_from_errors(errors, 40, m, {});
    EXPECT_TRUE(r.segments.empty());
    EXPECT_EQ(std::accumulate(r.mask.begin(), r.mask.end(), 0.0), 0.0);
    EXPECT_EQ(r.mask.size(), 40u);
}

TEST(Task1, MaskMatchesSegments) {
    const auto mask = cpd::segments_to_mask({{10, 20}}, 30);
    for (std::size_t t = 0; t < 30; ++t) EXPECT_EQ(mask[t], (t >= 10 && t < 20) ? 1.0 : 0.0) << t;

    cpd::AutoencoderModel m(3, 4, 2, 4);
    m.threshold = {0.0, 0.0, 3.0, 1.0};
    std::vector<double> errors(100 - 4 + 1, 0.0);
    for (std::size_t i = 20; i < 30; ++i) errors[i] = 5.0;
    for (std::size_t i = 60; i < 62; ++i) errors[i] = 5.0;
    const auto r = task1_from_errors(errors, 100, m, {.min_gap = 2, .min_len = 1});
    std::size_t total = 0;
    for (const auto& s : r.segments) total += s.end - s.start;
    EXPECT_EQ(r.segments.size(), 2u);
    EXPECT_EQ(std::accumulate(r.mask.begin(), r.mask.end(), 0.0), static_cast<double>(total));
}

TEST(Task1, ErrorCountMustMatchSeries) {
    cpd::AutoencoderModel m(3, 8, 2, 4);
    std::vector<double> errors(10, 0.0);
    EXPECT_THROW(task1_from_errors(errors, 40, m, {}), ShapeError);
}

TEST(ChunkRegions, CutsEachRegion) {
    const auto c = chunk_regions({{0, 5}, {10, 12}}, 2);
    ASSERT_EQ(c.size(), 4u);
    EXPECT_EQ(c[2].start, 4u);
    EXPECT_EQ(c[2].end, 5u);
    EXPECT_EQ(c[3].start, 10u);
}

TEST(Task2, LearnsAnomaliesInsidePerfectSegments) {
    const auto ds = make(sim::Regime::mixed, 20000, 31, 0.05);
    const auto raw = feature_matrix(ds);
    const auto x = ChannelScaler::fit(raw).apply(raw);
    const auto y = anomaly_labels(ds);
    std::vector<Segment> train_regions, test_regions;
    for (const auto& w : sim::fault_windows(ds)) {
        const Segment s{w.start >= 16 ? w.start - 16 : 0, std::min(ds.size(), w.start + w.length + 16)};
        (s.end <= 14000 ? train_regions : test_regions).push_back(s);
    }
    ASSERT_FALSE(test_regions.empty());
    CascadeConfig cfg;
    cfg.seed = 1;
    cfg.task2.adam.alpha = 3e-3;
    const auto fit = train_task2(x, y, train_regions, cfg);
    const auto o2 = task2_score(fit.model, x, test_regions, cfg.chunk_len);
    std::size_t n = 0, ok = 0;
    for (const auto& s : test_regions)
        for (std::size_t t = s.start; t < s.end; ++t) {
            ++n;
            ok += (o2[t] > 0.5) == (y[t] == kAnomalyLabel);
        }
    EXPECT_GE(static_cast<double>(ok) / static_cast<double>(n), 0.95);
}

TEST(Task2, DeterministicPerSeed) {
    const auto x = noise_inputs(200, 3, 4);
    std::vector<int> y(200, kNormalLabel);
    for (std::size_t t = 50; t < 90; ++t) y[t] = kAnomalyLabel;
    CascadeConfig cfg;
    cfg.seed = 9;
    cfg.task2.max_epochs = 5;
    const auto a = train_task2(x, y, {{30, 120}}, cfg);
    const auto b = train_task2(x, y, {{30, 120}}, cfg);
    EXPECT_EQ(a.model, b.model);
    EXPECT_EQ(a.history.train_loss, b.history.train_loss);
}

TEST(Task2, NoSegmentsCannotTrain) {
    const auto x = noise_inputs(50, 3, 1);
    std::vector<int> y(50, kNormalLabel);
    EXPECT_THROW(train_task2(x, y, {}, CascadeConfig{}), TrainingError);
}

TEST(Task2, ScoresAreProbabilitiesAndZeroOutsideSegments) {
    StackedLstmClassifier m(3, 4, 2);
    Rng rng(2);
    m.init(rng);
    const auto x = noise_inputs(80, 3, 5);
    const auto o = task2_score(m, x, {{10, 30}}, 16);
    for (std::size_t t = 0; t < 80; ++t) {
        if (t < 10 || t >= 30) { EXPECT_EQ(o[t], 0.0); }
        EXPECT_GE(o[t], 0.0);
        EXPECT_LE(o[t], 1.0);
    }
    const auto none = task2_score(m, x, {}, 16);
    EXPECT_EQ(std::accumulate(none.begin(), none.end(), 0.0), 0.0);

    // per-step distributions sum to 1
    const auto p = nn::stacked_forward(m, x);
    for (std::size_t t = 0; t < p.rows; ++t) EXPECT_NEAR(p(t, 0) + p(t, 1), 1.0, 1e-12);
}

TEST(Task2, EqualLogitsGiveOneHalf) {
    StackedLstmClassifier m(3, 4, 2);
    Rng rng(2);
    m.init(rng);
    std::fill(m.head.w.data.begin(), m.head.w.data.end(), 0.0);
    std::fill(m.head.b.begin(), m.head.b.end(), 0.0);
    const auto o = task2_score(m, noise_inputs(20, 3, 6), {{0, 20}}, 8);
    for (double v : o) EXPECT_EQ(v, 0.5);
}

TEST(Task3, AllNormalSeriesConvergesToNoFault) {
    const auto inputs = noise_inputs(256, kTask3Inputs, 7);
    Tensor2 z = inputs;
    for (std::size_t t = 0; t < z.rows; ++t) z(t, 3) = z(t, 4) = 0.0;
    std::vector<int> y(256, sim::kNoFault);
    CascadeConfig cfg;
    cfg.seed = 2;
    cfg.task3.max_epochs = 300;
    cfg.task3.adam.alpha = 1e-2;
    const auto fit = train_task3(z, y, nullptr, cfg);
    EXPECT_LT(fit.history.train_loss.back(), 0.05);
    const auto p = task3_forward(fit.model, z, nullptr, cfg.chunk_len);
    for (std::size_t t = 0; t < p.rows; ++t) EXPECT_EQ(argmax_class(p.row(t)), sim::kNoFault);
}

TEST(Task3, BatchLossEqualsDirectSum) {
    const auto inputs = noise_inputs(100, kTask3Inputs, 8);
    Rng rng(4);
    std::vector<int> y(100);
    for (int& v : y) v = static_cast<int>(uniform_int(rng, 1, 12));
    const auto offset = noise_inputs(100, kClasses, 9);
    StackedLstmClassifier m(kTask3Inputs, 6, kClasses);
    m.init(rng);
    auto obj = detail::make_objective(inputs, y, &offset, chunk_regions({{0, 100}}, 32), 0.0);
    ASSERT_EQ(obj.num_train(), 4u);
    StackedLstmClassifier g(kTask3Inputs, 6, kClasses);
    const std::vector<std::size_t> idx{3, 0, 2};
    const double loss = obj.batch_loss(m, idx, g);

    std::vector<Tensor2> probs;
    std::vector<std::vector<int>> ys;
    for (auto k : idx) {
        const auto& s = obj.train_chunks[k];
        const auto off = rows_of(offset, s);
        probs.push_back(nn::stacked_forward(m, rows_of(inputs, s), &off));
        ys.emplace_back(y.begin() + static_cast<long>(s.start), y.begin() + static_cast<long>(s.end));
    }
    EXPECT_NEAR(loss, direct_sequence_loss(probs, ys), 1e-12);
}

TEST(Task3, DeterministicAndRejectsMisalignedLabels) {
    const auto inputs = noise_inputs(150, kTask3Inputs, 10);
    std::vector<int> y(150, sim::kNoFault);
    for (std::size_t t = 40; t < 70; ++t) y[t] = 3;
    CascadeConfig cfg;
    cfg.seed = 5;
    cfg.task3.max_epochs = 4;
    const auto a = train_task3(inputs, y, nullptr, cfg);
    const auto b = train_task3(inputs, y, nullptr, cfg);
    EXPECT_EQ(a.model, b.model);
    EXPECT_EQ(a.history.train_loss, b.history.train_loss);

    y.pop_back();
    EXPECT_THROW(train_task3(inputs, y, nullptr, cfg), ShapeError);
    EXPECT_THROW(build_task3_inputs({noise_inputs(5, 3, 1), std::vector<double>(5, 0.0), std::vector<double>(4, 0.0)}),
                 ShapeError);
}

TEST(Task3, ZeroHeadReproducesPrior) {
    const auto inputs = noise_inputs(40, kTask3Inputs, 11);
    Tensor2 sp(40, kClasses);
    for (std::size_t t = 0; t < 40; ++t) sp(t, t % 11) = 1.0;
    std::vector<double> o1(40, 1.0), o2(40, 0.8);
    const auto off = prior_offset(sp, o1, o2, 0.5, 1e-4);
    StackedLstmClassifier m(kTask3Inputs, 4, kClasses);
    Rng rng(1);
    m.init(rng);
    std::fill(m.head.w.data.begin(), m.head.w.data.end(), 0.0);
    std::fill(m.head.b.begin(), m.head.b.end(), 0.0);
    const auto p = task3_forward(m, inputs, &off, 16);
    for (std::size_t t = 0; t < 40; ++t) EXPECT_EQ(argmax_class(p.row(t)), static_cast<int>(t % 11) + 1);
}

TEST(Argmax, TiesPreferNoFaultThenLowerClass) {
    std::vector<double> p(12, 1.0 / 12.0);
    EXPECT_EQ(argmax_class(p), 12);
    std::vector<double> q(12, 0.0);
    q[4] = q[7] = 0.5;
    EXPECT_EQ(argmax_class(q), 5);
}

TEST(PriorOffset, NoFaultTakesAllMassOutsideSegments) {
    Tensor2 sp(2, kClasses);
    sp(0, 2) = sp(1, 2) = 1.0;
    const auto off = prior_offset(sp, std::vector<double>{0.0, 1.0}, std::vector<double>{0.0, 1.0}, 0.5, 1e-4);
    EXPECT_EQ(off(0, 11), 0.0);
    EXPECT_NEAR(off(0, 2), std::log(1e-4), 1e-15);
    EXPECT_NEAR(off(1, 2), 0.0, 1e-15);
    EXPECT_NEAR(off(1, 11), std::log(1e-4), 1e-15);
}

TEST(Infer, FlagsMatchClassesAndDistributionsSumToOne) {
    const auto& r = small_run();
    const auto p = smtcnn_infer(r.full, r.test);
    ASSERT_EQ(p.classes.size(), r.test.size());
    for (std::size_t t = 0; t < p.classes.size(); ++t) {
        EXPECT_EQ(p.anomaly[t], p.classes[t] != sim::kNoFault);
        const auto row = p.probs.row(t);
        EXPECT_NEAR(std::accumulate(row.begin(), row.end(), 0.0), 1.0, 1e-9);
        if (p.o_t1[t] == 0.0) { EXPECT_EQ(p.o_t2[t], 0.0); }
    }
}

TEST(Infer, PureNormalSeriesIsNoFault) {
    const auto& r = small_run();
    const auto p = smtcnn_infer(r.full, make(sim::Regime::normal_only, 1500, 41));
    const auto n12 = std::count(p.classes.begin(), p.classes.end(), sim::kNoFault);
    EXPECT_GE(static_cast<double>(n12) / static_cast<double>(p.classes.size()), 0.99);
}

TEST(Infer, ZeroedMasksStillGiveDistributions) {
    const auto& r = small_run();
    const auto raw = feature_matrix(r.test);
    const auto x = r.full.scaler.apply(raw);
    std::vector<double> zeros(raw.rows, 0.0);
    const auto inputs = build_task3_inputs({x, zeros, zeros});
    const auto sp = segclass_step_probs(*r.full.seg, raw, r.full.config.seg_window);
    const auto off = prior_offset(sp, zeros, zeros, r.full.config.prior_segment_weight, r.full.config.prior_floor);
    const auto p = task3_forward(*r.full.task3, inputs, &off, r.full.config.chunk_len);
    for (std::size_t t = 0; t < p.rows; ++t) {
        const auto row = p.row(t);
        EXPECT_NEAR(std::accumulate(row.begin(), row.end(), 0.0), 1.0, 1e-9);
    }
}

TEST(Infer, SharedLogitShiftLeavesPredictionsUnchanged) {
    const auto& r = small_run();
    const auto raw = feature_matrix(r.test);
    const auto base = smtcnn_infer(r.full, raw);
    const auto inputs = build_task3_inputs({r.full.scaler.apply(raw), base.o_t1, base.o_t2});
    const auto sp = segclass_step_probs(*r.full.seg, raw, r.full.config.seg_window);
    auto off = prior_offset(sp, base.o_t1, base.o_t2, r.full.config.prior_segment_weight, r.full.config.prior_floor);
    for (double& v : off.data) v += 7.25;
    const auto p = task3_forward(*r.full.task3, inputs, &off, r.full.config.chunk_len);
    for (std::size_t t = 0; t < p.rows; ++t) {
        EXPECT_EQ(argmax_class(p.row(t)), base.classes[t]);
        for (std::size_t c = 0; c < kClasses; ++c) EXPECT_NEAR(p(t, c), base.probs(t, c), 1e-12);
    }
}

TEST(Infer, NoSegmentationVariantOnlyChangesTheMaskColumn) {
    const auto& r = small_run();
    auto b2 = r.full;
    b2.variant = Variant::b2_no_cpd;
    b2.config = config_for(Variant::b2_no_cpd, b2.config);
    const auto raw = feature_matrix(r.test);
    const auto fe_full = detail::front_end(r.full, raw, std::nullopt);
    const auto fe_b2 = detail::front_end(b2, raw, std::nullopt);
    const std::vector<double> o2(raw.rows, 0.25);
    const auto a = build_task3_inputs({fe_full.x, fe_full.t1.mask, o2});
    const auto b = build_task3_inputs({fe_b2.x, fe_b2.t1.mask, o2});
    for (std::size_t t = 0; t < a.rows; ++t) {
        for (std::size_t c = 0; c < kTask3Inputs; ++c)
            if (c != kNumChannels) { EXPECT_EQ(a(t, c), b(t, c)); }
        EXPECT_EQ(b(t, kNumChannels), 1.0);
    }
    ASSERT_EQ(fe_b2.task2_regions.size(), 1u);
    EXPECT_EQ(fe_b2.task2_regions[0].end, raw.rows);
}

TEST(Infer, MissingStageIsReported) {
    auto m = small_run().full;
    m.task3.reset();
    EXPECT_THROW(smtcnn_infer(m, small_run().test), InputError);
    m = small_run().full;
    m.cpd.reset();
    EXPECT_THROW(smtcnn_infer(m, small_run().test), InputError);
}

TEST(Pipeline, CheckpointsRoundTrip) {
    const auto& r = small_run();
    const auto dir = std::filesystem::temp_directory_path() / "faultlab_cascade_roundtrip";
    std::filesystem::remove_all(dir);
    save_models(r.full, dir);
    const auto back = load_models(dir);
    EXPECT_EQ(*back.task2, *r.full.task2);
    EXPECT_EQ(*back.task3, *r.full.task3);
    EXPECT_EQ(back.seg->trees.size(), r.full.seg->trees.size());
    const auto a = smtcnn_infer(r.full, r.test);
    const auto b = smtcnn_infer(back, r.test);
    EXPECT_EQ(a.classes, b.classes);

    std::filesystem::remove(dir / kTask2File);
    try {
        load_models(dir);
        FAIL() << "expected a missing-file error";
    } catch (const InputError& e) {
        EXPECT_NE(std::string(e.what()).find(kTask2File), std::string::npos);
    }
    std::filesystem::remove_all(dir);
}

TEST(Pipeline, SameSeedSameModels) {
    const auto& r = small_run();
    const auto again = smtcnn_train_full(r.mixed, r.normal, r.anomaly, small_config());
    EXPECT_EQ(*again.task2, *r.full.task2);
    EXPECT_EQ(*again.task3, *r.full.task3);
}

TEST(Pipeline, WrongRegimeRejected) {
    const auto& r = small_run();
    EXPECT_THROW(smtcnn_train_full(r.normal, r.normal, r.anomaly, small_config()), InputError);
    EXPECT_THROW(smtcnn_train_full(r.mixed, r.normal, r.mixed, small_config()), InputError);
}
