#include <chrono>
#include <cmath>

#include <gtest/gtest.h>

#include "faultlab/changepoint.hpp"

using namespace faultlab;
using namespace faultlab::cpd;

namespace {

sim::TimeSeriesDataset constant_series(std::size_t n) {
    sim::SimConfig cfg;
    cfg.length = n;
    cfg.noise = {0.0, 0.0, 0.0};
    cfg.diurnal_amplitude = 0.0;
    return sim::simulate_normal(cfg);
}

nn::Tensor2 random_window(std::size_t w, Rng& rng) {
    nn::Tensor2 t(w, 3);
    for (double& v : t.data) v = normal(rng);
    return t;
}

AutoencoderConfig tiny_config() {
    AutoencoderConfig cfg;
    cfg.window = 8;
    cfg.encoder_hidden = 3;
    cfg.decoder_hidden = 4;
    cfg.train_stride = 2;
    cfg.max_train_windows = 200;
    cfg.train.max_epochs = 8;
    cfg.train.seed = 5;
    return cfg;
}

}  // namespace

TEST(Autoencoder, GradientsMatchFiniteDifferences) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(70 + seed);
        AutoencoderModel m(3, 3 + seed % 4, 2 + seed % 2, 3);
        m.init(rng);
        const auto win = random_window(m.window, rng);
        auto g = nn::zeros_like(m);
        window_loss_grad(m, win, g, 1.0);
        auto loss = [&] { return nn::mse_loss(reconstruct(m, win), win).loss; };
        EXPECT_LT(nn::gradient_check(m.parameters(), g.parameters(), loss).max_rel_error, 1e-4) << "seed " << seed;
    }
}

TEST(Autoencoder, ConstantSeriesReconstructionVanishes) {
    const auto ds = constant_series(400);
    AutoencoderConfig cfg;
    cfg.train.max_epochs = 50;
    cfg.max_train_windows = 64;
    cfg.train.seed = 1;
    const auto fit = train_autoencoder(ds, cfg);
    const auto errs = reconstruction_errors(fit.model, ds);
    EXPECT_LT(*std::max_element(errs.begin(), errs.end()), 1e-3);
}

TEST(Autoencoder, SameSeedSameWeights) {
    sim::SimConfig sc;
    sc.length = 600;
    const auto ds = sim::simulate_normal(sc);
    const auto a = train_autoencoder(ds, tiny_config());
    const auto b = train_autoencoder(ds, tiny_config());
    EXPECT_EQ(a.model, b.model);
    EXPECT_EQ(a.history.train_loss, b.history.train_loss);
}

TEST(Autoencoder, RestoredWeightsComeFromBestValidationEpoch) {
    sim::SimConfig sc;
    sc.length = 600;
    const auto ds = sim::simulate_normal(sc);
    auto cfg = tiny_config();
    cfg.train.max_epochs = 12;
    cfg.train.early.patience = 2;
    const auto fit = train_autoencoder(ds, cfg);
    ASSERT_GE(fit.history.best_epoch, 1u);
    // recompute validation loss of the returned model over the same tail windows
    const auto x = fit.model.scaler.apply(feature_matrix(ds));
    std::vector<std::size_t> starts;
    for (std::size_t s = 0; s + cfg.window <= x.rows; s += cfg.train_stride) starts.push_back(s);
    if (starts.size() > cfg.max_train_windows) {
        std::vector<std::size_t> thinned;
        for (std::size_t k = 0; k < cfg.max_train_windows; ++k) thinned.push_back(starts[k * starts.size() / cfg.max_train_windows]);
        starts.swap(thinned);
    }
    const auto n_val = static_cast<std::size_t>(std::floor(cfg.val_fraction * static_cast<double>(starts.size())));
    double total = 0.0;
    for (std::size_t k = starts.size() - n_val; k < starts.size(); ++k) {
        const auto win = window_at(x, starts[k], cfg.window);
        total += nn::mse_loss(reconstruct(fit.model, win), win).loss;
    }
    EXPECT_EQ(total / static_cast<double>(n_val), fit.history.val_loss[fit.history.best_epoch - 1]);
}

TEST(Autoencoder, RejectsWrongRegimeAndShortSeries) {
    auto ds = constant_series(100);
    ds.regime = sim::Regime::mixed;
    EXPECT_THROW(train_autoencoder(ds, tiny_config()), InputError);
    EXPECT_THROW(train_autoencoder(constant_series(5), tiny_config()), InputError);
}

TEST(ReconstructionErrors, ExactReconstructionGivesZero) {
    const auto ds = constant_series(50);
    AutoencoderModel m(3, 10, 2, 3);
    Rng rng(2);
    m.init(rng);
    m.output = nn::DenseParams(3, 3, nn::Activation::identity);  // always outputs 0 == normalized constant input
    const auto& r = ds.records.front();
    m.scaler = ChannelScaler{{r.energy, r.cpu, r.duration}, {1.0, 1.0, 1.0}};
    const auto errs = reconstruction_errors(m, ds);
    ASSERT_EQ(errs.size(), 41u);
    for (double e : errs) EXPECT_EQ(e, 0.0);
}

TEST(ReconstructionErrors, ShufflingWindowRowsChangesError) {
    Rng rng(12);
    AutoencoderModel m(3, 6, 3, 4);
    m.init(rng);
    const auto win = random_window(6, rng);
    auto shuffled = win;
    std::swap_ranges(shuffled.row(0).begin(), shuffled.row(0).end(), shuffled.row(4).begin());
    const double a = nn::mse_loss(reconstruct(m, win), win).loss;
    const double b = nn::mse_loss(reconstruct(m, shuffled), shuffled).loss;
    EXPECT_NE(a, b);
}

TEST(ReconstructionErrors, NonNegativeAndShortSeriesRejected) {
    sim::SimConfig sc;
    sc.length = 80;
    const auto ds = sim::simulate_normal(sc);
    AutoencoderModel m(3, 16, 3, 4);
    Rng rng(1);
    m.init(rng);
    m.scaler = ChannelScaler::fit(feature_matrix(ds));
    for (double e : reconstruction_errors(m, ds)) EXPECT_GE(e, 0.0);
    EXPECT_THROW(reconstruction_errors(m, sim::slice(ds, 0, 10)), InputError);
}

TEST(Threshold, ConstantErrorsGiveTauEqualToValue) {
    const std::vector<double> e(7, 0.42);
    for (double k : {0.0, 1.0, 3.0, 10.0}) EXPECT_DOUBLE_EQ(compute_threshold(e, k).tau, 0.42);
}

TEST(Threshold, PopulationStatistics) {
    const std::vector<double> e{0, 0, 0, 4};
    const auto t = compute_threshold(e, 1.0);
    EXPECT_DOUBLE_EQ(t.mean, 1.0);
    EXPECT_DOUBLE_EQ(t.std, std::sqrt(3.0));
    EXPECT_NEAR(t.tau, 2.7320508075688772, 1e-15);
}

TEST(Threshold, MonotoneInKAndRejectsEmpty) {
    Rng rng(3);
    std::vector<double> e(50);
    for (double& v : e) v = uniform01(rng);
    double prev = -1e300;
    for (double k = 0.0; k < 6.0; k += 0.5) {
        const double tau = compute_threshold(e, k).tau;
        EXPECT_LE(prev, tau);
        prev = tau;
    }
    EXPECT_THROW(compute_threshold(std::vector<double>{}, 3.0), InputError);
}

TEST(Detect, StrictInequality) {
    const std::vector<double> e{0, 0, 0, 4};
    const auto spec = compute_threshold(e, 1.0);
    EXPECT_EQ(detect_changepoints(e, spec), (std::vector<bool>{false, false, false, true}));
    ThresholdSpec at{0, 0, 0, 4.0};
    EXPECT_EQ(detect_changepoints(e, at), (std::vector<bool>{false, false, false, false}));
    ThresholdSpec high{0, 0, 0, 100.0};
    for (bool f : detect_changepoints(e, high)) EXPECT_FALSE(f);
}

TEST(Detect, ShiftingErrorsShiftsTauAndKeepsFlags) {
    Rng rng(4);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> e(100);
        for (double& v : e) v = uniform(rng, 0.0, 1.0) * uniform(rng, 0.0, 3.0);
        const double shift = 0.5;  // exactly representable, keeps sums exact enough
        auto s = e;
        for (double& v : s) v += shift;
        const auto a = compute_threshold(e, 2.0);
        const auto b = compute_threshold(s, 2.0);
        EXPECT_NEAR(b.tau, a.tau + shift, 1e-12);
        const auto fa = detect_changepoints(e, a);
        const auto fb = detect_changepoints(s, b);
        for (std::size_t i = 0; i < e.size(); ++i)
            if (std::abs(e[i] - a.tau) > 1e-9) { EXPECT_EQ(fa[i], fb[i]); }
    }
}

TEST(Segments, RunLengthExamples) {
    const std::vector<bool> f{false, false, true, true, false, true, false};
    EXPECT_EQ(flags_to_segments(f, 0, 1, 1), (std::vector<Segment>{{2, 4}, {5, 6}}));
    EXPECT_EQ(flags_to_segments(f, 2, 1, 1), (std::vector<Segment>{{2, 6}}));
    EXPECT_TRUE(flags_to_segments(std::vector<bool>(9, false), 0, 0, 1).empty());
    EXPECT_EQ(flags_to_segments(f, 0, 2, 1), (std::vector<Segment>{{2, 4}}));
}

TEST(Segments, WindowRunsMapToRecordExtents) {
    const std::vector<bool> f{false, true, true, false, false, false, false, false, true};
    // window i covers [i, i+4): runs [1,3) -> [1,6), [8,9) -> [8,12)
    EXPECT_EQ(flags_to_segments(f, 0, 0, 4), (std::vector<Segment>{{1, 6}, {8, 12}}));
    // overlapping extents merge
    const std::vector<bool> g{true, false, true};
    EXPECT_EQ(flags_to_segments(g, 0, 0, 4), (std::vector<Segment>{{0, 6}}));
}

TEST(Segments, PropertiesOverRandomFlags) {
    Rng rng(99);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 1 + static_cast<std::size_t>(uniform_int(rng, 0, 80));
        std::vector<bool> f(n);
        for (std::size_t i = 0; i < n; ++i) f[i] = uniform01(rng) < 0.4;
        const auto segs = flags_to_segments(f, 0, 0, 1);
        for (std::size_t k = 0; k < segs.size(); ++k) {
            EXPECT_LT(segs[k].start, segs[k].end);
            if (k) { EXPECT_LT(segs[k - 1].end, segs[k].start); }
        }
        // union equals the flag support
        const auto mask = segments_to_mask(segs, n);
        for (std::size_t i = 0; i < n; ++i) EXPECT_EQ(mask[i] == 1.0, static_cast<bool>(f[i]));
        // mask -> flags -> segments reproduces the segments
        std::vector<bool> back(n);
        for (std::size_t i = 0; i < n; ++i) back[i] = mask[i] == 1.0;
        EXPECT_EQ(flags_to_segments(back, 0, 0, 1), segs);
        // with merging and a window the output stays sorted and disjoint
        const auto merged = flags_to_segments(f, 3, 2, 5);
        for (std::size_t k = 1; k < merged.size(); ++k) EXPECT_LT(merged[k - 1].end, merged[k].start);
    }
}

TEST(Checkpoint, AutoencoderRoundTripBitExact) {
    sim::SimConfig sc;
    sc.length = 300;
    const auto fit = train_autoencoder(sim::simulate_normal(sc), tiny_config());
    const auto text = nn::dump_checkpoint(to_checkpoint(fit.model));
    const auto back = autoencoder_from_checkpoint(nlohmann::json::parse(text));
    EXPECT_EQ(back, fit.model);
    EXPECT_EQ(nn::dump_checkpoint(to_checkpoint(back)), text);
}
