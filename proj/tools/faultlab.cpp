#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "faultlab/cascade.hpp"
#include "faultlab/config.hpp"
#include "faultlab/eval/experiment.hpp"
#include "faultlab/log.hpp"

namespace fs = std::filesystem;
using namespace faultlab;

namespace {

constexpr int kRuntimeFailure = 1;
constexpr int kUsageError = 2;

/// Failure inside a named pipeline stage.
struct StageError : Error {
    StageError(const std::string& stage, const std::string& what) : Error("stage '" + stage + "' failed: " + what) {}
};

template <class F>
auto stage(const std::string& name, F&& f) {
    try {
        return f();
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(name, e.what());
    }
}

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    bool verbose = false;
};

RunConfig resolve(const Common& c) {
    RunConfig rc = c.config.empty() ? RunConfig{} : load_run_config(c.config);
    std::uint64_t seed = rc.seed;
    if (c.seed) {
        seed = *c.seed;
    } else if (!rc.seed_in_file) {
        if (auto env = seed_from_env()) seed = *env;
    }
    set_seed(rc, seed);
    return rc;
}

void write_text(const fs::path& p, const std::string& text) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    nn::write_text_file(p, text);
}

eval::ReportFormat format_for(const fs::path& p) {
    return p.extension() == ".csv" ? eval::ReportFormat::csv : eval::ReportFormat::markdown;
}

std::vector<cascade::Variant> variants_for(const std::string& which) {
    if (which.empty() || which == "all")
        return {cascade::Variant::full, cascade::Variant::b2_no_cpd, cascade::Variant::b3_no_segclass};
    try {
        return {cascade::variant_from_string(which)};
    } catch (const InputError& e) {
        throw ConfigError(e.what());
    }
}

sim::TimeSeriesDataset read_series(const std::string& path, std::optional<sim::Regime> regime = std::nullopt) {
    if (!fs::exists(path)) throw InputError("input file not found: " + path);
    return sim::read_csv(fs::path(path), regime);
}

std::string summary(const sim::TimeSeriesDataset& ds) {
    std::set<int> classes;
    for (const auto& r : ds.records)
        if (r.anomaly) classes.insert(r.fault_class);
    std::ostringstream out;
    out << "rows " << ds.size() << ", fault fraction " << sim::fault_fraction(ds) << ", classes present [";
    bool first = true;
    for (int c : classes) {
        out << (first ? "" : " ") << c;
        first = false;
    }
    out << "]";
    return out.str();
}

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("--config", c.config, "JSON run config")->check(CLI::ExistingFile);
    cmd->add_option("--seed", c.seed, "global seed (falls back to the config, then FAULTLAB_SEED)");
    cmd->add_flag("-v,--verbose", c.verbose, "log training progress");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"faultlab: simulated IIoT fault detection experiments"};
    app.require_subcommand(1);

    // gen
    Common gen_c;
    std::string gen_regime, gen_out;
    std::optional<std::size_t> gen_len;
    std::optional<double> gen_rate;
    auto* gen = app.add_subcommand("gen", "simulate a dataset");
    add_common(gen, gen_c);
    gen->add_option("--regime", gen_regime, "normal, anomaly or mixed")->required();
    gen->add_option("--len", gen_len, "number of per-minute records");
    gen->add_option("--rate", gen_rate, "fault time fraction for the mixed regime");
    gen->add_option("--out", gen_out, "output CSV")->required();

    // train-cpd
    Common cpd_c;
    std::string cpd_in, cpd_out, cpd_detect, cpd_segments;
    std::optional<double> cpd_k;
    auto* tcpd = app.add_subcommand("train-cpd", "train the change-point autoencoder on normal data");
    add_common(tcpd, cpd_c);
    tcpd->add_option("--in", cpd_in, "normal-regime CSV")->required();
    tcpd->add_option("--out", cpd_out, "model file")->required();
    tcpd->add_option("--k", cpd_k, "threshold multiplier");
    tcpd->add_option("--detect", cpd_detect, "series CSV to segment with the trained model");
    tcpd->add_option("--segments", cpd_segments, "segments CSV (start,end) for --detect");

    // train-seg
    Common seg_c;
    std::string seg_in, seg_out, seg_kind = "rf";
    bool seg_cv = false;
    auto* tseg = app.add_subcommand("train-seg", "train a window classifier on the anomaly-only regime");
    add_common(tseg, seg_c);
    tseg->add_option("--in", seg_in, "anomaly-only CSV")->required();
    tseg->add_option("--out", seg_out, "model file")->required();
    tseg->add_option("--kind", seg_kind, "dt, rf, nb, lr, sgd or svm");
    tseg->add_flag("--cv", seg_cv, "also report 10-fold accuracy");

    // train-smtcnn
    Common sm_c;
    std::string sm_mixed, sm_normal, sm_anomaly, sm_out, sm_ablation = "full";
    auto* tsm = app.add_subcommand("train-smtcnn", "train the full cascade");
    add_common(tsm, sm_c);
    tsm->add_option("--mixed", sm_mixed, "mixed-regime CSV")->required();
    tsm->add_option("--normal", sm_normal, "normal-regime CSV")->required();
    tsm->add_option("--anomaly", sm_anomaly, "anomaly-only CSV")->required();
    tsm->add_option("--out", sm_out, "model directory")->required();
    tsm->add_option("--ablation", sm_ablation, "full, b2 or b3");

    // infer
    Common inf_c;
    std::string inf_models, inf_in, inf_out;
    auto* inf = app.add_subcommand("infer", "per-step predictions from a model directory");
    add_common(inf, inf_c);
    inf->add_option("--models", inf_models, "model directory")->required();
    inf->add_option("--in", inf_in, "series CSV")->required();
    inf->add_option("--out", inf_out, "predictions CSV")->required();

    // eval
    Common ev_c;
    std::string ev_variant = "all", ev_out, ev_mixed, ev_normal, ev_anomaly;
    std::optional<std::uint64_t> ev_plan_seed;
    std::optional<std::size_t> ev_folds;
    auto* ev = app.add_subcommand("eval", "sequential cross-validation of one or all variants");
    add_common(ev, ev_c);
    ev->add_option("--variant", ev_variant, "full, b2, b3 or all");
    ev->add_option("--plan-seed", ev_plan_seed, "seed of the fold plan");
    ev->add_option("--folds", ev_folds, "number of folds");
    ev->add_option("--mixed", ev_mixed, "mixed-regime CSV (simulated when omitted)");
    ev->add_option("--normal", ev_normal, "normal-regime CSV");
    ev->add_option("--anomaly", ev_anomaly, "anomaly-only CSV");
    ev->add_option("--out", ev_out, "report file (.md or .csv)")->required();

    // pipeline
    Common pl_c;
    std::string pl_out, pl_ablation = "all";
    auto* pl = app.add_subcommand("pipeline", "simulate, train and evaluate end to end");
    add_common(pl, pl_c);
    pl->add_option("--out", pl_out, "output directory (data, models, reports)")->required();
    pl->add_option("--ablation", pl_ablation, "full, b2, b3 or all");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return e.get_exit_code() == 0 ? 0 : kUsageError;
    }

    try {
        if (gen->parsed()) {
            auto rc = resolve(gen_c);
            log::set_level(gen_c.verbose ? log::Level::info : log::Level::warn);
            sim::Regime regime;
            try {
                regime = sim::regime_from_string(gen_regime);
            } catch (const InputError& e) {
                throw ConfigError(e.what());
            }
            sim::SimConfig sc = rc.sim;
            sc.seed = rc.seed;
            sc.length = gen_len.value_or(sim::default_length(regime));
            if (gen_rate) sc.fault_rate = *gen_rate;
            const auto ds = sim::generate_dataset(regime, sc);
            if (fs::path(gen_out).has_parent_path()) fs::create_directories(fs::path(gen_out).parent_path());
            sim::write_csv(ds, fs::path(gen_out));
            std::cout << summary(ds) << "\n";
        } else if (tcpd->parsed()) {
            auto rc = resolve(cpd_c);
            log::set_level(cpd_c.verbose ? log::Level::info : log::Level::warn);
            auto cfg = rc.experiment.cascade.cpd;
            if (cpd_k) cfg.k = *cpd_k;
            cfg.train.seed = stage_seed(rc.seed, "cpd");
            const auto fit = cpd::train_autoencoder(read_series(cpd_in, sim::Regime::normal_only), cfg);
            write_text(cpd_out, nn::dump_checkpoint(cpd::to_checkpoint(fit.model, cfg.train.adam)));
            std::cout << "tau " << fit.model.threshold.tau << " after " << fit.history.epochs_run << " epochs\n";
            if (!cpd_detect.empty()) {
                if (cpd_segments.empty()) throw ConfigError("--detect needs --segments");
                const auto& sp = rc.experiment.cascade.segmentation;
                const auto t1 = cascade::task1_propose(feature_matrix(read_series(cpd_detect)), fit.model, sp);
                cpd::write_segments_csv(t1.segments, cpd_segments);
                std::cout << t1.segments.size() << " segments\n";
            }
        } else if (tseg->parsed()) {
            auto rc = resolve(seg_c);
            log::set_level(seg_c.verbose ? log::Level::info : log::Level::warn);
            seg::ClassifierKind kind;
            try {
                kind = seg::kind_from_string(seg_kind);
            } catch (const InputError& e) {
                throw ConfigError(e.what());
            }
            const auto& c = rc.experiment.cascade;
            const auto rows = seg::windowize(read_series(seg_in, sim::Regime::anomaly_only), c.seg_window, c.seg_stride);
            auto sc = c.seg;
            sc.seed = stage_seed(rc.seed, "segclass");
            const auto model = seg::train_classifier(kind, rows, sc);
            write_text(seg_out, nn::dump_checkpoint(seg::to_checkpoint(model, c.seg_window, c.seg_stride)));
            std::cout << rows.size() << " windows\n";
            if (seg_cv) {
                const auto rep = seg::crossval_10fold(rows, kind, sc, stage_seed(rc.seed, "segclass-cv"));
                std::cout << "10-fold accuracy " << rep.mean.accuracy << "\n";
            }
        } else if (tsm->parsed()) {
            auto rc = resolve(sm_c);
            log::set_level(sm_c.verbose ? log::Level::info : log::Level::warn);
            const auto variant = variants_for(sm_ablation).front();
            const auto mixed = read_series(sm_mixed, sim::Regime::mixed);
            const auto normal = read_series(sm_normal, sim::Regime::normal_only);
            const auto anomaly = read_series(sm_anomaly, sim::Regime::anomaly_only);
            const auto models = stage("train-smtcnn", [&] {
                return cascade::smtcnn_train_full(mixed, normal, anomaly, rc.experiment.cascade, variant);
            });
            cascade::save_models(models, sm_out);
            std::cout << "saved " << cascade::to_string(variant) << " models to " << sm_out << "\n";
        } else if (inf->parsed()) {
            auto rc = resolve(inf_c);
            log::set_level(inf_c.verbose ? log::Level::info : log::Level::warn);
            const auto models = cascade::load_models(inf_models);
            const auto ds = read_series(inf_in);
            const auto pred = cascade::smtcnn_infer(models, ds);
            std::ostringstream out;
            out << "index,class,p_anomaly\n";
            for (std::size_t t = 0; t < pred.classes.size(); ++t)
                out << t << ',' << pred.classes[t] << ',' << sim::format_double(pred.p_anomaly(t)) << '\n';
            write_text(inf_out, out.str());
            const auto n12 = std::count(pred.classes.begin(), pred.classes.end(), sim::kNoFault);
            std::cout << pred.classes.size() << " steps, " << pred.classes.size() - static_cast<std::size_t>(n12)
                      << " flagged as faults\n";
        } else if (ev->parsed()) {
            auto rc = resolve(ev_c);
            log::set_level(ev_c.verbose ? log::Level::info : log::Level::warn);
            if (ev_plan_seed) rc.experiment.plan_seed = *ev_plan_seed;
            if (ev_folds) rc.experiment.folds = *ev_folds;
            const auto variants = variants_for(ev_variant);
            eval::Datasets d;
            if (ev_mixed.empty() && ev_normal.empty() && ev_anomaly.empty()) {
                d = stage("gen", [&] { return eval::generate_datasets(rc.sim, rc.seed); });
            } else {
                if (ev_mixed.empty() || ev_normal.empty() || ev_anomaly.empty())
                    throw ConfigError("--mixed, --normal and --anomaly must be given together");
                d = {read_series(ev_normal, sim::Regime::normal_only), read_series(ev_anomaly, sim::Regime::anomaly_only),
                     read_series(ev_mixed, sim::Regime::mixed)};
            }
            const auto reports = stage("eval", [&] { return eval::run_ablation(d, rc.experiment, variants); });
            write_text(ev_out, eval::render_report(reports, format_for(ev_out)));
            std::cout << eval::render_report(reports, eval::ReportFormat::markdown);
        } else if (pl->parsed()) {
            auto rc = resolve(pl_c);
            log::set_level(pl_c.verbose ? log::Level::info : log::Level::warn);
            const auto variants = variants_for(pl_ablation);
            const fs::path root = pl_out;
            const auto d = stage("gen", [&] { return eval::generate_datasets(rc.sim, rc.seed); });
            const auto data = root / rc.paths.data_dir;
            fs::create_directories(data);
            sim::write_csv(d.normal, data / "normal.csv");
            sim::write_csv(d.anomaly, data / "anomaly.csv");
            sim::write_csv(d.mixed, data / "mixed.csv");
            const auto models = stage("train-smtcnn", [&] {
                return cascade::smtcnn_train_full(d.mixed, d.normal, d.anomaly, rc.experiment.cascade, variants.front());
            });
            cascade::save_models(models, root / rc.paths.model_dir);
            const auto reports = stage("eval", [&] { return eval::run_ablation(d, rc.experiment, variants); });
            write_text(root / rc.paths.report_dir / "report.md", eval::render_report(reports, eval::ReportFormat::markdown));
            write_text(root / rc.paths.report_dir / "report.csv", eval::render_report(reports, eval::ReportFormat::csv));
            std::cout << eval::render_report(reports, eval::ReportFormat::markdown);
        }
    } catch (const ConfigError& e) {
        std::cerr << "faultlab: " << e.what() << "\n";
        return kUsageError;
    } catch (const std::exception& e) {
        std::cerr << "faultlab: " << e.what() << "\n";
        return kRuntimeFailure;
    }
    return 0;
}
