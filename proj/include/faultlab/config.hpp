#pragma once

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "faultlab/eval/experiment.hpp"
#include "faultlab/simgen.hpp"

namespace faultlab {

/// Bad configuration file or value.
class ConfigError : public InputError {
public:
    using InputError::InputError;
};

struct RunPaths {
    std::filesystem::path data_dir = "data";
    std::filesystem::path model_dir = "models";
    std::filesystem::path report_dir = "reports";
};

struct RunConfig {
    std::uint64_t seed = 42;
    bool seed_in_file = false;
    RunPaths paths;
    sim::SimConfig sim;
    eval::ExperimentConfig experiment = eval::desk_scale_experiment(42);
};

namespace detail {

inline void check_keys(const nlohmann::json& j, const std::string& where, const std::vector<std::string>& known) {
    if (!j.is_object()) throw ConfigError(where + ": expected an object");
    for (const auto& [key, _] : j.items())
        if (std::find(known.begin(), known.end(), key) == known.end())
            throw ConfigError(where + ": unknown key '" + key + "'");
}

template <class T>
void read_key(const nlohmann::json& j, const char* key, T& field) {
    if (!j.contains(key)) return;
    try {
        field = j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError(std::string("config: bad value for '") + key + "'");
    }
}

inline void read_training(const nlohmann::json& j, const std::string& where, nn::TrainConfig& tc) {
    check_keys(j, where, {"max_epochs", "batch_size", "learning_rate", "patience", "early_stopping"});
    read_key(j, "max_epochs", tc.max_epochs);
    read_key(j, "batch_size", tc.batch_size);
    read_key(j, "learning_rate", tc.adam.alpha);
    read_key(j, "patience", tc.early.patience);
    read_key(j, "early_stopping", tc.early_stopping);
    if (tc.max_epochs == 0 || tc.batch_size == 0 || !(tc.adam.alpha > 0.0))
        throw ConfigError(where + ": max_epochs, batch_size and learning_rate must be positive");
}

inline void read_cascade(const nlohmann::json& j, cascade::CascadeConfig& c) {
    check_keys(j, "cascade",
               {"hidden", "chunk_len", "val_fraction", "min_gap", "min_len", "task2", "task3", "task2_full_series",
                "prior_floor", "prior_segment_weight", "cpd", "seg_kind", "seg_window", "seg_stride", "seg"});
    read_key(j, "hidden", c.hidden);
    read_key(j, "chunk_len", c.chunk_len);
    read_key(j, "val_fraction", c.val_fraction);
    read_key(j, "min_gap", c.segmentation.min_gap);
    read_key(j, "min_len", c.segmentation.min_len);
    read_key(j, "task2_full_series", c.task2_full_series);
    read_key(j, "prior_floor", c.prior_floor);
    read_key(j, "prior_segment_weight", c.prior_segment_weight);
    read_key(j, "seg_window", c.seg_window);
    read_key(j, "seg_stride", c.seg_stride);
    if (j.contains("task2")) read_training(j.at("task2"), "cascade.task2", c.task2);
    if (j.contains("task3")) read_training(j.at("task3"), "cascade.task3", c.task3);
    if (j.contains("seg_kind")) {
        try {
            c.seg_kind = seg::kind_from_string(j.at("seg_kind").get<std::string>());
        } catch (const std::exception& e) {
            throw ConfigError(std::string("cascade.seg_kind: ") + e.what());
        }
    }
    if (j.contains("cpd")) {
        const auto& a = j.at("cpd");
        check_keys(a, "cascade.cpd", {"window", "encoder_hidden", "decoder_hidden", "train_stride", "max_train_windows", "k", "train"});
        read_key(a, "window", c.cpd.window);
        read_key(a, "encoder_hidden", c.cpd.encoder_hidden);
        read_key(a, "decoder_hidden", c.cpd.decoder_hidden);
        read_key(a, "train_stride", c.cpd.train_stride);
        read_key(a, "max_train_windows", c.cpd.max_train_windows);
        read_key(a, "k", c.cpd.k);
        if (a.contains("train")) read_training(a.at("train"), "cascade.cpd.train", c.cpd.train);
    }
    if (j.contains("seg")) {
        const auto& s = j.at("seg");
        check_keys(s, "cascade.seg", {"max_depth", "n_trees", "max_features", "l2", "gd_iterations", "sgd_epochs"});
        read_key(s, "max_depth", c.seg.max_depth);
        read_key(s, "n_trees", c.seg.n_trees);
        read_key(s, "max_features", c.seg.max_features);
        read_key(s, "l2", c.seg.l2);
        read_key(s, "gd_iterations", c.seg.gd_iterations);
        read_key(s, "sgd_epochs", c.seg.sgd_epochs);
    }
    if (c.hidden == 0 || c.chunk_len == 0 || c.seg_window == 0 || c.seg_stride == 0)
        throw ConfigError("cascade: hidden, chunk_len, seg_window and seg_stride must be positive");
    if (!(c.val_fraction >= 0.0 && c.val_fraction < 1.0)) throw ConfigError("cascade.val_fraction must lie in [0,1)");
    if (!(c.prior_floor > 0.0 && c.prior_floor < 1.0)) throw ConfigError("cascade.prior_floor must lie in (0,1)");
    if (!(c.prior_segment_weight >= 0.0 && c.prior_segment_weight <= 1.0))
        throw ConfigError("cascade.prior_segment_weight must lie in [0,1]");
}

}  // namespace detail

/// Reads a run config. Keys (all optional): seed, paths {data_dir, model_dir,
/// report_dir}, sim {...}, cascade {...}, eval {folds, plan_seed, min_valid_folds}.
inline RunConfig run_config_from_json(const nlohmann::json& j) {
    detail::check_keys(j, "config", {"seed", "paths", "sim", "cascade", "eval"});
    RunConfig rc;
    detail::read_key(j, "seed", rc.seed);
    rc.seed_in_file = j.contains("seed");
    rc.experiment = eval::desk_scale_experiment(rc.seed);
    if (j.contains("paths")) {
        const auto& p = j.at("paths");
        detail::check_keys(p, "paths", {"data_dir", "model_dir", "report_dir"});
        std::string d = rc.paths.data_dir.string(), m = rc.paths.model_dir.string(), r = rc.paths.report_dir.string();
        detail::read_key(p, "data_dir", d);
        detail::read_key(p, "model_dir", m);
        detail::read_key(p, "report_dir", r);
        rc.paths = {d, m, r};
    }
    if (j.contains("sim")) {
        try {
            rc.sim = sim::sim_config_from_json(j.at("sim"));
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(std::string("sim: ") + e.what());
        } catch (const InputError& e) {
            throw ConfigError(e.what());
        }
    }
    if (j.contains("cascade")) detail::read_cascade(j.at("cascade"), rc.experiment.cascade);
    if (j.contains("eval")) {
        const auto& e = j.at("eval");
        detail::check_keys(e, "eval", {"folds", "plan_seed", "min_valid_folds"});
        detail::read_key(e, "folds", rc.experiment.folds);
        detail::read_key(e, "plan_seed", rc.experiment.plan_seed);
        detail::read_key(e, "min_valid_folds", rc.experiment.min_valid_folds);
        if (rc.experiment.folds == 0 || rc.experiment.min_valid_folds > rc.experiment.folds)
            throw ConfigError("eval: need folds >= 1 and min_valid_folds <= folds");
    }
    return rc;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
    std::string text;
    try {
        text = nn::read_text_file(path);
    } catch (const Error& e) {
        throw ConfigError(e.what());
    }
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    return run_config_from_json(j);
}

/// Changes the global seed; every stage seed follows from it.
inline void set_seed(RunConfig& rc, std::uint64_t seed) {
    rc.seed = seed;
    rc.experiment.cascade.seed = seed;
}

/// FAULTLAB_SEED, when set, as an unsigned integer.
inline std::optional<std::uint64_t> seed_from_env() {
    const char* v = std::getenv("FAULTLAB_SEED");
    if (!v || !*v) return std::nullopt;
    try {
        std::size_t pos = 0;
        const auto s = std::stoull(v, &pos);
        if (pos != std::string(v).size()) throw std::invalid_argument("trailing characters");
        return s;
    } catch (const std::exception&) {
        throw ConfigError("FAULTLAB_SEED must be an unsigned integer, got '" + std::string(v) + "'");
    }
}

}  // namespace faultlab
