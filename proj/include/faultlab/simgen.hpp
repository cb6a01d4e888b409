#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "faultlab/error.hpp"
#include "faultlab/random.hpp"

namespace faultlab::sim {

inline constexpr int kNumFaultClasses = 11;
/// Label used for records without a fault.
inline constexpr int kNoFault = 12;
inline constexpr int kNumClasses = 12;

struct TelemetryRecord {
    std::int64_t timestamp = 0;  // seconds since epoch
    double energy = 0.0;
    double cpu = 0.0;       // fraction of capacity, [0, 1]
    double duration = 0.0;  // seconds per instance, > 0
    bool anomaly = false;
    int fault_class = kNoFault;

    friend bool operator==(const TelemetryRecord&, const TelemetryRecord&) = default;
};

enum class Regime { anomaly_only, normal_only, mixed };

inline std::string_view to_string(Regime r) {
    switch (r) {
        case Regime::anomaly_only: return "anomaly_only";
        case Regime::normal_only: return "normal_only";
        case Regime::mixed: return "mixed";
    }
    return "mixed";
}

inline Regime regime_from_string(std::string_view s) {
    if (s == "anomaly_only" || s == "anomaly") return Regime::anomaly_only;
    if (s == "normal_only" || s == "normal") return Regime::normal_only;
    if (s == "mixed") return Regime::mixed;
    throw InputError("unknown regime '" + std::string(s) + "' (expected anomaly, normal or mixed)");
}

struct TimeSeriesDataset {
    std::vector<TelemetryRecord> records;
    Regime regime = Regime::mixed;

    std::size_t size() const noexcept { return records.size(); }

    friend bool operator==(const TimeSeriesDataset&, const TimeSeriesDataset&) = default;
};

/// Contiguous slice [start, start+len) keeping the parent's regime tag.
inline TimeSeriesDataset slice(const TimeSeriesDataset& ds, std::size_t start, std::size_t len) {
    require(start + len <= ds.size(), "slice: range exceeds dataset");
    TimeSeriesDataset out;
    out.regime = ds.regime;
    out.records.assign(ds.records.begin() + static_cast<long>(start), ds.records.begin() + static_cast<long>(start + len));
    return out;
}

enum class FaultFamily { undervoltage, sensor_stuck, mcu_high_temp, buffer_overflow };

inline std::string_view to_string(FaultFamily f) {
    switch (f) {
        case FaultFamily::undervoltage: return "undervoltage";
        case FaultFamily::sensor_stuck: return "sensor_stuck";
        case FaultFamily::mcu_high_temp: return "mcu_high_temp";
        case FaultFamily::buffer_overflow: return "buffer_overflow";
    }
    return "undervoltage";
}

/// Fault class -> family, following the testbed's fault table.
inline FaultFamily family_of(int class_id) {
    if (class_id >= 1 && class_id <= 6) return FaultFamily::undervoltage;
    if (class_id == 7 || class_id == 8) return FaultFamily::sensor_stuck;
    if (class_id == 9 || class_id == 10) return FaultFamily::mcu_high_temp;
    if (class_id == 11) return FaultFamily::buffer_overflow;
    throw InputError("fault class " + std::to_string(class_id) + " outside 1..11");
}

/// Supply voltage floor for undervoltage classes 1..6 (nominal supply 3.3 V).
inline constexpr std::array<double, 6> kUndervoltageFloor{3.0, 2.8, 2.6, 2.4, 2.3, 2.2};
inline constexpr double kNominalVoltage = 3.3;

enum class Channel { energy, cpu, duration };

/// Magnitudes of the synthetic fault manifestations. The fault table only
/// names the classes; how each one shows up in the three channels is a
/// modelling choice exposed here so difficulty can be tuned.
struct SignatureParams {
    double scale = 1.0;                    // global multiplier on every shift
    double energy_per_volt = 8.0;          // undervoltage: energy drop per volt below nominal
    double noise_gain_per_volt = 1.0;      // undervoltage: energy noise std multiplier 1 + gain * drop
    double stuck_cpu_offset[2] = {0.10, 0.05};  // classes 7, 8
    double stuck_energy_offset[2] = {0.0, 0.6};
    double overheat_cpu_target[2] = {0.95, 0.75};  // classes 9, 10
    double overheat_ramp_steps = 4.0;
    double overheat_duration_factor[2] = {1.5, 1.3};
    double overheat_energy_offset[2] = {1.0, -0.6};
    double overflow_duration_factor = 1.8;
    double overflow_spike_factor = 3.0;
    double overflow_spike_prob = 0.3;
    double overflow_cpu_offset = 0.15;
    double overflow_cpu_burst = 0.25;
    double overflow_energy_offset = 0.3;
};

struct FaultSpec {
    int class_id = 1;
    FaultFamily family = FaultFamily::undervoltage;
    SignatureParams params;
};

inline FaultSpec make_fault(int class_id, const SignatureParams& params = {}) {
    return FaultSpec{class_id, family_of(class_id), params};
}

/// One simulated device; the dataset stream aggregates all devices
/// (energy summed, cpu and duration averaged).
struct DeviceProfile {
    double energy = 3.0;
    double cpu = 0.30;
    double duration = 2.0;
};

struct NoiseLevels {
    double energy = 0.10;
    double cpu = 0.01;
    double duration = 0.04;
};

struct SimConfig {
    std::vector<DeviceProfile> devices{{2.9, 0.25, 1.8}, {3.1, 0.30, 2.2}, {3.0, 0.35, 2.0}, {3.0, 0.30, 2.0}};
    std::size_t length = 50000;
    double fault_rate = 0.01;
    std::size_t fault_len_min = 10;  // minutes, mixed regime
    std::size_t fault_len_max = 60;
    std::size_t fault_spacing = 60;  // minimum normal gap between mixed-regime windows
    std::size_t anomaly_len_min = 150;  // anomaly-only regime window lengths
    std::size_t anomaly_len_max = 300;
    NoiseLevels noise;
    double diurnal_amplitude = 0.03;  // cpu
    double diurnal_period = 1440.0;   // minutes
    std::int64_t start_timestamp = 1700000000;
    std::int64_t step_seconds = 60;
    SignatureParams signatures;
    std::uint64_t seed = 1;

    double mean_energy() const {
        double s = 0.0;
        for (const auto& d : devices) s += d.energy;
        return s;
    }
    double mean_cpu() const {
        double s = 0.0;
        for (const auto& d : devices) s += d.cpu;
        return s / static_cast<double>(devices.size());
    }
    double mean_duration() const {
        double s = 0.0;
        for (const auto& d : devices) s += d.duration;
        return s / static_cast<double>(devices.size());
    }

    void validate() const {
        require(!devices.empty(), "SimConfig: at least one device required");
        require(fault_rate >= 0.0 && fault_rate <= 1.0, "SimConfig: fault_rate must lie in [0, 1]");
        require(fault_len_min >= 1 && fault_len_min <= fault_len_max, "SimConfig: bad fault window length range");
        require(anomaly_len_min >= 1 && anomaly_len_min <= anomaly_len_max, "SimConfig: bad anomaly window range");
        require(noise.energy >= 0 && noise.cpu >= 0 && noise.duration >= 0, "SimConfig: noise levels must be >= 0");
        require(mean_duration() > 0 && mean_cpu() >= 0 && mean_cpu() <= 1, "SimConfig: device means out of range");
    }
};

/// Desk-scale and full-size series lengths per regime.
inline std::size_t default_length(Regime r, bool full_scale = false) {
    switch (r) {
        case Regime::anomaly_only: return 8432;
        case Regime::normal_only: return full_scale ? 740448 : 50000;
        case Regime::mixed: return full_scale ? 718444 : 50000;
    }
    return 50000;
}

inline double clamp_cpu(double v) { return std::clamp(v, 0.0, 1.0); }

inline double clamp_duration(double v) { return std::max(v, 1e-3); }

/// Stationary fault-free telemetry with seeded Gaussian noise. CPU carries a
/// slow diurnal sinusoid on top of its mean.
inline TimeSeriesDataset simulate_normal(const SimConfig& cfg) {
    cfg.validate();
    require(cfg.length >= 1, "simulate_normal: length must be >= 1");
    Rng rng(mix64(cfg.seed));
    TimeSeriesDataset ds;
    ds.regime = Regime::normal_only;
    ds.records.resize(cfg.length);
    const double e0 = cfg.mean_energy(), c0 = cfg.mean_cpu(), d0 = cfg.mean_duration();
    for (std::size_t t = 0; t < cfg.length; ++t) {
        auto& r = ds.records[t];
        r.timestamp = cfg.start_timestamp + static_cast<std::int64_t>(t) * cfg.step_seconds;
        const double phase = 2.0 * std::numbers::pi * static_cast<double>(t) / cfg.diurnal_period;
        r.energy = e0 + cfg.noise.energy * normal(rng);
        r.cpu = clamp_cpu(c0 + cfg.diurnal_amplitude * std::sin(phase) + cfg.noise.cpu * normal(rng));
        r.duration = clamp_duration(d0 + cfg.noise.duration * normal(rng));
        r.anomaly = false;
        r.fault_class = kNoFault;
    }
    return ds;
}

/// Applies a fault's channel signature to records [start, start+length) and
/// labels them. Rejects windows that overlap an earlier fault.
inline void inject_fault(TimeSeriesDataset& series, const FaultSpec& spec, std::size_t start, std::size_t length,
                         std::uint64_t seed, const NoiseLevels& noise = {}) {
    if (family_of(spec.class_id) != spec.family)
        throw InputError("inject_fault: class " + std::to_string(spec.class_id) + " is not a " +
                         std::string(to_string(spec.family)) + " fault");
    if (start > series.size() || length > series.size() - start)
        throw InputError("inject_fault: window [" + std::to_string(start) + ", " + std::to_string(start + length) +
                         ") outside series of length " + std::to_string(series.size()));
    if (length == 0) return;
    for (std::size_t t = start; t < start + length; ++t)
        if (series.records[t].anomaly)
            throw InputError("inject_fault: window overlaps an existing fault at index " + std::to_string(t));

    const auto& p = spec.params;
    const double s = p.scale;
    Rng rng(mix64(seed ^ 0x5eedfa17ULL));
    auto& recs = series.records;
    const TelemetryRecord first = recs[start];

    for (std::size_t k = 0; k < length; ++k) {
        auto& r = recs[start + k];
        switch (spec.family) {
            case FaultFamily::undervoltage: {
                const double drop = kNominalVoltage - kUndervoltageFloor[static_cast<std::size_t>(spec.class_id - 1)];
                const double gain = 1.0 + p.noise_gain_per_volt * drop;
                r.energy -= s * p.energy_per_volt * drop;
                r.energy += noise.energy * std::sqrt(gain * gain - 1.0) * normal(rng);
                break;
            }
            case FaultFamily::sensor_stuck: {
                const auto idx = static_cast<std::size_t>(spec.class_id - 7);
                r.cpu = clamp_cpu(r.cpu + s * p.stuck_cpu_offset[idx]);
                if (spec.class_id == 7) {
                    r.energy = first.energy;  // supply-temperature sensor frozen
                } else {
                    r.duration = first.duration;  // clock sensor frozen
                    r.energy += s * p.stuck_energy_offset[idx];
                }
                break;
            }
            case FaultFamily::mcu_high_temp: {
                const auto idx = static_cast<std::size_t>(spec.class_id - 9);
                const double ramp = 1.0 - std::exp(-static_cast<double>(k + 1) / p.overheat_ramp_steps);
                const double target = std::min(1.0, first.cpu + s * (p.overheat_cpu_target[idx] - first.cpu));
                r.cpu = clamp_cpu(r.cpu + ramp * (target - first.cpu));
                r.duration = clamp_duration(r.duration * (1.0 + s * (p.overheat_duration_factor[idx] - 1.0)));
                r.energy += s * p.overheat_energy_offset[idx];
                break;
            }
            case FaultFamily::buffer_overflow: {
                const bool spike = uniform01(rng) < p.overflow_spike_prob;
                const double factor = spike ? p.overflow_spike_factor : p.overflow_duration_factor;
                r.duration = clamp_duration(r.duration * (1.0 + s * (factor - 1.0)));
                r.cpu = clamp_cpu(r.cpu + s * (p.overflow_cpu_offset + (spike ? p.overflow_cpu_burst : 0.0)));
                r.energy += s * p.overflow_energy_offset;
                break;
            }
        }
        r.anomaly = true;
        r.fault_class = spec.class_id;
    }
}

struct FaultWindow {
    std::size_t start = 0;
    std::size_t length = 0;
    int class_id = 1;
};

/// Labelled fault windows (maximal runs of one fault class), in order.
inline std::vector<FaultWindow> fault_windows(const TimeSeriesDataset& ds) {
    std::vector<FaultWindow> out;
    for (std::size_t t = 0; t < ds.size();) {
        const int cls = ds.records[t].fault_class;
        if (cls == kNoFault) {
            ++t;
            continue;
        }
        std::size_t e = t;
        while (e < ds.size() && ds.records[e].fault_class == cls) ++e;
        out.push_back({t, e - t, cls});
        t = e;
    }
    return out;
}

inline double fault_fraction(const TimeSeriesDataset& ds) {
    if (ds.records.empty()) return 0.0;
    std::size_t n = 0;
    for (const auto& r : ds.records) n += r.anomaly ? 1 : 0;
    return static_cast<double>(n) / static_cast<double>(ds.size());
}

namespace detail {

inline TimeSeriesDataset generate_anomaly_only(const SimConfig& cfg) {
    TimeSeriesDataset ds = simulate_normal(cfg);
    ds.regime = Regime::anomaly_only;
    const std::size_t T = ds.size();
    require(T >= static_cast<std::size_t>(kNumFaultClasses),
            "generate_dataset: anomaly-only series needs at least 11 records");
    Rng rng(stage_seed(cfg.seed, "anomaly-windows"));
    // Shrink windows if the series cannot fit one of each class at the configured size.
    const std::size_t cap = std::max<std::size_t>(1, T / kNumFaultClasses);
    const std::size_t lo = std::min(cfg.anomaly_len_min, cap);
    const std::size_t hi = std::max(lo, std::min(cfg.anomaly_len_max, cap));

    std::vector<int> round;
    std::size_t pos = 0;
    while (pos < T) {
        if (round.empty()) {
            for (int c = kNumFaultClasses; c >= 1; --c) round.push_back(c);
            shuffle(round.begin(), round.end(), rng);
        }
        const int cls = round.back();
        round.pop_back();
        std::size_t len = static_cast<std::size_t>(uniform_int(rng, static_cast<std::int64_t>(lo), static_cast<std::int64_t>(hi)));
        len = std::min(len, T - pos);
        inject_fault(ds, make_fault(cls, cfg.signatures), pos, len, rng(), cfg.noise);
        pos += len;
    }
    return ds;
}

inline TimeSeriesDataset generate_mixed(const SimConfig& cfg) {
    TimeSeriesDataset ds = simulate_normal(cfg);
    ds.regime = Regime::mixed;
    const std::size_t T = ds.size();
    const auto target = static_cast<std::size_t>(std::llround(cfg.fault_rate * static_cast<double>(T)));
    Rng rng(stage_seed(cfg.seed, "mixed-windows"));

    std::vector<FaultWindow> placed;
    std::size_t total = 0;
    std::size_t failures = 0;
    while (total + cfg.fault_len_min <= target && cfg.fault_len_min <= T) {
        const auto len = static_cast<std::size_t>(uniform_int(rng, static_cast<std::int64_t>(cfg.fault_len_min),
                                                              static_cast<std::int64_t>(std::min(cfg.fault_len_max, T))));
        const auto start = static_cast<std::size_t>(uniform_int(rng, 0, static_cast<std::int64_t>(T - len)));
        const bool clash = std::any_of(placed.begin(), placed.end(), [&](const FaultWindow& w) {
            return start < w.start + w.length + cfg.fault_spacing && w.start < start + len + cfg.fault_spacing;
        });
        if (clash) {
            if (++failures > 100000) throw InputError("generate_dataset: cannot place fault windows at this rate");
            continue;
        }
        const int cls = static_cast<int>(uniform_int(rng, 1, kNumFaultClasses));
        placed.push_back({start, len, cls});
        total += len;
    }
    std::sort(placed.begin(), placed.end(), [](const auto& a, const auto& b) { return a.start < b.start; });
    for (const auto& w : placed) inject_fault(ds, make_fault(w.class_id, cfg.signatures), w.start, w.length, rng(), cfg.noise);
    return ds;
}

}  // namespace detail

/// Builds one of the three dataset regimes from a config.
inline TimeSeriesDataset generate_dataset(Regime regime, const SimConfig& cfg) {
    cfg.validate();
    switch (regime) {
        case Regime::normal_only: return simulate_normal(cfg);
        case Regime::anomaly_only: return detail::generate_anomaly_only(cfg);
        case Regime::mixed: return detail::generate_mixed(cfg);
    }
    return simulate_normal(cfg);
}

/// Checks record-level invariants and the regime contract.
inline void validate_dataset(const TimeSeriesDataset& ds) {
    for (std::size_t t = 0; t < ds.size(); ++t) {
        const auto& r = ds.records[t];
        const std::string at = "record " + std::to_string(t);
        require(r.fault_class >= 1 && r.fault_class <= kNumClasses, at + ": fault_class outside 1..12");
        require(r.anomaly == (r.fault_class != kNoFault), at + ": anomaly flag disagrees with fault_class");
        require(r.cpu >= 0.0 && r.cpu <= 1.0, at + ": cpu outside [0, 1]");
        require(r.duration > 0.0, at + ": duration must be positive");
        require(std::isfinite(r.energy), at + ": energy not finite");
        if (t > 0) require(r.timestamp > ds.records[t - 1].timestamp, at + ": timestamps not strictly increasing");
        if (ds.regime == Regime::normal_only) require(!r.anomaly, at + ": anomalous record in a normal-only dataset");
        if (ds.regime == Regime::anomaly_only) require(r.anomaly, at + ": normal record in an anomaly-only dataset");
    }
}

inline constexpr std::string_view kCsvHeader = "timestamp,energy,cpu,duration,anomaly,fault_class";

inline std::string format_double(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline void write_csv(const TimeSeriesDataset& ds, std::ostream& out) {
    out << kCsvHeader << '\n';
    for (const auto& r : ds.records) {
        out << r.timestamp << ',' << format_double(r.energy) << ',' << format_double(r.cpu) << ','
            << format_double(r.duration) << ',' << (r.anomaly ? 1 : 0) << ',' << r.fault_class << '\n';
    }
}

inline void write_csv(const TimeSeriesDataset& ds, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open '" + path.string() + "' for writing");
    write_csv(ds, out);
    if (!out) throw Error("write failed for '" + path.string() + "'");
}

namespace detail {

template <class T>
T parse_field(std::string_view s, std::size_t line, std::string_view name) {
    T v{};
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
        throw ParseError("cannot parse " + std::string(name) + " value '" + std::string(s) + "'", line);
    return v;
}

inline Regime infer_regime(const std::vector<TelemetryRecord>& recs) {
    const auto faults = std::count_if(recs.begin(), recs.end(), [](const auto& r) { return r.anomaly; });
    if (faults == 0) return Regime::normal_only;
    if (static_cast<std::size_t>(faults) == recs.size()) return Regime::anomaly_only;
    return Regime::mixed;
}

}  // namespace detail

/// Parses the six-column CSV. The regime is checked against `regime` when
/// given, otherwise inferred from the labels.
inline TimeSeriesDataset read_csv(std::istream& in, std::optional<Regime> regime = std::nullopt) {
    std::string line;
    std::size_t lineno = 1;
    if (!std::getline(in, line)) throw ParseError("empty file, missing header", 1);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kCsvHeader) throw ParseError("unexpected header '" + line + "'", 1);

    TimeSeriesDataset ds;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::array<std::string_view, 6> f;
        std::string_view rest(line);
        for (std::size_t k = 0; k < 6; ++k) {
            const auto comma = rest.find(',');
            if ((k < 5) == (comma == std::string_view::npos))
                throw ParseError("expected 6 comma-separated fields", lineno);
            f[k] = rest.substr(0, comma);
            rest = k < 5 ? rest.substr(comma + 1) : std::string_view{};
        }
        TelemetryRecord r;
        r.timestamp = detail::parse_field<std::int64_t>(f[0], lineno, "timestamp");
        r.energy = detail::parse_field<double>(f[1], lineno, "energy");
        r.cpu = detail::parse_field<double>(f[2], lineno, "cpu");
        r.duration = detail::parse_field<double>(f[3], lineno, "duration");
        const int anomaly = detail::parse_field<int>(f[4], lineno, "anomaly");
        r.fault_class = detail::parse_field<int>(f[5], lineno, "fault_class");
        if (anomaly != 0 && anomaly != 1) throw ParseError("anomaly must be 0 or 1", lineno);
        r.anomaly = anomaly == 1;
        if (!std::isfinite(r.energy)) throw ParseError("energy is not finite", lineno);
        if (!(r.cpu >= 0.0 && r.cpu <= 1.0)) throw ParseError("invariant violated: cpu outside [0, 1]", lineno);
        if (!(r.duration > 0.0)) throw ParseError("invariant violated: duration must be positive", lineno);
        if (r.fault_class < 1 || r.fault_class > kNumClasses)
            throw ParseError("invariant violated: fault_class outside 1..12", lineno);
        if (r.anomaly != (r.fault_class != kNoFault))
            throw ParseError("invariant violated: anomaly flag disagrees with fault_class", lineno);
        if (!ds.records.empty() && r.timestamp <= ds.records.back().timestamp)
            throw ParseError("invariant violated: timestamps not strictly increasing", lineno);
        ds.records.push_back(r);
    }
    ds.regime = regime.value_or(detail::infer_regime(ds.records));
    validate_dataset(ds);
    return ds;
}

inline TimeSeriesDataset read_csv(const std::filesystem::path& path, std::optional<Regime> regime = std::nullopt) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open '" + path.string() + "'");
    try {
        return read_csv(in, regime);
    } catch (const ParseError& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

/// Reads a SimConfig from JSON. Recognized keys (all optional):
///   length, fault_rate, fault_len_min, fault_len_max, fault_spacing,
///   anomaly_len_min, anomaly_len_max, diurnal_amplitude, diurnal_period,
///   start_timestamp, step_seconds, seed,
///   noise {energy, cpu, duration},
///   devices [{energy, cpu, duration}, ...],
///   signatures {scale, energy_per_volt, noise_gain_per_volt, overheat_ramp_steps,
///               overflow_duration_factor, overflow_spike_factor, overflow_spike_prob,
///               overflow_cpu_offset, overflow_cpu_burst, overflow_energy_offset}
inline SimConfig sim_config_from_json(const nlohmann::json& j, SimConfig cfg = {}) {
    static const std::vector<std::string> known{
        "length", "fault_rate", "fault_len_min", "fault_len_max", "fault_spacing", "anomaly_len_min",
        "anomaly_len_max", "diurnal_amplitude", "diurnal_period", "start_timestamp", "step_seconds", "seed",
        "noise", "devices", "signatures"};
    for (const auto& [key, _] : j.items())
        if (std::find(known.begin(), known.end(), key) == known.end())
            throw InputError("sim config: unknown key '" + key + "'");
    auto get = [&](const char* k, auto& field) {
        if (j.contains(k)) field = j.at(k).get<std::decay_t<decltype(field)>>();
    };
    get("length", cfg.length);
    get("fault_rate", cfg.fault_rate);
    get("fault_len_min", cfg.fault_len_min);
    get("fault_len_max", cfg.fault_len_max);
    get("fault_spacing", cfg.fault_spacing);
    get("anomaly_len_min", cfg.anomaly_len_min);
    get("anomaly_len_max", cfg.anomaly_len_max);
    get("diurnal_amplitude", cfg.diurnal_amplitude);
    get("diurnal_period", cfg.diurnal_period);
    get("start_timestamp", cfg.start_timestamp);
    get("step_seconds", cfg.step_seconds);
    get("seed", cfg.seed);
    if (j.contains("noise")) {
        const auto& n = j.at("noise");
        cfg.noise.energy = n.value("energy", cfg.noise.energy);
        cfg.noise.cpu = n.value("cpu", cfg.noise.cpu);
        cfg.noise.duration = n.value("duration", cfg.noise.duration);
    }
    if (j.contains("devices")) {
        cfg.devices.clear();
        for (const auto& d : j.at("devices"))
            cfg.devices.push_back({d.at("energy").get<double>(), d.at("cpu").get<double>(), d.at("duration").get<double>()});
    }
    if (j.contains("signatures")) {
        const auto& s = j.at("signatures");
        auto& p = cfg.signatures;
        p.scale = s.value("scale", p.scale);
        p.energy_per_volt = s.value("energy_per_volt", p.energy_per_volt);
        p.noise_gain_per_volt = s.value("noise_gain_per_volt", p.noise_gain_per_volt);
        p.overheat_ramp_steps = s.value("overheat_ramp_steps", p.overheat_ramp_steps);
        p.overflow_duration_factor = s.value("overflow_duration_factor", p.overflow_duration_factor);
        p.overflow_spike_factor = s.value("overflow_spike_factor", p.overflow_spike_factor);
        p.overflow_spike_prob = s.value("overflow_spike_prob", p.overflow_spike_prob);
        p.overflow_cpu_offset = s.value("overflow_cpu_offset", p.overflow_cpu_offset);
        p.overflow_cpu_burst = s.value("overflow_cpu_burst", p.overflow_cpu_burst);
        p.overflow_energy_offset = s.value("overflow_energy_offset", p.overflow_energy_offset);
    }
    cfg.validate();
    return cfg;
}

}  // namespace faultlab::sim
