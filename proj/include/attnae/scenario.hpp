#pragma once

// Synthetic reactor-like telemetry plus the three falsification recipes
// (drift, isolated spike, concurrent/overlapping spikes), each with an exact
// ground-truth mask. Substitutes for reactor recordings that are not public.

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "attnae/frame.hpp"
#include "attnae/pipeline.hpp"
#include "attnae/rng.hpp"

namespace attnae {

struct PowerSegment {
    enum class Kind { Ramp, Hold, Shutdown };
    Kind kind = Kind::Hold;
    double target = 0.0;   // fraction of full power; used by Ramp only
    std::size_t duration = 0;
};

struct OperationProfile {
    std::size_t duration = 3000;
    double initial_level = 0.0;
    std::vector<PowerSegment> segments;
    double full_power_counts = 1.0e5;  // neutron counts/s at 100% power
    std::map<std::string, double> noise;        // per-channel noise scale
    std::map<std::string, double> baselines;    // RAM channels: source floor
    std::map<std::string, double> log_gain;     // coupling to log10(1+counts)
    double bounds_margin_lo = 0.10;
    double bounds_margin_hi = 0.30;
    std::uint64_t seed = 0;

    void validate() const {
        std::size_t total = 0;
        for (const auto& s : segments) total += s.duration;
        if (total != duration)
            throw std::domain_error("profile: segments tile " + std::to_string(total) +
                                    " s, duration is " + std::to_string(duration) + " s");
        if (segments.empty()) throw std::domain_error("profile: no segments");
        if (initial_level < 0.0) throw std::domain_error("profile: negative power");
        for (const auto& s : segments)
            if (s.target < 0.0) throw std::domain_error("profile: negative power target");
    }

    // Mixed operation: ramps, holds at several power levels, one shutdown.
    // The base cycle is repeated and the final segment trimmed so the
    // segments tile `duration` exactly.
    static OperationProfile desk_training(std::size_t duration, std::uint64_t seed);
    // A short mid-operation excerpt used for 300 s evaluation frames.
    static OperationProfile desk_test(std::size_t duration, std::uint64_t seed);

    static OperationProfile with_default_channels(std::uint64_t seed) {
        OperationProfile p;
        p.seed = seed;
        p.noise = {{"ram_pool", 0.15}, {"ram_wtr", 0.12},        {"ram_con", 0.10},
                   {"cam", 0.08},      {"neutron_counts", 0.02}, {"neutron_flux", 0.5}};
        p.baselines = {{"ram_pool", 2.0}, {"ram_wtr", 3.0}, {"ram_con", 2.5}, {"cam", 1.8}};
        p.log_gain = {{"ram_pool", 1.5}, {"ram_wtr", 0.05}, {"ram_con", 0.05}, {"cam", 0.02}};
        return p;
    }
};

inline OperationProfile OperationProfile::desk_training(std::size_t duration, std::uint64_t seed) {
    OperationProfile p = with_default_channels(seed);
    p.duration = duration;
    const std::vector<PowerSegment> cycle = {
        {PowerSegment::Kind::Ramp, 0.3, 150},  {PowerSegment::Kind::Hold, 0.0, 250},
        {PowerSegment::Kind::Ramp, 0.7, 150},  {PowerSegment::Kind::Hold, 0.0, 250},
        {PowerSegment::Kind::Ramp, 1.0, 100},  {PowerSegment::Kind::Hold, 0.0, 300},
        {PowerSegment::Kind::Ramp, 0.5, 100},  {PowerSegment::Kind::Hold, 0.0, 100},
        {PowerSegment::Kind::Shutdown, 0.0, 100}};
    std::size_t left = duration;
    while (left > 0) {
        for (const auto& s : cycle) {
            if (left == 0) break;
            PowerSegment seg = s;
            seg.duration = std::min(seg.duration, left);
            p.segments.push_back(seg);
            left -= seg.duration;
        }
    }
    return p;
}

inline OperationProfile OperationProfile::desk_test(std::size_t duration, std::uint64_t seed) {
    OperationProfile p = with_default_channels(seed);
    p.duration = duration;
    p.initial_level = 0.6;
    const std::size_t q = duration / 6;
    p.segments = {{PowerSegment::Kind::Hold, 0.0, 2 * q},
                  {PowerSegment::Kind::Ramp, 0.9, q},
                  {PowerSegment::Kind::Hold, 0.0, 2 * q},
                  {PowerSegment::Kind::Ramp, 0.7, duration - 5 * q}};
    return p;
}

// Piecewise power trajectory in fractions of full power.
inline std::vector<double> power_trajectory(const OperationProfile& p) {
    p.validate();
    std::vector<double> power;
    power.reserve(p.duration);
    double level = p.initial_level;
    for (const auto& seg : p.segments) {
        const double start_level = level;
        for (std::size_t t = 0; t < seg.duration; ++t) {
            const double u = static_cast<double>(t + 1) / static_cast<double>(seg.duration);
            double v = start_level;
            switch (seg.kind) {
                case PowerSegment::Kind::Ramp:
                    v = start_level + (seg.target - start_level) * u;
                    break;
                case PowerSegment::Kind::Hold:
                    v = start_level;
                    break;
                case PowerSegment::Kind::Shutdown:
                    v = start_level * std::exp(-5.0 * u);
                    break;
            }
            power.push_back(std::max(0.0, v));
            level = v;
        }
    }
    return power;
}

struct GenResult {
    SignalFrame frame;
    ScalerBounds bounds;
};

// Normal telemetry. neutron_counts tracks the power trajectory with
// multiplicative noise; neutron_flux is the power in percent plus noise;
// ram_pool couples to log10(1+counts); the other RAMs sit on their source
// baselines with weak coupling and independent noise.
inline GenResult gen_normal(const OperationProfile& p) {
    const auto power = power_trajectory(p);
    const auto& names = default_channels();
    SignalFrame f;
    f.channels = names;
    f.timestamps.resize(p.duration);
    for (std::size_t t = 0; t < p.duration; ++t) f.timestamps[t] = static_cast<std::int64_t>(t);
    f.values = Matrix(p.duration, names.size());

    Rng rng(p.seed);
    auto noise_of = [&](const std::string& ch) {
        auto it = p.noise.find(ch);
        return it == p.noise.end() ? 0.0 : it->second;
    };
    auto base_of = [&](const std::string& ch) {
        auto it = p.baselines.find(ch);
        return it == p.baselines.end() ? 0.0 : it->second;
    };
    auto gain_of = [&](const std::string& ch) {
        auto it = p.log_gain.find(ch);
        return it == p.log_gain.end() ? 0.0 : it->second;
    };

    const std::size_t i_counts = f.channel_index("neutron_counts");
    const std::size_t i_flux = f.channel_index("neutron_flux");
    for (std::size_t t = 0; t < p.duration; ++t) {
        const double counts_clean = power[t] * p.full_power_counts;
        double counts = counts_clean;
        if (noise_of("neutron_counts") > 0.0)
            counts = std::max(0.0, counts_clean * (1.0 + noise_of("neutron_counts") * rng.normal()));
        f.values(t, i_counts) = counts;
        double flux = 100.0 * power[t];
        if (noise_of("neutron_flux") > 0.0) flux += noise_of("neutron_flux") * rng.normal();
        f.values(t, i_flux) = flux;
        const double logc = std::log10(1.0 + counts);
        for (const std::string ram : {"ram_pool", "ram_wtr", "ram_con", "cam"}) {
            const std::size_t i = f.channel_index(ram);
            double v = base_of(ram) + gain_of(ram) * logc;
            if (noise_of(ram) > 0.0) v += noise_of(ram) * rng.normal();
            f.values(t, i) = v;
        }
    }
    f.ensure_mask();

    ScalerBounds b;
    b.provenance = "synthetic profile seed=" + std::to_string(p.seed) +
                   " duration=" + std::to_string(p.duration) + "s";
    for (std::size_t c = 0; c < names.size(); ++c) {
        double lo = f.values(0, c), hi = f.values(0, c);
        for (std::size_t t = 0; t < p.duration; ++t) {
            lo = std::min(lo, f.values(t, c));
            hi = std::max(hi, f.values(t, c));
        }
        const double range = std::max(hi - lo, 1e-9);
        b.channels[names[c]] = {lo - p.bounds_margin_lo * range, hi + p.bounds_margin_hi * range};
    }
    return {std::move(f), std::move(b)};
}

struct InjectionSpec {
    enum class Kind { Drift, Spike };
    enum class Shape { Linear, Quadratic };
    Kind kind = Kind::Spike;
    std::string channel = "ram_pool";
    std::size_t start = 0;
    std::size_t duration = 0;
    // Drift: per-second slope (final offset = amplitude * (duration-1)).
    // Spike: plateau height in raw channel units.
    double amplitude = 0.0;
    Shape shape = Shape::Linear;
    bool hard_edges = false;  // spikes: skip the 1-sample ramp-in/out

    void validate(const SignalFrame& f) const {
        f.channel_index(channel);  // throws on unknown channel
        if (duration == 0) throw std::domain_error("injection: zero duration");
        if (start + duration > f.length())
            throw std::domain_error("injection: [" + std::to_string(start) + "," +
                                    std::to_string(start + duration) + ") exceeds frame length " +
                                    std::to_string(f.length()));
        if (!std::isfinite(amplitude)) throw std::domain_error("injection: non-finite amplitude");
    }
};

inline SignalFrame inject_drift(const SignalFrame& frame, const InjectionSpec& spec) {
    if (spec.kind != InjectionSpec::Kind::Drift)
        throw std::domain_error("inject_drift: spec kind is not drift");
    spec.validate(frame);
    SignalFrame out = frame;
    out.ensure_mask();
    const std::size_t ch = out.channel_index(spec.channel);
    if (spec.amplitude == 0.0)
        out.log.push_back("inject_drift: zero slope on " + spec.channel +
                          " leaves values unchanged");
    const double denom = spec.duration > 1 ? static_cast<double>(spec.duration - 1) : 1.0;
    for (std::size_t t = 0; t < spec.duration; ++t) {
        const auto dt = static_cast<double>(t);
        double offset = spec.amplitude * dt;
        if (spec.shape == InjectionSpec::Shape::Quadratic) offset = spec.amplitude * dt * dt / denom;
        out.values(spec.start + t, ch) += offset;
        out.mask[(spec.start + t) * out.feature_count() + ch] = 1;
    }
    return out;
}

inline SignalFrame inject_spike(const SignalFrame& frame, const InjectionSpec& spec) {
    if (spec.kind != InjectionSpec::Kind::Spike)
        throw std::domain_error("inject_spike: spec kind is not spike");
    spec.validate(frame);
    SignalFrame out = frame;
    out.ensure_mask();
    const std::size_t ch = out.channel_index(spec.channel);
    for (std::size_t t = 0; t < spec.duration; ++t) {
        double offset = spec.amplitude;
        // 1-sample linear ramp edges unless the spike is too short for them.
        if (!spec.hard_edges && spec.duration >= 3 &&
            (t == 0 || t + 1 == spec.duration))
            offset *= 0.5;
        out.values(spec.start + t, ch) += offset;
        out.mask[(spec.start + t) * out.feature_count() + ch] = 1;
    }
    return out;
}

// All-or-nothing: every spec is validated against the input frame before any
// mutation. Masks accumulate as the union across specs.
inline SignalFrame inject_multi(const SignalFrame& frame, const std::vector<InjectionSpec>& specs) {
    for (const auto& s : specs) s.validate(frame);
    SignalFrame out = frame;
    for (const auto& s : specs)
        out = (s.kind == InjectionSpec::Kind::Drift) ? inject_drift(out, s) : inject_spike(out, s);
    return out;
}

// ---- default desk-scale scenarios -----------------------------------------

inline double bounds_range(const ScalerBounds& b, const std::string& ch) {
    const auto& mm = b.at(ch);
    return mm.hi - mm.lo;
}

// Linear drift on ram_pool across the whole frame; total offset ~35% of the
// scaler range so the early readings stay inside normal variation and the
// late ones leave it.
inline InjectionSpec default_drift_spec(const ScalerBounds& bounds, std::size_t frame_len,
                                        const std::string& channel = "ram_pool") {
    InjectionSpec s;
    s.kind = InjectionSpec::Kind::Drift;
    s.channel = channel;
    s.start = 0;
    s.duration = frame_len;
    const double total = 0.35 * bounds_range(bounds, channel);
    s.amplitude = frame_len > 1 ? total / static_cast<double>(frame_len - 1) : total;
    return s;
}

// 50 s spike on ram_pool between 150 and 200 s, slightly outside the normal
// operating range.
inline InjectionSpec default_spike_spec(const ScalerBounds& bounds,
                                        const std::string& channel = "ram_pool") {
    InjectionSpec s;
    s.kind = InjectionSpec::Kind::Spike;
    s.channel = channel;
    s.start = 150;
    s.duration = 50;
    s.amplitude = 0.18 * bounds_range(bounds, channel);
    return s;
}

// Concurrent/overlapping layout: inside the 20 s window starting at 180 s,
// ram_wtr is falsified for the whole window, ram_con for half of it and cam
// for the first four seconds; ram_pool carries a separate earlier spike.
inline std::vector<InjectionSpec> default_concurrent_specs(const ScalerBounds& bounds) {
    auto spike = [&](const std::string& ch, std::size_t start, std::size_t dur) {
        InjectionSpec s;
        s.kind = InjectionSpec::Kind::Spike;
        s.channel = ch;
        s.start = start;
        s.duration = dur;
        s.amplitude = 0.18 * bounds_range(bounds, ch);
        return s;
    };
    return {spike("ram_pool", 45, 25), spike("ram_wtr", 180, 20), spike("ram_con", 185, 10),
            spike("cam", 180, 4)};
}

// ---- JSON ------------------------------------------------------------------

inline nlohmann::json profile_to_json(const OperationProfile& p) {
    nlohmann::json j;
    j["duration"] = p.duration;
    j["initial_level"] = p.initial_level;
    j["full_power_counts"] = p.full_power_counts;
    j["seed"] = p.seed;
    j["bounds_margin_lo"] = p.bounds_margin_lo;
    j["bounds_margin_hi"] = p.bounds_margin_hi;
    j["noise"] = p.noise;
    j["baselines"] = p.baselines;
    j["log_gain"] = p.log_gain;
    j["segments"] = nlohmann::json::array();
    for (const auto& s : p.segments) {
        const char* kind = s.kind == PowerSegment::Kind::Ramp      ? "ramp"
                           : s.kind == PowerSegment::Kind::Hold    ? "hold"
                                                                   : "shutdown";
        j["segments"].push_back({{"kind", kind}, {"target", s.target}, {"duration", s.duration}});
    }
    return j;
}

inline OperationProfile profile_from_json(const nlohmann::json& j) {
    OperationProfile p = OperationProfile::with_default_channels(j.value("seed", 0ULL));
    p.duration = j.at("duration").get<std::size_t>();
    p.initial_level = j.value("initial_level", 0.0);
    p.full_power_counts = j.value("full_power_counts", 1.0e5);
    p.bounds_margin_lo = j.value("bounds_margin_lo", 0.10);
    p.bounds_margin_hi = j.value("bounds_margin_hi", 0.30);
    if (j.contains("noise")) p.noise = j["noise"].get<std::map<std::string, double>>();
    if (j.contains("baselines")) p.baselines = j["baselines"].get<std::map<std::string, double>>();
    if (j.contains("log_gain")) p.log_gain = j["log_gain"].get<std::map<std::string, double>>();
    p.segments.clear();
    for (const auto& js : j.at("segments")) {
        PowerSegment s;
        const std::string kind = js.at("kind").get<std::string>();
        if (kind == "ramp")
            s.kind = PowerSegment::Kind::Ramp;
        else if (kind == "hold")
            s.kind = PowerSegment::Kind::Hold;
        else if (kind == "shutdown")
            s.kind = PowerSegment::Kind::Shutdown;
        else
            throw parse_error("profile json: unknown segment kind '" + kind + "'");
        s.target = js.value("target", 0.0);
        s.duration = js.at("duration").get<std::size_t>();
        p.segments.push_back(s);
    }
    p.validate();
    return p;
}

inline nlohmann::json injections_to_json(const std::vector<InjectionSpec>& specs) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& s : specs) {
        nlohmann::json j;
        j["kind"] = s.kind == InjectionSpec::Kind::Drift ? "drift" : "spike";
        j["channel"] = s.channel;
        j["start"] = s.start;
        j["duration"] = s.duration;
        j["amplitude"] = s.amplitude;
        j["shape"] = s.shape == InjectionSpec::Shape::Linear ? "linear" : "quadratic";
        j["hard_edges"] = s.hard_edges;
        arr.push_back(j);
    }
    return arr;
}

inline std::vector<InjectionSpec> injections_from_json(const nlohmann::json& arr) {
    std::vector<InjectionSpec> specs;
    for (const auto& j : arr) {
        InjectionSpec s;
        const std::string kind = j.at("kind").get<std::string>();
        if (kind == "drift")
            s.kind = InjectionSpec::Kind::Drift;
        else if (kind == "spike")
            s.kind = InjectionSpec::Kind::Spike;
        else
            throw parse_error("injection json: unknown kind '" + kind + "'");
        s.channel = j.at("channel").get<std::string>();
        s.start = j.at("start").get<std::size_t>();
        s.duration = j.at("duration").get<std::size_t>();
        s.amplitude = j.at("amplitude").get<double>();
        const std::string shape = j.value("shape", "linear");
        s.shape = shape == "quadratic" ? InjectionSpec::Shape::Quadratic
                                       : InjectionSpec::Shape::Linear;
        s.hard_edges = j.value("hard_edges", false);
        specs.push_back(s);
    }
    return specs;
}

}  // namespace attnae
