#pragma once

// Ingestion, min-max scaling with persisted bounds, stride-1 windowing and
// the chronological train/validation split with a guard gap.

#include <algorithm>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "attnae/frame.hpp"
#include "attnae/matrix.hpp"
#include "attnae/textio.hpp"

namespace attnae {

struct ScalerBounds {
    struct MinMax {
        double lo = 0.0;
        double hi = 1.0;
    };
    std::map<std::string, MinMax> channels;
    std::string provenance;

    const MinMax& at(const std::string& name) const {
        auto it = channels.find(name);
        if (it == channels.end()) throw std::domain_error("bounds missing channel: " + name);
        return it->second;
    }

    void validate() const {
        for (const auto& [name, mm] : channels)
            if (!(mm.hi > mm.lo))
                throw std::domain_error("degenerate bounds for " + name + ": max <= min");
    }
};

inline nlohmann::json bounds_to_json(const ScalerBounds& b) {
    nlohmann::json j;
    j["provenance"] = b.provenance;
    for (const auto& [name, mm] : b.channels)
        j["channels"][name] = {{"min", mm.lo}, {"max", mm.hi}};
    return j;
}

inline ScalerBounds bounds_from_json(const nlohmann::json& j) {
    ScalerBounds b;
    b.provenance = j.value("provenance", "");
    if (!j.contains("channels")) throw parse_error("bounds json: missing 'channels'");
    for (auto it = j["channels"].begin(); it != j["channels"].end(); ++it)
        b.channels[it.key()] = {it.value().at("min").get<double>(),
                                it.value().at("max").get<double>()};
    b.validate();
    return b;
}

inline void save_bounds(const ScalerBounds& b, const std::string& path) {
    auto out = open_output(path);
    out << bounds_to_json(b).dump(2) << "\n";
}

inline ScalerBounds load_bounds(const std::string& path) {
    const auto text = read_file(path);
    nlohmann::json j = nlohmann::json::parse(text, nullptr, true);
    return bounds_from_json(j);
}

// Parses a frame CSV. Gaps of at most `max_gap` missing seconds are linearly
// interpolated and noted in the frame log; larger gaps, non-monotone
// timestamps, missing columns and non-numeric cells are hard errors.
inline SignalFrame ingest_csv(const std::string& path,
                              const std::vector<std::string>& schema = default_channels(),
                              std::size_t max_gap = 5) {
    auto in = open_input(path);
    std::string line;
    if (!std::getline(in, line)) throw parse_error("frame csv: empty file " + path);
    const auto header = split_csv_line(line);
    if (header.empty() || header[0] != "timestamp")
        throw parse_error("frame csv: first column must be 'timestamp' in " + path);
    std::vector<std::size_t> order(schema.size());
    for (std::size_t c = 0; c < schema.size(); ++c) {
        bool found = false;
        for (std::size_t k = 1; k < header.size(); ++k)
            if (header[k] == schema[c]) {
                order[c] = k;
                found = true;
                break;
            }
        if (!found) throw parse_error("frame csv: missing column '" + schema[c] + "' in " + path);
    }
    if (header.size() != schema.size() + 1)
        throw parse_error("frame csv: unexpected extra columns in " + path);

    std::vector<std::int64_t> ts;
    std::vector<Vec> rows;
    std::size_t lineno = 1;
    std::size_t interpolated = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto cells = split_csv_line(line);
        if (cells.size() != header.size())
            throw parse_error("frame csv: line " + std::to_string(lineno) + " has " +
                              std::to_string(cells.size()) + " cells, expected " +
                              std::to_string(header.size()));
        const std::string where_ts = "line " + std::to_string(lineno) + " timestamp";
        const double t_raw = parse_double(cells[0], where_ts.c_str());
        const auto t = static_cast<std::int64_t>(t_raw);
        Vec row(schema.size());
        for (std::size_t c = 0; c < schema.size(); ++c) {
            const std::string where =
                "line " + std::to_string(lineno) + " column " + schema[c];
            row[c] = parse_double(cells[order[c]], where.c_str());
            if (!std::isfinite(row[c]))
                throw parse_error("frame csv: non-finite value at " + where);
        }
        if (!ts.empty()) {
            if (t <= ts.back())
                throw parse_error("frame csv: non-monotone timestamp at line " +
                                  std::to_string(lineno));
            const auto gap = static_cast<std::size_t>(t - ts.back()) - 1;
            if (gap > max_gap)
                throw parse_error("frame csv: gap of " + std::to_string(gap) +
                                  " samples before line " + std::to_string(lineno) +
                                  " exceeds limit " + std::to_string(max_gap));
            if (gap > 0) {
                const Vec prev = rows.back();
                for (std::size_t g = 1; g <= gap; ++g) {
                    const double w = static_cast<double>(g) / static_cast<double>(gap + 1);
                    Vec fill(schema.size());
                    for (std::size_t c = 0; c < schema.size(); ++c)
                        fill[c] = prev[c] * (1.0 - w) + row[c] * w;
                    ts.push_back(ts.back() + 1);
                    rows.push_back(std::move(fill));
                }
                interpolated += gap;
            }
        }
        ts.push_back(t);
        rows.push_back(std::move(row));
    }
    SignalFrame f;
    f.channels = schema;
    f.timestamps = std::move(ts);
    f.values = Matrix(rows.size(), schema.size());
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < schema.size(); ++c) f.values(r, c) = rows[r][c];
    if (interpolated > 0)
        f.log.push_back("ingest: interpolated " + std::to_string(interpolated) + " missing rows");
    return f;
}

inline SignalFrame scale(const SignalFrame& frame, const ScalerBounds& bounds) {
    bounds.validate();
    SignalFrame out = frame;
    std::size_t clamped = 0;
    for (std::size_t c = 0; c < frame.feature_count(); ++c) {
        const auto& mm = bounds.at(frame.channels[c]);
        const double span = mm.hi - mm.lo;
        for (std::size_t r = 0; r < frame.length(); ++r) {
            double v = (frame.values(r, c) - mm.lo) / span;
            if (v < 0.0) {
                v = 0.0;
                ++clamped;
            } else if (v > 1.0) {
                v = 1.0;
                ++clamped;
            }
            out.values(r, c) = v;
        }
    }
    if (clamped > 0)
        out.log.push_back("scale: clamped " + std::to_string(clamped) + " out-of-bounds cells");
    return out;
}

inline SignalFrame unscale(const SignalFrame& frame, const ScalerBounds& bounds) {
    bounds.validate();
    SignalFrame out = frame;
    for (std::size_t c = 0; c < frame.feature_count(); ++c) {
        const auto& mm = bounds.at(frame.channels[c]);
        for (std::size_t r = 0; r < frame.length(); ++r)
            out.values(r, c) = mm.lo + frame.values(r, c) * (mm.hi - mm.lo);
    }
    return out;
}

struct WindowBatch {
    std::vector<Matrix> windows;      // each T x F
    std::vector<std::size_t> starts;  // row index of each window's first second
    std::size_t window_len = 0;
    std::size_t features = 0;
    std::string origin;

    std::size_t count() const { return windows.size(); }
    bool empty() const { return windows.empty(); }
};

inline WindowBatch make_windows(const SignalFrame& frame, std::size_t T, std::size_t stride = 1) {
    if (T == 0 || stride == 0) throw std::domain_error("make_windows: T and stride must be >= 1");
    const std::size_t N = frame.length();
    if (N < T)
        throw std::domain_error("make_windows: frame length " + std::to_string(N) +
                                " < window length " + std::to_string(T));
    WindowBatch wb;
    wb.window_len = T;
    wb.features = frame.feature_count();
    for (std::size_t start = 0; start + T <= N; start += stride) {
        Matrix w(T, wb.features);
        for (std::size_t r = 0; r < T; ++r)
            for (std::size_t c = 0; c < wb.features; ++c) w(r, c) = frame.values(start + r, c);
        wb.windows.push_back(std::move(w));
        wb.starts.push_back(start);
    }
    return wb;
}

inline SignalFrame frame_slice(const SignalFrame& f, std::size_t begin, std::size_t end) {
    SignalFrame out;
    out.channels = f.channels;
    out.timestamps.assign(f.timestamps.begin() + begin, f.timestamps.begin() + end);
    out.values = Matrix(end - begin, f.feature_count());
    for (std::size_t r = begin; r < end; ++r)
        for (std::size_t c = 0; c < f.feature_count(); ++c)
            out.values(r - begin, c) = f.values(r, c);
    if (!f.mask.empty())
        out.mask.assign(f.mask.begin() + begin * f.feature_count(),
                        f.mask.begin() + end * f.feature_count());
    return out;
}

// Chronological 80/20 split with `guard` rows dropped between the parts so
// no stride-1 window straddles the boundary.
inline std::pair<SignalFrame, SignalFrame> split_train_val(const SignalFrame& frame,
                                                           double fraction,
                                                           std::size_t guard) {
    if (!(fraction > 0.0 && fraction < 1.0))
        throw std::domain_error("split_train_val: fraction must be in (0,1)");
    const std::size_t N = frame.length();
    const auto cut = static_cast<std::size_t>(fraction * static_cast<double>(N));
    if (cut < guard + 1 || cut + guard >= N)
        throw std::domain_error("split_train_val: frame too short for split with guard");
    SignalFrame train = frame_slice(frame, 0, cut);
    SignalFrame val = frame_slice(frame, cut + guard, N);
    if (train.length() < guard || val.length() < guard)
        throw std::domain_error("split_train_val: parts shorter than one window");
    return {std::move(train), std::move(val)};
}

}  // namespace attnae
