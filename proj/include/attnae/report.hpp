#pragma once

// Report bundle: deterministic CSVs (the tested artifacts) plus SVG heatmap
// renderings of per-window temporal weights. Layout:
//   <dir>/summary.json
//   <dir>/events.csv
//   <dir>/feature_weights.csv      one row per window
//   <dir>/temporal_means.csv       per-channel aggregate bar table
//   <dir>/heatmaps/window_<start>.csv|.svg

#include <algorithm>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "attnae/diagnostics.hpp"
#include "attnae/textio.hpp"

namespace attnae {

inline std::string svg_color(double v, double lo, double hi) {
    // blue (low) -> white (mid) -> red (high)
    double t = hi > lo ? (v - lo) / (hi - lo) : 0.5;
    t = std::clamp(t, 0.0, 1.0);
    int r, g, b;
    if (t < 0.5) {
        const double u = t / 0.5;
        r = static_cast<int>(59 + (255 - 59) * u);
        g = static_cast<int>(76 + (255 - 76) * u);
        b = static_cast<int>(192 + (255 - 192) * u);
    } else {
        const double u = (t - 0.5) / 0.5;
        r = static_cast<int>(255 - (255 - 180) * u);
        g = static_cast<int>(255 - (255 - 4) * u);
        b = static_cast<int>(255 - (255 - 38) * u);
    }
    char buf[8];
    std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", r, g, b);
    return buf;
}

inline void write_heatmap_svg(const Matrix& m, const std::vector<std::string>& col_labels,
                              std::size_t first_row_label, const std::string& path) {
    const std::size_t T = m.rows(), F = m.cols();
    const int cell = 22, left = 60, top = 30;
    const int width = left + static_cast<int>(F) * cell + 10;
    const int height = top + static_cast<int>(T) * cell + 10;
    double lo = m(0, 0), hi = m(0, 0);
    for (double v : m.raw()) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    auto out = open_output(path);
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\" font-family=\"monospace\" font-size=\"10\">\n";
    for (std::size_t f = 0; f < F; ++f)
        out << "<text x=\"" << left + static_cast<int>(f) * cell + 2 << "\" y=\"" << top - 6
            << "\" transform=\"rotate(-30 " << left + static_cast<int>(f) * cell + 2 << ","
            << top - 6 << ")\">" << col_labels[f] << "</text>\n";
    for (std::size_t t = 0; t < T; ++t) {
        out << "<text x=\"4\" y=\"" << top + static_cast<int>(t) * cell + 14 << "\">t="
            << first_row_label + t << "</text>\n";
        for (std::size_t f = 0; f < F; ++f) {
            out << "<rect x=\"" << left + static_cast<int>(f) * cell << "\" y=\""
                << top + static_cast<int>(t) * cell << "\" width=\"" << cell - 1
                << "\" height=\"" << cell - 1 << "\" fill=\"" << svg_color(m(t, f), lo, hi)
                << "\"><title>" << col_labels[f] << " t=" << first_row_label + t << " w="
                << format_double(m(t, f)) << "</title></rect>\n";
        }
    }
    out << "</svg>\n";
}

inline void write_events_csv(const std::vector<AnomalyEvent>& events, const std::string& path) {
    auto out = open_output(path);
    out << "channel,onset,offset,duration,severity,feature_excess,temporal_deficit\n";
    for (const auto& e : events)
        out << e.channel << "," << e.onset << "," << e.offset << "," << e.duration() << ","
            << format_double(e.severity) << "," << format_double(e.feature_excess) << ","
            << format_double(e.temporal_deficit) << "\n";
}

inline std::vector<AnomalyEvent> read_events_csv(const std::string& path) {
    auto in = open_input(path);
    std::string line;
    if (!std::getline(in, line)) throw parse_error("events csv: empty file " + path);
    std::vector<AnomalyEvent> events;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto cells = split_csv_line(line);
        if (cells.size() != 7)
            throw parse_error("events csv: line " + std::to_string(lineno) + " malformed");
        AnomalyEvent e;
        e.channel = cells[0];
        e.onset = static_cast<std::size_t>(parse_double(cells[1], "onset"));
        e.offset = static_cast<std::size_t>(parse_double(cells[2], "offset"));
        e.severity = parse_double(cells[4], "severity");
        e.feature_excess = parse_double(cells[5], "feature_excess");
        e.temporal_deficit = parse_double(cells[6], "temporal_deficit");
        events.push_back(e);
    }
    return events;
}

struct ReportOptions {
    std::vector<std::size_t> heatmap_windows;  // window start seconds to render
    std::size_t max_heatmaps = 40;
};

// Picks which windows to render: those overlapping events, else a spread
// sample across the frame.
inline std::vector<std::size_t> select_heatmap_windows(const std::vector<AnomalyEvent>& events,
                                                       const std::vector<std::size_t>& starts,
                                                       std::size_t window_len,
                                                       std::size_t max_count) {
    std::vector<std::size_t> picked;
    for (std::size_t start : starts) {
        bool overlaps = false;
        for (const auto& ev : events)
            if (start < ev.offset && start + window_len > ev.onset) overlaps = true;
        if (overlaps) picked.push_back(start);
    }
    if (picked.empty() && !starts.empty()) {
        const std::size_t n = std::min<std::size_t>(8, starts.size());
        for (std::size_t k = 0; k < n; ++k) picked.push_back(starts[k * starts.size() / n]);
    }
    if (picked.size() > max_count) {
        std::vector<std::size_t> thin;
        for (std::size_t k = 0; k < max_count; ++k)
            thin.push_back(picked[k * picked.size() / max_count]);
        picked = thin;
    }
    return picked;
}

inline void emit_report(const std::vector<AnomalyEvent>& events, const ScoreResult& score,
                        const BaselineStats& baseline, const DetectionPolicy& policy,
                        const std::string& dir, ReportOptions opts = {}) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    const auto& channels = baseline.channels;
    const std::size_t F = channels.size();

    write_events_csv(events, dir + "/events.csv");

    {
        auto out = open_output(dir + "/feature_weights.csv");
        out << "window_start";
        for (const auto& c : channels) out << "," << c;
        out << "\n";
        for (std::size_t wi = 0; wi < score.reports.size(); ++wi) {
            out << score.window_starts[wi];
            for (std::size_t f = 0; f < F; ++f)
                out << "," << format_double(score.reports[wi].feature_weights[f]);
            out << "\n";
        }
    }
    {
        const auto agg = aggregate_reports(score.reports);
        auto out = open_output(dir + "/temporal_means.csv");
        out << "channel,mean_feature_weight,mean_temporal_weight\n";
        for (std::size_t f = 0; f < F; ++f)
            out << channels[f] << "," << format_double(agg.mean_feature[f]) << ","
                << format_double(agg.mean_temporal[f]) << "\n";
    }

    auto render = opts.heatmap_windows;
    if (render.empty())
        render = select_heatmap_windows(events, score.window_starts, score.window_len,
                                        opts.max_heatmaps);
    for (std::size_t start : render) {
        const auto it = std::find(score.window_starts.begin(), score.window_starts.end(), start);
        if (it == score.window_starts.end()) continue;
        const auto wi = static_cast<std::size_t>(it - score.window_starts.begin());
        const Matrix& A = score.reports[wi].temporal;
        const std::string base = dir + "/heatmaps/window_" + std::to_string(start);
        {
            auto out = open_output(base + ".csv");
            for (std::size_t f = 0; f < F; ++f) out << (f ? "," : "") << channels[f];
            out << "\n";
            for (std::size_t t = 0; t < A.rows(); ++t) {
                for (std::size_t f = 0; f < F; ++f)
                    out << (f ? "," : "") << format_double(A(t, f));
                out << "\n";
            }
        }
        write_heatmap_svg(A, channels, start, base + ".svg");
    }

    {
        nlohmann::json j;
        j["events"] = nlohmann::json::array();
        for (const auto& e : events)
            j["events"].push_back({{"channel", e.channel},
                                   {"onset", e.onset},
                                   {"offset", e.offset},
                                   {"duration", e.duration()},
                                   {"severity", e.severity},
                                   {"feature_excess", e.feature_excess},
                                   {"temporal_deficit", e.temporal_deficit}});
        j["policy"] = {{"k_feature", policy.k_feature},
                       {"k_temporal", policy.k_temporal},
                       {"hysteresis_gap", policy.hysteresis_gap},
                       {"min_event_len", policy.min_event_len},
                       {"vote_threshold", policy.vote_threshold}};
        j["baseline"] = baseline_to_json(baseline);
        j["windows_scored"] = score.reports.size();
        j["frame_length"] = score.length;
        auto out = open_output(dir + "/summary.json");
        out << j.dump(2) << "\n";
    }
}

}  // namespace attnae
