#pragma once

// SignalFrame: timestamped multichannel series at 1 s cadence, with the six
// reactor channels and an optional per-cell ground-truth anomaly mask.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "attnae/errors.hpp"
#include "attnae/matrix.hpp"
#include "attnae/textio.hpp"

namespace attnae {

inline const std::vector<std::string>& default_channels() {
    static const std::vector<std::string> names = {
        "ram_pool", "ram_wtr", "ram_con", "cam", "neutron_counts", "neutron_flux"};
    return names;
}

struct SignalFrame {
    std::vector<std::int64_t> timestamps;      // strictly increasing, unit spacing
    std::vector<std::string> channels;         // column names, unique
    Matrix values;                             // N x F
    std::vector<std::uint8_t> mask;            // N*F ground truth; empty = none
    std::vector<std::string> log;              // ingest / generation notes

    std::size_t length() const { return timestamps.size(); }
    std::size_t feature_count() const { return channels.size(); }

    bool masked(std::size_t row, std::size_t ch) const {
        return !mask.empty() && mask[row * channels.size() + ch] != 0;
    }
    void ensure_mask() {
        if (mask.empty()) mask.assign(length() * feature_count(), 0);
    }

    std::size_t channel_index(const std::string& name) const {
        for (std::size_t i = 0; i < channels.size(); ++i)
            if (channels[i] == name) return i;
        throw std::domain_error("unknown channel: " + name);
    }
};

inline void write_frame_csv(const SignalFrame& f, const std::string& path) {
    auto out = open_output(path);
    out << "timestamp";
    for (const auto& c : f.channels) out << "," << c;
    out << "\n";
    for (std::size_t r = 0; r < f.length(); ++r) {
        out << f.timestamps[r];
        for (std::size_t c = 0; c < f.feature_count(); ++c)
            out << "," << format_double(f.values(r, c));
        out << "\n";
    }
}

// Mask CSV: header of channel names, one 0/1 row per second.
inline void write_mask_csv(const SignalFrame& f, const std::string& path) {
    auto out = open_output(path);
    for (std::size_t c = 0; c < f.feature_count(); ++c)
        out << (c ? "," : "") << f.channels[c];
    out << "\n";
    const std::size_t F = f.feature_count();
    for (std::size_t r = 0; r < f.length(); ++r) {
        for (std::size_t c = 0; c < F; ++c)
            out << (c ? "," : "") << (f.masked(r, c) ? 1 : 0);
        out << "\n";
    }
}

// Returns mask cells (N x F flattened) plus the channel order from the header.
inline std::vector<std::uint8_t> read_mask_csv(const std::string& path,
                                               const std::vector<std::string>& channels,
                                               std::size_t* rows_out = nullptr) {
    auto in = open_input(path);
    std::string line;
    if (!std::getline(in, line)) throw parse_error("mask csv: empty file " + path);
    const auto header = split_csv_line(line);
    if (header.size() != channels.size())
        throw parse_error("mask csv: expected " + std::to_string(channels.size()) +
                          " columns, got " + std::to_string(header.size()));
    std::vector<std::size_t> order(channels.size());
    for (std::size_t c = 0; c < channels.size(); ++c) {
        bool found = false;
        for (std::size_t k = 0; k < header.size(); ++k)
            if (header[k] == channels[c]) {
                order[c] = k;
                found = true;
                break;
            }
        if (!found) throw parse_error("mask csv: missing column " + channels[c]);
    }
    std::vector<std::uint8_t> mask;
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto cells = split_csv_line(line);
        if (cells.size() != channels.size())
            throw parse_error("mask csv: row " + std::to_string(rows + 2) + " has " +
                              std::to_string(cells.size()) + " cells");
        for (std::size_t c = 0; c < channels.size(); ++c) {
            const std::string& s = cells[order[c]];
            if (s != "0" && s != "1")
                throw parse_error("mask csv: row " + std::to_string(rows + 2) +
                                  " column " + channels[c] + ": expected 0/1, got '" + s + "'");
            mask.push_back(s == "1" ? 1 : 0);
        }
        ++rows;
    }
    if (rows_out) *rows_out = rows;
    return mask;
}

}  // namespace attnae
