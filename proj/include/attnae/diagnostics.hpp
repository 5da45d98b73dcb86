#pragma once

// Turns attention reports into decisions. Baselines are per-channel means
// and deviations of the attention weights on normal data; scoring flags a
// (second, channel) cell when enough of the stride-1 windows covering that
// second carry evidence against it; events are maximal flagged runs after
// hysteresis merging and a minimum-length filter.
//
// Evidence carried by window w for second s on channel ch (row r = s - start):
//   temporal weight A[r,ch] < tw_mean - k_t * tw_std          (row deficit)
//   OR feature weight fw[ch] > fw_mean + k_f * fw_std
//      AND A[r,ch] < tw_mean                                   (gated excess)
// The feature branch is a window-global signal; gating it on rows that sit
// below the normal temporal mean keeps a 20 s window from smearing a short
// anomaly across its whole span while still letting both mechanisms flag.

#include <algorithm>
#include <string>
#include <vector>

#include <json.hpp>

#include "attnae/attention.hpp"
#include "attnae/errors.hpp"
#include "attnae/model.hpp"
#include "attnae/pipeline.hpp"

namespace attnae {

struct BaselineStats {
    std::vector<std::string> channels;
    Vec fw_mean, fw_std;  // window feature weights
    Vec tw_mean, tw_std;  // per-timestep temporal weights
    std::size_t window_count = 0;
};

struct DetectionPolicy {
    double k_feature = 3.0;
    double k_temporal = 3.0;
    std::size_t hysteresis_gap = 2;   // merge runs separated by <= this many s
    std::size_t min_event_len = 2;    // drop shorter events
    double vote_threshold = 0.5;      // fraction of covering windows, strict >
    std::size_t min_calib_windows = 100;
};

struct AnomalyEvent {
    std::string channel;
    std::size_t onset = 0;   // seconds, inclusive
    std::size_t offset = 0;  // seconds, exclusive
    double severity = 0.0;   // peak normalized deviation inside the event
    double feature_excess = 0.0;
    double temporal_deficit = 0.0;

    std::size_t duration() const { return offset - onset; }
};

inline BaselineStats calibrate(const ModelParams& model, const WindowBatch& wb,
                               const std::vector<std::string>& channels,
                               std::size_t min_windows = 100) {
    if (wb.count() < min_windows)
        throw std::domain_error("calibrate: " + std::to_string(wb.count()) +
                                " windows, need at least " + std::to_string(min_windows));
    const std::size_t F = wb.features;
    BaselineStats b;
    b.channels = channels;
    b.fw_mean.assign(F, 0.0);
    b.fw_std.assign(F, 0.0);
    b.tw_mean.assign(F, 0.0);
    b.tw_std.assign(F, 0.0);
    b.window_count = wb.count();

    Rng unused(0);
    std::vector<AttentionReport> reports;
    reports.reserve(wb.count());
    for (const auto& w : wb.windows) {
        auto r = forward(w, model, Mode::Infer, unused, false);
        reports.push_back(std::move(r.report));
    }
    const double nw = static_cast<double>(reports.size());
    const double nr = nw * static_cast<double>(wb.window_len);
    for (const auto& r : reports) {
        for (std::size_t f = 0; f < F; ++f) b.fw_mean[f] += r.feature_weights[f];
        for (std::size_t t = 0; t < r.temporal.rows(); ++t)
            for (std::size_t f = 0; f < F; ++f) b.tw_mean[f] += r.temporal(t, f);
    }
    for (std::size_t f = 0; f < F; ++f) {
        b.fw_mean[f] /= nw;
        b.tw_mean[f] /= nr;
    }
    for (const auto& r : reports) {
        for (std::size_t f = 0; f < F; ++f) {
            const double d = r.feature_weights[f] - b.fw_mean[f];
            b.fw_std[f] += d * d;
        }
        for (std::size_t t = 0; t < r.temporal.rows(); ++t)
            for (std::size_t f = 0; f < F; ++f) {
                const double d = r.temporal(t, f) - b.tw_mean[f];
                b.tw_std[f] += d * d;
            }
    }
    for (std::size_t f = 0; f < F; ++f) {
        b.fw_std[f] = std::sqrt(b.fw_std[f] / nw);
        b.tw_std[f] = std::sqrt(b.tw_std[f] / nr);
    }
    return b;
}

struct ScoreResult {
    std::size_t length = 0;    // seconds in the frame
    std::size_t features = 0;
    std::size_t window_len = 0;
    std::vector<std::uint8_t> flags;  // length x features
    Matrix fw_z;  // peak feature-weight z-score covering each (s, ch)
    Matrix tw_z;  // peak temporal-deficit z-score covering each (s, ch)
    std::vector<AttentionReport> reports;      // one per window
    std::vector<std::size_t> window_starts;

    bool flagged(std::size_t s, std::size_t ch) const { return flags[s * features + ch] != 0; }
};

inline ScoreResult score_stream(const ModelParams& model, const SignalFrame& scaled,
                                const BaselineStats& baseline, const DetectionPolicy& policy) {
    const std::size_t F = scaled.feature_count();
    const std::size_t T = model.shape.window;
    if (scaled.length() < T)
        throw std::domain_error("score_stream: frame shorter than one window");
    if (baseline.fw_mean.size() != F || baseline.channels != scaled.channels)
        throw std::domain_error("score_stream: baseline/ff channel mismatch");
    for (std::size_t f = 0; f < F; ++f)
        if (baseline.fw_std[f] < 1e-12 || baseline.tw_std[f] < 1e-12)
            throw numeric_error("score_stream: degenerate baseline (zero variance) for channel " +
                                baseline.channels[f]);

    const auto wb = make_windows(scaled, T);
    ScoreResult res;
    res.length = scaled.length();
    res.features = F;
    res.window_len = T;
    res.window_starts = wb.starts;
    res.flags.assign(res.length * F, 0);
    res.fw_z = Matrix(res.length, F);
    res.tw_z = Matrix(res.length, F);
    Matrix votes(res.length, F);
    std::vector<std::size_t> coverage(res.length, 0);

    Rng unused(0);
    res.reports.reserve(wb.count());
    for (std::size_t wi = 0; wi < wb.count(); ++wi) {
        auto fr = forward(wb.windows[wi], model, Mode::Infer, unused, false);
        const auto& rep = fr.report;
        const std::size_t start = wb.starts[wi];
        for (std::size_t r = 0; r < T; ++r) ++coverage[start + r];
        for (std::size_t ch = 0; ch < F; ++ch) {
            const double fwz =
                (rep.feature_weights[ch] - baseline.fw_mean[ch]) / baseline.fw_std[ch];
            const bool fw_excess = fwz > policy.k_feature;
            for (std::size_t r = 0; r < T; ++r) {
                const std::size_t s = start + r;
                const double tw = rep.temporal(r, ch);
                const double twz = (baseline.tw_mean[ch] - tw) / baseline.tw_std[ch];
                const bool deficit = twz > policy.k_temporal;
                const bool gated_excess = fw_excess && tw < baseline.tw_mean[ch];
                if (deficit || gated_excess) votes(s, ch) += 1.0;
                res.fw_z(s, ch) = std::max(res.fw_z(s, ch), fwz);
                res.tw_z(s, ch) = std::max(res.tw_z(s, ch), twz);
            }
        }
        res.reports.push_back(std::move(fr.report));
    }
    for (std::size_t s = 0; s < res.length; ++s)
        for (std::size_t ch = 0; ch < F; ++ch)
            if (coverage[s] > 0 &&
                votes(s, ch) > policy.vote_threshold * static_cast<double>(coverage[s]))
                res.flags[s * F + ch] = 1;
    return res;
}

inline std::vector<AnomalyEvent> segment_events(const ScoreResult& score,
                                                const std::vector<std::string>& channels,
                                                const DetectionPolicy& policy) {
    std::vector<AnomalyEvent> events;
    for (std::size_t ch = 0; ch < score.features; ++ch) {
        // maximal runs of flagged seconds
        std::vector<std::pair<std::size_t, std::size_t>> runs;
        std::size_t s = 0;
        while (s < score.length) {
            if (!score.flagged(s, ch)) {
                ++s;
                continue;
            }
            std::size_t e = s;
            while (e < score.length && score.flagged(e, ch)) ++e;
            runs.emplace_back(s, e);
            s = e;
        }
        // hysteresis: merge runs whose gap is small
        std::vector<std::pair<std::size_t, std::size_t>> merged;
        for (const auto& r : runs) {
            if (!merged.empty() && r.first - merged.back().second <= policy.hysteresis_gap)
                merged.back().second = r.second;
            else
                merged.push_back(r);
        }
        for (const auto& r : merged) {
            if (r.second - r.first < policy.min_event_len) continue;
            AnomalyEvent ev;
            ev.channel = channels[ch];
            ev.onset = r.first;
            ev.offset = r.second;
            for (std::size_t t = r.first; t < r.second; ++t) {
                ev.feature_excess = std::max(ev.feature_excess, score.fw_z(t, ch));
                ev.temporal_deficit = std::max(ev.temporal_deficit, score.tw_z(t, ch));
            }
            ev.severity = std::max(ev.feature_excess, ev.temporal_deficit);
            events.push_back(ev);
        }
    }
    return events;
}

// ---- evaluation ---------------------------------------------------------------

struct ChannelCounts {
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
    double accuracy() const {
        const std::size_t total = tp + fp + tn + fn;
        return total == 0 ? 1.0 : static_cast<double>(tp + tn) / static_cast<double>(total);
    }
};

struct EvalResult {
    std::vector<ChannelCounts> per_channel;
    double overall_accuracy = 1.0;
    std::vector<double> event_iou;  // aligned with the input events
    std::size_t eval_begin = 0, eval_end = 0;
};

inline std::vector<std::pair<std::size_t, std::size_t>> mask_segments(
    const std::vector<std::uint8_t>& mask, std::size_t N, std::size_t F, std::size_t ch) {
    std::vector<std::pair<std::size_t, std::size_t>> segs;
    std::size_t s = 0;
    while (s < N) {
        if (mask[s * F + ch] == 0) {
            ++s;
            continue;
        }
        std::size_t e = s;
        while (e < N && mask[e * F + ch] != 0) ++e;
        segs.emplace_back(s, e);
        s = e;
    }
    return segs;
}

inline double interval_iou(std::size_t a0, std::size_t a1, std::size_t b0, std::size_t b1) {
    const std::size_t inter_lo = std::max(a0, b0);
    const std::size_t inter_hi = std::min(a1, b1);
    const std::size_t inter = inter_hi > inter_lo ? inter_hi - inter_lo : 0;
    const std::size_t uni = (a1 - a0) + (b1 - b0) - inter;
    return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

// Per-second accuracy of the event-induced flags against the ground-truth
// mask over [eval_begin, eval_end), plus the best-matching-segment IoU for
// each event. The evaluation interval is always explicit.
inline EvalResult localization_accuracy(const std::vector<AnomalyEvent>& events,
                                        const std::vector<std::uint8_t>& mask, std::size_t N,
                                        const std::vector<std::string>& channels,
                                        std::size_t eval_begin, std::size_t eval_end) {
    const std::size_t F = channels.size();
    if (mask.size() != N * F)
        throw std::domain_error("localization_accuracy: mask size " +
                                std::to_string(mask.size()) + " != " + std::to_string(N * F));
    if (eval_end > N || eval_begin >= eval_end)
        throw std::domain_error("localization_accuracy: bad evaluation interval");

    std::vector<std::uint8_t> flags(N * F, 0);
    for (const auto& ev : events) {
        std::size_t ch = F;
        for (std::size_t c = 0; c < F; ++c)
            if (channels[c] == ev.channel) ch = c;
        if (ch == F) throw std::domain_error("localization_accuracy: unknown event channel " +
                                             ev.channel);
        for (std::size_t s = ev.onset; s < ev.offset && s < N; ++s) flags[s * F + ch] = 1;
    }

    EvalResult res;
    res.eval_begin = eval_begin;
    res.eval_end = eval_end;
    res.per_channel.resize(F);
    std::size_t correct = 0;
    for (std::size_t ch = 0; ch < F; ++ch) {
        auto& c = res.per_channel[ch];
        for (std::size_t s = eval_begin; s < eval_end; ++s) {
            const bool truth = mask[s * F + ch] != 0;
            const bool got = flags[s * F + ch] != 0;
            if (truth && got)
                ++c.tp;
            else if (!truth && !got)
                ++c.tn;
            else if (got)
                ++c.fp;
            else
                ++c.fn;
        }
        correct += c.tp + c.tn;
    }
    res.overall_accuracy =
        static_cast<double>(correct) / static_cast<double>(F * (eval_end - eval_begin));

    for (const auto& ev : events) {
        std::size_t ch = 0;
        for (std::size_t c = 0; c < F; ++c)
            if (channels[c] == ev.channel) ch = c;
        double best = 0.0;
        for (const auto& seg : mask_segments(mask, N, F, ch))
            best = std::max(best, interval_iou(ev.onset, ev.offset, seg.first, seg.second));
        res.event_iou.push_back(best);
    }
    return res;
}

// ---- baseline persistence -------------------------------------------------------

inline nlohmann::json baseline_to_json(const BaselineStats& b) {
    nlohmann::json j;
    j["window_count"] = b.window_count;
    for (std::size_t f = 0; f < b.channels.size(); ++f)
        j["channels"][b.channels[f]] = {{"feature_mean", b.fw_mean[f]},
                                        {"feature_std", b.fw_std[f]},
                                        {"temporal_mean", b.tw_mean[f]},
                                        {"temporal_std", b.tw_std[f]}};
    return j;
}

inline BaselineStats baseline_from_json(const nlohmann::json& j,
                                        const std::vector<std::string>& channels) {
    BaselineStats b;
    b.channels = channels;
    b.window_count = j.at("window_count").get<std::size_t>();
    for (const auto& ch : channels) {
        if (!j.at("channels").contains(ch))
            throw parse_error("baseline json: missing channel " + ch);
        const auto& cj = j["channels"][ch];
        b.fw_mean.push_back(cj.at("feature_mean").get<double>());
        b.fw_std.push_back(cj.at("feature_std").get<double>());
        b.tw_mean.push_back(cj.at("temporal_mean").get<double>());
        b.tw_std.push_back(cj.at("temporal_std").get<double>());
    }
    return b;
}

inline void save_baseline(const BaselineStats& b, const std::string& path) {
    auto out = open_output(path);
    out << baseline_to_json(b).dump(2) << "\n";
}

inline BaselineStats load_baseline(const std::string& path,
                                   const std::vector<std::string>& channels) {
    return baseline_from_json(nlohmann::json::parse(read_file(path)), channels);
}

}  // namespace attnae
