#pragma once

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <optional>
#include <string>

#include "bubbles/datestamp.hpp"
#include "bubbles/recursive.hpp"
#include "bubbles/series.hpp"

namespace bubbles {

using Json = nlohmann::ordered_json;

inline Json number_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

template <class T>
Json optional_json(const std::optional<T>& v) {
    return v ? Json(*v) : Json(nullptr);
}

inline Json to_json(const StatSequence& s) {
    Json idx = Json::array(), tau = Json::array(), val = Json::array();
    for (const auto& e : s.entries) {
        idx.push_back(e.end);
        tau.push_back(e.tau2);
        val.push_back(e.skipped ? Json(nullptr) : number_or_null(e.value));
    }
    return {{"kind", s.kind}, {"tau0", s.tau0}, {"T", s.sample_size}, {"index", idx}, {"tau2", tau}, {"value", val}};
}

inline Json to_json(const SupResult& r, bool with_sequence = true) {
    Json j{{"value", r.value},       {"tau1", r.tau1}, {"tau2", r.tau2},
           {"start", r.start},       {"end", r.end},   {"skipped_windows", r.skipped_windows}};
    if (with_sequence && !r.sequence.entries.empty()) j["sequence"] = to_json(r.sequence);
    return j;
}

inline Json to_json(const Episode& e, const Series* y = nullptr) {
    Json j{{"origin", e.origin},
           {"collapse", e.collapse},
           {"recovery", optional_json(e.recovery)},
           {"model", optional_json(e.model)},
           {"origin_index", e.origin_index},
           {"collapse_index", e.collapse_index},
           {"recovery_index", optional_json(e.recovery_index)},
           {"ongoing", e.ongoing}};
    if (y && y->has_labels()) {
        auto label = [&](std::size_t i) { return i >= 1 && i <= y->size() ? Json(y->labels()[i - 1]) : Json(nullptr); };
        j["origin_label"] = label(e.origin_index);
        j["collapse_label"] = label(e.collapse_index);
        if (e.recovery_index) j["recovery_label"] = label(*e.recovery_index);
    }
    return j;
}

inline Json to_json(const std::vector<Episode>& eps, const Series* y = nullptr) {
    Json a = Json::array();
    for (const auto& e : eps) a.push_back(to_json(e, y));
    return a;
}

/// CSV rows (tau2, value) of a sequence; skipped entries have an empty value.
inline void write_sequence_csv(const std::string& path, const StatSequence& s) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write '" + path + "'");
    out << "tau2,value\n";
    for (const auto& e : s.entries)
        out << detail::format_double(e.tau2) << ',' << (e.skipped ? std::string() : detail::format_double(e.value))
            << '\n';
}

/// CSV rows (origin, collapse, recovery, model, indices, labels) of episodes.
inline void write_episodes_csv(const std::string& path, const std::vector<Episode>& eps, const Series* y = nullptr) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write '" + path + "'");
    out << "origin,collapse,recovery,model,origin_index,collapse_index,recovery_index,origin_label,collapse_label\n";
    auto label = [&](std::size_t i) {
        return y && y->has_labels() && i >= 1 && i <= y->size() ? y->labels()[i - 1] : std::string();
    };
    for (const auto& e : eps) {
        out << detail::format_double(e.origin) << ',' << detail::format_double(e.collapse) << ','
            << (e.recovery ? detail::format_double(*e.recovery) : "") << ','
            << (e.model ? std::to_string(*e.model) : "") << ',' << e.origin_index << ',' << e.collapse_index << ','
            << (e.recovery_index ? std::to_string(*e.recovery_index) : "") << ',' << label(e.origin_index) << ','
            << label(e.collapse_index) << '\n';
    }
}

}  // namespace bubbles
