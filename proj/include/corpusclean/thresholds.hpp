#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "corpusclean/corpus.hpp"
#include "corpusclean/error.hpp"
#include "corpusclean/hash.hpp"
#include "corpusclean/metric_vector.hpp"

namespace corpusclean {

enum class Direction { favor_high, favor_low };

inline constexpr std::string_view direction_name(Direction d) {
    return d == Direction::favor_high ? "favor_high" : "favor_low";
}

inline Direction direction_from_name(std::string_view s) {
    if (s == "favor_high") return Direction::favor_high;
    if (s == "favor_low") return Direction::favor_low;
    throw ConfigError("unknown metric direction: " + std::string(s));
}

/// Word count, stopword ratio and language-ID confidence are better when
/// high; for every other metric larger values mean noisier text.
constexpr Direction direction_of(Metric m) {
    switch (m) {
        case Metric::number_words:
        case Metric::stopword_ratio:
        case Metric::lid_confidence: return Direction::favor_high;
        default: return Direction::favor_low;
    }
}

/// (q_low, q_high) pairs explored by the sweep, most lenient first.
inline constexpr std::array<std::pair<double, double>, 5> kPercentileGrid = {
    {{25, 75}, {20, 80}, {15, 85}, {10, 90}, {5, 95}}};
inline constexpr double kDefaultQLow = 10.0;
inline constexpr double kDefaultQHigh = 90.0;

/// 1-based nearest rank ceil(q*N/100), clamped to [1, N].
inline std::size_t nearest_rank(double q, std::size_t n) {
    const double r = q * static_cast<double>(n) / 100.0;
    // Guard against r landing a rounding error above an integer.
    auto rank = static_cast<std::size_t>(std::ceil(r - 1e-9 * std::max(1.0, r)));
    return std::clamp<std::size_t>(rank, 1, n);
}

/// Nearest-rank percentile: the ceil(q*N/100)-th smallest value.
inline double percentile(std::vector<double> values, double q) {
    if (values.empty()) throw Error("percentile of an empty set");
    if (!(q > 0.0 && q < 100.0)) throw Error("percentile q must lie in (0, 100)");
    const std::size_t k = nearest_rank(q, values.size()) - 1;
    std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(k), values.end());
    return values[k];
}

struct MetricThreshold {
    Direction direction = Direction::favor_low;
    double percentile = 0.0;
    double threshold = 0.0;
    double sample_fraction = 1.0;
    std::size_t sample_size = 0;
};

struct ThresholdPolicy {
    std::string language;
    double q_low = kDefaultQLow;
    double q_high = kDefaultQHigh;
    double sample_fraction = 1.0;
    uint64_t seed = 0;
    std::size_t documents = 0;  // stream size the policy was built from
    std::map<Metric, MetricThreshold> metrics;
};

struct PolicyOptions {
    double q_low = kDefaultQLow;
    double q_high = kDefaultQHigh;
    double sample_fraction = 1.0;
    uint64_t seed = 0;
};

inline constexpr uint64_t kDefaultSampleBound = 100'000'000;
inline constexpr double kLargeLanguageFraction = 0.25;

/// 0.25 for languages with more than `bound` documents, else 1.
inline double default_sample_fraction(uint64_t documents, uint64_t bound = kDefaultSampleBound) {
    return documents > bound ? kLargeLanguageFraction : 1.0;
}

/// Whether a document belongs to the seeded Bernoulli sample.
inline bool in_sample(DocId id, double fraction, uint64_t seed) {
    return fraction >= 1.0 || keyed_uniform(seed, to_u64(id)) < fraction;
}

struct ScoredDoc {
    DocId id{};
    MetricVector metrics;
};

/// Builds thresholds for one language. Disabled (NaN) values are ignored; a
/// metric disabled for every sampled document gets no threshold. If the
/// Bernoulli sample happens to be empty the whole stream is used.
inline ThresholdPolicy build_policy(const std::string& language, std::span<const ScoredDoc> stream,
                                    const PolicyOptions& opts = {}) {
    if (stream.empty()) throw Error("cannot build thresholds for " + language + ": no documents");
    if (!(opts.q_low > 0.0 && opts.q_low < opts.q_high && opts.q_high < 100.0)) {
        throw ConfigError("percentiles must satisfy 0 < q_low < q_high < 100");
    }
    if (!(opts.sample_fraction > 0.0 && opts.sample_fraction <= 1.0)) {
        throw ConfigError("sample fraction must lie in (0, 1]");
    }
    ThresholdPolicy p;
    p.language = language;
    p.q_low = opts.q_low;
    p.q_high = opts.q_high;
    p.sample_fraction = opts.sample_fraction;
    p.seed = opts.seed;
    p.documents = stream.size();

    std::vector<const MetricVector*> sample;
    for (const auto& d : stream) {
        if (in_sample(d.id, opts.sample_fraction, opts.seed)) sample.push_back(&d.metrics);
    }
    if (sample.empty()) {
        for (const auto& d : stream) sample.push_back(&d.metrics);
    }

    std::vector<double> values;
    values.reserve(sample.size());
    for (Metric m : kAllMetrics) {
        values.clear();
        for (const auto* mv : sample) {
            if (!mv->is_disabled(m)) values.push_back((*mv)[m]);
        }
        if (values.empty()) continue;
        MetricThreshold t;
        t.direction = direction_of(m);
        t.percentile = t.direction == Direction::favor_high ? opts.q_low : opts.q_high;
        t.sample_fraction = opts.sample_fraction;
        t.sample_size = values.size();
        t.threshold = percentile(values, t.percentile);
        p.metrics.emplace(m, t);
    }
    return p;
}

struct PolicyDecision {
    bool keep = true;
    std::vector<Metric> violations;
};

struct PolicyStats {
    // Metric checks skipped because the policy had no threshold for them.
    std::atomic<uint64_t> missing_metric{0};
};

/// Strict comparisons: values equal to their threshold are kept. Disabled
/// values never violate.
inline PolicyDecision apply_policy(const MetricVector& mv, const ThresholdPolicy& policy,
                                   PolicyStats* stats = nullptr) {
    PolicyDecision d;
    for (Metric m : kAllMetrics) {
        auto it = policy.metrics.find(m);
        if (it == policy.metrics.end()) {
            if (stats != nullptr) ++stats->missing_metric;
            continue;
        }
        const double v = mv[m];
        if (std::isnan(v)) continue;
        const auto& t = it->second;
        const bool bad = t.direction == Direction::favor_high ? v < t.threshold : v > t.threshold;
        if (bad) d.violations.push_back(m);
    }
    d.keep = d.violations.empty();
    return d;
}

inline nlohmann::ordered_json policy_to_json(const ThresholdPolicy& p) {
    nlohmann::ordered_json j;
    j["language"] = p.language;
    j["q_low"] = p.q_low;
    j["q_high"] = p.q_high;
    j["sample_fraction"] = p.sample_fraction;
    j["seed"] = p.seed;
    j["documents"] = p.documents;
    auto& ms = j["metrics"] = nlohmann::ordered_json::object();
    for (const auto& [m, t] : p.metrics) {
        ms[std::string(metric_name(m))] = {{"direction", direction_name(t.direction)},
                                           {"percentile", t.percentile},
                                           {"threshold", t.threshold},
                                           {"sample_fraction", t.sample_fraction},
                                           {"sample_size", t.sample_size}};
    }
    return j;
}

/// Accepts hand-edited policies: only "language" and, per metric, "threshold"
/// are required. Direction defaults to the metric's fixed direction.
inline ThresholdPolicy policy_from_json(const nlohmann::json& j) {
    try {
        ThresholdPolicy p;
        p.language = j.at("language").get<std::string>();
        p.q_low = j.value("q_low", kDefaultQLow);
        p.q_high = j.value("q_high", kDefaultQHigh);
        p.sample_fraction = j.value("sample_fraction", 1.0);
        p.seed = j.value("seed", uint64_t{0});
        p.documents = j.value("documents", std::size_t{0});
        if (j.contains("metrics")) {
            for (const auto& [name, v] : j.at("metrics").items()) {
                auto m = metric_from_name(name);
                if (!m) throw ConfigError("unknown metric in policy: " + name);
                MetricThreshold t;
                t.direction = v.contains("direction") ? direction_from_name(v.at("direction").get<std::string>())
                                                      : direction_of(*m);
                t.threshold = v.at("threshold").get<double>();
                t.percentile = v.value("percentile", t.direction == Direction::favor_high ? p.q_low : p.q_high);
                t.sample_fraction = v.value("sample_fraction", p.sample_fraction);
                t.sample_size = v.value("sample_size", std::size_t{0});
                p.metrics.emplace(*m, t);
            }
        }
        return p;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed threshold policy: ") + e.what());
    }
}

inline void save_policy(const ThresholdPolicy& p, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw IoError("cannot write policy " + path.string());
    out << policy_to_json(p).dump(2) << "\n";
}

inline ThresholdPolicy load_policy(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read policy " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("policy " + path.string() + " is not valid JSON: " + e.what());
    }
    return policy_from_json(j);
}

}  // namespace corpusclean
