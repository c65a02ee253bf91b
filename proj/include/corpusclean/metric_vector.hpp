#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string_view>

namespace corpusclean {

enum class Metric : std::size_t {
    number_words,
    char_rep_ratio,
    word_rep_ratio,
    special_char_ratio,
    stopword_ratio,
    flagged_word_ratio,
    lid_confidence,
    perplexity,
    doc_length_chars,
    num_lines,
    short_line_length_ratio,
    short_line_ratio,
};

inline constexpr std::size_t kMetricCount = 12;

inline constexpr std::array<Metric, kMetricCount> kAllMetrics = {
    Metric::number_words,       Metric::char_rep_ratio,   Metric::word_rep_ratio,
    Metric::special_char_ratio, Metric::stopword_ratio,   Metric::flagged_word_ratio,
    Metric::lid_confidence,     Metric::perplexity,       Metric::doc_length_chars,
    Metric::num_lines,          Metric::short_line_length_ratio, Metric::short_line_ratio,
};

inline constexpr std::array<std::string_view, kMetricCount> kMetricNames = {
    "number_words",       "char_rep_ratio", "word_rep_ratio",
    "special_char_ratio", "stopword_ratio", "flagged_word_ratio",
    "lid_confidence",     "perplexity",     "doc_length_chars",
    "num_lines",          "short_line_length_ratio", "short_line_ratio",
};

constexpr std::string_view metric_name(Metric m) { return kMetricNames[static_cast<std::size_t>(m)]; }

inline std::optional<Metric> metric_from_name(std::string_view name) {
    for (std::size_t i = 0; i < kMetricCount; ++i) {
        if (kMetricNames[i] == name) return static_cast<Metric>(i);
    }
    return std::nullopt;
}

/// The twelve per-document quality values. A NaN marks a metric that is
/// disabled for the document (e.g. perplexity with no language model).
struct MetricVector {
    std::array<double, kMetricCount> values{};

    double& operator[](Metric m) { return values[static_cast<std::size_t>(m)]; }
    double operator[](Metric m) const { return values[static_cast<std::size_t>(m)]; }

    static constexpr double disabled() { return std::numeric_limits<double>::quiet_NaN(); }
    bool is_disabled(Metric m) const { return std::isnan((*this)[m]); }

    bool operator==(const MetricVector& other) const {
        for (std::size_t i = 0; i < kMetricCount; ++i) {
            const double a = values[i], b = other.values[i];
            if (!(a == b || (std::isnan(a) && std::isnan(b)))) return false;
        }
        return true;
    }
};

}  // namespace corpusclean
