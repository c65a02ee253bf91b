#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "corpusclean/error.hpp"
#include "corpusclean/metric_vector.hpp"

namespace corpusclean {

/// Stable document identifier: (shard index << 40) | record index.
enum class DocId : uint64_t {};

inline constexpr unsigned kShardShift = 40;

constexpr DocId make_doc_id(uint64_t shard, uint64_t record) {
    return DocId{(shard << kShardShift) | (record & ((uint64_t{1} << kShardShift) - 1))};
}
constexpr uint64_t to_u64(DocId id) { return static_cast<uint64_t>(id); }
constexpr uint64_t shard_of(DocId id) { return to_u64(id) >> kShardShift; }
constexpr uint64_t record_of(DocId id) { return to_u64(id) & ((uint64_t{1} << kShardShift) - 1); }

struct Document {
    DocId id{};
    std::string text;
    std::optional<std::string> url;
    std::string language;
    std::string source;
    std::optional<std::string> timestamp;

    // Attached by the langid stage.
    std::optional<double> lid_confidence;
    // Attached by the metrics stage.
    std::optional<MetricVector> metrics;

    // Unknown input fields, passed through verbatim and in order.
    nlohmann::ordered_json extra = nlohmann::ordered_json::object();
};

enum class Stage { initial, langid, url_filter, metric_filter, refine, minhash_dedup, url_dedup };

inline constexpr std::array<Stage, 7> kAllStages = {
    Stage::initial, Stage::langid,        Stage::url_filter, Stage::metric_filter,
    Stage::refine,  Stage::minhash_dedup, Stage::url_dedup,
};

constexpr std::string_view stage_name(Stage s) {
    constexpr std::array<std::string_view, 7> names = {
        "initial", "langid", "url_filter", "metric_filter", "refine", "minhash_dedup", "url_dedup"};
    return names[static_cast<std::size_t>(s)];
}

inline std::optional<Stage> stage_from_name(std::string_view name) {
    for (auto s : kAllStages) {
        if (stage_name(s) == name) return s;
    }
    return std::nullopt;
}

struct LangCounts {
    uint64_t documents = 0;
    uint64_t tokens = 0;

    LangCounts& operator+=(const LangCounts& o) {
        documents += o.documents;
        tokens += o.tokens;
        return *this;
    }
    bool operator==(const LangCounts&) const = default;
};

/// Per-language counts after one stage. Merging is commutative.
struct StageReport {
    Stage stage = Stage::initial;
    std::map<std::string, LangCounts> per_language;
    // Languages for which this stage was skipped by the dedup gate.
    std::set<std::string> gated;

    void merge(const StageReport& other) {
        for (const auto& [lang, c] : other.per_language) per_language[lang] += c;
        gated.insert(other.gated.begin(), other.gated.end());
    }

    LangCounts total() const {
        LangCounts t;
        for (const auto& [lang, c] : per_language) t += c;
        return t;
    }
};

/// Percentage of documents removed between two stages.
inline double filtering_rate(double initial, double final_count) {
    if (initial <= 0) throw Error("filtering_rate: empty stage input (initial count is 0)");
    if (final_count < 0 || final_count > initial) {
        throw Error("filtering_rate: final count must lie in [0, initial]");
    }
    return 100.0 * (initial - final_count) / initial;
}

}  // namespace corpusclean
