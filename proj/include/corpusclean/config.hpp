#pragma once

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "corpusclean/error.hpp"
#include "corpusclean/minhash.hpp"
#include "corpusclean/refine.hpp"
#include "corpusclean/thresholds.hpp"

namespace corpusclean {

/// Run-wide settings. Every field maps to a JSON key of the same dotted path
/// (e.g. minhash.permutations) and can be overridden with key=value strings.
struct PipelineConfig {
    std::filesystem::path input;
    std::filesystem::path output_dir = "out";
    std::vector<std::string> languages;  // allowlist; empty admits every language
    uint64_t seed = 0;
    std::size_t workers = 0;  // 0 = hardware concurrency
    bool fused = false;       // skip writing intermediate stage outputs

    struct LangId {
        std::filesystem::path model;  // fastText .bin/.ftz; empty = script classifier
        bool repredict = true;
    } langid;

    struct UrlFilter {
        std::filesystem::path blacklist_root;  // empty disables the stage
        std::vector<std::string> categories;
    } url_filter;

    struct Metrics {
        // <dir>/stopwords/<lang>.txt and <dir>/flagged/<lang>.txt
        std::filesystem::path wordlist_dir;
        // <dir>/<lang>.lm (binary model from train-lm)
        std::filesystem::path lm_dir;
        // SentencePiece-style .vocab file; empty = Unicode word segmentation
        std::filesystem::path tokenizer_vocab;
    } metrics;

    struct Thresholds {
        double q_low = kDefaultQLow;
        double q_high = kDefaultQHigh;
        std::optional<double> sample_fraction;  // unset = size rule below
        uint64_t sample_bound = kDefaultSampleBound;
        // Directory of <lang>.json policies to apply instead of building them.
        std::filesystem::path policy_dir;
    } thresholds;

    JsKeywordSet js_keywords = JsKeywordSet::defaults();

    struct MinHash {
        std::size_t permutations = kDefaultPermutations;
        double threshold = kDefaultJaccardThreshold;
        std::optional<uint64_t> seed;  // unset = run seed
        bool verify = false;
        std::filesystem::path spill_dir;  // empty = keep band tables in memory
        std::size_t max_buffered = std::size_t{1} << 22;
    } minhash;

    uint64_t dedup_gate = 100000;

    uint64_t minhash_seed() const { return minhash.seed.value_or(seed); }

    void validate() const {
        if (!(thresholds.q_low > 0 && thresholds.q_low < thresholds.q_high && thresholds.q_high < 100)) {
            throw ConfigError("thresholds: need 0 < q_low < q_high < 100");
        }
        if (thresholds.sample_fraction && !(*thresholds.sample_fraction > 0 && *thresholds.sample_fraction <= 1)) {
            throw ConfigError("thresholds.sample_fraction must lie in (0, 1]");
        }
        if (!(minhash.threshold > 0 && minhash.threshold < 1)) throw ConfigError("minhash.threshold must lie in (0, 1)");
        if (minhash.permutations == 0) throw ConfigError("minhash.permutations must be >= 1");
        if (minhash.max_buffered == 0) throw ConfigError("minhash.max_buffered must be >= 1");
        if (!url_filter.blacklist_root.empty() && url_filter.categories.empty()) {
            throw ConfigError("url_filter.categories is empty while a blacklist root is set");
        }
        if (js_keywords.empty()) throw ConfigError("refine.js_keywords is empty");
    }

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j;
        j["input"] = input.string();
        j["output_dir"] = output_dir.string();
        j["languages"] = languages;
        j["seed"] = seed;
        j["workers"] = workers;
        j["fused"] = fused;
        j["langid"] = {{"model", langid.model.string()}, {"repredict", langid.repredict}};
        j["url_filter"] = {{"blacklist_root", url_filter.blacklist_root.string()}, {"categories", url_filter.categories}};
        j["metrics"] = {{"wordlist_dir", metrics.wordlist_dir.string()},
                        {"lm_dir", metrics.lm_dir.string()},
                        {"tokenizer_vocab", metrics.tokenizer_vocab.string()}};
        nlohmann::ordered_json th = {{"q_low", thresholds.q_low}, {"q_high", thresholds.q_high}};
        th["sample_fraction"] = thresholds.sample_fraction ? nlohmann::ordered_json(*thresholds.sample_fraction)
                                                           : nlohmann::ordered_json(nullptr);
        th["sample_bound"] = thresholds.sample_bound;
        th["policy_dir"] = thresholds.policy_dir.string();
        j["thresholds"] = th;
        j["refine"] = {{"js_keywords", js_keywords.to_json()}};
        nlohmann::ordered_json mh = {{"permutations", minhash.permutations}, {"threshold", minhash.threshold}};
        mh["seed"] = minhash.seed ? nlohmann::ordered_json(*minhash.seed) : nlohmann::ordered_json(nullptr);
        mh["verify"] = minhash.verify;
        mh["spill_dir"] = minhash.spill_dir.string();
        mh["max_buffered"] = minhash.max_buffered;
        j["minhash"] = mh;
        j["dedup_gate"] = dedup_gate;
        return j;
    }

    /// Missing keys keep their defaults; unknown keys are rejected so typos
    /// do not pass silently.
    static PipelineConfig from_json(const nlohmann::json& j, const std::filesystem::path& base = {}) {
        PipelineConfig c;
        c.apply(j, base);
        return c;
    }

    void apply(const nlohmann::json& j, const std::filesystem::path& base = {}) {
        if (!j.is_object()) throw ConfigError("config must be an object");
        try {
            for (const auto& [key, v] : j.items()) {
                if (key == "input") input = resolve(base, v);
                else if (key == "output_dir") output_dir = resolve(base, v);
                else if (key == "languages") languages = v.get<std::vector<std::string>>();
                else if (key == "seed") seed = v.get<uint64_t>();
                else if (key == "workers") workers = v.get<std::size_t>();
                else if (key == "fused") fused = v.get<bool>();
                else if (key == "langid") apply_section(v, key, [&](const std::string& k, const nlohmann::json& x) {
                    if (k == "model") langid.model = resolve(base, x);
                    else if (k == "repredict") langid.repredict = x.get<bool>();
                    else return false;
                    return true;
                });
                else if (key == "url_filter") apply_section(v, key, [&](const std::string& k, const nlohmann::json& x) {
                    if (k == "blacklist_root") url_filter.blacklist_root = resolve(base, x);
                    else if (k == "categories") url_filter.categories = x.get<std::vector<std::string>>();
                    else return false;
                    return true;
                });
                else if (key == "metrics") apply_section(v, key, [&](const std::string& k, const nlohmann::json& x) {
                    if (k == "wordlist_dir") metrics.wordlist_dir = resolve(base, x);
                    else if (k == "lm_dir") metrics.lm_dir = resolve(base, x);
                    else if (k == "tokenizer_vocab") metrics.tokenizer_vocab = resolve(base, x);
                    else return false;
                    return true;
                });
                else if (key == "thresholds") apply_section(v, key, [&](const std::string& k, const nlohmann::json& x) {
                    if (k == "q_low") thresholds.q_low = x.get<double>();
                    else if (k == "q_high") thresholds.q_high = x.get<double>();
                    else if (k == "sample_fraction") {
                        if (x.is_null()) thresholds.sample_fraction.reset();
                        else thresholds.sample_fraction = x.get<double>();
                    } else if (k == "sample_bound") thresholds.sample_bound = x.get<uint64_t>();
                    else if (k == "policy_dir") thresholds.policy_dir = resolve(base, x);
                    else return false;
                    return true;
                });
                else if (key == "refine") apply_section(v, key, [&](const std::string& k, const nlohmann::json& x) {
                    if (k == "js_keywords") js_keywords = JsKeywordSet::from_json(x);
                    else return false;
                    return true;
                });
                else if (key == "minhash") apply_section(v, key, [&](const std::string& k, const nlohmann::json& x) {
                    if (k == "permutations") minhash.permutations = x.get<std::size_t>();
                    else if (k == "threshold") minhash.threshold = x.get<double>();
                    else if (k == "seed") {
                        if (x.is_null()) minhash.seed.reset();
                        else minhash.seed = x.get<uint64_t>();
                    } else if (k == "verify") minhash.verify = x.get<bool>();
                    else if (k == "spill_dir") minhash.spill_dir = resolve(base, x);
                    else if (k == "max_buffered") minhash.max_buffered = x.get<std::size_t>();
                    else return false;
                    return true;
                });
                else if (key == "dedup_gate") dedup_gate = v.get<uint64_t>();
                else throw ConfigError("unknown config key: " + key);
            }
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(std::string("bad config value: ") + e.what());
        }
    }

    /// Applies "section.key=value" (or "key=value"). The value is parsed as
    /// JSON when possible, otherwise taken as a string.
    void set(std::string_view assignment) {
        const auto eq = assignment.find('=');
        if (eq == std::string_view::npos || eq == 0) throw ConfigError("override must look like key=value");
        const std::string key(assignment.substr(0, eq));
        const std::string raw(assignment.substr(eq + 1));
        nlohmann::json value = nlohmann::json::parse(raw, nullptr, false);
        if (value.is_discarded()) value = raw;
        nlohmann::json patch;
        if (auto dot = key.find('.'); dot != std::string::npos) {
            patch[key.substr(0, dot)][key.substr(dot + 1)] = value;
        } else {
            patch[key] = value;
        }
        apply(patch);
    }

    static PipelineConfig load(const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot read config " + path.string());
        nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
        if (j.is_discarded()) throw ConfigError("config " + path.string() + " is not valid JSON");
        return from_json(j, path.parent_path());
    }

private:
    static std::filesystem::path resolve(const std::filesystem::path& base, const nlohmann::json& v) {
        std::filesystem::path p = v.get<std::string>();
        if (p.empty() || p.is_absolute() || base.empty()) return p;
        return base / p;
    }

    template <typename F>
    static void apply_section(const nlohmann::json& v, const std::string& name, F&& fn) {
        if (!v.is_object()) throw ConfigError("config section '" + name + "' must be an object");
        for (const auto& [k, x] : v.items()) {
            if (!fn(k, x)) throw ConfigError("unknown config key: " + name + "." + k);
        }
    }
};

/// CORPUSCLEAN_SEED, when set, overrides the configured seed.
inline void apply_seed_env(PipelineConfig& cfg) {
    if (const char* s = std::getenv("CORPUSCLEAN_SEED"); s != nullptr && *s != '\0') {
        try {
            cfg.seed = std::stoull(s);
        } catch (const std::exception&) {
            throw ConfigError(std::string("CORPUSCLEAN_SEED is not an unsigned integer: ") + s);
        }
    }
}

}  // namespace corpusclean
