#pragma once

// Stage functions and the orchestrated run:
//   ingest -> langid -> url_filter -> metrics -> thresholds -> apply
//          -> refine -> minhash dedup -> url dedup
// Every stage works on one language's documents at a time, keeps documents in
// id order, and parallelizes over documents with results written to slots.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include <json.hpp>

#include "corpusclean/config.hpp"
#include "corpusclean/corpus.hpp"
#include "corpusclean/error.hpp"
#include "corpusclean/fasttext_model.hpp"
#include "corpusclean/jsonl.hpp"
#include "corpusclean/langid.hpp"
#include "corpusclean/metrics.hpp"
#include "corpusclean/minhash.hpp"
#include "corpusclean/ngram_lm.hpp"
#include "corpusclean/parallel.hpp"
#include "corpusclean/refine.hpp"
#include "corpusclean/thresholds.hpp"
#include "corpusclean/tokenizer.hpp"
#include "corpusclean/url_dedup.hpp"
#include "corpusclean/url_filter.hpp"

namespace corpusclean {

namespace fs = std::filesystem;

/// Models and lists a run needs, loaded once from the config.
struct Resources {
    std::unique_ptr<LangClassifier> classifier;
    std::optional<Blacklist> blacklist;
    WordLists lists;
    std::unique_ptr<Tokenizer> tokenizer;
    std::map<std::string, LanguageModel> lms;

    static Resources load(const PipelineConfig& cfg) {
        Resources r;
        if (cfg.langid.model.empty()) {
            r.classifier = std::make_unique<ScriptClassifier>(ScriptClassifier::default_instance());
        } else {
            r.classifier = std::make_unique<FastTextClassifier>(cfg.langid.model);
        }
        if (!cfg.url_filter.blacklist_root.empty()) {
            r.blacklist = load_blacklist(cfg.url_filter.blacklist_root, cfg.url_filter.categories);
        }
        if (!cfg.metrics.wordlist_dir.empty()) {
            if (!fs::is_directory(cfg.metrics.wordlist_dir)) {
                throw ConfigError("word list directory not found: " + cfg.metrics.wordlist_dir.string());
            }
            for (auto [sub, kind] : {std::pair{"stopwords", WordLists::Kind::stopwords},
                                     std::pair{"flagged", WordLists::Kind::flagged}}) {
                const auto dir = cfg.metrics.wordlist_dir / sub;
                if (!fs::is_directory(dir)) continue;
                for (const auto& e : fs::directory_iterator(dir)) {
                    if (e.is_regular_file() && e.path().extension() == ".txt") {
                        r.lists.load(kind, e.path().stem().string(), e.path());
                    }
                }
            }
        }
        if (cfg.metrics.tokenizer_vocab.empty()) {
            r.tokenizer = std::make_unique<UnicodeWordTokenizer>();
        } else {
            r.tokenizer = std::make_unique<UnigramTokenizer>(cfg.metrics.tokenizer_vocab);
        }
        if (!cfg.metrics.lm_dir.empty()) {
            if (!fs::is_directory(cfg.metrics.lm_dir)) {
                throw ConfigError("language model directory not found: " + cfg.metrics.lm_dir.string());
            }
            for (const auto& e : fs::directory_iterator(cfg.metrics.lm_dir)) {
                if (e.is_regular_file() && e.path().extension() == ".lm") {
                    r.lms.emplace(e.path().stem().string(), LanguageModel::load(e.path()));
                }
            }
        }
        return r;
    }
};

/// Stage x language counts of a run plus the drop counters.
struct RunReport {
    bool complete = true;
    std::string error;
    uint64_t seed = 0;
    std::vector<StageReport> stages;
    std::map<std::string, uint64_t> counters;

    RunReport() {
        for (Stage s : kAllStages) stages.push_back(StageReport{s, {}, {}});
    }

    StageReport& at(Stage s) { return stages[static_cast<std::size_t>(s)]; }
    const StageReport& at(Stage s) const { return stages[static_cast<std::size_t>(s)]; }

    std::set<std::string> languages() const {
        std::set<std::string> out;
        for (const auto& st : stages) {
            for (const auto& [lang, c] : st.per_language) out.insert(lang);
        }
        return out;
    }

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j;
        j["complete"] = complete;
        if (!complete) j["error"] = error;
        j["seed"] = seed;
        auto& arr = j["stages"] = nlohmann::ordered_json::array();
        for (const auto& st : stages) {
            nlohmann::ordered_json s;
            s["stage"] = stage_name(st.stage);
            auto& langs = s["languages"] = nlohmann::ordered_json::object();
            for (const auto& [lang, c] : st.per_language) {
                langs[lang] = {{"documents", c.documents}, {"tokens", c.tokens}};
            }
            const auto t = st.total();
            s["total"] = {{"documents", t.documents}, {"tokens", t.tokens}};
            s["gated"] = st.gated;
            arr.push_back(std::move(s));
        }
        const auto& first = at(Stage::initial);
        const auto& last = at(Stage::url_dedup);
        auto& rates = j["filtering_rate"] = nlohmann::ordered_json::object();
        for (const auto& [lang, c] : first.per_language) {
            auto it = last.per_language.find(lang);
            const uint64_t fin = it == last.per_language.end() ? 0 : it->second.documents;
            if (c.documents > 0) rates[lang] = filtering_rate(static_cast<double>(c.documents), static_cast<double>(fin));
        }
        if (first.total().documents > 0) {
            rates["total"] = filtering_rate(static_cast<double>(first.total().documents),
                                            static_cast<double>(last.total().documents));
        }
        j["counters"] = counters;
        return j;
    }

    static RunReport from_json(const nlohmann::json& j) {
        RunReport r;
        try {
            r.complete = j.at("complete").get<bool>();
            r.error = j.value("error", std::string{});
            r.seed = j.value("seed", uint64_t{0});
            for (const auto& s : j.at("stages")) {
                auto stage = stage_from_name(s.at("stage").get<std::string>());
                if (!stage) throw Error("unknown stage in report");
                auto& st = r.at(*stage);
                for (const auto& [lang, c] : s.at("languages").items()) {
                    st.per_language[lang] = {c.at("documents").get<uint64_t>(), c.at("tokens").get<uint64_t>()};
                }
                for (const auto& g : s.value("gated", nlohmann::json::array())) st.gated.insert(g.get<std::string>());
            }
            if (j.contains("counters")) r.counters = j.at("counters").get<std::map<std::string, uint64_t>>();
        } catch (const nlohmann::json::exception& e) {
            throw Error(std::string("malformed run report: ") + e.what());
        }
        return r;
    }

    /// Document counts per language and stage, with totals and filtering rate.
    std::string table() const {
        std::ostringstream out;
        char buf[64];
        out << "language";
        for (const auto& st : stages) out << '\t' << stage_name(st.stage);
        out << "\tfiltering_rate\n";
        auto row = [&](const std::string& name, auto&& get) {
            out << name;
            uint64_t first = 0, last = 0;
            for (std::size_t i = 0; i < stages.size(); ++i) {
                const auto c = get(stages[i]);
                if (i == 0) first = c;
                last = c;
                out << '\t' << c;
                if (stages[i].gated.contains(name)) out << '*';
            }
            if (first > 0) {
                std::snprintf(buf, sizeof(buf), "%.2f", filtering_rate(static_cast<double>(first), static_cast<double>(last)));
                out << '\t' << buf;
            } else {
                out << "\t-";
            }
            out << '\n';
        };
        for (const auto& lang : languages()) {
            row(lang, [&](const StageReport& st) {
                auto it = st.per_language.find(lang);
                return it == st.per_language.end() ? uint64_t{0} : it->second.documents;
            });
        }
        row("total", [](const StageReport& st) { return st.total().documents; });
        return out.str();
    }
};

struct SweepRow {
    double q_low = 0;
    double q_high = 0;
    uint64_t documents = 0;
    uint64_t dropped = 0;
    std::map<Metric, uint64_t> violations;  // documents violating each metric

    double drop_fraction() const { return documents == 0 ? 0.0 : static_cast<double>(dropped) / documents; }
    double metric_fraction(Metric m) const {
        auto it = violations.find(m);
        return documents == 0 || it == violations.end() ? 0.0 : static_cast<double>(it->second) / documents;
    }
};

inline std::string sweep_table(std::span<const SweepRow> rows) {
    std::ostringstream out;
    char buf[32];
    out << "q_low\tq_high\tdocuments\tdropped\tdrop_fraction";
    for (Metric m : kAllMetrics) out << '\t' << metric_name(m);
    out << '\n';
    for (const auto& r : rows) {
        out << r.q_low << '\t' << r.q_high << '\t' << r.documents << '\t' << r.dropped;
        std::snprintf(buf, sizeof(buf), "%.4f", r.drop_fraction());
        out << '\t' << buf;
        for (Metric m : kAllMetrics) {
            std::snprintf(buf, sizeof(buf), "%.4f", r.metric_fraction(m));
            out << '\t' << buf;
        }
        out << '\n';
    }
    return out.str();
}

class Pipeline {
public:
    using ByLanguage = std::map<std::string, std::vector<Document>>;

    explicit Pipeline(PipelineConfig cfg) : cfg_(std::move(cfg)) {
        cfg_.validate();
        res_ = Resources::load(cfg_);
        init();
    }

    Pipeline(PipelineConfig cfg, Resources res) : cfg_(std::move(cfg)), res_(std::move(res)) {
        cfg_.validate();
        if (!res_.classifier) res_.classifier = std::make_unique<ScriptClassifier>(ScriptClassifier::default_instance());
        if (!res_.tokenizer) res_.tokenizer = std::make_unique<UnicodeWordTokenizer>();
        init();
    }

    const PipelineConfig& config() const { return cfg_; }
    const Resources& resources() const { return res_; }
    const std::map<std::string, uint64_t>& counters() const { return counters_; }

    // ---- stages -------------------------------------------------------------

    /// Reads every shard of the configured input, assigning fresh ids.
    std::vector<Document> ingest() {
        std::vector<Document> docs;
        IngestStats stats;
        const auto shards = list_shards(cfg_.input);
        for (std::size_t s = 0; s < shards.size(); ++s) {
            auto part = corpusclean::ingest(shards[s], s, &stats, /*assign_ids=*/true);
            std::move(part.begin(), part.end(), std::back_inserter(docs));
        }
        counters_["ingest.malformed"] += stats.malformed;
        counters_["ingest.empty_text"] += stats.empty_text;
        counters_["ingest.missing_language"] += stats.missing_language;
        return docs;
    }

    static ByLanguage group(std::vector<Document> docs) {
        ByLanguage out;
        for (auto& d : docs) out[d.language].push_back(std::move(d));
        for (auto& [lang, v] : out) {
            std::stable_sort(v.begin(), v.end(), [](const Document& a, const Document& b) { return a.id < b.id; });
        }
        return out;
    }

    std::vector<Document> langid(std::vector<Document> docs) {
        std::vector<RelabelResult> verdicts(docs.size());
        parallel_for(docs.size(), cfg_.workers, [&](std::size_t i) {
            if (!allowed(docs[i].language)) {
                verdicts[i].verdict = LidVerdict::unsupported_label;
                return;
            }
            verdicts[i] = relabel_filter(docs[i], *res_.classifier, cfg_.langid.repredict);
        });
        std::vector<Document> out;
        for (std::size_t i = 0; i < docs.size(); ++i) {
            switch (verdicts[i].verdict) {
                case LidVerdict::keep:
                    docs[i].lid_confidence = verdicts[i].prediction.confidence;
                    out.push_back(std::move(docs[i]));
                    break;
                case LidVerdict::unsupported_label: ++counters_["langid.unsupported"]; break;
                case LidVerdict::mismatch: ++counters_["langid.mismatch"]; break;
                case LidVerdict::classifier_error: ++counters_["langid.error"]; break;
            }
        }
        return out;
    }

    std::vector<Document> url_filter(std::vector<Document> docs) {
        if (!res_.blacklist) return docs;
        UrlFilterStats stats;
        std::vector<char> keep(docs.size(), 1);
        parallel_for(docs.size(), cfg_.workers,
                     [&](std::size_t i) { keep[i] = keep_document(docs[i], *res_.blacklist, &stats) ? 1 : 0; });
        counters_["url_filter.unparsable"] += stats.unparsable;
        return select(std::move(docs), keep, "url_filter.blocked");
    }

    void attach_metrics(std::vector<Document>& docs) const {
        parallel_for(docs.size(), cfg_.workers, [&](std::size_t i) {
            docs[i].metrics = compute_metrics(docs[i], res_.lists, *res_.tokenizer, lm_for(docs[i].language));
        });
    }

    /// Policy for one language's metered documents at the given percentiles.
    ThresholdPolicy build_thresholds(const std::string& language, const std::vector<Document>& docs, double q_low,
                                     double q_high) const {
        std::vector<ScoredDoc> scored;
        scored.reserve(docs.size());
        for (const auto& d : docs) {
            if (!d.metrics) throw Error("document " + std::to_string(to_u64(d.id)) + " has no metrics");
            scored.push_back({d.id, *d.metrics});
        }
        PolicyOptions opts;
        opts.q_low = q_low;
        opts.q_high = q_high;
        opts.seed = cfg_.seed;
        opts.sample_fraction =
            cfg_.thresholds.sample_fraction.value_or(default_sample_fraction(docs.size(), cfg_.thresholds.sample_bound));
        return build_policy(language, scored, opts);
    }

    /// The hand-edited policy from thresholds.policy_dir if one exists,
    /// otherwise a freshly built one.
    ThresholdPolicy policy_for(const std::string& language, const std::vector<Document>& docs) const {
        if (!cfg_.thresholds.policy_dir.empty()) {
            const auto p = cfg_.thresholds.policy_dir / (language + ".json");
            if (fs::exists(p)) return load_policy(p);
        }
        return build_thresholds(language, docs, cfg_.thresholds.q_low, cfg_.thresholds.q_high);
    }

    std::vector<Document> apply(std::vector<Document> docs, const ThresholdPolicy& policy) {
        PolicyStats stats;
        std::vector<PolicyDecision> decisions(docs.size());
        parallel_for(docs.size(), cfg_.workers, [&](std::size_t i) {
            if (!docs[i].metrics) throw Error("document " + std::to_string(to_u64(docs[i].id)) + " has no metrics");
            decisions[i] = apply_policy(*docs[i].metrics, policy, &stats);
        });
        counters_["thresholds.missing_metric"] += stats.missing_metric;
        std::vector<char> keep(docs.size());
        for (std::size_t i = 0; i < docs.size(); ++i) {
            keep[i] = decisions[i].keep ? 1 : 0;
            for (Metric m : decisions[i].violations) ++counters_["metric_filter.violations." + std::string(metric_name(m))];
        }
        return select(std::move(docs), keep, "metric_filter.dropped");
    }

    std::vector<Document> refine(std::vector<Document> docs) {
        std::vector<RefineResult> results(docs.size());
        parallel_for(docs.size(), cfg_.workers,
                     [&](std::size_t i) { results[i] = corpusclean::refine(docs[i].text, cfg_.js_keywords); });
        for (std::size_t i = 0; i < docs.size(); ++i) {
            if (results[i].trimmed_lines > 0) ++counters_["refine.trimmed_documents"];
            counters_["refine.trimmed_lines"] += results[i].trimmed_lines;
            counters_["refine.js_lines_removed"] += results[i].js_lines_removed;
            if (results[i].all_short) ++counters_["refine.all_short"];
            docs[i].text = std::move(results[i].text);
        }
        return docs;
    }

    /// Near-duplicate removal for one language. Documents without any token
    /// cannot be signed and are kept.
    std::vector<Document> minhash_dedup(std::vector<Document> docs, const std::string& language,
                                        std::vector<DuplicatePair>* removed = nullptr) {
        const HashFamily family(cfg_.minhash.permutations, cfg_.minhash_seed());
        const auto params = lsh_params(cfg_.minhash.permutations, cfg_.minhash.threshold);
        std::vector<MinHashSignature> sigs(docs.size());
        std::vector<char> signable(docs.size(), 0);
        parallel_for(docs.size(), cfg_.workers, [&](std::size_t i) {
            const auto sh = shingle(docs[i].text, *res_.tokenizer);
            if (sh.empty()) return;
            sigs[i] = signature(docs[i].id, sh, family);
            signable[i] = 1;
        });
        std::vector<MinHashSignature> signed_docs;
        for (std::size_t i = 0; i < docs.size(); ++i) {
            if (signable[i]) {
                signed_docs.push_back(std::move(sigs[i]));
            } else {
                ++counters_["minhash.unsignable"];
            }
        }
        DedupOptions opts;
        opts.verify = cfg_.minhash.verify;
        opts.verify_threshold = cfg_.minhash.threshold;
        if (!cfg_.minhash.spill_dir.empty()) {
            opts.index.spill_dir = cfg_.minhash.spill_dir / language;
            opts.index.max_buffered = cfg_.minhash.max_buffered;
            write_signatures(cfg_.minhash.spill_dir / (language + ".sig"), signed_docs);
        }
        const auto result = corpusclean::minhash_dedup(signed_docs, params, opts);
        std::unordered_set<uint64_t> drop;
        for (const auto& p : result.removed) drop.insert(to_u64(p.removed));
        if (removed != nullptr) *removed = result.removed;
        std::vector<char> keep(docs.size());
        for (std::size_t i = 0; i < docs.size(); ++i) keep[i] = drop.contains(to_u64(docs[i].id)) ? 0 : 1;
        return select(std::move(docs), keep, "minhash.removed");
    }

    std::vector<Document> url_dedup(std::vector<Document> docs, std::vector<DuplicatePair>* removed = nullptr) {
        std::vector<UrlDedupInput> in;
        in.reserve(docs.size());
        for (const auto& d : docs) in.push_back({d.id, d.url});
        const auto result = corpusclean::url_dedup(in);
        std::unordered_set<uint64_t> drop;
        for (const auto& p : result.removed) drop.insert(to_u64(p.removed));
        if (removed != nullptr) *removed = result.removed;
        std::vector<char> keep(docs.size());
        for (std::size_t i = 0; i < docs.size(); ++i) keep[i] = drop.contains(to_u64(docs[i].id)) ? 0 : 1;
        return select(std::move(docs), keep, "url_dedup.removed");
    }

    LangCounts count(const std::vector<Document>& docs) const {
        std::vector<uint64_t> tokens(docs.size());
        parallel_for(docs.size(), cfg_.workers,
                     [&](std::size_t i) { tokens[i] = res_.tokenizer->tokenize(docs[i].text).size(); });
        LangCounts c;
        c.documents = docs.size();
        for (auto t : tokens) c.tokens += t;
        return c;
    }

    // ---- orchestration --------------------------------------------------------

    /// Full run. Writes cleaned/<lang>.jsonl, policies/<lang>.json,
    /// duplicates/<lang>.{minhash,url}.tsv, stages/<stage>/<lang>.jsonl (unless
    /// fused) and report.json under the output directory. A failing stage
    /// still writes the partial report, marked incomplete, then rethrows.
    RunReport run() {
        RunReport rep;
        rep.seed = cfg_.seed;
        counters_.clear();
        const auto& out = cfg_.output_dir;
        try {
            fs::create_directories(out);
            auto by_lang = group(ingest());
            for (auto& [lang, docs] : by_lang) rep.at(Stage::initial).per_language[lang] = count(docs);

            for (auto& [lang, docs_in] : by_lang) {
                auto docs = langid(std::move(docs_in));
                record(rep, Stage::langid, lang, docs);

                docs = url_filter(std::move(docs));
                record(rep, Stage::url_filter, lang, docs);

                if (!docs.empty()) {
                    attach_metrics(docs);
                    materialize("metrics", lang, docs);
                    const auto policy = policy_for(lang, docs);
                    save_policy(policy, out / "policies" / (lang + ".json"));
                    docs = apply(std::move(docs), policy);
                }
                record(rep, Stage::metric_filter, lang, docs);

                docs = refine(std::move(docs));
                record(rep, Stage::refine, lang, docs);

                const bool dedup = docs.size() > cfg_.dedup_gate;
                std::vector<DuplicatePair> removed;
                if (dedup) {
                    docs = minhash_dedup(std::move(docs), lang, &removed);
                    write_duplicates_report(out / "duplicates" / (lang + ".minhash.tsv"), removed);
                } else {
                    rep.at(Stage::minhash_dedup).gated.insert(lang);
                }
                record(rep, Stage::minhash_dedup, lang, docs);

                if (dedup) {
                    docs = url_dedup(std::move(docs), &removed);
                    write_duplicates_report(out / "duplicates" / (lang + ".url.tsv"), removed);
                } else {
                    rep.at(Stage::url_dedup).gated.insert(lang);
                }
                record(rep, Stage::url_dedup, lang, docs);

                write_documents(out / "cleaned" / (lang + ".jsonl"), docs);
            }
        } catch (const std::exception& e) {
            rep.complete = false;
            rep.error = e.what();
            rep.counters = counters_;
            write_report(rep, out / "report.json");
            throw;
        }
        rep.counters = counters_;
        write_report(rep, out / "report.json");
        return rep;
    }

    /// Builds and applies policies for every (q_low, q_high) pair on the
    /// metered, URL-filtered documents without writing any output.
    std::vector<SweepRow> sweep(std::span<const std::pair<double, double>> grid) {
        if (grid.empty()) throw ConfigError("sweep grid is empty");
        auto by_lang = group(ingest());
        for (auto& [lang, docs] : by_lang) {
            docs = url_filter(langid(std::move(docs)));
            attach_metrics(docs);
        }
        std::vector<SweepRow> rows;
        for (auto [q_low, q_high] : grid) {
            SweepRow row;
            row.q_low = q_low;
            row.q_high = q_high;
            for (const auto& [lang, docs] : by_lang) {
                if (docs.empty()) continue;
                const auto policy = build_thresholds(lang, docs, q_low, q_high);
                for (const auto& d : docs) {
                    const auto dec = apply_policy(*d.metrics, policy);
                    ++row.documents;
                    if (!dec.keep) ++row.dropped;
                    for (Metric m : dec.violations) ++row.violations[m];
                }
            }
            rows.push_back(std::move(row));
        }
        return rows;
    }

    static void write_report(const RunReport& rep, const fs::path& path) {
        if (path.has_parent_path()) fs::create_directories(path.parent_path());
        std::ofstream f(path, std::ios::trunc);
        if (!f) throw IoError("cannot write report " + path.string());
        f << rep.to_json().dump(2) << "\n";
    }

    static RunReport read_report(const fs::path& path) {
        std::ifstream f(path);
        if (!f) throw IoError("cannot read report " + path.string());
        nlohmann::json j = nlohmann::json::parse(f, nullptr, false);
        if (j.is_discarded()) throw Error("report " + path.string() + " is not valid JSON");
        return RunReport::from_json(j);
    }

private:
    void init() {
        if (!cfg_.languages.empty()) allowlist_.insert(cfg_.languages.begin(), cfg_.languages.end());
    }

    bool allowed(const std::string& lang) const { return allowlist_.empty() || allowlist_.contains(lang); }

    const LanguageModel* lm_for(const std::string& lang) const {
        auto it = res_.lms.find(lang);
        return it == res_.lms.end() ? nullptr : &it->second;
    }

    std::vector<Document> select(std::vector<Document> docs, const std::vector<char>& keep, const std::string& counter) {
        std::vector<Document> out;
        out.reserve(docs.size());
        uint64_t dropped = 0;
        for (std::size_t i = 0; i < docs.size(); ++i) {
            if (keep[i]) {
                out.push_back(std::move(docs[i]));
            } else {
                ++dropped;
            }
        }
        counters_[counter] += dropped;
        return out;
    }

    void record(RunReport& rep, Stage stage, const std::string& lang, const std::vector<Document>& docs) {
        rep.at(stage).per_language[lang] = count(docs);
        materialize(stage_name(stage), lang, docs);
    }

    void materialize(std::string_view stage, const std::string& lang, const std::vector<Document>& docs) const {
        if (cfg_.fused) return;
        write_documents(cfg_.output_dir / "stages" / std::string(stage) / (lang + ".jsonl"), docs);
    }

    PipelineConfig cfg_;
    Resources res_;
    std::unordered_set<std::string> allowlist_;
    std::map<std::string, uint64_t> counters_;
};

}  // namespace corpusclean
