// corpusclean: command-line front end for the cleaning pipeline.
// Exit codes: 0 success, 1 fatal error, 2 configuration error.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "corpusclean/pipeline.hpp"

namespace cc = corpusclean;
namespace fs = std::filesystem;

namespace {

struct Common {
    std::string config;
    std::vector<std::string> overrides;
    std::optional<uint64_t> seed;
    std::optional<std::size_t> workers;
};

void add_common(CLI::App* app, Common& c) {
    app->add_option("-c,--config", c.config, "JSON config file");
    app->add_option("--set", c.overrides, "Config override key=value (repeatable), e.g. minhash.permutations=128");
    app->add_option("--seed", c.seed, "Run seed (also CORPUSCLEAN_SEED)");
    app->add_option("-j,--workers", c.workers, "Worker threads (0 = all cores)");
}

cc::PipelineConfig make_config(const Common& c, const std::vector<std::string>& extra = {}) {
    cc::PipelineConfig cfg = c.config.empty() ? cc::PipelineConfig{} : cc::PipelineConfig::load(c.config);
    cc::apply_seed_env(cfg);
    for (const auto& kv : extra) cfg.set(kv);
    for (const auto& kv : c.overrides) cfg.set(kv);
    if (c.seed) cfg.seed = *c.seed;
    if (c.workers) cfg.workers = *c.workers;
    cfg.validate();
    return cfg;
}

// Named flags are sugar for --set; empty values are left alone.
void flag(std::vector<std::string>& out, const std::string& key, const std::string& value) {
    if (!value.empty()) out.push_back(key + "=" + value);
}

std::string json_string(const std::string& s) { return nlohmann::json(s).dump(); }

std::vector<cc::Document> read_stage(const fs::path& path) {
    std::vector<cc::Document> docs;
    cc::IngestStats stats;
    const auto shards = cc::list_shards(path);
    for (std::size_t s = 0; s < shards.size(); ++s) {
        auto part = cc::ingest(shards[s], s, &stats);
        std::move(part.begin(), part.end(), std::back_inserter(docs));
    }
    if (stats.skipped() > 0) std::cerr << "skipped " << stats.skipped() << " malformed records\n";
    return docs;
}

std::vector<cc::Document> flatten(cc::Pipeline::ByLanguage by_lang) {
    std::vector<cc::Document> out;
    for (auto& [lang, docs] : by_lang) std::move(docs.begin(), docs.end(), std::back_inserter(out));
    std::stable_sort(out.begin(), out.end(), [](const cc::Document& a, const cc::Document& b) { return a.id < b.id; });
    return out;
}

void print_counters(const cc::Pipeline& p) {
    for (const auto& [k, v] : p.counters()) std::cerr << k << '\t' << v << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multilingual web-corpus cleaning and deduplication"};
    app.require_subcommand(1);

    Common common;
    std::string input, output, report, policy_dir, model;
    std::vector<std::string> categories;
    std::string blacklist_root, wordlists, lm_dir, vocab;
    double q_low = 0, q_high = 0, sample_fraction = 0;
    std::size_t permutations = 0;
    double mh_threshold = 0;
    int order = 5;
    uint64_t min_count = 1;
    bool jsonl_input = false;

    auto* ingest = app.add_subcommand("ingest", "Read raw shards and assign document ids");
    ingest->add_option("-i,--input", input, "Input file or directory of shards")->required();
    ingest->add_option("-o,--output", output, "Output JSONL")->required();

    auto* langid = app.add_subcommand("langid", "Drop documents whose label the classifier rejects");
    langid->add_option("--model", model, "fastText model (.bin/.ftz); default: script classifier");

    auto* urlfilter = app.add_subcommand("urlfilter", "Drop documents with blacklisted URLs");
    urlfilter->add_option("--blacklist-root", blacklist_root, "UT1-style blacklist directory");
    urlfilter->add_option("--category", categories, "Blacklist category (repeatable)");

    auto* metrics = app.add_subcommand("metrics", "Attach the twelve quality metrics");
    metrics->add_option("--wordlists", wordlists, "Directory with stopwords/<lang>.txt and flagged/<lang>.txt");
    metrics->add_option("--lm-dir", lm_dir, "Directory with <lang>.lm models");
    metrics->add_option("--tokenizer-vocab", vocab, "Unigram .vocab file (default: Unicode word segmentation)");

    auto* thresholds = app.add_subcommand("thresholds", "Build per-language threshold policies");
    thresholds->add_option("--policy-dir", policy_dir, "Where to write <lang>.json policies")->required();
    thresholds->add_option("--q-low", q_low, "Percentile for favor_high metrics");
    thresholds->add_option("--q-high", q_high, "Percentile for favor_low metrics");
    thresholds->add_option("--sample-fraction", sample_fraction, "Bernoulli sample fraction");

    auto* apply = app.add_subcommand("apply", "Drop documents violating their language's policy");
    apply->add_option("--policy-dir", policy_dir, "Directory of <lang>.json policies")->required();

    auto* refine = app.add_subcommand("refine", "Trim trailing short lines and stray JS lines");

    auto* dedup_minhash = app.add_subcommand("dedup-minhash", "MinHash LSH near-duplicate removal per language");
    dedup_minhash->add_option("--report", report, "Duplicates TSV (survivor_id, removed_id)");
    dedup_minhash->add_option("--permutations", permutations, "Signature length P");
    dedup_minhash->add_option("--threshold", mh_threshold, "Jaccard threshold");

    auto* dedup_url = app.add_subcommand("dedup-url", "Exact URL deduplication per language");
    dedup_url->add_option("--report", report, "Duplicates TSV (survivor_id, removed_id)");

    for (auto* sc : {langid, urlfilter, metrics, thresholds, apply, refine, dedup_minhash, dedup_url}) {
        sc->add_option("-i,--input", input, "Input JSONL file or directory")->required();
    }
    for (auto* sc : {langid, urlfilter, metrics, apply, refine, dedup_minhash, dedup_url}) {
        sc->add_option("-o,--output", output, "Output JSONL")->required();
    }

    auto* run = app.add_subcommand("run", "Run every stage as configured");
    run->add_option("-i,--input", input, "Input file or directory (overrides config)");
    run->add_option("-o,--output", output, "Output directory (overrides config)");

    auto* sweep = app.add_subcommand("sweep", "Drop rates over a grid of percentile pairs");
    sweep->add_option("-i,--input", input, "Input file or directory (overrides config)");
    std::vector<std::string> grid_spec;
    sweep->add_option("--pair", grid_spec, "q_low,q_high (repeatable); default: the five-pair grid");

    auto* report_cmd = app.add_subcommand("report", "Print the stage x language table of a run report");
    report_cmd->add_option("-i,--input", input, "report.json")->required();

    auto* train_lm = app.add_subcommand("train-lm", "Train a Kneser-Ney n-gram model");
    train_lm->add_option("-i,--input", input, "Training text, one sentence per line")->required();
    train_lm->add_option("-o,--output", output, "Model file")->required();
    train_lm->add_option("--order", order, "N-gram order")->check(CLI::Range(1, 16));
    train_lm->add_option("--min-count", min_count, "Rarer words map to <unk>");
    train_lm->add_flag("--jsonl", jsonl_input, "Input is JSONL; each text line is a sentence");
    train_lm->add_option("--tokenizer-vocab", vocab, "Unigram .vocab file (default: Unicode word segmentation)");

    auto* export_arpa = app.add_subcommand("export-arpa", "Write a model in ARPA text format");
    export_arpa->add_option("--model", model, "Model file")->required();
    export_arpa->add_option("-o,--output", output, "ARPA file (default: stdout)");

    for (auto* sc : app.get_subcommands({})) add_common(sc, common);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        std::vector<std::string> extra;
        flag(extra, "langid.model", model.empty() ? "" : json_string(model));
        flag(extra, "url_filter.blacklist_root", blacklist_root.empty() ? "" : json_string(blacklist_root));
        if (!categories.empty()) extra.push_back("url_filter.categories=" + nlohmann::json(categories).dump());
        flag(extra, "metrics.wordlist_dir", wordlists.empty() ? "" : json_string(wordlists));
        flag(extra, "metrics.lm_dir", lm_dir.empty() ? "" : json_string(lm_dir));
        flag(extra, "metrics.tokenizer_vocab", vocab.empty() ? "" : json_string(vocab));
        if (q_low > 0) extra.push_back("thresholds.q_low=" + std::to_string(q_low));
        if (q_high > 0) extra.push_back("thresholds.q_high=" + std::to_string(q_high));
        if (sample_fraction > 0) extra.push_back("thresholds.sample_fraction=" + std::to_string(sample_fraction));
        if (permutations > 0) extra.push_back("minhash.permutations=" + std::to_string(permutations));
        if (mh_threshold > 0) extra.push_back("minhash.threshold=" + std::to_string(mh_threshold));

        if (*report_cmd) {
            std::cout << cc::Pipeline::read_report(input).table();
            return 0;
        }
        if (*export_arpa) {
            const auto lm = cc::LanguageModel::load(model);
            if (output.empty()) {
                lm.write_arpa(std::cout);
            } else {
                std::ofstream out(output);
                if (!out) throw cc::IoError("cannot write " + output);
                lm.write_arpa(out);
            }
            return 0;
        }
        if (*train_lm) {
            std::unique_ptr<cc::Tokenizer> tok;
            if (vocab.empty()) {
                tok = std::make_unique<cc::UnicodeWordTokenizer>();
            } else {
                tok = std::make_unique<cc::UnigramTokenizer>(vocab);
            }
            std::vector<std::vector<std::string>> sentences;
            auto add_text = [&](std::string_view text) {
                for (auto line : cc::unicode::split_lines(text)) {
                    auto t = tok->tokenize(line);
                    if (!t.empty()) sentences.push_back(std::move(t));
                }
            };
            if (jsonl_input) {
                for (const auto& d : read_stage(input)) add_text(d.text);
            } else {
                cc::LineReader reader(input);
                std::string line;
                while (reader.next(line)) add_text(line);
            }
            cc::LmTrainOptions opts;
            opts.order = order;
            opts.min_count = min_count;
            const auto lm = cc::LanguageModel::train(sentences, opts);
            lm.save(output);
            std::cerr << "trained order-" << order << " model on " << sentences.size() << " sentences, vocabulary "
                      << lm.vocab_size() << "\n";
            return 0;
        }

        if (*run || *sweep) {
            if (!input.empty()) extra.push_back("input=" + json_string(input));
            if (!output.empty() && *run) extra.push_back("output_dir=" + json_string(output));
        }
        auto cfg = make_config(common, extra);

        if (*ingest) {
            cfg.input = input;
            cc::Pipeline p(std::move(cfg));
            auto docs = p.ingest();
            cc::write_documents(output, docs);
            std::cerr << "ingested " << docs.size() << " documents\n";
            print_counters(p);
            return 0;
        }
        if (*run) {
            if (cfg.input.empty()) throw cc::ConfigError("no input: set 'input' in the config or pass --input");
            cc::Pipeline p(std::move(cfg));
            const auto rep = p.run();
            std::cout << rep.table();
            return 0;
        }
        if (*sweep) {
            if (cfg.input.empty()) throw cc::ConfigError("no input: set 'input' in the config or pass --input");
            std::vector<std::pair<double, double>> grid;
            for (const auto& s : grid_spec) {
                double a = 0, b = 0;
                if (std::sscanf(s.c_str(), "%lf,%lf", &a, &b) != 2 || !(a > 0 && a < b && b < 100)) {
                    throw cc::ConfigError("bad --pair '" + s + "', expected q_low,q_high");
                }
                grid.emplace_back(a, b);
            }
            if (grid.empty()) grid.assign(cc::kPercentileGrid.begin(), cc::kPercentileGrid.end());
            cc::Pipeline p(std::move(cfg));
            std::cout << cc::sweep_table(p.sweep(grid));
            return 0;
        }

        // Single-stage subcommands over a stage file.
        cc::Pipeline p(std::move(cfg));
        auto docs = read_stage(input);
        if (*langid) {
            docs = p.langid(std::move(docs));
        } else if (*urlfilter) {
            docs = p.url_filter(std::move(docs));
        } else if (*metrics) {
            p.attach_metrics(docs);
        } else if (*thresholds) {
            for (const auto& [lang, part] : cc::Pipeline::group(std::move(docs))) {
                const auto policy = p.policy_for(lang, part);
                cc::save_policy(policy, fs::path(policy_dir) / (lang + ".json"));
                std::cerr << "wrote policy for " << lang << " (" << part.size() << " documents)\n";
            }
            return 0;
        } else if (*apply) {
            auto by_lang = cc::Pipeline::group(std::move(docs));
            for (auto& [lang, part] : by_lang) {
                const auto path = fs::path(policy_dir) / (lang + ".json");
                if (!fs::exists(path)) throw cc::ConfigError("no policy for language " + lang + " in " + policy_dir);
                part = p.apply(std::move(part), cc::load_policy(path));
            }
            docs = flatten(std::move(by_lang));
        } else if (*refine) {
            docs = p.refine(std::move(docs));
        } else if (*dedup_minhash || *dedup_url) {
            auto by_lang = cc::Pipeline::group(std::move(docs));
            std::vector<cc::DuplicatePair> all;
            for (auto& [lang, part] : by_lang) {
                std::vector<cc::DuplicatePair> removed;
                part = *dedup_minhash ? p.minhash_dedup(std::move(part), lang, &removed)
                                      : p.url_dedup(std::move(part), &removed);
                all.insert(all.end(), removed.begin(), removed.end());
            }
            if (!report.empty()) cc::write_duplicates_report(report, all);
            docs = flatten(std::move(by_lang));
        }
        cc::write_documents(output, docs);
        std::cerr << "wrote " << docs.size() << " documents\n";
        print_counters(p);
        return 0;
    } catch (const cc::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
