// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
// failure. Tolerances are pinned below.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <unistd.h>

#include "corpusclean/pipeline.hpp"

namespace cc = corpusclean;
namespace fs = std::filesystem;

namespace {

// Pinned tolerances.
constexpr double kMeanAbsErrorMax = 0.05;
constexpr double kSigmaCoverageMin = 0.99;
constexpr double kHighPairRecallMin = 0.95;
constexpr double kLowPairRateMax = 0.05;
constexpr double kSampleDriftMax = 0.02;
constexpr double kKnSumTol = 1e-6;
constexpr double kNoiseRemovalMin = 0.90;
constexpr double kDuplicateRemovalMin = 0.95;
constexpr double kCleanRetentionMin = 0.90;

struct Outcome {
    bool pass = false;
    std::string detail;
};

int failures = 0;

void report(const std::string& name, const std::function<Outcome()>& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
        o = fn();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!o.pass) ++failures;
    std::printf("%s %s: %s (%.1fs)\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str(), secs);
    std::fflush(stdout);
}

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), f, a, b, c, d);
    return buf;
}

class ScratchDir {
public:
    ScratchDir() : path_(fs::temp_directory_path() / ("cc_accept_" + std::to_string(::getpid()))) {
        fs::remove_all(path_);
        fs::create_directories(path_);
    }
    ~ScratchDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    const fs::path& path() const { return path_; }

private:
    fs::path path_;
};

std::vector<uint64_t> random_set(std::mt19937_64& rng, std::size_t n) {
    std::vector<uint64_t> s(n);
    for (auto& x : s) x = rng();
    std::sort(s.begin(), s.end());
    s.erase(std::unique(s.begin(), s.end()), s.end());
    return s;
}

std::pair<std::vector<uint64_t>, std::vector<uint64_t>> planted_pair(std::mt19937_64& rng, std::size_t shared,
                                                                     std::size_t own) {
    auto common = random_set(rng, shared);
    auto a = common, b = common;
    for (std::size_t i = 0; i < own; ++i) a.push_back(rng());
    for (std::size_t i = 0; i < own; ++i) b.push_back(rng());
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    return {a, b};
}

// ---------------------------------------------------------------------------

Outcome table_arithmetic() {
    const std::string total = fmt("%.2f", cc::filtering_rate(13506.76, 7228.91));
    const std::string en = fmt("%.2f", cc::filtering_rate(5783.24, 3241.07));
    return {total == "46.48" && en == "43.96", "total=" + total + " en=" + en};
}

std::string word_of(std::mt19937_64& rng, std::size_t len) {
    std::string w;
    for (std::size_t i = 0; i < len; ++i) w.push_back(static_cast<char>('a' + rng() % 26));
    return w;
}

// Exact Jaccard over the 5-word shingle strings themselves, no hashing.
double shingle_jaccard(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    auto grams = [](const std::vector<std::string>& w) {
        std::set<std::string> out;
        for (std::size_t i = 0; i + 5 <= w.size(); ++i) {
            out.insert(w[i] + " " + w[i + 1] + " " + w[i + 2] + " " + w[i + 3] + " " + w[i + 4]);
        }
        return out;
    };
    const auto x = grams(a), y = grams(b);
    std::size_t inter = 0;
    for (const auto& g : x) inter += y.count(g);
    return static_cast<double>(inter) / static_cast<double>(x.size() + y.size() - inter);
}

std::string join_words(const std::vector<std::string>& w) {
    std::string out;
    for (const auto& s : w) out += (out.empty() ? "" : " ") + s;
    return out;
}

Outcome minhash_unbiased() {
    std::mt19937_64 rng(2024);
    cc::UnicodeWordTokenizer tok;
    const int pairs = 1000;
    double abs_err = 0;
    int covered = 0;
    for (int i = 0; i < pairs; ++i) {
        std::vector<std::string> a;
        const std::size_t n = 60 + rng() % 140;
        for (std::size_t k = 0; k < n; ++k) a.push_back(word_of(rng, 5));
        auto b = a;
        // Mutate a random fraction of positions, so J spreads over (0, 1).
        const double frac = std::uniform_real_distribution<double>(0.002, 0.12)(rng);
        for (auto& w : b) {
            if (std::uniform_real_distribution<double>(0, 1)(rng) < frac) w = word_of(rng, 5);
        }
        const double j = shingle_jaccard(a, b);
        cc::HashFamily fam(128, static_cast<uint64_t>(i));
        const double est = cc::estimated_jaccard(cc::signature({}, cc::shingle(join_words(a), tok), fam),
                                                 cc::signature({}, cc::shingle(join_words(b), tok), fam));
        const double err = std::abs(est - j);
        abs_err += err;
        if (err <= 3 * std::sqrt(j * (1 - j) / 128) + 1e-12) ++covered;
    }
    const double mean = abs_err / pairs, coverage = static_cast<double>(covered) / pairs;
    return {mean <= kMeanAbsErrorMax && coverage >= kSigmaCoverageMin,
            fmt("mean|err|=%.4f (<= %.2f), within 3 sigma %.3f (>= %.2f)", mean, kMeanAbsErrorMax, coverage,
                kSigmaCoverageMin)};
}

// Cluster representative of every slot after dedup: survivor of its removal.
Outcome lsh_recall_precision() {
    const std::size_t total = 5000, planted = 200;
    const auto params = cc::lsh_params(cc::kDefaultPermutations, cc::kDefaultJaccardThreshold);
    double high_sum = 0, low_sum = 0;
    for (uint64_t seed = 0; seed < 10; ++seed) {
        std::mt19937_64 rng(seed * 7919 + 1);
        std::vector<std::vector<uint64_t>> sets;
        for (std::size_t i = 0; i < planted; ++i) {
            auto [a, b] = planted_pair(rng, 90, 5);  // J = 90/100
            sets.push_back(std::move(a));
            sets.push_back(std::move(b));
        }
        for (std::size_t i = 0; i < planted; ++i) {
            auto [a, b] = planted_pair(rng, 50, 25);  // J = 50/100
            sets.push_back(std::move(a));
            sets.push_back(std::move(b));
        }
        while (sets.size() < total) sets.push_back(random_set(rng, 100));

        cc::HashFamily fam(cc::kDefaultPermutations, seed);
        std::vector<cc::MinHashSignature> sigs(sets.size());
        const auto workers = std::max(1u, std::thread::hardware_concurrency());
        cc::parallel_for(sets.size(), workers, [&](std::size_t i) {
            sigs[i] = cc::signature(cc::make_doc_id(0, i), sets[i], fam);
        });
        const auto r = cc::minhash_dedup(sigs, params);
        std::vector<uint64_t> root(sets.size());
        std::iota(root.begin(), root.end(), 0);
        for (const auto& p : r.removed) root[cc::to_u64(p.removed)] = cc::to_u64(p.survivor);
        std::size_t high = 0, low = 0;
        for (std::size_t i = 0; i < planted; ++i) high += root[2 * i] == root[2 * i + 1];
        for (std::size_t i = planted; i < 2 * planted; ++i) low += root[2 * i] == root[2 * i + 1];
        high_sum += static_cast<double>(high) / planted;
        low_sum += static_cast<double>(low) / planted;
    }
    const double high = high_sum / 10, low = low_sum / 10;
    return {high >= kHighPairRecallMin && low <= kLowPairRateMax,
            fmt("P=%g b=%g r=%g: ", static_cast<double>(cc::kDefaultPermutations), static_cast<double>(params.bands),
                static_cast<double>(params.rows)) +
                fmt("high pairs clustered %.4f (>= %.2f), low pairs %.4f (<= %.2f)", high, kHighPairRecallMin, low,
                    kLowPairRateMax)};
}

double sort_oracle(std::vector<double> v, int q) {
    std::sort(v.begin(), v.end());
    const auto n = static_cast<long long>(v.size());
    const long long rank = std::clamp((q * n + 99) / 100, 1LL, n);
    return v[static_cast<std::size_t>(rank - 1)];
}

Outcome percentile_oracle() {
    std::mt19937_64 rng(31);
    const std::array<int, 10> qs{5, 10, 15, 20, 25, 75, 80, 85, 90, 95};
    int mismatches = 0, checks = 0;
    for (int t = 0; t < 10000; ++t) {
        std::vector<double> v(1 + rng() % 1000);
        const bool ties = rng() % 2;
        for (auto& x : v) {
            x = ties ? static_cast<double>(rng() % 20) : std::normal_distribution<double>(0, 10)(rng);
        }
        for (int q : qs) {
            ++checks;
            if (cc::percentile(v, q) != sort_oracle(v, q)) ++mismatches;
        }
    }
    return {mismatches == 0, std::to_string(checks) + " checks, " + std::to_string(mismatches) + " mismatches"};
}

Outcome threshold_representativeness() {
    std::mt19937_64 rng(41);
    std::gamma_distribution<double> gamma(2.0, 3.0);
    std::uniform_real_distribution<double> u(0, 1);
    std::vector<cc::ScoredDoc> stream;
    for (std::size_t i = 0; i < 100000; ++i) {
        cc::MetricVector mv;
        for (auto m : cc::kAllMetrics) mv[m] = cc::MetricVector::disabled();
        mv[cc::Metric::perplexity] = gamma(rng);
        mv[cc::Metric::lid_confidence] = u(rng);
        stream.push_back({cc::make_doc_id(0, i), mv});
    }
    auto drop = [&](const cc::ThresholdPolicy& p) {
        std::size_t n = 0;
        for (const auto& d : stream) n += cc::apply_policy(d.metrics, p).keep ? 0 : 1;
        return static_cast<double>(n) / static_cast<double>(stream.size());
    };
    const double full = drop(cc::build_policy("xx", stream));
    double worst = 0;
    for (uint64_t seed = 0; seed < 5; ++seed) {
        const double part = drop(cc::build_policy("xx", stream, {.sample_fraction = 0.25, .seed = seed}));
        worst = std::max(worst, std::abs(part - full));
    }
    return {worst <= kSampleDriftMax,
            fmt("full-sample drop %.4f, worst 25%%-sample drift %.4f over 5 seeds (<= %.2f)", full, worst,
                kSampleDriftMax)};
}

using Sentences = std::vector<std::vector<std::string>>;

Outcome kneser_ney() {
    std::mt19937_64 rng(51);
    // Normalization over orders 1-5 with vocabularies of at most 10 words.
    double worst = 0;
    std::size_t contexts = 0, models = 0;
    for (int order = 1; order <= 5; ++order) {
        for (int rep = 0; rep < 6; ++rep) {
            const std::size_t vocab = 2 + rng() % 9;
            Sentences corpus;
            for (int s = 0; s < 25; ++s) {
                std::vector<std::string> sent(1 + rng() % 10);
                for (auto& w : sent) w = "w" + std::to_string(std::min(rng() % vocab, rng() % vocab));
                corpus.push_back(sent);
            }
            const auto lm = cc::LanguageModel::train(corpus, {.order = order});
            ++models;
            lm.for_each_context([&](const std::u32string& ctx) {
                const std::vector<cc::LanguageModel::WordId> hist(ctx.begin(), ctx.end());
                double sum = 0;
                for (cc::LanguageModel::WordId w = 0; w < lm.vocab_size(); ++w) {
                    if (w != cc::LanguageModel::kBos) sum += std::pow(10.0, lm.log10_prob(hist, w));
                }
                worst = std::max(worst, std::abs(sum - 1.0));
                ++contexts;
            });
        }
    }
    // Training text versus the same tokens shuffled within each sentence.
    int ordered_wins = 0;
    for (int f = 0; f < 20; ++f) {
        const std::size_t vocab = 4 + rng() % 7;
        std::vector<std::size_t> next(vocab);
        for (auto& x : next) x = rng() % vocab;
        Sentences corpus;
        for (int s = 0; s < 60; ++s) {
            std::vector<std::string> sent;
            std::size_t w = rng() % vocab;
            for (std::size_t k = 0, len = 4 + rng() % 8; k < len; ++k) {
                sent.push_back("t" + std::to_string(w));
                w = rng() % 4 == 0 ? rng() % vocab : next[w];
            }
            corpus.push_back(sent);
        }
        const auto lm = cc::LanguageModel::train(corpus, {.order = 3});
        auto ppl = [&](const Sentences& c) {
            double lp = 0;
            std::size_t n = 0;
            for (const auto& s : c) {
                std::size_t k = 0;
                lp += lm.sentence_log10(s, &k);
                n += k;
            }
            return std::pow(10.0, -lp / static_cast<double>(n));
        };
        auto shuffled = corpus;
        for (auto& s : shuffled) std::shuffle(s.begin(), s.end(), rng);
        ordered_wins += ppl(corpus) < ppl(shuffled);
    }
    return {worst <= kKnSumTol && ordered_wins == 20,
            fmt("%g models, %g contexts, max |sum-1| = %.2e; ", static_cast<double>(models), static_cast<double>(contexts), worst) +
                std::to_string(ordered_wins) + "/20 fixtures with train ppl < shuffled ppl"};
}

std::string lines(std::initializer_list<std::string> ls) {
    std::string out;
    for (const auto& l : ls) {
        if (&l != ls.begin()) out += '\n';
        out += l;
    }
    return out;
}

Outcome refinement() {
    const auto kws = cc::JsKeywordSet::defaults();
    const std::string L150(150, 'x'), L120(120, 'x'), L20(20, 'x'), L30(30, 'x'), L10(10, 'x');
    const std::string prose = "The committee met on Tuesday to review the annual budget and the hiring plan.";
    int ok = 0;
    // Trailing short lines.
    ok += cc::trim_trailing_short_lines(lines({L150, L120, L20, L30})).text == lines({L150, L120});
    ok += cc::trim_trailing_short_lines(lines({L20, L150})).text == lines({L20, L150});
    {
        const auto r = cc::trim_trailing_short_lines(lines({L10, L10}));
        ok += r.text == lines({L10, L10}) && r.all_short;
    }
    // JavaScript lines.
    ok += cc::strip_js_line(lines({prose, "<script>var x = 1;</script>", prose}), kws).text == lines({prose, prose});
    {
        const auto t = lines({"function a() {}", prose, "function b() {}", "function c() {}"});
        ok += cc::strip_js_line(t, kws).text == t;
    }
    {
        const auto t = lines({prose, "var total is computed below", prose});
        ok += cc::strip_js_line(t, kws).text == t;
    }

    const std::vector<std::string> pool = {L150, std::string(99, 'y'), std::string(100, 'z'), "", "x", prose,
                                           "<script>", "var a = 1", "() => 2", "function f() {}",
                                           "document.title = 'a';", "covariance of x", "</script>", "  \r"};
    std::mt19937_64 rng(61);
    int stable = 0;
    for (int i = 0; i < 1000; ++i) {
        std::string text;
        for (std::size_t k = 0, n = rng() % 9; k < n; ++k) text += (k ? "\n" : "") + pool[rng() % pool.size()];
        const auto once = cc::refine(text, kws);
        stable += cc::refine(once.text, kws).text == once.text;
    }
    return {ok == 6 && stable == 1000,
            std::to_string(ok) + "/6 fixtures, idempotent on " + std::to_string(stable) + "/1000 documents"};
}

// ---------------------------------------------------------------------------
// End-to-end synthetic corpus.

enum class Kind { clean, wrong_language, blacklisted, js_dump, spam, exact_dup, near_dup };

constexpr std::array<const char*, 7> kKindNames = {"clean", "wrong_language", "blacklisted", "js_dump",
                                                   "spam",  "exact_dup",      "near_dup"};

struct Synthetic {
    std::map<std::string, Kind> kind;  // by input id
};

// Every clean document has the same shape (5 lines x 25 six-letter words), so
// clean metric vectors coincide and percentile thresholds land on them.
struct Writer {
    std::mt19937_64 rng;
    bool cyrillic;

    std::string word() {
        // Every letter here is two bytes in UTF-8.
        static const std::string cyr = "абвгдежзийклмнопрстуфхцчшщыэюя";
        std::string w;
        for (int i = 0; i < 6; ++i) {
            if (cyrillic) {
                w += cyr.substr(2 * (rng() % (cyr.size() / 2)), 2);
            } else {
                w.push_back(static_cast<char>('a' + rng() % 26));
            }
        }
        return w;
    }
    std::vector<std::string> words(std::size_t n) {
        std::vector<std::string> out(n);
        for (auto& w : out) w = word();
        return out;
    }
};

std::string layout(const std::vector<std::string>& w) {
    std::string out;
    for (std::size_t i = 0; i < w.size(); ++i) {
        if (i) out += (i % 25 == 0) ? '\n' : ' ';
        out += w[i];
    }
    return out;
}

std::string js_dump(std::mt19937_64& rng) {
    std::string out;
    for (int l = 0; l < 5; ++l) {
        const auto id = std::to_string(rng() % 100000);
        out += (l ? "\n" : "") + std::string("<script>var v") + id + " = function(e) { return document.getElementById('n" +
               id + "').value; };</script>";
    }
    return out;
}

void build_language(const fs::path& file, const std::string& lang, bool cyrillic, uint64_t seed, Synthetic& syn) {
    const std::size_t n = 5000, share = 250;
    Writer w{std::mt19937_64(seed), cyrillic};
    Writer other{std::mt19937_64(seed + 1), !cyrillic};
    const std::array<const char*, 4> blocked = {"casino.example", "www.bet.example", "xxx.example",
                                                "login-verify.example"};

    std::vector<Kind> plan;
    for (Kind k : {Kind::wrong_language, Kind::blacklisted, Kind::js_dump, Kind::spam}) plan.insert(plan.end(), share, k);
    plan.insert(plan.end(), n - 6 * share, Kind::clean);
    std::shuffle(plan.begin(), plan.end(), w.rng);

    std::ostringstream out;
    std::vector<std::vector<std::string>> clean_words;
    auto emit = [&](std::size_t i, Kind k, const std::string& text, const std::string& host) {
        const std::string id = lang + "-" + std::to_string(i);
        syn.kind[id] = k;
        nlohmann::ordered_json j;
        j["id"] = id;
        j["text"] = text;
        j["url"] = "https://" + host + "/doc/" + std::to_string(i);
        j["language"] = lang;
        out << j.dump() << '\n';
    };
    std::size_t i = 0;
    for (Kind k : plan) {
        std::string host = lang + ".site" + std::to_string(i % 997) + ".example";
        std::string text;
        switch (k) {
            case Kind::clean: {
                auto ws = w.words(125);
                text = layout(ws);
                clean_words.push_back(std::move(ws));
                break;
            }
            case Kind::wrong_language: text = layout(other.words(125)); break;
            case Kind::blacklisted:
                text = layout(w.words(125));
                host = blocked[i % blocked.size()];
                break;
            case Kind::js_dump: text = js_dump(w.rng); break;
            case Kind::spam: {
                const auto line = layout(w.words(25));
                text = line + "\n" + line + "\n" + line + "\n" + line + "\n" + line;
                break;
            }
            default: break;
        }
        emit(i++, k, text, host);
    }
    // Copies come last so the original always has the smaller id.
    for (std::size_t c = 0; c < 2 * share; ++c) {
        auto ws = clean_words[c];
        Kind k = Kind::exact_dup;
        if (c >= share) {
            // Two far-apart substitutions: J = (121 - 10) / (121 + 10) = 0.847.
            ws[40] = w.word();
            ws[85] = w.word();
            k = Kind::near_dup;
        }
        emit(i++, k, layout(ws), lang + ".mirror" + std::to_string(c) + ".example");
    }
    std::ofstream(file) << out.str();
}

std::map<std::string, std::string> tree(const fs::path& root) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
        if (!e.is_regular_file()) continue;
        std::ifstream in(e.path(), std::ios::binary);
        out[fs::relative(e.path(), root).string()] = {std::istreambuf_iterator<char>(in),
                                                      std::istreambuf_iterator<char>()};
    }
    return out;
}

struct E2E {
    ScratchDir dir;
    Synthetic syn;
    cc::PipelineConfig cfg;
    std::optional<cc::RunReport> first;

    E2E() {
        fs::create_directories(dir.path() / "in");
        build_language(dir.path() / "in" / "en.jsonl", "en", false, 71, syn);
        build_language(dir.path() / "in" / "ru.jsonl", "ru", true, 72, syn);
        cfg.input = dir.path() / "in";
        cfg.output_dir = dir.path() / "run1";
        cfg.seed = 12345;
        cfg.url_filter.blacklist_root = fs::path(CORPUSCLEAN_TEST_DATA) / "blacklist";
        cfg.url_filter.categories = {"adult", "gambling", "phishing"};
        // 5000 documents per language would sit under the default gate.
        cfg.dedup_gate = 0;
    }
};

Outcome end_to_end(E2E& e) {
    e.first = cc::Pipeline(e.cfg).run();
    std::set<std::string> kept;
    for (const char* lang : {"en", "ru"}) {
        for (const auto& d : cc::ingest(e.cfg.output_dir / "cleaned" / (std::string(lang) + ".jsonl"), 0)) {
            kept.insert(d.extra.at("input_id").get<std::string>());
        }
    }
    std::map<Kind, std::pair<std::size_t, std::size_t>> tally;  // removed, total
    for (const auto& [id, k] : e.syn.kind) {
        auto& t = tally[k];
        ++t.second;
        t.first += kept.contains(id) ? 0 : 1;
    }
    auto removed = [&](Kind k) { return static_cast<double>(tally[k].first) / static_cast<double>(tally[k].second); };

    bool ok = true;
    std::string detail;
    for (Kind k : {Kind::wrong_language, Kind::blacklisted, Kind::js_dump, Kind::spam}) {
        ok &= removed(k) >= kNoiseRemovalMin;
        detail += std::string(kKindNames[static_cast<std::size_t>(k)]) + fmt(" removed %.3f, ", removed(k));
    }
    const auto dup_removed = tally[Kind::exact_dup].first + tally[Kind::near_dup].first;
    const auto dup_total = tally[Kind::exact_dup].second + tally[Kind::near_dup].second;
    const double dup = static_cast<double>(dup_removed) / static_cast<double>(dup_total);
    ok &= dup >= kDuplicateRemovalMin;
    const double clean_kept = 1.0 - removed(Kind::clean);
    ok &= clean_kept >= kCleanRetentionMin;
    detail += fmt("duplicates removed %.3f (exact %.3f, near %.3f), clean retained %.3f", dup, removed(Kind::exact_dup),
                  removed(Kind::near_dup), clean_kept);

    bool monotone = e.first->complete;
    for (const auto& lang : e.first->languages()) {
        uint64_t prev = UINT64_MAX;
        for (const auto& st : e.first->stages) {
            auto it = st.per_language.find(lang);
            const uint64_t n = it == st.per_language.end() ? 0 : it->second.documents;
            monotone &= n <= prev;
            prev = n;
        }
    }
    ok &= monotone;
    detail += monotone ? ", report columns monotone" : ", report columns NOT monotone";
    return {ok, detail};
}

Outcome determinism(E2E& e) {
    if (!e.first) return {false, "first run missing"};
    auto cfg = e.cfg;
    cfg.output_dir = e.dir.path() / "run2";
    cfg.workers = cfg.workers == 1 ? 3 : 1;
    cc::Pipeline(cfg).run();
    const auto a = tree(e.cfg.output_dir), b = tree(cfg.output_dir);
    std::size_t differing = 0;
    for (const auto& [name, bytes] : a) {
        auto it = b.find(name);
        differing += it == b.end() || it->second != bytes;
    }
    differing += b.size() > a.size() ? b.size() - a.size() : 0;
    return {differing == 0 && !a.empty(),
            std::to_string(a.size()) + " files compared, " + std::to_string(differing) + " differ"};
}

}  // namespace

int main() {
    report("filtering_rate_arithmetic", table_arithmetic);
    report("minhash_unbiased_p128", minhash_unbiased);
    report("lsh_recall_precision", lsh_recall_precision);
    report("percentile_oracle", percentile_oracle);
    report("threshold_sample_representativeness", threshold_representativeness);
    report("kneser_ney_normalization_and_ordering", kneser_ney);
    report("refinement_rules", refinement);
    E2E e2e;
    report("end_to_end_synthetic", [&] { return end_to_end(e2e); });
    report("determinism", [&] { return determinism(e2e); });
    return failures == 0 ? 0 : 1;
}
