#pragma once

// Interpolated modified Kneser-Ney n-gram language model.
//
// Training follows the usual recipe: highest-order n-grams keep raw counts,
// lower orders use continuation counts (number of distinct left extensions)
// except for n-grams starting with <s>, which cannot be extended and keep raw
// counts. Three discounts per order (for counts 1, 2 and 3+) are estimated
// from count-of-counts; when those are degenerate every discount of that order
// falls back to 0.75.
//
// Probabilities are stored in backoff form (log10 p, log10 backoff) so that
// lookups and the ARPA export are the same as for any backoff model.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "corpusclean/error.hpp"

namespace corpusclean {

struct LmTrainOptions {
    int order = 5;
    // Words seen fewer times than this are mapped to <unk>.
    uint64_t min_count = 1;
};

/// Discounts for adjusted counts 1, 2 and 3+.
struct KnDiscounts {
    std::array<double, 3> d{0.75, 0.75, 0.75};
    bool fallback = true;

    double for_count(uint64_t c) const { return c == 0 ? 0.0 : d[std::min<uint64_t>(c, 3) - 1]; }
};

/// Estimates modified Kneser-Ney discounts from count-of-counts n1..n4.
inline KnDiscounts estimate_discounts(uint64_t n1, uint64_t n2, uint64_t n3, uint64_t n4) {
    KnDiscounts out;
    if (n1 == 0 || n2 == 0 || n3 == 0 || n4 == 0) return out;
    const double y = static_cast<double>(n1) / (static_cast<double>(n1) + 2.0 * static_cast<double>(n2));
    const double d1 = 1.0 - 2.0 * y * static_cast<double>(n2) / static_cast<double>(n1);
    const double d2 = 2.0 - 3.0 * y * static_cast<double>(n3) / static_cast<double>(n2);
    const double d3 = 3.0 - 4.0 * y * static_cast<double>(n4) / static_cast<double>(n3);
    if (!(d1 > 0.0 && d1 < 1.0 && d2 > 0.0 && d2 < 2.0 && d3 > 0.0 && d3 < 3.0)) return out;
    out.d = {d1, d2, d3};
    out.fallback = false;
    return out;
}

class LanguageModel {
public:
    using WordId = uint32_t;
    using NGram = std::u32string;  // word ids, oldest first

    static constexpr WordId kUnk = 0;
    static constexpr WordId kBos = 1;
    static constexpr WordId kEos = 2;
    static constexpr double kBosLog10Prob = -99.0;

    struct Entry {
        double log10_prob = 0.0;
        double log10_backoff = 0.0;
    };

    static LanguageModel train(std::span<const std::vector<std::string>> sentences, const LmTrainOptions& opts = {}) {
        if (opts.order < 1) throw Error("language model order must be >= 1");
        LanguageModel lm;
        lm.order_ = opts.order;
        lm.build_vocab(sentences, opts.min_count);
        lm.estimate(sentences);
        return lm;
    }

    int order() const { return order_; }
    std::size_t vocab_size() const { return vocab_.size(); }
    const std::vector<std::string>& vocabulary() const { return vocab_; }
    const KnDiscounts& discounts(int n) const { return discounts_.at(static_cast<std::size_t>(n - 1)); }
    const std::unordered_map<NGram, Entry>& table(int n) const { return tables_.at(static_cast<std::size_t>(n - 1)); }

    WordId id_of(std::string_view word) const {
        auto it = ids_.find(std::string(word));
        if (it == ids_.end() || it->second == kBos) return kUnk;
        return it->second;
    }

    /// log10 P(word | context). Only the last order-1 context ids are used.
    double log10_prob(std::span<const WordId> context, WordId word) const {
        if (tables_.empty()) throw Error("language model is not trained");
        const std::size_t max_ctx = std::min<std::size_t>(context.size(), static_cast<std::size_t>(order_ - 1));
        const auto ctx = context.subspan(context.size() - max_ctx);

        NGram key(1, static_cast<char32_t>(word));
        auto uni = tables_[0].find(key);
        if (uni == tables_[0].end()) {
            key[0] = kUnk;
            uni = tables_[0].find(key);
        }
        double logp = uni->second.log10_prob;
        std::size_t matched = 0;
        for (std::size_t k = 1; k <= max_ctx; ++k) {
            key.insert(key.begin(), static_cast<char32_t>(ctx[max_ctx - k]));
            auto it = tables_[k].find(key);
            if (it == tables_[k].end()) break;
            logp = it->second.log10_prob;
            matched = k;
        }
        // Backoff weights of every context longer than the matched one.
        for (std::size_t k = matched + 1; k <= max_ctx; ++k) {
            NGram c;
            for (std::size_t j = max_ctx - k; j < max_ctx; ++j) c.push_back(static_cast<char32_t>(ctx[j]));
            auto it = tables_[k - 1].find(c);
            if (it != tables_[k - 1].end()) logp += it->second.log10_backoff;
        }
        return logp;
    }

    /// Sum of log10 probabilities over the tokens followed by </s>, starting
    /// from the <s> context. `positions` receives the number of scored events.
    double sentence_log10(std::span<const std::string> tokens, std::size_t* positions = nullptr) const {
        std::vector<WordId> context{kBos};
        double total = 0.0;
        auto score = [&](WordId w) {
            total += log10_prob(context, w);
            context.push_back(w);
            if (context.size() > static_cast<std::size_t>(std::max(order_ - 1, 1))) context.erase(context.begin());
        };
        for (const auto& t : tokens) score(id_of(t));
        score(kEos);
        if (positions != nullptr) *positions = tokens.size() + 1;
        return total;
    }

    /// 10^(-(1/N) sum log10 P) over the tokens plus the end-of-sentence event.
    double perplexity(std::span<const std::string> tokens) const {
        if (tokens.empty()) throw Error("perplexity of an empty token sequence");
        std::size_t n = 0;
        const double lp = sentence_log10(tokens, &n);
        return std::pow(10.0, -lp / static_cast<double>(n));
    }

    /// Calls fn(context) for every context with observed continuations, at
    /// every order (the empty context included).
    void for_each_context(const std::function<void(const NGram&)>& fn) const {
        fn(NGram{});
        for (int n = 1; n < order_; ++n) {
            for (const auto& [g, e] : tables_[n - 1]) {
                if (e.log10_backoff != 0.0) fn(g);
            }
        }
    }

    // ---- serialization --------------------------------------------------

    static constexpr char kMagic[8] = {'C', 'C', 'L', 'M', 'B', 'I', 'N', '1'};

    /// Binary layout (little-endian):
    ///   magic "CCLMBIN1", u32 order, u64 vocab size, vocab as (u32 length, bytes),
    ///   then per order n: 3 x f64 discounts, u8 fallback flag, u64 entry count,
    ///   entries sorted by id tuple as (n x u32 ids, f64 log10 prob, f64 log10 backoff).
    void save(const std::filesystem::path& path) const {
        if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write language model " + path.string());
        out.write(kMagic, sizeof(kMagic));
        put<uint32_t>(out, static_cast<uint32_t>(order_));
        put<uint64_t>(out, vocab_.size());
        for (const auto& w : vocab_) {
            put<uint32_t>(out, static_cast<uint32_t>(w.size()));
            out.write(w.data(), static_cast<std::streamsize>(w.size()));
        }
        for (int n = 1; n <= order_; ++n) {
            const auto& d = discounts_[n - 1];
            for (double v : d.d) put<double>(out, v);
            put<uint8_t>(out, d.fallback ? 1 : 0);
            const auto entries = sorted_entries(n);
            put<uint64_t>(out, entries.size());
            for (const auto* kv : entries) {
                for (char32_t id : kv->first) put<uint32_t>(out, static_cast<uint32_t>(id));
                put<double>(out, kv->second.log10_prob);
                put<double>(out, kv->second.log10_backoff);
            }
        }
        if (!out) throw IoError("write failed for " + path.string());
    }

    static LanguageModel load(const std::filesystem::path& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw IoError("cannot read language model " + path.string());
        char magic[8];
        in.read(magic, sizeof(magic));
        if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) throw Error("not a language model file: " + path.string());
        LanguageModel lm;
        lm.order_ = static_cast<int>(get<uint32_t>(in));
        if (lm.order_ < 1 || lm.order_ > 64) throw Error("bad language model order in " + path.string());
        const auto vsize = get<uint64_t>(in);
        lm.vocab_.resize(vsize);
        for (uint64_t i = 0; i < vsize; ++i) {
            const auto len = get<uint32_t>(in);
            lm.vocab_[i].resize(len);
            in.read(lm.vocab_[i].data(), len);
            lm.ids_.emplace(lm.vocab_[i], static_cast<WordId>(i));
        }
        lm.tables_.resize(static_cast<std::size_t>(lm.order_));
        lm.discounts_.resize(static_cast<std::size_t>(lm.order_));
        for (int n = 1; n <= lm.order_; ++n) {
            auto& d = lm.discounts_[n - 1];
            for (double& v : d.d) v = get<double>(in);
            d.fallback = get<uint8_t>(in) != 0;
            const auto count = get<uint64_t>(in);
            auto& table = lm.tables_[n - 1];
            table.reserve(count);
            for (uint64_t i = 0; i < count; ++i) {
                NGram g;
                for (int k = 0; k < n; ++k) g.push_back(static_cast<char32_t>(get<uint32_t>(in)));
                Entry e;
                e.log10_prob = get<double>(in);
                e.log10_backoff = get<double>(in);
                table.emplace(std::move(g), e);
            }
        }
        if (!in) throw Error("truncated language model " + path.string());
        if (lm.vocab_.size() < 3 || lm.tables_[0].size() < lm.vocab_.size()) {
            throw Error("inconsistent language model " + path.string());
        }
        return lm;
    }

    void write_arpa(std::ostream& out) const {
        out << "\\data\\\n";
        for (int n = 1; n <= order_; ++n) out << "ngram " << n << "=" << tables_[n - 1].size() << "\n";
        char buf[64];
        for (int n = 1; n <= order_; ++n) {
            out << "\n\\" << n << "-grams:\n";
            for (const auto* kv : sorted_entries(n)) {
                std::snprintf(buf, sizeof(buf), "%.7g", kv->second.log10_prob);
                out << buf << '\t';
                for (std::size_t k = 0; k < kv->first.size(); ++k) {
                    if (k > 0) out << ' ';
                    out << vocab_[kv->first[k]];
                }
                if (n < order_ && kv->second.log10_backoff != 0.0) {
                    std::snprintf(buf, sizeof(buf), "%.7g", kv->second.log10_backoff);
                    out << '\t' << buf;
                }
                out << '\n';
            }
        }
        out << "\n\\end\\\n";
    }

private:
    template <typename T>
    static void put(std::ostream& out, T v) {
        out.write(reinterpret_cast<const char*>(&v), sizeof(T));
    }
    template <typename T>
    static T get(std::istream& in) {
        T v{};
        in.read(reinterpret_cast<char*>(&v), sizeof(T));
        return v;
    }

    std::vector<const std::pair<const NGram, Entry>*> sorted_entries(int n) const {
        std::vector<const std::pair<const NGram, Entry>*> out;
        out.reserve(tables_[n - 1].size());
        for (const auto& kv : tables_[n - 1]) out.push_back(&kv);
        std::sort(out.begin(), out.end(), [](auto* a, auto* b) { return a->first < b->first; });
        return out;
    }

    void build_vocab(std::span<const std::vector<std::string>> sentences, uint64_t min_count) {
        std::map<std::string, uint64_t> freq;
        uint64_t tokens = 0;
        for (const auto& s : sentences) {
            for (const auto& w : s) {
                ++freq[w];
                ++tokens;
            }
        }
        if (sentences.empty() || tokens == 0) throw Error("cannot train a language model on an empty corpus");
        vocab_ = {"<unk>", "<s>", "</s>"};
        for (const auto& [w, c] : freq) {
            if (c >= min_count && w != "<unk>" && w != "<s>" && w != "</s>") vocab_.push_back(w);
        }
        for (std::size_t i = 0; i < vocab_.size(); ++i) ids_.emplace(vocab_[i], static_cast<WordId>(i));
    }

    void estimate(std::span<const std::vector<std::string>> sentences) {
        const auto N = static_cast<std::size_t>(order_);
        std::vector<std::unordered_map<NGram, uint64_t>> raw(N);
        NGram padded;
        for (const auto& s : sentences) {
            padded.clear();
            padded.push_back(kBos);
            for (const auto& w : s) padded.push_back(static_cast<char32_t>(id_of(w)));
            padded.push_back(kEos);
            for (std::size_t end = 1; end < padded.size(); ++end) {
                for (std::size_t n = 1; n <= N && n <= end + 1; ++n) ++raw[n - 1][padded.substr(end + 1 - n, n)];
            }
        }

        // Adjusted counts.
        std::vector<std::unordered_map<NGram, uint64_t>> adj(N);
        adj[N - 1] = raw[N - 1];
        for (std::size_t n = N - 1; n >= 1; --n) {
            auto& a = adj[n - 1];
            for (const auto& [g, c] : raw[n]) {
                if (g.size() == n + 1) ++a[g.substr(1)];
            }
            for (const auto& [g, c] : raw[n - 1]) {
                if (g[0] == kBos) a[g] = c;
            }
        }

        discounts_.resize(N);
        for (std::size_t n = 1; n <= N; ++n) {
            std::array<uint64_t, 5> coc{};
            for (const auto& [g, c] : adj[n - 1]) {
                if (c >= 1 && c <= 4) ++coc[c];
            }
            discounts_[n - 1] = estimate_discounts(coc[1], coc[2], coc[3], coc[4]);
        }

        // Per-context totals and the N1 / N2 / N3+ type counts.
        struct ContextStats {
            uint64_t total = 0;
            std::array<uint64_t, 3> types{};
        };
        std::vector<std::unordered_map<NGram, ContextStats>> ctx(N);
        for (std::size_t n = 1; n <= N; ++n) {
            for (const auto& [g, c] : adj[n - 1]) {
                auto& st = ctx[n - 1][g.substr(0, n - 1)];
                st.total += c;
                ++st.types[std::min<uint64_t>(c, 3) - 1];
            }
        }
        auto gamma = [&](std::size_t n, const ContextStats& st) {
            const auto& d = discounts_[n - 1].d;
            return (d[0] * st.types[0] + d[1] * st.types[1] + d[2] * st.types[2]) / static_cast<double>(st.total);
        };

        tables_.assign(N, {});
        // Unigrams: interpolate with the uniform distribution over every word
        // that can be predicted (the vocabulary minus <s>).
        {
            const auto& st = ctx[0][NGram{}];
            const double g = gamma(1, st);
            const double uniform = 1.0 / static_cast<double>(vocab_.size() - 1);
            for (WordId w = 0; w < vocab_.size(); ++w) {
                NGram key(1, static_cast<char32_t>(w));
                Entry e;
                if (w == kBos) {
                    e.log10_prob = kBosLog10Prob;
                } else {
                    auto it = adj[0].find(key);
                    const uint64_t c = it == adj[0].end() ? 0 : it->second;
                    const double disc = std::max(static_cast<double>(c) - discounts_[0].for_count(c), 0.0);
                    e.log10_prob = std::log10(disc / static_cast<double>(st.total) + g * uniform);
                }
                tables_[0].emplace(std::move(key), e);
            }
        }
        for (std::size_t n = 2; n <= N; ++n) {
            auto& table = tables_[n - 1];
            const auto& dn = discounts_[n - 1];
            for (const auto& [g, c] : adj[n - 1]) {
                const NGram h = g.substr(0, n - 1);
                const auto& st = ctx[n - 1].at(h);
                std::vector<WordId> lower_ctx(g.begin() + 1, g.end() - 1);
                const double lower = std::pow(10.0, log10_prob(lower_ctx, g.back()));
                const double p = (static_cast<double>(c) - dn.for_count(c)) / static_cast<double>(st.total) +
                                 gamma(n, st) * lower;
                table.emplace(g, Entry{std::log10(p), 0.0});
            }
            // Backoff weights on the contexts of this order; the next order's
            // lower-order lookups depend on them. gamma < 1 because every
            // discount is below its count, so a context always gets a
            // non-zero log weight.
            for (const auto& [h, st] : ctx[n - 1]) {
                auto it = tables_[n - 2].find(h);
                if (it != tables_[n - 2].end()) it->second.log10_backoff = std::log10(gamma(n, st));
            }
        }
    }

    int order_ = 0;
    std::vector<std::string> vocab_;
    std::unordered_map<std::string, WordId> ids_;
    std::vector<std::unordered_map<NGram, Entry>> tables_;
    std::vector<KnDiscounts> discounts_;
};

}  // namespace corpusclean
