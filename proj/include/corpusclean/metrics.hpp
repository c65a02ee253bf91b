#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "corpusclean/corpus.hpp"
#include "corpusclean/error.hpp"
#include "corpusclean/hash.hpp"
#include "corpusclean/metric_vector.hpp"
#include "corpusclean/ngram_lm.hpp"
#include "corpusclean/tokenizer.hpp"
#include "corpusclean/unicode.hpp"

namespace corpusclean {

inline constexpr std::size_t kShortLineScalars = 100;
inline constexpr std::size_t kCharNgram = 10;
inline constexpr std::size_t kWordNgram = 5;

/// 1 - distinct/total over the n-grams of `units`; 0 when there are none.
template <typename T>
double repetition_ratio(std::span<const T> units, std::size_t n) {
    if (n == 0) throw Error("repetition_ratio: n must be >= 1");
    if (units.size() < n) return 0.0;
    const std::size_t total = units.size() - n + 1;
    // N-grams are identified by their start offset; hashing and equality look
    // at the n units from there.
    auto hash = [&](std::size_t i) {
        std::hash<T> h;
        uint64_t acc = 0x9e3779b97f4a7c15ULL;
        for (std::size_t k = 0; k < n; ++k) acc = hash_combine(acc, h(units[i + k]));
        return static_cast<std::size_t>(acc);
    };
    auto eq = [&](std::size_t a, std::size_t b) {
        for (std::size_t k = 0; k < n; ++k) {
            if (!(units[a + k] == units[b + k])) return false;
        }
        return true;
    };
    std::unordered_set<std::size_t, decltype(hash), decltype(eq)> seen(total, hash, eq);
    for (std::size_t i = 0; i < total; ++i) seen.insert(i);
    return 1.0 - static_cast<double>(seen.size()) / static_cast<double>(total);
}

template <typename T>
double repetition_ratio(const std::vector<T>& units, std::size_t n) {
    return repetition_ratio(std::span<const T>(units), n);
}

inline double repetition_ratio(std::u32string_view units, std::size_t n) {
    return repetition_ratio(std::span<const char32_t>(units.data(), units.size()), n);
}

inline double special_char_ratio(std::string_view text) {
    const auto u = unicode::decode(text);
    if (u.empty()) return 0.0;
    std::size_t special = 0;
    for (char32_t c : u) special += unicode::is_special(c) ? 1 : 0;
    return static_cast<double>(special) / static_cast<double>(u.size());
}

/// Per-language stopword and flagged-word sets, stored case-folded.
class WordLists {
public:
    enum class Kind { stopwords, flagged };

    void add(Kind kind, const std::string& language, std::string_view word) {
        auto w = unicode::trim(word);
        if (w.empty()) return;
        lists(kind)[language].insert(unicode::fold_case(w));
    }

    /// One word per line, UTF-8; blank lines are ignored.
    void load(Kind kind, const std::string& language, const std::filesystem::path& file) {
        std::ifstream in(file);
        if (!in) throw IoError("cannot read word list " + file.string());
        auto& set = lists(kind)[language];
        std::string line;
        while (std::getline(in, line)) {
            auto w = unicode::trim(line);
            if (!w.empty()) set.insert(unicode::fold_case(w));
        }
    }

    /// nullptr when the language has no list of this kind.
    const std::unordered_set<std::string>* find(Kind kind, const std::string& language) const {
        const auto& m = kind == Kind::stopwords ? stopwords_ : flagged_;
        auto it = m.find(language);
        return it == m.end() ? nullptr : &it->second;
    }

private:
    std::map<std::string, std::unordered_set<std::string>>& lists(Kind kind) {
        return kind == Kind::stopwords ? stopwords_ : flagged_;
    }

    std::map<std::string, std::unordered_set<std::string>> stopwords_;
    std::map<std::string, std::unordered_set<std::string>> flagged_;
};

/// Fraction of tokens whose case fold is in `list`. 0 with no tokens or no list.
inline double word_list_ratio(std::span<const std::string> tokens, const std::unordered_set<std::string>* list) {
    if (tokens.empty() || list == nullptr || list->empty()) return 0.0;
    std::size_t hits = 0;
    for (const auto& t : tokens) hits += list->contains(unicode::fold_case(t)) ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(tokens.size());
}

struct LineStats {
    std::size_t num_lines = 0;
    double short_line_ratio = 0.0;
    double short_line_length_ratio = 0.0;
};

inline LineStats line_stats(std::string_view text) {
    LineStats s;
    const auto lines = unicode::split_lines(text);
    s.num_lines = lines.size();
    std::size_t short_lines = 0, short_chars = 0, all_chars = 0;
    for (auto l : lines) {
        const auto len = unicode::scalar_count(l);
        all_chars += len;
        if (len < kShortLineScalars) {
            ++short_lines;
            short_chars += len;
        }
    }
    if (!lines.empty()) s.short_line_ratio = static_cast<double>(short_lines) / static_cast<double>(lines.size());
    if (all_chars > 0) s.short_line_length_ratio = static_cast<double>(short_chars) / static_cast<double>(all_chars);
    return s;
}

/// Document perplexity: every line is a sentence, and log-probabilities and
/// scored positions are pooled over the lines before exponentiating. Lines
/// without tokens are skipped; a document without any tokens is scored as
/// the empty sentence.
inline double document_perplexity(const LanguageModel& lm, const Tokenizer& tok, std::string_view text) {
    double log10_sum = 0.0;
    std::size_t positions = 0;
    for (auto line : unicode::split_lines(text)) {
        const auto tokens = tok.tokenize(line);
        if (tokens.empty()) continue;
        std::size_t n = 0;
        log10_sum += lm.sentence_log10(tokens, &n);
        positions += n;
    }
    if (positions == 0) log10_sum = lm.sentence_log10({}, &positions);
    return std::pow(10.0, -log10_sum / static_cast<double>(positions));
}

/// Everything compute_metrics reads besides the document. `lms` may lack a
/// language, in which case perplexity is disabled for it.
struct MetricResources {
    const WordLists* lists = nullptr;
    const Tokenizer* tokenizer = nullptr;
    std::map<std::string, const LanguageModel*> lms;

    const LanguageModel* lm_for(const std::string& language) const {
        auto it = lms.find(language);
        return it == lms.end() ? nullptr : it->second;
    }
};

inline MetricVector compute_metrics(const Document& doc, const WordLists& lists, const Tokenizer& tok,
                                    const LanguageModel* lm) {
    MetricVector m;
    const auto tokens = tok.tokenize(doc.text);
    const auto scalars = unicode::decode(doc.text);

    m[Metric::number_words] = static_cast<double>(tokens.size());
    m[Metric::char_rep_ratio] = repetition_ratio(std::u32string_view(scalars), kCharNgram);
    m[Metric::word_rep_ratio] = repetition_ratio(tokens, kWordNgram);
    m[Metric::special_char_ratio] = special_char_ratio(doc.text);
    m[Metric::stopword_ratio] = word_list_ratio(tokens, lists.find(WordLists::Kind::stopwords, doc.language));
    m[Metric::flagged_word_ratio] = word_list_ratio(tokens, lists.find(WordLists::Kind::flagged, doc.language));
    m[Metric::lid_confidence] = doc.lid_confidence ? *doc.lid_confidence : MetricVector::disabled();
    m[Metric::perplexity] = lm != nullptr ? document_perplexity(*lm, tok, doc.text) : MetricVector::disabled();
    m[Metric::doc_length_chars] = static_cast<double>(scalars.size());
    const auto ls = line_stats(doc.text);
    m[Metric::num_lines] = static_cast<double>(ls.num_lines);
    m[Metric::short_line_length_ratio] = ls.short_line_length_ratio;
    m[Metric::short_line_ratio] = ls.short_line_ratio;
    return m;
}

inline MetricVector compute_metrics(const Document& doc, const MetricResources& res) {
    if (res.lists == nullptr || res.tokenizer == nullptr) throw Error("metric resources are incomplete");
    return compute_metrics(doc, *res.lists, *res.tokenizer, res.lm_for(doc.language));
}

}  // namespace corpusclean
