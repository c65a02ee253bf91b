#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <unicode/brkiter.h>
#include <unicode/locid.h>
#include <unicode/ubrk.h>
#include <unicode/utext.h>

#include "corpusclean/error.hpp"
#include "corpusclean/unicode.hpp"

namespace corpusclean {

/// Splits text into tokens. Implementations are deterministic, map the empty
/// string to no tokens, and are safe to share between threads.
class Tokenizer {
public:
    virtual ~Tokenizer() = default;
    virtual std::vector<std::string> tokenize(std::string_view text) const = 0;
};

/// Unicode word segmentation (UAX #29 plus ICU dictionaries for scripts
/// without spaces). Only word-like segments are returned; whitespace and
/// punctuation segments are dropped.
class UnicodeWordTokenizer final : public Tokenizer {
public:
    UnicodeWordTokenizer() {
        UErrorCode status = U_ZERO_ERROR;
        prototype_.reset(icu::BreakIterator::createWordInstance(icu::Locale::getRoot(), status));
        if (U_FAILURE(status)) throw Error(std::string("ICU word break iterator: ") + u_errorName(status));
    }

    std::vector<std::string> tokenize(std::string_view text) const override {
        std::vector<std::string> out;
        if (text.empty()) return out;
        auto* it = local_iterator();
        UErrorCode status = U_ZERO_ERROR;
        UText* ut = utext_openUTF8(nullptr, text.data(), static_cast<int64_t>(text.size()), &status);
        if (U_FAILURE(status)) throw Error("ICU: cannot open text");
        it->setText(ut, status);
        int32_t start = it->first();
        for (int32_t end = it->next(); end != icu::BreakIterator::DONE; start = end, end = it->next()) {
            if (it->getRuleStatus() == UBRK_WORD_NONE) continue;
            // Offsets are UTF-8 byte indices because the UText is UTF-8.
            out.emplace_back(text.substr(static_cast<std::size_t>(start), static_cast<std::size_t>(end - start)));
        }
        utext_close(ut);
        return out;
    }

private:
    icu::BreakIterator* local_iterator() const {
        // One clone per (thread, tokenizer).
        thread_local std::unordered_map<const UnicodeWordTokenizer*, std::unique_ptr<icu::BreakIterator>> cache;
        auto& slot = cache[this];
        if (!slot) {
            std::lock_guard<std::mutex> lock(mutex_);
            slot.reset(prototype_->clone());
        }
        return slot.get();
    }

    std::unique_ptr<icu::BreakIterator> prototype_;
    mutable std::mutex mutex_;
};

/// Subword tokenizer over a unigram vocabulary in the SentencePiece `.vocab`
/// text format ("piece<TAB>log-probability" per line). Whitespace is mapped
/// to U+2581 and the segmentation maximizing total piece score is chosen.
/// Characters not covered by any piece become single-character tokens scored
/// with the unknown penalty.
class UnigramTokenizer final : public Tokenizer {
public:
    static constexpr std::string_view kSpace = "▁";

    explicit UnigramTokenizer(const std::filesystem::path& vocab_path) {
        std::ifstream in(vocab_path);
        if (!in) throw IoError("cannot read subword vocabulary " + vocab_path.string());
        std::string line;
        double min_score = 0.0;
        while (std::getline(in, line)) {
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.empty()) continue;
            const auto tab = line.find('\t');
            std::string piece = line.substr(0, tab);
            double score = 0.0;
            if (tab != std::string::npos) score = std::stod(line.substr(tab + 1));
            if (piece == "<unk>" || piece == "<s>" || piece == "</s>") continue;
            auto u = unicode::decode(piece);
            if (u.empty()) continue;
            max_piece_len_ = std::max(max_piece_len_, u.size());
            pieces_.emplace(std::move(u), score);
            min_score = std::min(min_score, score);
        }
        if (pieces_.empty()) throw Error("empty subword vocabulary " + vocab_path.string());
        unknown_score_ = min_score - 10.0;
    }

    std::vector<std::string> tokenize(std::string_view text) const override {
        std::vector<std::string> out;
        // Normalize: collapse whitespace runs, mark word starts with U+2581.
        std::u32string norm;
        bool pending_space = true;
        for (char32_t c : unicode::decode(text)) {
            if (c == U' ' || c == U'\t' || c == U'\n' || c == U'\r' || c == U'\f' || c == U'\v') {
                pending_space = true;
                continue;
            }
            if (pending_space) norm.push_back(U'▁');
            pending_space = false;
            norm.push_back(c);
        }
        if (norm.empty()) return out;

        const std::size_t n = norm.size();
        std::vector<double> best(n + 1, -std::numeric_limits<double>::infinity());
        std::vector<std::size_t> back(n + 1, 0);
        best[0] = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (best[i] == -std::numeric_limits<double>::infinity()) continue;
            bool matched_single = false;
            for (std::size_t len = 1; len <= max_piece_len_ && i + len <= n; ++len) {
                auto it = pieces_.find(norm.substr(i, len));
                if (it == pieces_.end()) continue;
                if (len == 1) matched_single = true;
                const double s = best[i] + it->second;
                if (s > best[i + len]) {
                    best[i + len] = s;
                    back[i + len] = i;
                }
            }
            if (!matched_single && best[i] + unknown_score_ > best[i + 1]) {
                best[i + 1] = best[i] + unknown_score_;
                back[i + 1] = i;
            }
        }
        std::vector<std::pair<std::size_t, std::size_t>> spans;
        for (std::size_t end = n; end > 0; end = back[end]) spans.emplace_back(back[end], end);
        for (auto it = spans.rbegin(); it != spans.rend(); ++it) {
            icu::UnicodeString u;
            for (std::size_t k = it->first; k < it->second; ++k) u.append(static_cast<UChar32>(norm[k]));
            std::string piece;
            u.toUTF8String(piece);
            out.push_back(std::move(piece));
        }
        return out;
    }

private:
    std::unordered_map<std::u32string, double> pieces_;
    std::size_t max_piece_len_ = 1;
    double unknown_score_ = -20.0;
};

}  // namespace corpusclean
