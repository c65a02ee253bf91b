#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <unicode/uscript.h>

#include "corpusclean/corpus.hpp"
#include "corpusclean/error.hpp"
#include "corpusclean/unicode.hpp"

namespace corpusclean {

/// Classifier input is capped at this many scalars.
inline constexpr std::size_t kLidMaxScalars = 4096;

struct LangPrediction {
    std::string language;
    double confidence = 0.0;
};

/// A language identifier. Implementations must be deterministic and safe to
/// call concurrently after construction.
class LangClassifier {
public:
    virtual ~LangClassifier() = default;

    virtual const std::set<std::string>& supported_languages() const = 0;

    /// Top-1 prediction.
    virtual LangPrediction predict(std::string_view text) const = 0;

    /// Probability assigned to `language`. The default derives it from the
    /// top-1 prediction.
    virtual double confidence_for(std::string_view text, std::string_view language) const {
        auto p = predict(text);
        return p.language == language ? p.confidence : 0.0;
    }
};

/// Deterministic classifier keyed on Unicode scripts: the language of a text is
/// the one mapped to the script holding most of its letters, and the confidence
/// is that script's share of letters. Texts without letters map to
/// `fallback_language` with confidence 0.
class ScriptClassifier final : public LangClassifier {
public:
    ScriptClassifier(std::map<UScriptCode, std::string> script_to_language, std::string fallback_language)
        : script_to_language_(std::move(script_to_language)), fallback_(std::move(fallback_language)) {
        for (const auto& [script, lang] : script_to_language_) supported_.insert(lang);
        supported_.insert(fallback_);
    }

    /// Latin -> en, Cyrillic -> ru, Greek -> el, Arabic -> ar, Han -> zh,
    /// Hebrew -> he, Devanagari -> hi, Thai -> th, Hangul -> ko.
    static ScriptClassifier default_instance() {
        return ScriptClassifier({{USCRIPT_LATIN, "en"},
                                 {USCRIPT_CYRILLIC, "ru"},
                                 {USCRIPT_GREEK, "el"},
                                 {USCRIPT_ARABIC, "ar"},
                                 {USCRIPT_HAN, "zh"},
                                 {USCRIPT_HEBREW, "he"},
                                 {USCRIPT_DEVANAGARI, "hi"},
                                 {USCRIPT_THAI, "th"},
                                 {USCRIPT_HANGUL, "ko"}},
                                "en");
    }

    const std::set<std::string>& supported_languages() const override { return supported_; }

    LangPrediction predict(std::string_view text) const override {
        text = text.substr(0, unicode::prefix_bytes(text, kLidMaxScalars));
        std::map<std::string, uint64_t> per_language;
        uint64_t letters = 0;
        for (char32_t c : unicode::decode(text)) {
            if (!unicode::is_letter(c)) continue;
            ++letters;
            UErrorCode status = U_ZERO_ERROR;
            const UScriptCode script = uscript_getScript(static_cast<UChar32>(c), &status);
            auto it = script_to_language_.find(script);
            if (U_SUCCESS(status) && it != script_to_language_.end()) ++per_language[it->second];
        }
        if (letters == 0) return {fallback_, 0.0};
        // Ties resolve to the lexicographically smallest language.
        std::string best = fallback_;
        uint64_t best_count = 0;
        for (const auto& [lang, count] : per_language) {
            if (count > best_count) {
                best = lang;
                best_count = count;
            }
        }
        return {best, static_cast<double>(best_count) / static_cast<double>(letters)};
    }

private:
    std::map<UScriptCode, std::string> script_to_language_;
    std::string fallback_;
    std::set<std::string> supported_;
};

enum class LidVerdict { keep, unsupported_label, mismatch, classifier_error };

struct RelabelResult {
    LidVerdict verdict = LidVerdict::keep;
    LangPrediction prediction;

    bool keep() const { return verdict == LidVerdict::keep; }
};

/// Drops documents whose label is unsupported or disagrees with the
/// classifier. A classifier exception drops the document (never keeps it).
/// With `repredict` false the label is trusted and only the label's
/// confidence is looked up.
inline RelabelResult relabel_filter(const Document& doc, const LangClassifier& clf, bool repredict = true) {
    RelabelResult r;
    if (!clf.supported_languages().contains(doc.language)) {
        r.verdict = LidVerdict::unsupported_label;
        return r;
    }
    try {
        if (repredict) {
            r.prediction = clf.predict(doc.text);
            if (r.prediction.language != doc.language) {
                r.verdict = LidVerdict::mismatch;
                return r;
            }
        } else {
            r.prediction = {doc.language, clf.confidence_for(doc.text, doc.language)};
        }
    } catch (const std::exception&) {
        r.verdict = LidVerdict::classifier_error;
        return r;
    }
    r.prediction.confidence = std::clamp(r.prediction.confidence, 0.0, 1.0);
    return r;
}

struct LangIdStats {
    std::atomic<uint64_t> kept{0};
    std::atomic<uint64_t> unsupported{0};
    std::atomic<uint64_t> mismatched{0};
    std::atomic<uint64_t> errors{0};

    void record(LidVerdict v) {
        switch (v) {
            case LidVerdict::keep: ++kept; break;
            case LidVerdict::unsupported_label: ++unsupported; break;
            case LidVerdict::mismatch: ++mismatched; break;
            case LidVerdict::classifier_error: ++errors; break;
        }
    }
};

}  // namespace corpusclean
