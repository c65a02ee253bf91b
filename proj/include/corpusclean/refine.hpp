#pragma once

#include <cstddef>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "corpusclean/error.hpp"
#include "corpusclean/metrics.hpp"
#include "corpusclean/unicode.hpp"

namespace corpusclean {

/// JavaScript keywords grouped by type. Each keyword has exactly one type.
class JsKeywordSet {
public:
    /// tag: <script, </script>, document.
    /// statement: function, "var ", "let ", "const "
    /// symbol: =>, ();
    static JsKeywordSet defaults() {
        JsKeywordSet k;
        for (auto w : {"<script", "</script>", "document."}) k.add("tag", w);
        for (auto w : {"function", "var ", "let ", "const "}) k.add("statement", w);
        for (auto w : {"=>", "();"}) k.add("symbol", w);
        return k;
    }

    /// {"type": ["kw", ...], ...}
    static JsKeywordSet from_json(const nlohmann::json& j) {
        if (!j.is_object()) throw ConfigError("JS keyword set must be an object of type -> list");
        JsKeywordSet k;
        for (const auto& [type, words] : j.items()) {
            if (!words.is_array()) throw ConfigError("JS keyword type '" + type + "' must map to a list");
            for (const auto& w : words) k.add(type, w.get<std::string>());
        }
        if (k.keywords_.empty()) throw ConfigError("JS keyword set is empty");
        return k;
    }

    nlohmann::json to_json() const {
        nlohmann::json j = nlohmann::json::object();
        for (const auto& [kw, type] : keywords_) j[type].push_back(kw);
        return j;
    }

    void add(const std::string& type, const std::string& keyword) {
        if (keyword.empty()) throw ConfigError("empty JS keyword");
        auto [it, inserted] = keywords_.emplace(keyword, type);
        if (!inserted && it->second != type) {
            throw ConfigError("JS keyword '" + keyword + "' listed under two types");
        }
    }

    const std::map<std::string, std::string>& keywords() const { return keywords_; }
    bool empty() const { return keywords_.empty(); }

    /// Distinct keyword types present in `line`.
    std::set<std::string> types_in(std::string_view line) const {
        std::set<std::string> types;
        for (const auto& [kw, type] : keywords_) {
            if (!types.contains(type) && contains_keyword(line, kw)) types.insert(type);
        }
        return types;
    }

    /// Substring match; an edge of the keyword that is an ASCII letter must
    /// sit on a word boundary so "variance" does not match "var ".
    static bool contains_keyword(std::string_view line, std::string_view kw) {
        const bool check_front = unicode::is_alnum_ascii(kw.front());
        const bool check_back = unicode::is_alnum_ascii(kw.back());
        for (std::size_t pos = line.find(kw); pos != std::string_view::npos; pos = line.find(kw, pos + 1)) {
            if (check_front && pos > 0 && unicode::is_alnum_ascii(line[pos - 1])) continue;
            const std::size_t end = pos + kw.size();
            if (check_back && end < line.size() && unicode::is_alnum_ascii(line[end])) continue;
            return true;
        }
        return false;
    }

private:
    std::map<std::string, std::string> keywords_;  // keyword -> type
};

namespace detail {

/// Lines split on LF, keeping any CR so untouched lines survive byte-exactly.
struct RawLines {
    std::vector<std::string_view> lines;
    bool trailing_newline = false;
};

inline RawLines raw_lines(std::string_view text) {
    RawLines r;
    if (text.empty()) return r;
    r.trailing_newline = text.back() == '\n';
    std::size_t start = 0;
    while (start < text.size()) {
        auto nl = text.find('\n', start);
        if (nl == std::string_view::npos) nl = text.size();
        r.lines.push_back(text.substr(start, nl - start));
        start = nl + 1;
    }
    return r;
}

inline std::string_view strip_cr(std::string_view l) {
    if (!l.empty() && l.back() == '\r') l.remove_suffix(1);
    return l;
}

inline std::string join_lines(const std::vector<std::string_view>& lines, bool trailing_newline) {
    std::string out;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (i > 0) out += '\n';
        out += lines[i];
    }
    if (trailing_newline && !lines.empty()) out += '\n';
    return out;
}

}  // namespace detail

struct TrimResult {
    std::string text;
    std::size_t removed_lines = 0;
    bool all_short = false;  // every line was short; text left unchanged
};

/// Removes the maximal run of short (< 100 scalars) lines at the end. A text
/// made only of short lines is returned unchanged with `all_short` set.
inline TrimResult trim_trailing_short_lines(std::string_view text) {
    TrimResult r;
    auto raw = detail::raw_lines(text);
    std::size_t keep = raw.lines.size();
    while (keep > 0 && unicode::scalar_count(detail::strip_cr(raw.lines[keep - 1])) < kShortLineScalars) --keep;
    if (keep == 0) {
        r.text = std::string(text);
        r.all_short = !raw.lines.empty();
        return r;
    }
    if (keep == raw.lines.size()) {
        r.text = std::string(text);
        return r;
    }
    r.removed_lines = raw.lines.size() - keep;
    raw.lines.resize(keep);
    r.text = detail::join_lines(raw.lines, raw.trailing_newline);
    return r;
}

struct JsStripResult {
    std::string text;
    bool removed = false;
    std::size_t js_lines = 0;  // lines containing at least one keyword
};

/// Removes the only keyword-bearing line when it carries keywords of at least
/// two types. Any other number of keyword lines leaves the text unchanged, as
/// does a document consisting of that one line.
inline JsStripResult strip_js_line(std::string_view text, const JsKeywordSet& kws) {
    JsStripResult r;
    auto raw = detail::raw_lines(text);
    std::size_t js_index = 0;
    std::size_t js_types = 0;
    for (std::size_t i = 0; i < raw.lines.size(); ++i) {
        const auto types = kws.types_in(raw.lines[i]);
        if (types.empty()) continue;
        ++r.js_lines;
        js_index = i;
        js_types = types.size();
    }
    // Never strip a document down to nothing.
    if (r.js_lines != 1 || js_types < 2 || raw.lines.size() == 1) {
        r.text = std::string(text);
        return r;
    }
    raw.lines.erase(raw.lines.begin() + static_cast<std::ptrdiff_t>(js_index));
    r.text = detail::join_lines(raw.lines, raw.trailing_newline);
    r.removed = true;
    return r;
}

struct RefineResult {
    std::string text;
    std::size_t trimmed_lines = 0;
    std::size_t js_lines_removed = 0;
    bool all_short = false;

    bool changed(std::string_view original) const { return text != original; }
};

/// Trailing-line trimming followed by JS-line stripping, repeated until the
/// text stops changing. Iterating makes the result idempotent: stripping a
/// JS line can expose new short trailing lines and vice versa.
inline RefineResult refine(std::string_view text, const JsKeywordSet& kws) {
    RefineResult r;
    r.text = std::string(text);
    for (;;) {
        auto t = trim_trailing_short_lines(r.text);
        r.trimmed_lines += t.removed_lines;
        r.all_short = t.all_short;
        auto j = strip_js_line(t.text, kws);
        if (j.removed) ++r.js_lines_removed;
        const bool changed = t.removed_lines > 0 || j.removed;
        r.text = std::move(j.text);
        if (!changed) break;
    }
    return r;
}

}  // namespace corpusclean
