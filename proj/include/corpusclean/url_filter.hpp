#pragma once

// Blacklist filtering over the UT1 on-disk layout:
//   <root>/<category>/domains   one hostname per line
//   <root>/<category>/urls      one scheme-less URL per line (optional)

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "corpusclean/corpus.hpp"
#include "corpusclean/error.hpp"
#include "corpusclean/unicode.hpp"
#include "corpusclean/url.hpp"

namespace corpusclean {

namespace detail {

/// host + path + query, with the trailing slash removed.
inline std::string blacklist_url_key(const ParsedUrl& u) {
    std::string key = u.host;
    key += u.path;
    if (u.has_query) {
        key += '?';
        key += u.query;
    }
    while (key.size() > u.host.size() && key.back() == '/') key.pop_back();
    return key;
}

}  // namespace detail

class Blacklist {
public:
    void add_domain(std::string_view entry) {
        auto e = unicode::to_lower_ascii(unicode::trim(entry));
        while (!e.empty() && e.back() == '.') e.pop_back();
        while (!e.empty() && e.front() == '.') e.erase(e.begin());
        if (!e.empty()) domains_.insert(std::move(e));
    }

    void add_url(std::string_view entry) {
        auto parsed = parse_url(entry);
        if (!parsed) return;
        urls_.insert(detail::blacklist_url_key(*parsed));
    }

    void add_category(std::string name) { categories_.insert(std::move(name)); }

    const std::unordered_set<std::string>& domains() const { return domains_; }
    const std::unordered_set<std::string>& urls() const { return urls_; }
    const std::set<std::string>& categories() const { return categories_; }
    std::size_t size() const { return domains_.size() + urls_.size(); }

    /// Exact host or label-boundary subdomain of a listed domain.
    /// One hash probe per label of `host`.
    bool host_blocked(std::string_view host) const {
        if (domains_.empty()) return false;
        std::string h(host);
        std::string_view rest = h;
        while (!rest.empty()) {
            if (domains_.contains(std::string(rest))) return true;
            const auto dot = rest.find('.');
            if (dot == std::string_view::npos) break;
            rest = rest.substr(dot + 1);
        }
        return false;
    }

    bool parsed_url_blocked(const ParsedUrl& u) const {
        if (host_blocked(u.host)) return true;
        return !urls_.empty() && urls_.contains(detail::blacklist_url_key(u));
    }

private:
    std::unordered_set<std::string> domains_;
    std::unordered_set<std::string> urls_;
    std::set<std::string> categories_;
};

namespace detail {

template <typename F>
void for_each_entry(const std::filesystem::path& file, F&& fn) {
    std::ifstream in(file);
    if (!in) throw IoError("cannot read " + file.string());
    std::string line;
    while (std::getline(in, line)) {
        auto t = unicode::trim(line);
        if (t.empty() || t.front() == '#') continue;
        fn(t);
    }
}

}  // namespace detail

/// Union of the selected categories. A missing category directory is a
/// configuration error; a missing `urls` file counts as empty.
inline Blacklist load_blacklist(const std::filesystem::path& root, const std::vector<std::string>& categories) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(root)) throw ConfigError("blacklist root is not a directory: " + root.string());
    Blacklist bl;
    for (const auto& cat : categories) {
        const auto dir = root / cat;
        if (!fs::is_directory(dir)) throw ConfigError("blacklist category not found: " + dir.string());
        bl.add_category(cat);
        if (fs::exists(dir / "domains")) {
            detail::for_each_entry(dir / "domains", [&](std::string_view e) { bl.add_domain(e); });
        }
        if (fs::exists(dir / "urls")) {
            detail::for_each_entry(dir / "urls", [&](std::string_view e) { bl.add_url(e); });
        }
    }
    return bl;
}

struct UrlFilterStats {
    std::atomic<uint64_t> unparsable{0};
};

/// Case-insensitive in the host; scheme and port are ignored. Unparsable URLs
/// are never blocked and are counted in `stats` when given.
inline bool url_blocked(std::string_view url, const Blacklist& bl, UrlFilterStats* stats = nullptr) {
    auto parsed = parse_url(url);
    if (!parsed) {
        if (stats != nullptr) ++stats->unparsable;
        return false;
    }
    return bl.parsed_url_blocked(*parsed);
}

/// Documents without a URL are kept.
inline bool keep_document(const Document& doc, const Blacklist& bl, UrlFilterStats* stats = nullptr) {
    if (!doc.url || doc.url->empty()) return true;
    return !url_blocked(*doc.url, bl, stats);
}

}  // namespace corpusclean
