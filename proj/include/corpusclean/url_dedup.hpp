#pragma once

#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "corpusclean/corpus.hpp"
#include "corpusclean/minhash.hpp"
#include "corpusclean/unicode.hpp"
#include "corpusclean/url.hpp"

namespace corpusclean {

struct UrlKey {
    std::string key;
    bool is_general_domain = false;
};

/// Lowercases scheme and host, drops the fragment, keeps port, path and query
/// exactly as written. A bare domain ("" or "/" path, empty query) is marked
/// general. Unparsable URLs key on their trimmed text.
inline UrlKey url_key(std::string_view url) {
    UrlKey k;
    auto p = parse_url(url);
    if (!p) {
        k.key = std::string(unicode::trim(url));
        return k;
    }
    if (!p->scheme.empty()) k.key = p->scheme + "://";
    k.key += p->host;
    if (!p->port.empty()) k.key += ":" + p->port;
    k.key += p->path;
    if (p->has_query) k.key += "?" + p->query;
    k.is_general_domain = (p->path.empty() || p->path == "/") && p->query.empty();
    return k;
}

struct UrlDedupInput {
    DocId id{};
    std::optional<std::string> url;
};

struct UrlDedupResult {
    std::vector<DocId> retained;         // sorted
    std::vector<DuplicatePair> removed;  // sorted by removed id
};

/// Within each non-general URL key only the minimum doc id survives.
/// Documents without a URL and general-domain URLs always survive.
inline UrlDedupResult url_dedup(std::span<const UrlDedupInput> docs) {
    std::unordered_map<std::string, DocId> first;
    std::vector<std::pair<DocId, std::string>> keyed;
    UrlDedupResult r;
    for (const auto& d : docs) {
        if (!d.url || unicode::trim(*d.url).empty()) {
            r.retained.push_back(d.id);
            continue;
        }
        auto k = url_key(*d.url);
        if (k.is_general_domain) {
            r.retained.push_back(d.id);
            continue;
        }
        auto [it, inserted] = first.emplace(k.key, d.id);
        if (!inserted && d.id < it->second) it->second = d.id;
        keyed.emplace_back(d.id, std::move(k.key));
    }
    for (const auto& [id, key] : keyed) {
        const DocId winner = first.at(key);
        if (id == winner) {
            r.retained.push_back(id);
        } else {
            r.removed.push_back({winner, id});
        }
    }
    std::sort(r.retained.begin(), r.retained.end());
    std::sort(r.removed.begin(), r.removed.end(),
              [](const DuplicatePair& a, const DuplicatePair& b) { return a.removed < b.removed; });
    return r;
}

}  // namespace corpusclean
