#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "corpusclean/unicode.hpp"

namespace corpusclean {

/// A URL split into the parts the filters care about. Parsing is lenient:
/// a missing scheme is allowed ("bad.example/x").
struct ParsedUrl {
    std::string scheme;     // lowercased, may be empty
    std::string host;       // lowercased, no port, no trailing dot
    std::string port;       // as written, may be empty
    std::string path;       // as written, may be empty
    std::string query;      // without '?', may be empty
    std::string fragment;   // without '#', may be empty
    bool has_query = false;
    bool has_fragment = false;
};

inline std::optional<ParsedUrl> parse_url(std::string_view raw) {
    std::string_view s = unicode::trim(raw);
    if (s.empty()) return std::nullopt;

    ParsedUrl u;
    if (auto frag = s.find('#'); frag != std::string_view::npos) {
        u.fragment = std::string(s.substr(frag + 1));
        u.has_fragment = true;
        s = s.substr(0, frag);
    }
    if (auto q = s.find('?'); q != std::string_view::npos) {
        u.query = std::string(s.substr(q + 1));
        u.has_query = true;
        s = s.substr(0, q);
    }
    if (auto sep = s.find("://"); sep != std::string_view::npos) {
        const auto scheme = s.substr(0, sep);
        if (scheme.empty()) return std::nullopt;
        for (char c : scheme) {
            if (!(unicode::is_alnum_ascii(c) || c == '+' || c == '-' || c == '.')) return std::nullopt;
        }
        u.scheme = unicode::to_lower_ascii(scheme);
        s = s.substr(sep + 3);
    } else if (s.starts_with("//")) {
        s = s.substr(2);
    }

    std::string_view authority = s;
    if (auto slash = s.find('/'); slash != std::string_view::npos) {
        authority = s.substr(0, slash);
        u.path = std::string(s.substr(slash));
    }
    if (auto at = authority.rfind('@'); at != std::string_view::npos) authority = authority.substr(at + 1);

    std::string_view host = authority;
    if (host.starts_with('[')) {
        auto close = host.find(']');
        if (close == std::string_view::npos) return std::nullopt;
        if (close + 1 < host.size() && host[close + 1] == ':') u.port = std::string(host.substr(close + 2));
        host = host.substr(0, close + 1);
    } else if (auto colon = host.rfind(':'); colon != std::string_view::npos) {
        u.port = std::string(host.substr(colon + 1));
        host = host.substr(0, colon);
    }
    while (!host.empty() && host.back() == '.') host.remove_suffix(1);
    if (host.empty()) return std::nullopt;
    for (char c : host) {
        if (c == ' ' || c == '\t' || c == '\\' || c == '<' || c == '>' || c == '"') return std::nullopt;
    }
    u.host = unicode::to_lower_ascii(host);
    return u;
}

}  // namespace corpusclean
