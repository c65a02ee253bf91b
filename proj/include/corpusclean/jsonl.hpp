#pragma once

// Newline-delimited record I/O. Files ending in ".gz" are read and written
// through zlib; everything else is plain text.

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>
#include <zlib.h>

#include "corpusclean/corpus.hpp"
#include "corpusclean/error.hpp"
#include "corpusclean/unicode.hpp"

namespace corpusclean {

namespace fs = std::filesystem;

inline bool is_gzip_path(const fs::path& p) { return p.extension() == ".gz"; }

class LineReader {
public:
    explicit LineReader(const fs::path& path) : path_(path) {
        if (!fs::exists(path)) throw IoError("cannot open " + path.string() + ": no such file");
        file_ = gzopen(path.c_str(), "rb");
        if (file_ == nullptr) throw IoError("cannot open " + path.string());
        buf_.resize(1 << 16);
    }
    ~LineReader() {
        if (file_ != nullptr) gzclose(file_);
    }
    LineReader(const LineReader&) = delete;
    LineReader& operator=(const LineReader&) = delete;

    /// Reads one line without its terminator. Returns false at EOF.
    bool next(std::string& line) {
        line.clear();
        while (true) {
            if (pos_ >= len_) {
                if (eof_) return !line.empty();
                const int n = gzread(file_, buf_.data(), static_cast<unsigned>(buf_.size()));
                if (n < 0) {
                    int err = 0;
                    throw IoError("read error in " + path_.string() + ": " + gzerror(file_, &err));
                }
                if (n == 0) {
                    eof_ = true;
                    return !line.empty();
                }
                len_ = static_cast<std::size_t>(n);
                pos_ = 0;
            }
            const char* begin = buf_.data() + pos_;
            const char* nl = static_cast<const char*>(std::memchr(begin, '\n', len_ - pos_));
            if (nl == nullptr) {
                line.append(begin, len_ - pos_);
                pos_ = len_;
                continue;
            }
            line.append(begin, static_cast<std::size_t>(nl - begin));
            pos_ += static_cast<std::size_t>(nl - begin) + 1;
            return true;
        }
    }

private:
    fs::path path_;
    gzFile file_ = nullptr;
    std::vector<char> buf_;
    std::size_t pos_ = 0;
    std::size_t len_ = 0;
    bool eof_ = false;
};

class LineWriter {
public:
    explicit LineWriter(const fs::path& path) : path_(path), gzip_(is_gzip_path(path)) {
        if (path.has_parent_path()) fs::create_directories(path.parent_path());
        if (gzip_) {
            // Fixed header (no mtime/name) keeps output byte-reproducible.
            gz_ = gzopen(path.c_str(), "wb6");
            if (gz_ == nullptr) throw IoError("cannot write " + path.string());
        } else {
            out_.open(path, std::ios::binary | std::ios::trunc);
            if (!out_) throw IoError("cannot write " + path.string());
        }
    }
    ~LineWriter() { close(); }
    LineWriter(const LineWriter&) = delete;
    LineWriter& operator=(const LineWriter&) = delete;

    void write(std::string_view line) {
        if (gzip_) {
            if (!line.empty() && gzwrite(gz_, line.data(), static_cast<unsigned>(line.size())) == 0) {
                throw IoError("write error in " + path_.string());
            }
            gzputc(gz_, '\n');
        } else {
            out_.write(line.data(), static_cast<std::streamsize>(line.size()));
            out_.put('\n');
        }
    }

    void close() {
        if (gz_ != nullptr) {
            gzclose(gz_);
            gz_ = nullptr;
        }
        if (out_.is_open()) out_.close();
    }

private:
    fs::path path_;
    bool gzip_;
    gzFile gz_ = nullptr;
    std::ofstream out_;
};

// ---------------------------------------------------------------------------
// Document <-> record

inline nlohmann::ordered_json metrics_to_json(const MetricVector& m) {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    for (auto metric : kAllMetrics) {
        if (m.is_disabled(metric)) {
            j[std::string(metric_name(metric))] = nullptr;
        } else {
            j[std::string(metric_name(metric))] = m[metric];
        }
    }
    return j;
}

inline MetricVector metrics_from_json(const nlohmann::ordered_json& j) {
    MetricVector m;
    m.values.fill(MetricVector::disabled());
    for (auto it = j.begin(); it != j.end(); ++it) {
        auto metric = metric_from_name(it.key());
        if (!metric) continue;
        if (it.value().is_number()) m[*metric] = it.value().get<double>();
    }
    return m;
}

inline nlohmann::ordered_json to_record(const Document& doc) {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    j["id"] = to_u64(doc.id);
    j["text"] = doc.text;
    if (doc.url) j["url"] = *doc.url;
    j["language"] = doc.language;
    if (!doc.source.empty()) j["source"] = doc.source;
    if (doc.timestamp) j["timestamp"] = *doc.timestamp;
    if (doc.lid_confidence) j["lid_confidence"] = *doc.lid_confidence;
    if (doc.metrics) j["metrics"] = metrics_to_json(*doc.metrics);
    for (auto it = doc.extra.begin(); it != doc.extra.end(); ++it) j[it.key()] = it.value();
    return j;
}

inline std::string to_line(const Document& doc) { return to_record(doc).dump(); }

enum class RecordStatus { ok, malformed, empty_text, missing_language };

/// Parses one record. `fallback_id` is used when the record has no "id" field.
/// With `assign_ids` the fallback always wins and a record's own "id" is kept
/// as the passthrough field "input_id".
inline RecordStatus from_line(std::string_view line, DocId fallback_id, Document& doc, bool assign_ids = false) {
    nlohmann::ordered_json j = nlohmann::ordered_json::parse(line, nullptr, /*allow_exceptions=*/false);
    if (j.is_discarded() || !j.is_object()) return RecordStatus::malformed;
    auto text = j.find("text");
    if (text == j.end() || !text->is_string()) return RecordStatus::malformed;
    doc = Document{};
    doc.text = text->get<std::string>();
    if (doc.text.empty()) return RecordStatus::empty_text;
    if (!unicode::is_valid_utf8(doc.text)) return RecordStatus::malformed;

    doc.id = fallback_id;
    for (auto it = j.begin(); it != j.end(); ++it) {
        const auto& key = it.key();
        const auto& v = it.value();
        if (key == "text") continue;
        if (key == "id" && assign_ids) {
            doc.extra["input_id"] = v;
        } else if (key == "id" && v.is_number_unsigned()) {
            doc.id = DocId{v.get<uint64_t>()};
        } else if (key == "url" && (v.is_string() || v.is_null())) {
            if (v.is_string()) doc.url = v.get<std::string>();
        } else if (key == "language" && v.is_string()) {
            doc.language = v.get<std::string>();
        } else if (key == "source" && v.is_string()) {
            doc.source = v.get<std::string>();
        } else if (key == "timestamp" && v.is_string()) {
            doc.timestamp = v.get<std::string>();
        } else if (key == "lid_confidence" && v.is_number()) {
            doc.lid_confidence = v.get<double>();
        } else if (key == "metrics" && v.is_object()) {
            doc.metrics = metrics_from_json(v);
        } else {
            doc.extra[key] = v;
        }
    }
    if (doc.language.empty()) return RecordStatus::missing_language;
    return RecordStatus::ok;
}

struct IngestStats {
    uint64_t documents = 0;
    uint64_t malformed = 0;
    uint64_t empty_text = 0;
    uint64_t missing_language = 0;

    uint64_t skipped() const { return malformed + empty_text + missing_language; }

    IngestStats& operator+=(const IngestStats& o) {
        documents += o.documents;
        malformed += o.malformed;
        empty_text += o.empty_text;
        missing_language += o.missing_language;
        return *this;
    }
};

/// Streams the documents of one shard in file order. Records without an "id"
/// (every record, with `assign_ids`) receive sequential ids (shard << 40) | k
/// over the accepted records.
inline IngestStats ingest_each(const fs::path& path, uint64_t shard_index,
                               const std::function<void(Document&&)>& sink, bool assign_ids = false) {
    LineReader reader(path);
    IngestStats stats;
    std::string line;
    uint64_t next_record = 0;
    Document doc;
    while (reader.next(line)) {
        if (unicode::trim(line).empty()) continue;
        switch (from_line(line, make_doc_id(shard_index, next_record), doc, assign_ids)) {
            case RecordStatus::ok:
                ++stats.documents;
                ++next_record;
                sink(std::move(doc));
                break;
            case RecordStatus::malformed: ++stats.malformed; break;
            case RecordStatus::empty_text: ++stats.empty_text; break;
            case RecordStatus::missing_language: ++stats.missing_language; break;
        }
    }
    return stats;
}

inline std::vector<Document> ingest(const fs::path& path, uint64_t shard_index, IngestStats* stats = nullptr,
                                    bool assign_ids = false) {
    std::vector<Document> docs;
    auto s = ingest_each(path, shard_index, [&](Document&& d) { docs.push_back(std::move(d)); }, assign_ids);
    if (stats != nullptr) *stats += s;
    return docs;
}

inline void write_documents(const fs::path& path, const std::vector<Document>& docs) {
    LineWriter w(path);
    for (const auto& d : docs) w.write(to_line(d));
}

/// Input files of a run: a single file, or every *.jsonl / *.jsonl.gz / *.json
/// file of a directory in lexicographic order (which fixes shard indices).
inline std::vector<fs::path> list_shards(const fs::path& input) {
    if (!fs::exists(input)) throw IoError("input not found: " + input.string());
    if (!fs::is_directory(input)) return {input};
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(input)) {
        if (!e.is_regular_file()) continue;
        const auto name = e.path().filename().string();
        if (name.ends_with(".jsonl") || name.ends_with(".jsonl.gz") || name.ends_with(".json")) {
            files.push_back(e.path());
        }
    }
    std::sort(files.begin(), files.end());
    return files;
}

}  // namespace corpusclean
