#pragma once

// MinHash signatures over word 5-gram shingles and banded LSH clustering.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <queue>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "corpusclean/corpus.hpp"
#include "corpusclean/error.hpp"
#include "corpusclean/hash.hpp"
#include "corpusclean/tokenizer.hpp"
#include "corpusclean/union_find.hpp"
#include "corpusclean/unicode.hpp"

namespace corpusclean {

inline constexpr std::size_t kShingleSize = 5;
inline constexpr std::size_t kDefaultPermutations = 1024;
inline constexpr double kDefaultJaccardThreshold = 0.8;

/// Sorted, distinct 64-bit hashes of the case-folded word n-grams. A text
/// with fewer than n tokens (but at least one) yields one hash of the whole
/// token sequence; a text without tokens yields no shingles.
inline std::vector<uint64_t> shingle(std::string_view text, const Tokenizer& tok, std::size_t n = kShingleSize) {
    if (n == 0) throw Error("shingle size must be >= 1");
    auto tokens = tok.tokenize(text);
    for (auto& t : tokens) t = unicode::fold_case(t);
    std::vector<uint64_t> out;
    if (tokens.empty()) return out;
    auto hash_range = [&](std::size_t begin, std::size_t end) {
        std::string key;
        for (std::size_t i = begin; i < end; ++i) {
            if (i > begin) key += '\x1f';
            key += tokens[i];
        }
        return hash_bytes(key);
    };
    if (tokens.size() < n) {
        out.push_back(hash_range(0, tokens.size()));
        return out;
    }
    out.reserve(tokens.size() - n + 1);
    for (std::size_t i = 0; i + n <= tokens.size(); ++i) out.push_back(hash_range(i, i + n));
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

/// P universal hashes h_k(x) = (a_k x + b_k) mod (2^61 - 1), with (a_k, b_k)
/// drawn from a SplitMix64 stream seeded once.
class HashFamily {
public:
    static constexpr uint64_t kPrime = (uint64_t{1} << 61) - 1;

    HashFamily(std::size_t permutations, uint64_t seed) : seed_(seed) {
        if (permutations == 0) throw Error("hash family needs at least one function");
        SplitMix64 rng(seed);
        a_.reserve(permutations);
        b_.reserve(permutations);
        for (std::size_t k = 0; k < permutations; ++k) {
            a_.push_back(1 + rng.next() % (kPrime - 1));
            b_.push_back(rng.next() % kPrime);
        }
    }

    std::size_t size() const { return a_.size(); }
    uint64_t seed() const { return seed_; }

    uint64_t operator()(std::size_t k, uint64_t x) const {
        const unsigned __int128 v =
            static_cast<unsigned __int128>(a_[k]) * (x % kPrime) + static_cast<unsigned __int128>(b_[k]);
        return reduce(v);
    }

private:
    static uint64_t reduce(unsigned __int128 v) {
        // v < 2^122; fold twice using 2^61 = 1 (mod p).
        uint64_t lo = static_cast<uint64_t>(v & kPrime);
        uint64_t hi = static_cast<uint64_t>(v >> 61);
        uint64_t r = lo + (hi & kPrime) + (hi >> 61);
        r = (r & kPrime) + (r >> 61);
        return r >= kPrime ? r - kPrime : r;
    }

    uint64_t seed_;
    std::vector<uint64_t> a_;
    std::vector<uint64_t> b_;
};

struct MinHashSignature {
    DocId doc_id{};
    std::vector<uint64_t> values;

    bool operator==(const MinHashSignature&) const = default;
};

inline MinHashSignature signature(DocId id, std::span<const uint64_t> shingles, const HashFamily& family) {
    if (shingles.empty()) throw Error("cannot sign a document without shingles");
    MinHashSignature s;
    s.doc_id = id;
    s.values.assign(family.size(), std::numeric_limits<uint64_t>::max());
    for (uint64_t x : shingles) {
        for (std::size_t k = 0; k < family.size(); ++k) s.values[k] = std::min(s.values[k], family(k, x));
    }
    return s;
}

/// Fraction of agreeing positions.
inline double estimated_jaccard(const MinHashSignature& a, const MinHashSignature& b) {
    if (a.values.size() != b.values.size() || a.values.empty()) throw Error("signature lengths differ");
    std::size_t eq = 0;
    for (std::size_t k = 0; k < a.values.size(); ++k) eq += a.values[k] == b.values[k] ? 1 : 0;
    return static_cast<double>(eq) / static_cast<double>(a.values.size());
}

/// Exact Jaccard of two sorted, distinct sets.
inline double exact_jaccard(std::span<const uint64_t> a, std::span<const uint64_t> b) {
    if (a.empty() && b.empty()) return 1.0;
    std::size_t i = 0, j = 0, inter = 0;
    while (i < a.size() && j < b.size()) {
        if (a[i] == b[j]) {
            ++inter;
            ++i;
            ++j;
        } else if (a[i] < b[j]) {
            ++i;
        } else {
            ++j;
        }
    }
    return static_cast<double>(inter) / static_cast<double>(a.size() + b.size() - inter);
}

// ---- LSH parameters ---------------------------------------------------------

struct LshParams {
    std::size_t bands = 0;
    std::size_t rows = 0;
};

/// Probability that two documents with Jaccard s share at least one bucket.
inline double collision_probability(double s, std::size_t bands, std::size_t rows) {
    return 1.0 - std::pow(1.0 - std::pow(s, static_cast<double>(rows)), static_cast<double>(bands));
}

namespace detail {

template <typename F>
double integrate(F&& f, double a, double b, int steps = 2000) {
    // Composite Simpson; steps is even.
    if (b <= a) return 0.0;
    const double h = (b - a) / steps;
    double acc = f(a) + f(b);
    for (int i = 1; i < steps; ++i) acc += f(a + i * h) * (i % 2 == 1 ? 4.0 : 2.0);
    return acc * h / 3.0;
}

}  // namespace detail

/// Integrated false-positive area below t plus false-negative area above t.
inline double lsh_error(std::size_t bands, std::size_t rows, double t) {
    const double fp = detail::integrate([&](double s) { return collision_probability(s, bands, rows); }, 0.0, t);
    const double fn = detail::integrate([&](double s) { return 1.0 - collision_probability(s, bands, rows); }, t, 1.0);
    return fp + fn;
}

/// The (b, r) with b*r = P minimizing lsh_error; ties keep the smaller b.
inline LshParams lsh_params(std::size_t permutations, double threshold = kDefaultJaccardThreshold) {
    if (permutations == 0) throw Error("LSH needs at least one permutation");
    if (!(threshold > 0.0 && threshold < 1.0)) throw Error("LSH threshold must lie in (0, 1)");
    LshParams best;
    double best_err = std::numeric_limits<double>::infinity();
    for (std::size_t b = 1; b <= permutations; ++b) {
        if (permutations % b != 0) continue;
        const double err = lsh_error(b, permutations / b, threshold);
        // Differences below quadrature noise count as ties.
        if (err < best_err - 1e-12) {
            best_err = err;
            best = {b, permutations / b};
        }
    }
    return best;
}

// ---- LSH index ----------------------------------------------------------------

/// Band tables as (band key, slot) records. Each band keeps an in-memory
/// buffer; when `spill_dir` is set and a buffer exceeds `max_buffered`
/// records it is sorted and written out as a run. Buckets are recovered by a
/// k-way merge of the runs, so results do not depend on whether spilling
/// happened.
class LshIndex {
public:
    struct Options {
        std::optional<std::filesystem::path> spill_dir;
        std::size_t max_buffered = std::size_t{1} << 22;  // records per band
    };

    LshIndex(LshParams params, Options opts) : params_(params), opts_(std::move(opts)), buffers_(params.bands), runs_(params.bands) {
        if (params_.bands == 0 || params_.rows == 0) throw Error("LSH needs bands >= 1 and rows >= 1");
        if (opts_.spill_dir) std::filesystem::create_directories(*opts_.spill_dir);
    }
    explicit LshIndex(LshParams params) : LshIndex(params, Options{}) {}

    LshIndex(const LshIndex&) = delete;
    LshIndex& operator=(const LshIndex&) = delete;

    ~LshIndex() {
        std::error_code ec;
        for (const auto& band : runs_) {
            for (const auto& f : band) std::filesystem::remove(f, ec);
        }
    }

    const LshParams& params() const { return params_; }
    std::size_t size() const { return count_; }
    std::size_t spilled_runs() const {
        std::size_t n = 0;
        for (const auto& r : runs_) n += r.size();
        return n;
    }

    /// Inserts a signature under `slot` (a caller-side index) and returns the
    /// slot for convenience.
    uint64_t insert(const MinHashSignature& sig, uint64_t slot) {
        if (sig.values.size() != params_.bands * params_.rows) {
            throw Error("signature length does not match bands x rows");
        }
        for (std::size_t b = 0; b < params_.bands; ++b) {
            buffers_[b].push_back({band_key(sig, b), slot});
            if (opts_.spill_dir && buffers_[b].size() >= opts_.max_buffered) spill(b);
        }
        ++count_;
        return slot;
    }

    static uint64_t band_key_of(std::span<const uint64_t> values, std::size_t band, std::size_t rows) {
        uint64_t h = mix64(band + 1);
        for (std::size_t k = band * rows; k < (band + 1) * rows; ++k) h = hash_combine(h, values[k]);
        return h;
    }

    /// Calls fn(slots) for every bucket of `band`, singletons included, in
    /// increasing band-key order. Slots within a bucket are sorted.
    void for_each_bucket(std::size_t band, const std::function<void(std::span<const uint64_t>)>& fn) const {
        std::vector<Record> mem = buffers_[band];
        std::sort(mem.begin(), mem.end());
        std::vector<std::unique_ptr<std::ifstream>> files;
        for (const auto& path : runs_[band]) {
            files.push_back(std::make_unique<std::ifstream>(path, std::ios::binary));
            if (!*files.back()) throw IoError("cannot reopen spill run " + path.string());
        }
        // Min-heap of (record, source); source == files.size() is the memory buffer.
        using Item = std::pair<Record, std::size_t>;
        std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
        std::size_t mem_pos = 0;
        auto pull = [&](std::size_t src) {
            if (src == files.size()) {
                if (mem_pos < mem.size()) heap.push({mem[mem_pos++], src});
                return;
            }
            Record r;
            if (files[src]->read(reinterpret_cast<char*>(&r), sizeof(Record))) heap.push({r, src});
        };
        for (std::size_t s = 0; s <= files.size(); ++s) pull(s);

        std::vector<uint64_t> bucket;
        uint64_t key = 0;
        while (!heap.empty()) {
            auto [rec, src] = heap.top();
            heap.pop();
            pull(src);
            if (!bucket.empty() && rec.key != key) {
                fn(bucket);
                bucket.clear();
            }
            key = rec.key;
            bucket.push_back(rec.slot);
        }
        if (!bucket.empty()) fn(bucket);
    }

private:
    struct Record {
        uint64_t key;
        uint64_t slot;
        auto operator<=>(const Record&) const = default;
    };

    uint64_t band_key(const MinHashSignature& sig, std::size_t band) const {
        return band_key_of(sig.values, band, params_.rows);
    }

    void spill(std::size_t band) {
        auto& buf = buffers_[band];
        std::sort(buf.begin(), buf.end());
        auto path = *opts_.spill_dir /
                    ("band" + std::to_string(band) + "_run" + std::to_string(runs_[band].size()) + ".bin");
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write spill run " + path.string());
        out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(Record)));
        if (!out) throw IoError("spill write failed for " + path.string());
        runs_[band].push_back(std::move(path));
        buf.clear();
        buf.shrink_to_fit();
    }

    LshParams params_;
    Options opts_;
    std::vector<std::vector<Record>> buffers_;
    std::vector<std::vector<std::filesystem::path>> runs_;
    std::size_t count_ = 0;
};

// ---- clustering -------------------------------------------------------------

struct DedupOptions {
    /// Only union bucket mates whose estimated Jaccard reaches the threshold.
    bool verify = false;
    double verify_threshold = kDefaultJaccardThreshold;
    LshIndex::Options index;
};

struct DuplicatePair {
    DocId survivor{};
    DocId removed{};
    bool operator==(const DuplicatePair&) const = default;
};

struct DedupResult {
    std::vector<DocId> retained;           // sorted
    std::vector<DuplicatePair> removed;    // sorted by removed id
    std::size_t clusters = 0;              // clusters with more than one member
};

/// Unions every pair of documents sharing an LSH bucket (optionally only
/// verified pairs) and keeps the minimum doc id of each cluster.
inline DedupResult minhash_dedup(std::span<const MinHashSignature> sigs, LshParams params,
                                 const DedupOptions& opts = {}) {
    DedupResult result;
    if (sigs.empty()) return result;
    LshIndex index(params, opts.index);
    for (std::size_t i = 0; i < sigs.size(); ++i) index.insert(sigs[i], i);

    UnionFind uf(sigs.size());
    for (std::size_t b = 0; b < params.bands; ++b) {
        index.for_each_bucket(b, [&](std::span<const uint64_t> slots) {
            if (slots.size() < 2) return;
            if (!opts.verify) {
                for (std::size_t k = 1; k < slots.size(); ++k) uf.unite(slots[0], slots[k]);
                return;
            }
            for (std::size_t i = 0; i < slots.size(); ++i) {
                for (std::size_t j = i + 1; j < slots.size(); ++j) {
                    if (uf.find(slots[i]) == uf.find(slots[j])) continue;
                    if (estimated_jaccard(sigs[slots[i]], sigs[slots[j]]) >= opts.verify_threshold) {
                        uf.unite(slots[i], slots[j]);
                    }
                }
            }
        });
    }

    // Survivor of each root: the minimum doc id among its members.
    std::vector<uint64_t> best(sigs.size(), std::numeric_limits<uint64_t>::max());
    std::vector<std::size_t> members(sigs.size(), 0);
    for (std::size_t i = 0; i < sigs.size(); ++i) {
        const auto r = uf.find(i);
        best[r] = std::min(best[r], to_u64(sigs[i].doc_id));
        ++members[r];
    }
    for (std::size_t i = 0; i < sigs.size(); ++i) {
        const auto r = uf.find(i);
        const auto id = to_u64(sigs[i].doc_id);
        if (id == best[r]) {
            result.retained.push_back(sigs[i].doc_id);
            if (members[r] > 1) ++result.clusters;
        } else {
            result.removed.push_back({DocId{best[r]}, sigs[i].doc_id});
        }
    }
    std::sort(result.retained.begin(), result.retained.end());
    std::sort(result.removed.begin(), result.removed.end(),
              [](const DuplicatePair& a, const DuplicatePair& b) { return a.removed < b.removed; });
    return result;
}

// ---- files ------------------------------------------------------------------

/// One line per removed document: "<survivor_id>\t<removed_id>".
inline void write_duplicates_report(const std::filesystem::path& path, std::span<const DuplicatePair> pairs) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write duplicates report " + path.string());
    for (const auto& p : pairs) out << to_u64(p.survivor) << '\t' << to_u64(p.removed) << '\n';
}

inline std::vector<DuplicatePair> read_duplicates_report(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read duplicates report " + path.string());
    std::vector<DuplicatePair> out;
    uint64_t s = 0, r = 0;
    while (in >> s >> r) out.push_back({DocId{s}, DocId{r}});
    return out;
}

namespace detail {

inline void put_le64(std::ostream& out, uint64_t v) {
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    out.write(b, 8);
}

inline bool get_le64(std::istream& in, uint64_t& v) {
    unsigned char b[8];
    if (!in.read(reinterpret_cast<char*>(b), 8)) return false;
    v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
    return true;
}

}  // namespace detail

/// Fixed-width records, little-endian: u64 doc id followed by P u64 minima.
inline void write_signatures(const std::filesystem::path& path, std::span<const MinHashSignature> sigs) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write signatures " + path.string());
    for (const auto& s : sigs) {
        detail::put_le64(out, to_u64(s.doc_id));
        for (uint64_t v : s.values) detail::put_le64(out, v);
    }
    if (!out) throw IoError("write failed for " + path.string());
}

inline std::vector<MinHashSignature> read_signatures(const std::filesystem::path& path, std::size_t permutations) {
    const auto bytes = std::filesystem::file_size(path);
    const auto record = 8 * (permutations + 1);
    if (bytes % record != 0) throw Error("signature file size is not a multiple of the record size: " + path.string());
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read signatures " + path.string());
    std::vector<MinHashSignature> out(bytes / record);
    for (auto& s : out) {
        uint64_t id = 0;
        detail::get_le64(in, id);
        s.doc_id = DocId{id};
        s.values.resize(permutations);
        for (auto& v : s.values) detail::get_le64(in, v);
    }
    return out;
}

}  // namespace corpusclean
