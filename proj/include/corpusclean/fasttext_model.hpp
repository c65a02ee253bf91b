#pragma once

// Inference-only reader for fastText supervised model files (.bin and
// quantized .ftz), as used by the public language-identification models.
// Reproduces fastText's tokenization, subword hashing and the softmax,
// hierarchical-softmax and one-vs-all output layers.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "corpusclean/error.hpp"
#include "corpusclean/langid.hpp"
#include "corpusclean/unicode.hpp"

namespace corpusclean {

namespace fasttext_detail {

inline constexpr int32_t kMagic = 793712314;
inline constexpr int32_t kVersion = 12;
inline constexpr std::string_view kEos = "</s>";
inline constexpr std::string_view kBow = "<";
inline constexpr std::string_view kEow = ">";
inline constexpr std::string_view kLabelPrefix = "__label__";

enum class LossName : int32_t { hs = 1, ns = 2, softmax = 3, ova = 4 };
enum class ModelName : int32_t { cbow = 1, sg = 2, sup = 3 };

class BinaryReader {
public:
    explicit BinaryReader(const std::filesystem::path& path) : path_(path), in_(path, std::ios::binary) {
        if (!in_) throw IoError("cannot open fastText model " + path.string());
    }

    template <typename T>
    T read() {
        T v{};
        in_.read(reinterpret_cast<char*>(&v), sizeof(T));
        check();
        return v;
    }

    template <typename T>
    void read_into(std::vector<T>& out, std::size_t n) {
        out.resize(n);
        if (n > 0) in_.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(n * sizeof(T)));
        check();
    }

    std::string read_cstring() {
        std::string s;
        char c;
        while (in_.get(c) && c != '\0') s.push_back(c);
        check();
        return s;
    }

private:
    void check() {
        if (!in_) throw IoError("truncated fastText model " + path_.string());
    }

    std::filesystem::path path_;
    std::ifstream in_;
};

struct ProductQuantizer {
    static constexpr int32_t kSub = 256;
    int32_t dim = 0, nsubq = 0, dsub = 0, lastdsub = 0;
    std::vector<float> centroids;

    void load(BinaryReader& in) {
        dim = in.read<int32_t>();
        nsubq = in.read<int32_t>();
        dsub = in.read<int32_t>();
        lastdsub = in.read<int32_t>();
        if (dim <= 0 || nsubq <= 0 || dsub <= 0 || lastdsub <= 0) throw Error("fastText: bad quantizer header");
        in.read_into(centroids, static_cast<std::size_t>(dim) * kSub);
    }

    const float* get_centroids(int32_t m, uint8_t i) const {
        if (m == nsubq - 1) return &centroids[static_cast<std::size_t>(m) * kSub * dsub + i * lastdsub];
        return &centroids[(static_cast<std::size_t>(m) * kSub + i) * dsub];
    }

    float mulcode(const std::vector<float>& x, const uint8_t* codes, int64_t t, float alpha) const {
        float res = 0.0f;
        int32_t d = dsub;
        const uint8_t* code = codes + nsubq * t;
        for (int32_t m = 0; m < nsubq; ++m) {
            const float* c = get_centroids(m, code[m]);
            if (m == nsubq - 1) d = lastdsub;
            for (int32_t n = 0; n < d; ++n) res += x[m * dsub + n] * c[n];
        }
        return res * alpha;
    }

    void addcode(std::vector<float>& x, const uint8_t* codes, int64_t t, float alpha) const {
        int32_t d = dsub;
        const uint8_t* code = codes + nsubq * t;
        for (int32_t m = 0; m < nsubq; ++m) {
            const float* c = get_centroids(m, code[m]);
            if (m == nsubq - 1) d = lastdsub;
            for (int32_t n = 0; n < d; ++n) x[m * dsub + n] += alpha * c[n];
        }
    }
};

/// Dense or product-quantized row matrix.
class Matrix {
public:
    void load(BinaryReader& in, bool quantized) {
        quantized_ = quantized;
        if (!quantized) {
            rows_ = in.read<int64_t>();
            cols_ = in.read<int64_t>();
            if (rows_ < 0 || cols_ < 0) throw Error("fastText: bad matrix shape");
            in.read_into(dense_, static_cast<std::size_t>(rows_ * cols_));
            return;
        }
        qnorm_ = in.read<uint8_t>() != 0;
        rows_ = in.read<int64_t>();
        cols_ = in.read<int64_t>();
        const auto codesize = in.read<int32_t>();
        if (rows_ < 0 || cols_ < 0 || codesize < 0) throw Error("fastText: bad quantized matrix shape");
        in.read_into(codes_, static_cast<std::size_t>(codesize));
        pq_.load(in);
        if (static_cast<int64_t>(codes_.size()) < rows_ * pq_.nsubq) throw Error("fastText: short code table");
        if (qnorm_) {
            in.read_into(norm_codes_, static_cast<std::size_t>(rows_));
            npq_.load(in);
        }
    }

    int64_t rows() const { return rows_; }
    int64_t cols() const { return cols_; }

    void add_row(std::vector<float>& x, int64_t i) const {
        if (!quantized_) {
            const float* r = &dense_[static_cast<std::size_t>(i * cols_)];
            for (int64_t j = 0; j < cols_; ++j) x[j] += r[j];
            return;
        }
        pq_.addcode(x, codes_.data(), i, norm(i));
    }

    float dot_row(const std::vector<float>& x, int64_t i) const {
        if (!quantized_) {
            const float* r = &dense_[static_cast<std::size_t>(i * cols_)];
            float d = 0.0f;
            for (int64_t j = 0; j < cols_; ++j) d += r[j] * x[j];
            return d;
        }
        return pq_.mulcode(x, codes_.data(), i, norm(i));
    }

private:
    float norm(int64_t i) const { return qnorm_ ? npq_.get_centroids(0, norm_codes_[i])[0] : 1.0f; }

    bool quantized_ = false;
    int64_t rows_ = 0, cols_ = 0;
    std::vector<float> dense_;
    bool qnorm_ = false;
    std::vector<uint8_t> codes_;
    std::vector<uint8_t> norm_codes_;
    ProductQuantizer pq_;
    ProductQuantizer npq_;
};

/// 32-bit FNV-1a with fastText's sign-extension of each byte.
inline uint32_t hash(std::string_view s) {
    uint32_t h = 2166136261u;
    for (char c : s) {
        h = h ^ static_cast<uint32_t>(static_cast<int8_t>(c));
        h = h * 16777619u;
    }
    return h;
}

struct TreeNode {
    int32_t parent = -1;
    int32_t left = -1;
    int32_t right = -1;
    int64_t count = 0;
    bool binary = false;
};

}  // namespace fasttext_detail

class FastTextClassifier final : public LangClassifier {
public:
    explicit FastTextClassifier(const std::filesystem::path& path) { load(path); }

    const std::set<std::string>& supported_languages() const override { return languages_; }

    LangPrediction predict(std::string_view text) const override {
        const auto hidden = hidden_for(text);
        int32_t best = -1;
        double best_score = -std::numeric_limits<double>::infinity();
        if (loss_ == fasttext_detail::LossName::hs) {
            hs_search(static_cast<int32_t>(tree_.size()) - 1, 0.0, hidden, best, best_score);
        } else {
            const auto out = output_layer(hidden);
            for (int32_t i = 0; i < static_cast<int32_t>(out.size()); ++i) {
                const double s = std_log(out[i]);
                if (s > best_score) {
                    best_score = s;
                    best = i;
                }
            }
        }
        if (best < 0) throw Error("fastText: no prediction");
        return {label_languages_[best], std::clamp(std::exp(best_score), 0.0, 1.0)};
    }

    double confidence_for(std::string_view text, std::string_view language) const override {
        auto it = std::find(label_languages_.begin(), label_languages_.end(), language);
        if (it == label_languages_.end()) return 0.0;
        const auto label = static_cast<int32_t>(it - label_languages_.begin());
        const auto hidden = hidden_for(text);
        double score = 0.0;
        if (loss_ == fasttext_detail::LossName::hs) {
            for (int32_t node = label; tree_[node].parent != -1; node = tree_[node].parent) {
                const int32_t parent = tree_[node].parent;
                const double f = exact_sigmoid(output_.dot_row(hidden, parent - nlabels_));
                score += std_log(tree_[node].binary ? f : 1.0 - f);
            }
        } else {
            score = std_log(output_layer(hidden)[label]);
        }
        return std::clamp(std::exp(score), 0.0, 1.0);
    }

    /// Input-matrix rows for one line, in fastText's order (subwords, then
    /// word n-grams). Exposed for tests.
    std::vector<int32_t> line_features(std::string_view text) const {
        std::vector<int32_t> ids;
        // Signed on purpose: fastText sign-extends these when mixing word n-grams.
        std::vector<int32_t> word_hashes;
        auto add_token = [&](std::string_view token) {
            const uint32_t h = fasttext_detail::hash(token);
            auto it = word2int_.find(std::string(token));
            const int32_t wid = it == word2int_.end() ? -1 : it->second;
            const bool is_label = wid >= 0 ? entry_is_label_[wid] : token.starts_with(fasttext_detail::kLabelPrefix);
            if (is_label) return;
            if (wid < 0) {
                if (token != fasttext_detail::kEos) {
                    std::string w;
                    w.reserve(token.size() + 2);
                    w += fasttext_detail::kBow;
                    w += token;
                    w += fasttext_detail::kEow;
                    compute_subwords(w, ids);
                }
            } else if (maxn_ <= 0) {
                ids.push_back(wid);
            } else {
                const auto& sub = subwords_[wid];
                ids.insert(ids.end(), sub.begin(), sub.end());
            }
            word_hashes.push_back(static_cast<int32_t>(h));
        };

        std::size_t i = 0;
        while (i < text.size()) {
            while (i < text.size() && is_space(text[i])) ++i;
            const std::size_t start = i;
            while (i < text.size() && !is_space(text[i])) ++i;
            if (i > start) add_token(text.substr(start, i - start));
        }
        add_token(fasttext_detail::kEos);
        add_word_ngrams(ids, word_hashes);
        return ids;
    }

    int32_t dim() const { return dim_; }

private:
    static bool is_space(char c) {
        return c == ' ' || c == '\n' || c == '\r' || c == '\t' || c == '\v' || c == '\f' || c == '\0';
    }

    static double std_log(double x) { return std::log(x + 1e-5); }

    static float exact_sigmoid(float x) { return 1.0f / (1.0f + std::exp(-x)); }

    float table_sigmoid(float x) const {
        constexpr int kTable = 512;
        constexpr int kMax = 8;
        if (x < -kMax) return 0.0f;
        if (x > kMax) return 1.0f;
        const auto i = static_cast<int64_t>((x + kMax) * kTable / kMax / 2);
        return sigmoid_table_[static_cast<std::size_t>(i)];
    }

    void load(const std::filesystem::path& path) {
        using namespace fasttext_detail;
        BinaryReader in(path);
        if (in.read<int32_t>() != kMagic) throw Error("not a fastText model: " + path.string());
        const auto version = in.read<int32_t>();
        if (version > kVersion) throw Error("unsupported fastText model version " + std::to_string(version));

        dim_ = in.read<int32_t>();
        in.read<int32_t>();  // ws
        in.read<int32_t>();  // epoch
        in.read<int32_t>();  // minCount
        in.read<int32_t>();  // neg
        word_ngrams_ = in.read<int32_t>();
        loss_ = static_cast<LossName>(in.read<int32_t>());
        const auto model = static_cast<ModelName>(in.read<int32_t>());
        bucket_ = in.read<int32_t>();
        minn_ = in.read<int32_t>();
        maxn_ = in.read<int32_t>();
        in.read<int32_t>();  // lrUpdateRate
        in.read<double>();   // t
        if (model != ModelName::sup) throw Error("fastText model is not a supervised classifier");
        if (version == 11) maxn_ = 0;

        const auto size = in.read<int32_t>();
        nwords_ = in.read<int32_t>();
        nlabels_ = in.read<int32_t>();
        in.read<int64_t>();  // ntokens
        const auto pruneidx_size = in.read<int64_t>();
        if (size < 0 || nwords_ < 0 || nlabels_ <= 0 || nwords_ + nlabels_ != size) {
            throw Error("fastText: inconsistent dictionary header");
        }
        std::vector<std::string> words(static_cast<std::size_t>(size));
        std::vector<int64_t> counts(static_cast<std::size_t>(size));
        entry_is_label_.assign(static_cast<std::size_t>(size), false);
        for (int32_t i = 0; i < size; ++i) {
            words[i] = in.read_cstring();
            counts[i] = in.read<int64_t>();
            entry_is_label_[i] = in.read<int8_t>() == 1;
            word2int_.emplace(words[i], i);
        }
        pruned_ = pruneidx_size >= 0;
        for (int64_t i = 0; i < pruneidx_size; ++i) {
            const auto first = in.read<int32_t>();
            const auto second = in.read<int32_t>();
            pruneidx_[first] = second;
        }

        subwords_.resize(static_cast<std::size_t>(size));
        for (int32_t i = 0; i < size; ++i) {
            subwords_[i].push_back(i);
            if (words[i] != kEos) {
                compute_subwords(std::string(kBow) + words[i] + std::string(kEow), subwords_[i]);
            }
        }

        const bool quant_input = in.read<uint8_t>() != 0;
        input_.load(in, quant_input);
        if (!quant_input && pruned_) throw Error("fastText: pruned dictionary without quantized input");
        const bool qout = in.read<uint8_t>() != 0;
        output_.load(in, quant_input && qout);
        if (input_.cols() != dim_ || output_.cols() != dim_) throw Error("fastText: matrix width mismatch");

        std::vector<int64_t> label_counts;
        for (int32_t i = 0; i < size; ++i) {
            if (!entry_is_label_[i]) continue;
            label_counts.push_back(counts[i]);
            std::string_view lang = words[i];
            if (lang.starts_with(kLabelPrefix)) lang.remove_prefix(kLabelPrefix.size());
            label_languages_.emplace_back(lang);
            languages_.emplace(lang);
        }
        if (static_cast<int32_t>(label_counts.size()) != nlabels_) throw Error("fastText: label count mismatch");

        // One row per label for every loss; hs only reads the first nlabels-1.
        if (output_.rows() != nlabels_) throw Error("fastText: bad output matrix");
        if (loss_ == LossName::hs) build_tree(label_counts);

        constexpr int kTable = 512;
        constexpr int kMax = 8;
        sigmoid_table_.reserve(kTable + 1);
        for (int i = 0; i < kTable + 1; ++i) {
            const float x = static_cast<float>(i * 2 * kMax) / kTable - kMax;
            sigmoid_table_.push_back(static_cast<float>(1.0 / (1.0 + std::exp(-x))));
        }
    }

    void push_hash(std::vector<int32_t>& ids, int32_t id) const {
        if (!pruned_) {
            ids.push_back(nwords_ + id);
            return;
        }
        auto it = pruneidx_.find(id);
        if (it != pruneidx_.end()) ids.push_back(nwords_ + it->second);
    }

    void compute_subwords(const std::string& word, std::vector<int32_t>& ids) const {
        if (bucket_ <= 0) return;
        for (std::size_t i = 0; i < word.size(); ++i) {
            if ((word[i] & 0xC0) == 0x80) continue;
            std::string ngram;
            for (std::size_t j = i, n = 1; j < word.size() && n <= static_cast<std::size_t>(std::max(maxn_, 0)); ++n) {
                ngram.push_back(word[j++]);
                while (j < word.size() && (word[j] & 0xC0) == 0x80) ngram.push_back(word[j++]);
                if (n >= static_cast<std::size_t>(std::max(minn_, 0)) && !(n == 1 && (i == 0 || j == word.size()))) {
                    const auto h = static_cast<int32_t>(fasttext_detail::hash(ngram) % static_cast<uint32_t>(bucket_));
                    push_hash(ids, h);
                }
            }
        }
    }

    void add_word_ngrams(std::vector<int32_t>& ids, const std::vector<int32_t>& hashes) const {
        if (bucket_ <= 0) return;
        for (std::size_t i = 0; i < hashes.size(); ++i) {
            auto h = static_cast<uint64_t>(static_cast<int64_t>(hashes[i]));
            for (std::size_t j = i + 1; j < hashes.size() && j < i + static_cast<std::size_t>(word_ngrams_); ++j) {
                h = h * 116049371 + static_cast<uint64_t>(static_cast<int64_t>(hashes[j]));
                push_hash(ids, static_cast<int32_t>(h % static_cast<uint64_t>(bucket_)));
            }
        }
    }

    std::vector<float> hidden_for(std::string_view text) const {
        std::string line(text.substr(0, unicode::prefix_bytes(text, kLidMaxScalars)));
        std::replace(line.begin(), line.end(), '\n', ' ');
        const auto ids = line_features(line);
        if (ids.empty()) throw Error("fastText: no input features");
        std::vector<float> hidden(static_cast<std::size_t>(dim_), 0.0f);
        for (int32_t id : ids) input_.add_row(hidden, id);
        const float scale = static_cast<float>(1.0 / static_cast<double>(ids.size()));
        for (auto& v : hidden) v *= scale;
        return hidden;
    }

    /// Softmax or per-label sigmoid scores.
    std::vector<float> output_layer(const std::vector<float>& hidden) const {
        std::vector<float> out(static_cast<std::size_t>(nlabels_));
        for (int32_t i = 0; i < nlabels_; ++i) out[i] = output_.dot_row(hidden, i);
        if (loss_ == fasttext_detail::LossName::softmax) {
            float mx = out[0];
            for (float v : out) mx = std::max(v, mx);
            float z = 0.0f;
            for (auto& v : out) {
                v = std::exp(v - mx);
                z += v;
            }
            for (auto& v : out) v /= z;
        } else {
            for (auto& v : out) v = table_sigmoid(v);
        }
        return out;
    }

    void build_tree(const std::vector<int64_t>& counts) {
        const int32_t osz = nlabels_;
        tree_.assign(static_cast<std::size_t>(2 * osz - 1), fasttext_detail::TreeNode{});
        for (auto& n : tree_) n.count = static_cast<int64_t>(1e15);
        for (int32_t i = 0; i < osz; ++i) tree_[i].count = counts[i];
        int32_t leaf = osz - 1;
        int32_t node = osz;
        for (int32_t i = osz; i < 2 * osz - 1; ++i) {
            int32_t mini[2] = {0, 0};
            for (int32_t& m : mini) {
                if (leaf >= 0 && tree_[leaf].count < tree_[node].count) {
                    m = leaf--;
                } else {
                    m = node++;
                }
            }
            tree_[i].left = mini[0];
            tree_[i].right = mini[1];
            tree_[i].count = tree_[mini[0]].count + tree_[mini[1]].count;
            tree_[mini[0]].parent = i;
            tree_[mini[1]].parent = i;
            tree_[mini[1]].binary = true;
        }
    }

    void hs_search(int32_t node, double score, const std::vector<float>& hidden, int32_t& best,
                   double& best_score) const {
        if (score < best_score) return;
        const auto& n = tree_[node];
        if (n.left == -1 && n.right == -1) {
            if (score > best_score) {
                best_score = score;
                best = node;
            }
            return;
        }
        const float f = exact_sigmoid(output_.dot_row(hidden, node - nlabels_));
        hs_search(n.left, score + std_log(1.0 - f), hidden, best, best_score);
        hs_search(n.right, score + std_log(f), hidden, best, best_score);
    }

    int32_t dim_ = 0;
    int32_t word_ngrams_ = 1;
    fasttext_detail::LossName loss_ = fasttext_detail::LossName::softmax;
    int32_t bucket_ = 0;
    int32_t minn_ = 0;
    int32_t maxn_ = 0;
    int32_t nwords_ = 0;
    int32_t nlabels_ = 0;
    bool pruned_ = false;
    std::unordered_map<int32_t, int32_t> pruneidx_;
    std::unordered_map<std::string, int32_t> word2int_;
    std::vector<bool> entry_is_label_;
    std::vector<std::vector<int32_t>> subwords_;
    fasttext_detail::Matrix input_;
    fasttext_detail::Matrix output_;
    std::vector<fasttext_detail::TreeNode> tree_;
    std::vector<std::string> label_languages_;
    std::set<std::string> languages_;
    std::vector<float> sigmoid_table_;
};

}  // namespace corpusclean
