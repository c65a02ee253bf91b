#include <gtest/gtest.h>

#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "corpusclean/fasttext_model.hpp"
#include "corpusclean/langid.hpp"
#include "test_util.hpp"

namespace cc = corpusclean;
using testutil::data_dir;

namespace {

cc::Document doc(std::string text, std::string lang) {
    cc::Document d;
    d.text = std::move(text);
    d.language = std::move(lang);
    return d;
}

class Throwing final : public cc::LangClassifier {
public:
    const std::set<std::string>& supported_languages() const override { return langs_; }
    cc::LangPrediction predict(std::string_view) const override { throw std::runtime_error("boom"); }

private:
    std::set<std::string> langs_{"en"};
};

nlohmann::json expected() {
    std::ifstream in(data_dir() / "fasttext/expected.json");
    return nlohmann::json::parse(in);
}

}  // namespace

TEST(ScriptClassifier, PicksMajorityScript) {
    const auto clf = cc::ScriptClassifier::default_instance();
    auto p = clf.predict("Привет мир");
    EXPECT_EQ(p.language, "ru");
    EXPECT_DOUBLE_EQ(p.confidence, 1.0);
    // 3 Latin vs 3 Cyrillic letters: ties go to the smaller language code.
    p = clf.predict("abc где");
    EXPECT_EQ(p.language, "en");
    EXPECT_DOUBLE_EQ(p.confidence, 0.5);
}

TEST(ScriptClassifier, ShareOfLetters) {
    const auto clf = cc::ScriptClassifier::default_instance();
    auto p = clf.predict("abcd ж, 123!");
    EXPECT_EQ(p.language, "en");
    EXPECT_DOUBLE_EQ(p.confidence, 0.8);
    p = clf.predict("123 !!! ...");
    EXPECT_EQ(p.language, "en");
    EXPECT_DOUBLE_EQ(p.confidence, 0.0);
    EXPECT_TRUE(clf.supported_languages().contains("zh"));
}

TEST(RelabelFilter, Verdicts) {
    const auto clf = cc::ScriptClassifier::default_instance();
    EXPECT_EQ(cc::relabel_filter(doc("hello", "xx"), clf).verdict, cc::LidVerdict::unsupported_label);
    EXPECT_EQ(cc::relabel_filter(doc("hello", "ru"), clf).verdict, cc::LidVerdict::mismatch);
    auto r = cc::relabel_filter(doc("hello", "en"), clf);
    EXPECT_TRUE(r.keep());
    EXPECT_DOUBLE_EQ(r.prediction.confidence, 1.0);
    EXPECT_EQ(cc::relabel_filter(doc("x", "en"), Throwing{}).verdict, cc::LidVerdict::classifier_error);
}

TEST(RelabelFilter, TrustLabelLooksUpConfidence) {
    const auto clf = cc::ScriptClassifier::default_instance();
    auto r = cc::relabel_filter(doc("hello", "ru"), clf, /*repredict=*/false);
    EXPECT_TRUE(r.keep());
    EXPECT_EQ(r.prediction.language, "ru");
    EXPECT_DOUBLE_EQ(r.prediction.confidence, 0.0);
}

TEST(LangIdStats, Counts) {
    cc::LangIdStats st;
    st.record(cc::LidVerdict::keep);
    st.record(cc::LidVerdict::keep);
    st.record(cc::LidVerdict::mismatch);
    st.record(cc::LidVerdict::classifier_error);
    EXPECT_EQ(st.kept.load(), 2u);
    EXPECT_EQ(st.mismatched.load(), 1u);
    EXPECT_EQ(st.errors.load(), 1u);
    EXPECT_EQ(st.unsupported.load(), 0u);
}

// Reference outputs were produced by the fastText Python bindings.
class FastTextReference : public ::testing::TestWithParam<std::string> {};

TEST_P(FastTextReference, MatchesReferenceImplementation) {
    const auto ref = expected();
    const auto& probes = ref["probes"];
    const auto& rows = ref["models"][GetParam()];
    cc::FastTextClassifier clf(data_dir() / "fasttext" / GetParam());
    EXPECT_EQ(clf.supported_languages(), (std::set<std::string>{"de", "en", "fr", "ru"}));
    ASSERT_EQ(rows.size(), probes.size());
    for (std::size_t i = 0; i < probes.size(); ++i) {
        const std::string text = probes[i];
        const auto p = clf.predict(text);
        EXPECT_EQ(p.language, rows[i]["top"].get<std::string>()) << text;
        EXPECT_NEAR(p.confidence, rows[i]["top_prob"].get<double>(), 1e-4) << text;
        for (const auto& [lang, prob] : rows[i]["all"].items()) {
            EXPECT_NEAR(clf.confidence_for(text, lang), prob.get<double>(), 1e-4) << text << " / " << lang;
        }
    }
}

INSTANTIATE_TEST_SUITE_P(Models, FastTextReference,
                         ::testing::Values("lid_softmax.bin", "lid_softmax.ftz", "lid_hs.bin", "lid_ova.bin"),
                         [](const auto& info) {
                             std::string n = info.param;
                             for (auto& c : n) if (c == '.') c = '_';
                             return n;
                         });

TEST(FastText, UnknownLanguageHasZeroConfidence) {
    cc::FastTextClassifier clf(data_dir() / "fasttext/lid_softmax.bin");
    EXPECT_EQ(clf.confidence_for("hello", "zz"), 0.0);
}

TEST(FastText, RejectsForeignFiles) {
    testutil::TempDir dir;
    testutil::write_file(dir / "bogus.bin", "not a model at all");
    EXPECT_THROW(cc::FastTextClassifier(dir / "bogus.bin"), cc::Error);
    EXPECT_THROW(cc::FastTextClassifier(dir / "missing.bin"), cc::Error);
    auto good = testutil::read_file(data_dir() / "fasttext/lid_softmax.bin");
    testutil::write_file(dir / "trunc.bin", good.substr(0, good.size() / 2));
    EXPECT_THROW(cc::FastTextClassifier(dir / "trunc.bin"), cc::Error);
}

TEST(FastText, RelabelWithModel) {
    cc::FastTextClassifier clf(data_dir() / "fasttext/lid_softmax.bin");
    EXPECT_TRUE(cc::relabel_filter(doc("der bericht ist fertig und das team geht nach hause", "de"), clf).keep());
    EXPECT_EQ(cc::relabel_filter(doc("der bericht ist fertig und das team geht nach hause", "en"), clf).verdict,
              cc::LidVerdict::mismatch);
    EXPECT_EQ(cc::relabel_filter(doc("hello", "zh"), clf).verdict, cc::LidVerdict::unsupported_label);
}
