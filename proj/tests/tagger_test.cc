#include <gtest/gtest.h>

#include <numeric>

#include "psd/errors.h"
#include "psd/tagger.h"
#include "test_util.h"

namespace psd {
namespace {

using testing::TinyEncoder;

class TaggerTest : public ::testing::Test {
 protected:
  void SetUp() override {
    encoder_ = TinyEncoder();
    const int d = encoder_->info().hidden_dim;
    auto params = MlpParams::Zero(d, 8, 3);
    Rng rng(3);
    for (Eigen::Index i = 0; i < params.w1.size(); ++i) params.w1.data()[i] = static_cast<float>(rng.Uniform(-1, 1));
    for (Eigen::Index i = 0; i < params.w2.size(); ++i) params.w2.data()[i] = static_cast<float>(rng.Uniform(-1, 1));
    ClassifierModel with("with", params, {SenseId::Parse("1(1)"), SenseId::Parse("4(3)"), SenseId::Parse("9(7)")},
                         TrainConfig());
    with.set_chosen_layer(2);
    with.set_encoder_fingerprint(encoder_->info().fingerprint);
    models_.emplace("with", with);
    for (const char* s : {"1(1)", "4(3)", "9(7)"}) inventory_.Add("with", {SenseId::Parse(s), std::nullopt});
    inventory_.Add("in front of", {SenseId::Parse("1(1)"), std::nullopt});
    inventory_.Add("in", {SenseId::Parse("2(1)"), std::nullopt});
  }

  std::unique_ptr<NativeEncoder> encoder_;
  std::map<std::string, ClassifierModel> models_;
  SenseInventory inventory_;
};

TEST_F(TaggerTest, ThreeOccurrencesOfWith) {
  const Tagger tagger(models_, inventory_, *encoder_);
  const TagResult r = tagger.Tag("John ate some rice with dal with a spoon with his friend.");
  ASSERT_EQ(r.annotations.size(), 3u);
  const std::vector<size_t> positions = {4, 6, 9};
  for (size_t i = 0; i < 3; ++i) {
    const auto& a = r.annotations[i];
    EXPECT_EQ(a.start, positions[i]);
    EXPECT_EQ(a.end, positions[i]);
    EXPECT_TRUE(a.modeled);
    EXPECT_EQ(a.layer, 2);
    ASSERT_TRUE(a.sense.has_value());
    EXPECT_TRUE(models_.at("with").IndexOf(*a.sense).has_value());
    ASSERT_EQ(a.distribution.size(), 3u);
    double sum = 0;
    for (const auto& [s, p] : a.distribution) sum += p;
    EXPECT_NEAR(sum, 1.0, 1e-6);
  }
  // Each occurrence is encoded in its own context.
  EXPECT_NE(r.annotations[0].distribution[0].second, r.annotations[1].distribution[0].second);
  const std::string inline_text = r.Inline();
  EXPECT_NE(inline_text.find("with["), std::string::npos);
  const auto j = r.ToJson();
  EXPECT_EQ(j["annotations"].size(), 3u);
}

TEST_F(TaggerTest, NoPrepositionsNoAnnotations) {
  const Tagger tagger(models_, inventory_, *encoder_);
  EXPECT_TRUE(tagger.Tag("John ate rice.").annotations.empty());
}

TEST_F(TaggerTest, LongestMatchAndUnmodeled) {
  const Tagger tagger(models_, inventory_, *encoder_);
  const TagResult r = tagger.Tag("We met in front of the house with friends in it");
  ASSERT_EQ(r.annotations.size(), 3u);
  EXPECT_EQ(r.annotations[0].preposition, "in front of");
  EXPECT_EQ(r.annotations[0].start, 2u);
  EXPECT_EQ(r.annotations[0].end, 4u);
  EXPECT_FALSE(r.annotations[0].modeled);
  EXPECT_FALSE(r.annotations[0].sense.has_value());
  EXPECT_TRUE(r.annotations[1].modeled);
  EXPECT_EQ(r.annotations[2].preposition, "in");
  EXPECT_FALSE(r.annotations[2].modeled);
  EXPECT_NE(r.Inline().find("[?]"), std::string::npos);
  EXPECT_TRUE(r.ToJson()["annotations"][0]["unmodeled"].get<bool>());
}

TEST_F(TaggerTest, ForeignFingerprintRejected) {
  models_.at("with").set_encoder_fingerprint("elsewhere");
  EXPECT_THROW(Tagger(models_, inventory_, *encoder_), ValidationError);
}

}  // namespace
}  // namespace psd
