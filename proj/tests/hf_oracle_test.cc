// Compares both encoder adapters with head representations computed by the
// reference Hugging Face implementation (tests/oracle/make_tiny_bert.py).

#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>

#include "json.hpp"
#include "psd/encoder.h"
#include "psd/native_encoder.h"
#include "test_util.h"

namespace psd {
namespace {

namespace fs = std::filesystem;

struct OracleCase {
  LabeledInstance instance;
  std::vector<std::vector<double>> expected;
};

class HfOracleTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const char* dir = std::getenv("PSD_ORACLE_DIR");
    if (!dir || !fs::exists(fs::path(dir) / "expected.json")) {
      GTEST_SKIP() << "reference model not generated (needs torch + transformers)";
    }
    root_ = dir;
    std::ifstream in(root_ / "expected.json");
    const auto doc = nlohmann::json::parse(in);
    for (const auto& c : doc.at("cases")) {
      OracleCase oc;
      oc.instance.id = c.at("id");
      oc.instance.tokens = c.at("tokens").get<std::vector<std::string>>();
      oc.instance.head = {c.at("head")[0].get<size_t>(), c.at("head")[1].get<size_t>()};
      oc.instance.preposition = "x";
      oc.expected = c.at("expected").get<std::vector<std::vector<double>>>();
      cases_.push_back(std::move(oc));
    }
  }

  void ExpectMatches(Encoder& enc) {
    ASSERT_FALSE(cases_.empty());
    for (const auto& c : cases_) {
      SCOPED_TRACE(c.instance.id);
      const LayerMatrix m = enc.Encode(c.instance);
      ASSERT_EQ(m.num_rows(), static_cast<int>(c.expected.size()));
      ASSERT_EQ(m.dim(), static_cast<int>(c.expected[0].size()));
      double worst = 0;
      for (int r = 0; r < m.num_rows(); ++r) {
        for (int k = 0; k < m.dim(); ++k) {
          worst = std::max(worst, std::abs(m.values(r, k) - c.expected[r][k]));
        }
      }
      EXPECT_LT(worst, 1e-4);
    }
  }

  fs::path root_;
  std::vector<OracleCase> cases_;
};

TEST_F(HfOracleTest, NativeEncoderMatchesReference) {
  auto enc = NativeEncoder::Load(root_ / "native");
  EXPECT_EQ(enc->info().num_layers, 3);
  EXPECT_EQ(enc->info().hidden_dim, 32);
  ExpectMatches(*enc);
}

TEST_F(HfOracleTest, WorkerEncoderMatchesReference) {
  auto enc = OpenEncoder("worker:" + (root_ / "hf").string());
  EXPECT_EQ(enc->info().num_layers, 3);
  EXPECT_EQ(enc->info().hidden_dim, 32);
  ExpectMatches(*enc);
  const std::string fp = enc->info().fingerprint;
  EXPECT_EQ(enc->ComputeFingerprint(), fp);
  EXPECT_EQ(OpenEncoder("worker:" + (root_ / "hf").string())->info().fingerprint, fp);
}

}  // namespace
}  // namespace psd
