#include <gtest/gtest.h>

#include <cmath>
#include <cstring>

#include "psd/cache.h"
#include "psd/encoder.h"
#include "psd/errors.h"
#include "psd/native_encoder.h"
#include "psd/wordpiece.h"
#include "test_util.h"

namespace psd {
namespace {

using testing::MakeInstance;
using testing::TempDir;
using testing::TinyEncoder;

TEST(WordPieceTest, GreedyLongestMatch) {
  const WordPieceTokenizer tok({"[UNK]", "[CLS]", "[SEP]", "un", "##aff", "##able", "aff", "."},
                               true);
  EXPECT_EQ(tok.TokenizeWord("unaffable"), (std::vector<int>{3, 4, 5}));
  EXPECT_EQ(tok.TokenizeWord("UNAFFABLE"), (std::vector<int>{3, 4, 5}));
  EXPECT_EQ(tok.TokenizeWord("unx"), (std::vector<int>{tok.unk_id()}));
  EXPECT_EQ(tok.TokenizeWord("aff."), (std::vector<int>{6, 7}));
  EXPECT_TRUE(tok.TokenizeWord("").empty());
}

TEST(WordPieceTest, StripsAccentsWhenLowercasing) {
  const WordPieceTokenizer tok({"[UNK]", "[CLS]", "[SEP]", "cafe"}, true);
  EXPECT_EQ(tok.TokenizeWord("Caf\xC3\xA9"), (std::vector<int>{3}));
  const WordPieceTokenizer cased({"[UNK]", "[CLS]", "[SEP]", "cafe"}, false);
  EXPECT_EQ(cased.TokenizeWord("Cafe"), (std::vector<int>{cased.unk_id()}));
}

TEST(WordPieceTest, RequiresSpecialTokens) {
  EXPECT_THROW(WordPieceTokenizer({"a", "b"}, true), ValidationError);
}

TEST(CenteredWindowTest, KeepsHeadCentered) {
  EXPECT_EQ(CenteredWindow(10, 3, 4, 20).begin, 0u);
  EXPECT_EQ(CenteredWindow(10, 3, 4, 20).end, 10u);
  const auto w = CenteredWindow(100, 50, 52, 10);
  EXPECT_EQ(w.end - w.begin, 10u);
  EXPECT_EQ(50 - w.begin, w.end - 52);
  const auto left = CenteredWindow(100, 1, 2, 10);
  EXPECT_EQ(left.begin, 0u);
  EXPECT_EQ(left.end, 10u);
  const auto right = CenteredWindow(100, 98, 99, 10);
  EXPECT_EQ(right.begin, 90u);
  EXPECT_EQ(right.end, 100u);
  EXPECT_THROW(CenteredWindow(100, 10, 30, 10), StageError);
}

TEST(CenteredWindowTest, AlwaysContainsHeadExhaustive) {
  for (size_t total = 1; total <= 14; ++total) {
    for (size_t hb = 0; hb < total; ++hb) {
      for (size_t he = hb + 1; he <= total; ++he) {
        for (size_t budget = he - hb; budget <= 16; ++budget) {
          const auto w = CenteredWindow(total, hb, he, budget);
          ASSERT_LE(w.begin, hb);
          ASSERT_GE(w.end, he);
          ASSERT_LE(w.end, total);
          ASSERT_EQ(w.end - w.begin, std::min(total, budget));
        }
      }
    }
  }
}

TEST(NativeEncoderTest, ShapeFollowsConfig) {
  auto enc = TinyEncoder(5, 3, 16);
  const auto inst = MakeInstance("a", {"John", "ate", "rice", "with", "a", "spoon"}, 3, "with", "4(3)");
  const LayerMatrix m = enc->Encode(inst);
  EXPECT_EQ(m.num_rows(), 3 + 1);
  EXPECT_EQ(m.dim(), 16);
  EXPECT_EQ(m.instance_id, "a");
  EXPECT_EQ(m.encoder_fingerprint, enc->info().fingerprint);
}

TEST(NativeEncoderTest, BaseSizedConfigYields13By768) {
  TransformerConfig config;
  config.vocab_size = 8;
  config.hidden_size = 768;
  config.num_layers = 12;
  config.num_heads = 12;
  config.intermediate_size = 3072;
  config.max_positions = 16;
  config.lowercase = true;
  NativeEncoder enc(config, TransformerWeights::Random(config, 1),
                    WordPieceTokenizer({"[PAD]", "[UNK]", "[CLS]", "[SEP]", "on", "the", "mat", "sat"}, true));
  const LayerMatrix m = enc.Encode(MakeInstance("m", {"sat", "on", "the", "mat"}, 1, "on", "1(1)"));
  EXPECT_EQ(m.num_rows(), config.num_layers + 1);
  EXPECT_EQ(m.dim(), config.hidden_size);
  EXPECT_EQ(m.num_rows(), 13);
  EXPECT_EQ(m.dim(), 768);
}

TEST(NativeEncoderTest, BitDeterministic) {
  auto enc = TinyEncoder();
  const auto inst = MakeInstance("a", {"we", "met", "in", "front", "of", "the", "house"}, 2, "in front of", "1(1)");
  auto phrasal = inst;
  phrasal.head = {2, 4};
  const LayerMatrix a = enc->Encode(phrasal);
  const LayerMatrix b = enc->Encode(phrasal);
  ASSERT_EQ(a.values.size(), b.values.size());
  EXPECT_EQ(std::memcmp(a.values.data(), b.values.data(), sizeof(float) * a.values.size()), 0);
  // A second encoder built from the same seed agrees bit for bit.
  const LayerMatrix c = TinyEncoder()->Encode(phrasal);
  EXPECT_EQ(std::memcmp(a.values.data(), c.values.data(), sizeof(float) * a.values.size()), 0);
}

TEST(NativeEncoderTest, PoolingIsMeanOfHeadPieces) {
  auto enc = TinyEncoder();
  auto inst = MakeInstance("a", {"we", "met", "in", "front", "of", "the", "house"}, 2, "in front of", "1(1)");
  inst.head = {2, 4};
  const auto pieces = enc->EncodePieces(inst);
  ASSERT_EQ(pieces.head_positions, (std::vector<size_t>{3, 4, 5}));
  const LayerMatrix m = enc->Encode(inst);
  for (size_t j = 0; j < pieces.states.size(); ++j) {
    for (int c = 0; c < m.dim(); ++c) {
      double sum = 0;
      for (size_t p : pieces.head_positions) sum += pieces.states[j](static_cast<Eigen::Index>(p), c);
      EXPECT_NEAR(m.values(static_cast<Eigen::Index>(j), c), sum / 3.0, 1e-6);
    }
  }
  // Single-piece head: the pooled row is that piece's state.
  auto single = MakeInstance("b", {"john", "ate", "rice", "with", "a", "spoon"}, 3, "with", "4(3)");
  const auto sp = enc->EncodePieces(single);
  const LayerMatrix sm = enc->Encode(single);
  ASSERT_EQ(sp.head_positions.size(), 1u);
  for (size_t j = 0; j < sp.states.size(); ++j) {
    EXPECT_TRUE(sm.values.row(static_cast<Eigen::Index>(j))
                    .isApprox(sp.states[j].row(static_cast<Eigen::Index>(sp.head_positions[0]))));
  }
}

TEST(NativeEncoderTest, HeadWithinWindowWhenTruncating) {
  auto enc = TinyEncoder(5, 2, 16, 12);  // at most 10 content pieces
  std::vector<std::string> tokens;
  for (int i = 0; i < 30; ++i) tokens.push_back(i % 2 ? "red" : "green");
  tokens[17] = "on";
  const auto inst = MakeInstance("long", tokens, 17, "on", "1(1)");
  const auto pieces = enc->EncodePieces(inst);
  EXPECT_EQ(pieces.ids.size(), 12u);
  ASSERT_EQ(pieces.head_positions.size(), 1u);
  EXPECT_EQ(pieces.ids[pieces.head_positions[0]], 11);  // "on"
  EXPECT_EQ(enc->Encode(inst).num_rows(), 3);
}

TEST(NativeEncoderTest, ZeroPieceHeadIsStageError) {
  auto enc = TinyEncoder();
  auto inst = MakeInstance("z", {"on", "\x07"}, 0, "on", "1(1)");
  inst.tokens = {"john", "\x07", "rice"};
  inst.head = {1, 1};
  inst.preposition = "\x07";
  EXPECT_THROW(enc->Encode(inst), StageError);
}

TEST(NativeEncoderTest, FingerprintStableAndSensitive) {
  auto a = TinyEncoder(5);
  auto b = TinyEncoder(5);
  auto c = TinyEncoder(6);
  EXPECT_EQ(a->info().fingerprint, b->info().fingerprint);
  EXPECT_EQ(a->ComputeFingerprint(), a->info().fingerprint);
  EXPECT_NE(a->info().fingerprint, c->info().fingerprint);
  EXPECT_EQ(a->info().fingerprint.size(), 64u);
}

TEST(NativeEncoderTest, SaveLoadRoundTrip) {
  TempDir dir;
  auto enc = TinyEncoder();
  enc->Save(dir.path());
  auto back = NativeEncoder::Load(dir.path());
  EXPECT_EQ(back->info().fingerprint, enc->info().fingerprint);
  const auto inst = MakeInstance("a", {"john", "ate", "rice", "with", "a", "spoon"}, 3, "with", "4(3)");
  EXPECT_TRUE(back->Encode(inst).values == enc->Encode(inst).values);

  // A single flipped weight changes the fingerprint.
  std::string bytes;
  {
    std::ifstream in(dir / "weights.bin", std::ios::binary);
    bytes.assign(std::istreambuf_iterator<char>(in), {});
  }
  bytes[bytes.size() - 3] ^= 0x10;
  testing::WriteFile(dir / "weights.bin", bytes);
  EXPECT_NE(NativeEncoder::Load(dir.path())->info().fingerprint, enc->info().fingerprint);
}

TEST(OpenEncoderTest, MissingDirectoryIsValidationError) {
  EXPECT_THROW(OpenEncoder("native:/nonexistent/encoder"), ValidationError);
}

TEST(CacheTest, PutGetAndIdempotentEncoding) {
  TempDir dir;
  auto enc = TinyEncoder();
  std::vector<LabeledInstance> xs = {
      MakeInstance("a", {"john", "ate", "rice", "with", "a", "spoon"}, 3, "with", "4(3)"),
      MakeInstance("b", {"john", "ate", "rice", "with", "friends"}, 3, "with", "1(1)"),
      MakeInstance("c/d", {"she", "sat", "on", "the", "table"}, 2, "on", "2(1)", Split::kTest)};
  const Dataset data(xs, InferInventory(xs));
  CacheStore cache(dir / "cache");
  const CacheReport first = EncodeCorpus(*enc, data, cache);
  EXPECT_EQ(first.computed, 3u);
  EXPECT_EQ(first.skipped, 0u);
  EXPECT_TRUE(first.failed.empty());
  const CacheReport second = EncodeCorpus(*enc, data, cache);
  EXPECT_EQ(second.computed, 0u);
  EXPECT_EQ(second.skipped, 3u);

  const auto got = cache.Get("c/d", enc->info().fingerprint);
  ASSERT_TRUE(got.has_value());
  EXPECT_TRUE(got->values == enc->Encode(xs[2]).values);
  EXPECT_FALSE(cache.Contains("c/d", "other"));
  EXPECT_EQ(cache.Fingerprints(), (std::vector<std::string>{enc->info().fingerprint}));
}

TEST(CacheTest, FailuresAreCollected) {
  TempDir dir;
  auto enc = TinyEncoder();
  auto bad = MakeInstance("bad", {"john", "\x07"}, 1, "\x07", "1(1)");
  std::vector<LabeledInstance> xs = {
      MakeInstance("a", {"john", "ate", "rice", "with", "a", "spoon"}, 3, "with", "4(3)"), bad};
  CacheStore cache(dir / "cache");
  const CacheReport r = EncodeCorpus(*enc, Dataset(xs, InferInventory(xs)), cache);
  EXPECT_EQ(r.computed, 1u);
  ASSERT_EQ(r.failed.size(), 1u);
  EXPECT_EQ(r.failed[0].first, "bad");
}

}  // namespace
}  // namespace psd
