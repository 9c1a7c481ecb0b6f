#include <gtest/gtest.h>

#include <set>

#include "psd/augment.h"
#include "psd/errors.h"
#include "test_util.h"

namespace psd {
namespace {

using testing::MakeInstance;
using testing::TempDir;
using testing::WriteFile;

LabeledInstance Capital() {
  return MakeInstance("cap", {"Mumbai", "is", "the", "capital", "of", "India"}, 4, "of", "6(3)");
}

std::string Joined(const LabeledInstance& inst) {
  std::string out;
  for (const auto& t : inst.tokens) out += (out.empty() ? "" : " ") + t;
  return out;
}

TEST(SubstituteTest, CapitalExamplePreservesSense) {
  const auto variants = Substitute(Capital(), {{0, {"Chicago"}, "LOCATION"}});
  ASSERT_EQ(variants.size(), 1u);
  EXPECT_EQ(Joined(variants[0]), "Chicago is the capital of India");
  EXPECT_EQ(variants[0].sense->raw(), "6(3)");
  EXPECT_EQ(variants[0].head, Capital().head);
  EXPECT_EQ(variants[0].preposition, "of");
  EXPECT_EQ(variants[0].split, Split::kTrain);
  EXPECT_EQ(variants[0].id, "cap#aug1");
  EXPECT_NO_THROW(variants[0].Validate());
}

TEST(SubstituteTest, EmptyRulesGiveNothing) {
  EXPECT_TRUE(Substitute(Capital(), {}).empty());
}

// Brute force: every assignment of {keep, r_1..r_k} to each rule, minus the
// all-keep assignment.
std::set<std::string> BruteForce(const LabeledInstance& inst,
                                 const std::vector<SubstitutionRule>& rules) {
  std::set<std::string> out;
  std::vector<size_t> choice(rules.size(), 0);
  while (true) {
    bool any = false;
    LabeledInstance v = inst;
    for (size_t r = 0; r < rules.size(); ++r) {
      if (choice[r] > 0) {
        any = true;
        v.tokens[rules[r].target_token_index] = rules[r].replacements[choice[r] - 1];
      }
    }
    if (any) out.insert(Joined(v));
    size_t r = 0;
    while (r < rules.size() && ++choice[r] > rules[r].replacements.size()) choice[r++] = 0;
    if (r == rules.size()) break;
  }
  return out;
}

TEST(SubstituteTest, CombinatorialCountMatchesBruteForce) {
  const std::vector<SubstitutionRule> rules = {
      {0, {"Chicago", "Paris"}, "LOCATION"},
      {5, {"France", "Japan", "Peru"}, "LOCATION"}};
  const auto expected = BruteForce(Capital(), rules);
  EXPECT_EQ(expected.size(), 11u);
  EXPECT_EQ(VariantCount(rules), expected.size());
  const auto variants = Substitute(Capital(), rules, 0);
  ASSERT_EQ(variants.size(), expected.size());
  std::set<std::string> got;
  std::set<std::string> ids;
  for (const auto& v : variants) {
    got.insert(Joined(v));
    ids.insert(v.id);
    EXPECT_EQ(v.sense->raw(), "6(3)");
  }
  EXPECT_EQ(got, expected);
  EXPECT_EQ(ids.size(), variants.size());
  // Single-rule variants come first.
  EXPECT_EQ(Joined(variants[0]), "Chicago is the capital of India");
  EXPECT_EQ(Joined(variants[5]), "Chicago is the capital of France");
}

TEST(SubstituteTest, ManyRulesMatchBruteForce) {
  const auto inst = MakeInstance("x", {"a", "b", "c", "on", "d", "e"}, 3, "on", "1(1)");
  const std::vector<SubstitutionRule> rules = {
      {0, {"a1"}, "K"}, {1, {"b1", "b2"}, "K"}, {4, {"d1", "d2", "d3"}, "K"}, {5, {"e1"}, "K"}};
  const auto expected = BruteForce(inst, rules);
  EXPECT_EQ(VariantCount(rules), expected.size());
  EXPECT_EQ(expected.size(), 2u * 3u * 4u * 2u - 1u);
  EXPECT_EQ(Substitute(inst, rules, 0).size(), expected.size());
}

TEST(SubstituteTest, CapLimitsOutput) {
  const std::vector<SubstitutionRule> rules = {
      {0, {"Chicago", "Paris"}, "LOCATION"},
      {5, {"France", "Japan", "Peru"}, "LOCATION"}};
  EXPECT_EQ(Substitute(Capital(), rules, 4).size(), 4u);
  EXPECT_EQ(Substitute(Capital(), rules).size(), 11u);  // below the default cap
}

TEST(SubstituteTest, RejectsBadRules) {
  EXPECT_THROW(Substitute(Capital(), {{4, {"in"}, "X"}}), ValidationError);
  EXPECT_THROW(Substitute(Capital(), {{9, {"x"}, "X"}}), ValidationError);
  EXPECT_THROW(Substitute(Capital(), {{0, {"a"}, "X"}, {0, {"b"}, "X"}}), ValidationError);
  EXPECT_THROW(Substitute(Capital(), {{0, {}, "X"}}), ValidationError);
}

TEST(AugmentTest, LexiconAndBindingsFromFiles) {
  TempDir dir;
  std::vector<LabeledInstance> xs = {Capital(),
                                     MakeInstance("t", {"capital", "of", "Peru"}, 1, "of", "6(3)", Split::kTest)};
  const Dataset data(xs, InferInventory(xs));
  WriteFile(dir / "lex.jsonl", R"j({"class": "CITY", "words": ["Mumbai", "Chicago", "Paris"]})j"
                               "\n");
  WriteFile(dir / "rules.jsonl", R"j({"id": "cap", "index": 0, "class": "CITY"})j"
                                 "\n");
  const Dataset out = Augment(data, LoadRuleBindings(dir / "rules.jsonl"),
                              LoadLexicon(dir / "lex.jsonl"));
  ASSERT_EQ(out.size(), 4u);
  EXPECT_EQ(out.instances()[0].id, "cap");
  EXPECT_EQ(out.instances()[1].id, "t");
  EXPECT_EQ(Joined(out.instances()[2]), "Chicago is the capital of India");
  EXPECT_EQ(Joined(out.instances()[3]), "Paris is the capital of India");

  WriteFile(dir / "bad.jsonl", R"j({"id": "cap", "index": 0, "class": "PLANET"})j"
                               "\n");
  EXPECT_THROW(Augment(data, LoadRuleBindings(dir / "bad.jsonl"), LoadLexicon(dir / "lex.jsonl")),
               ValidationError);
}

}  // namespace
}  // namespace psd
