#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>

#include "json.hpp"
#include "psd/errors.h"
#include "psd/pipeline.h"
#include "test_util.h"

namespace psd {
namespace {

namespace fs = std::filesystem;
using testing::TempDir;
using testing::TinyEncoder;
using testing::WriteFile;

// Two prepositions, each with two senses cued by the neighbouring word.
std::string FixtureCorpus() {
  std::string out;
  int n = 0;
  auto add = [&](const std::vector<std::string>& tokens, int head, const std::string& prep,
                 const std::string& sense, const std::string& split) {
    nlohmann::json j = {{"id", "i" + std::to_string(n++)}, {"tokens", tokens}, {"head", {head, head}},
                        {"prep", prep}, {"sense", sense}, {"split", split}};
    out += j.dump() + "\n";
  };
  for (int i = 0; i < 12; ++i) {
    const std::string split = i < 9 ? "train" : "test";
    add({"john", "ate", "rice", "with", "a", "spoon"}, 3, "with", "4(3)", split);
    add({"john", "ate", "rice", "with", "friends"}, 3, "with", "1(1)", split);
    add({"the", "book", "on", "the", "table"}, 2, "on", "1(1)", split);
    add({"he", "walked", "on", "red", "and", "green"}, 2, "on", "2(1)", split);
  }
  return out;
}

PipelineConfig FixtureConfig(const TempDir& dir) {
  WriteFile(dir / "corpus.jsonl", FixtureCorpus());
  TinyEncoder()->Save(dir / "encoder");
  PipelineConfig c;
  c.source = dir / "corpus.jsonl";
  c.encoder = "native:" + (dir / "encoder").string();
  c.work_dir = dir / "work";
  c.train.hidden_size = 8;
  c.train.max_epochs = 10;
  c.train.learning_rate = 1e-2;
  return c;
}

std::vector<std::string> Executed(const std::vector<StageOutcome>& outcomes) {
  std::vector<std::string> out;
  for (const auto& o : outcomes) {
    if (o.executed) out.push_back(o.stage);
  }
  return out;
}

TEST(ConfigTest, KeyValueFile) {
  TempDir dir;
  WriteFile(dir / "run.cfg",
            "# comment\nsource = data/corpus\nformat = semeval\nencoder = native:enc\n"
            "seed = 21\nhidden_size = 64\ndev_ratio = 0.25\nretrain_on_dev = false\n");
  PipelineConfig c = PipelineConfig::FromFile(dir / "run.cfg");
  EXPECT_EQ(c.source, "data/corpus");
  EXPECT_EQ(c.format, SourceFormat::kSemevalXml);
  EXPECT_EQ(c.train.seed, 21u);
  EXPECT_EQ(c.train.hidden_size, 64);
  EXPECT_DOUBLE_EQ(c.dev_ratio, 0.25);
  EXPECT_FALSE(c.retrain_on_dev);
  c.ResolvePaths();
  EXPECT_EQ(c.cache, fs::path("psd-work") / "cache");

  WriteFile(dir / "bad.cfg", "sauce = 1\n");
  EXPECT_THROW(PipelineConfig::FromFile(dir / "bad.cfg"), ValidationError);
  WriteFile(dir / "bad2.cfg", "seed = many\n");
  EXPECT_THROW(PipelineConfig::FromFile(dir / "bad2.cfg"), ValidationError);
}

TEST(RunAllTest, FreshRunThenIdempotentThenCacheRebuild) {
  TempDir dir;
  const PipelineConfig config = FixtureConfig(dir);
  const std::vector<std::string> all = {"ingest", "embed", "select-layers", "train", "evaluate", "report"};

  EXPECT_EQ(Executed(RunAll(config)), all);
  const fs::path work = dir / "work";
  for (const char* f : {"dataset.jsonl", "cache", "choices.jsonl", "models", "report.json", "plots", "manifest.json"}) {
    EXPECT_TRUE(fs::exists(work / f)) << f;
  }
  std::ifstream in(work / "manifest.json");
  const auto manifest = nlohmann::json::parse(in);
  EXPECT_EQ(manifest["stages"].size(), 6u);
  EXPECT_EQ(manifest["encoder"]["fingerprint"], TinyEncoder()->info().fingerprint);
  EXPECT_EQ(manifest["config"]["train"]["seed"], 13);
  EXPECT_TRUE(manifest.contains("completed"));

  EXPECT_TRUE(Executed(RunAll(config)).empty());

  fs::remove_all(work / "cache");
  EXPECT_EQ(Executed(RunAll(config)),
            (std::vector<std::string>{"embed", "select-layers", "train", "evaluate", "report"}));

  std::ifstream rin(work / "report.json");
  const auto report = nlohmann::json::parse(rin);
  EXPECT_TRUE(report.contains("baseline"));
  EXPECT_EQ(report["prepositions"].size(), 2u);
}

TEST(RunAllTest, ChangedTrainingConfigRerunsFromSelection) {
  TempDir dir;
  PipelineConfig config = FixtureConfig(dir);
  RunAll(config);
  config.train.seed = 99;
  EXPECT_EQ(Executed(RunAll(config)),
            (std::vector<std::string>{"select-layers", "train", "evaluate", "report"}));
}

TEST(RunAllTest, FailureNamesTheStage) {
  TempDir dir;
  PipelineConfig config = FixtureConfig(dir);
  config.encoder = "native:" + (dir / "no-such-encoder").string();
  try {
    RunAll(config);
    FAIL() << "expected failure";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("stage embed"), std::string::npos) << e.what();
  }
  EXPECT_TRUE(fs::exists(dir / "work" / "dataset.jsonl"));
}

TEST(RunAllTest, FingerprintStableAcrossTraining) {
  TempDir dir;
  const PipelineConfig config = FixtureConfig(dir);
  auto enc = OpenEncoder(config.encoder);
  const std::string before = enc->ComputeFingerprint();
  RunAll(config);
  EXPECT_EQ(enc->ComputeFingerprint(), before);
  EXPECT_EQ(OpenEncoder(config.encoder)->info().fingerprint, before);
}

// ---- CLI contract ----

int RunCli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(PSD_CLI_PATH) + " " + args + " >" + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST(CliTest, ExitCodes) {
  TempDir dir;
  const PipelineConfig config = FixtureConfig(dir);
  const auto log = dir / "log.txt";
  const std::string work = (dir / "cli").string();

  EXPECT_EQ(RunCli("", log), 2);
  EXPECT_EQ(RunCli("--help", log), 0);
  EXPECT_EQ(RunCli("ingest --in " + (dir / "missing").string() + " --out " + work + "/d.jsonl", log), 2);

  WriteFile(dir / "bad.jsonl", R"j({"id": "x", "tokens": ["on"], "head": [0, 0], "prep": "on", "sense": "(3)", "split": "train"})j"
                               "\n");
  EXPECT_EQ(RunCli("ingest --in " + (dir / "bad.jsonl").string() + " --out " + work + "/d.jsonl", log), 2);

  WriteFile(dir / "bad.cfg", "colour = blue\n");
  EXPECT_EQ(RunCli("--config " + (dir / "bad.cfg").string() + " ingest", log), 2);

  ASSERT_EQ(RunCli("ingest --in " + config.source.string() + " --out " + work + "/d.jsonl", log), 0);
  // Selecting layers before anything was embedded: the cache is empty.
  EXPECT_EQ(RunCli("select-layers --dataset " + work + "/d.jsonl --cache " + work + "/cache --fingerprint abc --out " + work + "/c.jsonl", log), 3);
}

TEST(CliTest, StagesByHand) {
  TempDir dir;
  const PipelineConfig config = FixtureConfig(dir);
  const auto log = dir / "log.txt";
  const std::string w = (dir / "cli").string();
  const std::string common = " --dataset " + w + "/d.jsonl --cache " + w + "/cache";
  ASSERT_EQ(RunCli("ingest --in " + config.source.string() + " --out " + w + "/d.jsonl", log), 0);
  ASSERT_EQ(RunCli("embed --model " + config.encoder + common, log), 0);
  ASSERT_EQ(RunCli("select-layers --hidden 8 --epochs 10 --out " + w + "/c.jsonl" + common, log), 0);
  ASSERT_EQ(RunCli("--seed 13 train --hidden 8 --epochs 10 --choices " + w + "/c.jsonl --out " + w + "/m" + common, log), 0);
  ASSERT_EQ(RunCli("evaluate --models " + w + "/m --out " + w + "/r.json" + common, log), 0);
  ASSERT_EQ(RunCli("report --in " + w + "/r.json --plots " + w + "/plots", log), 0);
  EXPECT_TRUE(fs::exists(fs::path(w) / "plots" / "macro.svg"));
  ASSERT_EQ(RunCli("tag --json --models " + w + "/m --model " + config.encoder + " --dataset " + w +
                       "/d.jsonl \"John ate rice with a spoon on the table\"",
                   log),
            0);
  std::ifstream in(log);
  const auto tagged = nlohmann::json::parse(in);
  ASSERT_EQ(tagged["annotations"].size(), 2u);
  EXPECT_EQ(tagged["annotations"][0]["prep"], "with");
  // Same tag against a model from another encoder is refused.
  TinyEncoder(77)->Save(dir / "other");
  EXPECT_EQ(RunCli("tag --models " + w + "/m --model native:" + (dir / "other").string() + " --dataset " + w +
                       "/d.jsonl \"rice with a spoon\"",
                   log),
            2);
}

}  // namespace
}  // namespace psd
