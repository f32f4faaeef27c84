// Copyright 2026 The ToonID Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "synthetic_movie.hpp"
#include "test_util.hpp"

using namespace toonid;
using nlohmann::json;
using testutil::TempDir;

namespace {

struct Result {
  int code = -1;
  std::string out, err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string quote(const std::string& s) { return "'" + s + "'"; }

Result cli(const std::string& args, const fs::path& scratch, const std::string& env = "") {
  const fs::path o = scratch / "stdout.txt", e = scratch / "stderr.txt";
  const std::string cmd = env + " " + quote(TOONID_CLI_PATH) + " " + args + " >" + quote(o) + " 2>" + quote(e);
  const int status = std::system(cmd.c_str());
  Result r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(o);
  r.err = slurp(e);
  return r;
}

json last_json_line(const std::string& text) {
  std::istringstream in(text);
  std::string line, last;
  while (std::getline(in, line))
    if (!line.empty() && line.front() == '{') last = line;
  return json::parse(last);
}

json write_config(const fs::path& dir, json cfg) {
  write_text_atomic(dir / "config.json", cfg.dump(2));
  return cfg;
}

const std::vector<std::string> kArtifacts{"bank.jsonl",  "projection.json", "tracks_labeled.jsonl", "segments_labeled.jsonl",
                                          "movie.srt",   "prompts.jsonl",   "report.json"};

}  // namespace

class CliRun : public ::testing::Test {
 protected:
  void SetUp() override { movie_ = synth::write_synthetic_movie(dir_.path()); }
  TempDir dir_{"cli"};
  synth::SyntheticMovie movie_;
};

TEST_F(CliRun, ProducesEveryArtifactWithPerfectScores) {
  auto r = cli("run --config " + quote(movie_.config_path.string()), dir_.path());
  ASSERT_EQ(r.code, 0) << r.err;
  const fs::path out = movie_.config["out-dir"].get<std::string>();
  for (const auto& a : kArtifacts) EXPECT_TRUE(fs::exists(out / a)) << a;
  const json rep = json::parse(slurp(out / "report.json"));
  const auto& res = rep["results"];
  EXPECT_DOUBLE_EQ(res["names"]["aggregate"]["mean_ap"].get<double>(), 1.0);
  EXPECT_GE(res["boxes"]["aggregate"]["mean_ap"].get<double>(), 0.95);
  EXPECT_DOUBLE_EQ(res["speakers"]["aggregate"]["ap"].get<double>(), 1.0);
  EXPECT_DOUBLE_EQ(res["der"]["aggregate"]["with_overlap"]["der"].get<double>(), 0.0);
  EXPECT_EQ(rep["config"]["lambda"], 1.0);
  const std::string srt = slurp(out / "movie.srt");
  EXPECT_EQ(srt.rfind("1\n00:00:00,025 --> 00:00:00,475\n[Atlas] ", 0), 0u);
}

TEST_F(CliRun, RerunsAreByteIdentical) {
  const fs::path out = movie_.config["out-dir"].get<std::string>();
  ASSERT_EQ(cli("run --config " + quote(movie_.config_path.string()), dir_.path()).code, 0);
  std::map<std::string, std::string> first;
  for (const auto& a : kArtifacts) first[a] = slurp(out / a);
  fs::remove_all(out);
  ASSERT_EQ(cli("run --config " + quote(movie_.config_path.string()), dir_.path()).code, 0);
  for (const auto& a : kArtifacts) EXPECT_EQ(slurp(out / a), first[a]) << a;
}

TEST_F(CliRun, MissingSegmentsAbortsAtAudioStage) {
  json cfg = movie_.config;
  const std::string missing = (dir_.path() / "nope" / "segments.jsonl").string();
  cfg["segments"] = missing;
  write_config(dir_.path(), cfg);
  auto r = cli("run --config " + quote((dir_.path() / "config.json").string()), dir_.path());
  EXPECT_EQ(r.code, 1);
  const json err = last_json_line(r.err)["error"];
  EXPECT_EQ(err["stage"], "recognize-audio");
  EXPECT_EQ(err["path"], missing);
  EXPECT_EQ(err["code"], "io_error");
  const fs::path out = cfg["out-dir"].get<std::string>();
  for (const auto& a : kArtifacts) EXPECT_FALSE(fs::exists(out / a)) << a;
}

TEST_F(CliRun, ConfigFromEnvironmentAndOverrides) {
  const fs::path out2 = dir_.path() / "out2";
  auto r = cli("run --out-dir " + quote(out2.string()) + " --vm-retention 1.0 --frames 4", dir_.path(),
               "TOONID_CONFIG=" + quote(movie_.config_path.string()));
  ASSERT_EQ(r.code, 0) << r.err;
  const auto prompts = read_manifest(out2 / "prompts.jsonl");
  ASSERT_EQ(prompts.records.size(), 2u);
  for (const auto& p : prompts.records) {
    EXPECT_TRUE(p["colour_legend"].empty());
    EXPECT_EQ(p["frame_refs"].size(), 4u);
  }
  const json rep = json::parse(slurp(out2 / "report.json"));
  EXPECT_EQ(rep["config"]["out-dir"], out2.string());
}

TEST_F(CliRun, InvalidConfigValueIsReported) {
  auto r = cli("run --config " + quote(movie_.config_path.string()) + " --lambda -2", dir_.path());
  EXPECT_EQ(r.code, 1);
  EXPECT_TRUE(last_json_line(r.err).contains("error"));
  auto nothing = cli("run", dir_.path(), "env -u TOONID_CONFIG");
  EXPECT_EQ(nothing.code, 1);
}

TEST_F(CliRun, StagesChainToTheSameResult) {
  const fs::path d = dir_.path(), w = d / "chain";
  fs::create_directories(w);
  auto in = [&](const char* key) { return quote(movie_.config[key].get<std::string>()); };
  auto at = [&](const char* name) { return quote((w / name).string()); };
  auto ok = [&](const std::string& args) {
    auto r = cli(args, d);
    EXPECT_EQ(r.code, 0) << args << "\n" << r.err;
    return r;
  };
  ok("build-bank --candidates " + in("candidates") + " --interviews " + in("interviews") + " --out " + at("bank0.jsonl"));
  EXPECT_EQ(cli("validate --kind bank --file " + at("bank0.jsonl"), d).code, 0);
  ok("adapt --bank " + at("bank0.jsonl") + " --seed 7 --out " + at("projection.json"));
  ok("recognize-visual --tracks " + in("tracks") + " --bank " + at("bank0.jsonl") + " --projection " +
     at("projection.json") + " --out " + at("tracks_labeled.jsonl"));
  ok("build-bank --candidates " + in("candidates") + " --interviews " + in("interviews") + " --tracks " +
     at("tracks_labeled.jsonl") + " --segments " + in("segments") + " --sync " + in("sync") + " --out " + at("bank.jsonl"));
  ok("recognize-audio --segments " + in("segments") + " --bank " + at("bank.jsonl") + " --tracks " +
     at("tracks_labeled.jsonl") + " --sync " + in("sync") + " --out " + at("segments_labeled.jsonl"));
  ok("fuse --segments " + in("segments") + " --bank " + at("bank.jsonl") + " --tracks " + at("tracks_labeled.jsonl") +
     " --sync " + in("sync") + " --out " + at("segments_fused.jsonl"));
  ok("subtitles --segments " + at("segments_labeled.jsonl") + " --out " + at("movie.srt"));
  ok("ad-prompts --tracks " + at("tracks_labeled.jsonl") + " --intervals " + in("intervals") + " --out " +
     at("prompts.jsonl") + " --responses " + at("responses.jsonl") + " --mock-client");

  ASSERT_EQ(cli("run --config " + quote(movie_.config_path.string()), d).code, 0);
  const fs::path out = movie_.config["out-dir"].get<std::string>();
  for (const char* a : {"bank.jsonl", "projection.json", "tracks_labeled.jsonl", "segments_labeled.jsonl", "movie.srt",
                        "prompts.jsonl"})
    EXPECT_EQ(slurp(w / a), slurp(out / a)) << a;
  EXPECT_EQ(slurp(w / "segments_fused.jsonl"), slurp(w / "segments_labeled.jsonl"));

  const auto responses = read_manifest(w / "responses.jsonl");
  ASSERT_EQ(responses.records.size(), 2u);
  EXPECT_EQ(responses.records[0]["request_id"], "ad0");
  EXPECT_NE(responses.records[0]["text"].get<std::string>().find("Mock description"), std::string::npos);

  struct Task {
    const char* task;
    const char* pred;
    const char* gt;
  };
  for (const Task& t : {Task{"names", "tracks_labeled.jsonl", "gt-names"}, Task{"boxes", "tracks_labeled.jsonl", "gt-boxes"},
                        Task{"speakers", "segments_labeled.jsonl", "gt-speakers"},
                        Task{"der", "segments_labeled.jsonl", "gt-turns"}}) {
    ok(std::string("evaluate --task ") + t.task + " --pred " + at(t.pred) + " --gt " + in(t.gt) + " --bank " +
       at("bank.jsonl") + " --report " + at("report.json"));
    const json rep = json::parse(slurp(w / "report.json"));
    EXPECT_EQ(rep["task"], t.task);
    EXPECT_EQ(rep["config"]["task"], t.task);
  }
}

TEST_F(CliRun, AudioOnlyFlagSkipsFusion) {
  const fs::path d = dir_.path();
  ASSERT_EQ(cli("run --config " + quote(movie_.config_path.string()), d).code, 0);
  const fs::path out = movie_.config["out-dir"].get<std::string>();
  auto r = cli("recognize-audio --no-fusion --segments " + quote(movie_.config["segments"].get<std::string>()) +
                   " --bank " + quote((out / "bank.jsonl").string()) + " --out " + quote((d / "audio.jsonl").string()),
               d);
  ASSERT_EQ(r.code, 0) << r.err;
  for (const auto& s : read_manifest(d / "audio.jsonl").records) EXPECT_EQ(s["label_source"], "audio");
}

TEST(Cli, ValidateReportsIssuesWithExitTwo) {
  TempDir dir("validate");
  const fs::path bad = dir.path() / "tracks.jsonl";
  write_text_atomic(bad,
                    "{\"record\":\"header\",\"kind\":\"tracks\",\"fps\":24,\"visual_dim\":2}\n"
                    "{\"record\":\"track\",\"track_id\":\"t\",\"shot_id\":0,\"seed_index\":0,"
                    "\"boxes\":[{\"x1\":5,\"y1\":0,\"x2\":1,\"y2\":1,\"frame_index\":0}],\"sampled_features\":[]}\n");
  auto r = cli("validate --kind tracks --file " + quote(bad.string()), dir.path());
  EXPECT_EQ(r.code, 2);
  const json rep = last_json_line(r.out);
  EXPECT_FALSE(rep["valid"].get<bool>());
  EXPECT_FALSE(rep["issues"].empty());
  auto missing = cli("validate --kind bank --file " + quote((dir.path() / "none.jsonl").string()), dir.path());
  EXPECT_EQ(missing.code, 1);
  EXPECT_EQ(last_json_line(missing.err)["error"]["stage"], "validate");
}

TEST(Cli, UsageErrors) {
  TempDir dir("usage");
  EXPECT_NE(cli("", dir.path()).code, 0);
  EXPECT_NE(cli("evaluate --task bogus --pred a --gt b --report c", dir.path()).code, 0);
  EXPECT_NE(cli("build-bank --out x", dir.path()).code, 0);
}
