#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "support.hpp"

using namespace ctxsched;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream out, err;
  int code = cli::run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

Json read_json(const fs::path& p) { return load_json_file(p.string()); }

void write(const fs::path& p, const std::string& text) {
  std::ofstream f(p);
  f << text;
}

}  // namespace

TEST(Cli, GenStreamDeterministic) {
  auto dir = testsupport::scratch_dir("gen");
  auto a = (dir / "a.jsonl").string(), b = (dir / "b.jsonl").string();
  auto r1 = run({"--seed", "1", "gen-stream", "--K", "20", "--T", "500", "--clusters", "4x5", "--out", a});
  auto r2 = run({"--seed", "1", "gen-stream", "--K", "20", "--T", "500", "--clusters", "4x5", "--out", b});
  ASSERT_EQ(r1.code, 0) << r1.err;
  ASSERT_EQ(r2.code, 0) << r2.err;
  EXPECT_EQ(file_digest(a), file_digest(b));
  auto rep = read_json(a + ".report.json");
  EXPECT_EQ(rep["stream_digest"], file_digest(a));
  EXPECT_EQ(rep["provenance"]["version"], kVersion);
  EXPECT_EQ(rep["provenance"]["seed"], 1);
  EXPECT_NE(r1.out.find("gen-stream:"), std::string::npos);
}

TEST(Cli, GenStreamEdgeCases) {
  auto dir = testsupport::scratch_dir("gen_edge");
  auto empty = (dir / "e.jsonl").string();
  auto r = run({"gen-stream", "--K", "5", "--T", "0", "--out", empty});
  EXPECT_EQ(r.code, 0);
  EXPECT_TRUE(load_stream(empty, StreamFormat::jsonl).empty());

  auto bad = run({"gen-stream", "--K", "20", "--T", "10", "--mean-active", "50", "--out", (dir / "x").string()});
  EXPECT_NE(bad.code, 0);
  EXPECT_NE(bad.err.find("mean_active_labels exceeds K"), std::string::npos);
}

TEST(Cli, BuildContexts) {
  auto dir = testsupport::scratch_dir("build");
  auto s = (dir / "s.jsonl").string();
  ASSERT_EQ(run({"--seed", "2", "gen-stream", "--K", "10", "--T", "400", "--clusters", "2x5", "--exclusive",
                 "--mean-active", "2", "--out", s})
                .code,
            0);
  auto c = (dir / "c.json").string();
  auto r = run({"build-contexts", "--stream", s, "--B", "5", "--Mmax", "11", "--algo", "greedy", "--out", c});
  ASSERT_EQ(r.code, 0) << r.err;
  auto cat = catalog_from_json(read_json(c));
  auto m = build_cooccurrence(load_stream(s, StreamFormat::jsonl));
  EXPECT_TRUE(validate_catalog(cat, valid_labels(m)).ok());
  EXPECT_EQ(read_json(c)["provenance"]["inputs"]["stream"]["digest"], file_digest(s));

  auto b1 = (dir / "b1.json").string(), b2 = (dir / "b2.json").string();
  ASSERT_EQ(run({"--seed", "3", "build-contexts", "--stream", s, "--B", "3", "--Mmax", "4", "--algo", "basic",
                 "--out", b1})
                .code,
            0);
  ASSERT_EQ(run({"--seed", "3", "build-contexts", "--stream", s, "--B", "3", "--Mmax", "4", "--algo", "basic",
                 "--out", b2})
                .code,
            0);
  EXPECT_EQ(read_file(b1), read_file(b2));

  auto inf = run({"build-contexts", "--stream", s, "--B", "1", "--Mmax", "3", "--out", (dir / "i.json").string()});
  EXPECT_EQ(inf.code, cli::kInfeasible);
  EXPECT_NE(inf.err.find("uncovered labels"), std::string::npos);
}

TEST(Cli, AnalyzeArch) {
  auto dir = testsupport::scratch_dir("arch");
  auto out = (dir / "a.json").string();
  auto r = run({"analyze-arch", "--preset", "deit-tiny", "--contexts", "11", "--out", out});
  ASSERT_EQ(r.code, 0) << r.err;
  auto j = read_json(out);
  EXPECT_NEAR(j["report"]["rows"][1]["params"].get<double>() / 1e6, 5.82, 0.005);
  EXPECT_NEAR(j["report"]["mac_overhead_per_adapter"].get<double>() / 1e6, 4.84, 0.005);
  EXPECT_FALSE(j["report"]["calibration_source"].get<std::string>().empty());
  EXPECT_NE(r.out.find("5.82 M"), std::string::npos);
}

TEST(Cli, SimulateMetricsConstantStream) {
  auto dir = testsupport::scratch_dir("sim");
  auto s = (dir / "s.jsonl").string();
  save_stream(s, LabelStream::from_sets(3, std::vector<LabelSet>(8, LabelSet{1, 2})), StreamFormat::jsonl);
  auto c = (dir / "c.json").string();
  ASSERT_EQ(run({"build-contexts", "--stream", s, "--B", "2", "--Mmax", "2", "--out", c}).code, 0);
  auto tr = (dir / "t.json").string();
  ASSERT_EQ(run({"simulate", "--stream", s, "--catalog", c, "--out", tr}).code, 0);
  auto m = (dir / "m.json").string();
  auto r = run({"metrics", "--stream", s, "--catalog", c, "--trace", tr, "--out", m});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(read_json(m)["metrics"]["switch_penalty"], 0);
  EXPECT_EQ(read_json(m)["metrics"]["coverage_weighted_score_is_proxy"], true);
}

TEST(Cli, OracleBeatsGreedyOnHandInstance) {
  auto dir = testsupport::scratch_dir("oracle");
  auto s = (dir / "s.jsonl").string();
  save_stream(s, LabelStream::from_sets(3, std::vector<LabelSet>(4, LabelSet{1, 2})), StreamFormat::jsonl);
  auto c = (dir / "c.json").string();
  write(c, R"({"B":2,"M_max":3,"variant":"greedy_overlap",
               "contexts":[{"id":1,"labels":[1,2]},{"id":2,"labels":[1]},{"id":3,"labels":[2]}]})");
  auto a = (dir / "acc.json").string();
  write(a, R"({"entries":[{"context":1,"label":1,"accuracy":0.9},{"context":1,"label":2,"accuracy":0.9},
                          {"context":2,"label":1,"accuracy":0.9},{"context":3,"label":2,"accuracy":0.9}]})");
  auto ot = (dir / "o.json").string(), gt = (dir / "g.json").string();
  ASSERT_EQ(run({"oracle", "--stream", s, "--catalog", c, "--accuracy", a, "--tau", "0.8", "--mode", "per-frame",
                 "--out", ot})
                .code,
            0);
  ASSERT_EQ(run({"simulate", "--stream", s, "--catalog", c, "--accuracy", a, "--tau", "0.8", "--out", gt}).code, 0);
  EXPECT_DOUBLE_EQ(avg_coverage(trace_from_json(read_json(ot))), 1.0);
  EXPECT_DOUBLE_EQ(avg_coverage(trace_from_json(read_json(gt))), 2.0);

  auto seq = (dir / "q.json").string();
  ASSERT_EQ(run({"oracle", "--stream", s, "--catalog", c, "--accuracy", a, "--tau", "0.8", "--out", seq}).code, 0);
  EXPECT_EQ(read_json(seq)["header"]["oracle"]["objective"], 5.0);
}

TEST(Cli, CostComparesProfiles) {
  auto dir = testsupport::scratch_dir("cost");
  auto s = (dir / "s.jsonl").string();
  save_stream(s, LabelStream::from_sets(3, std::vector<LabelSet>(5, LabelSet{1})), StreamFormat::jsonl);
  auto c = (dir / "c.json").string();
  ASSERT_EQ(run({"build-contexts", "--stream", s, "--B", "1", "--Mmax", "1", "--out", c}).code, 0);
  auto tr = (dir / "t.json").string();
  ASSERT_EQ(run({"simulate", "--stream", s, "--catalog", c, "--out", tr}).code, 0);
  auto out = (dir / "cost.json").string();
  auto r = run({"cost", "--trace", tr, "--compare", "larger,big_little", "--out", out});
  ASSERT_EQ(r.code, 0) << r.err;
  auto j = read_json(out);
  EXPECT_EQ(j["comparisons"].size(), 2u);
  EXPECT_LT(j["comparisons"][0]["power_ratio"].get<double>(), 0.6);
  EXPECT_EQ(j["series"].size(), 5u);
}

TEST(Cli, ComposeCheck) {
  auto dir = testsupport::scratch_dir("compose");
  auto out = (dir / "c.json").string();
  auto r = run({"compose-check", "--instances", "50", "--out", out});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_LE(read_json(out)["max_relative_error_merged_vs_unmerged"].get<double>(), 1e-6);
}

TEST(Cli, SweepRowsAndErrors) {
  auto dir = testsupport::scratch_dir("sweep");
  auto s = (dir / "s.jsonl").string();
  save_stream(s, generate_synthetic_stream(testsupport::planted_config(1)), StreamFormat::jsonl);
  auto out = (dir / "sweep.csv").string();
  auto r = run({"sweep", "--stream", s, "--B", "2,5,15", "--variants", "basic,nonoverlap,overlap", "--tau", "0",
                "--policies", "greedy", "--out", out});
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream csv(read_file(out));
  std::size_t clustering = 0, policy = 0;
  for (std::string line; std::getline(csv, line);) {
    clustering += line.rfind("clustering,", 0) == 0;
    policy += line.rfind("policy,", 0) == 0;
  }
  EXPECT_EQ(clustering, 9u);
  EXPECT_EQ(policy, 9u);
  EXPECT_NE(read_file(out).find("# stream_digest=" + file_digest(s)), std::string::npos);

  auto empty = run({"sweep", "--stream", s, "--B", "2", "--out", out});
  EXPECT_EQ(empty.code, cli::kUsage);
}

TEST(Cli, ExitCodes) {
  auto dir = testsupport::scratch_dir("codes");
  EXPECT_EQ(run({}).code, cli::kUsage);
  EXPECT_EQ(run({"bogus"}).code, cli::kUsage);
  EXPECT_EQ(run({"gen-stream", "--K", "x", "--T", "1"}).code, cli::kUsage);
  EXPECT_EQ(run({"build-contexts", "--stream", (dir / "missing.jsonl").string(), "--B", "2", "--Mmax", "2"}).code,
            cli::kIo);
  auto bad = (dir / "bad.jsonl").string();
  write(bad, "{\"t\":0,\"labels\":[1]}\nnot json\n");
  auto r = run({"build-contexts", "--stream", bad, "--B", "2", "--Mmax", "2", "--out", (dir / "c.json").string()});
  EXPECT_EQ(r.code, cli::kSchema);
  EXPECT_NE(r.err.find("line 2"), std::string::npos);
  auto badcat = (dir / "cat.json").string();
  write(badcat, "{\"B\":1}");
  auto s = (dir / "s.jsonl").string();
  save_stream(s, LabelStream::from_sets(2, {{0}}), StreamFormat::jsonl);
  EXPECT_EQ(run({"simulate", "--stream", s, "--catalog", badcat, "--out", (dir / "t.json").string()}).code,
            cli::kSchema);
  auto cat = (dir / "ok.json").string();
  write(cat, R"({"B":1,"M_max":1,"variant":"basic","contexts":[{"id":0,"labels":[0]}]})");
  save_stream(s, LabelStream::from_sets(2, {{0}, {1}}), StreamFormat::jsonl);
  EXPECT_EQ(run({"simulate", "--stream", s, "--catalog", cat, "--uncoverable", "error", "--out",
                 (dir / "t.json").string()})
                .code,
            cli::kInfeasible);
}

TEST(Cli, HelpExitsCleanly) { EXPECT_EQ(run({"--help"}).code, 0); }
