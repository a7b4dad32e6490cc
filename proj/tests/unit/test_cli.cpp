#include <sys/wait.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>

#include <gtest/gtest.h>

#include "tmpnn/analysis.hpp"
#include "tmpnn/correction.hpp"

using namespace tmpnn;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string output;
};

Run run(const std::string& args) {
  Run r;
  const std::string cmd = std::string(TMPNN_CLI_PATH) + " " + args + " 2>&1";
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return r;
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, p)) > 0) r.output.append(buf, n);
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("tmpnn_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }
  static std::string sample(const std::string& name) { return std::string(TMPNN_SAMPLES_DIR) + "/" + name; }

  fs::path dir_;
};

double valid_rms(const TrackRecord& r) { return detail::masked_rms(r, 4); }

}  // namespace

TEST_F(Cli, BuildFodo) {
  const auto r = run("build " + sample("fodo.lat") + " --order 3 -o " + path("m.json"));
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_NE(r.output.find("layers: 12"), std::string::npos);
  EXPECT_NE(r.output.find("total length: 5.6 m"), std::string::npos);
  const auto net = load_model(read_file(path("m.json")));
  EXPECT_EQ(net.size(), 12u);
  EXPECT_EQ(net.order(), 3);
  EXPECT_EQ(run("build " + sample("fodo.lat") + " --merge minimal -o " + path("min.json")).code, 0);
  EXPECT_LT(load_model(read_file(path("min.json"))).size(), 12u);
}

TEST_F(Cli, BuildErrors) {
  write_file(path("bad.lat"), "q: quadrupole, l=1, k1=0.5;\nd: drift l=2;\n");
  auto r = run("build " + path("bad.lat"));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.output.find("line 2"), std::string::npos) << r.output;

  write_file(path("neg.lat"), "d: drift, l=-1;\ns: sequence = (d);\n");
  EXPECT_EQ(run("build " + path("neg.lat")).code, 2);
  write_file(path("bend.lat"), "b: sbend, l=0, angle=0.1;\ns: sequence = (b);\n");
  r = run("build " + path("bend.lat"));
  EXPECT_EQ(r.code, 3) << r.output;

  EXPECT_EQ(run("build " + path("missing.lat")).code, 2);
  EXPECT_EQ(run("build " + sample("fodo.lat") + " --order 9").code, 2);
  EXPECT_EQ(run("build " + sample("fodo.lat") + " --merge sideways").code, 2);
  EXPECT_EQ(run("frobnicate").code, 2);
  EXPECT_EQ(run("").code, 2);
}

TEST_F(Cli, LinearBlocksDoNotDependOnOrder) {
  write_file(path("lin.lat"), "q: quadrupole, l=0.4, k1=1.2;\nd: drift, l=1.5;\nm: monitor;\ns: sequence = (q, d, m, q, d);\n");
  ASSERT_EQ(run("build " + path("lin.lat") + " --order 1 -o " + path("o1.json")).code, 0);
  ASSERT_EQ(run("build " + path("lin.lat") + " --order 2 -o " + path("o2.json")).code, 0);
  const auto a = load_model(read_file(path("o1.json")));
  const auto b = load_model(read_file(path("o2.json")));
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a.layer(i).map.weights(0), b.layer(i).map.weights(0));
    EXPECT_EQ(a.layer(i).map.weights(1), b.layer(i).map.weights(1));
  }
}

TEST_F(Cli, TrackTuneAndPortrait) {
  ASSERT_EQ(run("build " + sample("fodo.lat") + " --order 3 -o " + path("m.json")).code, 0);
  auto r = run("track " + path("m.json") + " --turns 0 -o " + path("t0.csv"));
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_EQ(read_file(path("t0.csv")), "turn,tap,x,y,valid\n");

  ASSERT_EQ(run("track " + path("m.json") + " --x0 1e-4,0,1e-4,0 --turns 256 -o " + path("t.csv")).code, 0);
  const auto net = load_model(read_file(path("m.json")));
  const auto direct = track_turns(net, (PhaseVector(4) << 1e-4, 0, 1e-4, 0).finished(), 256);
  EXPECT_EQ(parse_track_record_csv(read_file(path("t.csv"))), direct);

  r = run("tune " + path("t.csv") + " --tap bpm2 --plane y -o " + path("q.json"));
  ASSERT_EQ(r.code, 0) << r.output;
  const auto q = nlohmann::json::parse(read_file(path("q.json")));
  EXPECT_DOUBLE_EQ(q["Q"].get<double>(), tune_of_record(direct, 1, 1).q);
  EXPECT_EQ(run("tune " + path("t.csv") + " --tap nowhere").code, 2);
  EXPECT_EQ(run("track " + path("m.json") + " --x0 1,2").code, 2);

  ASSERT_EQ(run("portrait " + path("m.json") + " --amplitudes 1e-4,1e-3 --turns 8 -o " + path("p.csv")).code, 0);
  EXPECT_EQ(read_file(path("p.csv")), portrait_csv(phase_portrait(net, {1e-4, 1e-3}, 8)));
}

TEST_F(Cli, TrainZeroEpochsKeepsModel) {
  ASSERT_EQ(run("build " + sample("fodo.lat") + " -o " + path("m.json")).code, 0);
  ASSERT_EQ(run("track " + path("m.json") + " --x0 1e-3,0,-1e-3,0 -o " + path("t.csv")).code, 0);
  std::string data = "sample,turn,tap,x,y,valid\n";
  const auto t = read_file(path("t.csv"));
  for (std::size_t pos = t.find('\n') + 1; pos < t.size();) {
    const auto end = t.find('\n', pos);
    data += "0," + t.substr(pos, end - pos + 1);
    pos = end + 1;
  }
  write_file(path("d.csv"), data);
  write_file(path("s.json"), R"({"samples": [{"x0": [1e-3, 0, -1e-3, 0]}]})");
  const std::string common = "train " + path("m.json") + " --data " + path("d.csv") + " --sidecar " + path("s.json");
  auto r = run(common + " --epochs 0 -o " + path("same.json"));
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_EQ(read_file(path("same.json")), read_file(path("m.json")));

  r = run(common + " --epochs 5 --trainable qf --mask qf:1:1 -o " + path("tr.json") + " --report " + path("rep.json"));
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_EQ(nlohmann::json::parse(read_file(path("rep.json")))["loss"].size(), 5u);

  EXPECT_EQ(run(common + " --lr -1 -o " + path("x.json")).code, 2);
  EXPECT_EQ(run(common + " --mask qf:9:0 --trainable qf -o " + path("x.json")).code, 2);
  r = run(common + " --trainable qf --lr 1e300 --clip 0 --epochs 50 -o " + path("x.json"));
  EXPECT_EQ(r.code, 4) << r.output;
}

TEST_F(Cli, SimulateCorrectPipeline) {
  ASSERT_EQ(run("build " + sample("achromat.lat") + " -o " + path("m.json")).code, 0);
  const std::string scen = " --scenario " + sample("achromat_errors.json");
  ASSERT_EQ(run("simulate " + sample("achromat.lat") + scen + " -o " + path("r0.csv")).code, 0);
  auto r = run("correct " + path("m.json") + " --readings " + path("r0.csv") + " -o " + path("k.csv") + " --report " +
               path("c.json"));
  ASSERT_EQ(r.code, 0) << r.output;
  ASSERT_EQ(run("simulate " + sample("achromat.lat") + scen + " --kicks " + path("k.csv") + " -o " + path("r1.csv")).code,
            0);
  const double before = valid_rms(parse_track_record_csv(read_file(path("r0.csv"))));
  const double after = valid_rms(parse_track_record_csv(read_file(path("r1.csv"))));
  EXPECT_GT(before, 1e-4);
  EXPECT_LE(after, 0.1 * before);
  const auto rep = nlohmann::json::parse(read_file(path("c.json")));
  EXPECT_TRUE(rep["feasible"].get<bool>());
  EXPECT_EQ(rep["kicks"].get<KickMap>(), parse_kicks_csv(read_file(path("k.csv"))));
}

TEST_F(Cli, SimulateIsDeterministicUnderSeed) {
  write_file(path("noisy.json"), R"({"misalignment_sigma": 1e-4, "bpm_noise": 1e-5})");
  const std::string base = "simulate " + sample("achromat.lat") + " --scenario " + path("noisy.json");
  ASSERT_EQ(run("--seed 4 " + base + " -o " + path("a.csv")).code, 0);
  ASSERT_EQ(run("--seed 4 --threads 2 " + base + " -o " + path("b.csv")).code, 0);
  ASSERT_EQ(run("--seed 5 " + base + " -o " + path("c.csv")).code, 0);
  EXPECT_EQ(read_file(path("a.csv")), read_file(path("b.csv")));
  EXPECT_NE(read_file(path("a.csv")), read_file(path("c.csv")));
  ASSERT_EQ(run(base + " --machine " + path("mach.json") + " -o " + path("d.csv")).code, 0);
  EXPECT_NO_THROW(load_model(read_file(path("mach.json"))));
}

TEST_F(Cli, InfeasibleCorrection) {
  write_file(path("late.lat"), "d: drift, l=1;\nm: monitor;\nc: hcorrector;\ns: sequence = (d, m, c, d);\n");
  ASSERT_EQ(run("build " + path("late.lat") + " -o " + path("m.json")).code, 0);
  write_file(path("r.csv"), "turn,tap,x,y,valid\n0,m,0.001,0,1\n");
  const auto r = run("correct " + path("m.json") + " --readings " + path("r.csv") + " -o " + path("k.csv"));
  EXPECT_EQ(r.code, 5);
  EXPECT_NE(r.output.find("warning"), std::string::npos);
}

TEST_F(Cli, Thread) {
  auto r = run("thread " + sample("thread.lat") + " --scenario " + sample("thread_scenario.json") + " -o " +
               path("log.json") + " --kicks " + path("k.csv"));
  ASSERT_EQ(r.code, 0) << r.output;
  const auto log = nlohmann::json::parse(read_file(path("log.json")));
  EXPECT_TRUE(log["complete"].get<bool>());
  EXPECT_EQ(log["log"].back()["valid"].get<std::size_t>(), 32u);
  EXPECT_EQ(parse_kicks_csv(read_file(path("k.csv"))), log["kicks"].get<KickMap>());

  write_file(path("hard.json"), R"({"epochs": 100, "magnet_errors": [{"position": 72, "dx": 0.015}]})");
  r = run("thread " + sample("thread.lat") + " --scenario " + path("hard.json") + " -o " + path("log2.json"));
  EXPECT_EQ(r.code, 5);
  EXPECT_TRUE(nlohmann::json::parse(read_file(path("log2.json")))["stagnated"].get<bool>());
}

TEST_F(Cli, VersionAndHints) {
  auto r = run("--version");
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.output.find("model format 1"), std::string::npos);
  r = run("--gnuplot-hints");
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.output.find("portrait.csv"), std::string::npos);
}
