#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "commands.hpp"
#include "selfconv/bench.hpp"
#include "selfconv/imaging_io.hpp"

using namespace selfconv;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "selfconv-cli");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("selfconv_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
};

}  // namespace

TEST_F(CliTest, WindowOneGivesSelfMatches) {
  write_image(synthetic_uniform(12, 12, 1, 1), path("a.pgm"));
  const Result r = run_cli({"match", "--input", path("a.pgm"), "--patch-side", "3", "--window", "1", "-K", "1"});
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream lines(r.out);
  std::string line;
  std::getline(lines, line);
  EXPECT_EQ(line, "ref_row,ref_col,ref_chan,rank,match_row,match_col,match_chan,score");
  std::size_t rows = 0;
  while (std::getline(lines, line)) {
    int rr, rc, rch, rank, mr, mc, mch;
    double score;
    ASSERT_EQ(std::sscanf(line.c_str(), "%d,%d,%d,%d,%d,%d,%d,%lf", &rr, &rc, &rch, &rank, &mr, &mc, &mch, &score), 8);
    EXPECT_EQ(rr, mr);
    EXPECT_EQ(rc, mc);
    EXPECT_EQ(score, 0.0);
    ++rows;
  }
  EXPECT_EQ(rows, 100u);
}

TEST_F(CliTest, EnginesProduceIdenticalCsv) {
  write_image(synthetic_uniform(20, 20, 3, 2), path("a.mmr"));
  std::string first;
  for (const char* engine : {"naive", "spatial", "fft"}) {
    const Result r = run_cli({"match", "--input", path("a.mmr"), "--patch-side", "4", "--window", "7", "-K", "5",
                              "--engine", engine, "--stride", "3"});
    ASSERT_EQ(r.code, 0) << r.err;
    if (first.empty()) {
      first = r.out;
    } else {
      EXPECT_EQ(r.out, first) << engine;
    }
  }
}

TEST_F(CliTest, ExitCodes) {
  EXPECT_EQ(run_cli({"match", "--patch-side", "3", "-K", "1"}).code, 2);
  EXPECT_EQ(run_cli({"nosuchcommand"}).code, 2);
  std::ofstream(path("bad.pgm")) << "P9 junk";
  EXPECT_EQ(run_cli({"psnr", "--input", path("bad.pgm"), "--reference", path("bad.pgm")}).code, 3);
  write_image(synthetic_uniform(16, 16, 1, 3), path("a.pgm"));
  EXPECT_EQ(run_cli({"denoise", "--input", path("a.pgm"), "--sigma", "0", "--out", path("o.pgm")}).code, 4);
  EXPECT_EQ(run_cli({"denoise", "--input", path("a.pgm"), "--sigma", "-5", "--out", path("o.pgm")}).code, 4);
}

TEST_F(CliTest, PsnrOfIdenticalImagesIsInf) {
  write_image(synthetic_uniform(8, 8, 1, 4), path("a.pgm"));
  const Result r = run_cli({"psnr", "--input", path("a.pgm"), "--reference", path("a.pgm")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("PSNR_dB=inf"), std::string::npos);
}

TEST_F(CliTest, AddNoiseZeroSigmaKeepsPayload) {
  write_image(synthetic_uniform(8, 9, 2, 5), path("a.mmr"));
  ASSERT_EQ(run_cli({"addnoise", "--input", path("a.mmr"), "--out", path("b.mmr"), "--sigma", "0"}).code, 0);
  EXPECT_EQ(slurp(path("a.mmr")), slurp(path("b.mmr")));
  ASSERT_EQ(run_cli({"addnoise", "--input", path("a.mmr"), "--out", path("c.mmr"), "--sigma", "10", "--seed", "3"}).code,
            0);
  EXPECT_NE(slurp(path("a.mmr")), slurp(path("c.mmr")));
}

TEST_F(CliTest, DenoiseIsDeterministicAndReportsPsnr) {
  write_image(synthetic_piecewise(32, 32, 1, 6), path("clean.pgm"));
  const std::vector<std::string> common{"denoise", "--input", path("clean.pgm"), "--sigma", "15",
                                        "--simulate-noise", "--seed", "9", "--patch-side", "4",
                                        "--window", "9", "-K", "4", "--reference", path("clean.pgm")};
  auto a = common, b = common;
  a.insert(a.end(), {"--out", path("a.pgm")});
  b.insert(b.end(), {"--out", path("b.pgm"), "--threads", "2"});
  const Result ra = run_cli(a), rb = run_cli(b);
  ASSERT_EQ(ra.code, 0) << ra.err;
  ASSERT_EQ(rb.code, 0) << rb.err;
  EXPECT_EQ(slurp(path("a.pgm")), slurp(path("b.pgm")));
  EXPECT_NE(ra.out.find("PSNR_dB="), std::string::npos);
  EXPECT_EQ(ra.out, rb.out);
}

TEST_F(CliTest, BenchPrintsJsonAndCsv) {
  const Result r = run_cli({"bench", "--mode", "bm", "--size", "24", "--channels", "1", "--patch-side", "4",
                            "--window", "9", "-K", "4", "--engine", "fft", "--repeats", "3",
                            "--json", path("r.json"), "--csv", path("r.csv")});
  ASSERT_EQ(r.code, 0) << r.err;
  const std::string first = r.out.substr(0, r.out.find('\n'));
  const BenchReport rep = BenchReport::from_json(first);
  EXPECT_EQ(rep.engine, "fft");
  EXPECT_TRUE(rep.equivalence_ok);
  EXPECT_NE(r.out.find(BenchReport::csv_header()), std::string::npos);
  EXPECT_TRUE(fs::exists(path("r.json")));
  EXPECT_EQ(slurp(path("r.csv")).substr(0, BenchReport::csv_header().size()), BenchReport::csv_header());
}
