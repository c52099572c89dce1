#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <sstream>

#include "selfconv/bench.hpp"
#include "selfconv/errors.hpp"
#include "selfconv/imaging_io.hpp"

using namespace selfconv;

TEST(BenchBm, NaiveAgainstItself) {
  const ImageTensor img = synthetic_uniform(24, 24, 1, 1);
  BenchOptions opts;
  opts.warmup = false;
  const BenchReport r = bench_bm(img, {4, 1, 1}, SearchWindow::square(9), 4, Engine::naive, opts);
  EXPECT_DOUBLE_EQ(r.speedup_vs_naive, 1.0);
  EXPECT_TRUE(r.equivalence_ok);
  EXPECT_EQ(r.engine, "naive");
  EXPECT_EQ(r.stride, 1u);
  EXPECT_FALSE(r.psnr_db.has_value());
}

TEST(BenchBm, FftIsEquivalentAndTimed) {
  const ImageTensor img = synthetic_uniform(32, 32, 2, 2);
  BenchOptions opts;
  opts.sample_fraction = 0.2;
  const BenchReport r = bench_bm(img, {5, 2, 1}, SearchWindow::square(11), 6, Engine::fft, opts);
  EXPECT_TRUE(r.equivalence_ok);
  EXPECT_GT(r.bm_seconds, 0.0);
  EXPECT_GT(r.speedup_vs_naive, 0.0);
  opts.repeats = 2;
  EXPECT_THROW(bench_bm(img, {5, 2, 1}, SearchWindow::square(11), 6, Engine::fft, opts), ConfigError);
}

TEST(BenchReport, JsonRoundTrip) {
  BenchReport r;
  r.height = 256;
  r.width = 255;
  r.channels = 4;
  r.patch_side = 6;
  r.window = 30;
  r.K = 25;
  r.stride = 2;
  r.engine = "fft";
  r.threads = 3;
  r.bm_seconds = 0.123456789012345;
  r.total_seconds = 1.0 / 3.0;
  r.bm_fraction = r.bm_seconds / r.total_seconds;
  r.speedup_vs_naive = 4.25;
  r.equivalence_ok = true;
  EXPECT_EQ(BenchReport::from_json(r.to_json()), r);
  r.psnr_db = 31.5;
  EXPECT_EQ(BenchReport::from_json(r.to_json()), r);
  r.psnr_db = std::numeric_limits<double>::infinity();
  EXPECT_EQ(BenchReport::from_json(r.to_json()), r);
  EXPECT_THROW(BenchReport::from_json("{not json"), FormatError);
}

TEST(BenchReport, CsvFields) {
  const std::string header = BenchReport::csv_header();
  for (const char* field : {"height", "width", "channels", "patch_side", "window", "K", "stride", "engine",
                            "threads", "bm_seconds", "total_seconds", "bm_fraction", "speedup_vs_naive",
                            "equivalence_ok"}) {
    EXPECT_NE(header.find(field), std::string::npos) << field;
  }
  BenchReport r;
  r.engine = "naive";
  const auto count = [](const std::string& s) { return std::count(s.begin(), s.end(), ','); };
  EXPECT_EQ(count(r.csv_row()), count(header));
}

TEST(Complexity, NaiveIsLinearPerCandidate) {
  const auto pts = complexity_sweep(Engine::naive, 6, {10, 20, 30, 40});
  ASSERT_EQ(pts.size(), 4u);
  for (const auto& p : pts) {
    EXPECT_EQ(p.search_positions, p.window * p.window);
    EXPECT_DOUBLE_EQ(p.multiply_adds / static_cast<double>(p.search_positions), 36.0);
  }
  EXPECT_NEAR(fitted_exponent(pts), 1.0, 1e-12);
}

TEST(Complexity, FftExponentForSmallPatches) {
  const double e = fitted_exponent(complexity_sweep(Engine::fft, 2, {10, 20, 30, 40}));
  EXPECT_GE(e, 1.0);
  EXPECT_LE(e, 1.3);
}

TEST(Complexity, FftWorkGrowsWithWindow) {
  const auto pts = complexity_sweep(Engine::fft, 6, {10, 20, 30, 40});
  for (std::size_t i = 1; i < pts.size(); ++i) EXPECT_GT(pts[i].multiply_adds, pts[i - 1].multiply_adds);
}

TEST(FittedExponent, RecoversPowerLaw) {
  std::vector<ComplexityPoint> pts;
  for (std::size_t n : {100u, 400u, 900u}) pts.push_back({0, n, 3.0 * std::pow(double(n), 1.5)});
  EXPECT_NEAR(fitted_exponent(pts), 1.5, 1e-12);
}

TEST(Synthetic, DeterministicIntegerImages) {
  const ImageTensor a = synthetic_piecewise(20, 30, 3, 5);
  EXPECT_EQ(a, synthetic_piecewise(20, 30, 3, 5));
  for (double v : a.data()) {
    EXPECT_EQ(v, std::round(v));
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 255.0);
  }
  const ImageTensor u = synthetic_uniform(10, 10, 1, 6);
  EXPECT_EQ(u, synthetic_uniform(10, 10, 1, 6));
}

TEST(BenchDenoise, EnginesAgreeAndNaiveSpendsMoreOnMatching) {
  const ImageTensor clean = synthetic_piecewise(64, 64, 4, 7);
  const ImageTensor noisy = add_gaussian_noise(clean, {20.0, 8});
  DenoiserConfig cfg = DenoiserConfig::for_sigma(20.0);
  cfg.patch_side = 6;
  cfg.patch_depth = 3;
  cfg.k = 8;
  cfg.window = 30;
  cfg.passes = 1;
  const auto reports = bench_denoise(noisy, clean, cfg, {Engine::naive, Engine::fft});
  ASSERT_EQ(reports.size(), 2u);
  const BenchReport& naive = reports[0];
  const BenchReport& fft = reports[1];
  ASSERT_TRUE(naive.psnr_db && fft.psnr_db);
  EXPECT_DOUBLE_EQ(*naive.psnr_db, *fft.psnr_db);
  EXPECT_TRUE(fft.equivalence_ok);
  EXPECT_GT(naive.bm_fraction, fft.bm_fraction);
  EXPECT_GT(*fft.psnr_db, psnr(clean, noisy));
  EXPECT_DOUBLE_EQ(naive.speedup_vs_naive, 1.0);
}

TEST(BenchDenoise, NaiveBaselineNotReportedUnlessRequested) {
  const ImageTensor clean = synthetic_piecewise(24, 24, 1, 9);
  const ImageTensor noisy = add_gaussian_noise(clean, {10.0, 10});
  DenoiserConfig cfg = DenoiserConfig::for_sigma(10.0);
  cfg.patch_side = 4;
  cfg.k = 4;
  cfg.window = 9;
  const auto reports = bench_denoise(noisy, clean, cfg, {Engine::fft});
  ASSERT_EQ(reports.size(), 1u);
  EXPECT_EQ(reports[0].engine, "fft");
  EXPECT_TRUE(reports[0].equivalence_ok);
}
