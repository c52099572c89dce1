#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "selfconv/similarity.hpp"
#include "selfconv/strollr.hpp"
#include "selfconv/tensor.hpp"

namespace selfconv {

struct BenchReport {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;
  std::size_t patch_side = 0;
  std::size_t window = 0;
  std::size_t K = 0;
  std::size_t stride = 1;
  std::string engine;
  std::size_t threads = 1;
  double bm_seconds = 0.0;
  double total_seconds = 0.0;
  double bm_fraction = 0.0;
  double speedup_vs_naive = 1.0;
  bool equivalence_ok = false;
  std::optional<double> psnr_db;  // denoising runs only

  std::string to_json() const;
  static BenchReport from_json(const std::string& text);
  static std::string csv_header();
  std::string csv_row() const;

  friend bool operator==(const BenchReport&, const BenchReport&) = default;
};

struct BenchOptions {
  std::size_t repeats = 3;
  bool warmup = true;
  std::size_t threads = 1;
  double sample_fraction = 0.01;
  std::uint64_t sample_seed = 0;
  /// Reuse a measured naive time instead of timing the naive engine again.
  std::optional<double> naive_seconds;
};

/// Median wall time of `repeats` timed calls after an optional discarded one.
template <typename Fn>
double median_seconds(Fn&& fn, std::size_t repeats, bool warmup) {
  if (warmup) fn();
  std::vector<double> times;
  for (std::size_t i = 0; i < repeats; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    times.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  }
  std::sort(times.begin(), times.end());
  const std::size_t m = times.size() / 2;
  return times.size() % 2 ? times[m] : 0.5 * (times[m - 1] + times[m]);
}

/// Block matching for every stride-1 reference. bm_seconds covers matcher
/// setup and matching; the naive engine is timed as the speedup baseline.
/// A random sample of references is checked against the oracle.
BenchReport bench_bm(const ImageTensor& img, const PatchGeometry& geom, const SearchWindow& win,
                     std::size_t k, Engine engine, const BenchOptions& opts = {});

/// Full denoiser once per engine. The naive engine is run first as the
/// baseline when absent from `engines`; it is reported only if requested.
/// PSNR is measured against `clean`.
std::vector<BenchReport> bench_denoise(const ImageTensor& noisy, const ImageTensor& clean,
                                       const DenoiserConfig& cfg,
                                       const std::vector<Engine>& engines);

struct ComplexityPoint {
  std::size_t window = 0;           // square window extent in positions
  std::size_t search_positions = 0; // N_s
  double multiply_adds = 0.0;       // per reference patch
};

/// Counted work per interior reference patch for each window extent, with
/// per-window transforms and no size rounding.
std::vector<ComplexityPoint> complexity_sweep(Engine engine, std::size_t patch_side,
                                              const std::vector<std::size_t>& windows,
                                              std::uint64_t seed = 1);

/// Random axis-aligned rectangles of constant intensity over a mid-grey
/// background, integer-valued in [0, 255]; channels get independent levels.
ImageTensor synthetic_piecewise(std::size_t height, std::size_t width, std::size_t channels,
                                std::uint64_t seed);
/// I.i.d. integers uniform in [0, 255].
ImageTensor synthetic_uniform(std::size_t height, std::size_t width, std::size_t channels,
                              std::uint64_t seed);

/// Least-squares slope of log(multiply_adds) against log(search_positions).
double fitted_exponent(const std::vector<ComplexityPoint>& points);

}  // namespace selfconv
