#include "selfconv/bench.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <random>

#include "json.hpp"

#include "selfconv/errors.hpp"
#include "selfconv/imaging_io.hpp"
#include "selfconv/oracle.hpp"

namespace selfconv {

namespace {

using nlohmann::json;

std::string fmt_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

json double_to_json(double v) {
  if (std::isfinite(v)) return v;
  return fmt_double(v);
}

double double_from_json(const json& j) {
  if (j.is_number()) return j.get<double>();
  const auto s = j.get<std::string>();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  throw FormatError("bench report: bad number " + s);
}

std::size_t window_extent(const SearchWindow& win) {
  return win.rows == SearchWindow::kWhole ? 0 : win.rows;
}

bool same_matches(const MatchSet& a, const MatchSet& b) {
  if (a.indices != b.indices) return false;
  for (std::size_t i = 0; i < a.scores.size(); ++i) {
    if (std::abs(a.scores[i] - b.scores[i]) > 1e-6) return false;
  }
  return true;
}

std::vector<PatchRef> sample_refs(const std::vector<PatchRef>& refs, double fraction,
                                  std::uint64_t seed) {
  const auto n = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(refs.size()))));
  std::vector<PatchRef> out;
  std::sample(refs.begin(), refs.end(), std::back_inserter(out), std::min(n, refs.size()),
              std::mt19937_64(seed));
  return out;
}

void run_matching(const ImageTensor& img, const PatchGeometry& geom, const SearchWindow& win,
                  std::size_t k, Engine engine, const std::vector<PatchRef>& refs,
                  std::size_t threads) {
  MatcherOptions mo;
  mo.engine = engine;
  const BlockMatcher m(img, geom, win, mo);
  (void)m.match_all(refs, k, Metric::euclidean, threads);
}

}  // namespace

std::string BenchReport::to_json() const {
  json j = {{"height", height},
            {"width", width},
            {"channels", channels},
            {"patch_side", patch_side},
            {"window", window},
            {"K", K},
            {"stride", stride},
            {"engine", engine},
            {"threads", threads},
            {"bm_seconds", double_to_json(bm_seconds)},
            {"total_seconds", double_to_json(total_seconds)},
            {"bm_fraction", double_to_json(bm_fraction)},
            {"speedup_vs_naive", double_to_json(speedup_vs_naive)},
            {"equivalence_ok", equivalence_ok}};
  j["psnr_db"] = psnr_db ? double_to_json(*psnr_db) : json(nullptr);
  return j.dump();
}

BenchReport BenchReport::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
    BenchReport r;
    r.height = j.at("height").get<std::size_t>();
    r.width = j.at("width").get<std::size_t>();
    r.channels = j.at("channels").get<std::size_t>();
    r.patch_side = j.at("patch_side").get<std::size_t>();
    r.window = j.at("window").get<std::size_t>();
    r.K = j.at("K").get<std::size_t>();
    r.stride = j.at("stride").get<std::size_t>();
    r.engine = j.at("engine").get<std::string>();
    r.threads = j.at("threads").get<std::size_t>();
    r.bm_seconds = double_from_json(j.at("bm_seconds"));
    r.total_seconds = double_from_json(j.at("total_seconds"));
    r.bm_fraction = double_from_json(j.at("bm_fraction"));
    r.speedup_vs_naive = double_from_json(j.at("speedup_vs_naive"));
    r.equivalence_ok = j.at("equivalence_ok").get<bool>();
    if (!j.at("psnr_db").is_null()) r.psnr_db = double_from_json(j.at("psnr_db"));
    return r;
  } catch (const json::exception& e) {
    throw FormatError(std::string("bench report: ") + e.what());
  }
}

std::string BenchReport::csv_header() {
  return "height,width,channels,patch_side,window,K,stride,engine,threads,bm_seconds,"
         "total_seconds,bm_fraction,speedup_vs_naive,equivalence_ok,psnr_db";
}

std::string BenchReport::csv_row() const {
  std::string row;
  for (std::size_t v : {height, width, channels, patch_side, window, K, stride}) {
    row += std::to_string(v) + ",";
  }
  row += engine + "," + std::to_string(threads) + ",";
  for (double v : {bm_seconds, total_seconds, bm_fraction, speedup_vs_naive}) {
    row += fmt_double(v) + ",";
  }
  row += equivalence_ok ? "true," : "false,";
  if (psnr_db) row += fmt_double(*psnr_db);
  return row;
}

BenchReport bench_bm(const ImageTensor& img, const PatchGeometry& geom, const SearchWindow& win,
                     std::size_t k, Engine engine, const BenchOptions& opts) {
  if (opts.repeats < 3) throw ConfigError("benchmarks need at least 3 repeats");
  const PatchGeometry g{geom.side, geom.depth, 1};
  validate_geometry(img, g);
  const std::vector<PatchRef> refs = reference_grid(img, g, false);

  auto timed = [&](Engine e) {
    return median_seconds([&] { run_matching(img, g, win, k, e, refs, opts.threads); },
                          opts.repeats, opts.warmup);
  };

  BenchReport r;
  r.height = img.height();
  r.width = img.width();
  r.channels = img.channels();
  r.patch_side = g.side;
  r.window = window_extent(win);
  r.K = k;
  r.stride = 1;
  r.engine = to_string(engine);
  r.threads = opts.threads;
  r.bm_seconds = timed(engine);
  r.total_seconds = r.bm_seconds;
  r.bm_fraction = 1.0;
  if (engine == Engine::naive) {
    r.speedup_vs_naive = 1.0;
  } else {
    const double naive = opts.naive_seconds ? *opts.naive_seconds : timed(Engine::naive);
    r.speedup_vs_naive = naive / r.bm_seconds;
  }

  MatcherOptions mo;
  mo.engine = engine;
  const BlockMatcher matcher(img, g, win, mo);
  r.equivalence_ok = true;
  for (const PatchRef& ref : sample_refs(refs, opts.sample_fraction, opts.sample_seed)) {
    const MatchSet got = matcher.match(ref, k, Metric::euclidean);
    const MatchSet want = oracle::bm_naive(img, ref, g, win, k, Metric::euclidean);
    if (!same_matches(got, want)) {
      r.equivalence_ok = false;
      break;
    }
  }
  return r;
}

std::vector<BenchReport> bench_denoise(const ImageTensor& noisy, const ImageTensor& clean,
                                       const DenoiserConfig& cfg,
                                       const std::vector<Engine>& engines) {
  cfg.validate();
  const PatchGeometry geom = cfg.geometry(noisy);

  auto run = [&](Engine e) {
    DenoiserConfig c = cfg;
    c.engine = e;
    const auto t0 = std::chrono::steady_clock::now();
    const DenoiseReport d = denoise_with_report(noisy, c);
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    BenchReport r;
    r.height = noisy.height();
    r.width = noisy.width();
    r.channels = noisy.channels();
    r.patch_side = geom.side;
    r.window = cfg.window;
    r.K = cfg.k;
    r.stride = geom.stride;
    r.engine = to_string(e);
    r.threads = cfg.threads;
    r.bm_seconds = d.stats.bm_seconds;
    r.total_seconds = wall;
    r.bm_fraction = std::clamp(wall > 0.0 ? r.bm_seconds / wall : 0.0, 0.0, 1.0);
    r.psnr_db = psnr(clean, d.image);
    return r;
  };

  const BenchReport baseline = run(Engine::naive);
  std::vector<BenchReport> out;
  for (Engine e : engines) {
    BenchReport r = e == Engine::naive ? baseline : run(e);
    r.speedup_vs_naive = baseline.bm_seconds / r.bm_seconds;
    const double a = *r.psnr_db, b = *baseline.psnr_db;
    r.equivalence_ok = (std::isinf(a) && std::isinf(b)) || std::abs(a - b) < 1e-6;
    out.push_back(r);
  }
  return out;
}

std::vector<ComplexityPoint> complexity_sweep(Engine engine, std::size_t patch_side,
                                              const std::vector<std::size_t>& windows,
                                              std::uint64_t seed) {
  if (windows.empty()) return {};
  const std::size_t widest = *std::max_element(windows.begin(), windows.end());
  // Large enough that every window stays clear of the borders.
  const std::size_t size = 2 * (widest + patch_side) + 1;
  const ImageTensor img = synthetic_uniform(size, size, 1, seed);

  const PatchGeometry geom{patch_side, 1, 1};
  const PatchRef ref{size / 2, size / 2, 0};
  MatcherOptions mo;
  mo.engine = engine;
  mo.fft_mode = FftMode::per_window;
  mo.fast_sizes = false;

  std::vector<ComplexityPoint> out;
  for (std::size_t w : windows) {
    const SearchWindow win = SearchWindow::square(w);
    const BlockMatcher m(img, geom, win, mo);
    OpCounter counter;
    (void)m.match(ref, 1, Metric::euclidean, &counter);
    out.push_back({w, window_range(img, geom, win, ref).count(), counter.multiply_adds});
  }
  return out;
}

ImageTensor synthetic_piecewise(std::size_t height, std::size_t width, std::size_t channels,
                                std::uint64_t seed) {
  ImageTensor img(height, width, channels, 128.0);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> row(0, height - 1), col(0, width - 1);
  std::uniform_int_distribution<int> level(16, 240);
  const std::size_t rects = 6 + (height * width) / 1024;
  for (std::size_t n = 0; n < rects; ++n) {
    std::size_t r0 = row(rng), r1 = row(rng), c0 = col(rng), c1 = col(rng);
    if (r0 > r1) std::swap(r0, r1);
    if (c0 > c1) std::swap(c0, c1);
    for (std::size_t c = 0; c < channels; ++c) {
      const double v = level(rng);
      for (std::size_t r = r0; r <= r1; ++r) {
        for (std::size_t q = c0; q <= c1; ++q) img(r, q, c) = v;
      }
    }
  }
  return img;
}

ImageTensor synthetic_uniform(std::size_t height, std::size_t width, std::size_t channels,
                              std::uint64_t seed) {
  ImageTensor img(height, width, channels);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> pixel(0, 255);
  for (double& v : img.data()) v = pixel(rng);
  return img;
}

double fitted_exponent(const std::vector<ComplexityPoint>& points) {
  if (points.size() < 2) throw ConfigError("need at least two points to fit an exponent");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& p : points) {
    const double x = std::log(static_cast<double>(p.search_positions));
    const double y = std::log(p.multiply_adds);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double n = static_cast<double>(points.size());
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace selfconv
