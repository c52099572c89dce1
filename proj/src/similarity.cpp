#include "selfconv/similarity.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>

#include "selfconv/errors.hpp"
#include "selfconv/oracle.hpp"
#include "selfconv/parallel.hpp"

namespace selfconv {

std::string_view to_string(Metric m) { return m == Metric::euclidean ? "euclidean" : "ncc"; }

std::string_view to_string(Engine e) {
  switch (e) {
    case Engine::naive: return "naive";
    case Engine::spatial: return "spatial";
    case Engine::fft: return "fft";
  }
  return "?";
}

Metric parse_metric(std::string_view s) {
  if (s == "euclidean") return Metric::euclidean;
  if (s == "ncc") return Metric::ncc;
  throw ConfigError("unknown metric '" + std::string(s) + "'");
}

Engine parse_engine(std::string_view s) {
  if (s == "naive") return Engine::naive;
  if (s == "spatial") return Engine::spatial;
  if (s == "fft") return Engine::fft;
  throw ConfigError("unknown engine '" + std::string(s) + "'");
}

namespace {

bool range_within(const PositionRange& inner, const PositionRange& outer) {
  return inner.row_lo >= outer.row_lo && inner.row_hi <= outer.row_hi &&
         inner.col_lo >= outer.col_lo && inner.col_hi <= outer.col_hi &&
         inner.chan_lo >= outer.chan_lo && inner.chan_hi <= outer.chan_hi;
}

// Raster-order walk over a range: row, then column, then channel.
template <class Fn>
void for_each_raster(const PositionRange& r, Fn&& fn) {
  for (std::size_t row = r.row_lo; row <= r.row_hi; ++row) {
    for (std::size_t col = r.col_lo; col <= r.col_hi; ++col) {
      for (std::size_t chan = r.chan_lo; chan <= r.chan_hi; ++chan) fn(PatchRef{row, col, chan});
    }
  }
}

struct Scored {
  double value;
  std::uint32_t order;  // raster rank inside the window
  PatchRef pos;
};

// Keeps the k entries of largest value; equal values resolve by raster order.
void select_top(std::vector<Scored>& cands, std::size_t k) {
  auto better = [](const Scored& a, const Scored& b) {
    if (a.value != b.value) return a.value > b.value;
    return a.order < b.order;
  };
  if (k < cands.size()) {
    std::nth_element(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(k), cands.end(),
                     better);
    cands.resize(k);
  }
  std::sort(cands.begin(), cands.end(), better);
}

}  // namespace

SimilarityMap selfconv_spatial(const ImageTensor& img, const PatchTensor& patch,
                               const PositionRange& positions, const PatchRef& ref,
                               OpCounter* counter) {
  const std::size_t s = patch.height();
  const std::size_t d = patch.channels();
  if (patch.width() != s) throw ShapeError("patches must be square");
  if (positions.row_hi + s > img.height() || positions.col_hi + s > img.width() ||
      positions.chan_hi + d > img.channels()) {
    throw BoundsError("patch larger than the searched region");
  }
  SimilarityMap out{PositionMap(positions), ref, MetricStage::raw_correlation};
  for_each_raster(positions, [&](const PatchRef& p) {
    double acc = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
      for (std::size_t l = 0; l < s; ++l) {
        for (std::size_t m = 0; m < s; ++m) acc += patch(l, m, c) * img(p.row + l, p.col + m, p.chan + c);
      }
    }
    out.map.at(p) = acc;
  });
  if (counter) counter->multiply_adds += static_cast<double>(positions.count() * patch.size());
  return out;
}

SimilarityMap selfconv_spatial(const ImageTensor& img, const PatchRef& ref,
                               const PatchGeometry& geom, const SearchWindow& win) {
  return selfconv_spatial(img, extract_patch(img, ref, geom), window_range(img, geom, win, ref),
                          ref);
}

SimilarityMap selfconv_fft(const Spectrum& img_spectrum, const PatchTensor& patch,
                           const PatchRef& ref) {
  const std::size_t h = img_spectrum.height(), w = img_spectrum.width();
  const std::size_t s = patch.height(), d = patch.channels();
  if (patch.width() != s) throw ShapeError("patches must be square");
  if (s > h || s > w || d > img_spectrum.channels()) {
    throw ShapeError("patch does not fit the spectrum grid");
  }
  const Spectrum patch_spec = fft2(zero_pad(patch, h, w));
  const std::size_t n = h * w;
  const PositionRange valid{0, h - s, 0, w - s, 0, img_spectrum.channels() - d};
  SimilarityMap out{PositionMap(valid), ref, MetricStage::raw_correlation};

  for (std::size_t k = valid.chan_lo; k <= valid.chan_hi; ++k) {
    // Channel-summed product; the inverse of a sum is the sum of inverses.
    Spectrum acc(h, w, 1);
    for (std::size_t c = 0; c < d; ++c) {
      for (std::size_t i = 0; i < n; ++i) {
        acc.data()[i] += img_spectrum.data()[(k + c) * n + i] * std::conj(patch_spec.data()[c * n + i]);
      }
    }
    const ImageTensor corr = ifft2(acc);
    for (std::size_t r = 0; r <= valid.row_hi; ++r) {
      for (std::size_t q = 0; q <= valid.col_hi; ++q) out.map.at(r, q, k) = corr(r, q);
    }
  }
  return out;
}

SimilarityMap euclidean_map(const SimilarityMap& c, const PositionMap& norms, double ref_norm_sq) {
  if (!range_within(c.map.range, norms.range)) {
    throw ShapeError("norm map does not cover the correlation map");
  }
  SimilarityMap out{PositionMap(c.map.range), c.ref, MetricStage::euclidean_distance};
  for_each_raster(c.map.range, [&](const PatchRef& p) {
    out.map.at(p) = std::max(0.0, norms.at(p) + ref_norm_sq - 2.0 * c.map.at(p));
  });
  return out;
}

SimilarityMap ncc_map(const SimilarityMap& c, const PositionMap& norms, double ref_norm,
                      double eps) {
  if (ref_norm == 0.0) throw DegeneratePatchError("reference patch is all zeros");
  if (!range_within(c.map.range, norms.range)) {
    throw ShapeError("norm map does not cover the correlation map");
  }
  SimilarityMap out{PositionMap(c.map.range), c.ref, MetricStage::ncc_score};
  for_each_raster(c.map.range, [&](const PatchRef& p) {
    out.map.at(p) = c.map.at(p) / std::max(ref_norm * std::sqrt(norms.at(p)), eps);
  });
  return out;
}

WeightMap nlm_weights(const SimilarityMap& distances, double bandwidth) {
  if (!(bandwidth > 0.0)) throw ConfigError("NLM bandwidth must be positive");
  WeightMap out{distances.map, distances.ref, bandwidth};
  auto& v = out.weights.values;
  const double d_min = *std::min_element(v.begin(), v.end());
  const double b2 = bandwidth * bandwidth;
  double theta = 0.0;
  for (double& x : v) {
    x = std::exp(-(x - d_min) / b2);
    theta += x;
  }
  for (double& x : v) x /= theta;
  return out;
}

MatchSet top_k_select(const SimilarityMap& objective, std::size_t k) {
  if (k == 0) throw ConfigError("K must be at least 1");
  std::vector<Scored> cands;
  cands.reserve(objective.map.range.count());
  std::uint32_t order = 0;
  for_each_raster(objective.map.range, [&](const PatchRef& p) {
    cands.push_back({objective.map.at(p), order++, p});
  });
  const bool short_set = cands.size() < k;
  select_top(cands, k);
  MatchSet out;
  out.ref = objective.ref;
  out.score_stage = MetricStage::bm_objective;
  out.k = k;
  out.short_set = short_set;
  for (const auto& c : cands) {
    out.indices.push_back(c.pos);
    out.scores.push_back(c.value);
  }
  return out;
}

// ---------------------------------------------------------------------------
// BlockMatcher

struct BlockMatcher::Impl {
  ImageTensor img;
  PatchGeometry geom;
  SearchWindow win;
  MatcherOptions opts;
  PositionMap norms;
  PositionRange all;

  bool integral = false;
  double max_abs = 0.0;

  bool whole = false;
  std::size_t grid_h = 0, grid_w = 0;
  std::unique_ptr<RealFft2d> fft;
  // Whole-image mode: half spectra of every channel, computed once.
  std::vector<AlignedBuffer<Complex>> image_spectra;
  double setup_cost = 0.0;

  SimilarityMap correlate(Workspace& ws, const PatchRef& ref, OpCounter* counter) const;
  MatchSet match(Workspace& ws, const PatchRef& ref, std::size_t k, Metric metric,
                 OpCounter* counter) const;
};

class BlockMatcher::Workspace {
 public:
  explicit Workspace(const Impl& im) {
    if (!im.fft) return;
    real = AlignedBuffer<double>(im.fft->real_size());
    acc = AlignedBuffer<Complex>(im.fft->spectrum_size());
    for (std::size_t c = 0; c < im.geom.depth; ++c) patch_spec.emplace_back(im.fft->spectrum_size());
    if (!im.whole) {
      // Region spectra for every channel a search3d window can touch.
      for (std::size_t c = 0; c < im.img.channels(); ++c) region_spec.emplace_back(im.fft->spectrum_size());
    }
  }

  AlignedBuffer<double> real;
  AlignedBuffer<Complex> acc;
  std::vector<AlignedBuffer<Complex>> patch_spec;
  std::vector<AlignedBuffer<Complex>> region_spec;
  std::vector<Scored> cands;
};

namespace {

bool is_integral(std::span<const double> v, double& max_abs) {
  bool integral = true;
  max_abs = 0.0;
  for (double x : v) {
    max_abs = std::max(max_abs, std::abs(x));
    if (x != std::nearbyint(x)) integral = false;
  }
  return integral && max_abs <= 65535.0;
}

// Copies rows x cols of channel chan starting at (r0, c0) into the top-left of
// a zeroed grid_h x grid_w buffer.
void load_block(const ImageTensor& img, std::size_t chan, std::size_t r0, std::size_t c0,
                std::size_t rows, std::size_t cols, double* buf, std::size_t grid_h,
                std::size_t grid_w) {
  std::fill_n(buf, grid_h * grid_w, 0.0);
  const auto plane = img.channel(chan);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* src = plane.data() + (r0 + r) * img.width() + c0;
    std::copy_n(src, cols, buf + r * grid_w);
  }
}

}  // namespace

BlockMatcher::BlockMatcher(const ImageTensor& img, const PatchGeometry& geom,
                           const SearchWindow& win, MatcherOptions opts)
    : impl_(std::make_unique<Impl>()) {
  Impl& im = *impl_;
  im.img = img;
  im.geom = geom;
  im.win = win;
  im.opts = opts;
  im.all = full_range(img, geom);
  im.norms = squared_norm_map(img, geom);
  im.integral = is_integral(img.data(), im.max_abs);
  if (opts.engine != Engine::fft) return;

  const std::size_t s = geom.side;
  const std::size_t win_rows = std::min(win.rows, im.all.rows());
  const std::size_t win_cols = std::min(win.cols, im.all.cols());
  switch (opts.fft_mode) {
    case FftMode::whole_image: im.whole = true; break;
    case FftMode::per_window: im.whole = false; break;
    case FftMode::automatic:
      im.whole = static_cast<double>(win_rows * win_cols) >
                 0.25 * static_cast<double>(im.all.rows() * im.all.cols());
      break;
  }
  if (im.whole) {
    im.grid_h = img.height();
    im.grid_w = img.width();
  } else {
    // Every clipped window region fits a grid sized for an interior window,
    // and zero padding beyond the region never reaches the valid anchors.
    im.grid_h = std::min(img.height(), win_rows + s - 1);
    im.grid_w = std::min(img.width(), win_cols + s - 1);
  }
  if (opts.fast_sizes) {
    im.grid_h = fast_fft_size(im.grid_h);
    im.grid_w = fast_fft_size(im.grid_w);
  }
  im.fft = std::make_unique<RealFft2d>(im.grid_h, im.grid_w);

  if (im.whole) {
    AlignedBuffer<double> buf(im.fft->real_size());
    for (std::size_t c = 0; c < img.channels(); ++c) {
      load_block(img, c, 0, 0, img.height(), img.width(), buf.data(), im.grid_h, im.grid_w);
      im.image_spectra.emplace_back(im.fft->spectrum_size());
      im.fft->forward(buf.data(), im.image_spectra.back().data());
      im.setup_cost += fft_cost_model(im.grid_h, im.grid_w);
    }
  }
}

BlockMatcher::~BlockMatcher() = default;
BlockMatcher::BlockMatcher(BlockMatcher&&) noexcept = default;
BlockMatcher& BlockMatcher::operator=(BlockMatcher&&) noexcept = default;

const ImageTensor& BlockMatcher::image() const noexcept { return impl_->img; }
const PatchGeometry& BlockMatcher::geometry() const noexcept { return impl_->geom; }
const SearchWindow& BlockMatcher::window() const noexcept { return impl_->win; }
const PositionMap& BlockMatcher::norms() const noexcept { return impl_->norms; }
Engine BlockMatcher::engine() const noexcept { return impl_->opts.engine; }
bool BlockMatcher::uses_whole_image_spectrum() const noexcept { return impl_->whole; }
double BlockMatcher::setup_cost() const noexcept { return impl_->setup_cost; }

SimilarityMap BlockMatcher::correlate(const PatchRef& ref, OpCounter* counter) const {
  Workspace ws(*impl_);
  return impl_->correlate(ws, ref, counter);
}

MatchSet BlockMatcher::match(const PatchRef& ref, std::size_t k, Metric metric,
                             OpCounter* counter) const {
  Workspace ws(*impl_);
  return impl_->match(ws, ref, k, metric, counter);
}

SimilarityMap BlockMatcher::Impl::correlate(Workspace& ws, const PatchRef& ref,
                                            OpCounter* counter) const {
  const Impl& im = *this;
  const PositionRange range = window_range(im.img, im.geom, im.win, ref);
  if (im.opts.engine != Engine::fft) {
    return selfconv_spatial(im.img, extract_patch(im.img, ref, im.geom), range, ref, counter);
  }
  SimilarityMap out{PositionMap(range), ref, MetricStage::raw_correlation};
  const std::size_t gh = im.grid_h, gw = im.grid_w;
  const std::size_t s = im.geom.side, d = im.geom.depth;
  const std::size_t spec_n = im.fft->spectrum_size();

  // Patch spectra, one per patch channel.
  double patch_abs = 0.0;
  for (std::size_t c = 0; c < d; ++c) {
    load_block(im.img, ref.chan + c, ref.row, ref.col, s, s, ws.real.data(), gh, gw);
    for (std::size_t i = 0; i < gh * gw; ++i) patch_abs += std::abs(ws.real[i]);
    im.fft->forward(ws.real.data(), ws.patch_spec[c].data());
  }
  double cost = static_cast<double>(d) * fft_cost_model(gh, gw);

  // Region spectra for per-window mode; origin of the correlation grid.
  std::size_t origin_r = 0, origin_c = 0;
  const std::size_t chan_first = range.chan_lo;
  const std::size_t chan_last = range.chan_hi + d - 1;
  if (!im.whole) {
    origin_r = range.row_lo;
    origin_c = range.col_lo;
    const std::size_t rh = range.rows() + s - 1, rw = range.cols() + s - 1;
    for (std::size_t ch = chan_first; ch <= chan_last; ++ch) {
      load_block(im.img, ch, origin_r, origin_c, rh, rw, ws.real.data(), gh, gw);
      im.fft->forward(ws.real.data(), ws.region_spec[ch].data());
      cost += fft_cost_model(gh, gw);
    }
  }

  const double norm = 1.0 / static_cast<double>(gh * gw);
  const double err_bound = 1e-13 * std::log2(static_cast<double>(gh * gw) + 2.0) * patch_abs *
                           std::max(im.max_abs, 1.0);
  const bool round = im.opts.exact_integer_rounding && im.integral && err_bound < 0.25;

  for (std::size_t k = range.chan_lo; k <= range.chan_hi; ++k) {
    Complex* acc = ws.acc.data();
    std::fill_n(acc, spec_n, Complex(0.0, 0.0));
    for (std::size_t c = 0; c < d; ++c) {
      const Complex* x = im.whole ? im.image_spectra[k + c].data() : ws.region_spec[k + c].data();
      const Complex* p = ws.patch_spec[c].data();
      for (std::size_t i = 0; i < spec_n; ++i) acc[i] += x[i] * std::conj(p[i]);
    }
    cost += 4.0 * static_cast<double>(d * spec_n);
    im.fft->inverse(acc, ws.real.data());
    cost += fft_cost_model(gh, gw);
    for (std::size_t r = range.row_lo; r <= range.row_hi; ++r) {
      const double* row = ws.real.data() + (r - origin_r) * gw;
      for (std::size_t q = range.col_lo; q <= range.col_hi; ++q) {
        const double v = row[q - origin_c] * norm;
        out.map.at(r, q, k) = round ? std::nearbyint(v) : v;
      }
    }
  }
  if (counter) counter->multiply_adds += cost;
  return out;
}

MatchSet BlockMatcher::Impl::match(Workspace& ws, const PatchRef& ref, std::size_t k,
                                   Metric metric, OpCounter* counter) const {
  const Impl& im = *this;
  if (k == 0) throw ConfigError("K must be at least 1");
  if (im.opts.engine == Engine::naive) {
    return oracle::bm_naive(im.img, ref, im.geom, im.win, k, metric, counter);
  }
  const SimilarityMap corr = correlate(ws, ref, counter);
  const PositionRange& range = corr.map.range;
  const double ref_sq = im.norms.at(ref);
  double ref_norm = 0.0;
  if (metric == Metric::ncc) {
    if (ref_sq == 0.0) throw DegeneratePatchError("reference patch is all zeros");
    ref_norm = std::sqrt(ref_sq);
  }

  std::vector<Scored>& cands = ws.cands;
  cands.clear();
  cands.reserve(range.count());
  std::uint32_t order = 0;
  for_each_raster(range, [&](const PatchRef& p) {
    const double c = corr.map.at(p);
    const double n = im.norms.at(p);
    // Euclidean objective: C - h*h/2, the negated distance up to a constant.
    const double v = metric == Metric::euclidean
                         ? c - 0.5 * n
                         : c / std::max(ref_norm * std::sqrt(n), kNccEpsilon);
    cands.push_back({v, order++, p});
  });
  if (counter) counter->multiply_adds += static_cast<double>(range.count());

  MatchSet out;
  out.ref = ref;
  out.metric = metric;
  out.k = k;
  out.short_set = cands.size() < k;
  select_top(cands, k);
  out.score_stage = metric == Metric::euclidean ? MetricStage::euclidean_distance
                                                : MetricStage::ncc_score;
  for (const auto& c : cands) {
    out.indices.push_back(c.pos);
    out.scores.push_back(metric == Metric::euclidean
                             ? std::max(0.0, im.norms.at(c.pos) + ref_sq - 2.0 * corr.map.at(c.pos))
                             : c.value);
  }
  return out;
}

std::vector<MatchSet> BlockMatcher::match_all(const std::vector<PatchRef>& refs, std::size_t k,
                                              Metric metric, std::size_t threads,
                                              OpCounter* counter) const {
  std::vector<MatchSet> out(refs.size());
  std::vector<OpCounter> counters(std::max<std::size_t>(threads, 1));
  parallel_chunks(refs.size(), threads, [&](std::size_t begin, std::size_t end, std::size_t w) {
    Workspace ws(*impl_);
    for (std::size_t i = begin; i < end; ++i) {
      out[i] = impl_->match(ws, refs[i], k, metric, &counters[w]);
    }
  });
  if (counter) {
    for (const auto& c : counters) counter->multiply_adds += c.multiply_adds;
  }
  return out;
}

WeightMap BlockMatcher::nlm(const PatchRef& ref, double bandwidth) const {
  const Impl& im = *impl_;
  if (im.opts.engine == Engine::naive) {
    return oracle::nlm_naive(im.img, ref, im.geom, im.win, bandwidth);
  }
  const SimilarityMap corr = correlate(ref);
  return nlm_weights(euclidean_map(corr, im.norms, im.norms.at(ref)), bandwidth);
}

MatchSet block_match(const ImageTensor& img, const PatchRef& ref, const PatchGeometry& geom,
                     const SearchWindow& win, std::size_t k, Metric metric, Engine engine) {
  if (engine == Engine::naive) return oracle::bm_naive(img, ref, geom, win, k, metric);
  MatcherOptions opts;
  opts.engine = engine;
  return BlockMatcher(img, geom, win, opts).match(ref, k, metric);
}

SearchWindow multimodal_window(const ImageTensor& tensor, const PatchGeometry& geom,
                               const SearchWindow& win, SearchMode mode) {
  SearchWindow w = win;
  if (mode == SearchMode::search2d) {
    w.chan_span = 1;
    return w;
  }
  if (geom.depth >= tensor.channels()) {
    throw ConfigError("search3d needs patch depth below the channel count");
  }
  if (win.chan_span <= 1) throw ConfigError("search3d needs a channel span above 1");
  return w;
}

MatchSet selfconv_mm(const ImageTensor& tensor, const PatchRef& ref, const PatchGeometry& geom,
                     const SearchWindow& win, std::size_t k, SearchMode mode, Engine engine) {
  const SearchWindow w = multimodal_window(tensor, geom, win, mode);
  return block_match(tensor, ref, geom, w, k, Metric::euclidean, engine);
}

PatchGroup group_patches(const ImageTensor& tensor, const MatchSet& matches,
                         const PatchGeometry& geom) {
  if (matches.indices.empty()) throw ConfigError("cannot group an empty match set");
  PatchGroup g{Eigen::MatrixXd(geom.length(), matches.size()), matches.indices};
  for (std::size_t j = 0; j < matches.size(); ++j) {
    vectorize_patch(tensor, matches.indices[j], geom,
                    std::span<double>(g.data.col(static_cast<Eigen::Index>(j)).data(), geom.length()));
  }
  return g;
}

}  // namespace selfconv
