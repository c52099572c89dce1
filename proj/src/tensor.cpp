#include "selfconv/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "selfconv/errors.hpp"

namespace selfconv {

ImageTensor::ImageTensor(std::size_t height, std::size_t width, std::size_t channels, double fill)
    : height_(height), width_(width), channels_(channels), data_(height * width * channels, fill) {}

ImageTensor::ImageTensor(std::size_t height, std::size_t width, std::size_t channels,
                         std::vector<double> data)
    : height_(height), width_(width), channels_(channels), data_(std::move(data)) {
  if (data_.size() != height_ * width_ * channels_) {
    throw ShapeError("image data length " + std::to_string(data_.size()) + " does not match " +
                     std::to_string(height_) + "x" + std::to_string(width_) + "x" +
                     std::to_string(channels_));
  }
  if (!std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); })) {
    throw NumericError("image contains non-finite values");
  }
}

ImageTensor ImageTensor::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t h = rows.size();
  const std::size_t w = h ? rows.begin()->size() : 0;
  std::vector<double> data;
  data.reserve(h * w);
  for (const auto& row : rows) {
    if (row.size() != w) throw ShapeError("ragged rows");
    data.insert(data.end(), row.begin(), row.end());
  }
  return ImageTensor(h, w, 1, std::move(data));
}

void validate_geometry(const ImageTensor& img, const PatchGeometry& geom) {
  if (geom.side == 0 || geom.depth == 0 || geom.stride == 0) {
    throw BoundsError("patch side, depth and stride must be positive");
  }
  if (geom.side > img.height() || geom.side > img.width()) {
    throw BoundsError("patch side " + std::to_string(geom.side) + " exceeds image " +
                      std::to_string(img.height()) + "x" + std::to_string(img.width()));
  }
  if (geom.depth > img.channels()) {
    throw BoundsError("patch depth " + std::to_string(geom.depth) + " exceeds " +
                      std::to_string(img.channels()) + " channels");
  }
}

void validate_ref(const ImageTensor& img, const PatchGeometry& geom, const PatchRef& ref) {
  validate_geometry(img, geom);
  if (ref.row + geom.side > img.height() || ref.col + geom.side > img.width() ||
      ref.chan + geom.depth > img.channels()) {
    throw BoundsError("patch at (" + std::to_string(ref.row) + "," + std::to_string(ref.col) +
                      "," + std::to_string(ref.chan) + ") leaves the image");
  }
}

PositionRange full_range(const ImageTensor& img, const PatchGeometry& geom) {
  validate_geometry(img, geom);
  return {0, img.height() - geom.side, 0, img.width() - geom.side, 0,
          img.channels() - geom.depth};
}

namespace {

// Inclusive [lo, hi] of extent positions centred on pos, clipped to [0, max_pos].
std::pair<std::size_t, std::size_t> centred_span(std::size_t pos, std::size_t extent,
                                                 std::size_t max_pos) {
  if (extent == SearchWindow::kWhole || extent > 2 * (max_pos + 1)) return {0, max_pos};
  if (extent == 0) extent = 1;
  const std::size_t before = (extent - 1) / 2;
  const std::size_t after = extent - 1 - before;
  const std::size_t lo = pos > before ? pos - before : 0;
  const std::size_t hi = std::min(max_pos, pos + after);
  return {lo, hi};
}

}  // namespace

PositionRange window_range(const ImageTensor& img, const PatchGeometry& geom,
                           const SearchWindow& win, const PatchRef& ref) {
  const PositionRange all = full_range(img, geom);
  validate_ref(img, geom, ref);
  PositionRange r;
  std::tie(r.row_lo, r.row_hi) = centred_span(ref.row, win.rows, all.row_hi);
  std::tie(r.col_lo, r.col_hi) = centred_span(ref.col, win.cols, all.col_hi);
  std::tie(r.chan_lo, r.chan_hi) = centred_span(ref.chan, std::max<std::size_t>(win.chan_span, 1),
                                                all.chan_hi);
  return r;
}

PatchTensor extract_patch(const ImageTensor& img, const PatchRef& ref, const PatchGeometry& geom) {
  validate_ref(img, geom, ref);
  PatchTensor out(geom.side, geom.side, geom.depth);
  for (std::size_t c = 0; c < geom.depth; ++c) {
    for (std::size_t r = 0; r < geom.side; ++r) {
      for (std::size_t q = 0; q < geom.side; ++q) {
        out(r, q, c) = img(ref.row + r, ref.col + q, ref.chan + c);
      }
    }
  }
  return out;
}

std::vector<double> vectorize(const PatchTensor& patch) {
  const std::size_t h = patch.height(), w = patch.width();
  std::vector<double> out(patch.size());
  std::size_t k = 0;
  for (std::size_t c = 0; c < patch.channels(); ++c) {
    for (std::size_t q = 0; q < w; ++q) {
      for (std::size_t r = 0; r < h; ++r) out[k++] = patch(r, q, c);
    }
  }
  return out;
}

PatchTensor devectorize(std::span<const double> vec, std::size_t side, std::size_t depth) {
  if (vec.size() != side * side * depth) throw ShapeError("vector length does not match patch");
  PatchTensor out(side, side, depth);
  std::size_t k = 0;
  for (std::size_t c = 0; c < depth; ++c) {
    for (std::size_t q = 0; q < side; ++q) {
      for (std::size_t r = 0; r < side; ++r) out(r, q, c) = vec[k++];
    }
  }
  return out;
}

void vectorize_patch(const ImageTensor& img, const PatchRef& ref, const PatchGeometry& geom,
                     std::span<double> out) {
  if (out.size() != geom.length()) throw ShapeError("output span does not match patch length");
  std::size_t k = 0;
  for (std::size_t c = 0; c < geom.depth; ++c) {
    for (std::size_t q = 0; q < geom.side; ++q) {
      for (std::size_t r = 0; r < geom.side; ++r) out[k++] = img(ref.row + r, ref.col + q, ref.chan + c);
    }
  }
}

ImageTensor zero_pad(const PatchTensor& patch, std::size_t target_h, std::size_t target_w) {
  if (target_h < patch.height() || target_w < patch.width()) {
    throw BoundsError("padding target smaller than patch");
  }
  ImageTensor out(target_h, target_w, patch.channels());
  for (std::size_t c = 0; c < patch.channels(); ++c) {
    for (std::size_t r = 0; r < patch.height(); ++r) {
      for (std::size_t q = 0; q < patch.width(); ++q) out(r, q, c) = patch(r, q, c);
    }
  }
  return out;
}

std::vector<PatchRef> valid_positions(const ImageTensor& img, const PatchGeometry& geom,
                                      const SearchWindow& win, const PatchRef& ref) {
  const PositionRange r = window_range(img, geom, win, ref);
  std::vector<PatchRef> out;
  out.reserve(r.count());
  for (std::size_t row = r.row_lo; row <= r.row_hi; ++row) {
    for (std::size_t col = r.col_lo; col <= r.col_hi; ++col) {
      for (std::size_t chan = r.chan_lo; chan <= r.chan_hi; ++chan) out.push_back({row, col, chan});
    }
  }
  return out;
}

namespace {

std::vector<std::size_t> lattice(std::size_t max_pos, std::size_t stride, bool include_last) {
  std::vector<std::size_t> out;
  for (std::size_t p = 0; p <= max_pos; p += stride) out.push_back(p);
  if (include_last && out.back() != max_pos) out.push_back(max_pos);
  return out;
}

}  // namespace

std::vector<PatchRef> reference_grid(const ImageTensor& img, const PatchGeometry& geom,
                                     bool include_last) {
  const PositionRange all = full_range(img, geom);
  const auto rows = lattice(all.row_hi, geom.stride, include_last);
  const auto cols = lattice(all.col_hi, geom.stride, include_last);
  std::vector<PatchRef> out;
  out.reserve(rows.size() * cols.size() * all.chans());
  for (std::size_t r : rows) {
    for (std::size_t q : cols) {
      for (std::size_t c = all.chan_lo; c <= all.chan_hi; ++c) out.push_back({r, q, c});
    }
  }
  return out;
}

PositionMap squared_norm_map(const ImageTensor& img, const PatchGeometry& geom) {
  const PositionRange all = full_range(img, geom);
  const std::size_t h = img.height(), w = img.width(), s = geom.side;

  // Per-channel patch sums of squares from a (h+1) x (w+1) summed-area table.
  // Long double keeps the four-corner differences exact for 8-bit data and
  // tight for real-valued data on large images.
  std::vector<PositionMap> slabs;
  slabs.reserve(img.channels());
  std::vector<long double> sat((h + 1) * (w + 1));
  for (std::size_t c = 0; c < img.channels(); ++c) {
    std::fill(sat.begin(), sat.end(), 0.0L);
    for (std::size_t r = 0; r < h; ++r) {
      long double row_sum = 0.0L;
      for (std::size_t q = 0; q < w; ++q) {
        const long double v = img(r, q, c);
        row_sum += v * v;
        sat[(r + 1) * (w + 1) + q + 1] = sat[r * (w + 1) + q + 1] + row_sum;
      }
    }
    PositionMap slab(PositionRange{0, all.row_hi, 0, all.col_hi, 0, 0});
    for (std::size_t r = 0; r <= all.row_hi; ++r) {
      for (std::size_t q = 0; q <= all.col_hi; ++q) {
        const long double v = sat[(r + s) * (w + 1) + q + s] - sat[r * (w + 1) + q + s] -
                              sat[(r + s) * (w + 1) + q] + sat[r * (w + 1) + q];
        slab.at(r, q) = static_cast<double>(v);
      }
    }
    slabs.push_back(std::move(slab));
  }

  PositionMap out(all);
  for (std::size_t k = all.chan_lo; k <= all.chan_hi; ++k) {
    for (std::size_t r = 0; r <= all.row_hi; ++r) {
      for (std::size_t q = 0; q <= all.col_hi; ++q) {
        double acc = 0.0;
        for (std::size_t d = 0; d < geom.depth; ++d) acc += slabs[k + d].at(r, q);
        out.at(r, q, k) = acc;
      }
    }
  }
  return out;
}

Aggregator::Aggregator(std::size_t height, std::size_t width, std::size_t channels)
    : height_(height),
      width_(width),
      channels_(channels),
      sum_(height * width * channels, 0.0),
      weight_(height * width * channels, 0.0) {}

void Aggregator::deposit(const PatchTensor& patch, const PatchRef& at) {
  if (patch.height() != patch.width()) throw ShapeError("patches must be square");
  deposit_vector(vectorize(patch), patch.height(), patch.channels(), at);
}

void Aggregator::deposit_vector(std::span<const double> vec, std::size_t side, std::size_t depth,
                                const PatchRef& at) {
  if (vec.size() != side * side * depth) throw ShapeError("vector length does not match patch");
  if (at.row + side > height_ || at.col + side > width_ || at.chan + depth > channels_) {
    throw BoundsError("deposit leaves the canvas");
  }
  std::size_t k = 0;
  for (std::size_t c = 0; c < depth; ++c) {
    for (std::size_t q = 0; q < side; ++q) {
      for (std::size_t r = 0; r < side; ++r) {
        const std::size_t idx = ((at.chan + c) * height_ + at.row + r) * width_ + at.col + q;
        sum_[idx] += vec[k++];
        weight_[idx] += 1.0;
      }
    }
  }
  ++deposits_;
}

bool Aggregator::Result::fully_covered() const noexcept {
  return std::all_of(coverage.begin(), coverage.end(), [](std::uint8_t v) { return v != 0; });
}

Aggregator::Result Aggregator::finalize(double fill) const {
  if (deposits_ == 0) throw EmptyAggregation("no patches were deposited");
  Result res{ImageTensor(height_, width_, channels_), std::vector<std::uint8_t>(sum_.size(), 0)};
  auto out = res.image.data();
  for (std::size_t i = 0; i < sum_.size(); ++i) {
    if (weight_[i] > 0.0) {
      out[i] = sum_[i] / weight_[i];
      res.coverage[i] = 1;
    } else {
      out[i] = fill;
    }
  }
  return res;
}

Aggregator::Result aggregate(std::span<const PlacedPatch> groups, std::size_t canvas_h,
                             std::size_t canvas_w, std::size_t channels) {
  if (groups.empty()) throw EmptyAggregation("empty group list");
  Aggregator acc(canvas_h, canvas_w, channels);
  for (const auto& [patch, ref] : groups) acc.deposit(patch, ref);
  return acc.finalize();
}

}  // namespace selfconv
