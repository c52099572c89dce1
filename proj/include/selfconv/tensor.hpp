#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <span>
#include <utility>
#include <vector>

namespace selfconv {

/// Real-valued H x W x C raster. Storage is planar: channel-major, then
/// row-major within each channel. Intensities live on the 0..255 scale.
class ImageTensor {
 public:
  ImageTensor() = default;
  ImageTensor(std::size_t height, std::size_t width, std::size_t channels = 1, double fill = 0.0);
  /// Throws ShapeError on a length mismatch and NumericError on non-finite values.
  ImageTensor(std::size_t height, std::size_t width, std::size_t channels, std::vector<double> data);

  /// Single-channel image from nested rows; handy for small fixtures.
  static ImageTensor from_rows(std::initializer_list<std::initializer_list<double>> rows);

  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t channels() const noexcept { return channels_; }
  std::size_t size() const noexcept { return data_.size(); }
  std::size_t plane_size() const noexcept { return height_ * width_; }
  bool empty() const noexcept { return data_.empty(); }

  double operator()(std::size_t row, std::size_t col, std::size_t chan = 0) const noexcept {
    return data_[(chan * height_ + row) * width_ + col];
  }
  double& operator()(std::size_t row, std::size_t col, std::size_t chan = 0) noexcept {
    return data_[(chan * height_ + row) * width_ + col];
  }

  std::span<const double> data() const noexcept { return data_; }
  std::span<double> data() noexcept { return data_; }
  std::span<const double> channel(std::size_t chan) const noexcept {
    return std::span<const double>(data_).subspan(chan * plane_size(), plane_size());
  }
  std::span<double> channel(std::size_t chan) noexcept {
    return std::span<double>(data_).subspan(chan * plane_size(), plane_size());
  }

  bool same_shape(const ImageTensor& other) const noexcept {
    return height_ == other.height_ && width_ == other.width_ && channels_ == other.channels_;
  }

  friend bool operator==(const ImageTensor&, const ImageTensor&) = default;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::size_t channels_ = 0;
  std::vector<double> data_;
};

/// A side x side x depth block; same layout as ImageTensor.
using PatchTensor = ImageTensor;

struct PatchGeometry {
  std::size_t side = 1;
  std::size_t depth = 1;
  std::size_t stride = 1;

  std::size_t pixels() const noexcept { return side * side; }
  std::size_t length() const noexcept { return side * side * depth; }
};

/// Top-left anchor of a patch plus the first channel it covers.
/// Ordering is raster order: row, then column, then channel.
struct PatchRef {
  std::size_t row = 0;
  std::size_t col = 0;
  std::size_t chan = 0;

  friend auto operator<=>(const PatchRef&, const PatchRef&) = default;
};

/// Candidate-position window centred on a reference anchor. Extents count
/// patch positions, not pixels: an extent of 1 admits only the reference.
struct SearchWindow {
  static constexpr std::size_t kWhole = std::numeric_limits<std::size_t>::max();

  std::size_t rows = kWhole;
  std::size_t cols = kWhole;
  std::size_t chan_span = 1;

  static SearchWindow whole(std::size_t chan_span = 1) { return {kWhole, kWhole, chan_span}; }
  static SearchWindow square(std::size_t extent, std::size_t chan_span = 1) {
    return {extent, extent, chan_span};
  }
  static SearchWindow from_half_width(std::size_t half_height, std::size_t half_width,
                                      std::size_t chan_span = 1) {
    return {2 * half_height + 1, 2 * half_width + 1, chan_span};
  }

  bool covers_whole_image() const noexcept { return rows == kWhole && cols == kWhole; }
};

/// Inclusive box of patch anchors.
struct PositionRange {
  std::size_t row_lo = 0, row_hi = 0;
  std::size_t col_lo = 0, col_hi = 0;
  std::size_t chan_lo = 0, chan_hi = 0;

  std::size_t rows() const noexcept { return row_hi - row_lo + 1; }
  std::size_t cols() const noexcept { return col_hi - col_lo + 1; }
  std::size_t chans() const noexcept { return chan_hi - chan_lo + 1; }
  std::size_t count() const noexcept { return rows() * cols() * chans(); }
  bool contains(const PatchRef& p) const noexcept {
    return p.row >= row_lo && p.row <= row_hi && p.col >= col_lo && p.col <= col_hi &&
           p.chan >= chan_lo && p.chan <= chan_hi;
  }
};

/// Real values indexed by patch anchor over a PositionRange. Storage order is
/// chan-major then row-major, but iteration helpers walk in raster order.
struct PositionMap {
  PositionRange range;
  std::vector<double> values;

  PositionMap() = default;
  explicit PositionMap(const PositionRange& r, double fill = 0.0)
      : range(r), values(r.count(), fill) {}

  std::size_t index(std::size_t row, std::size_t col, std::size_t chan = 0) const noexcept {
    return ((chan - range.chan_lo) * range.rows() + (row - range.row_lo)) * range.cols() +
           (col - range.col_lo);
  }
  double at(const PatchRef& p) const noexcept { return values[index(p.row, p.col, p.chan)]; }
  double& at(const PatchRef& p) noexcept { return values[index(p.row, p.col, p.chan)]; }
  double at(std::size_t row, std::size_t col, std::size_t chan = 0) const noexcept {
    return values[index(row, col, chan)];
  }
  double& at(std::size_t row, std::size_t col, std::size_t chan = 0) noexcept {
    return values[index(row, col, chan)];
  }
};

/// Throws BoundsError unless the geometry fits the image.
void validate_geometry(const ImageTensor& img, const PatchGeometry& geom);
/// Throws BoundsError unless the patch anchored at ref lies inside the image.
void validate_ref(const ImageTensor& img, const PatchGeometry& geom, const PatchRef& ref);

/// Every anchor of a geom-sized patch inside the image.
PositionRange full_range(const ImageTensor& img, const PatchGeometry& geom);

/// Anchors admitted by win around ref, clipped to the image. Always contains ref.
PositionRange window_range(const ImageTensor& img, const PatchGeometry& geom,
                           const SearchWindow& win, const PatchRef& ref);

PatchTensor extract_patch(const ImageTensor& img, const PatchRef& ref, const PatchGeometry& geom);

/// First-mode unfolding: row index fastest, then column, then channel.
std::vector<double> vectorize(const PatchTensor& patch);
PatchTensor devectorize(std::span<const double> vec, std::size_t side, std::size_t depth);

/// Writes vectorize(extract_patch(img, ref, geom)) into out without the temporary.
void vectorize_patch(const ImageTensor& img, const PatchRef& ref, const PatchGeometry& geom,
                     std::span<double> out);

/// Patch placed at the top-left of a zero target_h x target_w canvas.
ImageTensor zero_pad(const PatchTensor& patch, std::size_t target_h, std::size_t target_w);

/// Anchors of window_range in raster order.
std::vector<PatchRef> valid_positions(const ImageTensor& img, const PatchGeometry& geom,
                                      const SearchWindow& win, const PatchRef& ref);

/// Anchors on the stride lattice over the whole image, raster order. With
/// include_last the final row/column anchor is appended when the lattice
/// misses it, so every pixel is covered.
std::vector<PatchRef> reference_grid(const ImageTensor& img, const PatchGeometry& geom,
                                     bool include_last);

/// Sum of squared intensities of every patch, via a summed-area table of the
/// squared image per channel.
PositionMap squared_norm_map(const ImageTensor& img, const PatchGeometry& geom);

/// Accumulates patches at anchors and normalizes by per-pixel deposit counts.
class Aggregator {
 public:
  Aggregator(std::size_t height, std::size_t width, std::size_t channels);

  void deposit(const PatchTensor& patch, const PatchRef& at);
  /// Deposit a first-mode vectorized side x side x depth patch.
  void deposit_vector(std::span<const double> vec, std::size_t side, std::size_t depth,
                      const PatchRef& at);

  std::size_t deposits() const noexcept { return deposits_; }
  std::span<const double> weights() const noexcept { return weight_; }

  struct Result {
    ImageTensor image;
    std::vector<std::uint8_t> coverage;  // 1 where at least one deposit landed
    bool fully_covered() const noexcept;
  };
  /// Uncovered pixels take fill. Throws EmptyAggregation if nothing was deposited.
  Result finalize(double fill = 0.0) const;

 private:
  std::size_t height_, width_, channels_;
  std::vector<double> sum_;
  std::vector<double> weight_;
  std::size_t deposits_ = 0;
};

using PlacedPatch = std::pair<PatchTensor, PatchRef>;

Aggregator::Result aggregate(std::span<const PlacedPatch> groups, std::size_t canvas_h,
                             std::size_t canvas_w, std::size_t channels);

}  // namespace selfconv
