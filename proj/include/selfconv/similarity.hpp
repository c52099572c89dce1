#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <memory>
#include <optional>
#include <string_view>
#include <vector>

#include "selfconv/spectral.hpp"
#include "selfconv/tensor.hpp"

namespace selfconv {

enum class Metric { euclidean, ncc };
enum class Engine { naive, spatial, fft };
enum class MetricStage { raw_correlation, euclidean_distance, ncc_score, bm_objective };
enum class SearchMode { search2d, search3d };

/// How the fft engine sizes its transforms.
enum class FftMode {
  automatic,    // whole image when the window spans more than a quarter of it
  whole_image,  // one precomputed image spectrum, windows sliced from it
  per_window,   // one transform grid per search window
};

std::string_view to_string(Metric m);
std::string_view to_string(Engine e);
Metric parse_metric(std::string_view s);
Engine parse_engine(std::string_view s);

/// Guard on the NCC denominator.
inline constexpr double kNccEpsilon = 1e-12;

/// Multiply-add tally used to check the cost model of each engine.
struct OpCounter {
  double multiply_adds = 0.0;
};

struct SimilarityMap {
  PositionMap map;
  PatchRef ref;
  MetricStage stage = MetricStage::raw_correlation;
};

/// Top-K matches for one reference patch. Euclidean scores are squared
/// distances (ascending), NCC scores are correlations (descending). When
/// produced by top_k_select directly, scores are objective values.
struct MatchSet {
  PatchRef ref;
  std::vector<PatchRef> indices;
  std::vector<double> scores;
  Metric metric = Metric::euclidean;
  MetricStage score_stage = MetricStage::euclidean_distance;
  std::size_t k = 0;
  bool short_set = false;

  std::size_t size() const noexcept { return indices.size(); }
};

struct WeightMap {
  PositionMap weights;
  PatchRef ref;
  double bandwidth = 1.0;
};

/// Vectorized matched patches, one column per match in match order.
struct PatchGroup {
  Eigen::MatrixXd data;
  std::vector<PatchRef> refs;
};

/// Direct correlation of patch with every anchor in positions. Channels are
/// summed when the patch has depth > 1.
SimilarityMap selfconv_spatial(const ImageTensor& img, const PatchTensor& patch,
                               const PositionRange& positions, const PatchRef& ref = {},
                               OpCounter* counter = nullptr);
SimilarityMap selfconv_spatial(const ImageTensor& img, const PatchRef& ref,
                               const PatchGeometry& geom, const SearchWindow& win);

/// Correlation through the frequency domain over every linear (non-wrapping)
/// anchor of the spectrum's grid. img_spectrum is fft2 of the searched
/// region; channels of the patch are summed, and every channel offset that
/// fits is evaluated.
SimilarityMap selfconv_fft(const Spectrum& img_spectrum, const PatchTensor& patch,
                           const PatchRef& ref = {});

/// Squared Euclidean distance from the three-term expansion, clamped at 0.
/// norms must cover every anchor of c.
SimilarityMap euclidean_map(const SimilarityMap& c, const PositionMap& norms, double ref_norm_sq);

/// Normalized cross-correlation score (larger is more similar).
/// Throws DegeneratePatchError if ref_norm == 0.
SimilarityMap ncc_map(const SimilarityMap& c, const PositionMap& norms, double ref_norm,
                      double eps = kNccEpsilon);

/// Non-local means weights exp(-d/b^2) normalized over the window.
WeightMap nlm_weights(const SimilarityMap& distances, double bandwidth);

/// K anchors of largest objective value, ties broken by raster order.
MatchSet top_k_select(const SimilarityMap& objective, std::size_t k);

struct MatcherOptions {
  Engine engine = Engine::fft;
  FftMode fft_mode = FftMode::automatic;
  /// Grow transform grids to 2-3-5-7 smooth sizes.
  bool fast_sizes = false;
  /// Round correlations to integers when the image is integer valued and the
  /// transform error bound allows it, making the fft engine exact on 8-bit data.
  bool exact_integer_rounding = true;
};

/// Block matcher over one image. Precomputes what the engine needs (patch
/// norm map, and for whole-image fft mode the image spectrum) once; every
/// query afterwards is const and safe to run concurrently.
class BlockMatcher {
 public:
  BlockMatcher(const ImageTensor& img, const PatchGeometry& geom, const SearchWindow& win,
               MatcherOptions opts = {});
  ~BlockMatcher();
  BlockMatcher(BlockMatcher&&) noexcept;
  BlockMatcher& operator=(BlockMatcher&&) noexcept;

  const ImageTensor& image() const noexcept;
  const PatchGeometry& geometry() const noexcept;
  const SearchWindow& window() const noexcept;
  const PositionMap& norms() const noexcept;
  Engine engine() const noexcept;
  bool uses_whole_image_spectrum() const noexcept;
  /// Work spent on precomputation (image spectra), in multiply-adds.
  double setup_cost() const noexcept;

  /// Raw correlation of the patch at ref over its window.
  SimilarityMap correlate(const PatchRef& ref, OpCounter* counter = nullptr) const;

  MatchSet match(const PatchRef& ref, std::size_t k, Metric metric,
                 OpCounter* counter = nullptr) const;

  /// Matches for every ref, in input order. Results do not depend on threads.
  std::vector<MatchSet> match_all(const std::vector<PatchRef>& refs, std::size_t k, Metric metric,
                                  std::size_t threads = 1, OpCounter* counter = nullptr) const;

  /// NLM weights over the window via correlation and the distance expansion.
  WeightMap nlm(const PatchRef& ref, double bandwidth) const;

  class Workspace;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

MatchSet block_match(const ImageTensor& img, const PatchRef& ref, const PatchGeometry& geom,
                     const SearchWindow& win, std::size_t k, Metric metric, Engine engine);

/// Multi-channel Euclidean matching of 3D patches. search2d keeps the
/// reference channel and sums channel-wise correlations; search3d also
/// slides across channels within win.chan_span.
MatchSet selfconv_mm(const ImageTensor& tensor, const PatchRef& ref, const PatchGeometry& geom,
                     const SearchWindow& win, std::size_t k, SearchMode mode,
                     Engine engine = Engine::fft);

/// Window used by selfconv_mm; throws ConfigError for an invalid search3d setup.
SearchWindow multimodal_window(const ImageTensor& tensor, const PatchGeometry& geom,
                               const SearchWindow& win, SearchMode mode);

PatchGroup group_patches(const ImageTensor& tensor, const MatchSet& matches,
                         const PatchGeometry& geom);

}  // namespace selfconv
