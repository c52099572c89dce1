#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <vector>

#include "selfconv/similarity.hpp"
#include "selfconv/tensor.hpp"

namespace selfconv {

struct LowRankResult {
  Eigen::MatrixXd approx;
  std::size_t rank = 0;
};

/// Best approximation of z under ||z - d||_F^2 + theta^2 rank(d): singular
/// values below theta are zeroed, the rest kept. Throws NumericError on
/// non-finite input.
LowRankResult lowrank_approx(const Eigen::MatrixXd& z, double theta);

/// Element-wise hard threshold: entries with |v| >= threshold survive.
Eigen::MatrixXd hard_threshold(const Eigen::MatrixXd& v, double threshold);

/// Exact transform-domain sparse code H_beta(W z). Throws ShapeError when
/// z does not match the transform.
Eigen::VectorXd sparse_code(const Eigen::MatrixXd& w, const Eigen::VectorXd& z, double beta);

/// Orthonormal DCT-II matrix; row k is the k-th basis vector.
Eigen::MatrixXd dct_matrix(std::size_t n);

/// Separable DCT over a side x side x depth patch stacked K times, in the
/// first-mode vectorization order used for patch groups.
Eigen::MatrixXd separable_dct(std::size_t side, std::size_t depth, std::size_t k);

/// Online sparsifying transform: W (orthonormal), the running average
/// V_t = sum z alpha^T / t and the sample count t.
class TransformState {
 public:
  TransformState() = default;
  explicit TransformState(Eigen::MatrixXd initial);

  static TransformState dct(std::size_t side, std::size_t depth, std::size_t k);

  const Eigen::MatrixXd& transform() const noexcept { return w_; }
  const Eigen::MatrixXd& accumulator() const noexcept { return v_; }
  std::size_t samples() const noexcept { return t_; }
  Eigen::Index dim() const noexcept { return w_.rows(); }

  /// V <- (1 - 1/t) V + z alpha^T / t, then W <- Psi Phi^T from V = Phi S Psi^T.
  void update(const Eigen::VectorXd& z, const Eigen::VectorXd& alpha);
  /// Mini-batch form: columns of z and alpha are B samples; V is updated once
  /// with weight B/t and the transform refreshed once.
  void update_batch(const Eigen::MatrixXd& z, const Eigen::MatrixXd& alpha);

  /// Back to the initial transform with an empty accumulator.
  void reset();

  /// Closed-form minimizer of sum ||W z - alpha||^2 over orthonormal W given
  /// the accumulated z alpha^T statistics.
  static Eigen::MatrixXd procrustes(const Eigen::MatrixXd& v);

 private:
  Eigen::MatrixXd initial_;
  Eigen::MatrixXd w_;
  Eigen::MatrixXd v_;
  std::size_t t_ = 0;
};

TransformState transform_update(TransformState state, const Eigen::VectorXd& z,
                                const Eigen::VectorXd& alpha);

/// Least-squares group estimate [Y + gl D + gs vec^-1(W^T alpha)] / (1 + gl + gs).
PatchGroup reconstruct_group(const PatchGroup& y, const Eigen::MatrixXd& d,
                             const Eigen::MatrixXd& w, const Eigen::VectorXd& alpha,
                             double gamma_l, double gamma_s);

/// Scaling applied on top of factor * sigma when deriving a threshold.
enum class ThetaScale {
  unit,    // 1
  matrix,  // sqrt(rows) + sqrt(cols) of the np x K group matrix
  paper,   // sqrt(patch pixels) + sqrt(image pixels)
};

struct ThresholdSchedule {
  double factor = 0.0;
  ThetaScale scale = ThetaScale::unit;
};

struct DenoiserConfig {
  double sigma = 20.0;
  std::size_t patch_side = 6;
  std::size_t patch_depth = 0;  // 0 means every channel
  std::size_t stride = 2;
  std::size_t window = 30;
  SearchMode search = SearchMode::search2d;
  std::size_t chan_span = 1;
  std::size_t k = 25;
  double gamma_l = 1.0;
  double gamma_s = 1.0;
  ThresholdSchedule beta_schedule{0.9, ThetaScale::unit};
  ThresholdSchedule theta_schedule{0.8, ThetaScale::matrix};
  std::size_t passes = 6;
  double psi = 0.71;
  double mix_prev = 0.9;
  double mix_noisy = 0.1;
  std::size_t minibatch = 0;  // 0 picks a batch size from the transform size
  bool reset_transform_between_passes = false;
  Engine engine = Engine::fft;
  std::size_t threads = 1;

  /// Published settings: one pass with beta = 3.3 sigma, theta = 1.5 sigma and
  /// K = 20 below sigma 20; six passes with beta = 0.9 sigma_t,
  /// theta = 0.8 sigma_t (sqrt(np) + sqrt(K)) and K = 25 otherwise.
  static DenoiserConfig for_sigma(double sigma);

  /// Throws ConfigError on an inconsistent configuration.
  void validate() const;

  PatchGeometry geometry(const ImageTensor& img) const;
};

struct PassThresholds {
  double beta = 0.0;
  double theta = 0.0;
};

PassThresholds pass_thresholds(const DenoiserConfig& cfg, double sigma_level,
                               const ImageTensor& img);

/// Groups per transform update: cfg.minibatch, or for 0 a size that keeps
/// the number of npK x npK decompositions per pass within a fixed budget.
std::size_t resolve_minibatch(const DenoiserConfig& cfg, std::size_t transform_dim,
                              std::size_t groups);

struct PassStats {
  std::size_t groups = 0;
  std::size_t transform_updates = 0;
  double bm_seconds = 0.0;
  double total_seconds = 0.0;
};

struct PassResult {
  ImageTensor estimate;
  PassStats stats;
};

/// One sweep over all reference patches in raster order: match, low-rank
/// approximation, sparse coding, transform update, re-coding with the new
/// transform, group reconstruction and aggregation at every matched location.
PassResult denoise_pass(const ImageTensor& noisy, const DenoiserConfig& cfg,
                        TransformState& state, double sigma_level);

/// psi * sqrt(sigma^2 - ||noisy - estimate||^2 / N), clamped at 0.
double estimate_sigma(const ImageTensor& noisy, const ImageTensor& estimate, double sigma,
                      double psi);

/// mix_prev * previous + mix_noisy * noisy.
ImageTensor mix_inputs(const ImageTensor& previous, const ImageTensor& noisy,
                       const DenoiserConfig& cfg);

struct DenoiseReport {
  ImageTensor image;
  std::size_t passes_run = 0;
  std::vector<double> sigma_levels;  // noise level used by each pass
  PassStats stats;                   // summed over passes
  TransformState final_state;
};

DenoiseReport denoise_with_report(const ImageTensor& noisy, const DenoiserConfig& cfg);
ImageTensor denoise(const ImageTensor& noisy, const DenoiserConfig& cfg);

}  // namespace selfconv
