#include "selfconv/strollr.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>

#include "selfconv/errors.hpp"

namespace selfconv {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

void require_finite(const Eigen::MatrixXd& m, const char* what) {
  if (!m.allFinite()) throw NumericError(std::string(what) + " has non-finite entries");
}

}  // namespace

LowRankResult lowrank_approx(const Eigen::MatrixXd& z, double theta) {
  require_finite(z, "low-rank input");
  LowRankResult out{Eigen::MatrixXd::Zero(z.rows(), z.cols()), 0};
  if (z.size() == 0) return out;
  Eigen::BDCSVD<Eigen::MatrixXd> svd(z, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& omega = svd.singularValues();
  const double tol = static_cast<double>(std::max(z.rows(), z.cols())) *
                     std::numeric_limits<double>::epsilon() * (omega.size() ? omega(0) : 0.0);
  Eigen::VectorXd kept = Eigen::VectorXd::Zero(omega.size());
  for (Eigen::Index i = 0; i < omega.size(); ++i) {
    if (omega(i) >= theta) {
      kept(i) = omega(i);
      if (omega(i) > tol) ++out.rank;
    }
  }
  out.approx = svd.matrixU() * kept.asDiagonal() * svd.matrixV().transpose();
  return out;
}

Eigen::MatrixXd hard_threshold(const Eigen::MatrixXd& v, double threshold) {
  return v.unaryExpr([threshold](double x) { return std::abs(x) >= threshold ? x : 0.0; });
}

Eigen::VectorXd sparse_code(const Eigen::MatrixXd& w, const Eigen::VectorXd& z, double beta) {
  if (w.cols() != z.size()) throw ShapeError("sparse_code: vector does not match transform");
  return hard_threshold(w * z, beta);
}

Eigen::MatrixXd dct_matrix(std::size_t n) {
  const auto dim = static_cast<Eigen::Index>(n);
  Eigen::MatrixXd d(dim, dim);
  for (Eigen::Index k = 0; k < dim; ++k) {
    const double scale = std::sqrt((k == 0 ? 1.0 : 2.0) / static_cast<double>(n));
    for (Eigen::Index i = 0; i < dim; ++i) {
      d(k, i) = scale * std::cos(std::numbers::pi * (2.0 * static_cast<double>(i) + 1.0) *
                                 static_cast<double>(k) / (2.0 * static_cast<double>(n)));
    }
  }
  return d;
}

namespace {

// a (x) b with b's index running fastest.
Eigen::MatrixXd kron(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  Eigen::MatrixXd out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

}  // namespace

Eigen::MatrixXd separable_dct(std::size_t side, std::size_t depth, std::size_t k) {
  // Group vector index = row + side*(col + side*(chan + depth*member)).
  const Eigen::MatrixXd spatial = kron(dct_matrix(side), dct_matrix(side));
  return kron(dct_matrix(k), kron(dct_matrix(depth), spatial));
}

TransformState::TransformState(Eigen::MatrixXd initial)
    : initial_(std::move(initial)),
      w_(initial_),
      v_(Eigen::MatrixXd::Zero(initial_.rows(), initial_.cols())) {
  if (initial_.rows() != initial_.cols()) throw ShapeError("transform must be square");
}

TransformState TransformState::dct(std::size_t side, std::size_t depth, std::size_t k) {
  return TransformState(separable_dct(side, depth, k));
}

Eigen::MatrixXd TransformState::procrustes(const Eigen::MatrixXd& v) {
  require_finite(v, "transform accumulator");
  Eigen::BDCSVD<Eigen::MatrixXd> svd(v, Eigen::ComputeFullU | Eigen::ComputeFullV);
  // V = Phi S Psi^T  =>  W = Psi Phi^T
  return svd.matrixV() * svd.matrixU().transpose();
}

void TransformState::update(const Eigen::VectorXd& z, const Eigen::VectorXd& alpha) {
  if (z.size() != dim() || alpha.size() != dim()) {
    throw ShapeError("transform update: sample does not match transform");
  }
  ++t_;
  const double inv_t = 1.0 / static_cast<double>(t_);
  v_ *= 1.0 - inv_t;
  v_.noalias() += inv_t * z * alpha.transpose();
  w_ = procrustes(v_);
}

void TransformState::update_batch(const Eigen::MatrixXd& z, const Eigen::MatrixXd& alpha) {
  if (z.rows() != dim() || alpha.rows() != dim() || z.cols() != alpha.cols()) {
    throw ShapeError("transform update: batch does not match transform");
  }
  if (z.cols() == 0) return;
  if (z.cols() == 1) {
    update(z.col(0), alpha.col(0));
    return;
  }
  t_ += static_cast<std::size_t>(z.cols());
  const double inv_t = 1.0 / static_cast<double>(t_);
  v_ *= 1.0 - static_cast<double>(z.cols()) * inv_t;
  v_.noalias() += inv_t * z * alpha.transpose();
  w_ = procrustes(v_);
}

void TransformState::reset() {
  w_ = initial_;
  v_.setZero();
  t_ = 0;
}

TransformState transform_update(TransformState state, const Eigen::VectorXd& z,
                                const Eigen::VectorXd& alpha) {
  state.update(z, alpha);
  return state;
}

PatchGroup reconstruct_group(const PatchGroup& y, const Eigen::MatrixXd& d,
                             const Eigen::MatrixXd& w, const Eigen::VectorXd& alpha,
                             double gamma_l, double gamma_s) {
  if (d.rows() != y.data.rows() || d.cols() != y.data.cols()) {
    throw ShapeError("low-rank estimate does not match the group");
  }
  if (w.rows() != y.data.size() || w.cols() != y.data.size() || alpha.size() != y.data.size()) {
    throw ShapeError("transform or code does not match the group");
  }
  const Eigen::VectorXd synth = w.transpose() * alpha;
  const Eigen::Map<const Eigen::MatrixXd> synth_group(synth.data(), y.data.rows(), y.data.cols());
  PatchGroup out{(y.data + gamma_l * d + gamma_s * synth_group) / (1.0 + gamma_l + gamma_s), y.refs};
  return out;
}

DenoiserConfig DenoiserConfig::for_sigma(double sigma) {
  DenoiserConfig cfg;
  cfg.sigma = sigma;
  if (sigma < 20.0) {
    cfg.k = 20;
    cfg.passes = 1;
    cfg.beta_schedule = {3.3, ThetaScale::unit};
    cfg.theta_schedule = {1.5, ThetaScale::unit};
  } else {
    cfg.k = 25;
    cfg.passes = 6;
    cfg.beta_schedule = {0.9, ThetaScale::unit};
    cfg.theta_schedule = {0.8, ThetaScale::matrix};
  }
  return cfg;
}

void DenoiserConfig::validate() const {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ConfigError("sigma must be positive");
  if (patch_side == 0 || stride == 0 || window == 0 || k == 0 || passes == 0) {
    throw ConfigError("patch side, stride, window, K and passes must be positive");
  }
  if (gamma_l < 0.0 || gamma_s < 0.0) throw ConfigError("gamma weights must be non-negative");
  if (beta_schedule.factor < 0.0 || theta_schedule.factor < 0.0) {
    throw ConfigError("threshold factors must be non-negative");
  }
  if (std::abs(mix_prev + mix_noisy - 1.0) > 1e-12 || mix_prev < 0.0 || mix_noisy < 0.0) {
    throw ConfigError("pass mixing weights must be non-negative and sum to one");
  }
  if (psi < 0.0) throw ConfigError("psi must be non-negative");
}

PatchGeometry DenoiserConfig::geometry(const ImageTensor& img) const {
  return {patch_side, patch_depth == 0 ? img.channels() : patch_depth, stride};
}

PassThresholds pass_thresholds(const DenoiserConfig& cfg, double sigma_level,
                               const ImageTensor& img) {
  const PatchGeometry geom = cfg.geometry(img);
  auto scale = [&](ThetaScale s) {
    switch (s) {
      case ThetaScale::unit: return 1.0;
      case ThetaScale::matrix:
        return std::sqrt(static_cast<double>(geom.length())) + std::sqrt(static_cast<double>(cfg.k));
      case ThetaScale::paper:
        return std::sqrt(static_cast<double>(geom.pixels())) +
               std::sqrt(static_cast<double>(img.plane_size()));
    }
    return 1.0;
  };
  return {cfg.beta_schedule.factor * sigma_level * scale(cfg.beta_schedule.scale),
          cfg.theta_schedule.factor * sigma_level * scale(cfg.theta_schedule.scale)};
}

std::size_t resolve_minibatch(const DenoiserConfig& cfg, std::size_t transform_dim,
                              std::size_t groups) {
  if (cfg.minibatch > 0) return cfg.minibatch;
  // Budget of decomposition work per pass, in units of dim^3.
  constexpr double kBudget = 2e10;
  const double dim3 = std::pow(static_cast<double>(transform_dim), 3.0);
  const auto updates = static_cast<std::size_t>(std::max(1.0, std::floor(kBudget / dim3)));
  return std::max<std::size_t>(1, (groups + updates - 1) / updates);
}

PassResult denoise_pass(const ImageTensor& noisy, const DenoiserConfig& cfg,
                        TransformState& state, double sigma_level) {
  const auto t_start = Clock::now();
  cfg.validate();
  const PatchGeometry geom = cfg.geometry(noisy);
  validate_geometry(noisy, geom);
  const SearchWindow win = multimodal_window(
      noisy, geom, SearchWindow::square(cfg.window, cfg.chan_span), cfg.search);
  const std::size_t np = geom.length();
  const std::size_t k = cfg.k;
  const auto dim = static_cast<Eigen::Index>(np * k);
  if (state.dim() != dim) throw ShapeError("transform state does not match np*K");
  if (window_range(noisy, geom, win, PatchRef{}).count() < k) {
    throw ConfigError("search window holds fewer than K candidate patches");
  }

  const PassThresholds th = pass_thresholds(cfg, sigma_level, noisy);
  const double denom = 1.0 + cfg.gamma_l + cfg.gamma_s;

  MatcherOptions mopts;
  mopts.engine = cfg.engine;
  const auto t_setup = Clock::now();
  const BlockMatcher matcher(noisy, geom, win, mopts);
  PassStats stats;
  stats.bm_seconds += seconds_since(t_setup);

  const std::vector<PatchRef> refs = reference_grid(noisy, geom, true);
  const std::size_t batch = resolve_minibatch(cfg, static_cast<std::size_t>(dim), refs.size());
  Aggregator acc(noisy.height(), noisy.width(), noisy.channels());

  for (std::size_t start = 0; start < refs.size(); start += batch) {
    const std::size_t end = std::min(refs.size(), start + batch);
    const std::vector<PatchRef> batch_refs(refs.begin() + static_cast<std::ptrdiff_t>(start),
                                           refs.begin() + static_cast<std::ptrdiff_t>(end));
    const auto bsize = static_cast<Eigen::Index>(batch_refs.size());

    const auto t_bm = Clock::now();
    const std::vector<MatchSet> matches =
        matcher.match_all(batch_refs, k, Metric::euclidean, cfg.threads);
    stats.bm_seconds += seconds_since(t_bm);

    // Columns of z are vec(Y_t); Z_t starts at Y_t.
    Eigen::MatrixXd z(dim, bsize);
    std::vector<Eigen::MatrixXd> low_rank(batch_refs.size());
    for (Eigen::Index j = 0; j < bsize; ++j) {
      const MatchSet& m = matches[static_cast<std::size_t>(j)];
      if (m.size() != k) throw ConfigError("short match set inside the denoising stream");
      const PatchGroup g = group_patches(noisy, m, geom);
      z.col(j) = Eigen::Map<const Eigen::VectorXd>(g.data.data(), dim);
      low_rank[static_cast<std::size_t>(j)] = lowrank_approx(g.data, th.theta).approx;
    }

    const Eigen::MatrixXd codes = hard_threshold(state.transform() * z, th.beta);
    state.update_batch(z, codes);
    const Eigen::MatrixXd recoded = hard_threshold(state.transform() * z, th.beta);
    const Eigen::MatrixXd synth = state.transform().transpose() * recoded;
    ++stats.transform_updates;

    for (Eigen::Index j = 0; j < bsize; ++j) {
      const MatchSet& m = matches[static_cast<std::size_t>(j)];
      const Eigen::Map<const Eigen::MatrixXd> y(z.col(j).data(), static_cast<Eigen::Index>(np),
                                                static_cast<Eigen::Index>(k));
      const Eigen::Map<const Eigen::MatrixXd> s(synth.col(j).data(), static_cast<Eigen::Index>(np),
                                                static_cast<Eigen::Index>(k));
      const Eigen::MatrixXd est =
          (y + cfg.gamma_l * low_rank[static_cast<std::size_t>(j)] + cfg.gamma_s * s) / denom;
      for (std::size_t c = 0; c < k; ++c) {
        acc.deposit_vector(std::span<const double>(est.col(static_cast<Eigen::Index>(c)).data(), np),
                           geom.side, geom.depth, m.indices[c]);
      }
    }
    stats.groups += batch_refs.size();
  }

  Aggregator::Result res = acc.finalize();
  // Pixels no group reached keep their input value.
  auto out = res.image.data();
  const auto in = noisy.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!res.coverage[i]) out[i] = in[i];
  }
  stats.total_seconds = seconds_since(t_start);
  return {std::move(res.image), stats};
}

double estimate_sigma(const ImageTensor& noisy, const ImageTensor& estimate, double sigma,
                      double psi) {
  if (!noisy.same_shape(estimate)) throw ShapeError("estimate_sigma: shape mismatch");
  double energy = 0.0;
  const auto a = noisy.data();
  const auto b = estimate.data();
  for (std::size_t i = 0; i < a.size(); ++i) energy += (a[i] - b[i]) * (a[i] - b[i]);
  const double radicand = sigma * sigma - energy / static_cast<double>(a.size());
  return radicand > 0.0 ? psi * std::sqrt(radicand) : 0.0;
}

ImageTensor mix_inputs(const ImageTensor& previous, const ImageTensor& noisy,
                       const DenoiserConfig& cfg) {
  if (!previous.same_shape(noisy)) throw ShapeError("mix_inputs: shape mismatch");
  ImageTensor out = previous;
  auto o = out.data();
  const auto n = noisy.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = cfg.mix_prev * o[i] + cfg.mix_noisy * n[i];
  return out;
}

DenoiseReport denoise_with_report(const ImageTensor& noisy, const DenoiserConfig& cfg) {
  cfg.validate();
  const PatchGeometry geom = cfg.geometry(noisy);
  validate_geometry(noisy, geom);

  DenoiseReport report;
  report.final_state = TransformState::dct(geom.side, geom.depth, cfg.k);
  ImageTensor input = noisy;
  double level = cfg.sigma;
  for (std::size_t pass = 0; pass < cfg.passes; ++pass) {
    if (pass > 0) {
      level = estimate_sigma(noisy, report.image, cfg.sigma, cfg.psi);
      if (level == 0.0) break;
      input = mix_inputs(report.image, noisy, cfg);
      if (cfg.reset_transform_between_passes) report.final_state.reset();
    }
    PassResult r = denoise_pass(input, cfg, report.final_state, level);
    report.image = std::move(r.estimate);
    report.sigma_levels.push_back(level);
    report.stats.groups += r.stats.groups;
    report.stats.transform_updates += r.stats.transform_updates;
    report.stats.bm_seconds += r.stats.bm_seconds;
    report.stats.total_seconds += r.stats.total_seconds;
    ++report.passes_run;
  }
  return report;
}

ImageTensor denoise(const ImageTensor& noisy, const DenoiserConfig& cfg) {
  return denoise_with_report(noisy, cfg).image;
}

}  // namespace selfconv
