#include "selfconv/oracle.hpp"

#include <algorithm>
#include <cmath>

#include "selfconv/errors.hpp"

namespace selfconv::oracle {

namespace {

struct Candidate {
  PatchRef pos;
  double score;
};

}  // namespace

MatchSet bm_naive(const ImageTensor& img, const PatchRef& ref, const PatchGeometry& geom,
                  const SearchWindow& win, std::size_t k, Metric metric, OpCounter* counter) {
  if (k == 0) throw ConfigError("K must be at least 1");
  const auto positions = valid_positions(img, geom, win, ref);
  const std::vector<double> x = vectorize(extract_patch(img, ref, geom));

  double ref_norm = 0.0;
  if (metric == Metric::ncc) {
    double sq = 0.0;
    for (double v : x) sq += v * v;
    if (sq == 0.0) throw DegeneratePatchError("reference patch is all zeros");
    ref_norm = std::sqrt(sq);
  }

  std::vector<Candidate> all;
  all.reserve(positions.size());
  std::vector<double> y(x.size());
  for (const PatchRef& p : positions) {
    vectorize_patch(img, p, geom, y);
    double score = 0.0;
    if (metric == Metric::euclidean) {
      for (std::size_t i = 0; i < x.size(); ++i) {
        const double diff = y[i] - x[i];
        score += diff * diff;
      }
    } else {
      double dot = 0.0, sq = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i) {
        dot += x[i] * y[i];
        sq += y[i] * y[i];
      }
      score = dot / std::max(ref_norm * std::sqrt(sq), kNccEpsilon);
    }
    all.push_back({p, score});
  }
  if (counter) counter->multiply_adds += static_cast<double>(positions.size() * x.size());

  const bool ascending = metric == Metric::euclidean;
  std::sort(all.begin(), all.end(), [ascending](const Candidate& a, const Candidate& b) {
    if (a.score != b.score) return ascending ? a.score < b.score : a.score > b.score;
    return a.pos < b.pos;
  });

  MatchSet out;
  out.ref = ref;
  out.metric = metric;
  out.score_stage = ascending ? MetricStage::euclidean_distance : MetricStage::ncc_score;
  out.k = k;
  out.short_set = all.size() < k;
  const std::size_t n = std::min(k, all.size());
  for (std::size_t i = 0; i < n; ++i) {
    out.indices.push_back(all[i].pos);
    out.scores.push_back(all[i].score);
  }
  return out;
}

WeightMap nlm_naive(const ImageTensor& img, const PatchRef& ref, const PatchGeometry& geom,
                    const SearchWindow& win, double bandwidth) {
  if (!(bandwidth > 0.0)) throw ConfigError("NLM bandwidth must be positive");
  const PositionRange range = window_range(img, geom, win, ref);
  const std::vector<double> x = vectorize(extract_patch(img, ref, geom));
  std::vector<double> y(x.size());

  WeightMap out{PositionMap(range), ref, bandwidth};
  double d_min = INFINITY;
  for (const PatchRef& p : valid_positions(img, geom, win, ref)) {
    vectorize_patch(img, p, geom, y);
    double d = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) d += (y[i] - x[i]) * (y[i] - x[i]);
    out.weights.at(p) = d;
    d_min = std::min(d_min, d);
  }
  const double b2 = bandwidth * bandwidth;
  double theta = 0.0;
  for (double& w : out.weights.values) {
    w = std::exp(-(w - d_min) / b2);
    theta += w;
  }
  for (double& w : out.weights.values) w /= theta;
  return out;
}

}  // namespace selfconv::oracle
