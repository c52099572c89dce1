#pragma once

#include "selfconv/similarity.hpp"
#include "selfconv/tensor.hpp"

/// Brute-force block matching and non-local means. These evaluate the
/// defining sums pair by pair and serve as ground truth for the fast engines.
namespace selfconv::oracle {

/// Exhaustive matching: the metric is evaluated against every window anchor,
/// all candidates are sorted (raster order breaks ties) and the first k kept.
/// The counter receives one multiply-add per patch element per candidate.
MatchSet bm_naive(const ImageTensor& img, const PatchRef& ref, const PatchGeometry& geom,
                  const SearchWindow& win, std::size_t k, Metric metric,
                  OpCounter* counter = nullptr);

/// exp(-||X_j - X_i||^2 / b^2) over the window, normalized to sum to one.
WeightMap nlm_naive(const ImageTensor& img, const PatchRef& ref, const PatchGeometry& geom,
                    const SearchWindow& win, double bandwidth);

}  // namespace selfconv::oracle
