#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>

#include "selfconv/tensor.hpp"

namespace selfconv::testing {

inline ImageTensor random_image(std::size_t h, std::size_t w, std::size_t c, std::uint64_t seed,
                                bool integral = true) {
  ImageTensor img(h, w, c);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> pix(0, 255);
  std::uniform_real_distribution<double> real(0.0, 255.0);
  for (double& v : img.data()) v = integral ? pix(rng) : real(rng);
  return img;
}

inline ImageTensor sample_3x3() { return ImageTensor::from_rows({{1, 2, 3}, {4, 5, 6}, {7, 8, 9}}); }

/// Direct sum of products of the patch at ref with the patch at pos.
inline double direct_correlation(const ImageTensor& img, const PatchRef& ref, const PatchRef& pos,
                                 const PatchGeometry& g) {
  double acc = 0.0;
  for (std::size_t c = 0; c < g.depth; ++c) {
    for (std::size_t r = 0; r < g.side; ++r) {
      for (std::size_t q = 0; q < g.side; ++q) {
        acc += img(ref.row + r, ref.col + q, ref.chan + c) * img(pos.row + r, pos.col + q, pos.chan + c);
      }
    }
  }
  return acc;
}

inline Eigen::MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

/// Haar-ish random orthonormal matrix from the QR of a Gaussian matrix.
inline Eigen::MatrixXd random_orthonormal(Eigen::Index n, std::mt19937_64& rng) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(random_matrix(n, n, rng));
  return qr.householderQ() * Eigen::MatrixXd::Identity(n, n);
}

}  // namespace selfconv::testing
