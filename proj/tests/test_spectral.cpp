#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "selfconv/errors.hpp"
#include "selfconv/spectral.hpp"
#include "support.hpp"

using namespace selfconv;
using selfconv::testing::random_image;

namespace {

double max_abs(std::span<const Complex> s) {
  double m = 0.0;
  for (const auto& c : s) m = std::max(m, std::abs(c));
  return m;
}

}  // namespace

TEST(Fft2, DeltaGivesFlatSpectrum) {
  ImageTensor img(5, 6);
  img(0, 0) = 1.0;
  const Spectrum s = fft2(img);
  for (const Complex& c : s.data()) {
    EXPECT_NEAR(c.real(), 1.0, 1e-12);
    EXPECT_NEAR(c.imag(), 0.0, 1e-12);
  }
}

TEST(Fft2, ConstantConcentratesAtDc) {
  const Spectrum s = fft2(ImageTensor(4, 7, 1, 3.0));
  EXPECT_NEAR(s(0, 0).real(), 84.0, 1e-10);
  for (std::size_t i = 1; i < s.plane_size(); ++i) EXPECT_NEAR(std::abs(s.data()[i]), 0.0, 1e-10);
}

TEST(Fft2, Parseval) {
  const ImageTensor x = random_image(13, 17, 2, 1, false);
  const Spectrum s = fft2(x);
  double lhs = 0.0, rhs = 0.0;
  for (double v : x.data()) lhs += v * v;
  for (const Complex& c : s.data()) rhs += std::norm(c);
  EXPECT_NEAR(lhs, rhs / (13.0 * 17.0), 1e-9 * lhs);
}

TEST(Fft2, ConjugateSymmetryOfRealInput) {
  const ImageTensor x = random_image(9, 12, 1, 2, false);
  const Spectrum s = fft2(x);
  const double scale = max_abs(s.data());
  for (std::size_t u = 0; u < 9; ++u) {
    for (std::size_t v = 0; v < 12; ++v) {
      const Complex mirror = std::conj(s((9 - u) % 9, (12 - v) % 12));
      EXPECT_NEAR(std::abs(s(u, v) - mirror), 0.0, 1e-9 * scale);
    }
  }
}

TEST(Fft2, Linearity) {
  const ImageTensor x = random_image(8, 10, 1, 3, false), y = random_image(8, 10, 1, 4, false);
  ImageTensor mix = x;
  for (std::size_t i = 0; i < mix.size(); ++i) mix.data()[i] = 2.5 * x.data()[i] - 0.75 * y.data()[i];
  const Spectrum a = fft2(x), b = fft2(y), m = fft2(mix);
  const double scale = max_abs(m.data());
  for (std::size_t i = 0; i < m.plane_size(); ++i) {
    EXPECT_NEAR(std::abs(m.data()[i] - (2.5 * a.data()[i] - 0.75 * b.data()[i])), 0.0, 1e-9 * scale);
  }
}

TEST(Ifft2, RoundTrip) {
  const ImageTensor x = random_image(11, 16, 3, 5, false);
  const ImageTensor back = ifft2(fft2(x));
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(back.data()[i], x.data()[i], 1e-10);
}

TEST(Ifft2, FlatSpectrumGivesDelta) {
  const ImageTensor d = ifft2(Spectrum(4, 4, 1, Complex(1.0, 0.0)));
  EXPECT_NEAR(d(0, 0), 1.0, 1e-12);
  for (std::size_t i = 1; i < d.size(); ++i) EXPECT_NEAR(d.data()[i], 0.0, 1e-12);
}

TEST(Ifft2, DcGivesOnes) {
  Spectrum s(3, 5);
  s(0, 0) = Complex(15.0, 0.0);
  const ImageTensor ones = ifft2(s);
  for (double v : ones.data()) EXPECT_NEAR(v, 1.0, 1e-12);
}

TEST(Ifft2, NonHermitianSpectrumIsRejected) {
  Spectrum s(4, 4);
  s(0, 1) = Complex(0.0, 5.0);
  EXPECT_THROW(ifft2(s), SpectralResidueError);
}

TEST(ConjMultiply, Properties) {
  const Spectrum a = fft2(random_image(6, 6, 1, 7, false));
  const Spectrum b = fft2(random_image(6, 6, 1, 8, false));
  const Spectrum aa = conj_multiply(a, a);
  for (const Complex& c : aa.data()) {
    EXPECT_GE(c.real(), 0.0);
    EXPECT_NEAR(c.imag(), 0.0, 1e-9 * std::max(1.0, c.real()));
  }
  const Spectrum ab = conj_multiply(a, b), ba = conj_multiply(b, a);
  for (std::size_t i = 0; i < ab.plane_size(); ++i) {
    EXPECT_NEAR(std::abs(ab.data()[i] - std::conj(ba.data()[i])), 0.0, 1e-9 * std::abs(ab.data()[i]) + 1e-9);
  }
  const Spectrum ones(6, 6, 1, Complex(1.0, 0.0));
  const Spectrum same = conj_multiply(a, ones);
  for (std::size_t i = 0; i < a.plane_size(); ++i) EXPECT_EQ(same.data()[i], a.data()[i]);
  EXPECT_THROW(conj_multiply(a, Spectrum(6, 5)), ShapeError);
}

TEST(ConjMultiply, CircularCorrelationTheorem) {
  const ImageTensor x = random_image(16, 16, 1, 9, false);
  const ImageTensor k = random_image(16, 16, 1, 10, false);
  const ImageTensor c = ifft2(conj_multiply(fft2(x), fft2(k)));
  for (std::size_t dr = 0; dr < 16; ++dr) {
    for (std::size_t dc = 0; dc < 16; ++dc) {
      double want = 0.0;
      for (std::size_t r = 0; r < 16; ++r) {
        for (std::size_t q = 0; q < 16; ++q) want += x((r + dr) % 16, (q + dc) % 16) * k(r, q);
      }
      EXPECT_NEAR(c(dr, dc), want, 1e-8 * std::max(1.0, std::abs(want)) + 1e-8);
    }
  }
}

TEST(ChannelSum, Properties) {
  const ImageTensor one = random_image(5, 4, 1, 11);
  EXPECT_EQ(channel_sum(one), one);
  ImageTensor rep(5, 4, 3);
  for (std::size_t c = 0; c < 3; ++c) {
    std::copy(one.data().begin(), one.data().end(), rep.channel(c).begin());
  }
  const ImageTensor s = channel_sum(rep);
  for (std::size_t i = 0; i < one.size(); ++i) EXPECT_EQ(s.data()[i], 3.0 * one.data()[i]);
  const ImageTensor multi = random_image(6, 6, 4, 12, false);
  const auto sum = [](std::span<const double> d) { return std::accumulate(d.begin(), d.end(), 0.0); };
  EXPECT_NEAR(sum(channel_sum(multi).data()), sum(multi.data()), 1e-9);
}

TEST(RealFft2d, MatchesComplexTransform) {
  const ImageTensor x = random_image(10, 14, 1, 13, false);
  RealFft2d plan(10, 14);
  AlignedBuffer<double> in(plan.real_size());
  AlignedBuffer<Complex> out(plan.spectrum_size());
  std::copy(x.data().begin(), x.data().end(), in.data());
  plan.forward(in.data(), out.data());
  const Spectrum full = fft2(x);
  const std::size_t half = 14 / 2 + 1;
  for (std::size_t u = 0; u < 10; ++u) {
    for (std::size_t v = 0; v < half; ++v) {
      EXPECT_NEAR(std::abs(out.data()[u * half + v] - full(u, v)), 0.0, 1e-9);
    }
  }
  AlignedBuffer<double> back(plan.real_size());
  plan.inverse(out.data(), back.data());
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(back.data()[i] / 140.0, x.data()[i], 1e-10);
}

TEST(FastFftSize, SmoothAndNotSmaller) {
  for (std::size_t n = 1; n < 300; ++n) {
    std::size_t m = fast_fft_size(n);
    EXPECT_GE(m, n);
    for (std::size_t p : {2, 3, 5, 7}) {
      while (m % p == 0) m /= p;
    }
    EXPECT_EQ(m, 1u) << n;
  }
}
