#include "selfconv/spectral.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <new>
#include <utility>

#include "selfconv/errors.hpp"

namespace selfconv {

namespace {

// The FFTW planner is not re-entrant.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

struct PlanPair {
  fftw_plan forward = nullptr;
  fftw_plan inverse = nullptr;
};

// Plans are created once per size and live for the whole process.
PlanPair real_plans(std::size_t h, std::size_t w) {
  static std::map<std::pair<std::size_t, std::size_t>, PlanPair> cache;
  std::lock_guard lock(planner_mutex());
  auto it = cache.find({h, w});
  if (it != cache.end()) return it->second;

  const std::size_t spec = h * (w / 2 + 1);
  AlignedBuffer<double> real(h * w);
  AlignedBuffer<Complex> cplx(spec);
  auto* c = reinterpret_cast<fftw_complex*>(cplx.data());
  PlanPair p;
  p.forward = fftw_plan_dft_r2c_2d(static_cast<int>(h), static_cast<int>(w), real.data(), c,
                                   FFTW_MEASURE);
  p.inverse = fftw_plan_dft_c2r_2d(static_cast<int>(h), static_cast<int>(w), c, real.data(),
                                   FFTW_MEASURE);
  if (!p.forward || !p.inverse) throw NumericError("FFTW could not create a plan");
  cache.emplace(std::make_pair(h, w), p);
  return p;
}

void complex_dft(std::size_t h, std::size_t w, Complex* in, Complex* out, int sign) {
  fftw_plan plan;
  {
    std::lock_guard lock(planner_mutex());
    plan = fftw_plan_dft_2d(static_cast<int>(h), static_cast<int>(w),
                            reinterpret_cast<fftw_complex*>(in),
                            reinterpret_cast<fftw_complex*>(out), sign, FFTW_ESTIMATE);
  }
  if (!plan) throw NumericError("FFTW could not create a plan");
  fftw_execute(plan);
  std::lock_guard lock(planner_mutex());
  fftw_destroy_plan(plan);
}

}  // namespace

namespace detail {

void FftwDeleter::operator()(void* p) const noexcept { fftw_free(p); }

void* aligned_alloc_bytes(std::size_t bytes) {
  void* p = fftw_malloc(std::max<std::size_t>(bytes, 1));
  if (!p) throw std::bad_alloc();
  return p;
}

}  // namespace detail

Spectrum::Spectrum(std::size_t height, std::size_t width, std::size_t channels, Complex fill)
    : height_(height), width_(width), channels_(channels), data_(height * width * channels, fill) {}

Spectrum fft2(const ImageTensor& img) {
  const std::size_t h = img.height(), w = img.width();
  Spectrum out(h, w, img.channels());
  AlignedBuffer<Complex> in(h * w), res(h * w);
  for (std::size_t c = 0; c < img.channels(); ++c) {
    const auto plane = img.channel(c);
    for (std::size_t i = 0; i < plane.size(); ++i) in[i] = Complex(plane[i], 0.0);
    complex_dft(h, w, in.data(), res.data(), FFTW_FORWARD);
    std::copy_n(res.data(), h * w, out.data().begin() + c * h * w);
  }
  return out;
}

ImageTensor ifft2(const Spectrum& spec) {
  const std::size_t h = spec.height(), w = spec.width(), n = h * w;
  std::vector<double> data(n * spec.channels());
  AlignedBuffer<Complex> in(n), res(n);
  double max_re = 0.0, max_im = 0.0;
  for (std::size_t c = 0; c < spec.channels(); ++c) {
    std::copy_n(spec.data().begin() + c * n, n, in.data());
    complex_dft(h, w, in.data(), res.data(), FFTW_BACKWARD);
    for (std::size_t i = 0; i < n; ++i) {
      const Complex v = res[i] / static_cast<double>(n);
      data[c * n + i] = v.real();
      max_re = std::max(max_re, std::abs(v.real()));
      max_im = std::max(max_im, std::abs(v.imag()));
    }
  }
  if (max_im > 0.0 && max_im >= 1e-8 * max_re) {
    throw SpectralResidueError("inverse transform left an imaginary residue of " +
                               std::to_string(max_im));
  }
  return ImageTensor(h, w, spec.channels(), std::move(data));
}

Spectrum conj_multiply(const Spectrum& a, const Spectrum& b) {
  if (!a.same_shape(b)) throw ShapeError("conj_multiply: spectra differ in shape");
  Spectrum out(a.height(), a.width(), a.channels());
  auto o = out.data();
  auto x = a.data();
  auto y = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] * std::conj(y[i]);
  return out;
}

ImageTensor channel_sum(const ImageTensor& img) {
  ImageTensor out(img.height(), img.width(), 1);
  auto o = out.data();
  for (std::size_t c = 0; c < img.channels(); ++c) {
    const auto plane = img.channel(c);
    for (std::size_t i = 0; i < plane.size(); ++i) o[i] += plane[i];
  }
  return out;
}

std::size_t fast_fft_size(std::size_t n) {
  for (std::size_t m = std::max<std::size_t>(n, 1);; ++m) {
    std::size_t r = m;
    for (std::size_t p : {2u, 3u, 5u, 7u}) {
      while (r % p == 0) r /= p;
    }
    if (r == 1) return m;
  }
}

double fft_cost_model(std::size_t h, std::size_t w) {
  const double m = static_cast<double>(h * w);
  return m > 1.0 ? m * std::log2(m) : 1.0;
}

RealFft2d::RealFft2d(std::size_t height, std::size_t width) : height_(height), width_(width) {
  const PlanPair p = real_plans(height, width);
  forward_plan_ = p.forward;
  inverse_plan_ = p.inverse;
}

void RealFft2d::forward(const double* in, Complex* out) const {
  fftw_execute_dft_r2c(static_cast<fftw_plan>(forward_plan_), const_cast<double*>(in),
                       reinterpret_cast<fftw_complex*>(out));
}

void RealFft2d::inverse(Complex* in, double* out) const {
  fftw_execute_dft_c2r(static_cast<fftw_plan>(inverse_plan_),
                       reinterpret_cast<fftw_complex*>(in), out);
}

}  // namespace selfconv
