#pragma once

#include <algorithm>
#include <complex>
#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "selfconv/tensor.hpp"

namespace selfconv {

using Complex = std::complex<double>;

/// Full complex 2D spectrum per channel, planar like ImageTensor.
/// Forward transforms are unnormalized; inverses carry 1/(height*width).
class Spectrum {
 public:
  Spectrum() = default;
  Spectrum(std::size_t height, std::size_t width, std::size_t channels = 1,
           Complex fill = Complex(0.0, 0.0));

  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t channels() const noexcept { return channels_; }
  std::size_t plane_size() const noexcept { return height_ * width_; }

  Complex operator()(std::size_t u, std::size_t v, std::size_t chan = 0) const noexcept {
    return data_[(chan * height_ + u) * width_ + v];
  }
  Complex& operator()(std::size_t u, std::size_t v, std::size_t chan = 0) noexcept {
    return data_[(chan * height_ + u) * width_ + v];
  }
  std::span<const Complex> data() const noexcept { return data_; }
  std::span<Complex> data() noexcept { return data_; }

  bool same_shape(const Spectrum& o) const noexcept {
    return height_ == o.height_ && width_ == o.width_ && channels_ == o.channels_;
  }

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::size_t channels_ = 0;
  std::vector<Complex> data_;
};

/// Channel-wise forward DFT.
Spectrum fft2(const ImageTensor& img);

/// Channel-wise inverse DFT of a spectrum whose result must be real.
/// Throws SpectralResidueError if max|Im| >= 1e-8 * max|Re|.
ImageTensor ifft2(const Spectrum& spec);

/// out = a * conj(b), element-wise. Throws ShapeError on mismatched dims.
Spectrum conj_multiply(const Spectrum& a, const Spectrum& b);

/// Pixel-wise sum over channels.
ImageTensor channel_sum(const ImageTensor& img);

/// Smallest n' >= n whose only prime factors are 2, 3, 5 and 7.
std::size_t fast_fft_size(std::size_t n);

/// Nominal multiply-add cost of one real 2D transform of h x w points,
/// used by the operation counters: h*w*log2(h*w).
double fft_cost_model(std::size_t h, std::size_t w);

namespace detail {
struct FftwDeleter {
  void operator()(void* p) const noexcept;
};
void* aligned_alloc_bytes(std::size_t bytes);
}  // namespace detail

/// 64-byte aligned buffer allocated through FFTW so that shared plans can be
/// executed on it from any thread.
template <class T>
class AlignedBuffer {
 public:
  AlignedBuffer() = default;
  explicit AlignedBuffer(std::size_t n)
      : ptr_(static_cast<T*>(detail::aligned_alloc_bytes(n * sizeof(T)))), size_(n) {
    std::fill_n(ptr_.get(), n, T{});
  }

  T* data() noexcept { return ptr_.get(); }
  const T* data() const noexcept { return ptr_.get(); }
  std::size_t size() const noexcept { return size_; }
  T& operator[](std::size_t i) noexcept { return ptr_.get()[i]; }
  const T& operator[](std::size_t i) const noexcept { return ptr_.get()[i]; }
  std::span<T> span() noexcept { return {data(), size_}; }
  std::span<const T> span() const noexcept { return {data(), size_}; }

 private:
  std::unique_ptr<T, detail::FftwDeleter> ptr_;
  std::size_t size_ = 0;
};

/// Real-to-half-complex 2D transform pair of a fixed size. Plans come from a
/// process-wide cache, are immutable once created, and are executed with
/// FFTW's new-array interface, so one instance may be shared across threads
/// provided each thread brings its own aligned buffers.
class RealFft2d {
 public:
  RealFft2d(std::size_t height, std::size_t width);

  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t real_size() const noexcept { return height_ * width_; }
  /// Half spectrum: height x (width/2 + 1).
  std::size_t spectrum_width() const noexcept { return width_ / 2 + 1; }
  std::size_t spectrum_size() const noexcept { return height_ * spectrum_width(); }

  /// Unnormalized forward transform; input is preserved.
  void forward(const double* in, Complex* out) const;
  /// Unnormalized inverse transform; the spectrum is overwritten.
  void inverse(Complex* in, double* out) const;

 private:
  std::size_t height_, width_;
  void* forward_plan_;
  void* inverse_plan_;
};

}  // namespace selfconv
