#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "selfconv/tensor.hpp"

namespace selfconv {

enum class PgmEncoding { ascii, binary };

/// P2 or P5, maxval up to 65535; samples are scaled to [0, 255].
ImageTensor read_pgm(const std::filesystem::path& path);
/// Single-channel only. Values are clipped to [0, 255] and rounded half-to-even.
void write_pgm(const ImageTensor& img, const std::filesystem::path& path,
               PgmEncoding encoding = PgmEncoding::binary);

/// "MMR1" | u32 height | u32 width | u32 channels | u32 dtype (1 = float32) |
/// planar float32 payload, all little-endian.
ImageTensor read_mmr(const std::filesystem::path& path);
void write_mmr(const ImageTensor& img, const std::filesystem::path& path);

/// Dispatches on extension: .pgm, otherwise MMR.
ImageTensor read_image(const std::filesystem::path& path);
void write_image(const ImageTensor& img, const std::filesystem::path& path);

struct NoiseSpec {
  double sigma = 0.0;
  std::uint64_t seed = 0;
};

/// Gaussian sample i of stream `seed`. Two splitmix64 outputs at counters
/// 2i and 2i+1 (keyed by seed) give uniforms u1 in (0,1], u2 in [0,1) from
/// their top 53 bits; the sample is sqrt(-2 ln u1) cos(2 pi u2).
double gaussian_at(std::uint64_t seed, std::uint64_t index);

/// img + sigma * gaussian_at(seed, i) for scalar i in planar order. Not clipped.
ImageTensor add_gaussian_noise(const ImageTensor& img, const NoiseSpec& spec);

/// Pooled over every scalar; +infinity for identical inputs.
double psnr(const ImageTensor& a, const ImageTensor& b, double peak = 255.0);
std::vector<double> psnr_per_channel(const ImageTensor& a, const ImageTensor& b,
                                     double peak = 255.0);

}  // namespace selfconv
