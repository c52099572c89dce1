#include "selfconv/imaging_io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <numbers>
#include <string>

#include "selfconv/errors.hpp"

namespace selfconv {

namespace {

std::vector<unsigned char> slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void spill(const std::filesystem::path& path, const std::vector<unsigned char>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError("write failed for " + path.string());
}

class PnmCursor {
 public:
  explicit PnmCursor(const std::vector<unsigned char>& bytes) : b_(bytes) {}

  void skip_space_and_comments() {
    while (pos_ < b_.size()) {
      if (b_[pos_] == '#') {
        while (pos_ < b_.size() && b_[pos_] != '\n') ++pos_;
      } else if (std::isspace(b_[pos_])) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  std::uint64_t number() {
    skip_space_and_comments();
    if (pos_ >= b_.size() || !std::isdigit(b_[pos_])) throw FormatError("PGM: expected a number");
    std::uint64_t v = 0;
    while (pos_ < b_.size() && std::isdigit(b_[pos_])) {
      v = v * 10 + static_cast<std::uint64_t>(b_[pos_++] - '0');
      if (v > std::numeric_limits<std::uint32_t>::max()) throw FormatError("PGM: number too large");
    }
    return v;
  }

  std::size_t pos() const { return pos_; }
  void advance(std::size_t n) { pos_ += n; }

 private:
  const std::vector<unsigned char>& b_;
  std::size_t pos_ = 0;
};

std::uint32_t load_u32le(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
         static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
}

void store_u32le(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

std::uint32_t checked_u32(std::size_t v, const char* what) {
  if (v > std::numeric_limits<std::uint32_t>::max()) throw FormatError(std::string(what) + " too large");
  return static_cast<std::uint32_t>(v);
}

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

double mse(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
  return acc / static_cast<double>(a.size());
}

double psnr_from_mse(double m, double peak) {
  if (m == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / m);
}

}  // namespace

ImageTensor read_pgm(const std::filesystem::path& path) {
  const std::vector<unsigned char> bytes = slurp(path);
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '2' && bytes[1] != '5')) {
    throw FormatError("PGM: bad magic in " + path.string());
  }
  const bool binary = bytes[1] == '5';
  PnmCursor cur(bytes);
  cur.advance(2);
  const std::uint64_t w = cur.number();
  const std::uint64_t h = cur.number();
  const std::uint64_t maxval = cur.number();
  if (w == 0 || h == 0) throw FormatError("PGM: empty image");
  if (maxval == 0 || maxval > 65535) throw FormatError("PGM: maxval out of range");
  const double scale = 255.0 / static_cast<double>(maxval);
  const std::size_t n = static_cast<std::size_t>(w * h);

  std::vector<double> data(n);
  if (binary) {
    if (cur.pos() >= bytes.size() || !std::isspace(bytes[cur.pos()])) {
      throw FormatError("PGM: missing separator before raster");
    }
    cur.advance(1);
    const std::size_t bps = maxval < 256 ? 1 : 2;
    if (bytes.size() - cur.pos() < n * bps) throw FormatError("PGM: truncated raster");
    const unsigned char* p = bytes.data() + cur.pos();
    for (std::size_t i = 0; i < n; ++i) {
      const unsigned v = bps == 1 ? p[i] : (static_cast<unsigned>(p[2 * i]) << 8 | p[2 * i + 1]);
      if (v > maxval) throw FormatError("PGM: sample exceeds maxval");
      data[i] = v * scale;
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      std::uint64_t v = 0;
      try {
        v = cur.number();
      } catch (const FormatError&) {
        throw FormatError("PGM: truncated raster");
      }
      if (v > maxval) throw FormatError("PGM: sample exceeds maxval");
      data[i] = static_cast<double>(v) * scale;
    }
  }
  return ImageTensor(static_cast<std::size_t>(h), static_cast<std::size_t>(w), 1, std::move(data));
}

void write_pgm(const ImageTensor& img, const std::filesystem::path& path, PgmEncoding encoding) {
  if (img.channels() != 1) throw ShapeError("PGM holds a single channel");
  if (img.empty()) throw ShapeError("cannot write an empty image");
  const std::string header = std::string(encoding == PgmEncoding::binary ? "P5" : "P2") + "\n" +
                             std::to_string(img.width()) + " " + std::to_string(img.height()) +
                             "\n255\n";
  std::vector<unsigned char> out(header.begin(), header.end());
  const auto px = img.data();
  for (std::size_t i = 0; i < px.size(); ++i) {
    // nearbyint honours the default round-to-nearest-even mode.
    const auto v = static_cast<unsigned>(std::nearbyint(std::clamp(px[i], 0.0, 255.0)));
    if (encoding == PgmEncoding::binary) {
      out.push_back(static_cast<unsigned char>(v));
    } else {
      const std::string s = std::to_string(v);
      out.insert(out.end(), s.begin(), s.end());
      out.push_back((i + 1) % img.width() == 0 ? '\n' : ' ');
    }
  }
  spill(path, out);
}

ImageTensor read_mmr(const std::filesystem::path& path) {
  const std::vector<unsigned char> bytes = slurp(path);
  if (bytes.size() < 20 || std::memcmp(bytes.data(), "MMR1", 4) != 0) {
    throw FormatError("MMR: bad magic in " + path.string());
  }
  const std::uint32_t h = load_u32le(bytes.data() + 4);
  const std::uint32_t w = load_u32le(bytes.data() + 8);
  const std::uint32_t c = load_u32le(bytes.data() + 12);
  const std::uint32_t dtype = load_u32le(bytes.data() + 16);
  if (dtype != 1) throw FormatError("MMR: unsupported dtype");
  if (h == 0 || w == 0 || c == 0) throw FormatError("MMR: empty shape");
  const std::uint64_t n = std::uint64_t{h} * w * c;
  if (bytes.size() - 20 != n * 4) throw FormatError("MMR: payload size does not match shape");

  std::vector<double> data(static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < data.size(); ++i) {
    const float f = std::bit_cast<float>(load_u32le(bytes.data() + 20 + 4 * i));
    if (!std::isfinite(f)) throw FormatError("MMR: non-finite sample");
    data[i] = f;
  }
  return ImageTensor(h, w, c, std::move(data));
}

void write_mmr(const ImageTensor& img, const std::filesystem::path& path) {
  if (img.empty()) throw ShapeError("cannot write an empty image");
  std::vector<unsigned char> out = {'M', 'M', 'R', '1'};
  out.reserve(20 + 4 * img.size());
  store_u32le(out, checked_u32(img.height(), "height"));
  store_u32le(out, checked_u32(img.width(), "width"));
  store_u32le(out, checked_u32(img.channels(), "channels"));
  store_u32le(out, 1);
  for (double v : img.data()) store_u32le(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  spill(path, out);
}

namespace {

bool is_pgm(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  return ext == ".pgm";
}

}  // namespace

ImageTensor read_image(const std::filesystem::path& path) {
  return is_pgm(path) ? read_pgm(path) : read_mmr(path);
}

void write_image(const ImageTensor& img, const std::filesystem::path& path) {
  if (is_pgm(path)) {
    write_pgm(img, path);
  } else {
    write_mmr(img, path);
  }
}

double gaussian_at(std::uint64_t seed, std::uint64_t index) {
  const std::uint64_t key = splitmix64(seed);
  const std::uint64_t a = splitmix64(key ^ (2 * index));
  const std::uint64_t b = splitmix64(key ^ (2 * index + 1));
  constexpr double kUnit = 0x1.0p-53;
  const double u1 = static_cast<double>((a >> 11) + 1) * kUnit;
  const double u2 = static_cast<double>(b >> 11) * kUnit;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

ImageTensor add_gaussian_noise(const ImageTensor& img, const NoiseSpec& spec) {
  if (!(spec.sigma >= 0.0) || !std::isfinite(spec.sigma)) {
    throw ConfigError("noise sigma must be finite and non-negative");
  }
  ImageTensor out = img;
  if (spec.sigma == 0.0) return out;
  auto px = out.data();
  for (std::size_t i = 0; i < px.size(); ++i) px[i] += spec.sigma * gaussian_at(spec.seed, i);
  return out;
}

double psnr(const ImageTensor& a, const ImageTensor& b, double peak) {
  if (!a.same_shape(b)) throw ShapeError("psnr: shape mismatch");
  if (a.empty()) throw ShapeError("psnr: empty images");
  return psnr_from_mse(mse(a.data(), b.data()), peak);
}

std::vector<double> psnr_per_channel(const ImageTensor& a, const ImageTensor& b, double peak) {
  if (!a.same_shape(b)) throw ShapeError("psnr: shape mismatch");
  if (a.empty()) throw ShapeError("psnr: empty images");
  std::vector<double> out;
  for (std::size_t c = 0; c < a.channels(); ++c) {
    out.push_back(psnr_from_mse(mse(a.channel(c), b.channel(c)), peak));
  }
  return out;
}

}  // namespace selfconv
