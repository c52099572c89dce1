#include "commands.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "selfconv/bench.hpp"
#include "selfconv/errors.hpp"
#include "selfconv/imaging_io.hpp"
#include "selfconv/parallel.hpp"
#include "selfconv/similarity.hpp"
#include "selfconv/strollr.hpp"

namespace selfconv::cli {

namespace {

std::string fmt(const char* spec, double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

SearchWindow parse_window(const std::string& text, std::size_t chan_span) {
  if (text == "whole") return SearchWindow::whole(chan_span);
  const auto x = text.find('x');
  try {
    std::size_t used = 0;
    if (x == std::string::npos) {
      const auto n = std::stoul(text, &used);
      if (used != text.size() || n == 0) throw std::invalid_argument(text);
      return SearchWindow::square(n, chan_span);
    }
    const auto rows = std::stoul(text.substr(0, x), &used);
    if (used != x) throw std::invalid_argument(text);
    const auto cols = std::stoul(text.substr(x + 1), &used);
    if (used != text.size() - x - 1 || rows == 0 || cols == 0) throw std::invalid_argument(text);
    return {rows, cols, chan_span};
  } catch (const std::logic_error&) {
    throw ConfigError("bad --window value '" + text + "'; expected N, RxC or whole");
  }
}

template <typename Fn>
void with_output(const std::string& path, std::ostream& out, Fn&& fn) {
  if (path == "-") {
    fn(out);
    return;
  }
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw FormatError("cannot open " + path + " for writing");
  fn(file);
  if (!file) throw FormatError("write failed for " + path);
}

struct MatchArgs {
  std::string input, out = "-", window = "30", metric = "euclidean", engine = "fft";
  std::size_t side = 0, depth = 0, chan_span = 1, k = 0, stride = 1, threads = 1;
};

void cmd_match(const MatchArgs& a, std::ostream& out) {
  const ImageTensor img = read_image(a.input);
  const PatchGeometry geom{a.side, a.depth == 0 ? img.channels() : a.depth, a.stride};
  validate_geometry(img, geom);
  const SearchMode mode = a.chan_span > 1 ? SearchMode::search3d : SearchMode::search2d;
  const SearchWindow win = multimodal_window(img, geom, parse_window(a.window, a.chan_span), mode);
  MatcherOptions mo;
  mo.engine = parse_engine(a.engine);
  const BlockMatcher matcher(img, geom, win, mo);
  const auto matches =
      matcher.match_all(reference_grid(img, geom, false), a.k, parse_metric(a.metric), a.threads);

  with_output(a.out, out, [&](std::ostream& os) {
    os << "ref_row,ref_col,ref_chan,rank,match_row,match_col,match_chan,score\n";
    for (const MatchSet& m : matches) {
      for (std::size_t r = 0; r < m.size(); ++r) {
        const PatchRef& p = m.indices[r];
        os << m.ref.row << ',' << m.ref.col << ',' << m.ref.chan << ',' << r << ',' << p.row << ','
           << p.col << ',' << p.chan << ',' << fmt("%.9g", m.scores[r]) << '\n';
      }
    }
  });
}

struct DenoiseArgs {
  std::string input, out, reference, theta_schedule = "matrix", engine = "fft";
  double sigma = 0.0, gamma_l = 1.0, gamma_s = 1.0;
  std::size_t passes = 0, k = 0, minibatch = 0, stride = 0, side = 0, window = 0, threads = 1;
  std::uint64_t seed = 0;
  bool simulate_noise = false, reset_transform = false;
};

void cmd_denoise(const DenoiseArgs& a, const CLI::App& sub, std::ostream& out) {
  if (!(a.sigma > 0.0)) throw ConfigError("--sigma must be positive");
  DenoiserConfig cfg = DenoiserConfig::for_sigma(a.sigma);
  if (sub.count("--passes")) cfg.passes = a.passes;
  if (sub.count("--K")) cfg.k = a.k;
  if (sub.count("--minibatch")) cfg.minibatch = a.minibatch;
  if (sub.count("--stride")) cfg.stride = a.stride;
  if (sub.count("--patch-side")) cfg.patch_side = a.side;
  if (sub.count("--window")) cfg.window = a.window;
  if (sub.count("--gamma-l")) cfg.gamma_l = a.gamma_l;
  if (sub.count("--gamma-s")) cfg.gamma_s = a.gamma_s;
  if (sub.count("--theta-schedule")) {
    cfg.theta_schedule.scale = a.theta_schedule == "paper" ? ThetaScale::paper : ThetaScale::matrix;
  }
  cfg.reset_transform_between_passes = a.reset_transform;
  cfg.engine = parse_engine(a.engine);
  cfg.threads = a.threads;
  cfg.validate();

  ImageTensor noisy = read_image(a.input);
  if (a.simulate_noise) noisy = add_gaussian_noise(noisy, {a.sigma, a.seed});
  const ImageTensor result = denoise(noisy, cfg);
  write_image(result, a.out);
  if (!a.reference.empty()) {
    out << "PSNR_dB=" << fmt("%.6f", psnr(read_image(a.reference), result)) << '\n';
  }
}

struct BenchArgs {
  std::string input, mode = "bm", engine = "fft", json_path, csv_path;
  std::size_t size = 128, channels = 1, side = 6, window = 30, k = 16, repeats = 3, threads = 1,
              passes = 0;
  double sigma = 20.0;
  std::uint64_t seed = 0;
};

void cmd_bench(const BenchArgs& a, const CLI::App& sub, std::ostream& out) {
  std::vector<BenchReport> reports;
  if (a.mode == "bm") {
    const ImageTensor img = a.input.empty() ? synthetic_uniform(a.size, a.size, a.channels, a.seed)
                                            : read_image(a.input);
    BenchOptions opts;
    opts.repeats = a.repeats;
    opts.threads = a.threads;
    opts.sample_seed = a.seed;
    reports.push_back(bench_bm(img, {a.side, img.channels(), 1}, SearchWindow::square(a.window),
                               a.k, parse_engine(a.engine), opts));
  } else if (a.mode == "denoise") {
    const ImageTensor clean = a.input.empty()
                                  ? synthetic_piecewise(a.size, a.size, a.channels, a.seed)
                                  : read_image(a.input);
    const ImageTensor noisy = add_gaussian_noise(clean, {a.sigma, a.seed});
    DenoiserConfig cfg = DenoiserConfig::for_sigma(a.sigma);
    cfg.patch_side = a.side;
    cfg.window = a.window;
    cfg.threads = a.threads;
    if (sub.count("--K")) cfg.k = a.k;
    if (sub.count("--passes")) cfg.passes = a.passes;
    reports = bench_denoise(noisy, clean, cfg, {parse_engine(a.engine)});
  } else {
    throw ConfigError("--mode must be bm or denoise");
  }

  for (const auto& r : reports) out << r.to_json() << '\n';
  out << BenchReport::csv_header() << '\n';
  for (const auto& r : reports) out << r.csv_row() << '\n';
  if (!a.json_path.empty()) {
    with_output(a.json_path, out, [&](std::ostream& os) {
      for (const auto& r : reports) os << r.to_json() << '\n';
    });
  }
  if (!a.csv_path.empty()) {
    with_output(a.csv_path, out, [&](std::ostream& os) {
      os << BenchReport::csv_header() << '\n';
      for (const auto& r : reports) os << r.csv_row() << '\n';
    });
  }
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Self-convolution block matching and multi-modality denoising"};
  app.require_subcommand(1);
  const std::size_t env_threads = threads_from_env(1);

  MatchArgs ma;
  ma.threads = env_threads;
  auto* match = app.add_subcommand("match", "Block matching; writes a CSV match table");
  match->add_option("--input", ma.input, "Image (.pgm or MMR)")->required();
  match->add_option("--patch-side", ma.side)->required()->check(CLI::PositiveNumber);
  match->add_option("--patch-depth", ma.depth, "Channels per patch (default: all)");
  match->add_option("--window", ma.window, "Positions per axis: N, RxC or whole");
  match->add_option("--chan-span", ma.chan_span, "Channel offsets searched (>1 enables 3D search)");
  match->add_option("-K,--K", ma.k)->required()->check(CLI::PositiveNumber);
  match->add_option("--metric", ma.metric)->check(CLI::IsMember({"euclidean", "ncc"}));
  match->add_option("--engine", ma.engine)->check(CLI::IsMember({"naive", "spatial", "fft"}));
  match->add_option("--stride", ma.stride)->check(CLI::PositiveNumber);
  match->add_option("--threads", ma.threads)->check(CLI::PositiveNumber);
  match->add_option("--out", ma.out, "CSV path, - for stdout");

  DenoiseArgs da;
  da.threads = env_threads;
  auto* den = app.add_subcommand("denoise", "Multi-pass online denoiser");
  den->add_option("--input", da.input)->required();
  den->add_option("--sigma", da.sigma, "Noise level on the 0-255 scale")->required();
  den->add_option("--out", da.out)->required();
  den->add_option("--passes", da.passes)->check(CLI::PositiveNumber);
  den->add_option("-K,--K", da.k)->check(CLI::PositiveNumber);
  den->add_option("--theta-schedule", da.theta_schedule)
      ->check(CLI::IsMember({"paper", "matrix"}));
  den->add_option("--minibatch", da.minibatch, "Groups per transform update (0 = auto)");
  den->add_option("--seed", da.seed, "Noise seed for --simulate-noise");
  den->add_flag("--simulate-noise", da.simulate_noise, "Add Gaussian noise of --sigma first");
  den->add_option("--reference", da.reference, "Clean image; prints PSNR_dB");
  den->add_option("--engine", da.engine)->check(CLI::IsMember({"naive", "spatial", "fft"}));
  den->add_option("--stride", da.stride)->check(CLI::PositiveNumber);
  den->add_option("--patch-side", da.side)->check(CLI::PositiveNumber);
  den->add_option("--window", da.window)->check(CLI::PositiveNumber);
  den->add_option("--gamma-l", da.gamma_l);
  den->add_option("--gamma-s", da.gamma_s);
  den->add_flag("--reset-transform", da.reset_transform, "Restart from the DCT every pass");
  den->add_option("--threads", da.threads)->check(CLI::PositiveNumber);

  std::string an_in, an_out;
  NoiseSpec an_spec;
  auto* addnoise = app.add_subcommand("addnoise", "Add seeded i.i.d. Gaussian noise");
  addnoise->add_option("--input", an_in)->required();
  addnoise->add_option("--out", an_out)->required();
  addnoise->add_option("--sigma", an_spec.sigma)->required()->check(CLI::NonNegativeNumber);
  addnoise->add_option("--seed", an_spec.seed);

  std::string ps_a, ps_b;
  double peak = 255.0;
  bool per_channel = false;
  auto* ps = app.add_subcommand("psnr", "Pooled PSNR between two images");
  ps->add_option("--input", ps_a)->required();
  ps->add_option("--reference", ps_b)->required();
  ps->add_option("--peak", peak)->check(CLI::PositiveNumber);
  ps->add_flag("--per-channel", per_channel);

  BenchArgs ba;
  ba.threads = env_threads;
  auto* bench = app.add_subcommand("bench", "Timing harness; prints JSON and CSV reports");
  bench->add_option("--mode", ba.mode)->check(CLI::IsMember({"bm", "denoise"}));
  bench->add_option("--input", ba.input, "Image; a synthetic one is generated when absent");
  bench->add_option("--size", ba.size)->check(CLI::PositiveNumber);
  bench->add_option("--channels", ba.channels)->check(CLI::PositiveNumber);
  bench->add_option("--seed", ba.seed);
  bench->add_option("--patch-side", ba.side)->check(CLI::PositiveNumber);
  bench->add_option("--window", ba.window)->check(CLI::PositiveNumber);
  bench->add_option("-K,--K", ba.k)->check(CLI::PositiveNumber);
  bench->add_option("--engine", ba.engine)->check(CLI::IsMember({"naive", "spatial", "fft"}));
  bench->add_option("--repeats", ba.repeats);
  bench->add_option("--threads", ba.threads)->check(CLI::PositiveNumber);
  bench->add_option("--sigma", ba.sigma);
  bench->add_option("--passes", ba.passes)->check(CLI::PositiveNumber);
  bench->add_option("--json", ba.json_path);
  bench->add_option("--csv", ba.csv_path);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << "run with --help for usage\n";
    return kUsage;
  }

  try {
    if (*match) {
      cmd_match(ma, out);
    } else if (*den) {
      cmd_denoise(da, *den, out);
    } else if (*addnoise) {
      write_image(add_gaussian_noise(read_image(an_in), an_spec), an_out);
    } else if (*ps) {
      const ImageTensor a = read_image(ps_a), b = read_image(ps_b);
      out << "PSNR_dB=" << fmt("%.6f", psnr(a, b, peak)) << '\n';
      if (per_channel) {
        const auto per = psnr_per_channel(a, b, peak);
        for (std::size_t c = 0; c < per.size(); ++c) {
          out << "PSNR_dB[" << c << "]=" << fmt("%.6f", per[c]) << '\n';
        }
      }
    } else if (*bench) {
      cmd_bench(ba, *bench, out);
    }
  } catch (const FormatError& e) {
    err << "format error: " << e.what() << '\n';
    return kFormat;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kNumeric;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kNumeric;
  }
  return kOk;
}

}  // namespace selfconv::cli
