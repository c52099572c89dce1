#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "selfconv/errors.hpp"
#include "selfconv/tensor.hpp"
#include "support.hpp"

using namespace selfconv;
using selfconv::testing::random_image;
using selfconv::testing::sample_3x3;

TEST(ImageTensor, RejectsNonFiniteAndBadLength) {
  EXPECT_THROW(ImageTensor(2, 2, 1, std::vector<double>{1, 2, 3}), ShapeError);
  EXPECT_THROW(ImageTensor(1, 1, 1, std::vector<double>{std::nan("")}), NumericError);
  EXPECT_THROW(ImageTensor(1, 1, 1, std::vector<double>{INFINITY}), NumericError);
}

TEST(ImageTensor, PlanarIndexing) {
  ImageTensor t(2, 3, 2);
  t(1, 2, 1) = 7.0;
  EXPECT_EQ(t.data()[(1 * 2 + 1) * 3 + 2], 7.0);
  EXPECT_EQ(t.channel(1)[5], 7.0);
}

TEST(ExtractPatch, OneByOneIsThePixel) {
  const ImageTensor img = random_image(5, 5, 1, 1);
  EXPECT_EQ(extract_patch(img, {0, 0, 0}, {1, 1, 1})(0, 0), img(0, 0));
}

TEST(ExtractPatch, TopLeftTwoByTwo) {
  EXPECT_EQ(extract_patch(sample_3x3(), {0, 0, 0}, {2, 1, 1}), ImageTensor::from_rows({{1, 2}, {4, 5}}));
}

TEST(ExtractPatch, OutOfBoundsThrows) {
  EXPECT_THROW(extract_patch(sample_3x3(), {2, 2, 0}, {2, 1, 1}), BoundsError);
}

TEST(Vectorize, FirstModeUnfolding) {
  const std::vector<double> want{1, 4, 2, 5};
  EXPECT_EQ(vectorize(ImageTensor::from_rows({{1, 2}, {4, 5}})), want);
}

TEST(Vectorize, ChannelsConcatenate) {
  const ImageTensor p(1, 1, 2, std::vector<double>{3.5, -1.0});
  EXPECT_EQ(vectorize(p), (std::vector<double>{3.5, -1.0}));
}

TEST(Vectorize, DevectorizeInverts) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const ImageTensor p = random_image(4, 4, 3, seed, false);
    EXPECT_EQ(devectorize(vectorize(p), 4, 3), p);
  }
}

TEST(Vectorize, InPlaceMatchesAllocating) {
  const ImageTensor img = random_image(10, 9, 3, 4);
  const PatchGeometry g{3, 2, 1};
  std::vector<double> out(g.length());
  vectorize_patch(img, {4, 5, 1}, g, out);
  EXPECT_EQ(out, vectorize(extract_patch(img, {4, 5, 1}, g)));
}

TEST(ZeroPad, Definition) {
  EXPECT_EQ(zero_pad(ImageTensor::from_rows({{1}}), 2, 2), ImageTensor::from_rows({{1, 0}, {0, 0}}));
  const ImageTensor p = random_image(3, 4, 1, 2);
  EXPECT_EQ(zero_pad(p, 3, 4), p);
  const ImageTensor padded = zero_pad(p, 7, 9);
  const auto sum = [](std::span<const double> s) { return std::accumulate(s.begin(), s.end(), 0.0); };
  EXPECT_DOUBLE_EQ(sum(padded.data()), sum(p.data()));
}

TEST(ValidPositions, WholeImageCount) {
  const ImageTensor img(64, 64);
  EXPECT_EQ(valid_positions(img, {6, 1, 1}, SearchWindow::whole(), {10, 10, 0}).size(), 59u * 59u);
}

TEST(ValidPositions, ZeroHalfWidthIsRefOnly) {
  const ImageTensor img(20, 20);
  const auto p = valid_positions(img, {4, 1, 1}, SearchWindow::from_half_width(0, 0), {7, 3, 0});
  ASSERT_EQ(p.size(), 1u);
  EXPECT_EQ(p[0], (PatchRef{7, 3, 0}));
}

TEST(ValidPositions, RasterOrderOnSmallImage) {
  const auto p = valid_positions(sample_3x3(), {2, 1, 1}, SearchWindow::whole(), {0, 0, 0});
  const std::vector<PatchRef> want{{0, 0, 0}, {0, 1, 0}, {1, 0, 0}, {1, 1, 0}};
  EXPECT_EQ(p, want);
}

TEST(ValidPositions, WindowIsClippedAndContainsRef) {
  const ImageTensor img(30, 40, 3);
  const PatchGeometry g{5, 2, 1};
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const PatchRef ref{rng() % 26, rng() % 36, rng() % 2};
    const SearchWindow win = SearchWindow::square(1 + rng() % 15, 1 + rng() % 3);
    const PositionRange r = window_range(img, g, win, ref);
    EXPECT_TRUE(r.contains(ref));
    EXPECT_LE(r.row_hi + g.side, img.height());
    EXPECT_LE(r.col_hi + g.side, img.width());
    EXPECT_LE(r.chan_hi + g.depth, img.channels());
    EXPECT_LE(r.rows(), win.rows);
    EXPECT_LE(r.chans(), win.chan_span);
    EXPECT_EQ(valid_positions(img, g, win, ref).size(), r.count());
  }
}

TEST(ValidPositions, WholeCountForFullDepth) {
  const ImageTensor img(17, 23, 4);
  EXPECT_EQ(valid_positions(img, {5, 4, 1}, SearchWindow::whole(), {0, 0, 0}).size(), 13u * 19u);
}

TEST(SquaredNormMap, KnownValues) {
  const PositionMap m = squared_norm_map(sample_3x3(), {2, 1, 1});
  EXPECT_EQ(m.values, (std::vector<double>{46, 74, 154, 206}));
  const PositionMap ones = squared_norm_map(ImageTensor(5, 5, 1, 1.0), {2, 1, 1});
  for (double v : ones.values) EXPECT_EQ(v, 4.0);
}

TEST(SquaredNormMap, MatchesDirectSumsOfSquares) {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const ImageTensor img = random_image(128, 128, 4, seed, seed % 2 == 1);
    const PatchGeometry g{7, 1 + seed % 4, 1};
    const PositionMap m = squared_norm_map(img, g);
    std::mt19937_64 rng(seed);
    for (int i = 0; i < 300; ++i) {
      const PatchRef p{rng() % 122, rng() % 122, rng() % (5 - g.depth)};
      double want = 0.0;
      for (double v : vectorize(extract_patch(img, p, g))) want += v * v;
      EXPECT_NEAR(m.at(p), want, 1e-9 * want);
      EXPECT_GE(m.at(p), 0.0);
    }
  }
}

TEST(ReferenceGrid, IncludeLastCoversEveryPixel) {
  const ImageTensor img(23, 19, 1);
  const PatchGeometry g{6, 1, 4};
  const auto refs = reference_grid(img, g, true);
  Aggregator acc(23, 19, 1);
  for (const auto& r : refs) acc.deposit(extract_patch(img, r, g), r);
  EXPECT_TRUE(acc.finalize().fully_covered());
  EXPECT_FALSE(reference_grid(img, g, false).size() == refs.size());
}

TEST(Aggregate, SinglePatchCoveringCanvas) {
  const ImageTensor p = random_image(4, 4, 2, 9, false);
  const std::vector<PlacedPatch> groups{{p, {0, 0, 0}}};
  EXPECT_EQ(aggregate(groups, 4, 4, 2).image, p);
}

TEST(Aggregate, IdenticalOverlapsKeepValues) {
  const ImageTensor p(3, 3, 1, 5.0);
  const std::vector<PlacedPatch> groups{{p, {0, 0, 0}}, {p, {1, 1, 0}}};
  const ImageTensor out = aggregate(groups, 4, 4, 1).image;
  EXPECT_EQ(out(1, 1), 5.0);
  EXPECT_EQ(out(2, 2), 5.0);
  EXPECT_EQ(out(0, 3), 0.0);
}

TEST(Aggregate, AllPatchesRoundTrip) {
  const ImageTensor img = random_image(20, 17, 2, 11, false);
  const PatchGeometry g{5, 1, 1};
  std::vector<PlacedPatch> groups;
  for (const auto& r : reference_grid(img, g, false)) groups.emplace_back(extract_patch(img, r, g), r);
  const ImageTensor out = aggregate(groups, 20, 17, 2).image;
  for (std::size_t i = 0; i < img.size(); ++i) EXPECT_NEAR(out.data()[i], img.data()[i], 1e-12);
}

TEST(Aggregate, EmptyThrows) {
  EXPECT_THROW(aggregate({}, 3, 3, 1), EmptyAggregation);
}
