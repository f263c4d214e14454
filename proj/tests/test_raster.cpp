#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include <zlib.h>

#include "oracles.hpp"
#include "retigraph/errors.hpp"
#include "retigraph/fsio.hpp"
#include "retigraph/raster.hpp"

using namespace retigraph;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

BinaryGrid from_rows(const std::vector<std::string>& rows) {
  BinaryGrid g(static_cast<int>(rows[0].size()), static_cast<int>(rows.size()));
  for (int y = 0; y < g.height; ++y)
    for (int x = 0; x < g.width; ++x) g.set(x, y, rows[y][x] == '#');
  return g;
}

}  // namespace

TEST_CASE("load_image reads 8-bit PGM with linear rescale") {
  const std::string path = temp_path("retigraph_t8.pgm");
  {
    std::ofstream out(path, std::ios::binary);
    out << "P5\n2 1\n255\n";
    const unsigned char bytes[2] = {0, 128};
    out.write(reinterpret_cast<const char*>(bytes), 2);
  }
  const IntensityGrid img = load_image(path);
  CHECK(img.width == 2);
  CHECK(img.height == 1);
  CHECK(img.values[0] == doctest::Approx(0.0));
  CHECK(img.values[1] == doctest::Approx(128.0 / 255.0));
  CHECK(img.pixel_size_mm == doctest::Approx(3.0 / 304.0));
}

TEST_CASE("load_image saturated 304x304 gives all ones") {
  const std::string path = temp_path("retigraph_sat.pgm");
  {
    std::ofstream out(path, std::ios::binary);
    out << "P5\n304 304\n255\n";
    std::vector<char> bytes(304 * 304, static_cast<char>(255));
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  }
  const IntensityGrid img = load_image(path);
  CHECK(img.width == 304);
  CHECK(img.height == 304);
  for (double v : img.values) REQUIRE(v == 1.0);
}

TEST_CASE("load_image reads 16-bit PGM") {
  const std::string path = temp_path("retigraph_t16.pgm");
  {
    std::ofstream out(path, std::ios::binary);
    out << "P5\n1 1\n65535\n";
    const unsigned char bytes[2] = {0xff, 0xff};  // big endian 65535
    out.write(reinterpret_cast<const char*>(bytes), 2);
  }
  CHECK(load_image(path).values[0] == doctest::Approx(1.0));
}

TEST_CASE("load_image errors") {
  CHECK_THROWS_AS(load_image(temp_path("retigraph_missing.pgm")), IoError);
  const std::string path = temp_path("retigraph_bad.img");
  write_file_atomic(path, std::string("NOTANIMAGE"));
  CHECK_THROWS_AS(load_image(path), FormatError);
  const std::string trunc = temp_path("retigraph_trunc.pgm");
  write_file_atomic(trunc, std::string("P5\n4 4\n255\nab"));
  CHECK_THROWS_AS(load_image(trunc), FormatError);
}

TEST_CASE("load_image reads grayscale PNG") {
  // Hand-assembled 8-bit grayscale PNG, stored deflate, filter 0.
  const int w = 3, h = 2;
  const unsigned char pixels[h][w] = {{0, 128, 255}, {10, 20, 30}};
  std::vector<uint8_t> raw;
  for (int y = 0; y < h; ++y) {
    raw.push_back(0);
    for (int x = 0; x < w; ++x) raw.push_back(pixels[y][x]);
  }
  std::vector<uint8_t> z{0x78, 0x01, 0x01};
  z.push_back(static_cast<uint8_t>(raw.size() & 0xff));
  z.push_back(static_cast<uint8_t>(raw.size() >> 8));
  z.push_back(static_cast<uint8_t>(~raw.size() & 0xff));
  z.push_back(static_cast<uint8_t>((~raw.size() >> 8) & 0xff));
  z.insert(z.end(), raw.begin(), raw.end());
  const uint32_t adler = adler32(1, raw.data(), static_cast<uInt>(raw.size()));
  for (int i = 3; i >= 0; --i) z.push_back(static_cast<uint8_t>(adler >> (8 * i)));

  std::vector<uint8_t> png{0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  auto chunk = [&](const char type[4], const std::vector<uint8_t>& data) {
    const uint32_t len = static_cast<uint32_t>(data.size());
    for (int i = 3; i >= 0; --i) png.push_back(static_cast<uint8_t>(len >> (8 * i)));
    const size_t start = png.size();
    png.insert(png.end(), type, type + 4);
    png.insert(png.end(), data.begin(), data.end());
    const uint32_t crc = crc32(0, png.data() + start, static_cast<uInt>(png.size() - start));
    for (int i = 3; i >= 0; --i) png.push_back(static_cast<uint8_t>(crc >> (8 * i)));
  };
  chunk("IHDR", {0, 0, 0, w, 0, 0, 0, h, 8, 0, 0, 0, 0});
  chunk("IDAT", z);
  chunk("IEND", {});

  const std::string path = temp_path("retigraph_gray.png");
  write_file_atomic(path, png.data(), png.size());
  const IntensityGrid img = load_image(path);
  CHECK(img.width == w);
  CHECK(img.height == h);
  CHECK(img.at(1, 0) == doctest::Approx(128.0 / 255.0));
  CHECK(img.at(2, 0) == doctest::Approx(1.0));
  CHECK(img.at(0, 1) == doctest::Approx(10.0 / 255.0));
}

TEST_CASE("png encoder round-trips through the save path deterministically") {
  RgbImage img(5, 4);
  for (size_t i = 0; i < img.data.size(); ++i) img.data[i] = static_cast<uint8_t>(i * 7);
  const std::vector<uint8_t> a = encode_png(img);
  const std::vector<uint8_t> b = encode_png(img);
  CHECK(a == b);
  CHECK(a.size() > 50);
  // PNG signature
  CHECK(a[0] == 0x89);
  CHECK(a[1] == 'P');
}

TEST_CASE("threshold semantics") {
  IntensityGrid g;
  g.width = 3;
  g.height = 1;
  g.values = {0.2, 0.5, 0.9};
  const BinaryGrid m = threshold(g, 0.5);
  CHECK_FALSE(m.at(0, 0));
  CHECK(m.at(1, 0));
  CHECK(m.at(2, 0));

  IntensityGrid zeros;
  zeros.width = 4;
  zeros.height = 4;
  zeros.values.assign(16, 0.0);
  CHECK(threshold(zeros, 0.5).count() == 0);

  CHECK_THROWS_AS(threshold(g, 1.5), ArgumentError);
  CHECK_THROWS_AS(threshold(g, -0.1), ArgumentError);
}

TEST_CASE("threshold matches per-pixel oracle on random grids") {
  Rng rng(41);
  IntensityGrid g;
  g.width = 64;
  g.height = 64;
  g.values.resize(64 * 64);
  for (double& v : g.values) v = rng.uniform();
  const BinaryGrid m = threshold(g, 0.5);
  for (size_t i = 0; i < g.values.size(); ++i) REQUIRE((m.mask[i] != 0) == (g.values[i] >= 0.5));
}

TEST_CASE("connected_components basics") {
  BinaryGrid empty(5, 5);
  CHECK(connected_components(empty, 4).num_labels == 0);

  BinaryGrid diag(3, 3);
  diag.set(0, 0, true);
  diag.set(1, 1, true);
  CHECK(connected_components(diag, 4).num_labels == 2);
  CHECK(connected_components(diag, 8).num_labels == 1);

  CHECK_THROWS_AS(connected_components(diag, 6), ArgumentError);
}

TEST_CASE("connected_components labels follow raster-first order") {
  const BinaryGrid g = from_rows({
      ".#.#",
      "....",
      "#..#",
  });
  const LabelGrid l = connected_components(g, 4);
  CHECK(l.num_labels == 4);
  CHECK(l.at(1, 0) == 1);
  CHECK(l.at(3, 0) == 2);
  CHECK(l.at(0, 2) == 3);
  CHECK(l.at(3, 2) == 4);
}

TEST_CASE("connected_components equals flood fill on random 64x64 masks") {
  Rng rng(7);
  for (int it = 0; it < 50; ++it) {
    const BinaryGrid g = oracle::random_mask(64, rng, 0.4 + 0.3 * rng.uniform());
    for (int conn : {4, 8}) {
      const LabelGrid ours = connected_components(g, conn);
      const LabelGrid ref = oracle::flood_fill_components(g, conn);
      REQUIRE(ours.num_labels == ref.num_labels);
      REQUIRE(ours.labels == ref.labels);
    }
  }
}

TEST_CASE("skeletonize on empty mask") {
  BinaryGrid empty(8, 8);
  CHECK(skeletonize(empty).count() == 0);
}

TEST_CASE("skeletonize thins a 3-wide bar to a single path") {
  BinaryGrid bar(26, 9);
  for (int y = 3; y <= 5; ++y)
    for (int x = 3; x < 23; ++x) bar.set(x, y, true);
  const BinaryGrid skel = skeletonize(bar);

  // subset of input
  for (int y = 0; y < bar.height; ++y)
    for (int x = 0; x < bar.width; ++x)
      if (skel.at(x, y)) REQUIRE(bar.at(x, y));
  // still one component, 1 px thick
  CHECK(oracle::component_count(skel, 8) == 1);
  CHECK(oracle::is_thin(skel));
  // spans (nearly) the bar's horizontal extent; end behavior may trim a pixel
  int min_x = bar.width, max_x = -1;
  for (int y = 0; y < skel.height; ++y)
    for (int x = 0; x < skel.width; ++x)
      if (skel.at(x, y)) {
        min_x = std::min(min_x, x);
        max_x = std::max(max_x, x);
      }
  CHECK(min_x <= 5);
  CHECK(max_x >= 20);
  // every column in the interior holds exactly one skeleton pixel
  for (int x = 6; x <= 19; ++x) {
    int count = 0;
    for (int y = 0; y < skel.height; ++y) count += skel.at(x, y);
    REQUIRE(count == 1);
  }
}

TEST_CASE("skeletonize invariants on random blobs") {
  Rng rng(11);
  for (int it = 0; it < 60; ++it) {
    const BinaryGrid g = oracle::random_blobs(64, rng);
    const BinaryGrid skel = skeletonize(g);
    for (size_t i = 0; i < g.mask.size(); ++i)
      if (skel.mask[i]) REQUIRE(g.mask[i]);
    REQUIRE(oracle::component_count(skel, 8) == oracle::component_count(g, 8));
    REQUIRE(skeletonize(skel) == skel);
  }
}

TEST_CASE("distance_transform examples") {
  BinaryGrid full(5, 5);
  for (auto& v : full.mask) v = 1;
  const std::vector<double> d = distance_transform(full);
  CHECK(d[2 * 5 + 2] == doctest::Approx(3.0));

  BinaryGrid single(7, 7);
  single.set(3, 3, true);
  CHECK(distance_transform(single)[3 * 7 + 3] == doctest::Approx(1.0));
  CHECK(distance_transform(single)[0] == 0.0);
}

TEST_CASE("distance_transform equals brute force on random masks") {
  Rng rng(23);
  for (int it = 0; it < 10; ++it) {
    const BinaryGrid g = oracle::random_mask(64, rng, 0.7);
    const std::vector<double> fast = distance_transform(g);
    const std::vector<double> slow = oracle::brute_force_distance(g);
    for (size_t i = 0; i < fast.size(); ++i) REQUIRE(fast[i] == doctest::Approx(slow[i]).epsilon(1e-9));
  }
}

TEST_CASE("region_properties single pixel") {
  BinaryGrid g(5, 5);
  g.set(2, 2, true);
  IntensityGrid img;
  img.width = img.height = 5;
  img.values.assign(25, 0.5);
  const LabelGrid l = connected_components(g, 4);
  const RegionProps p = region_properties(l, 1, img);
  CHECK(p.area == 1.0);
  CHECK(p.eccentricity == 0.0);
  CHECK(p.solidity == 1.0);
  CHECK(p.perimeter == 4.0);
  CHECK(p.centroid.x == doctest::Approx(2.0));
  CHECK(p.mean_intensity == doctest::Approx(0.5));
}

TEST_CASE("region_properties 10x10 square") {
  BinaryGrid g(20, 20);
  for (int y = 4; y < 14; ++y)
    for (int x = 5; x < 15; ++x) g.set(x, y, true);
  IntensityGrid img;
  img.width = img.height = 20;
  img.values.assign(400, 1.0);
  const LabelGrid l = connected_components(g, 4);
  const RegionProps p = region_properties(l, 1, img);
  CHECK(p.area == 100.0);
  CHECK(p.perimeter == 40.0);
  CHECK(p.centroid.x == doctest::Approx(9.5));
  CHECK(p.centroid.y == doctest::Approx(8.5));
  // second moment of 0..9 about its mean is 8.25 -> axis length 4*sqrt(8.25)
  CHECK(p.major_axis_len == doctest::Approx(4.0 * std::sqrt(8.25)));
  CHECK(p.minor_axis_len == doctest::Approx(p.major_axis_len));
  CHECK(p.eccentricity == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(p.solidity == 1.0);  // clamped: pixel-center hull underestimates area
}

TEST_CASE("region_properties 1x20 line") {
  BinaryGrid g(24, 5);
  for (int x = 2; x < 22; ++x) g.set(x, 2, true);
  IntensityGrid img;
  img.width = 24;
  img.height = 5;
  img.values.assign(24 * 5, 0.0);
  const LabelGrid l = connected_components(g, 4);
  const RegionProps p = region_properties(l, 1, img);
  CHECK(p.eccentricity > 0.99);
  CHECK(p.major_axis_len > 10.0 * p.minor_axis_len);
  CHECK_THROWS_AS(region_properties(l, 2, img), ArgumentError);
  CHECK_THROWS_AS(region_properties(l, 0, img), ArgumentError);
}

TEST_CASE("region areas partition the foreground") {
  Rng rng(31);
  const BinaryGrid g = oracle::random_blobs(48, rng);
  IntensityGrid img;
  img.width = img.height = 48;
  img.values.assign(48 * 48, 0.0);
  const LabelGrid l = connected_components(g, 8);
  double total = 0.0;
  for (int32_t lab = 1; lab <= l.num_labels; ++lab) {
    const RegionProps p = region_properties(l, lab, img);
    REQUIRE(p.solidity > 0.0);
    REQUIRE(p.solidity <= 1.0);
    REQUIRE(p.minor_axis_len <= p.major_axis_len + 1e-12);
    total += p.area;
  }
  CHECK(total == doctest::Approx(static_cast<double>(g.count())));
}

TEST_CASE("pixel mask round trip") {
  Rng rng(5);
  const BinaryGrid g = oracle::random_mask(16, rng, 0.35);
  const PixelMask m = mask_from_grid(g);
  CHECK(m.pixel_count() == g.count());
  BinaryGrid back(16, 16);
  m.for_each_pixel([&](int x, int y) { back.set(x, y, true); });
  CHECK(back == g);

  std::vector<Pixel> px;
  m.for_each_pixel([&](int x, int y) { px.push_back({x, y}); });
  CHECK(mask_from_pixels(px) == m);
}
