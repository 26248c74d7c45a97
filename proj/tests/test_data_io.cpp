#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>

#include "doctest.h"
#include "test_support.hpp"
#include "xatk/data_io.hpp"

using namespace xatk;
using xatk::test::temp_path;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

void dump(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

TEST_CASE("toy dataset is deterministic and well-formed") {
  const auto ds = generate_toy_dataset(5, 7, 12, 99);
  CHECK(ds.size() == 35);
  CHECK(ds.class_count == 5);
  CHECK(ds.image_shape() == Shape{12, 12, 3});
  CHECK_NOTHROW(ds.validate());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    CHECK(ds.labels[i] == static_cast<int>(i) / 7);
    for (double v : ds.images[i].data()) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  }
  CHECK(ds.indices_of_class(2) ==
        std::vector<std::size_t>{14, 15, 16, 17, 18, 19, 20});

  const auto again = generate_toy_dataset(5, 7, 12, 99);
  CHECK(ds == again);
  const auto other = generate_toy_dataset(5, 7, 12, 100);
  CHECK(ds.images[0] != other.images[0]);
}

TEST_CASE("ppm writes the exact bytes for a 1x1 image") {
  ImageTensor px(1, 1, 3);
  px[0] = 0.0;
  px[1] = 128.0 / 255.0;
  px[2] = 1.0;
  const std::string path = temp_path("ppm");
  ppm_write(path, px);
  const std::string bytes = slurp(path);
  std::string expected = "P6\n1 1\n255\n";
  expected.push_back(static_cast<char>(0));
  expected.push_back(static_cast<char>(128));
  expected.push_back(static_cast<char>(255));
  CHECK(bytes == expected);
  std::remove(path.c_str());
}

TEST_CASE("ppm round-trip is lossless for 8-bit-exact tensors") {
  Rng rng(13);
  ImageTensor img(9, 5, 3);
  for (auto& v : img.data()) v = static_cast<double>(rng.below(256)) / 255.0;
  const std::string path = temp_path("ppm");
  ppm_write(path, img);
  const ImageTensor back = ppm_read(path);
  CHECK(back == img);
  std::remove(path.c_str());
}

TEST_CASE("ppm reader tolerates comments and flags format failures") {
  const std::string path = temp_path("ppm");

  std::string commented = "P6\n# a comment\n1 1\n# more\n255\n";
  commented.append(3, static_cast<char>(7));
  dump(path, commented);
  const ImageTensor img = ppm_read(path);
  CHECK(img.shape() == Shape{1, 1, 3});
  CHECK(img[0] == doctest::Approx(7.0 / 255.0));

  dump(path, "P5\n1 1\n255\n???");
  try {
    ppm_read(path);
    CHECK(false);
  } catch (const FormatError& e) {
    CHECK(e.kind == FormatError::Kind::BadMagic);
  }

  std::string sixteen = "P6\n1 1\n65535\n";
  sixteen.append(6, static_cast<char>(0));
  dump(path, sixteen);
  try {
    ppm_read(path);
    CHECK(false);
  } catch (const FormatError& e) {
    CHECK(e.kind == FormatError::Kind::BadValue);
  }

  std::string cut = "P6\n2 2\n255\n";
  cut.append(5, static_cast<char>(0));  // needs 12 payload bytes
  dump(path, cut);
  try {
    ppm_read(path);
    CHECK(false);
  } catch (const FormatError& e) {
    CHECK(e.kind == FormatError::Kind::Truncated);
    CHECK(e.offset == 5);
  }

  std::remove(path.c_str());
  try {
    ppm_read(path);
    CHECK(false);
  } catch (const FormatError& e) {
    CHECK(e.kind == FormatError::Kind::Io);
  }
}

TEST_CASE("ppm writer rejects non-RGB and out-of-range inputs") {
  const std::string path = temp_path("ppm");
  CHECK_THROWS_AS(ppm_write(path, ImageTensor(2, 2, 1, 0.5)), ShapeError);
  ImageTensor bad(2, 2, 3, 0.5);
  bad[0] = 1.5;
  CHECK_THROWS_AS(ppm_write(path, bad), DataError);
}

TEST_CASE("dataset container round-trips exactly") {
  auto ds = generate_toy_dataset(4, 3, 10, 55);
  ds.provenance = "unit-test fixture";
  const std::string path = temp_path("dataset");
  dataset_save(path, ds);
  const LabeledDataset back = dataset_load(path);
  CHECK(back == ds);
  std::remove(path.c_str());
}

TEST_CASE("dataset container reports structured failures") {
  const auto ds = generate_toy_dataset(2, 2, 8, 56);
  const std::string path = temp_path("dataset");
  dataset_save(path, ds);
  const std::string good = slurp(path);

  std::string bad_magic = good;
  bad_magic[0] = 'Q';
  dump(path, bad_magic);
  try {
    dataset_load(path);
    CHECK(false);
  } catch (const FormatError& e) {
    CHECK(e.kind == FormatError::Kind::BadMagic);
  }

  std::string bad_version = good;
  bad_version[7] = '2';
  dump(path, bad_version);
  try {
    dataset_load(path);
    CHECK(false);
  } catch (const FormatError& e) {
    CHECK(e.kind == FormatError::Kind::BadVersion);
  }

  dump(path, good.substr(0, good.size() - 9));
  try {
    dataset_load(path);
    CHECK(false);
  } catch (const FormatError& e) {
    CHECK(e.kind == FormatError::Kind::Truncated);
  }
  std::remove(path.c_str());
}

TEST_CASE("tensor container handles signed payloads") {
  std::vector<Tensor> ts;
  ts.emplace_back(3, 2, 1, -4.25);
  ts.emplace_back(1, 1, 5);
  Rng rng(77);
  for (auto& v : ts[1].data()) v = rng.gaussian() * 10.0;

  const std::string path = temp_path("tensors");
  tensors_save(path, ts);
  const auto back = tensors_load(path);
  REQUIRE(back.size() == 2);
  CHECK(back[0] == ts[0]);
  CHECK(back[1] == ts[1]);

  const std::string good = slurp(path);
  std::string bad = good;
  bad[3] = 'Z';
  dump(path, bad);
  try {
    tensors_load(path);
    CHECK(false);
  } catch (const FormatError& e) {
    CHECK(e.kind == FormatError::Kind::BadMagic);
  }
  std::remove(path.c_str());
}
