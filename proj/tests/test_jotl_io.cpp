#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include "jotlas/errors.hpp"
#include "jotlas/jotl_io.hpp"
#include "test_support.hpp"

using namespace jotlas;

namespace {

namespace fs = std::filesystem;

std::string temp_path(const std::string& name) {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / "jotlas_io_test";
    fs::create_directories(d);
    return d;
  }();
  return (dir / name).string();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void spit(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

JotlTensor random_tensor(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> ndims_dist(1, 4);
  std::uniform_int_distribution<int> dim_dist(1, 5);
  std::uniform_int_distribution<int> dtype_dist(0, 2);
  std::normal_distribution<double> gauss;

  JotlTensor t;
  t.dtype = static_cast<JotlDtype>(dtype_dist(rng));
  const int nd = ndims_dist(rng);
  for (int i = 0; i < nd; ++i) t.dims.push_back(static_cast<std::uint32_t>(dim_dist(rng)));
  const std::size_t n = t.element_count();
  if (t.dtype == JotlDtype::real64) {
    for (std::size_t i = 0; i < n; ++i) t.rvalues.push_back(gauss(rng));
  } else if (t.dtype == JotlDtype::complex128) {
    for (std::size_t i = 0; i < n; ++i) t.cvalues.emplace_back(gauss(rng), gauss(rng));
  } else {
    // complex64 payloads must be float-representable for a bit-exact trip
    for (std::size_t i = 0; i < n; ++i) {
      t.cvalues.emplace_back(static_cast<float>(gauss(rng)), static_cast<float>(gauss(rng)));
    }
  }
  return t;
}

bool bit_equal(const JotlTensor& a, const JotlTensor& b) {
  if (a.dtype != b.dtype || a.dims != b.dims) return false;
  if (a.rvalues.size() != b.rvalues.size() || a.cvalues.size() != b.cvalues.size()) return false;
  for (std::size_t i = 0; i < a.rvalues.size(); ++i) {
    if (a.rvalues[i] != b.rvalues[i]) return false;
  }
  for (std::size_t i = 0; i < a.cvalues.size(); ++i) {
    if (a.cvalues[i] != b.cvalues[i]) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("complex128 4x4x4 round trip is bit exact") {
  std::mt19937_64 rng(1);
  JotlTensor t;
  t.dtype = JotlDtype::complex128;
  t.dims = {4, 4, 4};
  std::normal_distribution<double> gauss;
  for (int i = 0; i < 64; ++i) t.cvalues.emplace_back(gauss(rng), gauss(rng));

  const std::string path = temp_path("roundtrip.jotl");
  save_jotl(path, t);
  CHECK(bit_equal(load_jotl(path), t));
}

TEST_CASE("200 randomized round trips across dtypes and shapes") {
  std::mt19937_64 rng(2024);
  for (int i = 0; i < 200; ++i) {
    const JotlTensor t = random_tensor(rng);
    const std::string path = temp_path("rand.jotl");
    save_jotl(path, t);
    CHECK(bit_equal(load_jotl(path), t));
  }
}

TEST_CASE("dynamic image adapter round trips") {
  const DynamicImage x = jotlas::testing::random_image(6, 5, 3, 7);
  const std::string path = temp_path("image.jotl");
  save_image_jotl(path, x);
  const DynamicImage y = load_image_jotl(path);
  REQUIRE(y.same_shape(x));
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(y.data()[i] == x.data()[i]);
}

TEST_CASE("corrupted magic raises the bad-magic error") {
  const std::string path = temp_path("magic.jotl");
  JotlTensor t;
  t.dtype = JotlDtype::real64;
  t.dims = {3};
  t.rvalues = {1.0, 2.0, 3.0};
  save_jotl(path, t);
  std::string bytes = slurp(path);
  bytes[0] = 'X';
  spit(path, bytes);
  CHECK_THROWS_AS(load_jotl(path), JotlBadMagicError);
}

TEST_CASE("truncated payload names expected and actual byte counts") {
  const std::string path = temp_path("trunc.jotl");
  JotlTensor t;
  t.dtype = JotlDtype::real64;
  t.dims = {4};
  t.rvalues = {1.0, 2.0, 3.0, 4.0};
  save_jotl(path, t);
  std::string bytes = slurp(path);
  bytes.resize(bytes.size() - 5);
  spit(path, bytes);
  try {
    load_jotl(path);
    FAIL("expected JotlTruncatedError");
  } catch (const JotlTruncatedError& e) {
    const std::string what = e.what();
    CHECK(what.find("32") != std::string::npos);  // expected payload bytes
    CHECK(what.find("27") != std::string::npos);  // actual remaining bytes
  }
}

TEST_CASE("unsupported version and dtype raise distinct errors") {
  const std::string path = temp_path("version.jotl");
  JotlTensor t;
  t.dtype = JotlDtype::real64;
  t.dims = {1};
  t.rvalues = {5.0};
  save_jotl(path, t);

  std::string bytes = slurp(path);
  std::string bumped = bytes;
  bumped[4] = 9;  // version low byte
  spit(path, bumped);
  CHECK_THROWS_AS(load_jotl(path), JotlUnsupportedError);

  std::string bad_dtype = bytes;
  bad_dtype[6] = 7;
  spit(path, bad_dtype);
  CHECK_THROWS_AS(load_jotl(path), JotlUnsupportedError);

  CHECK_THROWS_AS(load_jotl(temp_path("does_not_exist.jotl")), IoError);
}

TEST_CASE("pgm export writes the exact header and scaled payload") {
  DynamicImage x(3, 4, 2);
  x(1, 2, 0) = Complex(2.0, 0.0);  // global max
  x(0, 0, 0) = Complex(1.0, 0.0);
  const std::string path = temp_path("frame.pgm");
  export_frame_pgm(x, 0, path);
  const std::string bytes = slurp(path);
  const std::string header = "P5\n4 3\n255\n";
  REQUIRE(bytes.size() == header.size() + 12);
  CHECK(bytes.substr(0, header.size()) == header);
  CHECK(static_cast<unsigned char>(bytes[header.size() + 0]) == 128);  // 1.0 / 2.0
  CHECK(static_cast<unsigned char>(bytes[header.size() + 1 * 4 + 2]) == 255);

  DynamicImage zero(2, 2, 1);
  const std::string zpath = temp_path("zero.pgm");
  export_frame_pgm(zero, 0, zpath);
  const std::string zbytes = slurp(zpath);
  const std::string zheader = "P5\n2 2\n255\n";
  REQUIRE(zbytes.size() == zheader.size() + 4);
  for (std::size_t i = zheader.size(); i < zbytes.size(); ++i) {
    CHECK(zbytes[i] == 0);
  }

  CHECK_THROWS_AS(export_frame_pgm(x, 2, path), std::out_of_range);
}
