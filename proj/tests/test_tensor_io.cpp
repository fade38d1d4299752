#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <functional>
#include <limits>
#include <random>

#include "embclust/error.hpp"
#include "embclust/tensor_io.hpp"
#include "oracles.hpp"

using namespace embclust;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::io;
}

FeatureMatrix small() {
  FeatureMatrix m;
  m.ids = {"a", "b"};
  m.data.resize(2, 3);
  m.data << 1, 2, 3, 4, 5, 6;
  return m;
}

std::filesystem::path tmp(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("embclust_test_" + name);
}

template <class T>
void put(std::string& bytes, std::size_t at, T v) {
  std::memcpy(bytes.data() + at, &v, sizeof v);
}

}  // namespace

TEST_CASE("1x1 and 2x3 roundtrip") {
  FeatureMatrix one;
  one.ids = {"a"};
  one.data = Eigen::MatrixXd::Zero(1, 1);
  auto back = decode_fmat(encode_fmat(one));
  CHECK(back.ids == one.ids);
  CHECK(back.data == one.data);

  const auto m = small();
  const auto bytes = encode_fmat(m);
  std::uint64_t rows = 0, cols = 0;
  std::memcpy(&rows, bytes.data() + 8, 8);
  std::memcpy(&cols, bytes.data() + 16, 8);
  CHECK(rows == 2);
  CHECK(cols == 3);
  back = decode_fmat(bytes);
  CHECK(back.data == m.data);
  CHECK(back.ids == m.ids);
}

TEST_CASE("header layout is bit-exact") {
  auto m = small();
  m.dim_shape = {3, 1};
  const auto bytes = encode_fmat(m);
  CHECK(bytes.substr(0, 4) == "FMAT");
  std::uint32_t version = 0, flags = 0, ndims = 0;
  std::memcpy(&version, bytes.data() + 4, 4);
  std::memcpy(&flags, bytes.data() + 24, 4);
  std::memcpy(&ndims, bytes.data() + 28, 4);
  CHECK(version == 1);
  CHECK(flags == 1);
  CHECK(ndims == 2);
  const std::size_t payload = 28 + 4 + 16;
  float first = 0;
  std::memcpy(&first, bytes.data() + payload, 4);
  CHECK(first == 1.0f);
  float second = 0;
  std::memcpy(&second, bytes.data() + payload + 4, 4);
  CHECK(second == 2.0f);  // row-major
  const std::size_t strings = payload + 6 * 4;
  std::uint32_t len = 0;
  std::memcpy(&len, bytes.data() + strings, 4);
  CHECK(len == 1);
  CHECK(bytes[strings + 4] == 'a');
  CHECK(bytes.size() == strings + 2 * 5);
  CHECK(decode_fmat(bytes).dim_shape == m.dim_shape);
}

TEST_CASE("500x512 roundtrip is byte identical") {
  std::mt19937_64 rng(7);
  auto m = FeatureMatrix::from_data(oracle::gaussian(rng, 500, 512));
  m.data = m.data.cast<float>().cast<double>();
  const auto path = tmp("big.fmat");
  write_fmat(m, path);
  const auto first = read_file(path);
  const auto back = read_fmat(path);
  CHECK(back.data == m.data);
  write_fmat(back, path);
  CHECK(read_file(path) == first);
  std::filesystem::remove(path);
}

TEST_CASE("distinct error codes") {
  const auto good = encode_fmat(small());

  auto bad = good;
  bad.replace(0, 4, "XMAT");
  CHECK(code_of([&] { decode_fmat(bad); }) == ErrorCode::bad_magic);

  bad = good;
  put<std::uint32_t>(bad, 4, 2);
  CHECK(code_of([&] { decode_fmat(bad); }) == ErrorCode::version_mismatch);

  // rows=10 declared, payload for 2
  bad = good;
  put<std::uint64_t>(bad, 8, 10);
  CHECK(code_of([&] { decode_fmat(bad); }) == ErrorCode::truncated);

  auto dup = small();
  dup.ids = {"a", "a"};
  CHECK(code_of([&] { decode_fmat(encode_fmat(dup)); }) == ErrorCode::duplicate_id);

  auto nan = small();
  nan.data(1, 1) = std::nan("");
  CHECK(code_of([&] { encode_fmat(nan); }) == ErrorCode::non_finite);
  // bypass the writer: poke NaN bits into the payload
  bad = good;
  put<float>(bad, 28 + 4, std::numeric_limits<float>::quiet_NaN());
  CHECK(code_of([&] { decode_fmat(bad); }) == ErrorCode::non_finite);

  CHECK(code_of([&] { read_fmat(tmp("does_not_exist.fmat")); }) == ErrorCode::io);
}

TEST_CASE("10 declared rows with 9 present is truncation") {
  std::mt19937_64 rng(3);
  const auto ten = FeatureMatrix::from_data(oracle::gaussian(rng, 10, 4));
  auto nine = ten;
  nine.data = ten.data.topRows(9);
  nine.ids.pop_back();
  auto bytes = encode_fmat(nine);
  put<std::uint64_t>(bytes, 8, 10);
  CHECK(code_of([&] { decode_fmat(bytes); }) == ErrorCode::truncated);
}

TEST_CASE("every single-byte header corruption is rejected") {
  auto plain = small();
  auto shaped = small();
  shaped.dim_shape = {3, 1};
  for (const auto& m : {plain, shaped}) {
    const auto good = encode_fmat(m);
    const std::size_t header = m.dim_shape.empty() ? 28 : 28 + 4 + 8 * m.dim_shape.size();
    int accepted = 0;
    for (std::size_t at = 0; at < header; ++at) {
      for (int v = 0; v < 256; ++v) {
        if (static_cast<unsigned char>(good[at]) == v) continue;
        auto bad = good;
        bad[at] = static_cast<char>(v);
        try {
          decode_fmat(bad);
          ++accepted;
        } catch (const Error&) {
        }
      }
    }
    CHECK(accepted == 0);
  }
}

TEST_CASE("every proper prefix is rejected") {
  const auto good = encode_fmat(small());
  for (std::size_t len = 0; len < good.size(); ++len)
    CHECK_THROWS_AS(decode_fmat(std::string_view(good).substr(0, len)), Error);
}

TEST_CASE("trailing bytes are rejected") {
  CHECK(code_of([] { decode_fmat(encode_fmat(small()) + "x"); }) == ErrorCode::corrupt_header);
}

TEST_CASE("ids keep file order") {
  FeatureMatrix m;
  m.ids = {"z", "m", "a", "\xc3\xa9t\xc3\xa9"};
  m.data = Eigen::MatrixXd::Constant(4, 1, 1.0);
  CHECK(decode_fmat(encode_fmat(m)).ids == m.ids);
}

TEST_CASE("csv parse") {
  const auto m = parse_csv("a,1.0,2.0\nb,3.0,4.0", false);
  CHECK(m.rows() == 2);
  CHECK(m.cols() == 2);
  CHECK(m.data(1, 0) == 3.0);
  CHECK(m.ids[1] == "b");

  try {
    parse_csv("a,1,2\nb,3,4\nc,5\n", false);
    FAIL("ragged row accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ragged_row);
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
  CHECK(code_of([] { parse_csv("a,1,x\n", false); }) == ErrorCode::parse);
  const auto h = parse_csv("id,f0,f1\na,1,2\n", true);
  CHECK(h.rows() == 1);
}

TEST_CASE("csv -> fmat -> csv keeps 9 significant digits") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1e4, 1e4);
  std::string text;
  for (int i = 0; i < 20; ++i) {
    text += "r" + std::to_string(i);
    for (int j = 0; j < 5; ++j) {
      char buf[32];
      std::snprintf(buf, sizeof buf, ",%.9g", static_cast<double>(static_cast<float>(u(rng))));
      text += buf;
    }
    text += "\n";
  }
  const auto back = format_csv(decode_fmat(encode_fmat(parse_csv(text, false))));
  CHECK(back == text);
}

TEST_CASE("label vectors") {
  const auto lv = parse_labels_csv("id,label\na,7\nb,3\nc,7\n");
  CHECK(lv.labels == std::vector<int>{1, 0, 1});
  CHECK(lv.num_labels() == 2);
  CHECK(parse_labels_csv(format_labels_csv(lv)).labels == lv.labels);
  const auto moved = align_to(lv, {"c", "a", "b"});
  CHECK(moved.labels == std::vector<int>{1, 1, 0});
  CHECK(code_of([&] { align_to(lv, {"a", "b", "q"}); }) == ErrorCode::dimension_mismatch);
}

TEST_CASE("section archive") {
  auto a = small();
  auto b = FeatureMatrix::from_data(Eigen::MatrixXd::Identity(2, 2));
  const auto bytes = encode_sections({{"first", a}, {"second", b}});
  const auto back = decode_sections(bytes);
  REQUIRE(back.size() == 2);
  CHECK(find_section(back, "second").data == b.data);
  CHECK(find_section(back, "first").ids == a.ids);
  CHECK_THROWS_AS(find_section(back, "third"), Error);
  auto bad = bytes;
  bad[bad.size() - 1] = 'X';
  CHECK_THROWS_AS(decode_sections(bad), Error);
}
