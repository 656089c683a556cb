#include <gtest/gtest.h>

#include <cstring>
#include <fstream>

#include "emofuse/error.hpp"
#include "emofuse/safetensors.hpp"
#include "json.hpp"
#include "test_support.hpp"

using namespace emofuse;
using emofuse::testing::error_kind;
using emofuse::testing::TempDir;

namespace {

void write_raw(const std::filesystem::path& path, const std::string& header, const std::vector<std::uint8_t>& data) {
  std::ofstream out(path, std::ios::binary);
  const std::uint64_t n = header.size();
  for (int i = 0; i < 8; ++i) out.put(static_cast<char>((n >> (8 * i)) & 0xff));
  out << header;
  out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
}

}  // namespace

TEST(SafeTensors, RoundTripDoubleAndFloat) {
  TempDir dir;
  Mat<double> a(2, 3);
  a << 1, 2, 3, 4, 5, 6.5;
  Mat<float> b(1, 4);
  b << 0.25f, -1.0f, 3.0f, 1e-3f;
  SafeTensorsWriter w;
  w.add("a", a);
  w.add("b", b);
  w.set_metadata("variant", "vanilla");
  w.write(dir / "t.safetensors");

  const auto st = SafeTensors::open(dir / "t.safetensors");
  EXPECT_EQ(st.names(), (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(st.entry("a").dtype, "F64");
  EXPECT_EQ(st.entry("b").dtype, "F32");
  EXPECT_EQ(st.entry("b").shape, (std::vector<std::int64_t>{4}));
  EXPECT_EQ(st.metadata().at("variant"), "vanilla");
  EXPECT_EQ(st.matrix<double>("a"), a);
  EXPECT_EQ(st.matrix<float>("b"), b);

  Param<double> p("a", 2, 3);
  st.load_into("a", p);
  EXPECT_EQ(p.value, a);
  Param<double> wrong("a", 3, 2);
  EXPECT_EQ(error_kind([&] { st.load_into("a", wrong); }), ErrorKind::dimension);
  EXPECT_FALSE(st.contains("c"));
  EXPECT_THROW(st.entry("c"), Error);
}

TEST(SafeTensors, HalfPrecisionPayloads) {
  TempDir dir;
  // 1.0, -2.0 in F16 and 0.5, 3.0 in BF16
  const std::vector<std::uint8_t> data{0x00, 0x3c, 0x00, 0xc0, 0x00, 0x3f, 0x40, 0x40};
  nlohmann::json h;
  h["h"] = {{"dtype", "F16"}, {"shape", {2}}, {"data_offsets", {0, 4}}};
  h["b"] = {{"dtype", "BF16"}, {"shape", {1, 2}}, {"data_offsets", {4, 8}}};
  write_raw(dir / "h.safetensors", h.dump(), data);
  const auto st = SafeTensors::open(dir / "h.safetensors");
  const auto hm = st.matrix<double>("h");
  EXPECT_EQ(hm(0, 0), 1.0);
  EXPECT_EQ(hm(0, 1), -2.0);
  const auto bm = st.matrix<float>("b");
  EXPECT_EQ(bm(0, 0), 0.5f);
  EXPECT_EQ(bm(0, 1), 3.0f);
}

TEST(SafeTensors, MalformedFilesAreFormatErrors) {
  TempDir dir;
  EXPECT_EQ(error_kind([&] { SafeTensors::open(dir / "missing.safetensors"); }), ErrorKind::io);

  std::ofstream(dir / "short.safetensors") << "abc";
  EXPECT_EQ(error_kind([&] { SafeTensors::open(dir / "short.safetensors"); }), ErrorKind::format);

  write_raw(dir / "json.safetensors", "{not json", {});
  EXPECT_EQ(error_kind([&] { SafeTensors::open(dir / "json.safetensors"); }), ErrorKind::format);

  nlohmann::json h;
  h["x"] = {{"dtype", "F32"}, {"shape", {4}}, {"data_offsets", {0, 16}}};
  write_raw(dir / "trunc.safetensors", h.dump(), std::vector<std::uint8_t>(8));
  EXPECT_EQ(error_kind([&] { SafeTensors::open(dir / "trunc.safetensors"); }), ErrorKind::format);

  h["x"] = {{"dtype", "F32"}, {"shape", {3}}, {"data_offsets", {0, 16}}};
  write_raw(dir / "shape.safetensors", h.dump(), std::vector<std::uint8_t>(16));
  EXPECT_EQ(error_kind([&] { SafeTensors::open(dir / "shape.safetensors"); }), ErrorKind::format);
}
