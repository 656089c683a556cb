#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "emofuse/nn.hpp"

namespace emofuse {

/// Reader for the safetensors container: an 8-byte little-endian header
/// length, a JSON header mapping names to {dtype, shape, data_offsets}, then
/// the raw tensor bytes. F64, F32, F16 and BF16 payloads are supported.
class SafeTensors {
 public:
  struct Entry {
    std::string dtype;
    std::vector<std::int64_t> shape;
    std::size_t begin = 0;
    std::size_t end = 0;
  };

  /// Throws Error(io) or Error(format).
  static SafeTensors open(const std::filesystem::path& path);

  bool contains(const std::string& name) const { return entries_.contains(name); }
  const Entry& entry(const std::string& name) const;
  std::vector<std::string> names() const;
  const std::map<std::string, std::string>& metadata() const { return metadata_; }

  /// Tensor as a matrix: 1-D tensors become a single row.
  template <typename S>
  Mat<S> matrix(const std::string& name) const;

  /// Copies a tensor into `param`, requiring matching element layout.
  /// Throws Error(dimension) on shape mismatch.
  template <typename S>
  void load_into(const std::string& name, Param<S>& param) const;

 private:
  std::vector<double> values(const Entry& e) const;

  std::map<std::string, Entry> entries_;
  std::map<std::string, std::string> metadata_;
  std::vector<std::uint8_t> data_;
};

/// Writes named parameters. Double parameters are stored as F64, float as
/// F32; single-row parameters are written with a 1-D shape.
class SafeTensorsWriter {
 public:
  void add(const std::string& name, const Mat<double>& value);
  void add(const std::string& name, const Mat<float>& value);
  void set_metadata(const std::string& key, const std::string& value) { metadata_[key] = value; }
  void write(const std::filesystem::path& path) const;

 private:
  struct Pending {
    std::string dtype;
    std::vector<std::int64_t> shape;
    std::vector<std::uint8_t> bytes;
  };
  std::map<std::string, Pending> tensors_;
  std::map<std::string, std::string> metadata_;
};

}  // namespace emofuse
