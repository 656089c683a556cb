#include "emofuse/safetensors.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "emofuse/error.hpp"
#include "json.hpp"

namespace emofuse {

static_assert(std::endian::native == std::endian::little, "safetensors payloads are little-endian");

namespace {

std::size_t dtype_size(const std::string& dtype) {
  if (dtype == "F64") return 8;
  if (dtype == "F32") return 4;
  if (dtype == "F16" || dtype == "BF16") return 2;
  throw Error(ErrorKind::format, "unsupported safetensors dtype " + dtype);
}

float half_to_float(std::uint16_t h) {
  const std::uint32_t sign = (h & 0x8000u) << 16;
  std::uint32_t exponent = (h >> 10) & 0x1Fu;
  std::uint32_t mantissa = h & 0x3FFu;
  std::uint32_t bits;
  if (exponent == 0) {
    if (mantissa == 0) {
      bits = sign;
    } else {
      exponent = 127 - 15 + 1;
      while ((mantissa & 0x400u) == 0) {
        mantissa <<= 1;
        --exponent;
      }
      mantissa &= 0x3FFu;
      bits = sign | (exponent << 23) | (mantissa << 13);
    }
  } else if (exponent == 0x1F) {
    bits = sign | 0x7F800000u | (mantissa << 13);
  } else {
    bits = sign | ((exponent + 127 - 15) << 23) | (mantissa << 13);
  }
  return std::bit_cast<float>(bits);
}

std::int64_t numel(const std::vector<std::int64_t>& shape) {
  std::int64_t n = 1;
  for (const auto d : shape) n *= d;
  return n;
}

}  // namespace

SafeTensors SafeTensors::open(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open tensor file " + path.string());
  std::uint64_t header_len = 0;
  if (!in.read(reinterpret_cast<char*>(&header_len), 8)) {
    throw Error(ErrorKind::format, path.string() + ": truncated safetensors header");
  }
  const auto file_size = std::filesystem::file_size(path);
  if (header_len > file_size - 8) throw Error(ErrorKind::format, path.string() + ": header length exceeds file size");
  std::string header(header_len, '\0');
  in.read(header.data(), static_cast<std::streamsize>(header_len));

  SafeTensors st;
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(header);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::format, path.string() + ": invalid safetensors header: " + e.what());
  }
  const std::size_t payload = file_size - 8 - header_len;
  for (const auto& [name, value] : meta.items()) {
    if (name == "__metadata__") {
      for (const auto& [k, v] : value.items()) st.metadata_[k] = v.get<std::string>();
      continue;
    }
    Entry e;
    try {
      e.dtype = value.at("dtype").get<std::string>();
      e.shape = value.at("shape").get<std::vector<std::int64_t>>();
      const auto offsets = value.at("data_offsets").get<std::vector<std::size_t>>();
      if (offsets.size() != 2) throw Error(ErrorKind::format, "bad data_offsets");
      e.begin = offsets[0];
      e.end = offsets[1];
    } catch (const nlohmann::json::exception& ex) {
      throw Error(ErrorKind::format, path.string() + ": malformed entry '" + name + "': " + ex.what());
    }
    if (e.end < e.begin || e.end > payload ||
        e.end - e.begin != static_cast<std::size_t>(numel(e.shape)) * dtype_size(e.dtype)) {
      throw Error(ErrorKind::format, path.string() + ": inconsistent byte range for '" + name + "'");
    }
    st.entries_.emplace(name, std::move(e));
  }
  st.data_.resize(payload);
  if (!in.read(reinterpret_cast<char*>(st.data_.data()), static_cast<std::streamsize>(payload))) {
    throw Error(ErrorKind::format, path.string() + ": truncated tensor payload");
  }
  return st;
}

const SafeTensors::Entry& SafeTensors::entry(const std::string& name) const {
  const auto it = entries_.find(name);
  if (it == entries_.end()) throw Error(ErrorKind::format, "tensor '" + name + "' not found");
  return it->second;
}

std::vector<std::string> SafeTensors::names() const {
  std::vector<std::string> out;
  for (const auto& [name, _] : entries_) out.push_back(name);
  return out;
}

std::vector<double> SafeTensors::values(const Entry& e) const {
  const std::size_t n = static_cast<std::size_t>(numel(e.shape));
  std::vector<double> out(n);
  const std::uint8_t* src = data_.data() + e.begin;
  if (e.dtype == "F64") {
    std::memcpy(out.data(), src, n * 8);
  } else if (e.dtype == "F32") {
    for (std::size_t i = 0; i < n; ++i) {
      float f;
      std::memcpy(&f, src + 4 * i, 4);
      out[i] = f;
    }
  } else if (e.dtype == "F16") {
    for (std::size_t i = 0; i < n; ++i) {
      std::uint16_t h;
      std::memcpy(&h, src + 2 * i, 2);
      out[i] = half_to_float(h);
    }
  } else if (e.dtype == "BF16") {
    for (std::size_t i = 0; i < n; ++i) {
      std::uint16_t h;
      std::memcpy(&h, src + 2 * i, 2);
      out[i] = std::bit_cast<float>(static_cast<std::uint32_t>(h) << 16);
    }
  } else {
    dtype_size(e.dtype);
  }
  return out;
}

template <typename S>
Mat<S> SafeTensors::matrix(const std::string& name) const {
  const auto& e = entry(name);
  Eigen::Index rows = 1;
  Eigen::Index cols = 1;
  if (e.shape.size() == 1) {
    cols = e.shape[0];
  } else if (e.shape.size() == 2) {
    rows = e.shape[0];
    cols = e.shape[1];
  } else if (!e.shape.empty()) {
    throw Error(ErrorKind::dimension, "tensor '" + name + "' has rank " + std::to_string(e.shape.size()));
  }
  const auto v = values(e);
  Mat<S> m(rows, cols);
  for (std::size_t i = 0; i < v.size(); ++i) m.data()[i] = static_cast<S>(v[i]);
  return m;
}

template <typename S>
void SafeTensors::load_into(const std::string& name, Param<S>& param) const {
  Mat<S> m = matrix<S>(name);
  if (m.rows() != param.value.rows() || m.cols() != param.value.cols()) {
    throw Error(ErrorKind::dimension, "tensor '" + name + "' is " + std::to_string(m.rows()) + "x" +
                                          std::to_string(m.cols()) + ", parameter '" + param.name + "' expects " +
                                          std::to_string(param.value.rows()) + "x" +
                                          std::to_string(param.value.cols()));
  }
  param.value = std::move(m);
}

template Mat<double> SafeTensors::matrix<double>(const std::string&) const;
template Mat<float> SafeTensors::matrix<float>(const std::string&) const;
template void SafeTensors::load_into<double>(const std::string&, Param<double>&) const;
template void SafeTensors::load_into<float>(const std::string&, Param<float>&) const;

namespace {

template <typename S>
std::vector<std::int64_t> shape_of(const Mat<S>& value) {
  if (value.rows() == 1) return {value.cols()};
  return {value.rows(), value.cols()};
}

template <typename S>
std::vector<std::uint8_t> bytes_of(const Mat<S>& value) {
  std::vector<std::uint8_t> bytes(static_cast<std::size_t>(value.size()) * sizeof(S));
  std::memcpy(bytes.data(), value.data(), bytes.size());
  return bytes;
}

}  // namespace

void SafeTensorsWriter::add(const std::string& name, const Mat<double>& value) {
  tensors_[name] = {"F64", shape_of(value), bytes_of(value)};
}

void SafeTensorsWriter::add(const std::string& name, const Mat<float>& value) {
  tensors_[name] = {"F32", shape_of(value), bytes_of(value)};
}

void SafeTensorsWriter::write(const std::filesystem::path& path) const {
  nlohmann::ordered_json header = nlohmann::ordered_json::object();
  if (!metadata_.empty()) header["__metadata__"] = metadata_;
  std::size_t offset = 0;
  for (const auto& [name, t] : tensors_) {
    header[name] = {{"dtype", t.dtype}, {"shape", t.shape}, {"data_offsets", {offset, offset + t.bytes.size()}}};
    offset += t.bytes.size();
  }
  std::string text = header.dump();
  while (text.size() % 8 != 0) text.push_back(' ');
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::io, "cannot write tensor file " + path.string());
  const std::uint64_t len = text.size();
  out.write(reinterpret_cast<const char*>(&len), 8);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& [_, t] : tensors_) {
    out.write(reinterpret_cast<const char*>(t.bytes.data()), static_cast<std::streamsize>(t.bytes.size()));
  }
  if (!out) throw Error(ErrorKind::io, "failed writing tensor file " + path.string());
}

}  // namespace emofuse
