#include "emofuse/error.hpp"

#include <iostream>

namespace emofuse {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::io: return "io";
    case ErrorKind::format: return "format";
    case ErrorKind::data: return "data";
    case ErrorKind::dimension: return "dimension";
    case ErrorKind::config: return "config";
    case ErrorKind::numeric: return "numeric";
    case ErrorKind::usage: return "usage";
  }
  return "unknown";
}

void warn(std::string_view message) { std::cerr << "warning: " << message << '\n'; }

}  // namespace emofuse
