#include "bridge/hash.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "bridge/errors.hpp"

namespace bridge {

std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

std::string file_hash(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("file_hash: cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return hex64(fnv1a64(ss.str()));
}

}  // namespace bridge
