#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace skyanchor::testing {

inline std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::filesystem::path write_temp(const std::string& name, const std::string& body) {
  const auto dir = std::filesystem::temp_directory_path() / "skyanchor_tests";
  std::filesystem::create_directories(dir);
  const auto path = dir / name;
  std::ofstream(path, std::ios::binary) << body;
  return path;
}

inline const std::filesystem::path kData = SKYANCHOR_DATA_DIR;

}  // namespace skyanchor::testing
