#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include <gtest/gtest.h>

namespace testing_support {

inline std::filesystem::path fixture(const std::string& name) { return std::filesystem::path(TRLLM_FIXTURE_DIR) / name; }

inline std::filesystem::path golden_path(const std::string& name) { return std::filesystem::path(TRLLM_GOLDEN_DIR) / name; }

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::filesystem::path& p, const std::string& bytes) {
  std::filesystem::create_directories(p.parent_path());
  std::ofstream f(p, std::ios::binary);
  f << bytes;
}

// With TRLLM_UPDATE_GOLDEN=1 the golden file is (re)written; otherwise it must exist and match.
inline void expect_golden(const std::string& name, const std::string& actual) {
  const auto path = golden_path(name);
  const char* update = std::getenv("TRLLM_UPDATE_GOLDEN");
  if (update && std::string(update) == "1") {
    write_file(path, actual);
    return;
  }
  ASSERT_TRUE(std::filesystem::exists(path)) << "missing golden " << path;
  const auto expected = read_file(path);
  EXPECT_EQ(expected.size(), actual.size()) << name;
  EXPECT_TRUE(expected == actual) << "golden mismatch: " << name;
}

inline std::string bytes_to_string(const std::vector<std::uint8_t>& b) { return {b.begin(), b.end()}; }

// Scratch directory under the build tree, emptied on construction.
inline std::filesystem::path scratch(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("trllm_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace testing_support
