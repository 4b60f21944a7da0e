#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "scalepoison/imaging.hpp"

namespace scalepoison::testing {

inline Image random_image(std::mt19937_64& rng, int h, int w, int c) {
  Image img(h, w, c);
  std::uniform_int_distribution<int> d(0, 255);
  for (auto& v : img.data) v = static_cast<std::uint8_t>(d(rng));
  return img;
}

/// Temporary directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("scalepoison_" + tag + "_" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace scalepoison::testing
