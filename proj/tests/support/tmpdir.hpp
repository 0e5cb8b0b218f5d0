#pragma once

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <string>

namespace test_support {

// Scratch directory removed on scope exit.
class TmpDir {
 public:
  explicit TmpDir(const std::string& tag) {
    auto base = std::filesystem::temp_directory_path();
    std::random_device rd;
    path_ = base / (tag + "-" + std::to_string(rd()) + "-" +
                    std::to_string(::getpid()));
    std::filesystem::create_directories(path_);
  }
  ~TmpDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TmpDir(const TmpDir&) = delete;
  TmpDir& operator=(const TmpDir&) = delete;

  const std::filesystem::path& path() const { return path_; }

  std::string write(const std::string& name, const std::string& content) {
    auto p = path_ / name;
    std::ofstream os(p, std::ios::binary);
    os << content;
    return p.string();
  }

 private:
  std::filesystem::path path_;
};

}  // namespace test_support
