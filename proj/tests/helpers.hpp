#pragma once

#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>

#include <doctest.h>

#include "monomer/corpus.hpp"

namespace testutil {

// Unique scratch directory, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("monomer_test_" + std::to_string(::getpid()) + "_" +
             std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

inline void write_text(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
}

inline std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in),
                     std::istreambuf_iterator<char>());
}

// Checks that `fn` throws a runtime_error whose message contains `needle`.
template <typename Fn>
void expect_throw_contains(Fn&& fn, const std::string& needle) {
  try {
    fn();
    FAIL_CHECK("expected runtime_error containing '" << needle << "', none thrown");
  } catch (const std::runtime_error& e) {
    const std::string what = e.what();
    if (what.find(needle) == std::string::npos)
      FAIL_CHECK("message '" << what << "' does not contain '" << needle << "'");
  }
}

// Small in-memory corpus: `rows` feature rows of dimension `dim`; item i is
// "i<index>" with category "cat<index % categories>".
inline monomer::Corpus make_corpus(const monomer::FeatureMatrix& features,
                                   int categories = 2) {
  std::vector<monomer::Item> items;
  for (Eigen::Index r = 0; r < features.rows(); ++r)
    items.push_back({"i" + std::to_string(r),
                     "cat" + std::to_string(r % categories), r});
  return monomer::Corpus(std::move(items), features);
}

}  // namespace testutil
