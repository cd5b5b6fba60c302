#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

#include "ssanc/convmat.hpp"

namespace testutil {

inline ssanc::Vector randn(std::mt19937_64& rng, ssanc::Index n) {
  std::normal_distribution<double> normal(0.0, 1.0);
  ssanc::Vector v(n);
  for (ssanc::Index i = 0; i < n; ++i) v[i] = normal(rng);
  return v;
}

inline double rel_err(const ssanc::Vector& a, const ssanc::Vector& b) {
  const double d = b.norm();
  return (a - b).norm() / (d > 0.0 ? d : 1.0);
}

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("ssanc_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testutil
