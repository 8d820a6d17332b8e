#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include <unistd.h>

#include "augforge/nn.hpp"

namespace augforge::testing {

// |a - b| relative to the larger magnitude, with an absolute floor so that
// gradients which are zero up to rounding are compared on an absolute scale.
inline double relative_error(double a, double b, double floor = 1e-6) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

struct FdReport {
  double worst = 0.0;
  std::size_t checked = 0;
  std::string where;
};

// Central differences of `loss()` with respect to every parameter of `model`,
// compared against `grads`. Parameters are perturbed in place and restored.
template <typename Loss>
FdReport check_parameters(MlpModel& model, const Gradients& grads, Loss&& loss, double h = 1e-5,
                          double floor = 1e-6) {
  FdReport report;
  auto probe = [&](double& param, double analytic, const std::string& where) {
    const double saved = param;
    param = saved + h;
    const double up = loss();
    param = saved - h;
    const double down = loss();
    param = saved;
    const double err = relative_error(analytic, (up - down) / (2.0 * h), floor);
    ++report.checked;
    if (err > report.worst) {
      report.worst = err;
      report.where = where;
    }
  };
  for (std::size_t l = 0; l < model.num_layers(); ++l) {
    Matrix& w = model.weights[l];
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c)
        probe(w(r, c), grads.weights[l](r, c),
              "W" + std::to_string(l) + "(" + std::to_string(r) + "," + std::to_string(c) + ")");
    Vector& b = model.biases[l];
    for (Eigen::Index r = 0; r < b.size(); ++r)
      probe(b(r), grads.biases[l](r), "b" + std::to_string(l) + "(" + std::to_string(r) + ")");
  }
  return report;
}

inline Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, scale);
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = normal(rng);
  return m;
}

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("augforge-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++) + "-" +
             std::to_string(rd() % 100000));
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

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
}

}  // namespace augforge::testing
