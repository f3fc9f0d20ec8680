#ifndef PROTODA_TESTS_TEST_UTIL_HPP
#define PROTODA_TESTS_TEST_UTIL_HPP

#include "protoda/numerics.hpp"

#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

namespace protoda::testing {

inline Tensor<double> random_matrix(Index rows, Index cols, Rng& rng, double scale = 1.0) {
  return standard_normal<double>(rows, cols, rng) * scale;
}

inline std::vector<std::vector<double>> to_rows(const Tensor<double>& m) {
  std::vector<std::vector<double>> out(static_cast<std::size_t>(m.rows()));
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) out[static_cast<std::size_t>(i)].push_back(m(i, j));
  return out;
}

inline std::vector<double> to_vec(const Tensor<double>& m) { return to_rows(m).at(0); }

/// Builds a ParameterSet holding a single trainable input "x" and checks
/// d(sum(w .* f(x)))/dx with fixed random weights w, so every output
/// element contributes a distinct coefficient.
inline GradCheckReport check_unary_op(
    const std::function<Var<double>(Var<double>)>& op, const Tensor<double>& x, Rng& rng,
    double h = 1e-4) {
  ParameterSet<double> ps;
  ps.add("x", x);
  Tape<double> probe;
  const Tensor<double> out = op(probe.constant(x)).value();
  const Tensor<double> weights = random_matrix(out.rows(), out.cols(), rng);
  LossFn loss = [&](Tape<double>& tape, const ParameterSet<double>& p) {
    Var<double> y = op(tape.parameter(p, "x"));
    return sum_all(mul_const(y, weights));
  };
  return grad_check(loss, ps, h, 1e-4);
}

/// Scratch directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("protoda_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace protoda::testing

#endif  // PROTODA_TESTS_TEST_UTIL_HPP
