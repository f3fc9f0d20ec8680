#ifndef PROTODA_NUMERICS_TENSOR_HPP
#define PROTODA_NUMERICS_TENSOR_HPP

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>

namespace protoda {

// Dense row-major-by-convention storage: rows are samples, columns are
// features. Every tensor in the framework has rank <= 2.
template <typename Scalar>
using Tensor = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

using Index = Eigen::Index;
using Rng = std::mt19937_64;

enum class Mode { train, eval };

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

template <typename Derived>
std::string shape_string(const Eigen::EigenBase<Derived>& m) {
  std::ostringstream os;
  os << "[" << m.rows() << "x" << m.cols() << "]";
  return os.str();
}

template <typename A, typename B>
void require_same_shape(const Eigen::EigenBase<A>& a, const Eigen::EigenBase<B>& b,
                        const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(what) + ": shape mismatch " + shape_string(a) + " vs " +
                     shape_string(b));
  }
}

template <typename Derived>
bool all_finite(const Eigen::DenseBase<Derived>& m) {
  return m.allFinite();
}

/// Standard-normal matrix drawn from `rng` in column-major element order.
template <typename Scalar>
Tensor<Scalar> standard_normal(Index rows, Index cols, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Tensor<Scalar> out(rows, cols);
  for (Index i = 0; i < out.size(); ++i) out.data()[i] = static_cast<Scalar>(normal(rng));
  return out;
}

template <typename Scalar>
Tensor<Scalar> uniform(Index rows, Index cols, double bound, Rng& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  Tensor<Scalar> out(rows, cols);
  for (Index i = 0; i < out.size(); ++i) out.data()[i] = static_cast<Scalar>(dist(rng));
  return out;
}

}  // namespace protoda

#endif  // PROTODA_NUMERICS_TENSOR_HPP
