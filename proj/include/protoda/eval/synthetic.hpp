#ifndef PROTODA_EVAL_SYNTHETIC_HPP
#define PROTODA_EVAL_SYNTHETIC_HPP

#include "protoda/corpus/registry.hpp"
#include "protoda/numerics/tensor.hpp"

#include <cstdint>
#include <string>

namespace protoda {

/// Gaussian clusters: class mean = separation * random unit vector, samples
/// = mean + within_std * N(0, I). Tasks are "synthetic_<t>", classes
/// "class_<c>".
struct SyntheticTaskSpec {
  std::size_t tasks = 1;
  std::size_t classes = 5;
  Index dim = 16;
  double separation = 10.0;
  double within_std = 1.0;
  std::size_t train_per_class = 50;
  std::size_t validation_per_class = 50;
  std::uint64_t seed = 1;
};

std::string synthetic_task_id(std::size_t t);
std::string synthetic_class_id(std::size_t c);

EmbeddedRegistry generate_synthetic_tasks(const SyntheticTaskSpec& spec);

}  // namespace protoda

#endif  // PROTODA_EVAL_SYNTHETIC_HPP
