#include "protoda/eval/synthetic.hpp"

#include <stdexcept>

namespace protoda {

std::string synthetic_task_id(std::size_t t) { return "synthetic_" + std::to_string(t); }
std::string synthetic_class_id(std::size_t c) { return "class_" + std::to_string(c); }

EmbeddedRegistry generate_synthetic_tasks(const SyntheticTaskSpec& spec) {
  if (spec.tasks == 0 || spec.classes == 0 || spec.dim <= 0) {
    throw std::invalid_argument("synthetic spec: tasks, classes and dim must be positive");
  }
  if (spec.separation < 0 || spec.within_std < 0) {
    throw std::invalid_argument("synthetic spec: separation and within_std must be nonnegative");
  }
  if (spec.train_per_class == 0) throw std::invalid_argument("synthetic spec: no train samples per class");
  Rng rng(spec.seed);
  EmbeddedRegistry reg;
  for (std::size_t t = 0; t < spec.tasks; ++t) {
    std::vector<Eigen::RowVectorXd> means;
    for (std::size_t c = 0; c < spec.classes; ++c) {
      Eigen::RowVectorXd dir = standard_normal<double>(1, spec.dim, rng);
      while (dir.norm() == 0.0) dir = standard_normal<double>(1, spec.dim, rng);
      Eigen::RowVectorXd mean = spec.separation * dir / dir.norm();
      if (spec.separation > 0) {
        for (const auto& m : means) {
          if (m == mean) throw std::logic_error("synthetic spec: coincident class means");
        }
      }
      means.push_back(mean);
      for (Split split : {Split::train, Split::validation}) {
        const std::size_t n = split == Split::train ? spec.train_per_class : spec.validation_per_class;
        for (std::size_t i = 0; i < n; ++i) {
          EmbeddedSample s{mean + spec.within_std * Eigen::RowVectorXd(standard_normal<double>(1, spec.dim, rng))};
          reg.add(synthetic_task_id(t), synthetic_class_id(c), split, std::move(s));
        }
      }
    }
  }
  return reg;
}

}  // namespace protoda
