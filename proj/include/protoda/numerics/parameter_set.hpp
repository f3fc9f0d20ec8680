#ifndef PROTODA_NUMERICS_PARAMETER_SET_HPP
#define PROTODA_NUMERICS_PARAMETER_SET_HPP

#include "protoda/numerics/tensor.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace protoda {

template <typename Scalar>
struct Parameter {
  Tensor<Scalar> value;
  bool trainable = true;
  // Adam state
  Tensor<Scalar> first_moment;
  Tensor<Scalar> second_moment;
  std::uint64_t step = 0;
};

/// Named parameters with per-parameter optimizer state. Names are stable
/// slash-separated paths ("encoder/lstm_fwd/w_ih"); iteration order is the
/// lexicographic order of names.
template <typename Scalar>
class ParameterSet {
 public:
  using Map = std::map<std::string, Parameter<Scalar>, std::less<>>;

  Parameter<Scalar>& add(const std::string& name, Tensor<Scalar> value, bool trainable = true) {
    Parameter<Scalar> p;
    p.first_moment = Tensor<Scalar>::Zero(value.rows(), value.cols());
    p.second_moment = Tensor<Scalar>::Zero(value.rows(), value.cols());
    p.value = std::move(value);
    p.trainable = trainable;
    auto [it, inserted] = params_.insert_or_assign(name, std::move(p));
    return it->second;
  }

  bool contains(std::string_view name) const { return params_.find(name) != params_.end(); }

  const Parameter<Scalar>& at(std::string_view name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw std::out_of_range("unknown parameter: " + std::string(name));
    return it->second;
  }
  Parameter<Scalar>& at(std::string_view name) {
    auto it = params_.find(name);
    if (it == params_.end()) throw std::out_of_range("unknown parameter: " + std::string(name));
    return it->second;
  }

  const Tensor<Scalar>& value(std::string_view name) const { return at(name).value; }
  Tensor<Scalar>& value(std::string_view name) { return at(name).value; }

  /// Marks every parameter whose name starts with `prefix` as (non-)trainable.
  /// Returns the number of parameters touched.
  std::size_t set_trainable(std::string_view prefix, bool trainable) {
    std::size_t n = 0;
    for (auto& [name, p] : params_) {
      if (std::string_view(name).starts_with(prefix)) {
        p.trainable = trainable;
        ++n;
      }
    }
    return n;
  }

  void erase_prefix(std::string_view prefix) {
    for (auto it = params_.begin(); it != params_.end();) {
      if (std::string_view(it->first).starts_with(prefix)) {
        it = params_.erase(it);
      } else {
        ++it;
      }
    }
  }

  std::vector<std::string> names(std::string_view prefix = {}) const {
    std::vector<std::string> out;
    for (const auto& [name, p] : params_) {
      if (std::string_view(name).starts_with(prefix)) out.push_back(name);
    }
    return out;
  }

  std::size_t size() const { return params_.size(); }
  bool empty() const { return params_.empty(); }

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

 private:
  Map params_;
};

template <typename Scalar>
using GradientMap = std::map<std::string, Tensor<Scalar>, std::less<>>;

/// FNV-1a over names, flags and raw value bytes of the parameters under
/// `prefix`. Used to assert bit-level immutability.
template <typename Scalar>
std::uint64_t parameter_digest(const ParameterSet<Scalar>& params, std::string_view prefix = {}) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](const void* data, std::size_t n) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= bytes[i];
      h *= 1099511628211ULL;
    }
  };
  for (const auto& [name, p] : params) {
    if (!std::string_view(name).starts_with(prefix)) continue;
    mix(name.data(), name.size());
    mix(p.value.data(), sizeof(Scalar) * static_cast<std::size_t>(p.value.size()));
  }
  return h;
}

}  // namespace protoda

#endif  // PROTODA_NUMERICS_PARAMETER_SET_HPP
