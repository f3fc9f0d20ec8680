#include "protoda/augment/augment.hpp"

namespace protoda {

std::string to_string(AugmentMethod m) {
  switch (m) {
    case AugmentMethod::none: return "none";
    case AugmentMethod::noise: return "noise";
    case AugmentMethod::hallucinate: return "hallucinate";
  }
  return "?";
}

std::string to_string(AugmentSpace s) { return s == AugmentSpace::sentence ? "sentence" : "proto"; }

std::string to_string(IdentityLayout l) { return l == IdentityLayout::sum ? "sum" : "conditioning"; }

AugmentMethod parse_augment_method(const std::string& s) {
  if (s == "none") return AugmentMethod::none;
  if (s == "noise") return AugmentMethod::noise;
  if (s == "hallucinate") return AugmentMethod::hallucinate;
  throw std::invalid_argument("unknown augmentation method '" + s + "' (expected none, noise or hallucinate)");
}

AugmentSpace parse_augment_space(const std::string& s) {
  if (s == "sentence") return AugmentSpace::sentence;
  if (s == "proto") return AugmentSpace::proto;
  throw std::invalid_argument("unknown augmentation space '" + s + "' (expected sentence or proto)");
}

IdentityLayout parse_identity_layout(const std::string& s) {
  if (s == "sum") return IdentityLayout::sum;
  if (s == "conditioning") return IdentityLayout::conditioning;
  throw std::invalid_argument("unknown identity layout '" + s + "' (expected sum or conditioning)");
}

}  // namespace protoda
