#include "protoda/protonet/protonet.hpp"

namespace protoda {

std::string to_string(Distance d) {
  return d == Distance::squared_euclidean ? "squared_euclidean" : "euclidean";
}

Distance parse_distance(const std::string& s) {
  if (s == "squared_euclidean") return Distance::squared_euclidean;
  if (s == "euclidean") return Distance::euclidean;
  throw std::invalid_argument("unknown distance '" + s + "' (expected squared_euclidean or euclidean)");
}

}  // namespace protoda
