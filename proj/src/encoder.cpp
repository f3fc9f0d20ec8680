#include "protoda/encoder/encoder.hpp"

namespace protoda {

std::string to_string(EncoderKind kind) {
  return kind == EncoderKind::bilstm ? "bilstm" : "mean";
}

EncoderKind parse_encoder_kind(const std::string& s) {
  if (s == "bilstm") return EncoderKind::bilstm;
  if (s == "mean") return EncoderKind::mean;
  throw std::invalid_argument("unknown encoder kind '" + s + "' (expected bilstm or mean)");
}

}  // namespace protoda
