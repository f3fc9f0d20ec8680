#ifndef PROTODA_NUMERICS_CHECKPOINT_HPP
#define PROTODA_NUMERICS_CHECKPOINT_HPP

#include "protoda/numerics/parameter_set.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>

// Binary container, all integers and floats little-endian:
//
//   magic "PDACKPT\0" | u32 version | u32 scalar bytes (4 or 8)
//   u64 metadata count | { str key | str value }*
//   u64 parameter count | { str name | u8 trainable | u32 rank (=2)
//                           | u64 rows | u64 cols | values
//                           | u64 adam step | first moment | second moment }*
//
// str is u64 byte length followed by the bytes; matrices are column-major.

namespace protoda {

inline constexpr char kCheckpointMagic[8] = {'P', 'D', 'A', 'C', 'K', 'P', 'T', '\0'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

template <typename Scalar>
struct Checkpoint {
  ParameterSet<Scalar> params;
  std::map<std::string, std::string> metadata;
};

namespace detail {

template <typename U>
void put_le(std::ostream& os, U v) {
  static_assert(std::is_unsigned_v<U>);
  char buf[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xFFu);
  os.write(buf, sizeof(U));
}

template <typename U>
U get_le(std::istream& is) {
  unsigned char buf[sizeof(U)];
  if (!is.read(reinterpret_cast<char*>(buf), sizeof(U))) {
    throw CheckpointError("checkpoint truncated");
  }
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(buf[i]) << (8 * i);
  return v;
}

inline void put_string(std::ostream& os, const std::string& s) {
  put_le<std::uint64_t>(os, s.size());
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string get_string(std::istream& is) {
  const auto n = get_le<std::uint64_t>(is);
  if (n > (1ULL << 32)) throw CheckpointError("checkpoint string length implausible");
  std::string s(n, '\0');
  if (n > 0 && !is.read(s.data(), static_cast<std::streamsize>(n))) {
    throw CheckpointError("checkpoint truncated");
  }
  return s;
}

template <typename Scalar>
void put_values(std::ostream& os, const Tensor<Scalar>& m) {
  for (Index i = 0; i < m.size(); ++i) {
    if constexpr (sizeof(Scalar) == 8) {
      put_le(os, std::bit_cast<std::uint64_t>(static_cast<double>(m.data()[i])));
    } else {
      put_le(os, std::bit_cast<std::uint32_t>(static_cast<float>(m.data()[i])));
    }
  }
}

template <typename Scalar>
Tensor<Scalar> get_values(std::istream& is, Index rows, Index cols, std::uint32_t width) {
  Tensor<Scalar> m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) {
    if (width == 8) {
      m.data()[i] = static_cast<Scalar>(std::bit_cast<double>(get_le<std::uint64_t>(is)));
    } else {
      m.data()[i] = static_cast<Scalar>(std::bit_cast<float>(get_le<std::uint32_t>(is)));
    }
  }
  return m;
}

}  // namespace detail

template <typename Scalar>
void save_checkpoint(const std::filesystem::path& path, const Checkpoint<Scalar>& ckpt) {
  static_assert(sizeof(Scalar) == 4 || sizeof(Scalar) == 8);
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw CheckpointError("cannot open " + tmp.string() + " for writing");
    os.write(kCheckpointMagic, sizeof(kCheckpointMagic));
    detail::put_le<std::uint32_t>(os, kCheckpointVersion);
    detail::put_le<std::uint32_t>(os, sizeof(Scalar));
    detail::put_le<std::uint64_t>(os, ckpt.metadata.size());
    for (const auto& [k, v] : ckpt.metadata) {
      detail::put_string(os, k);
      detail::put_string(os, v);
    }
    detail::put_le<std::uint64_t>(os, ckpt.params.size());
    for (const auto& [name, p] : ckpt.params) {
      detail::put_string(os, name);
      detail::put_le<std::uint8_t>(os, p.trainable ? 1 : 0);
      detail::put_le<std::uint32_t>(os, 2);
      detail::put_le<std::uint64_t>(os, static_cast<std::uint64_t>(p.value.rows()));
      detail::put_le<std::uint64_t>(os, static_cast<std::uint64_t>(p.value.cols()));
      detail::put_values(os, p.value);
      detail::put_le<std::uint64_t>(os, p.step);
      detail::put_values(os, p.first_moment);
      detail::put_values(os, p.second_moment);
    }
    if (!os) throw CheckpointError("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

/// Loads a checkpoint written at either precision, converting to Scalar.
template <typename Scalar>
Checkpoint<Scalar> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw CheckpointError("cannot open checkpoint " + path.string());
  char magic[8];
  if (!is.read(magic, sizeof(magic)) ||
      !std::equal(std::begin(magic), std::end(magic), std::begin(kCheckpointMagic))) {
    throw CheckpointError(path.string() + ": not a checkpoint file");
  }
  const auto version = detail::get_le<std::uint32_t>(is);
  if (version != kCheckpointVersion) {
    throw CheckpointError(path.string() + ": unsupported checkpoint version " +
                          std::to_string(version));
  }
  const auto width = detail::get_le<std::uint32_t>(is);
  if (width != 4 && width != 8) throw CheckpointError("bad scalar width in " + path.string());

  Checkpoint<Scalar> out;
  const auto n_meta = detail::get_le<std::uint64_t>(is);
  for (std::uint64_t i = 0; i < n_meta; ++i) {
    std::string k = detail::get_string(is);
    out.metadata[k] = detail::get_string(is);
  }
  const auto n_params = detail::get_le<std::uint64_t>(is);
  for (std::uint64_t i = 0; i < n_params; ++i) {
    std::string name = detail::get_string(is);
    const bool trainable = detail::get_le<std::uint8_t>(is) != 0;
    if (detail::get_le<std::uint32_t>(is) != 2) throw CheckpointError("unsupported tensor rank");
    const auto rows = static_cast<Index>(detail::get_le<std::uint64_t>(is));
    const auto cols = static_cast<Index>(detail::get_le<std::uint64_t>(is));
    auto& p = out.params.add(name, detail::get_values<Scalar>(is, rows, cols, width), trainable);
    p.step = detail::get_le<std::uint64_t>(is);
    p.first_moment = detail::get_values<Scalar>(is, rows, cols, width);
    p.second_moment = detail::get_values<Scalar>(is, rows, cols, width);
  }
  return out;
}

}  // namespace protoda

#endif  // PROTODA_NUMERICS_CHECKPOINT_HPP
