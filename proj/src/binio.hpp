#pragma once

// Little helpers for the binary checkpoint format. Values are written in host
// byte order; checkpoints are not meant to move between architectures.

#include <cstdint>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

#include <Eigen/Dense>

namespace specshape::binio {

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

template <typename T>
  requires std::is_trivially_copyable_v<T>
void write(std::ostream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
  requires std::is_trivially_copyable_v<T>
T read(std::istream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw FormatError("truncated checkpoint");
  return value;
}

template <typename T>
void write_vector(std::ostream& out, const std::vector<T>& v) {
  write<std::uint64_t>(out, v.size());
  out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(T)));
}

template <typename T>
std::vector<T> read_vector(std::istream& in) {
  const auto n = read<std::uint64_t>(in);
  if (n > (std::uint64_t{1} << 34)) throw FormatError("implausible vector length in checkpoint");
  std::vector<T> v(n);
  in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(T)));
  if (!in) throw FormatError("truncated checkpoint");
  return v;
}

inline void write_eigen(std::ostream& out, const Eigen::VectorXd& v) {
  write<std::uint64_t>(out, static_cast<std::uint64_t>(v.size()));
  out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
}

inline Eigen::VectorXd read_eigen(std::istream& in) {
  const auto n = read<std::uint64_t>(in);
  if (n > (std::uint64_t{1} << 34)) throw FormatError("implausible vector length in checkpoint");
  Eigen::VectorXd v(static_cast<Eigen::Index>(n));
  in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
  if (!in) throw FormatError("truncated checkpoint");
  return v;
}

inline void write_string(std::ostream& out, const std::string& s) {
  write<std::uint64_t>(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_string(std::istream& in) {
  const auto n = read<std::uint64_t>(in);
  if (n > (1u << 24)) throw FormatError("implausible string length in checkpoint");
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  if (!in) throw FormatError("truncated checkpoint");
  return s;
}

inline void write_tag(std::ostream& out, const char (&tag)[5], std::uint32_t version) {
  out.write(tag, 4);
  write(out, version);
}

inline void expect_tag(std::istream& in, const char (&tag)[5], std::uint32_t version) {
  char got[4];
  in.read(got, 4);
  if (!in || std::string(got, 4) != std::string(tag, 4))
    throw FormatError(std::string("checkpoint section '") + tag + "' missing");
  if (read<std::uint32_t>(in) != version)
    throw FormatError(std::string("unsupported version for checkpoint section '") + tag + "'");
}

}  // namespace specshape::binio
