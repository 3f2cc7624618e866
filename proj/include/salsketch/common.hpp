#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace salsketch {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Array = Eigen::ArrayXd;

// Error taxonomy shared across modules. Each maps to one failure mode of the
// public contracts; the CLI turns them into nonzero exit codes.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InvalidSketch : Error {
  using Error::Error;
};
struct UnsupportedTransform : Error {
  using Error::Error;
};
struct SequenceTooLong : Error {
  using Error::Error;
};
struct DegenerateDataset : Error {
  using Error::Error;
};
struct ManifestError : Error {
  using Error::Error;
};
struct ConfigError : Error {
  using Error::Error;
};
struct ShapeError : Error {
  using Error::Error;
};
struct InvalidParams : Error {
  using Error::Error;
};
struct EmptyAccumulation : Error {
  using Error::Error;
};
struct UndefinedMetric : Error {
  using Error::Error;
};

// Stateless 64-bit mix, used to derive independent per-item seeds from a
// master seed without coupling consumption order between items.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  return splitmix64(master ^ splitmix64(index + 0x51ed2701ULL));
}

}  // namespace salsketch
