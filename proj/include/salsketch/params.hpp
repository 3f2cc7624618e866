#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "salsketch/ad.hpp"
#include "salsketch/common.hpp"

namespace salsketch {

enum class ParamInit { Uniform, Zero };

// Named parameter matrices in registration order, with matching gradient
// accumulators. Registration order is the serialization order.
class ParamStore {
 public:
  Matrix& add(const std::string& name, Eigen::Index rows, Eigen::Index cols,
              ParamInit init = ParamInit::Uniform);
  bool has(const std::string& name) const { return values_.count(name) != 0; }
  Matrix& at(const std::string& name);
  const Matrix& at(const std::string& name) const;
  Matrix& grad_at(const std::string& name);
  const Matrix& grad_at(const std::string& name) const;
  ParamInit init_kind(const std::string& name) const;

  const std::vector<std::string>& order() const { return order_; }
  std::size_t count() const { return order_.size(); }
  std::size_t total_scalars() const;

  void zero_grads();
  double grad_sq_norm() const;
  void scale_grads(double s);
  bool all_finite() const;

  // Uniform fan-in init for Uniform-kind entries (range +-1/sqrt(cols)),
  // zeros for Zero-kind; deterministic in registration order.
  void init(std::uint64_t seed);

 private:
  std::vector<std::string> order_;
  std::map<std::string, Matrix> values_;
  std::map<std::string, Matrix> grads_;
  std::map<std::string, ParamInit> inits_;
};

// Tape leaves for every parameter, in registration order.
struct BoundParams {
  std::map<std::string, ad::Var> vars;
  ad::Var at(const std::string& name) const;
};

BoundParams bind_params(ad::Tape& tape, const ParamStore& ps);
// Adds the tape's gradients (where present) into the store's accumulators.
void harvest_grads(const ad::Tape& tape, const BoundParams& bp, ParamStore& ps);

}  // namespace salsketch
