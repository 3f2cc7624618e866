#include "salsketch/params.hpp"

#include <cmath>

namespace salsketch {

Matrix& ParamStore::add(const std::string& name, Eigen::Index rows, Eigen::Index cols,
                        ParamInit init) {
  if (has(name)) throw InvalidParams("duplicate parameter \"" + name + "\"");
  if (rows <= 0 || cols <= 0) throw InvalidParams("parameter \"" + name + "\" has empty shape");
  order_.push_back(name);
  inits_[name] = init;
  grads_[name] = Matrix::Zero(rows, cols);
  return values_[name] = Matrix::Zero(rows, cols);
}

Matrix& ParamStore::at(const std::string& name) {
  auto it = values_.find(name);
  if (it == values_.end()) throw InvalidParams("unknown parameter \"" + name + "\"");
  return it->second;
}

const Matrix& ParamStore::at(const std::string& name) const {
  auto it = values_.find(name);
  if (it == values_.end()) throw InvalidParams("unknown parameter \"" + name + "\"");
  return it->second;
}

Matrix& ParamStore::grad_at(const std::string& name) {
  auto it = grads_.find(name);
  if (it == grads_.end()) throw InvalidParams("unknown parameter \"" + name + "\"");
  return it->second;
}

const Matrix& ParamStore::grad_at(const std::string& name) const {
  auto it = grads_.find(name);
  if (it == grads_.end()) throw InvalidParams("unknown parameter \"" + name + "\"");
  return it->second;
}

ParamInit ParamStore::init_kind(const std::string& name) const {
  auto it = inits_.find(name);
  if (it == inits_.end()) throw InvalidParams("unknown parameter \"" + name + "\"");
  return it->second;
}

std::size_t ParamStore::total_scalars() const {
  std::size_t n = 0;
  for (const auto& name : order_) n += static_cast<std::size_t>(values_.at(name).size());
  return n;
}

void ParamStore::zero_grads() {
  for (auto& [name, g] : grads_) g.setZero();
}

double ParamStore::grad_sq_norm() const {
  double s = 0.0;
  for (const auto& name : order_) s += grads_.at(name).squaredNorm();
  return s;
}

void ParamStore::scale_grads(double s) {
  for (auto& [name, g] : grads_) g *= s;
}

bool ParamStore::all_finite() const {
  for (const auto& name : order_) {
    if (!values_.at(name).allFinite()) return false;
  }
  return true;
}

void ParamStore::init(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (const auto& name : order_) {
    Matrix& m = values_.at(name);
    if (inits_.at(name) == ParamInit::Zero) {
      m.setZero();
      continue;
    }
    const double bound = 1.0 / std::sqrt(static_cast<double>(m.cols()));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = u(rng);
    }
  }
}

ad::Var BoundParams::at(const std::string& name) const {
  auto it = vars.find(name);
  if (it == vars.end()) throw InvalidParams("parameter \"" + name + "\" not bound");
  return it->second;
}

BoundParams bind_params(ad::Tape& tape, const ParamStore& ps) {
  BoundParams bp;
  for (const auto& name : ps.order()) {
    bp.vars[name] = tape.leaf(ps.at(name), /*requires_grad=*/tape.grad_enabled());
  }
  return bp;
}

void harvest_grads(const ad::Tape& tape, const BoundParams& bp, ParamStore& ps) {
  for (const auto& [name, var] : bp.vars) {
    const Matrix& g = tape.grad(var);
    if (g.size() != 0) ps.grad_at(name) += g;
  }
}

}  // namespace salsketch
