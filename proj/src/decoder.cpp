#include "salsketch/decoder.hpp"

#include <algorithm>
#include <cmath>

namespace salsketch {

void GmmParams::validate() const {
  const auto m = pi.size();
  if (m == 0) throw InvalidParams("gmm: no components");
  if (mu_x.size() != m || mu_y.size() != m || sigma_x.size() != m || sigma_y.size() != m ||
      rho.size() != m) {
    throw InvalidParams("gmm: component arrays disagree in length");
  }
  if (!pi.allFinite() || !mu_x.allFinite() || !mu_y.allFinite() || !sigma_x.allFinite() ||
      !sigma_y.allFinite() || !rho.allFinite()) {
    throw InvalidParams("gmm: non-finite parameter");
  }
  if ((pi.array() < 0).any() || std::abs(pi.sum() - 1.0) > 1e-6) {
    throw InvalidParams("gmm: weights are not a simplex");
  }
  if ((sigma_x.array() <= 0).any() || (sigma_y.array() <= 0).any()) {
    throw InvalidParams("gmm: nonpositive sigma");
  }
  if ((rho.array().abs() >= 1.0).any()) throw InvalidParams("gmm: |rho| must be < 1");
}

void register_decoder_params(ParamStore& ps, const ModelConfig& cfg) {
  const int in = cfg.d + 5;
  ps.add("dec.wx", 4 * cfg.d_h, in);
  ps.add("dec.wh", 4 * cfg.d_h, cfg.d_h);
  ps.add("dec.b", 4 * cfg.d_h, 1, ParamInit::Zero);
  ps.add("dec.wy", cfg.head_dim(), cfg.d_h);
  ps.add("dec.by", cfg.head_dim(), 1, ParamInit::Zero);
}

StepOut decoder_step(ad::Tape& t, const BoundParams& p, const ModelConfig& cfg,
                     const DecoderState& state, ad::Var g, ad::Var v_prev) {
  (void)t;
  if (v_prev.rows() != 5 || v_prev.cols() != 1) throw ShapeError("decoder_step: v_prev not 5x1");
  ad::Var x = ad::concat_rows(g, v_prev);
  ad::Var gates =
      ad::matmul(p.at("dec.wx"), x) + ad::matmul(p.at("dec.wh"), state.h) + p.at("dec.b");
  const int dh = cfg.d_h;
  ad::Var i = sigmoid_(ad::slice_rows(gates, 0, dh));
  ad::Var f = sigmoid_(ad::slice_rows(gates, dh, dh));
  ad::Var gg = tanh_(ad::slice_rows(gates, 2 * dh, dh));
  ad::Var o = sigmoid_(ad::slice_rows(gates, 3 * dh, dh));
  StepOut out;
  out.state.c = f * state.c + i * gg;
  out.state.h = o * tanh_(out.state.c);
  out.y = ad::matmul(p.at("dec.wy"), out.state.h) + p.at("dec.by");
  return out;
}

GmmParams split_output(const Vector& y, int m, const Ablations& abl) {
  GmmParams g;
  if (abl.l1_regression) {
    const int want = 2 + (abl.no_pen_state ? 0 : 3);
    if (y.size() != want) throw ShapeError("split_output: head length mismatch");
    g.pi = Vector::Ones(1);
    g.mu_x = Vector::Constant(1, y(0));
    g.mu_y = Vector::Constant(1, y(1));
    g.sigma_x = Vector::Ones(1);
    g.sigma_y = Vector::Ones(1);
    g.rho = Vector::Zero(1);
    if (!abl.no_pen_state) g.pen_logits = y.segment(2, 3);
    return g;
  }
  const int want = 6 * m + (abl.no_pen_state ? 0 : 3);
  if (y.size() != want) {
    throw ShapeError("split_output: expected " + std::to_string(want) + " entries, got " +
                     std::to_string(y.size()));
  }
  const Vector logits = y.segment(0, m);
  const double mx = logits.maxCoeff();
  Vector e = (logits.array() - mx).exp().matrix();
  g.pi = e / e.sum();
  g.mu_x = y.segment(m, m);
  g.mu_y = y.segment(2 * m, m);
  g.sigma_x =
      y.segment(3 * m, m).array().min(kSigmaRawClamp).max(-kSigmaRawClamp).exp().matrix();
  g.sigma_y =
      y.segment(4 * m, m).array().min(kSigmaRawClamp).max(-kSigmaRawClamp).exp().matrix();
  g.rho = y.segment(5 * m, m).array().tanh().min(kRhoLimit).max(-kRhoLimit).matrix();
  if (!abl.no_pen_state) g.pen_logits = y.segment(6 * m, 3);
  return g;
}

double gmm_log_density(double dx, double dy, const GmmParams& g) {
  g.validate();
  const int m = g.components();
  Vector terms(m);
  for (int j = 0; j < m; ++j) {
    const double r = g.rho(j);
    const double one_m_r2 = 1.0 - r * r;
    const double u = (dx - g.mu_x(j)) / g.sigma_x(j);
    const double v = (dy - g.mu_y(j)) / g.sigma_y(j);
    const double z = u * u + v * v - 2.0 * r * u * v;
    const double log_n = -std::log(2.0 * M_PI) - std::log(g.sigma_x(j)) -
                         std::log(g.sigma_y(j)) - 0.5 * std::log(one_m_r2) -
                         z / (2.0 * one_m_r2);
    const double log_pi = g.pi(j) > 0 ? std::log(g.pi(j)) : -1e300;
    terms(j) = log_pi + log_n;
  }
  const double mx = terms.maxCoeff();
  return mx + std::log((terms.array() - mx).exp().sum());
}

Stroke5Point sample_step(const Vector& y, const ModelConfig& cfg, std::mt19937_64& rng,
                         double temperature, bool greedy) {
  if (!(temperature > 0)) throw Error("sample_step: temperature must be positive");
  const GmmParams g = split_output(y, cfg.m, cfg.ablations);
  Stroke5Point out{};

  int j = 0;
  if (cfg.ablations.l1_regression) {
    out.dx = g.mu_x(0);
    out.dy = g.mu_y(0);
  } else if (greedy) {
    Eigen::Index jmax = 0;
    g.pi.maxCoeff(&jmax);
    j = static_cast<int>(jmax);
    out.dx = g.mu_x(j);
    out.dy = g.mu_y(j);
  } else {
    // Categorical over tempered weights, then a correlated normal draw.
    Vector logw = ((g.pi.array() + 1e-300).log() / temperature).matrix();
    const double mx = logw.maxCoeff();
    Vector w = (logw.array() - mx).exp().matrix();
    w /= w.sum();
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    double r = uni(rng), acc = 0.0;
    j = g.components() - 1;
    for (int k = 0; k < g.components(); ++k) {
      acc += w(k);
      if (r <= acc) {
        j = k;
        break;
      }
    }
    std::normal_distribution<double> nrm(0.0, 1.0);
    const double z1 = nrm(rng), z2 = nrm(rng);
    const double rho = g.rho(j);
    const double sx = g.sigma_x(j) * std::sqrt(temperature);
    const double sy = g.sigma_y(j) * std::sqrt(temperature);
    out.dx = g.mu_x(j) + sx * z1;
    out.dy = g.mu_y(j) + sy * (rho * z1 + std::sqrt(1.0 - rho * rho) * z2);
  }

  if (cfg.ablations.no_pen_state) {
    out.p1 = 1.0;
    return out;
  }
  int pen = 0;
  if (greedy) {
    Eigen::Index pmax = 0;
    g.pen_logits.maxCoeff(&pmax);
    pen = static_cast<int>(pmax);
  } else {
    Eigen::Vector3d logits = g.pen_logits / temperature;
    const double mx = logits.maxCoeff();
    Eigen::Vector3d w = (logits.array() - mx).exp().matrix();
    w /= w.sum();
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    double r = uni(rng), acc = 0.0;
    pen = 2;
    for (int k = 0; k < 3; ++k) {
      acc += w(k);
      if (r <= acc) {
        pen = k;
        break;
      }
    }
  }
  out.p1 = pen == 0 ? 1.0 : 0.0;
  out.p2 = pen == 1 ? 1.0 : 0.0;
  out.p3 = pen == 2 ? 1.0 : 0.0;
  return out;
}

}  // namespace salsketch
