#include "salsketch/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

namespace salsketch {

namespace {

constexpr char kMagic[9] = "SALCKPT1";

void write_u64(std::ostream& out, std::uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint64_t read_u64(std::istream& in) {
  std::uint64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}

void write_matrix(std::ostream& out, const Matrix& m) {
  out.write(reinterpret_cast<const char*>(m.data()),
            static_cast<std::streamsize>(sizeof(double) * m.size()));
}

Matrix read_matrix(std::istream& in, Eigen::Index rows, Eigen::Index cols) {
  Matrix m(rows, cols);
  in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(sizeof(double) * m.size()));
  return m;
}

}  // namespace

AdamState AdamState::zeros_like(const ParamStore& ps) {
  AdamState s;
  s.m.reserve(ps.count());
  s.v.reserve(ps.count());
  for (const std::string& name : ps.order()) {
    const Matrix& p = ps.at(name);
    s.m.push_back(Matrix::Zero(p.rows(), p.cols()));
    s.v.push_back(Matrix::Zero(p.rows(), p.cols()));
  }
  return s;
}

void save_checkpoint(const std::string& path, const SketchModel& model, const CheckpointMeta& meta,
                     const AdamState* opt) {
  const ParamStore& ps = model.params();
  nlohmann::json header;
  header["fingerprint"] = config_fingerprint(meta.config);
  header["config"] = meta.config;
  header["epoch"] = meta.epoch;
  header["global_step"] = meta.global_step;
  header["offset_scale"] = meta.offset_scale;
  header["rng"] = meta.rng_state;
  header["has_opt"] = opt != nullptr;
  header["opt_t"] = opt != nullptr ? opt->t : 0L;
  auto dir = nlohmann::json::array();
  for (const std::string& name : ps.order()) {
    const Matrix& p = ps.at(name);
    dir.push_back({{"name", name}, {"rows", p.rows()}, {"cols", p.cols()}});
  }
  header["params"] = std::move(dir);
  const std::string head = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write checkpoint " + path);
  out.write(kMagic, 8);
  write_u64(out, head.size());
  out.write(head.data(), static_cast<std::streamsize>(head.size()));
  for (const std::string& name : ps.order()) write_matrix(out, ps.at(name));
  if (opt != nullptr) {
    if (opt->m.size() != ps.count() || opt->v.size() != ps.count())
      throw InvalidParams("optimizer state does not match the parameter set");
    for (const Matrix& m : opt->m) write_matrix(out, m);
    for (const Matrix& v : opt->v) write_matrix(out, v);
  }
  if (!out) throw Error("short write on checkpoint " + path);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0)
    throw Error("not a checkpoint archive: " + path);
  const std::uint64_t head_len = read_u64(in);
  std::string head(head_len, '\0');
  in.read(head.data(), static_cast<std::streamsize>(head_len));
  if (!in) throw Error("truncated checkpoint header: " + path);

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(head);
  } catch (const nlohmann::json::exception& e) {
    throw Error("corrupt checkpoint header in " + path + ": " + e.what());
  }

  LoadedCheckpoint out{CheckpointMeta{}, SketchModel(header.at("config").get<TrainConfig>().model),
                       AdamState{}, false};
  out.meta.config = header.at("config").get<TrainConfig>();
  out.meta.epoch = header.at("epoch").get<int>();
  out.meta.global_step = header.at("global_step").get<long>();
  out.meta.offset_scale = header.at("offset_scale").get<double>();
  out.meta.rng_state = header.at("rng").get<std::string>();
  const std::uint64_t fp = header.at("fingerprint").get<std::uint64_t>();
  if (fp != config_fingerprint(out.meta.config))
    throw Error("checkpoint fingerprint mismatch in " + path);

  ParamStore& ps = out.model.params();
  const auto& dir = header.at("params");
  if (dir.size() != ps.count())
    throw InvalidParams("checkpoint parameter count does not match the config in " + path);
  std::size_t i = 0;
  for (const std::string& name : ps.order()) {
    const auto& d = dir.at(i++);
    Matrix& p = ps.at(name);
    if (d.at("name").get<std::string>() != name || d.at("rows").get<Eigen::Index>() != p.rows() ||
        d.at("cols").get<Eigen::Index>() != p.cols())
      throw InvalidParams("checkpoint entry '" + d.at("name").get<std::string>() +
                          "' does not match parameter '" + name + "'");
  }
  for (const std::string& name : ps.order()) {
    Matrix& p = ps.at(name);
    p = read_matrix(in, p.rows(), p.cols());
  }
  out.model.set_offset_scale(out.meta.offset_scale);

  out.has_opt = header.at("has_opt").get<bool>();
  if (out.has_opt) {
    out.opt.t = header.at("opt_t").get<long>();
    for (const std::string& name : ps.order()) {
      const Matrix& p = ps.at(name);
      out.opt.m.push_back(read_matrix(in, p.rows(), p.cols()));
    }
    for (const std::string& name : ps.order()) {
      const Matrix& p = ps.at(name);
      out.opt.v.push_back(read_matrix(in, p.rows(), p.cols()));
    }
  }
  if (!in) throw Error("truncated checkpoint arrays: " + path);
  return out;
}

}  // namespace salsketch
