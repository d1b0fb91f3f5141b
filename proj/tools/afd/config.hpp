#pragma once

#include "afd/afd.hpp"
#include "json.hpp"

#include <cstdint>
#include <fstream>
#include <memory>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace afd::cli {

using json = nlohmann::json;

inline constexpr const char* kSchema = "afd-config/1";

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// View of one config object that rejects unknown keys and records every
/// value it hands out (defaults included) into the resolved config.
class Block {
 public:
  Block(const json& src, json& resolved, std::string name, std::set<std::string> allowed)
      : src_(src), out_(resolved), name_(std::move(name)) {
    if (!src_.is_object()) throw ConfigError(name_ + ": expected a JSON object");
    if (!out_.is_object()) out_ = json::object();
    for (const auto& [key, _] : src_.items()) {
      if (!allowed.count(key)) throw ConfigError(name_ + ": unknown key '" + key + "'");
    }
  }

  bool has(const std::string& key) const { return src_.contains(key); }
  const json& raw(const std::string& key) const { return src_.at(key); }
  const std::string& name() const { return name_; }
  json& resolved() { return out_; }

  template <class T>
  T get(const std::string& key, const T& fallback) {
    T v = fallback;
    if (has(key)) v = convert<T>(key);
    out_[key] = v;
    return v;
  }

  template <class T>
  T require(const std::string& key) {
    if (!has(key)) throw ConfigError(name_ + ": missing required key '" + key + "'");
    T v = convert<T>(key);
    out_[key] = v;
    return v;
  }

 private:
  template <class T>
  T convert(const std::string& key) const {
    try {
      return src_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(name_ + "." + key + ": " + e.what());
    }
  }

  const json& src_;
  json& out_;
  std::string name_;
};

inline const json& child(const json& root, const std::string& key) {
  static const json empty = json::object();
  return root.contains(key) ? root.at(key) : empty;
}

inline ErrorDistribution parse_error(Block& b) {
  const auto name = b.require<std::string>("error");
  try {
    return ErrorDistribution::from_name(name);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(b.name() + ".error: " + e.what());
  }
}

/// {"dist":"normal","mean","sd","M"} | {"dist":"point","z"} | {"dist":"uniform","a","b","M"}.
inline AlphaDistribution parse_alpha_distribution(const json& src, json& out, const std::string& name) {
  Block b(src, out, name, {"dist", "mean", "sd", "M", "z", "a", "b"});
  const auto dist = b.require<std::string>("dist");
  try {
    if (dist == "normal") {
      const double mean = b.get<double>("mean", 0.0);
      const double sd = b.get<double>("sd", 1.0);
      return AlphaDistribution::normal(mean, sd, b.get<std::size_t>("M", 1000));
    }
    if (dist == "point") return AlphaDistribution::point(b.require<double>("z"));
    if (dist == "uniform") {
      const double lo = b.require<double>("a");
      const double hi = b.require<double>("b");
      return AlphaDistribution::uniform(lo, hi, b.get<std::size_t>("M", 1000));
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError(name + ": " + e.what());
  }
  throw ConfigError(name + ".dist: unknown distribution '" + dist + "'");
}

struct ModelConfig {
  std::vector<DesignPoint> design;
  ErrorDistribution error;
  std::string family;
  int T0 = 0, T1 = 0, T = 0;
};

inline ModelConfig parse_model(const json& root, json& resolved) {
  Block b(child(root, "model"), resolved["model"], "model",
          {"family", "T0", "T1", "T", "error", "theta_dim", "covariates"});
  ModelConfig mc;
  mc.family = b.get<std::string>("family", "two_block");
  mc.error = parse_error(b);
  const int theta_dim = b.get<int>("theta_dim", 1);
  if (theta_dim != 1) throw ConfigError("model.theta_dim: only scalar theta (theta_dim = 1) is supported");
  try {
    if (mc.family == "two_block") {
      mc.T0 = b.require<int>("T0");
      mc.T1 = b.require<int>("T1");
      mc.T = mc.T0 + mc.T1;
      mc.design.push_back({std::make_shared<const TwoBlockBinomialModel>(mc.T0, mc.T1, mc.error), 1.0});
      return mc;
    }
    if (mc.family != "binary_sequence") throw ConfigError("model.family: unknown family '" + mc.family + "'");
    json& cov_out = b.resolved()["covariates"];
    const json cov_src = b.has("covariates") ? b.raw("covariates") : json::object();
    Block cov(cov_src, cov_out, "model.covariates",
              {"kind", "values", "mean", "sd", "units", "seed"});
    const auto kind = cov.get<std::string>("kind", "two_block");
    if (kind == "two_block") {
      mc.T0 = b.require<int>("T0");
      mc.T1 = b.require<int>("T1");
      mc.T = mc.T0 + mc.T1;
      mc.design.push_back({std::make_shared<const BinarySequenceModel>(two_block_covariates(mc.T0, mc.T1), mc.error), 1.0});
    } else if (kind == "matrix") {
      const auto rows = cov.require<std::vector<std::vector<double>>>("values");
      if (rows.empty() || rows[0].size() != 1) throw ConfigError("model.covariates.values: need a T x 1 matrix");
      Matrix x(static_cast<Eigen::Index>(rows.size()), 1);
      for (std::size_t t = 0; t < rows.size(); ++t) {
        if (rows[t].size() != 1) throw ConfigError("model.covariates.values: ragged matrix");
        x(static_cast<Eigen::Index>(t), 0) = rows[t][0];
      }
      mc.T = static_cast<int>(rows.size());
      mc.design.push_back({std::make_shared<const BinarySequenceModel>(x, mc.error), 1.0});
    } else if (kind == "normal") {
      mc.T = b.require<int>("T");
      const double mean = cov.get<double>("mean", 0.5);
      const double sd = cov.get<double>("sd", 0.5);
      const auto units = cov.get<std::size_t>("units", 1000);
      const auto seed = cov.get<std::uint64_t>("seed", 1);
      if (units == 0) throw ConfigError("model.covariates.units must be positive");
      std::mt19937_64 rng(seed);
      std::normal_distribution<double> draw(mean, sd);
      for (std::size_t i = 0; i < units; ++i) {
        Matrix x(mc.T, 1);
        for (int t = 0; t < mc.T; ++t) x(t, 0) = draw(rng);
        mc.design.push_back({std::make_shared<const BinarySequenceModel>(x, mc.error), 1.0});
      }
    } else {
      throw ConfigError("model.covariates.kind: unknown kind '" + kind + "'");
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("model: ") + e.what());
  }
  return mc;
}

inline AlphaGrid parse_prior(const json& root, json& resolved) {
  const AlphaDistribution d = parse_alpha_distribution(
      child(root, "prior").empty() ? json{{"dist", "normal"}} : child(root, "prior"), resolved["prior"], "prior");
  return d.grid();
}

struct TruthConfig {
  double theta0 = 1.0;
  AlphaDistribution pi0 = AlphaDistribution::normal(1.0, 1.0, 1000);
};

inline TruthConfig parse_truth(const json& root, json& resolved) {
  Block b(child(root, "truth"), resolved["truth"], "truth", {"theta0", "pi0"});
  TruthConfig t;
  t.theta0 = b.get<double>("theta0", 1.0);
  const json pi0 = b.has("pi0") ? b.raw("pi0") : json{{"dist", "normal"}, {"mean", 1.0}, {"sd", 1.0}};
  t.pi0 = parse_alpha_distribution(pi0, b.resolved()["pi0"], "truth.pi0");
  return t;
}

/// One kernel per requested q. "q" may be an integer, "inf", or a list of those.
inline std::vector<KernelSpec> parse_score(const json& root, json& resolved) {
  Block b(child(root, "score"), resolved["score"], "score",
          {"score", "q", "stem", "c", "threshold", "inf_mode", "smallest_k", "alternative_q_tilde", "dense_limit"});
  KernelSpec base;
  const auto initial = b.get<std::string>("score", "integrated");
  if (initial == "integrated") base.initial = KernelSpec::Initial::integrated;
  else if (initial == "profile") base.initial = KernelSpec::Initial::profile;
  else throw ConfigError("score.score: expected 'integrated' or 'profile'");
  const auto stem = b.get<std::string>("stem", "power");
  if (stem == "power") base.stem = KernelSpec::Stem::power;
  else if (stem == "softexp") base.stem = KernelSpec::Stem::softexp;
  else throw ConfigError("score.stem: expected 'power' or 'softexp'");
  base.c = b.get<double>("c", 1e-6);
  if (!(base.c > 0.0)) throw ConfigError("score.c must be positive");
  const double threshold = b.get<double>("threshold", 1e-9);
  const auto inf_mode = b.get<std::string>("inf_mode", "smallest");
  const int k = b.get<int>("smallest_k", 1);
  if (inf_mode == "smallest") base.limit_options = {threshold, k};
  else if (inf_mode == "threshold") base.limit_options = {threshold, 0};
  else throw ConfigError("score.inf_mode: expected 'smallest' or 'threshold'");
  base.alternative_q_tilde = b.get<bool>("alternative_q_tilde", false);
  base.spectral.dense_limit = b.get<std::size_t>("dense_limit", 4096);
  base.spectral.zero_threshold = threshold;

  json qs = b.has("q") ? b.raw("q") : json(0);
  if (!qs.is_array()) qs = json::array({qs});
  b.resolved()["q"] = qs;
  std::vector<KernelSpec> out;
  for (const auto& q : qs) {
    KernelSpec ks = base;
    if (q.is_string() && q.get<std::string>() == "inf") {
      ks.limit = true;
    } else if (q.is_number_integer() && q.get<int>() >= 0) {
      ks.q = q.get<int>();
    } else {
      throw ConfigError("score.q: expected a nonnegative integer, \"inf\", or a list of those");
    }
    if (ks.limit && ks.alternative_q_tilde) throw ConfigError("score: q = inf is not available with alternative_q_tilde");
    out.push_back(ks);
  }
  if (base.stem == KernelSpec::Stem::softexp) out.resize(1);
  return out;
}

inline RootOptions parse_bracket(Block& b, double lo, double hi, double tol) {
  auto br = b.get<std::vector<double>>("bracket", {lo, hi});
  if (br.size() != 2 || !(br[0] < br[1])) throw ConfigError(b.name() + ".bracket: expected [lo, hi] with lo < hi");
  return {br[0], br[1], b.get<double>("x_tol", tol)};
}

inline json load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("malformed JSON in '") + path + "': " + e.what());
  }
  if (!j.is_object()) throw ConfigError("config root must be a JSON object");
  static const std::set<std::string> top = {"schema", "model", "prior", "truth", "score", "estimation",
                                            "simulation", "eigen", "rates", "effects", "output", "run",
                                            "diagnostics", "outputs"};
  for (const auto& [key, _] : j.items()) {
    if (!top.count(key)) throw ConfigError("unknown top-level key '" + key + "'");
  }
  if (j.contains("schema") && j.at("schema") != kSchema) {
    throw ConfigError("unsupported schema '" + j.at("schema").dump() + "', expected " + kSchema);
  }
  return j;
}

}  // namespace afd::cli
