#pragma once

#include "afd/afd.hpp"
#include "config.hpp"
#include "report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace afd::cli {

struct RunResult {
  Table table;
  json diagnostics = json::array();
};

inline TruthSpec make_truth(const ModelConfig& mc, const TruthConfig& tc) {
  return {scalar_theta(tc.theta0), tc.pi0, mc.design};
}

inline RunResult cmd_eigen(const json& cfg, json& resolved) {
  const ModelConfig mc = parse_model(cfg, resolved);
  if (mc.family != "two_block") throw ConfigError("eigen: requires model.family = two_block");
  const AlphaGrid prior = parse_prior(cfg, resolved);
  const TruthConfig tc = parse_truth(cfg, resolved);
  Block b(child(cfg, "eigen"), resolved["eigen"], "eigen", {"designs", "T", "theta", "dense_limit"});
  std::vector<std::pair<int, int>> designs;
  if (b.has("designs") && b.has("T")) throw ConfigError("eigen: give either designs or T, not both");
  if (b.has("T")) {
    for (int T : b.require<std::vector<int>>("T")) {
      if (T < 2 || T % 2) throw ConfigError("eigen.T: entries must be even and >= 2");
      designs.emplace_back(T / 2, T / 2);
    }
  } else {
    for (const auto& d : b.get<std::vector<std::vector<int>>>("designs", {{mc.T0, mc.T1}})) {
      if (d.size() != 2) throw ConfigError("eigen.designs: entries must be [T0, T1]");
      designs.emplace_back(d[0], d[1]);
    }
  }
  const auto thetas = b.get<std::vector<double>>("theta", {tc.theta0});
  SpectralOptions opts;
  opts.dense_limit = b.get<std::size_t>("dense_limit", 4096);
  RunResult r;
  r.table.header = {"T", "T0", "T1", "theta", "j", "lambda", "below_fp_floor"};
  for (const auto& row : eigen_report(designs, thetas, mc.error, prior, opts)) {
    r.table.add({static_cast<long long>(row.T), static_cast<long long>(row.T0), static_cast<long long>(row.T1),
                 row.theta, static_cast<long long>(row.j), row.lambda, row.below_fp_floor});
  }
  return r;
}

inline RunResult cmd_pseudotrue(const json& cfg, json& resolved) {
  const ModelConfig mc = parse_model(cfg, resolved);
  const AlphaGrid prior = parse_prior(cfg, resolved);
  const TruthConfig tc = parse_truth(cfg, resolved);
  const auto kernels = parse_score(cfg, resolved);
  Block b(child(cfg, "estimation"), resolved["estimation"], "estimation", {"bracket", "x_tol", "n"});
  const RootOptions bracket = parse_bracket(b, tc.theta0 - 2.0, tc.theta0 + 3.0, 1e-10);
  const double n = b.get<double>("n", 1000.0);
  const TruthSpec truth = make_truth(mc, tc);
  RunResult r;
  r.table.header = {"q", "theta_star", "bias", "V_star", "rmse", "ci95"};
  for (const auto& ks : kernels) {
    const PopulationMoments pop(kernel_family(ks, prior), truth);
    const EstimationReport rep = population_report(pop, bracket, n, ks.label());
    r.table.add({rep.q, rep.theta, rep.bias, rep.V, rep.rmse, rep.ci95});
    json d = {{"q", rep.q}, {"solver_iterations", rep.diagnostics.solver_iterations}};
    if (ks.limit) {
      const MomentKernel K = make_kernel(*truth.design[0].model, scalar_theta(rep.theta), prior, ks);
      d["eigengap_ratio"] = K.diagnostics.eigengap_ratio;
      d["eigengap_warning"] = K.diagnostics.eigengap_warning;
    }
    r.diagnostics.push_back(d);
  }
  return r;
}

/// Reads a panel: a header row, an optional leading "design" column, then
/// either the block counts of each outcome or, for two-block models, the
/// full 0/1 sequence of T0 + T1 periods.
inline Dataset read_dataset(const std::string& path, const std::vector<DesignPoint>& design) {
  std::ifstream in(path);
  if (!in) throw ConfigError("estimation.data: cannot read '" + path + "'");
  Dataset data;
  for (const auto& d : design) data.designs.push_back(d.model);
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("estimation.data: empty file");
  const bool has_design = line.rfind("design", 0) == 0;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<int> v;
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      try {
        v.push_back(std::stoi(tok));
      } catch (const std::exception&) {
        throw ConfigError("estimation.data: line " + std::to_string(lineno) + ": not an integer");
      }
    }
    std::size_t d = 0;
    if (has_design) {
      if (v.empty() || v[0] < 0 || static_cast<std::size_t>(v[0]) >= design.size()) {
        throw ConfigError("estimation.data: line " + std::to_string(lineno) + ": bad design index");
      }
      d = static_cast<std::size_t>(v[0]);
      v.erase(v.begin());
    }
    const OutcomeModel& model = *design[d].model;
    Outcome y(v.begin(), v.end());
    const auto* tb = dynamic_cast<const TwoBlockBinomialModel*>(&model);
    try {
      if (tb && y.size() == static_cast<std::size_t>(tb->T0() + tb->T1()) && y.size() != 2) {
        y = counts_from_binary(y, tb->T0(), tb->T1());
      }
      data.unit_outcome.push_back(model.index_of(y));
    } catch (const std::exception& e) {
      throw ConfigError("estimation.data: line " + std::to_string(lineno) + ": " + e.what());
    }
    data.unit_design.push_back(d);
  }
  if (data.size() == 0) throw ConfigError("estimation.data: no units");
  return data;
}

inline RunResult cmd_estimate(const json& cfg, json& resolved) {
  const ModelConfig mc = parse_model(cfg, resolved);
  const AlphaGrid prior = parse_prior(cfg, resolved);
  const TruthConfig tc = parse_truth(cfg, resolved);
  const auto kernels = parse_score(cfg, resolved);
  Block b(child(cfg, "estimation"), resolved["estimation"], "estimation", {"bracket", "x_tol", "n", "data", "seed"});
  const RootOptions bracket = parse_bracket(b, tc.theta0 - 2.0, tc.theta0 + 3.0, 1e-10);
  Dataset data;
  if (b.has("data")) {
    data = read_dataset(b.require<std::string>("data"), mc.design);
  } else {
    const auto n = b.get<std::size_t>("n", 1000);
    const auto seed = b.get<std::uint64_t>("seed", 1);
    std::mt19937_64 rng = replication_rng(seed, 0);
    data = generate_panel(make_truth(mc, tc), n, rng);
  }
  RunResult r;
  r.table.header = {"q", "theta_hat", "V_hat", "se", "ci_lo", "ci_hi", "n"};
  const double n = static_cast<double>(data.size());
  for (const auto& ks : kernels) {
    const SampleMoments sample(kernel_family(ks, prior), data);
    const auto [th, iters] = mm_estimate(sample, bracket);
    const double V = sandwich_variance(sample, th);
    const auto [lo, hi] = confidence_interval(th, V, n);
    r.table.add({ks.label(), th, V, std::sqrt(V / n), lo, hi, static_cast<long long>(data.size())});
    r.diagnostics.push_back({{"q", ks.label()}, {"solver_iterations", iters}});
  }
  return r;
}

inline RunResult cmd_simulate(const json& cfg, json& resolved) {
  const ModelConfig mc = parse_model(cfg, resolved);
  McConfig mcfg;
  mcfg.prior = parse_prior(cfg, resolved);
  const TruthConfig tc = parse_truth(cfg, resolved);
  mcfg.truth = make_truth(mc, tc);
  mcfg.kernels = parse_score(cfg, resolved);
  Block e(child(cfg, "estimation"), resolved["estimation"], "estimation", {"bracket", "x_tol"});
  mcfg.bracket = parse_bracket(e, tc.theta0 - 2.0, tc.theta0 + 3.0, 1e-10);
  Block b(child(cfg, "simulation"), resolved["simulation"], "simulation",
          {"n", "reps", "seed", "failure_cap", "allow_inf"});
  mcfg.n = b.get<std::size_t>("n", 1000);
  mcfg.reps = b.get<std::size_t>("reps", 1000);
  mcfg.seed = b.get<std::uint64_t>("seed", 20240101);
  mcfg.failure_cap = b.get<double>("failure_cap", 0.01);
  const bool allow_inf = b.get<bool>("allow_inf", false);
  if (mcfg.n == 0 || mcfg.reps == 0) throw ConfigError("simulation: n and reps must be positive");
  RunResult r;
  for (const auto& ks : mcfg.kernels) {
    if (!ks.limit) continue;
    if (!allow_inf) throw ConfigError("simulation: q = inf is excluded by default; set simulation.allow_inf");
    // spectrum at theta0 for each design; the gap can close at the estimates
    for (const auto& d : mcfg.truth.design) {
      const MomentKernel K = make_kernel(*d.model, mcfg.truth.theta0, mcfg.prior, ks);
      if (K.diagnostics.eigengap_warning) {
        r.diagnostics.push_back({{"q", "inf"}, {"eigengap_warning", true},
                                 {"eigengap_ratio", K.diagnostics.eigengap_ratio}});
        break;
      }
    }
  }
  const McSummary s = run_monte_carlo(mcfg);
  r.table.header = {"q", "bias", "n_var", "rmse", "ci95"};
  for (const auto& row : s.rows) {
    r.table.add({row.q, row.bias, row.n_var, row.rmse, row.ci95});
    r.diagnostics.push_back({{"q", row.q}, {"replications", row.replications}, {"failures", row.failures}});
  }
  for (std::size_t i = 0; i < std::min<std::size_t>(s.messages.size(), 20); ++i) r.diagnostics.push_back(s.messages[i]);
  return r;
}

inline RunResult cmd_effects(const json& cfg, json& resolved) {
  const ModelConfig mc = parse_model(cfg, resolved);
  const AlphaGrid prior = parse_prior(cfg, resolved);
  const TruthConfig tc = parse_truth(cfg, resolved);
  Block b(child(cfg, "effects"), resolved["effects"], "effects", {"q", "mu", "value", "threshold"});
  const auto mu = b.get<std::string>("mu", "ape");
  EffectSpec effect;
  if (mu == "ape") effect = average_partial_effect();
  else if (mu == "constant") effect = constant_effect(b.get<double>("value", 1.0));
  else throw ConfigError("effects.mu: expected 'ape' or 'constant'");
  const double threshold = b.get<double>("threshold", 1e-9);
  json qs = b.has("q") ? b.raw("q") : json::array({0, 1, 2});
  if (!qs.is_array()) qs = json::array({qs});
  b.resolved()["q"] = qs;
  const TruthSpec truth = make_truth(mc, tc);
  const double mu0 = population_effect(effect, truth);
  const std::vector<Vector> probs = truth_probabilities(truth);
  RunResult r;
  r.table.header = {"q", "mu0", "mu_hat_population_mean", "bias", "sample_sd"};
  for (const auto& qj : qs) {
    int q = 0;
    std::string label;
    if (qj.is_string() && qj.get<std::string>() == "inf") {
      q = -1;
      label = "inf";
    } else if (qj.is_number_integer() && qj.get<int>() >= 0) {
      q = qj.get<int>();
      label = std::to_string(q);
    } else {
      throw ConfigError("effects.q: expected nonnegative integers or \"inf\"");
    }
    const EffectFamily fam = effect_family(effect, prior, q, threshold);
    double m1 = 0.0, m2 = 0.0, wsum = 0.0;
    for (std::size_t i = 0; i < truth.design.size(); ++i) {
      const Vector w = fam(*truth.design[i].model, truth.theta0).w;
      m1 += truth.design[i].weight * w.dot(probs[i]);
      m2 += truth.design[i].weight * w.array().square().matrix().dot(probs[i]);
      wsum += truth.design[i].weight;
    }
    m1 /= wsum;
    m2 /= wsum;
    r.table.add({label, mu0, m1, m1 - mu0, std::sqrt(std::max(0.0, m2 - m1 * m1))});
  }
  return r;
}

inline RunResult cmd_rates(const json& cfg, json& resolved) {
  const ModelConfig mc = parse_model(cfg, resolved);
  if (mc.family != "two_block") throw ConfigError("rates: requires model.family = two_block");
  RateConfig rc;
  rc.error = mc.error;
  rc.prior = parse_prior(cfg, resolved);
  const TruthConfig tc = parse_truth(cfg, resolved);
  rc.theta0 = tc.theta0;
  Block b(child(cfg, "rates"), resolved["rates"], "rates", {"T", "q", "pi0", "bracket", "x_tol", "dense_limit"});
  rc.T = b.get<std::vector<int>>("T", {64, 128, 256, 512});
  rc.q = b.get<std::vector<int>>("q", {0, 1, 2, 3});
  rc.bracket = parse_bracket(b, 0.5, 2.0, 1e-12);
  rc.spectral.dense_limit = b.get<std::size_t>("dense_limit", 4096);
  json& pis = b.resolved()["pi0"];
  pis = json::array();
  const json src = b.has("pi0") ? b.raw("pi0") : json::array({json{{"dist", "point"}, {"z", 1.0}}});
  if (!src.is_array()) throw ConfigError("rates.pi0: expected a list of distributions");
  for (std::size_t i = 0; i < src.size(); ++i) {
    pis.push_back(json::object());
    rc.pi0.push_back(parse_alpha_distribution(src[i], pis.back(), "rates.pi0[" + std::to_string(i) + "]"));
  }
  RunResult r;
  r.table.header = {"pi0", "q", "T", "b_T", "ratio", "precision_flag", "rank_warning"};
  for (const auto& row : rate_table(rc)) {
    r.table.add({row.pi0, static_cast<long long>(row.q), static_cast<long long>(row.T), row.b_T, row.ratio,
                 row.precision_flag, row.rank_warning});
  }
  return r;
}

/// Invariant suite. Returns true when every check passes.
inline bool run_selfcheck(std::ostream& os) {
  bool all = true;
  auto check = [&](const std::string& name, double err, double tol) {
    const bool ok = err <= tol;
    all = all && ok;
    os << (ok ? "PASS " : "FAIL ") << name << " err=" << format_number(err) << " tol=" << format_number(tol) << "\n";
  };
  const AlphaGrid prior = normal_grid(0.0, 1.0, 1000);
  const TwoBlockBinomialModel probit(2, 2, ErrorDistribution::probit());
  const SpectralQ spec(probit, scalar_theta(1.0), prior);

  check("column_stochastic_Q", (spec.q().colwise().sum().array() - 1.0).abs().maxCoeff(), 1e-10);

  {
    Eigen::EigenSolver<Matrix> es(spec.q(), false);
    std::vector<double> ev;
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) ev.push_back(es.eigenvalues()(i).real());
    std::sort(ev.rbegin(), ev.rend());
    double err = 0.0;
    for (std::size_t i = 0; i < ev.size(); ++i) err = std::max(err, std::abs(ev[i] - spec.eigenvalues()(static_cast<Eigen::Index>(i))));
    check("eigenvalues_Q_vs_Qbar", err, 1e-8);
  }

  {
    const TwoBlockBinomialModel logit(2, 2, ErrorDistribution::logit());
    const MomentKernel m = logit_exact_moment(2, 2, {1, 0}, {0, 1}, 0.7);
    double bias = 0.0;
    for (int i = 0; i < 50; ++i) {
      bias = std::max(bias, std::abs(conditional_bias(m, logit, scalar_theta(0.7), -4.0 + 8.0 * i / 49.0)(0)));
    }
    check("logit_exact_moment_conditional_bias", bias, 1e-12);
    const SpectralQ ls(logit, scalar_theta(0.7), prior);
    check("fixed_point_q5", (corrected_score(m, ls, 5).S - m.S).cwiseAbs().maxCoeff(), 1e-10);
  }

  {
    const EffectKernel W = baseline_effect_kernel(spec, average_partial_effect(), probit);
    const EffectKernel W1 = effect_kernel_q(W, spec, 1);
    const Vector jack = 2.0 * W.w - spec.q().transpose() * W.w;
    check("jackknife_identity", (W1.w - jack).cwiseAbs().maxCoeff(), 1e-12);
  }

  {
    double err = 0.0;
    for (double a : {-1.3, 0.2, 2.1}) {
      for (double t : {-0.5, 1.0}) {
        err = std::max(err, std::abs(outcome_probabilities(probit, scalar_theta(t), a).sum() - 1.0));
      }
    }
    check("probabilities_sum_to_one", err, 1e-10);
  }
  return all;
}

}  // namespace afd::cli
