#pragma once

#include "afd/errors.hpp"
#include "afd/estimation.hpp"
#include "afd/model.hpp"
#include "afd/parallel.hpp"
#include "afd/prior.hpp"
#include "afd/scores.hpp"

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace afd {

/// Independent generator for replication `rep` of a run seeded with `seed`.
inline std::mt19937_64 replication_rng(std::uint64_t seed, std::uint64_t rep) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(rep), static_cast<std::uint32_t>(rep >> 32)};
  return std::mt19937_64(seq);
}

/// Simulated panel of n units. Unit i uses design point i when the design has
/// exactly n points (a fixed covariate sample), the single design point when
/// there is one, and a weighted draw otherwise.
inline Dataset generate_panel(const TruthSpec& truth, std::size_t n, std::mt19937_64& rng) {
  truth.validate();
  Dataset data;
  for (const auto& d : truth.design) data.designs.push_back(d.model);
  data.unit_design.resize(n);
  data.unit_outcome.resize(n);
  std::vector<double> w;
  for (const auto& d : truth.design) w.push_back(d.weight);
  std::discrete_distribution<std::size_t> pick(w.begin(), w.end());
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t d = 0;
    if (truth.design.size() == n) {
      d = i;
    } else if (truth.design.size() > 1) {
      d = pick(rng);
    }
    const double alpha = truth.pi0.sample(rng);
    const OutcomeModel& model = *truth.design[d].model;
    data.unit_design[i] = d;
    data.unit_outcome[i] = model.index_of(model.simulate(alpha, truth.theta0, rng));
  }
  return data;
}

struct McConfig {
  TruthSpec truth;
  AlphaGrid prior;
  std::vector<KernelSpec> kernels;
  std::size_t n = 1000;
  std::size_t reps = 1000;
  std::uint64_t seed = 20240101;
  RootOptions bracket;
  double failure_cap = 0.01;
};

struct McRow {
  std::string q;
  double bias = 0.0;
  double n_var = 0.0;
  double rmse = 0.0;
  double ci95 = 0.0;
  std::size_t replications = 0;
  std::size_t failures = 0;
  /// Per-replication estimates (NaN for failed replications).
  std::vector<double> estimates;
};

struct McSummary {
  std::vector<McRow> rows;
  std::vector<std::string> messages;
};

inline McSummary run_monte_carlo(const McConfig& cfg) {
  if (cfg.reps < 1 || cfg.n < 1) throw std::invalid_argument("run_monte_carlo: reps and n must be >= 1");
  if (cfg.kernels.empty()) throw std::invalid_argument("run_monte_carlo: no kernels requested");
  const std::size_t nq = cfg.kernels.size();
  std::vector<KernelFamily> families;
  for (const auto& ks : cfg.kernels) families.push_back(kernel_family(ks, cfg.prior));
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<std::vector<double>> est(nq, std::vector<double>(cfg.reps, nan));
  std::vector<std::vector<char>> covered(nq, std::vector<char>(cfg.reps, 0));
  std::vector<std::vector<std::string>> errors(cfg.reps);
  const double theta0 = cfg.truth.theta0(0);

  parallel_chunks(cfg.reps, [&](std::size_t r) {
    std::mt19937_64 rng = replication_rng(cfg.seed, r);
    const Dataset data = generate_panel(cfg.truth, cfg.n, rng);
    for (std::size_t iq = 0; iq < nq; ++iq) {
      try {
        const SampleMoments sample(families[iq], data);
        const double th = mm_estimate(sample, cfg.bracket).first;
        const double V = sandwich_variance(sample, th);
        const auto [lo, hi] = confidence_interval(th, V, static_cast<double>(cfg.n));
        est[iq][r] = th;
        covered[iq][r] = (lo <= theta0 && theta0 <= hi) ? 1 : 0;
      } catch (const NumericalError& e) {
        errors[r].push_back("rep " + std::to_string(r) + " q=" + cfg.kernels[iq].label() + ": " + e.what());
      }
    }
  });

  McSummary summary;
  for (const auto& e : errors) summary.messages.insert(summary.messages.end(), e.begin(), e.end());
  for (std::size_t iq = 0; iq < nq; ++iq) {
    McRow row;
    row.q = cfg.kernels[iq].label();
    row.estimates = est[iq];
    double s1 = 0.0, s2 = 0.0, cov = 0.0;
    for (std::size_t r = 0; r < cfg.reps; ++r) {
      if (std::isnan(est[iq][r])) {
        ++row.failures;
        continue;
      }
      const double b = est[iq][r] - theta0;
      s1 += b;
      s2 += b * b;
      cov += covered[iq][r];
      ++row.replications;
    }
    if (static_cast<double>(row.failures) > cfg.failure_cap * static_cast<double>(cfg.reps)) {
      std::ostringstream os;
      os << "run_monte_carlo: " << row.failures << " of " << cfg.reps << " replications failed for q="
         << row.q << " (cap " << cfg.failure_cap * 100.0 << "%)";
      if (!summary.messages.empty()) os << "; first: " << summary.messages.front();
      throw NumericalError(os.str());
    }
    if (row.replications == 0) {
      throw NumericalError("run_monte_carlo: every replication failed for q=" + row.q);
    }
    const double R = static_cast<double>(row.replications);
    row.bias = s1 / R;
    const double var = s2 / R - row.bias * row.bias;
    row.n_var = static_cast<double>(cfg.n) * var;
    row.rmse = std::sqrt(s2 / R);
    row.ci95 = cov / R;
    summary.rows.push_back(std::move(row));
  }
  return summary;
}

struct RateConfig {
  std::vector<int> T{64, 128, 256, 512};
  std::vector<int> q{0, 1, 2, 3};
  std::vector<AlphaDistribution> pi0;
  ErrorDistribution error = ErrorDistribution::probit();
  AlphaGrid prior = normal_grid(0.0, 1.0, 1000);
  double theta0 = 1.0;
  RootOptions bracket{0.5, 2.0, 1e-12};
  SpectralOptions spectral;
};

struct RateRow {
  std::string pi0;
  int q = 0;
  int T = 0;
  double b_T = 0.0;
  /// b_{T'} / b_T for the previous T' in the sweep (NaN for the first).
  double ratio = std::numeric_limits<double>::quiet_NaN();
  /// |b_T| < 1e-7: quadrature noise may dominate.
  bool precision_flag = false;
  /// Prior grid smaller than the outcome space: Q has rank at most M.
  bool rank_warning = false;
};

/// Pseudo-true biases of S (I - Q)^q for balanced two-block designs
/// T0 = T1 = T/2 over a sweep of T, q and pi0.
inline std::vector<RateRow> rate_table(const RateConfig& cfg) {
  std::vector<RateRow> rows;
  for (const auto& pi0 : cfg.pi0) {
    for (int q : cfg.q) {
      double prev = std::numeric_limits<double>::quiet_NaN();
      for (int T : cfg.T) {
        if (T < 2 || T % 2 != 0) throw std::invalid_argument("rate_table: T must be even and >= 2");
        auto model = std::make_shared<const TwoBlockBinomialModel>(T / 2, T / 2, cfg.error);
        TruthSpec truth{scalar_theta(cfg.theta0), pi0, {{model, 1.0}}};
        KernelSpec ks;
        ks.q = q;
        ks.spectral = cfg.spectral;
        const PopulationMoments pop(kernel_family(ks, cfg.prior), truth);
        RateRow row;
        row.pi0 = pi0.label();
        row.q = q;
        row.T = T;
        row.b_T = pseudo_true(pop, cfg.bracket).first - cfg.theta0;
        row.ratio = prev / row.b_T;
        row.precision_flag = std::abs(row.b_T) < 1e-7;
        row.rank_warning = cfg.prior.size() < model->outcome_count();
        prev = row.b_T;
        rows.push_back(row);
      }
    }
  }
  return rows;
}

}  // namespace afd
