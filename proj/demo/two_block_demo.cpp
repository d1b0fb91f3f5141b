// Pseudo-true values of the corrected estimators in the T0 = T1 = 2 probit
// design with a N(0,1) prior grid and a N(1,1) true heterogeneity distribution.
#include "afd/afd.hpp"

#include <cstdio>
#include <memory>

int main() {
  using namespace afd;
  const AlphaGrid prior = normal_grid(0.0, 1.0, 1000);
  TruthSpec truth{scalar_theta(1.0), AlphaDistribution::normal(1.0, 1.0, 1000),
                  {{std::make_shared<const TwoBlockBinomialModel>(2, 2, ErrorDistribution::probit()), 1.0}}};

  const SpectralQ spec(*truth.design[0].model, truth.theta0, prior);
  std::printf("eigenvalues of Q:");
  for (Eigen::Index j = 0; j < spec.eigenvalues().size(); ++j) std::printf(" %.6g", spec.eigenvalues()(j));
  std::printf("\n\n%6s %12s %12s %12s %12s\n", "q", "theta_star", "bias", "V", "rmse");

  for (int q : {0, 1, 2, 5, 10, -1}) {
    KernelSpec ks;
    if (q < 0) ks.limit = true;
    else ks.q = q;
    const PopulationMoments pop(kernel_family(ks, prior), truth);
    // The limit moment jumps sign at theta = 0, so it needs a bracket excluding it.
    const RootOptions bracket = q < 0 ? RootOptions{0.5, 3.0, 1e-10} : RootOptions{-1.0, 4.0, 1e-10};
    const EstimationReport r = population_report(pop, bracket, 1000.0, ks.label());
    std::printf("%6s %12.6f %12.6f %12.6f %12.6f\n", r.q.c_str(), r.theta, r.bias, r.V, r.rmse);
  }
}
