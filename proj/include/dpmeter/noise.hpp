#pragma once

#include "dpmeter/rng.hpp"

namespace dpmeter::noise {

// Scale parameter of a Laplace distribution, in the same unit as the data
// it perturbs.  Zero is the degenerate "no noise" scale; it is accepted so
// noise-free test hooks can run through the normal pipeline, but operations
// that divide by the scale reject it.
class LaplaceScale {
 public:
  explicit LaplaceScale(double value);
  double value() const { return value_; }

 private:
  double value_;
};

// Parameters of one node's additive noise share.  A Laplace variable of
// scale lambda is infinitely divisible: it equals the sum of n independent
// G1 - G2 terms where G1, G2 are gamma with shape 1/n and scale lambda.
// Each of n nodes contributes one such term and the aggregate noise is
// exactly Laplace(lambda), even though no single node knows it.
struct GammaShareParams {
  int share_count;     // n, number of contributors splitting the noise
  LaplaceScale scale;  // lambda of the target aggregate distribution

  GammaShareParams(int n, LaplaceScale lambda);
};

struct AbsMoments {
  double mean;      // E|G1 - G2|
  double variance;  // Var|G1 - G2|
};

// Bounds on the relative aggregation error when up to a fraction alpha of
// the cluster may fail and shares are calibrated for the survivors.
struct UtilityBound {
  double mu;     // expected relative error
  double sigma;  // standard deviation of the relative error
  double alpha;  // tolerated failure fraction, in [0,1)
};

double sample_normal(RngStream& rng);

// Gamma variate with the given shape and scale.  Valid for any shape > 0;
// shapes below 1 (the share case, shape = 1/n) use the boosted rejection
// sampler: draw at shape+1 and multiply by U^(1/shape).
double sample_gamma(double shape, double scale, RngStream& rng);

// One gamma building block G(1/n, lambda) of a noise share.
double sample_gamma_share(const GammaShareParams& params, RngStream& rng);

// One node's full noise share, G1(1/n, lambda) - G2(1/n, lambda).
double sample_noise_share(const GammaShareParams& params, RngStream& rng);

// Laplace(lambda) by inverse transform.
double sample_laplace(LaplaceScale scale, RngStream& rng);

// Density exp(-|x|/lambda) / (2 lambda); requires lambda > 0.
double laplace_density(double x, LaplaceScale scale);
double laplace_log_density(double x, LaplaceScale scale);

// Scale required for an epsilon guarantee on a query of the given
// sensitivity: lambda = sensitivity / epsilon.
LaplaceScale calibrate_lambda(double sensitivity, double epsilon);

// B(x, y) = Gamma(x) Gamma(y) / Gamma(x + y), evaluated through lgamma so
// small arguments (x = 1/n for large n) do not overflow.
double beta_function(double x, double y);

// Closed-form absolute moments of G1 - G2 for gamma shape 1/share_count:
//   E|G1-G2|   = 2 lambda / B(1/2, 1/n)
//   Var|G1-G2| = (2/n - 4 / B(1/2, 1/n)^2) lambda^2
AbsMoments gamma_diff_moments(int share_count, LaplaceScale scale);

// Same moments for an arbitrary positive gamma shape.  The sum of N shares
// calibrated for N - M survivors has total shape N/(N-M) = 1/(1-alpha),
// which is where non-integer shapes come from.
AbsMoments folded_diff_moments(double shape, double lambda);

// Relative-error bounds for an aggregate of value `aggregate` when a
// fraction alpha of nodes may fail: mu and sigma of |noise| / (aggregate+1)
// with noise distributed as the 1/(1-alpha)-shape gamma difference.
// At alpha = 0 the two bounds coincide.
UtilityBound utility_bounds(double alpha, LaplaceScale scale, double aggregate);

// Worst-case relative error if every node independently adds full
// Laplace(lambda) noise instead of a share: node_count * lambda / (aggregate
// + 1).  This deliberately sums magnitudes; the measured expectation of
// |sum of N Laplace| grows only like sqrt(N), so treat this as a cap, not an
// estimate.
double decentralized_error(int node_count, LaplaceScale scale, double aggregate);

// Upper bound on an adversary's success probability when deciding between
// two adjacent query values under epsilon-calibrated noise: 1/(1+e^-eps).
double ml_success_bound(double epsilon);

}  // namespace dpmeter::noise
