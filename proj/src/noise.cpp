#include "dpmeter/noise.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace dpmeter::noise {

LaplaceScale::LaplaceScale(double value) : value_(value) {
  if (!std::isfinite(value) || value < 0) {
    throw std::invalid_argument("LaplaceScale: scale must be finite and >= 0");
  }
}

GammaShareParams::GammaShareParams(int n, LaplaceScale lambda)
    : share_count(n), scale(lambda) {
  if (n < 1) throw std::invalid_argument("GammaShareParams: share_count must be >= 1");
}

double sample_normal(RngStream& rng) {
  // Polar method; the second variate is discarded to keep the stream
  // consumption independent of call history.
  for (;;) {
    const double u = 2.0 * rng.next_double() - 1.0;
    const double v = 2.0 * rng.next_double() - 1.0;
    const double s = u * u + v * v;
    if (s > 0.0 && s < 1.0) return u * std::sqrt(-2.0 * std::log(s) / s);
  }
}

namespace {

// Marsaglia-Tsang squeeze sampler, shape >= 1.
double gamma_shape_ge1(double shape, RngStream& rng) {
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = sample_normal(rng);
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = rng.next_double_open();
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
  }
}

}  // namespace

double sample_gamma(double shape, double scale, RngStream& rng) {
  if (!(shape > 0.0) || !std::isfinite(shape)) {
    throw std::invalid_argument("sample_gamma: shape must be > 0");
  }
  if (!(scale >= 0.0) || !std::isfinite(scale)) {
    throw std::invalid_argument("sample_gamma: scale must be >= 0");
  }
  if (shape >= 1.0) return scale * gamma_shape_ge1(shape, rng);
  // Boost: G(shape) = G(shape + 1) * U^(1/shape).
  const double g = gamma_shape_ge1(shape + 1.0, rng);
  const double u = rng.next_double_open();
  return scale * g * std::pow(u, 1.0 / shape);
}

double sample_gamma_share(const GammaShareParams& params, RngStream& rng) {
  return sample_gamma(1.0 / params.share_count, params.scale.value(), rng);
}

double sample_noise_share(const GammaShareParams& params, RngStream& rng) {
  const double g1 = sample_gamma_share(params, rng);
  const double g2 = sample_gamma_share(params, rng);
  return g1 - g2;
}

double sample_laplace(LaplaceScale scale, RngStream& rng) {
  const double u = rng.next_double_open() - 0.5;
  const double sign = u < 0 ? -1.0 : 1.0;
  return -scale.value() * sign * std::log1p(-2.0 * std::fabs(u));
}

double laplace_density(double x, LaplaceScale scale) {
  const double l = scale.value();
  if (l <= 0) throw std::invalid_argument("laplace_density: scale must be > 0");
  return std::exp(-std::fabs(x) / l) / (2.0 * l);
}

double laplace_log_density(double x, LaplaceScale scale) {
  const double l = scale.value();
  if (l <= 0) throw std::invalid_argument("laplace_log_density: scale must be > 0");
  return -std::fabs(x) / l - std::log(2.0 * l);
}

LaplaceScale calibrate_lambda(double sensitivity, double epsilon) {
  if (!(sensitivity > 0) || !std::isfinite(sensitivity)) {
    throw std::invalid_argument("calibrate_lambda: sensitivity must be > 0");
  }
  if (!(epsilon > 0) || !std::isfinite(epsilon)) {
    throw std::invalid_argument("calibrate_lambda: epsilon must be > 0");
  }
  return LaplaceScale(sensitivity / epsilon);
}

double beta_function(double x, double y) {
  if (!(x > 0) || !(y > 0)) {
    throw std::invalid_argument("beta_function: arguments must be > 0");
  }
  return std::exp(std::lgamma(x) + std::lgamma(y) - std::lgamma(x + y));
}

AbsMoments folded_diff_moments(double shape, double lambda) {
  if (!(shape > 0)) throw std::invalid_argument("folded_diff_moments: shape must be > 0");
  if (!(lambda >= 0)) throw std::invalid_argument("folded_diff_moments: lambda must be >= 0");
  const double b = beta_function(0.5, shape);
  const double mean = 2.0 * lambda / b;
  // E (G1-G2)^2 = 2 shape lambda^2, so Var|..| = 2 shape lambda^2 - mean^2.
  const double variance = (2.0 * shape - 4.0 / (b * b)) * lambda * lambda;
  return {mean, variance};
}

AbsMoments gamma_diff_moments(int share_count, LaplaceScale scale) {
  if (share_count < 1) {
    throw std::invalid_argument("gamma_diff_moments: share_count must be >= 1");
  }
  return folded_diff_moments(1.0 / share_count, scale.value());
}

UtilityBound utility_bounds(double alpha, LaplaceScale scale, double aggregate) {
  if (!(alpha >= 0) || !(alpha < 1)) {
    throw std::invalid_argument("utility_bounds: alpha must be in [0,1)");
  }
  if (!(aggregate >= 0)) {
    throw std::invalid_argument("utility_bounds: aggregate must be >= 0");
  }
  const AbsMoments m = folded_diff_moments(1.0 / (1.0 - alpha), scale.value());
  const double denom = aggregate + 1.0;
  return {m.mean / denom, std::sqrt(m.variance) / denom, alpha};
}

double decentralized_error(int node_count, LaplaceScale scale, double aggregate) {
  if (node_count < 1) {
    throw std::invalid_argument("decentralized_error: node_count must be >= 1");
  }
  if (!(aggregate >= 0)) {
    throw std::invalid_argument("decentralized_error: aggregate must be >= 0");
  }
  return node_count * scale.value() / (aggregate + 1.0);
}

double ml_success_bound(double epsilon) {
  if (!(epsilon >= 0)) {
    throw std::invalid_argument("ml_success_bound: epsilon must be >= 0");
  }
  return 1.0 / (1.0 + std::exp(-epsilon));
}

}  // namespace dpmeter::noise
