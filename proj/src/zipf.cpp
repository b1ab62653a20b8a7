#include <cmath>

#include "dgcc/error.hpp"
#include "dgcc/workloads.hpp"

namespace dgcc {

namespace {

// log1p(x)/x and expm1(x)/x, stable near 0.
double helper1(double x) {
  return std::abs(x) > 1e-8 ? std::log1p(x) / x : 1 - x * (0.5 - x * (1.0 / 3 - 0.25 * x));
}
double helper2(double x) {
  return std::abs(x) > 1e-8 ? std::expm1(x) / x : 1 + x * 0.5 * (1 + x / 3 * (1 + 0.25 * x));
}

}  // namespace

uint64_t uniform_int(std::mt19937_64& rng, uint64_t lo, uint64_t hi) {
  uint64_t span = hi - lo + 1;
  if (span == 0) return rng();
  // Rejection keeps the draw unbiased.
  uint64_t limit = UINT64_MAX - UINT64_MAX % span;
  uint64_t v;
  do {
    v = rng();
  } while (v >= limit);
  return lo + v % span;
}

ZipfSampler::ZipfSampler(uint64_t n, double theta) : n_(n), theta_(theta) {
  if (n == 0) fail(ErrorCode::kUsage, "zipf needs at least one item");
  if (!(theta >= 0) || !std::isfinite(theta)) fail(ErrorCode::kUsage, "zipf theta must be >= 0");
  h_integral_x1_ = h_integral(1.5) - 1;
  h_integral_n_ = h_integral(static_cast<double>(n) + 0.5);
  s_ = 2 - h_integral_inverse(h_integral(2.5) - h(2));
}

double ZipfSampler::h(double x) const { return std::exp(-theta_ * std::log(x)); }

double ZipfSampler::h_integral(double x) const {
  double lx = std::log(x);
  return helper2((1 - theta_) * lx) * lx;
}

double ZipfSampler::h_integral_inverse(double x) const {
  double t = x * (1 - theta_);
  if (t < -1) t = -1;
  return std::exp(helper1(t) * x);
}

uint64_t ZipfSampler::operator()(std::mt19937_64& rng) const {
  for (;;) {
    double u = h_integral_n_ + uniform01(rng) * (h_integral_x1_ - h_integral_n_);
    double x = h_integral_inverse(u);
    double kx = std::floor(x + 0.5);
    uint64_t k = kx < 1 ? 1 : (kx > static_cast<double>(n_) ? n_ : static_cast<uint64_t>(kx));
    double kd = static_cast<double>(k);
    if (kd - x <= s_ || u >= h_integral(kd + 0.5) - h(kd)) return k;
  }
}

double zipf_pmf(uint64_t n, double theta, uint64_t rank) {
  if (rank < 1 || rank > n) return 0;
  double norm = 0;
  for (uint64_t r = n; r >= 1; --r) norm += std::pow(static_cast<double>(r), -theta);
  return std::pow(static_cast<double>(rank), -theta) / norm;
}

}  // namespace dgcc
