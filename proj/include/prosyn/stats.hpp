#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include <boost/math/distributions/beta.hpp>

namespace prosyn {

/// Standard-normal CDF. erfc keeps the absolute error well below 1e-12,
/// which the abstraction needs so row sums stay stable.
inline double normal_cdf(double x) {
  return 0.5 * std::erfc(-x * 0.7071067811865475244);
}

inline double normal_cdf(double x, double mean, double std) {
  return normal_cdf((x - mean) / std);
}

/// Central moment E[(sigma*Z)^k] of a zero-mean normal: 0 for odd k,
/// (k-1)!! sigma^k for even k. Computed by recursion m_k = (k-1) sigma^2 m_{k-2}.
inline double normal_central_moment(int k, double sigma) {
  if (k < 0) throw std::invalid_argument("normal_central_moment: k < 0");
  if (k % 2 == 1) return 0.0;
  double m = 1.0;
  const double s2 = sigma * sigma;
  for (int j = 2; j <= k; j += 2) m *= double(j - 1) * s2;
  return m;
}

/// Raw moment E[X^p] of X ~ N(mean, sigma^2), p <= some small degree.
inline double normal_raw_moment(int p, double mean, double sigma) {
  if (p < 0) throw std::invalid_argument("normal_raw_moment: p < 0");
  double sum = 0.0;
  double binom = 1.0;  // C(p, j)
  double mean_pow = std::pow(mean, p);
  // sum_j C(p,j) mean^(p-j) E[(sigma Z)^j]
  for (int j = 0; j <= p; ++j) {
    if (j > 0) {
      binom = binom * double(p - j + 1) / double(j);
      mean_pow = (mean != 0.0) ? std::pow(mean, p - j) : (p - j == 0 ? 1.0 : 0.0);
    }
    if (j % 2 == 0) sum += binom * mean_pow * normal_central_moment(j, sigma);
  }
  return sum;
}

struct ConfidenceInterval {
  double lower = 0.0;
  double upper = 1.0;
};

/// Exact (Clopper-Pearson) two-sided binomial confidence interval.
inline ConfidenceInterval clopper_pearson(std::int64_t successes, std::int64_t n,
                                          double confidence) {
  if (n <= 0 || successes < 0 || successes > n)
    throw std::invalid_argument("clopper_pearson: bad counts");
  if (!(confidence > 0.0 && confidence < 1.0))
    throw std::invalid_argument("clopper_pearson: confidence outside (0,1)");
  const double alpha = 1.0 - confidence;
  ConfidenceInterval ci;
  using boost::math::beta_distribution;
  if (successes > 0) {
    beta_distribution<double> lo(double(successes), double(n - successes + 1));
    ci.lower = boost::math::quantile(lo, alpha / 2);
  }
  if (successes < n) {
    beta_distribution<double> hi(double(successes + 1), double(n - successes));
    ci.upper = boost::math::quantile(hi, 1.0 - alpha / 2);
  }
  return ci;
}

/// One-sample Kolmogorov-Smirnov statistic against a caller-supplied CDF.
template <class Cdf>
double ks_statistic(std::vector<double> samples, Cdf&& cdf) {
  if (samples.empty()) throw std::invalid_argument("ks_statistic: no samples");
  std::sort(samples.begin(), samples.end());
  const double n = double(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double f = cdf(samples[i]);
    d = std::max(d, std::abs(f - double(i) / n));
    d = std::max(d, std::abs(f - double(i + 1) / n));
  }
  return d;
}

/// Asymptotic KS critical value at the 1% level.
inline double ks_critical_1pct(std::size_t n) { return 1.62762 / std::sqrt(double(n)); }

inline double binomial_std(double p, std::int64_t n) {
  return std::sqrt(std::max(0.0, p * (1.0 - p)) / double(n));
}

}  // namespace prosyn
