#pragma once

#include <functional>
#include <span>
#include <vector>

namespace rembo::stats {

double mean(std::span<const double> xs);
/// Sample standard deviation (n - 1 denominator); 0 for fewer than two values.
double stddev(std::span<const double> xs);
/// Linear-interpolation quantile (Hyndman-Fan type 7), q in [0, 1].
double quantile(std::vector<double> xs, double q);
double median(std::vector<double> xs);

/// Survival function of the Kolmogorov distribution, P(K > lambda).
double kolmogorov_survival(double lambda);

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

/// One-sample Kolmogorov-Smirnov test against a continuous CDF.
KsResult ks_one_sample(std::vector<double> xs, const std::function<double(double)>& cdf);
/// Two-sample Kolmogorov-Smirnov test (asymptotic p-value).
KsResult ks_two_sample(std::vector<double> a, std::vector<double> b);

/// Least-squares slope of y on x.
double ols_slope(std::span<const double> x, std::span<const double> y);

}  // namespace rembo::stats
