#pragma once

#include <functional>
#include <vector>

namespace spiketest {

// Regularized lower/upper incomplete gamma functions P(a,x), Q(a,x).
// Series expansion for x < a+1, continued fraction otherwise; relative
// error below 1e-12 over the ranges used here.
double regularized_gamma_p(double a, double x);
double regularized_gamma_q(double a, double x);

// Upper tail of the chi-squared distribution with df degrees of freedom.
double chi2_survival(double x, double df);

double normal_cdf(double z);

// Inverse standard normal CDF (Acklam's rational approximation plus one
// Halley refinement step).
double normal_quantile(double p);

// Kolmogorov-Smirnov sup distance between a sample and a reference CDF.
double ks_distance(std::vector<double> sample,
                   const std::function<double(double)>& cdf);

// KS distance of a sample in [0,1] against the uniform CDF.
double ks_uniform_distance(std::vector<double> sample);

// Slope of the least-squares line y ~ a + b x.
double regression_slope(const std::vector<double>& x, const std::vector<double>& y);

double median(std::vector<double> values);
double mean(const std::vector<double>& values);
double sample_sd(const std::vector<double>& values);

}  // namespace spiketest
