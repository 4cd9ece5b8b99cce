#pragma once

#include <functional>
#include <vector>

#include "pfgm/geometry.hpp"

namespace pfgm {

// sup |F_n(x) - F(x)| for the empirical CDF of `samples`.
double ks_statistic(std::vector<double> samples, const std::function<double(double)>& cdf);
double ks_two_sample(std::vector<double> a, std::vector<double> b);
// Asymptotic one-sample critical value at level alpha (0.01 -> 1.63 / sqrt(n)).
double ks_critical_value(std::size_t n, double alpha = 0.01);

// Energy distance 2E|X-Y| - E|X-X'| - E|Y-Y'| between two point sets (one
// point per row), with U-statistics for the within-set terms.
double energy_distance(const Mat& a, const Mat& b);

// W2 between equal-size empirical measures, by optimal assignment.
double wasserstein2(const Mat& a, const Mat& b);
// W2 between 1-D samples of equal size (sorted matching).
double wasserstein2_1d(std::vector<double> a, std::vector<double> b);

// Minimum-cost perfect matching for a square cost matrix; returns the column
// assigned to each row.
std::vector<int> solve_assignment(const Mat& cost);

// Relative standard deviation of the chi distribution with n degrees of freedom.
double chi_relative_std(int n);

// Quantile of a sample (linear interpolation between order statistics).
double quantile(std::vector<double> values, double q);

}  // namespace pfgm
