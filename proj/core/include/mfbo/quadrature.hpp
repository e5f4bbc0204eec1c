#pragma once

#include <functional>
#include <vector>

namespace mfbo {

/// Gauss-Hermite rule normalized for the standard normal measure: the nodes
/// z_k and weights g_k satisfy sum_k g_k h(z_k) = E[h(Z)], Z ~ N(0,1),
/// exactly for polynomials h of degree <= 2K-1. Weights are positive and sum
/// to one; nodes are symmetric about zero.
struct QuadratureRule {
  int order = 0;
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// Builds the K-point rule from the eigendecomposition of the Jacobi matrix
/// of the probabilists' Hermite recurrence. 1 <= K <= 100.
QuadratureRule gauss_hermite_rule(int order);

/// sum_k g_k h(mean + sqrt(var) z_k): the expectation of h under N(mean, var).
/// Throws on negative variance or a non-finite integrand value.
double gaussian_expectation(const std::function<double(double)>& h, double mean, double var,
                            const QuadratureRule& rule);

}  // namespace mfbo
