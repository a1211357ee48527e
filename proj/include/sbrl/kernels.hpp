#pragma once

#include <cmath>

namespace sbrl::detail {

// C[n,m] = A[n,k] * B[k,m]; C is overwritten. Row-major, (i,k,j) order.
void matmul(const double* a, int n, int k, const double* b, int m, double* c);

// GA[n,k] += G[n,m] * B[k,m]^T   (adjoint w.r.t. the left operand)
void matmul_acc_nt(const double* g, int n, int m, const double* b, int k, double* ga);

// GB[k,m] += A[n,k]^T * G[n,m]   (adjoint w.r.t. the right operand)
void matmul_acc_tn(const double* a, int n, int k, const double* g, int m, double* gb);

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double softplus(double x) {
  // max(x,0) + log1p(exp(-|x|)): overflow-free for any finite x.
  return (x > 0.0 ? x : 0.0) + std::log1p(std::exp(-std::fabs(x)));
}

}  // namespace sbrl::detail
