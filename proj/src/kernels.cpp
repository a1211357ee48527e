#include "sbrl/kernels.hpp"

namespace sbrl::detail {

void matmul(const double* a, int n, int k, const double* b, int m, double* c) {
  for (int i = 0; i < n; ++i) {
    double* ci = c + static_cast<std::size_t>(i) * m;
    for (int j = 0; j < m; ++j) ci[j] = 0.0;
    const double* ai = a + static_cast<std::size_t>(i) * k;
    for (int kk = 0; kk < k; ++kk) {
      const double av = ai[kk];
      const double* bk = b + static_cast<std::size_t>(kk) * m;
      for (int j = 0; j < m; ++j) ci[j] += av * bk[j];
    }
  }
}

void matmul_acc_nt(const double* g, int n, int m, const double* b, int k, double* ga) {
  for (int i = 0; i < n; ++i) {
    const double* gi = g + static_cast<std::size_t>(i) * m;
    double* gai = ga + static_cast<std::size_t>(i) * k;
    for (int kk = 0; kk < k; ++kk) {
      const double* bk = b + static_cast<std::size_t>(kk) * m;
      double acc = 0.0;
      for (int j = 0; j < m; ++j) acc += gi[j] * bk[j];
      gai[kk] += acc;
    }
  }
}

void matmul_acc_tn(const double* a, int n, int k, const double* g, int m, double* gb) {
  for (int i = 0; i < n; ++i) {
    const double* ai = a + static_cast<std::size_t>(i) * k;
    const double* gi = g + static_cast<std::size_t>(i) * m;
    for (int kk = 0; kk < k; ++kk) {
      const double av = ai[kk];
      double* gbk = gb + static_cast<std::size_t>(kk) * m;
      for (int j = 0; j < m; ++j) gbk[j] += av * gi[j];
    }
  }
}

}  // namespace sbrl::detail
