#include "afu/kernels.hpp"

#include <cassert>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace afu::kernels {

namespace {

// Minimum multiply-adds for the parallel GEMM path.
constexpr std::size_t kParallelGemmWork = 1 << 15;
constexpr std::size_t kParallelMapWork = 1 << 14;

inline double load_a(const GemmArgs& g, std::span<const double> a, std::size_t i, std::size_t p) {
  return g.trans_a == Trans::No ? a[i * g.k + p] : a[p * g.m + i];
}

inline double load_b(const GemmArgs& g, std::span<const double> b, std::size_t p, std::size_t j) {
  return g.trans_b == Trans::No ? b[p * g.n + j] : b[j * g.k + p];
}

void check_sizes(const GemmArgs& g, std::span<const double> a, std::span<const double> b,
                 std::span<double> c) {
  assert(a.size() >= g.m * g.k);
  assert(b.size() >= g.k * g.n);
  assert(c.size() >= g.m * g.n);
  (void)a;
  (void)b;
  (void)c;
  (void)g;
}

}  // namespace

namespace serial {

void gemm(const GemmArgs& g, std::span<const double> a, std::span<const double> b,
          std::span<double> c) {
  check_sizes(g, a, b, c);
  for (std::size_t i = 0; i < g.m; ++i) {
    for (std::size_t j = 0; j < g.n; ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < g.k; ++p) s += load_a(g, a, i, p) * load_b(g, b, p, j);
      double& out = c[i * g.n + j];
      out = g.accumulate ? out + s : s;
    }
  }
}

void activation_forward(act::ActivationKind kind, std::span<const double> z, std::span<double> out) {
  for (std::size_t i = 0; i < z.size(); ++i) out[i] = act::value_unchecked(kind, z[i]);
}

void activation_backward(act::ActivationKind kind, std::span<const double> z,
                         std::span<const double> upstream, std::span<double> dz) {
  for (std::size_t i = 0; i < z.size(); ++i) {
    dz[i] += upstream[i] * act::derivative_unchecked(kind, z[i]);
  }
}

}  // namespace serial

namespace parallel {

// Row-parallel over C. Each c(i,j) is summed over p in ascending order from
// 0.0, exactly as in serial::gemm; the loop nest is i-p-j so the inner loop
// streams contiguous rows of B (B is transposed into scratch when needed).
void gemm(const GemmArgs& g, std::span<const double> a, std::span<const double> b,
          std::span<double> c) {
  check_sizes(g, a, b, c);
  const std::size_t m = g.m, n = g.n, k = g.k;

  std::vector<double> bt;
  const double* bk = b.data();  // k x n row-major view of op(B)
  if (g.trans_b == Trans::Yes) {
    bt.resize(k * n);
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t p = 0; p < k; ++p) bt[p * n + j] = b[j * k + p];
    bk = bt.data();
  }

  const bool go_parallel = m > 1 && m * n * k >= kParallelGemmWork;
#pragma omp parallel if (go_parallel)
  {
    std::vector<double> acc(n);
#pragma omp for schedule(static)
    for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(m); ++ii) {
      const auto i = static_cast<std::size_t>(ii);
      std::fill(acc.begin(), acc.end(), 0.0);
      for (std::size_t p = 0; p < k; ++p) {
        const double aip = load_a(g, a, i, p);
        const double* brow = bk + p * n;
        for (std::size_t j = 0; j < n; ++j) acc[j] += aip * brow[j];
      }
      double* crow = c.data() + i * n;
      if (g.accumulate) {
        for (std::size_t j = 0; j < n; ++j) crow[j] += acc[j];
      } else {
        for (std::size_t j = 0; j < n; ++j) crow[j] = acc[j];
      }
    }
  }
}

void activation_forward(act::ActivationKind kind, std::span<const double> z, std::span<double> out) {
  const auto count = static_cast<std::ptrdiff_t>(z.size());
#pragma omp parallel for schedule(static) if (z.size() >= kParallelMapWork)
  for (std::ptrdiff_t i = 0; i < count; ++i) out[i] = act::value_unchecked(kind, z[i]);
}

void activation_backward(act::ActivationKind kind, std::span<const double> z,
                         std::span<const double> upstream, std::span<double> dz) {
  const auto count = static_cast<std::ptrdiff_t>(z.size());
#pragma omp parallel for schedule(static) if (z.size() >= kParallelMapWork)
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    dz[i] += upstream[i] * act::derivative_unchecked(kind, z[i]);
  }
}

}  // namespace parallel

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace afu::kernels
