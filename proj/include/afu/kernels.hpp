#pragma once

// Dense compute kernels behind the autograd tape.
//
// Every kernel exists twice: `serial::` is the plain reference loop nest and
// `parallel::` is the OpenMP version used at runtime. Each output element is
// reduced in the same order by both, so results are bitwise identical and
// independent of the thread count. The unqualified names forward to
// `parallel::`.

#include <cstddef>
#include <span>

#include "afu/activations.hpp"

namespace afu::kernels {

enum class Trans { No, Yes };

// C (m x n) = op(A) * op(B), or C += op(A) * op(B) when accumulate is set.
// op(A) is m x k: A is stored m x k (No) or k x m (Yes), row-major.
// op(B) is k x n: B is stored k x n (No) or n x k (Yes), row-major.
struct GemmArgs {
  Trans trans_a = Trans::No;
  Trans trans_b = Trans::No;
  std::size_t m = 0, n = 0, k = 0;
  bool accumulate = false;
};

namespace serial {
void gemm(const GemmArgs& args, std::span<const double> a, std::span<const double> b,
          std::span<double> c);
void activation_forward(act::ActivationKind kind, std::span<const double> z, std::span<double> out);
// dz += upstream * g'(z)
void activation_backward(act::ActivationKind kind, std::span<const double> z,
                         std::span<const double> upstream, std::span<double> dz);
}  // namespace serial

namespace parallel {
void gemm(const GemmArgs& args, std::span<const double> a, std::span<const double> b,
          std::span<double> c);
void activation_forward(act::ActivationKind kind, std::span<const double> z, std::span<double> out);
void activation_backward(act::ActivationKind kind, std::span<const double> z,
                         std::span<const double> upstream, std::span<double> dz);
}  // namespace parallel

using parallel::activation_backward;
using parallel::activation_forward;
using parallel::gemm;

// Number of OpenMP threads the parallel kernels will use (1 without OpenMP).
int max_threads();

}  // namespace afu::kernels
