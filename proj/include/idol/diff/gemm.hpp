#pragma once

#include <cstddef>

#ifdef IDOL_USE_CBLAS
#include <cblas.h>
extern "C" void openblas_set_num_threads(int);
#endif

namespace idol::diff::detail {

#ifdef IDOL_USE_CBLAS
// Multi threaded BLAS kernels reduce in nondeterministic order, which would
// break bitwise reproducibility, so the thread count is pinned to one.
inline void pin_blas_threads() {
    static const bool done = [] {
        openblas_set_num_threads(1);
        return true;
    }();
    (void)done;
}
#endif

// C(MxN) = alpha * op(A) * op(B) + beta * C, row major. op(A) is MxK.
// Leading dimensions follow the stored layouts: A is stored KxM when ta is
// set, B is stored NxK when tb is set.
template <class S>
void gemm(bool ta, bool tb, int M, int N, int K, S alpha, const S* A, const S* B, S beta, S* C) {
#ifdef IDOL_USE_CBLAS
    pin_blas_threads();
    const int lda = ta ? M : K;
    const int ldb = tb ? K : N;
    if constexpr (sizeof(S) == sizeof(double)) {
        cblas_dgemm(CblasRowMajor, ta ? CblasTrans : CblasNoTrans, tb ? CblasTrans : CblasNoTrans,
                    M, N, K, static_cast<double>(alpha),
                    reinterpret_cast<const double*>(A), lda,
                    reinterpret_cast<const double*>(B), ldb, static_cast<double>(beta),
                    reinterpret_cast<double*>(C), N);
    } else {
        cblas_sgemm(CblasRowMajor, ta ? CblasTrans : CblasNoTrans, tb ? CblasTrans : CblasNoTrans,
                    M, N, K, static_cast<float>(alpha),
                    reinterpret_cast<const float*>(A), lda,
                    reinterpret_cast<const float*>(B), ldb, static_cast<float>(beta),
                    reinterpret_cast<float*>(C), N);
    }
#else
    for (int i = 0; i < M; ++i) {
        for (int j = 0; j < N; ++j) {
            S acc = 0;
            for (int k = 0; k < K; ++k) {
                const S av = ta ? A[static_cast<std::size_t>(k) * M + i]
                                : A[static_cast<std::size_t>(i) * K + k];
                const S bv = tb ? B[static_cast<std::size_t>(j) * K + k]
                                : B[static_cast<std::size_t>(k) * N + j];
                acc += av * bv;
            }
            S* c = &C[static_cast<std::size_t>(i) * N + j];
            *c = beta * (*c) + alpha * acc;
        }
    }
#endif
}

} // namespace idol::diff::detail
