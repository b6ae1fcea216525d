#include "vdst/tensor.hpp"

#include <cmath>
#include <sstream>

namespace vdst {

bool Tensor::all_finite() const {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

std::string Tensor::shape_str() const {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
    os << "]";
    return os.str();
}

// C[M,N] (+)= A[M,K] * B[K,N]
void gemm_nn(int M, int N, int K, const double* A, const double* B, double* C, bool accumulate) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < M; ++i) {
        double* crow = C + static_cast<int64_t>(i) * N;
        if (!accumulate)
            for (int j = 0; j < N; ++j) crow[j] = 0.0;
        const double* arow = A + static_cast<int64_t>(i) * K;
        for (int k = 0; k < K; ++k) {
            double a = arow[k];
            const double* brow = B + static_cast<int64_t>(k) * N;
            for (int j = 0; j < N; ++j) crow[j] += a * brow[j];
        }
    }
}

// C[M,N] (+)= A[M,K] * B[N,K]^T. The simd reduction order is fixed by the
// compiled vector width, so results stay bit-identical across runs and
// thread counts on a given build.
void gemm_nt(int M, int N, int K, const double* A, const double* B, double* C, bool accumulate) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < M; ++i) {
        const double* arow = A + static_cast<int64_t>(i) * K;
        double* crow = C + static_cast<int64_t>(i) * N;
        for (int j = 0; j < N; ++j) {
            const double* brow = B + static_cast<int64_t>(j) * K;
            double s = 0.0;
#pragma omp simd reduction(+ : s)
            for (int k = 0; k < K; ++k) s += arow[k] * brow[k];
            crow[j] = accumulate ? crow[j] + s : s;
        }
    }
}

// C[M,N] (+)= A[K,M]^T * B[K,N]
void gemm_tn(int M, int N, int K, const double* A, const double* B, double* C, bool accumulate) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < M; ++i) {
        double* crow = C + static_cast<int64_t>(i) * N;
        if (!accumulate)
            for (int j = 0; j < N; ++j) crow[j] = 0.0;
        for (int k = 0; k < K; ++k) {
            double a = A[static_cast<int64_t>(k) * M + i];
            const double* brow = B + static_cast<int64_t>(k) * N;
            for (int j = 0; j < N; ++j) crow[j] += a * brow[j];
        }
    }
}

} // namespace vdst
