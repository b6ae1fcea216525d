#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace vdst {

// Thrown when tensor/argument shapes do not line up.
struct DimensionError : std::runtime_error {
    explicit DimensionError(const std::string& msg) : std::runtime_error(msg) {}
};

// Dense row-major double tensor. 4-d tensors follow the [w, h, D, C]
// convention used across the project: width, height, frames, channels,
// with channels contiguous in memory.
struct Tensor {
    std::vector<int> shape;
    std::vector<double> v;

    Tensor() = default;
    explicit Tensor(std::vector<int> s) : shape(std::move(s)) {
        v.assign(static_cast<size_t>(count(shape)), 0.0);
    }
    Tensor(std::vector<int> s, double fill) : shape(std::move(s)) {
        v.assign(static_cast<size_t>(count(shape)), fill);
    }

    static int64_t count(const std::vector<int>& s) {
        int64_t n = 1;
        for (int d : s) {
            if (d < 0) throw DimensionError("negative tensor dimension");
            n *= d;
        }
        return n;
    }

    static Tensor zeros(std::vector<int> s) { return Tensor(std::move(s)); }
    static Tensor full(std::vector<int> s, double x) { return Tensor(std::move(s), x); }

    int ndim() const { return static_cast<int>(shape.size()); }
    int dim(int i) const { return shape[static_cast<size_t>(i)]; }
    int64_t size() const { return static_cast<int64_t>(v.size()); }
    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    double* data() { return v.data(); }
    const double* data() const { return v.data(); }

    double& operator[](int64_t i) { return v[static_cast<size_t>(i)]; }
    double operator[](int64_t i) const { return v[static_cast<size_t>(i)]; }

    // 4-d accessors, [w,h,D,C]
    int64_t idx4(int x, int y, int d, int c) const {
        return ((static_cast<int64_t>(x) * shape[1] + y) * shape[2] + d) * shape[3] + c;
    }
    double& at(int x, int y, int d, int c) { return v[static_cast<size_t>(idx4(x, y, d, c))]; }
    double at(int x, int y, int d, int c) const { return v[static_cast<size_t>(idx4(x, y, d, c))]; }

    // 2-d accessors, [rows, cols]
    double& at2(int r, int c) { return v[static_cast<size_t>(r) * shape[1] + c]; }
    double at2(int r, int c) const { return v[static_cast<size_t>(r) * shape[1] + c]; }

    Tensor reshaped(std::vector<int> s) const {
        if (count(s) != size()) throw DimensionError("reshape: element count mismatch");
        Tensor out;
        out.shape = std::move(s);
        out.v = v;
        return out;
    }

    bool all_finite() const;
    std::string shape_str() const;
};

// Dense boolean tensor with the same axis conventions.
struct BoolTensor {
    std::vector<int> shape;
    std::vector<uint8_t> v;

    BoolTensor() = default;
    explicit BoolTensor(std::vector<int> s) : shape(std::move(s)) {
        v.assign(static_cast<size_t>(Tensor::count(shape)), 0);
    }

    bool empty() const { return v.empty(); }
    int dim(int i) const { return shape[static_cast<size_t>(i)]; }
    int64_t size() const { return static_cast<int64_t>(v.size()); }

    int64_t idx4(int x, int y, int d, int c) const {
        return ((static_cast<int64_t>(x) * shape[1] + y) * shape[2] + d) * shape[3] + c;
    }
    uint8_t& at(int x, int y, int d, int c) { return v[static_cast<size_t>(idx4(x, y, d, c))]; }
    uint8_t at(int x, int y, int d, int c) const { return v[static_cast<size_t>(idx4(x, y, d, c))]; }

    uint8_t& at2(int x, int y) { return v[static_cast<size_t>(x) * shape[1] + y]; }
    uint8_t at2(int x, int y) const { return v[static_cast<size_t>(x) * shape[1] + y]; }
};

// Row-major GEMM kernels. Outputs are partitioned by row across threads and
// every output element is reduced sequentially over its own k loop, so
// results are bit-identical regardless of thread count.
void gemm_nn(int M, int N, int K, const double* A, const double* B, double* C, bool accumulate);
void gemm_nt(int M, int N, int K, const double* A, const double* B, double* C, bool accumulate);
void gemm_tn(int M, int N, int K, const double* A, const double* B, double* C, bool accumulate);

} // namespace vdst
