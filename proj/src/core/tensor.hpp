#ifndef E2I_CORE_TENSOR_HPP
#define E2I_CORE_TENSOR_HPP

#include <Eigen/Core>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <vector>

#include "common.hpp"

namespace e2i {

template <class S>
using MatX = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class S>
using VecX = Eigen::Matrix<S, Eigen::Dynamic, 1>;
template <class S>
using MapMat = Eigen::Map<MatX<S>>;
template <class S>
using CMapMat = Eigen::Map<const MatX<S>>;
template <class S>
using MapVec = Eigen::Map<VecX<S>>;
template <class S>
using CMapVec = Eigen::Map<const VecX<S>>;

// 64-byte-aligned storage. Eigen picks vector code paths from the runtime
// pointer alignment, so buffers at malloc's whim (16 vs 32 mod 64) make
// repeated runs differ in the last bits. Pinning the base keeps every map's
// alignment class a pure function of the shape, which keeps reruns
// bit-identical.
template <class S>
struct AlignedAllocator {
    using value_type = S;
    static constexpr std::size_t alignment = 64;

    AlignedAllocator() = default;
    template <class U>
    AlignedAllocator(const AlignedAllocator<U>&) {}

    S* allocate(std::size_t n) {
        return static_cast<S*>(::operator new(n * sizeof(S), std::align_val_t{alignment}));
    }
    void deallocate(S* p, std::size_t) noexcept {
        ::operator delete(p, std::align_val_t{alignment});
    }
    bool operator==(const AlignedAllocator&) const { return true; }
    bool operator!=(const AlignedAllocator&) const { return false; }
};

template <class S>
using AlignedVec = std::vector<S, AlignedAllocator<S>>;

// Dense row-major n-d array. Heavy math goes through Eigen maps over the
// flat buffer; the shape is bookkeeping only.
template <class S>
struct Tensor {
    std::vector<int64_t> shape;
    AlignedVec<S> data;

    Tensor() = default;
    explicit Tensor(std::vector<int64_t> s) : shape(std::move(s)), data(numel_of(shape), S(0)) {}
    Tensor(std::initializer_list<int64_t> s) : Tensor(std::vector<int64_t>(s)) {}

    static int64_t numel_of(const std::vector<int64_t>& s) {
        int64_t n = 1;
        for (int64_t d : s) n *= d;
        return n;
    }

    int64_t numel() const { return static_cast<int64_t>(data.size()); }
    int64_t dim(int i) const { return shape[static_cast<size_t>(i)]; }
    int ndim() const { return static_cast<int>(shape.size()); }

    S* ptr() { return data.data(); }
    const S* ptr() const { return data.data(); }

    void fill(S v) { std::fill(data.begin(), data.end(), v); }

    void reshape(std::vector<int64_t> s) {
        require(numel_of(s) == numel(), Status::shape, "reshape changes element count");
        shape = std::move(s);
    }

    // Rows x cols view of the flat buffer; caller asserts the factorization.
    MapMat<S> mat(int64_t rows, int64_t cols) {
        require(rows * cols == numel(), Status::shape, "bad matrix view");
        return MapMat<S>(data.data(), rows, cols);
    }
    CMapMat<S> mat(int64_t rows, int64_t cols) const {
        require(rows * cols == numel(), Status::shape, "bad matrix view");
        return CMapMat<S>(data.data(), rows, cols);
    }
    MapVec<S> vec() { return MapVec<S>(data.data(), numel()); }
    CMapVec<S> vec() const { return CMapVec<S>(data.data(), numel()); }

    std::string shape_str() const {
        std::ostringstream os;
        os << "[";
        for (size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
        os << "]";
        return os.str();
    }
};

template <class S>
bool same_shape(const Tensor<S>& a, const Tensor<S>& b) {
    return a.shape == b.shape;
}

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

}  // namespace e2i

#endif
