#pragma once

#include <cstddef>
#include <new>
#include <string>
#include <vector>

namespace cpm::ad {

// 64-byte aligned storage. Keeping every buffer at the same alignment makes
// Eigen's vectorized reductions take the same split every run, so results
// never depend on where the allocator happened to place a buffer.
template <typename T>
struct AlignedAllocator {
    using value_type = T;
    static constexpr std::size_t alignment = 64;
    AlignedAllocator() = default;
    template <typename U>
    AlignedAllocator(const AlignedAllocator<U>&) {}
    T* allocate(std::size_t n) {
        return static_cast<T*>(::operator new(n * sizeof(T), std::align_val_t(alignment)));
    }
    void deallocate(T* p, std::size_t) { ::operator delete(p, std::align_val_t(alignment)); }
    template <typename U>
    bool operator==(const AlignedAllocator<U>&) const { return true; }
};

using AlignedDoubles = std::vector<double, AlignedAllocator<double>>;

// Dense row-major 64-bit array. Rank 0 (scalar), 1 and 2 are the shapes the
// network code actually uses; nothing here assumes more.
class Array {
public:
    Array() = default;
    explicit Array(std::vector<std::size_t> shape, double fill = 0.0);
    static Array scalar(double v);
    static Array from(std::vector<std::size_t> shape, std::vector<double> data);

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t numel() const { return data_.size(); }
    std::size_t dim(std::size_t i) const { return shape_[i]; }
    // Rows/cols of a rank-2 array; rank-1 counts as a single row.
    std::size_t rows() const { return rank() == 2 ? shape_[0] : 1; }
    std::size_t cols() const { return rank() == 2 ? shape_[1] : (rank() == 1 ? shape_[0] : 1); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }
    double& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
    double at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

    // Value of a one-element array; throws NotScalarError otherwise.
    double item() const;

    bool same_shape(const Array& o) const { return shape_ == o.shape_; }
    bool all_finite() const;

    bool requires_grad = false;

private:
    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

std::string shape_str(const std::vector<std::size_t>& shape);

// Throws ShapeMismatchError naming both shapes unless they are equal.
void check_same_shape(const Array& a, const Array& b, const char* op);

}  // namespace cpm::ad
