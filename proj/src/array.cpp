#include "cpm/array.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "cpm/errors.hpp"

namespace cpm::ad {

Array::Array(std::vector<std::size_t> shape, double fill) : shape_(std::move(shape)) {
    std::size_t n = 1;
    for (std::size_t d : shape_) n *= d;
    data_.assign(n, fill);
}

Array Array::scalar(double v) {
    Array a{std::vector<std::size_t>{}};
    a.data_.assign(1, v);
    return a;
}

Array Array::from(std::vector<std::size_t> shape, std::vector<double> data) {
    Array a;
    a.shape_ = std::move(shape);
    std::size_t n = 1;
    for (std::size_t d : a.shape_) n *= d;
    if (n != data.size())
        throw ShapeMismatchError("Array::from: shape " + shape_str(a.shape_) + " needs " +
                                 std::to_string(n) + " values, got " + std::to_string(data.size()));
    a.data_ = std::move(data);
    return a;
}

double Array::item() const {
    if (numel() != 1)
        throw NotScalarError("item: array of shape " + shape_str(shape_) + " is not scalar");
    return data_[0];
}

bool Array::all_finite() const {
    for (double v : data_)
        if (!std::isfinite(v)) return false;
    return true;
}

std::string shape_str(const std::vector<std::size_t>& shape) {
    std::ostringstream os;
    os << "(";
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
    os << ")";
    return os.str();
}

void check_same_shape(const Array& a, const Array& b, const char* op) {
    if (!a.same_shape(b))
        throw ShapeMismatchError(std::string(op) + ": shape " + shape_str(a.shape()) +
                                 " vs " + shape_str(b.shape()));
}

}  // namespace cpm::ad
