#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace wavebeat {

// Dense row-major tensor. Production code uses the float alias; the double
// instantiation backs the finite-difference gradient checks.
template <typename S>
class TensorT {
public:
    TensorT() = default;

    explicit TensorT(std::vector<std::size_t> shape)
        : shape_(std::move(shape)), data_(numel_of(shape_), S(0)) {}

    TensorT(std::vector<std::size_t> shape, std::vector<S> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        if (data_.size() != numel_of(shape_))
            throw std::invalid_argument("tensor data size does not match shape");
    }

    static TensorT zeros(std::vector<std::size_t> shape) { return TensorT(std::move(shape)); }

    static TensorT full(std::vector<std::size_t> shape, S value) {
        TensorT t(std::move(shape));
        for (auto& x : t.data_) x = value;
        return t;
    }

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t dim(std::size_t i) const { return shape_.at(i); }
    std::size_t numel() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    S* data() { return data_.data(); }
    const S* data() const { return data_.data(); }
    std::vector<S>& storage() { return data_; }
    const std::vector<S>& storage() const { return data_; }

    S& operator[](std::size_t i) { return data_[i]; }
    const S& operator[](std::size_t i) const { return data_[i]; }

    // Index into a rank-3 tensor laid out as [d0][d1][d2].
    S& at3(std::size_t i, std::size_t j, std::size_t k) {
        return data_[(i * shape_[1] + j) * shape_[2] + k];
    }
    const S& at3(std::size_t i, std::size_t j, std::size_t k) const {
        return data_[(i * shape_[1] + j) * shape_[2] + k];
    }

    bool same_shape(const TensorT& other) const { return shape_ == other.shape_; }

    bool all_finite() const {
        for (const S& x : data_)
            if (!std::isfinite(static_cast<double>(x))) return false;
        return true;
    }

    void fill(S value) {
        for (auto& x : data_) x = value;
    }

    template <typename U>
    TensorT<U> cast() const {
        std::vector<U> out(data_.size());
        for (std::size_t i = 0; i < data_.size(); ++i) out[i] = static_cast<U>(data_[i]);
        return TensorT<U>(shape_, std::move(out));
    }

    static std::size_t numel_of(const std::vector<std::size_t>& shape) {
        std::size_t n = 1;
        for (std::size_t d : shape) n *= d;
        return shape.empty() ? 0 : n;
    }

private:
    std::vector<std::size_t> shape_;
    std::vector<S> data_;
};

using Tensor = TensorT<float>;

template <typename S>
struct ParameterT {
    std::string name;
    TensorT<S> value;
    TensorT<S> grad;
    bool trainable{true};

    ParameterT() = default;
    ParameterT(std::string name_, TensorT<S> value_, bool trainable_ = true)
        : name(std::move(name_)),
          value(std::move(value_)),
          grad(value.shape()),
          trainable(trainable_) {}

    void zero_grad() { grad.fill(S(0)); }
};

using Parameter = ParameterT<float>;

inline std::string shape_string(const std::vector<std::size_t>& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ", ";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

} // namespace wavebeat
