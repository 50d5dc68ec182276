#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "asga/common.hpp"

namespace asga {

// Dense row-major tensor of rank <= 2 (vectors are 1 x n), doubles throughout.
// Carries its own gradient buffer so a parameter can accumulate across passes.
class Tensor {
public:
    Tensor() = default;
    Tensor(int rows, int cols) : rows_(rows), cols_(cols) {
        require(rows >= 1 && cols >= 1, "tensor dims must be positive, got " +
                                            std::to_string(rows) + "x" + std::to_string(cols));
        values_.assign(static_cast<std::size_t>(rows) * cols, 0.0);
        grad_.assign(values_.size(), 0.0);
    }
    Tensor(int rows, int cols, std::vector<double> values) : Tensor(rows, cols) {
        require(values.size() == values_.size(), "value count does not match shape");
        values_ = std::move(values);
    }

    static Tensor scalar(double v) { return Tensor(1, 1, {v}); }
    static Tensor row(std::vector<double> v) {
        int n = static_cast<int>(v.size());
        return Tensor(1, n, std::move(v));
    }
    static Tensor zeros_like(const Tensor& t) { return Tensor(t.rows_, t.cols_); }

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    std::size_t size() const { return values_.size(); }
    std::string shape_str() const { return std::to_string(rows_) + "x" + std::to_string(cols_); }

    double& operator()(int r, int c) { return values_[static_cast<std::size_t>(r) * cols_ + c]; }
    double operator()(int r, int c) const { return values_[static_cast<std::size_t>(r) * cols_ + c]; }

    std::span<double> values() { return values_; }
    std::span<const double> values() const { return values_; }
    std::span<double> grad() { return grad_; }
    std::span<const double> grad() const { return grad_; }

    double item() const {
        require(size() == 1, "item() requires a 1x1 tensor, got " + shape_str());
        return values_[0];
    }

    void zero_grad() { std::fill(grad_.begin(), grad_.end(), 0.0); }
    void fill(double v) { std::fill(values_.begin(), values_.end(), v); }

    bool values_finite() const {
        for (double v : values_)
            if (!std::isfinite(v)) return false;
        return true;
    }

private:
    int rows_ = 0, cols_ = 0;
    std::vector<double> values_, grad_;
};

// Named parameter collection with insertion-order iteration, so flattened
// gradient/value vectors are reproducible across runs.
class ParamSet {
public:
    int add(std::string name, Tensor init) {
        require(!index_.contains(name), "duplicate parameter name: " + name);
        int id = static_cast<int>(entries_.size());
        index_.emplace(name, id);
        entries_.push_back({std::move(name), std::move(init)});
        return id;
    }

    int size() const { return static_cast<int>(entries_.size()); }
    const std::string& name(int id) const { return entries_.at(id).name; }
    Tensor& operator[](int id) { return entries_.at(id).tensor; }
    const Tensor& operator[](int id) const { return entries_.at(id).tensor; }

    Tensor& at(std::string_view name) { return entries_[index_of(name)].tensor; }
    const Tensor& at(std::string_view name) const { return entries_[index_of(name)].tensor; }
    int index_of(std::string_view name) const {
        auto it = index_.find(std::string(name));
        require(it != index_.end(), "unknown parameter: " + std::string(name));
        return it->second;
    }

    std::size_t scalar_count() const {
        std::size_t n = 0;
        for (const auto& e : entries_) n += e.tensor.size();
        return n;
    }

    void zero_grad() {
        for (auto& e : entries_) e.tensor.zero_grad();
    }

    std::vector<double> value_vector() const { return flatten(false); }
    std::vector<double> grad_vector() const { return flatten(true); }

    void set_values(std::span<const double> flat) {
        require(flat.size() == scalar_count(), "flat value size mismatch");
        std::size_t k = 0;
        for (auto& e : entries_)
            for (double& v : e.tensor.values()) v = flat[k++];
    }

    // theta += coeff * dir, flattened in insertion order.
    void add_scaled(std::span<const double> dir, double coeff) {
        require(dir.size() == scalar_count(), "direction size mismatch");
        std::size_t k = 0;
        for (auto& e : entries_)
            for (double& v : e.tensor.values()) v += coeff * dir[k++];
    }

    std::uint64_t value_hash() const {
        std::uint64_t h = 0xcbf29ce484222325ULL;
        for (const auto& e : entries_) {
            auto vals = e.tensor.values();
            h = fnv1a(vals.data(), vals.size() * sizeof(double), h);
        }
        return h;
    }

private:
    struct Entry {
        std::string name;
        Tensor tensor;
    };

    std::vector<double> flatten(bool grads) const {
        std::vector<double> out;
        out.reserve(scalar_count());
        for (const auto& e : entries_) {
            auto src = grads ? e.tensor.grad() : e.tensor.values();
            out.insert(out.end(), src.begin(), src.end());
        }
        return out;
    }

    std::vector<Entry> entries_;
    std::unordered_map<std::string, int> index_;
};

inline std::vector<double> grad_vector(const ParamSet& ps) { return ps.grad_vector(); }

inline double grad_norm(const ParamSet& ps) {
    double s = 0.0;
    for (double g : ps.grad_vector()) s += g * g;
    return std::sqrt(s);
}

inline double l2_norm(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

inline double dot(std::span<const double> a, std::span<const double> b) {
    require(a.size() == b.size(), "dot: size mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline Tensor random_normal(int rows, int cols, std::mt19937_64& rng, double stddev = 1.0) {
    Tensor t(rows, cols);
    std::normal_distribution<double> dist(0.0, stddev);
    for (double& v : t.values()) v = dist(rng);
    return t;
}

}  // namespace asga
