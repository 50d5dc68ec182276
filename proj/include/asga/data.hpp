#pragma once

#include <vector>

#include "asga/tensor.hpp"

namespace asga {

// One mini-batch: features are rows of x, labels parallel to them.
struct Batch {
    Tensor x;
    std::vector<int> labels;

    int rows() const { return x.rows(); }
    void validate(int n_classes) const {
        require(x.rows() >= 1, "batch must be nonempty");
        require(static_cast<int>(labels.size()) == x.rows(),
                "batch has " + std::to_string(labels.size()) + " labels for " +
                    std::to_string(x.rows()) + " rows");
        for (std::size_t i = 0; i < labels.size(); ++i)
            require(labels[i] >= 0 && labels[i] < n_classes,
                    "label " + std::to_string(labels[i]) + " at row " + std::to_string(i) +
                        " outside [0," + std::to_string(n_classes) + ")");
    }
};

struct Dataset {
    Tensor x;  // n x features
    std::vector<int> labels;
    int n_classes = 0;

    int n() const { return x.rows(); }
    int features() const { return x.cols(); }

    void validate() const {
        Batch b{x, labels};
        b.validate(n_classes);
    }

    Batch slice(int start, int count) const {
        require(start >= 0 && count >= 1 && start + count <= n(), "slice out of range");
        Tensor bx(count, x.cols());
        std::vector<int> by(static_cast<std::size_t>(count));
        for (int r = 0; r < count; ++r) {
            for (int c = 0; c < x.cols(); ++c) bx(r, c) = x(start + r, c);
            by[static_cast<std::size_t>(r)] = labels[static_cast<std::size_t>(start + r)];
        }
        return {std::move(bx), std::move(by)};
    }

    Batch gather(std::span<const int> idx) const {
        require(!idx.empty(), "gather needs at least one row");
        Tensor bx(static_cast<int>(idx.size()), x.cols());
        std::vector<int> by(idx.size());
        for (std::size_t r = 0; r < idx.size(); ++r) {
            require(idx[r] >= 0 && idx[r] < n(), "gather index out of range");
            for (int c = 0; c < x.cols(); ++c) bx(static_cast<int>(r), c) = x(idx[r], c);
            by[r] = labels[static_cast<std::size_t>(idx[r])];
        }
        return {std::move(bx), std::move(by)};
    }

    Batch all() const { return {x, labels}; }

    // Head/tail split by fraction; rows keep their generation order.
    std::pair<Dataset, Dataset> split(double first_fraction) const {
        require(first_fraction > 0.0 && first_fraction < 1.0, "split fraction must be in (0,1)");
        int n_first = static_cast<int>(static_cast<double>(n()) * first_fraction);
        n_first = std::max(1, std::min(n() - 1, n_first));
        Batch a = slice(0, n_first);
        Batch b = slice(n_first, n() - n_first);
        return {Dataset{std::move(a.x), std::move(a.labels), n_classes},
                Dataset{std::move(b.x), std::move(b.labels), n_classes}};
    }
};

}  // namespace asga
