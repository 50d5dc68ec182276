#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "asga/data.hpp"

namespace asga {

// Target-domain shift applied after generation: rotate the first two feature
// coordinates, add a constant vector, flip a fraction of labels.
struct DomainTransform {
    double rotation_deg = 0.0;
    std::vector<double> shift;  // empty = no shift; otherwise one entry per feature
    double label_noise = 0.0;

    bool is_identity() const {
        if (rotation_deg != 0.0 || label_noise != 0.0) return false;
        for (double s : shift)
            if (s != 0.0) return false;
        return true;
    }
};

struct DatasetSpec {
    enum class Kind { Blobs, Moons, IdxFile };

    Kind kind = Kind::Blobs;
    int n_samples = 0;
    int n_features = 0;
    int n_classes = 0;
    std::uint64_t seed = 0;
    std::optional<DomainTransform> transform;
    // Required iff kind == IdxFile.
    std::string images_path;
    std::string labels_path;

    void validate() const;
};

// Deterministic synthesis: identical spec gives bit-identical tensors.
// Blob class centers depend only on (n_classes, n_features) and sit at
// pairwise distance 10 with unit cluster sigma.
Dataset gen_synthetic(const DatasetSpec& spec);

// Raw IDX payloads (big-endian dims, unsigned byte data).
Tensor load_idx_images(const std::filesystem::path& path);   // scaled to [0,1], one row per image
std::vector<int> load_idx_labels(const std::filesystem::path& path);

// Dispatches on spec.kind; idx data is loaded, validated against the spec's
// declared shape, and transformed like synthetic data.
Dataset load_dataset(const DatasetSpec& spec);

void apply_transform(Dataset& ds, const DomainTransform& t, std::uint64_t seed);

}  // namespace asga
