#include "asga/dataset.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>

namespace asga {

void DatasetSpec::validate() const {
    if (kind == Kind::IdxFile) {
        require(!images_path.empty() && !labels_path.empty(),
                "idx-file dataset needs images_path and labels_path");
    } else {
        require(images_path.empty() && labels_path.empty(),
                "file paths are only valid for idx-file datasets");
        require(n_samples >= 1, "n_samples must be positive");
    }
    require(n_features >= 1, "n_features must be positive");
    require(n_classes >= 2, "n_classes must be at least 2");
    if (kind == Kind::Blobs)
        require(n_classes <= n_features,
                "blobs need n_classes <= n_features for orthogonal centers");
    if (kind == Kind::Moons) {
        require(n_classes == 2, "moons is a two-class dataset");
        require(n_features >= 2, "moons needs at least two features");
    }
    if (transform) {
        require(transform->label_noise >= 0.0 && transform->label_noise < 1.0,
                "label_noise must lie in [0,1)");
        if (!transform->shift.empty())
            require(static_cast<int>(transform->shift.size()) == n_features,
                    "shift has " + std::to_string(transform->shift.size()) + " entries for " +
                        std::to_string(n_features) + " features");
        if (transform->rotation_deg != 0.0)
            require(n_features >= 2, "rotation needs at least two features");
    }
}

namespace {

// Orthonormal directions from a fixed internal seed, so proxy and target draw
// the same centers for the same (n_classes, n_features).
std::vector<std::vector<double>> blob_centers(int n_classes, int n_features) {
    std::mt19937_64 rng(0x9e3779b97f4a7c15ULL ^ (static_cast<std::uint64_t>(n_classes) << 32) ^
                        static_cast<std::uint64_t>(n_features));
    std::normal_distribution<double> dist(0.0, 1.0);
    std::vector<std::vector<double>> centers;
    const double scale = 5.0 * std::numbers::sqrt2;  // pairwise distance 10 with unit sigma
    while (static_cast<int>(centers.size()) < n_classes) {
        std::vector<double> v(static_cast<std::size_t>(n_features));
        for (double& x : v) x = dist(rng);
        for (const auto& c : centers) {
            double proj = 0.0;
            for (std::size_t i = 0; i < v.size(); ++i) proj += v[i] * c[i];
            proj /= scale * scale;
            for (std::size_t i = 0; i < v.size(); ++i) v[i] -= proj * c[i];
        }
        double n = 0.0;
        for (double x : v) n += x * x;
        n = std::sqrt(n);
        if (n < 1e-6) continue;  // degenerate draw, resample
        for (double& x : v) x = x / n * scale;
        centers.push_back(std::move(v));
    }
    return centers;
}

Dataset gen_blobs(const DatasetSpec& spec) {
    auto centers = blob_centers(spec.n_classes, spec.n_features);
    Dataset ds;
    ds.x = Tensor(spec.n_samples, spec.n_features);
    ds.labels.resize(static_cast<std::size_t>(spec.n_samples));
    ds.n_classes = spec.n_classes;
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> noise(0.0, 1.0);
    for (int i = 0; i < spec.n_samples; ++i) {
        int cls = i % spec.n_classes;
        ds.labels[static_cast<std::size_t>(i)] = cls;
        const auto& c = centers[static_cast<std::size_t>(cls)];
        for (int f = 0; f < spec.n_features; ++f) ds.x(i, f) = c[static_cast<std::size_t>(f)] + noise(rng);
    }
    return ds;
}

Dataset gen_moons(const DatasetSpec& spec) {
    Dataset ds;
    ds.x = Tensor(spec.n_samples, spec.n_features);
    ds.labels.resize(static_cast<std::size_t>(spec.n_samples));
    ds.n_classes = 2;
    std::mt19937_64 rng(spec.seed);
    std::uniform_real_distribution<double> arc(0.0, std::numbers::pi);
    std::normal_distribution<double> noise(0.0, 0.1);
    for (int i = 0; i < spec.n_samples; ++i) {
        int cls = i % 2;
        ds.labels[static_cast<std::size_t>(i)] = cls;
        double t = arc(rng);
        double x0, x1;
        if (cls == 0) {
            x0 = std::cos(t);
            x1 = std::sin(t);
        } else {
            x0 = 1.0 - std::cos(t);
            x1 = 0.5 - std::sin(t);
        }
        ds.x(i, 0) = x0 + noise(rng);
        ds.x(i, 1) = x1 + noise(rng);
        for (int f = 2; f < spec.n_features; ++f) ds.x(i, f) = noise(rng);
    }
    return ds;
}

}  // namespace

void apply_transform(Dataset& ds, const DomainTransform& t, std::uint64_t seed) {
    if (t.rotation_deg != 0.0) {
        require(ds.features() >= 2, "rotation needs at least two features");
        double rad = t.rotation_deg * std::numbers::pi / 180.0;
        double c = std::cos(rad), s = std::sin(rad);
        for (int i = 0; i < ds.n(); ++i) {
            double a = ds.x(i, 0), b = ds.x(i, 1);
            ds.x(i, 0) = c * a - s * b;
            ds.x(i, 1) = s * a + c * b;
        }
    }
    if (!t.shift.empty()) {
        require(static_cast<int>(t.shift.size()) == ds.features(), "shift length mismatch");
        for (int i = 0; i < ds.n(); ++i)
            for (int f = 0; f < ds.features(); ++f) ds.x(i, f) += t.shift[static_cast<std::size_t>(f)];
    }
    if (t.label_noise > 0.0) {
        std::mt19937_64 rng(seed ^ 0xf1ea5eedULL);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        std::uniform_int_distribution<int> other(0, ds.n_classes - 2);
        for (auto& y : ds.labels)
            if (u(rng) < t.label_noise) {
                int k = other(rng);
                y = k >= y ? k + 1 : k;  // uniform over the other classes
            }
    }
}

Dataset gen_synthetic(const DatasetSpec& spec) {
    spec.validate();
    require(spec.kind != DatasetSpec::Kind::IdxFile, "gen_synthetic handles synthetic kinds only");
    Dataset ds = spec.kind == DatasetSpec::Kind::Blobs ? gen_blobs(spec) : gen_moons(spec);
    if (spec.transform) apply_transform(ds, *spec.transform, spec.seed);
    ds.validate();
    return ds;
}

namespace {

constexpr std::uint32_t kImagesMagic = 0x00000803;
constexpr std::uint32_t kLabelsMagic = 0x00000801;

std::uint32_t read_be32(std::ifstream& in, const std::filesystem::path& path, std::size_t offset) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (in.gcount() != 4)
        throw FormatError("idx file " + path.string() + " truncated at offset " +
                          std::to_string(offset));
    return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) | (std::uint32_t(b[2]) << 8) |
           std::uint32_t(b[3]);
}

std::vector<unsigned char> read_payload(std::ifstream& in, const std::filesystem::path& path,
                                        std::size_t offset, std::size_t count) {
    std::vector<unsigned char> data(count);
    in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(count));
    if (static_cast<std::size_t>(in.gcount()) != count)
        throw FormatError("idx file " + path.string() + " truncated at offset " +
                          std::to_string(offset + static_cast<std::size_t>(std::max<std::streamsize>(in.gcount(), 0))));
    return data;
}

std::ifstream open_idx(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open idx file " + path.string());
    return in;
}

}  // namespace

Tensor load_idx_images(const std::filesystem::path& path) {
    std::ifstream in = open_idx(path);
    std::uint32_t magic = read_be32(in, path, 0);
    if (magic != kImagesMagic)
        throw FormatError("idx file " + path.string() + ": bad image magic 0x" +
                          [&] { char b[16]; std::snprintf(b, sizeof b, "%08x", magic); return std::string(b); }() +
                          " at offset 0");
    std::uint32_t n = read_be32(in, path, 4);
    std::uint32_t rows = read_be32(in, path, 8);
    std::uint32_t cols = read_be32(in, path, 12);
    require(n >= 1 && rows >= 1 && cols >= 1, "idx image dims must be positive");
    std::size_t count = std::size_t(n) * rows * cols;
    auto data = read_payload(in, path, 16, count);
    Tensor out(static_cast<int>(n), static_cast<int>(rows * cols));
    auto v = out.values();
    for (std::size_t i = 0; i < count; ++i) v[i] = data[i] / 255.0;
    return out;
}

std::vector<int> load_idx_labels(const std::filesystem::path& path) {
    std::ifstream in = open_idx(path);
    std::uint32_t magic = read_be32(in, path, 0);
    if (magic != kLabelsMagic)
        throw FormatError("idx file " + path.string() + ": bad label magic 0x" +
                          [&] { char b[16]; std::snprintf(b, sizeof b, "%08x", magic); return std::string(b); }() +
                          " at offset 0");
    std::uint32_t n = read_be32(in, path, 4);
    require(n >= 1, "idx label count must be positive");
    auto data = read_payload(in, path, 8, n);
    return std::vector<int>(data.begin(), data.end());
}

Dataset load_dataset(const DatasetSpec& spec) {
    spec.validate();
    if (spec.kind != DatasetSpec::Kind::IdxFile) return gen_synthetic(spec);

    Dataset ds;
    ds.x = load_idx_images(spec.images_path);
    ds.labels = load_idx_labels(spec.labels_path);
    ds.n_classes = spec.n_classes;
    require(ds.x.rows() == static_cast<int>(ds.labels.size()),
            "idx image/label count mismatch: " + std::to_string(ds.x.rows()) + " vs " +
                std::to_string(ds.labels.size()));
    require(ds.x.cols() == spec.n_features,
            "idx features " + std::to_string(ds.x.cols()) + " do not match spec n_features " +
                std::to_string(spec.n_features));
    if (spec.n_samples > 0) {
        require(spec.n_samples <= ds.x.rows(), "spec asks for more samples than the idx file has");
        Batch head = ds.slice(0, spec.n_samples);
        ds.x = std::move(head.x);
        ds.labels = std::move(head.labels);
    }
    if (spec.transform) apply_transform(ds, *spec.transform, spec.seed);
    ds.validate();  // rejects labels outside [0, n_classes)
    return ds;
}

}  // namespace asga
