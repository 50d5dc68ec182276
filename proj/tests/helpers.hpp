#pragma once

#include <sys/wait.h>
#include <unistd.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "asga/model.hpp"
#include "asga/tape.hpp"

namespace testutil {

using namespace asga;

// Analytic gradient through the tape, flattened in parameter order.
inline std::vector<double> analytic_gradient(const LossFn& loss, ParamSet& params,
                                             const Batch& batch) {
    params.zero_grad();
    Tape t;
    t.backward(loss(t, batch));
    return params.grad_vector();
}

// Central finite differences, the independent oracle for every smooth op.
inline std::vector<double> fd_gradient(const LossFn& loss, ParamSet& params, const Batch& batch,
                                       double h = 1e-5) {
    std::vector<double> theta = params.value_vector();
    std::vector<double> g(theta.size());
    auto eval = [&]() {
        params.set_values(theta);
        Tape t;
        return t.scalar(loss(t, batch));
    };
    for (std::size_t i = 0; i < theta.size(); ++i) {
        const double orig = theta[i];
        theta[i] = orig + h;
        double up = eval();
        theta[i] = orig - h;
        double down = eval();
        theta[i] = orig;
        g[i] = (up - down) / (2.0 * h);
    }
    params.set_values(theta);
    return g;
}

inline double l2(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

// ||a - b|| / max(floor, ||b||); the vector-level relative error used by the
// gradient suites.
inline double rel_err(std::span<const double> a, std::span<const double> b,
                      double floor = 1e-10) {
    REQUIRE(a.size() == b.size());
    double diff = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) diff += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(diff) / std::max(floor, l2(b));
}

inline Batch random_batch(int rows, int features, int classes, std::mt19937_64& rng) {
    Tensor x = random_normal(rows, features, rng);
    std::vector<int> labels(static_cast<std::size_t>(rows));
    std::uniform_int_distribution<int> lab(0, classes - 1);
    for (int& l : labels) l = lab(rng);
    return {std::move(x), std::move(labels)};
}

// Scratch directory unique to this test binary invocation.
inline std::filesystem::path temp_dir(const std::string& tag) {
    auto dir = std::filesystem::temp_directory_path() /
               ("asga_test_" + tag + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Spawns the CLI binary; returns the process exit code (-1 on spawn failure).
inline int run_cli(const std::string& args) {
    std::string cmd = std::string(ASGA_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    int rc = std::system(cmd.c_str());
    if (rc == -1) return -1;
    return WEXITSTATUS(rc);
}

inline std::filesystem::path benchmark_config() {
    return std::filesystem::path(ASGA_CONFIG_DIR) / "benchmark.json";
}

}  // namespace testutil
