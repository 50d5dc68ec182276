#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "asga/common.hpp"
#include "asga/optimizer.hpp"
#include "asga/sharpness.hpp"

namespace asga {

// One evaluation row of an experiment phase.
struct MetricsRow {
    std::string phase;  // "search" or "finetune"
    int epoch = 0;
    std::string dataset;  // "proxy" or "target"
    double accuracy = 0.0;
    double loss = 0.0;
    double gap = 0.0;
    double sigma_gap = 0.0;
    double rho = 0.0;  // probe radius the gap/sigma were measured at
    double total_bops = 0.0;
};

// Minimal CSV emitter with RFC-4180 quoting; numbers use the shortest
// round-trip decimal form so identical runs produce identical bytes.
class CsvWriter {
public:
    explicit CsvWriter(const std::filesystem::path& path) : out_(path, std::ios::binary) {
        require(out_.good(), "cannot open csv file for writing: " + path.string());
    }

    void row(const std::vector<std::string>& fields) {
        for (std::size_t i = 0; i < fields.size(); ++i) {
            if (i) out_ << ',';
            out_ << quoted(fields[i]);
        }
        out_ << '\n';
    }

    static std::string quoted(const std::string& field) {
        if (field.find_first_of(",\"\n\r") == std::string::npos) return field;
        std::string q = "\"";
        for (char c : field) {
            if (c == '"') q += '"';
            q += c;
        }
        q += '"';
        return q;
    }

private:
    std::ofstream out_;
};

void write_metrics_csv(const std::filesystem::path& path, const std::vector<MetricsRow>& rows);
void write_steps_csv(const std::filesystem::path& path, const std::vector<StepReport>& rows);
void write_probe_csv(const std::filesystem::path& path, const std::vector<ProbeRow>& rows);
// Rows of (phi, rho_max, h, rho) for every combination in the three grids.
void write_rho_curve_csv(const std::filesystem::path& path, std::span<const double> phis,
                         std::span<const double> rho_maxes, std::span<const double> h_grid);

}  // namespace asga
