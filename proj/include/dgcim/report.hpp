#ifndef DGCIM_REPORT_HPP
#define DGCIM_REPORT_HPP

#include <optional>
#include <string>

#include "dgcim/config.hpp"
#include "dgcim/cost.hpp"

namespace dgcim {

// Stable serialization of cost reports: JSON for structure, flat CSV with one
// row per stage for plotting. Neither carries timestamps, so identical
// (config, seed) pairs produce identical bytes.

struct ErrorReport {
    double max_abs_error = 0.0;
    double max_rel_error = 0.0;   // relative to the reference infinity norm
    double ref_inf_norm = 0.0;
};

std::string report_json(const CostReport& rep, const ExperimentConfig& cfg,
                        const std::optional<ErrorReport>& err);
std::string report_csv(const CostReport& rep);
std::string manifest_json(const RunManifest& m);

// One CSV row per sweep point, plus the header.
std::string sweep_csv_header();
struct SweepRow {
    int seq = 0;
    int subarray = 0;
    int bits_per_cell = 0;
    int adc_bits = 0;
    CostReport bilinear;
    CostReport trilinear;
};
std::string sweep_csv_row(const SweepRow& row);

}  // namespace dgcim

#endif
