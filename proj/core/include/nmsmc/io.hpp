#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "nmsmc/analysis.hpp"
#include "nmsmc/fom.hpp"
#include "nmsmc/pmmh.hpp"

namespace nmsmc {

/// Round-trip formatting ("%.17g"; inf and nan spelled inf, -inf, nan).
std::string format_double(double x);

// Dataset: CSV `k,u,y` plus a JSON sidecar {ts, seed, theta_true, sigma_x, sigma_y}.
void write_dataset_csv(std::ostream& os, const Dataset& data);
std::string dataset_metadata_json(const Dataset& data);
/// Writes `csv_path` and the sidecar next to it (same stem, .json).
void save_dataset(const std::filesystem::path& csv_path, const Dataset& data);
/// Reads the CSV and, when present, the sidecar. Throws IoError.
Dataset load_dataset(const std::filesystem::path& csv_path);
Dataset parse_dataset_csv(std::istream& is);

// Chain: CSV `iter,<names...>,loglik,accepted`, one row per iteration.
void write_chain_csv(std::ostream& os, const Chain& chain, std::span<const std::string_view> names);
/// Parses a chain CSV; the parameter count is taken from the header.
Chain parse_chain_csv(std::istream& is, std::vector<std::string>* names = nullptr);
Chain load_chain(const std::filesystem::path& path, std::vector<std::string>* names = nullptr);
std::string tuning_meta_json(const Chain& chain);

std::string summary_json(const PosteriorSummary& summary, const std::string& scenario = {});

void write_kde_csv(std::ostream& os, std::span<const double> grid, std::span<const double> density);

/// CSV `f,re,im,mag,phase` on a log-spaced frequency grid (Hz); phase in degrees.
void write_impedance_csv(std::ostream& os, const BatteryTheta& theta, double fmin, double fmax,
                         std::size_t points);

/// Accepts {"R_inf": .., "R1": .., ...} or a 6-element array.
BatteryTheta parse_theta_json(const std::string& text);
BatteryTheta load_theta(const std::filesystem::path& path);
std::string theta_json(const BatteryTheta& theta);

std::string selection_report_json(const SelectionReport& report);

/// Whole-file read; throws IoError.
std::string read_text_file(const std::filesystem::path& path);
/// Creates parent directories; throws IoError.
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace nmsmc
