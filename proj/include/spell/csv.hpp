#pragma once

#include <Eigen/Core>
#include <string>
#include <string_view>
#include <vector>

#include "spell/sampler.hpp"

namespace spell::csv {

// Shortest decimal string that parses back to exactly the same double, so
// every CSV written here re-ingests losslessly.
std::string format_double(double value);
double parse_double(std::string_view text, const std::string& context);
long long parse_int(std::string_view text, const std::string& context);

std::vector<std::string> split(std::string_view line, char separator);

// Columns: traj, x_0, ..., x_{d-1}; one row per trajectory, ids ascending.
void write_samples(const std::string& path, const Eigen::MatrixXd& samples);
Eigen::MatrixXd read_samples(const std::string& path);

// Columns: step, t, traj, delta_norm, score_norm, active_count,
// degenerate_flag.
void write_trace(const std::string& path, const std::vector<TraceRecord>& records);
std::vector<TraceRecord> read_trace(const std::string& path);

struct ActiveShieldRow {
  int step;
  int traj;
  int shield_id;
};

// Sidecar naming the static shields behind each trace record's activity.
void write_active_shields(const std::string& path,
                          const std::vector<TraceRecord>& records);
std::vector<ActiveShieldRow> read_active_shields(const std::string& path);

}  // namespace spell::csv
