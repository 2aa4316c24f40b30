#include "spell/csv.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "spell/errors.hpp"

namespace spell::csv {
namespace {

std::ifstream open_for_read(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  return in;
}

std::ofstream open_for_write(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  return out;
}

void check_stream(const std::ofstream& out, const std::string& path) {
  if (!out) throw IoError("write failed for " + path);
}

}  // namespace

std::string format_double(double value) {
  char buffer[64];
  const auto result = std::to_chars(buffer, buffer + sizeof(buffer), value);
  return std::string(buffer, result.ptr);
}

double parse_double(std::string_view text, const std::string& context) {
  double value = 0.0;
  const auto result = std::from_chars(text.data(), text.data() + text.size(), value);
  if (result.ec != std::errc{} || result.ptr != text.data() + text.size())
    throw IoError(context + ": bad number '" + std::string(text) + "'");
  return value;
}

long long parse_int(std::string_view text, const std::string& context) {
  long long value = 0;
  const auto result = std::from_chars(text.data(), text.data() + text.size(), value);
  if (result.ec != std::errc{} || result.ptr != text.data() + text.size())
    throw IoError(context + ": bad integer '" + std::string(text) + "'");
  return value;
}

std::vector<std::string> split(std::string_view line, char separator) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(separator, start);
    if (pos == std::string_view::npos) {
      fields.emplace_back(line.substr(start));
      return fields;
    }
    fields.emplace_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

void write_samples(const std::string& path, const Eigen::MatrixXd& samples) {
  auto out = open_for_write(path);
  out << "traj";
  for (int c = 0; c < samples.cols(); ++c) out << ",x_" << c;
  out << "\n";
  for (int r = 0; r < samples.rows(); ++r) {
    out << r;
    for (int c = 0; c < samples.cols(); ++c) {
      out << ',' << format_double(samples(r, c));
    }
    out << "\n";
  }
  check_stream(out, path);
}

Eigen::MatrixXd read_samples(const std::string& path) {
  auto in = open_for_read(path);
  std::string line;
  if (!std::getline(in, line)) throw IoError(path + ": missing header");
  const auto header = split(line, ',');
  if (header.size() < 2 || header[0] != "traj")
    throw IoError(path + ": unexpected sample header");
  const auto dim = static_cast<int>(header.size()) - 1;

  std::vector<double> values;
  int rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto fields = split(line, ',');
    if (static_cast<int>(fields.size()) != dim + 1)
      throw IoError(path + ": wrong column count in row " + std::to_string(rows));
    if (parse_int(fields[0], path) != rows)
      throw IoError(path + ": trajectory ids must ascend from 0");
    for (int c = 0; c < dim; ++c) values.push_back(parse_double(fields[c + 1], path));
    ++rows;
  }
  Eigen::MatrixXd samples(rows, dim);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < dim; ++c) samples(r, c) = values[r * dim + c];
  }
  return samples;
}

void write_trace(const std::string& path, const std::vector<TraceRecord>& records) {
  auto out = open_for_write(path);
  out << "step,t,traj,delta_norm,score_norm,active_count,degenerate_flag\n";
  for (const auto& rec : records) {
    out << rec.step << ',' << format_double(rec.t) << ',' << rec.traj << ','
        << format_double(rec.delta_norm) << ',' << format_double(rec.score_norm)
        << ',' << rec.active_count << ',' << (rec.degenerate ? 1 : 0) << "\n";
  }
  check_stream(out, path);
}

std::vector<TraceRecord> read_trace(const std::string& path) {
  auto in = open_for_read(path);
  std::string line;
  if (!std::getline(in, line)) throw IoError(path + ": missing header");
  if (line != "step,t,traj,delta_norm,score_norm,active_count,degenerate_flag")
    throw IoError(path + ": unexpected trace header");
  std::vector<TraceRecord> records;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto fields = split(line, ',');
    if (fields.size() != 7)
      throw IoError(path + ": wrong column count in trace row");
    TraceRecord rec;
    rec.step = static_cast<int>(parse_int(fields[0], path));
    rec.t = parse_double(fields[1], path);
    rec.traj = static_cast<int>(parse_int(fields[2], path));
    rec.delta_norm = parse_double(fields[3], path);
    rec.score_norm = parse_double(fields[4], path);
    rec.active_count = static_cast<int>(parse_int(fields[5], path));
    rec.degenerate = parse_int(fields[6], path) != 0;
    records.push_back(std::move(rec));
  }
  return records;
}

void write_active_shields(const std::string& path,
                          const std::vector<TraceRecord>& records) {
  auto out = open_for_write(path);
  out << "step,traj,shield_id\n";
  for (const auto& rec : records) {
    for (const int id : rec.shield_ids) {
      out << rec.step << ',' << rec.traj << ',' << id << "\n";
    }
  }
  check_stream(out, path);
}

std::vector<ActiveShieldRow> read_active_shields(const std::string& path) {
  auto in = open_for_read(path);
  std::string line;
  if (!std::getline(in, line)) throw IoError(path + ": missing header");
  if (line != "step,traj,shield_id")
    throw IoError(path + ": unexpected active-shield header");
  std::vector<ActiveShieldRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto fields = split(line, ',');
    if (fields.size() != 3)
      throw IoError(path + ": wrong column count in active-shield row");
    rows.push_back({static_cast<int>(parse_int(fields[0], path)),
                    static_cast<int>(parse_int(fields[1], path)),
                    static_cast<int>(parse_int(fields[2], path))});
  }
  return rows;
}

}  // namespace spell::csv
