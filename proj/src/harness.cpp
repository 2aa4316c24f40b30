#include "spell/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <memory>
#include <fstream>
#include <limits>
#include <map>
#include <json.hpp>
#include <set>
#include <sstream>

#include "spell/csv.hpp"
#include "spell/errors.hpp"
#include "spell/shield_index.hpp"

namespace spell {
namespace {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << text;
  if (!out) throw IoError("short write to '" + path + "'");
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

ordered_json read_json_file(const std::string& path) {
  try {
    return ordered_json::parse(read_text_file(path));
  } catch (const nlohmann::json::exception& error) {
    throw IoError("cannot parse '" + path + "': " + error.what());
  }
}

Eigen::MatrixXd rows_to_matrix(const std::vector<Eigen::VectorXd>& rows, int dim) {
  Eigen::MatrixXd matrix(static_cast<Eigen::Index>(rows.size()), dim);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    matrix.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
  }
  return matrix;
}

// The static shield material a run starts from: an optional loaded or built
// index plus the plain centers scanned exhaustively. Accumulated batches are
// appended to `extra` later.
struct ShieldMaterial {
  std::unique_ptr<IvfIndex> index;
  Eigen::MatrixXd extra;
};

ShieldMaterial assemble_shields(const ExperimentConfig& config) {
  using Kind = ShieldSourceConfig::Kind;
  ShieldMaterial material;
  material.extra.resize(0, config.dim);

  Eigen::MatrixXd centers(0, config.dim);
  switch (config.shields.kind) {
    case Kind::kNone:
      return material;
    case Kind::kInline:
      centers = rows_to_matrix(config.shields.inline_centers, config.dim);
      break;
    case Kind::kSamplesFile:
      centers = csv::read_samples(config.shields.samples_file);
      break;
    case Kind::kIndexFile: {
      material.index = std::make_unique<IvfIndex>(IvfIndex::load(config.shields.index_file));
      if (material.index->dim() != config.dim) {
        throw ConfigError("shield index dimension does not match the mixture");
      }
      return material;
    }
  }
  if (centers.cols() != config.dim) {
    throw ConfigError("shield centers dimension does not match the mixture");
  }
  if (config.shields.use_index && centers.rows() > 0) {
    const int n_cells = config.shields.n_cells > 0
                            ? config.shields.n_cells
                            : IvfIndex::default_cell_count(static_cast<int>(centers.rows()));
    material.index = std::make_unique<IvfIndex>(
        IvfIndex::build(centers, n_cells, config.shields.index_seed));
  } else {
    material.extra = centers;
  }
  return material;
}

RunConfig to_run_config(const ExperimentConfig& config) {
  RunConfig run;
  run.schedule = config.schedule;
  run.grid = TimeGrid::uniform(config.n_steps);
  run.spell = config.spell;
  run.label = config.label;
  run.gamma = config.gamma;
  run.pg_bandwidth = config.pg_bandwidth;
  run.batch = config.batch;
  run.seed = config.seed;
  run.record_trace = config.trace;
  run.store_xhat = config.store_xhat;
  return run;
}

void append_rows(Eigen::MatrixXd& target, const Eigen::MatrixXd& rows) {
  const Eigen::Index old_rows = target.rows();
  target.conservativeResize(old_rows + rows.rows(), rows.cols());
  target.bottomRows(rows.rows()) = rows;
}

ordered_json metadata_json(const ExperimentConfig& config, const RunArtifacts& artifacts) {
  ordered_json meta;
  meta["schema"] = "run-metadata-v1";
  meta["seed"] = config.seed;
  meta["config_hash"] = hash_hex(fnv1a(canonical_config_text(config)));
  meta["compat_hash"] = compatibility_hash(config);
  meta["n_steps"] = config.n_steps;
  meta["dim"] = config.dim;
  meta["batch"] = config.batch;
  meta["n_batches"] = config.n_batches;
  meta["samples"] = artifacts.samples.rows();
  if (config.label) meta["label"] = *config.label;
  else meta["label"] = nullptr;
  meta["gamma"] = config.gamma;
  meta["violations"] = artifacts.violation_count;
  meta["violation_rate"] = artifacts.violation_rate;
  if (std::isfinite(artifacts.min_shield_distance)) {
    meta["min_shield_distance"] = artifacts.min_shield_distance;
  } else {
    meta["min_shield_distance"] = nullptr;
  }
  meta["wall_ms"] = artifacts.wall_ms;
  return meta;
}

ordered_json metrics_json(const ExperimentConfig& config, const MetricsReport& report) {
  ordered_json doc;
  doc["vendi"] = report.vendi;
  doc["precision"] = report.precision;
  doc["recall"] = report.recall;
  doc["density"] = report.density;
  doc["coverage"] = report.coverage;
  doc["frechet_raw"] = report.frechet_raw;
  doc["k_neighbors"] = report.k_neighbors;
  doc["reference_samples"] = config.metrics.reference_samples;
  doc["reference_seed"] = config.metrics.reference_seed;
  if (config.metrics.vendi_bandwidth) doc["vendi_bandwidth"] = *config.metrics.vendi_bandwidth;
  else doc["vendi_bandwidth"] = nullptr;
  return doc;
}

void write_artifacts(const ExperimentConfig& config, const RunArtifacts& artifacts,
                     const std::string& out_dir) {
  fs::create_directories(out_dir);
  const fs::path dir(out_dir);
  csv::write_samples((dir / "samples.csv").string(), artifacts.samples);
  if (config.trace) {
    csv::write_trace((dir / "trace.csv").string(), artifacts.trace_records);
    csv::write_active_shields((dir / "active_shields.csv").string(), artifacts.trace_records);
  }
  write_text_file((dir / "config.txt").string(), canonical_config_text(config));
  write_text_file((dir / "metadata.json").string(),
                  metadata_json(config, artifacts).dump(2) + "\n");
  if (artifacts.has_metrics) {
    write_text_file((dir / "metrics.json").string(),
                    metrics_json(config, artifacts.metrics).dump(2) + "\n");
  }
}

std::string point_dir_name(int point) {
  char name[32];
  std::snprintf(name, sizeof(name), "point_%03d", point);
  return name;
}

// Joined with ';' so the table stays one row per trajectory.
std::string join_ids(const std::vector<int>& ids) {
  std::string text;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i > 0) text += ';';
    text += std::to_string(ids[i]);
  }
  return text;
}

}  // namespace

RunArtifacts run_experiment(const ExperimentConfig& config, const std::string& out_dir) {
  config.validate();
  const GaussianMixture mixture = config.mixture();
  auto material = assemble_shields(config);

  RunArtifacts artifacts;
  artifacts.n_steps = config.n_steps;
  artifacts.samples.resize(0, config.dim);
  artifacts.min_shield_distance = std::numeric_limits<double>::infinity();

  RunConfig run = to_run_config(config);
  run.validate(mixture);

  const auto started = std::chrono::steady_clock::now();
  for (int batch_index = 0; batch_index < config.n_batches; ++batch_index) {
    run.trajectory_offset = static_cast<std::uint32_t>(batch_index) *
                            static_cast<std::uint32_t>(config.batch);
    ShieldSources sources;
    sources.index = material.index.get();
    sources.n_probe = config.shields.n_probe;
    sources.extra_centers = material.extra;

    RunResult result = generate(mixture, run, sources);
    append_rows(artifacts.samples, result.samples);
    artifacts.violation_count += result.violation_count;
    artifacts.min_shield_distance =
        std::min(artifacts.min_shield_distance, result.min_shield_distance);
    if (config.trace) {
      artifacts.trace_records.insert(artifacts.trace_records.end(),
                                     result.trace.records.begin(),
                                     result.trace.records.end());
    }
    if (config.shields.accumulate) append_rows(material.extra, result.samples);
  }
  const auto finished = std::chrono::steady_clock::now();
  artifacts.wall_ms =
      std::chrono::duration<double, std::milli>(finished - started).count();
  artifacts.violation_rate =
      static_cast<double>(artifacts.violation_count) /
      static_cast<double>(artifacts.samples.rows());

  if (config.metrics.enabled) {
    rng::Sequence reference_stream(config.metrics.reference_seed, rng::Domain::kReference);
    const Eigen::MatrixXd reference =
        mixture.sample(reference_stream, config.metrics.reference_samples, config.label);
    artifacts.metrics =
        compute_metrics(artifacts.samples, reference, config.metrics.k_neighbors,
                        config.metrics.vendi_bandwidth);
    artifacts.has_metrics = true;
  }

  if (!out_dir.empty()) write_artifacts(config, artifacts, out_dir);
  return artifacts;
}

std::vector<SweepRow> run_sweep(const ExperimentConfig& config, const std::string& out_dir) {
  config.validate();
  if (!config.sweep.any()) {
    throw ConfigError("sweep mode needs at least one non-empty sweep axis");
  }
  const auto radii =
      config.sweep.radius.empty() ? std::vector<double>{config.spell.radius} : config.sweep.radius;
  const auto lambdas = config.sweep.lambda.empty()
                           ? std::vector<double>{config.spell.overcompensation}
                           : config.sweep.lambda;
  const auto gammas =
      config.sweep.gamma.empty() ? std::vector<double>{config.gamma} : config.sweep.gamma;
  const auto probes = config.sweep.n_probe.empty() ? std::vector<int>{config.shields.n_probe}
                                                   : config.sweep.n_probe;

  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    write_text_file((fs::path(out_dir) / "config.txt").string(),
                    canonical_config_text(config));
  }

  std::vector<SweepRow> rows;
  int point = 0;
  for (double radius : radii) {
    for (double lambda : lambdas) {
      for (double gamma : gammas) {
        for (int n_probe : probes) {
          ExperimentConfig variant = config;
          variant.sweep = {};
          variant.spell.radius = radius;
          variant.spell.overcompensation = lambda;
          variant.gamma = gamma;
          variant.shields.n_probe = n_probe;

          SweepRow row;
          row.point = point;
          row.radius = radius;
          row.lambda = lambda;
          row.gamma = gamma;
          row.n_probe = n_probe;
          const std::string point_dir =
              out_dir.empty() ? std::string()
                              : (fs::path(out_dir) / point_dir_name(point)).string();
          row.artifacts = run_experiment(variant, point_dir);
          rows.push_back(std::move(row));
          ++point;
        }
      }
    }
  }

  if (!out_dir.empty()) {
    std::ostringstream table;
    table << "point,radius,lambda,gamma,n_probe,vendi,precision,recall,density,"
             "coverage,frechet_raw,violation_rate,wall_ms_per_sample\n";
    for (const auto& row : rows) {
      const auto& m = row.artifacts.metrics;
      const double nan = std::numeric_limits<double>::quiet_NaN();
      table << row.point << ',' << csv::format_double(row.radius) << ','
            << csv::format_double(row.lambda) << ',' << csv::format_double(row.gamma) << ','
            << row.n_probe << ','
            << csv::format_double(row.artifacts.has_metrics ? m.vendi : nan) << ','
            << csv::format_double(row.artifacts.has_metrics ? m.precision : nan) << ','
            << csv::format_double(row.artifacts.has_metrics ? m.recall : nan) << ','
            << csv::format_double(row.artifacts.has_metrics ? m.density : nan) << ','
            << csv::format_double(row.artifacts.has_metrics ? m.coverage : nan) << ','
            << csv::format_double(row.artifacts.has_metrics ? m.frechet_raw : nan) << ','
            << csv::format_double(row.artifacts.violation_rate) << ','
            << csv::format_double(row.artifacts.wall_ms /
                                  static_cast<double>(row.artifacts.samples.rows()))
            << '\n';
    }
    write_text_file((fs::path(out_dir) / "sweep.csv").string(), table.str());
  }
  return rows;
}

ComparisonReport compare_runs(const std::string& baseline_dir, const std::string& repel_dir,
                              const std::string& out_path) {
  const auto base_meta = read_json_file((fs::path(baseline_dir) / "metadata.json").string());
  const auto repel_meta = read_json_file((fs::path(repel_dir) / "metadata.json").string());
  for (const char* key : {"seed", "compat_hash", "samples", "dim", "n_steps"}) {
    if (base_meta.at(key) != repel_meta.at(key)) {
      throw ConfigError(std::string("incompatible run metadata: '") + key +
                        "' differs between runs");
    }
  }

  const Eigen::MatrixXd base_samples =
      csv::read_samples((fs::path(baseline_dir) / "samples.csv").string());
  const Eigen::MatrixXd repel_samples =
      csv::read_samples((fs::path(repel_dir) / "samples.csv").string());
  if (base_samples.rows() != repel_samples.rows() ||
      base_samples.cols() != repel_samples.cols()) {
    throw ConfigError("incompatible run metadata: sample shapes differ");
  }

  const auto trace = csv::read_trace((fs::path(repel_dir) / "trace.csv").string());
  const auto shield_rows =
      csv::read_active_shields((fs::path(repel_dir) / "active_shields.csv").string());

  const int total = static_cast<int>(base_samples.rows());
  std::vector<int> active_steps(total, 0);
  for (const auto& record : trace) {
    if (record.traj >= 0 && record.traj < total && record.delta_norm > 0.0) {
      active_steps[record.traj] += 1;
    }
  }
  std::vector<std::set<int>> shields(total);
  for (const auto& row : shield_rows) {
    if (row.traj >= 0 && row.traj < total) shields[row.traj].insert(row.shield_id);
  }

  ComparisonReport report;
  report.rows.resize(total);
  for (int i = 0; i < total; ++i) {
    auto& row = report.rows[i];
    row.traj = i;
    row.displacement = (repel_samples.row(i) - base_samples.row(i)).norm();
    // Bit-level comparison: untouched trajectories reproduce the baseline
    // exactly, so any difference at all counts as an intervention.
    row.changed = false;
    for (Eigen::Index c = 0; c < base_samples.cols(); ++c) {
      if (std::memcmp(&base_samples(i, c), &repel_samples(i, c), sizeof(double)) != 0) {
        row.changed = true;
        break;
      }
    }
    row.active_steps = active_steps[i];
    row.shield_ids.assign(shields[i].begin(), shields[i].end());
    if (row.changed) report.changed_count += 1;
  }

  if (!out_path.empty()) {
    if (fs::path(out_path).has_parent_path()) {
      fs::create_directories(fs::path(out_path).parent_path());
    }
    std::ostringstream table;
    table << "traj,changed,displacement,active_steps,shield_ids\n";
    for (const auto& row : report.rows) {
      table << row.traj << ',' << (row.changed ? 1 : 0) << ','
            << csv::format_double(row.displacement) << ',' << row.active_steps << ','
            << join_ids(row.shield_ids) << '\n';
    }
    write_text_file(out_path, table.str());
  }
  return report;
}

void emit_plot_data(const std::vector<std::string>& run_dirs, const std::string& out_dir) {
  if (run_dirs.empty()) throw ConfigError("emit_plot_data: no run directories given");
  fs::create_directories(out_dir);

  std::map<std::string, int> name_uses;
  for (const auto& dir : run_dirs) {
    std::string name = fs::path(dir).filename().string();
    if (name.empty()) name = fs::path(dir).parent_path().filename().string();
    if (name.empty()) name = "run";
    const int uses = ++name_uses[name];
    if (uses > 1) name += "_" + std::to_string(uses);

    const fs::path sweep_csv = fs::path(dir) / "sweep.csv";
    if (fs::exists(sweep_csv)) {
      const std::string text = read_text_file(sweep_csv.string());
      std::istringstream lines(text);
      std::string line;
      std::getline(lines, line);
      const auto header = csv::split(line, ',');
      const auto column = [&](const std::string& field) {
        const auto it = std::find(header.begin(), header.end(), field);
        if (it == header.end()) {
          throw IoError("sweep.csv in '" + dir + "' lacks column '" + field + "'");
        }
        return static_cast<std::size_t>(it - header.begin());
      };
      const std::size_t indices[] = {
          column("point"),  column("radius"),  column("lambda"),
          column("gamma"),  column("n_probe"), column("recall"),
          column("precision"), column("coverage"), column("density"),
          column("vendi"),  column("frechet_raw")};
      std::ostringstream pareto;
      pareto << "point,radius,lambda,gamma,n_probe,recall,precision,coverage,density,"
                "vendi,frechet_raw\n";
      while (std::getline(lines, line)) {
        if (line.empty()) continue;
        const auto fields = csv::split(line, ',');
        for (std::size_t k = 0; k < std::size(indices); ++k) {
          if (indices[k] >= fields.size()) {
            throw IoError("sweep.csv in '" + dir + "' has a short row");
          }
          if (k > 0) pareto << ',';
          pareto << fields[indices[k]];
        }
        pareto << '\n';
      }
      write_text_file((fs::path(out_dir) / ("pareto_" + name + ".csv")).string(),
                      pareto.str());
      continue;
    }

    const auto meta = read_json_file((fs::path(dir) / "metadata.json").string());
    TrajectoryTrace trace;
    trace.n_steps = meta.at("n_steps").get<int>();
    trace.batch = meta.at("samples").get<int>();
    trace.records = csv::read_trace((fs::path(dir) / "trace.csv").string());

    const auto summary = sparsity_summary(trace, 10);
    std::ostringstream sparsity;
    sparsity << "bin,t_hi,t_lo,records,active,active_fraction,mean_ratio,max_ratio\n";
    for (std::size_t b = 0; b < summary.bins.size(); ++b) {
      const auto& bin = summary.bins[b];
      sparsity << b << ',' << csv::format_double(bin.t_hi) << ','
               << csv::format_double(bin.t_lo) << ',' << bin.records << ',' << bin.active
               << ',' << csv::format_double(bin.active_fraction) << ','
               << csv::format_double(bin.mean_ratio) << ','
               << csv::format_double(bin.max_ratio) << '\n';
    }
    write_text_file((fs::path(out_dir) / ("sparsity_" + name + ".csv")).string(),
                    sparsity.str());

    std::ostringstream finish;
    finish << "traj,finish_time\n";
    for (std::size_t i = 0; i < summary.finish_time.size(); ++i) {
      finish << i << ',' << csv::format_double(summary.finish_time[i]) << '\n';
    }
    write_text_file((fs::path(out_dir) / ("finish_" + name + ".csv")).string(), finish.str());
  }
}

void build_index_from_config(const ExperimentConfig& config, const std::string& out_path) {
  config.validate();
  using Kind = ShieldSourceConfig::Kind;
  Eigen::MatrixXd centers;
  if (config.shields.kind == Kind::kInline) {
    centers = rows_to_matrix(config.shields.inline_centers, config.dim);
  } else if (config.shields.kind == Kind::kSamplesFile) {
    centers = csv::read_samples(config.shields.samples_file);
  } else {
    throw ConfigError("build-index needs shields from an inline list or a samples file");
  }
  const int n_cells = config.shields.n_cells > 0
                          ? config.shields.n_cells
                          : IvfIndex::default_cell_count(static_cast<int>(centers.rows()));
  const IvfIndex index = IvfIndex::build(centers, n_cells, config.shields.index_seed);
  if (fs::path(out_path).has_parent_path()) {
    fs::create_directories(fs::path(out_path).parent_path());
  }
  index.save(out_path);
}

}  // namespace spell
