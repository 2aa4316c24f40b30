#include "spell/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "spell/csv.hpp"
#include "spell/errors.hpp"

namespace spell {
namespace {

namespace fs = std::filesystem;

std::string_view trim(std::string_view text) {
  const auto begin = text.find_first_not_of(" \t\r");
  if (begin == std::string_view::npos) return {};
  const auto end = text.find_last_not_of(" \t\r");
  return text.substr(begin, end - begin + 1);
}

[[noreturn]] void fail(const std::string& source, int line_no, const std::string& message) {
  throw ConfigError(source + ":" + std::to_string(line_no) + ": " + message);
}

double parse_double_at(std::string_view text, const std::string& source, int line_no,
                       const std::string& key) {
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    fail(source, line_no, key + ": expected a number, got '" + std::string(text) + "'");
  }
  return value;
}

long long parse_int_at(std::string_view text, const std::string& source, int line_no,
                       const std::string& key) {
  long long value = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    fail(source, line_no, key + ": expected an integer, got '" + std::string(text) + "'");
  }
  return value;
}

std::uint64_t parse_u64_at(std::string_view text, const std::string& source, int line_no,
                           const std::string& key) {
  std::uint64_t value = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    fail(source, line_no, key + ": expected an unsigned integer, got '" + std::string(text) + "'");
  }
  return value;
}

bool parse_bool_at(std::string_view text, const std::string& source, int line_no,
                   const std::string& key) {
  if (text == "on" || text == "true") return true;
  if (text == "off" || text == "false") return false;
  fail(source, line_no, key + ": expected on/off, got '" + std::string(text) + "'");
}

std::vector<double> parse_double_list(std::string_view text, const std::string& source,
                                      int line_no, const std::string& key) {
  std::vector<double> values;
  for (const auto& piece : csv::split(text, ',')) {
    values.push_back(parse_double_at(trim(piece), source, line_no, key));
  }
  return values;
}

Eigen::VectorXd parse_vector_at(std::string_view text, const std::string& source, int line_no,
                                const std::string& key) {
  const auto values = parse_double_list(text, source, line_no, key);
  return Eigen::Map<const Eigen::VectorXd>(values.data(),
                                           static_cast<Eigen::Index>(values.size()));
}

// Grammar: weight=W mean=a,b,... cov=diag:v,... | cov=full:row-major,...
// [label=L], whitespace separated.
MixtureComponent parse_component_line(std::string_view text, const std::string& source,
                                      int line_no) {
  MixtureComponent component;
  component.weight = -1.0;
  bool have_mean = false;
  bool have_cov = false;
  std::string cov_spec;

  std::istringstream stream{std::string(text)};
  std::string token;
  while (stream >> token) {
    const auto eq = token.find('=');
    if (eq == std::string::npos) {
      fail(source, line_no, "component: expected key=value, got '" + token + "'");
    }
    const std::string key = token.substr(0, eq);
    const std::string value = token.substr(eq + 1);
    if (key == "weight") {
      component.weight = parse_double_at(value, source, line_no, "component weight");
    } else if (key == "mean") {
      component.mean = parse_vector_at(value, source, line_no, "component mean");
      have_mean = true;
    } else if (key == "cov") {
      cov_spec = value;
      have_cov = true;
    } else if (key == "label") {
      component.label = static_cast<int>(parse_int_at(value, source, line_no, "component label"));
    } else {
      fail(source, line_no, "component: unknown field '" + key + "'");
    }
  }
  if (component.weight < 0.0 || !have_mean || !have_cov) {
    fail(source, line_no, "component: weight=, mean=, and cov= are all required");
  }

  const auto dim = component.mean.size();
  if (cov_spec.rfind("diag:", 0) == 0) {
    const auto diag = parse_vector_at(cov_spec.substr(5), source, line_no, "component cov");
    if (diag.size() != dim) {
      fail(source, line_no, "component cov: diagonal needs " + std::to_string(dim) + " entries");
    }
    component.cov = diag.asDiagonal();
  } else if (cov_spec.rfind("full:", 0) == 0) {
    const auto flat = parse_vector_at(cov_spec.substr(5), source, line_no, "component cov");
    if (flat.size() != dim * dim) {
      fail(source, line_no,
           "component cov: full matrix needs " + std::to_string(dim * dim) + " entries");
    }
    component.cov = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                                   Eigen::RowMajor>>(flat.data(), dim, dim);
  } else {
    fail(source, line_no, "component cov: expected diag:... or full:...");
  }
  return component;
}

std::string resolve_path(const std::string& value, const std::string& base_dir) {
  fs::path path(value);
  if (path.is_relative() && !base_dir.empty()) path = fs::path(base_dir) / path;
  return path.lexically_normal().string();
}

void write_component(std::ostream& out, const MixtureComponent& component) {
  out << "component: weight=" << csv::format_double(component.weight) << " mean=";
  for (Eigen::Index i = 0; i < component.mean.size(); ++i) {
    if (i > 0) out << ',';
    out << csv::format_double(component.mean[i]);
  }
  const bool diagonal = component.cov.isDiagonal(0.0);
  out << (diagonal ? " cov=diag:" : " cov=full:");
  if (diagonal) {
    for (Eigen::Index i = 0; i < component.cov.rows(); ++i) {
      if (i > 0) out << ',';
      out << csv::format_double(component.cov(i, i));
    }
  } else {
    for (Eigen::Index r = 0; r < component.cov.rows(); ++r) {
      for (Eigen::Index c = 0; c < component.cov.cols(); ++c) {
        if (r + c > 0) out << ',';
        out << csv::format_double(component.cov(r, c));
      }
    }
  }
  if (component.label) out << " label=" << *component.label;
  out << '\n';
}

void write_double_list(std::ostream& out, const std::vector<double>& values) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i > 0) out << ',';
    out << csv::format_double(values[i]);
  }
}

ExperimentConfig parse_impl(std::string_view text, const std::string& source,
                            const std::string& base_dir, bool mixture_only);

// A mixture file holds one [mixture] section; its components are inlined into
// the parent config.
void include_mixture_file(ExperimentConfig& config, const std::string& path,
                          const std::string& source, int line_no) {
  std::ifstream in(path);
  if (!in) fail(source, line_no, "mixture file: cannot open '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  const auto included =
      parse_impl(buffer.str(), path, fs::path(path).parent_path().string(), true);
  config.dim = included.dim;
  config.components = included.components;
}

ExperimentConfig parse_impl(std::string_view text, const std::string& source,
                            const std::string& base_dir, bool mixture_only) {
  ExperimentConfig config;
  std::string section;
  std::set<std::string> seen;
  bool saw_source_key = false;

  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto next = text.find('\n', pos);
    std::string_view raw = text.substr(pos, next == std::string_view::npos ? text.size() - pos
                                                                           : next - pos);
    pos = next == std::string_view::npos ? text.size() + 1 : next + 1;
    ++line_no;

    std::string_view line = raw;
    const auto hash = line.find('#');
    if (hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;

    if (line.front() == '[') {
      if (line.back() != ']') fail(source, line_no, "unterminated section header");
      section = std::string(trim(line.substr(1, line.size() - 2)));
      static const std::set<std::string> kSections = {"run",     "schedule", "mixture", "spell",
                                                      "shields", "metrics",  "sweep"};
      if (!kSections.count(section)) fail(source, line_no, "unknown section '" + section + "'");
      if (mixture_only && section != "mixture") {
        fail(source, line_no, "mixture file may only contain a [mixture] section");
      }
      continue;
    }

    const auto colon = line.find(':');
    if (colon == std::string_view::npos) {
      fail(source, line_no, "expected 'key: value', got '" + std::string(line) + "'");
    }
    const std::string key = std::string(trim(line.substr(0, colon)));
    const std::string_view value = trim(line.substr(colon + 1));
    if (section.empty()) fail(source, line_no, "key '" + key + "' before any [section]");
    if (key.empty()) fail(source, line_no, "empty key");
    if (value.empty()) fail(source, line_no, key + ": empty value");

    const bool repeatable =
        (section == "mixture" && key == "component") || (section == "shields" && key == "center");
    if (!repeatable && !seen.insert(section + "/" + key).second) {
      fail(source, line_no, "duplicate key '" + key + "' in [" + section + "]");
    }

    if (section == "run") {
      if (key == "seed") config.seed = parse_u64_at(value, source, line_no, key);
      else if (key == "batch") config.batch = static_cast<int>(parse_int_at(value, source, line_no, key));
      else if (key == "n_batches") config.n_batches = static_cast<int>(parse_int_at(value, source, line_no, key));
      else if (key == "label") config.label = static_cast<int>(parse_int_at(value, source, line_no, key));
      else if (key == "gamma") config.gamma = parse_double_at(value, source, line_no, key);
      else if (key == "pg_bandwidth") config.pg_bandwidth = parse_double_at(value, source, line_no, key);
      else if (key == "trace") config.trace = parse_bool_at(value, source, line_no, key);
      else if (key == "store_xhat") config.store_xhat = parse_bool_at(value, source, line_no, key);
      else fail(source, line_no, "unknown key '" + key + "' in [run]");
    } else if (section == "schedule") {
      if (key == "beta_min") config.schedule.beta_min = parse_double_at(value, source, line_no, key);
      else if (key == "beta_max") config.schedule.beta_max = parse_double_at(value, source, line_no, key);
      else if (key == "t_min") config.schedule.t_min = parse_double_at(value, source, line_no, key);
      else if (key == "n_steps") config.n_steps = static_cast<int>(parse_int_at(value, source, line_no, key));
      else fail(source, line_no, "unknown key '" + key + "' in [schedule]");
    } else if (section == "mixture") {
      if (key == "dim") config.dim = static_cast<int>(parse_int_at(value, source, line_no, key));
      else if (key == "component") config.components.push_back(parse_component_line(value, source, line_no));
      else if (key == "file") {
        if (mixture_only) fail(source, line_no, "mixture file may not include another file");
        include_mixture_file(config, resolve_path(std::string(value), base_dir), source, line_no);
      } else fail(source, line_no, "unknown key '" + key + "' in [mixture]");
    } else if (section == "spell") {
      if (key == "radius") config.spell.radius = parse_double_at(value, source, line_no, key);
      else if (key == "lambda") config.spell.overcompensation = parse_double_at(value, source, line_no, key);
      else if (key == "mode") {
        if (value == "static") config.spell.mode = RepelMode::kStatic;
        else if (value == "intra_batch") config.spell.mode = RepelMode::kIntraBatch;
        else if (value == "mixed") config.spell.mode = RepelMode::kMixed;
        else fail(source, line_no, "mode: expected static, intra_batch, or mixed");
      } else if (key == "space") {
        if (value == "denoised") config.spell.space = CorrectionSpace::kDenoised;
        else if (value == "score") config.spell.space = CorrectionSpace::kScore;
        else fail(source, line_no, "space: expected denoised or score");
      } else if (key == "soft") config.spell.soft = parse_bool_at(value, source, line_no, key);
      else if (key == "series_terms") config.spell.soft_series_terms = static_cast<int>(parse_int_at(value, source, line_no, key));
      else fail(source, line_no, "unknown key '" + key + "' in [spell]");
    } else if (section == "shields") {
      if (key == "source") {
        saw_source_key = true;
        if (value == "none") config.shields.kind = ShieldSourceConfig::Kind::kNone;
        else if (value == "inline") config.shields.kind = ShieldSourceConfig::Kind::kInline;
        else if (value == "index") config.shields.kind = ShieldSourceConfig::Kind::kIndexFile;
        else if (value == "samples") config.shields.kind = ShieldSourceConfig::Kind::kSamplesFile;
        else fail(source, line_no, "source: expected none, inline, index, or samples");
      } else if (key == "center") {
        config.shields.inline_centers.push_back(parse_vector_at(value, source, line_no, key));
      } else if (key == "index_file") {
        config.shields.index_file = resolve_path(std::string(value), base_dir);
      } else if (key == "samples_file") {
        config.shields.samples_file = resolve_path(std::string(value), base_dir);
      } else if (key == "n_probe") {
        config.shields.n_probe = static_cast<int>(parse_int_at(value, source, line_no, key));
      } else if (key == "n_cells") {
        config.shields.n_cells = static_cast<int>(parse_int_at(value, source, line_no, key));
      } else if (key == "index_seed") {
        config.shields.index_seed = parse_u64_at(value, source, line_no, key);
      } else if (key == "use_index") {
        config.shields.use_index = parse_bool_at(value, source, line_no, key);
      } else if (key == "accumulate") {
        config.shields.accumulate = parse_bool_at(value, source, line_no, key);
      } else fail(source, line_no, "unknown key '" + key + "' in [shields]");
    } else if (section == "metrics") {
      if (key == "enabled") config.metrics.enabled = parse_bool_at(value, source, line_no, key);
      else if (key == "k_neighbors") config.metrics.k_neighbors = static_cast<int>(parse_int_at(value, source, line_no, key));
      else if (key == "reference_samples") config.metrics.reference_samples = static_cast<int>(parse_int_at(value, source, line_no, key));
      else if (key == "reference_seed") config.metrics.reference_seed = parse_u64_at(value, source, line_no, key);
      else if (key == "vendi_bandwidth") config.metrics.vendi_bandwidth = parse_double_at(value, source, line_no, key);
      else fail(source, line_no, "unknown key '" + key + "' in [metrics]");
    } else if (section == "sweep") {
      if (key == "radius") config.sweep.radius = parse_double_list(value, source, line_no, key);
      else if (key == "lambda") config.sweep.lambda = parse_double_list(value, source, line_no, key);
      else if (key == "gamma") config.sweep.gamma = parse_double_list(value, source, line_no, key);
      else if (key == "n_probe") {
        for (const auto& piece : csv::split(value, ',')) {
          config.sweep.n_probe.push_back(
              static_cast<int>(parse_int_at(trim(piece), source, line_no, key)));
        }
      } else fail(source, line_no, "unknown key '" + key + "' in [sweep]");
    }
  }

  if (!config.shields.inline_centers.empty() && !saw_source_key) {
    config.shields.kind = ShieldSourceConfig::Kind::kInline;
  }
  return config;
}

}  // namespace

ExperimentConfig parse_config_text(std::string_view text, const std::string& source,
                                   const std::string& base_dir) {
  return parse_impl(text, source, base_dir, false);
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  auto config =
      parse_config_text(buffer.str(), path, fs::path(path).parent_path().string());
  config.validate();
  return config;
}

void ExperimentConfig::validate() const {
  schedule.validate();
  spell.validate();
  if (n_steps < 1) throw ConfigError("n_steps must be at least 1");
  if (batch < 1) throw ConfigError("batch must be at least 1");
  if (n_batches < 1) throw ConfigError("n_batches must be at least 1");
  if (gamma < 1.0) throw ConfigError("gamma must be at least 1");
  if (gamma > 1.0 && !label) throw ConfigError("gamma above 1 requires a label");
  if (pg_bandwidth < 0.0) throw ConfigError("pg_bandwidth must be nonnegative");

  if (dim < 1) throw ConfigError("mixture dim must be at least 1");
  if (components.empty()) throw ConfigError("mixture needs at least one component");
  for (const auto& component : components) {
    if (component.mean.size() != dim) {
      throw ConfigError("mixture component dimension does not match dim");
    }
  }
  const auto mix = mixture();
  if (label) (void)mix.conditional(*label);

  using Kind = ShieldSourceConfig::Kind;
  switch (shields.kind) {
    case Kind::kNone:
      if (!shields.inline_centers.empty()) {
        throw ConfigError("shields: centers given but source is none");
      }
      break;
    case Kind::kInline:
      if (shields.inline_centers.empty()) {
        throw ConfigError("shields: source inline needs at least one center");
      }
      for (const auto& center : shields.inline_centers) {
        if (center.size() != dim) throw ConfigError("shield center dimension does not match dim");
      }
      break;
    case Kind::kIndexFile:
      if (shields.index_file.empty()) throw ConfigError("shields: source index needs index_file");
      if (!fs::exists(shields.index_file)) {
        throw ConfigError("shields: index_file '" + shields.index_file + "' does not exist");
      }
      break;
    case Kind::kSamplesFile:
      if (shields.samples_file.empty()) {
        throw ConfigError("shields: source samples needs samples_file");
      }
      if (!fs::exists(shields.samples_file)) {
        throw ConfigError("shields: samples_file '" + shields.samples_file + "' does not exist");
      }
      break;
  }
  if (shields.n_probe < 1) throw ConfigError("n_probe must be at least 1");
  if (shields.n_cells < 0) throw ConfigError("n_cells must be nonnegative");

  if (metrics.k_neighbors < 1) throw ConfigError("k_neighbors must be at least 1");
  if (metrics.enabled) {
    const long long total = static_cast<long long>(batch) * n_batches;
    if (total <= metrics.k_neighbors) {
      throw ConfigError("metrics need more generated samples than k_neighbors");
    }
    if (metrics.reference_samples <= metrics.k_neighbors) {
      throw ConfigError("metrics need more reference samples than k_neighbors");
    }
    if (metrics.vendi_bandwidth && *metrics.vendi_bandwidth <= 0.0) {
      throw ConfigError("vendi_bandwidth must be positive");
    }
  }

  for (double r : sweep.radius) {
    if (r < 0.0) throw ConfigError("sweep radius values must be nonnegative");
  }
  for (double l : sweep.lambda) {
    if (l <= 0.0) throw ConfigError("sweep lambda values must be positive");
  }
  for (double g : sweep.gamma) {
    if (g < 1.0) throw ConfigError("sweep gamma values must be at least 1");
    if (g > 1.0 && !label) throw ConfigError("sweep gamma above 1 requires a label");
  }
  for (int p : sweep.n_probe) {
    if (p < 1) throw ConfigError("sweep n_probe values must be at least 1");
  }
}

std::string canonical_config_text(const ExperimentConfig& config) {
  std::ostringstream out;
  const auto fd = [](double v) { return csv::format_double(v); };

  out << "[run]\n";
  out << "seed: " << config.seed << '\n';
  out << "batch: " << config.batch << '\n';
  out << "n_batches: " << config.n_batches << '\n';
  if (config.label) out << "label: " << *config.label << '\n';
  out << "gamma: " << fd(config.gamma) << '\n';
  out << "pg_bandwidth: " << fd(config.pg_bandwidth) << '\n';
  out << "trace: " << (config.trace ? "on" : "off") << '\n';
  out << "store_xhat: " << (config.store_xhat ? "on" : "off") << '\n';

  out << "\n[schedule]\n";
  out << "beta_min: " << fd(config.schedule.beta_min) << '\n';
  out << "beta_max: " << fd(config.schedule.beta_max) << '\n';
  out << "t_min: " << fd(config.schedule.t_min) << '\n';
  out << "n_steps: " << config.n_steps << '\n';

  out << "\n[mixture]\n";
  out << "dim: " << config.dim << '\n';
  for (const auto& component : config.components) write_component(out, component);

  out << "\n[spell]\n";
  out << "radius: " << fd(config.spell.radius) << '\n';
  out << "lambda: " << fd(config.spell.overcompensation) << '\n';
  out << "mode: "
      << (config.spell.mode == RepelMode::kStatic
              ? "static"
              : config.spell.mode == RepelMode::kIntraBatch ? "intra_batch" : "mixed")
      << '\n';
  out << "space: " << (config.spell.space == CorrectionSpace::kDenoised ? "denoised" : "score")
      << '\n';
  out << "soft: " << (config.spell.soft ? "on" : "off") << '\n';
  out << "series_terms: " << config.spell.soft_series_terms << '\n';

  out << "\n[shields]\n";
  using Kind = ShieldSourceConfig::Kind;
  const char* source = "none";
  if (config.shields.kind == Kind::kInline) source = "inline";
  else if (config.shields.kind == Kind::kIndexFile) source = "index";
  else if (config.shields.kind == Kind::kSamplesFile) source = "samples";
  out << "source: " << source << '\n';
  for (const auto& center : config.shields.inline_centers) {
    out << "center: ";
    for (Eigen::Index i = 0; i < center.size(); ++i) {
      if (i > 0) out << ',';
      out << fd(center[i]);
    }
    out << '\n';
  }
  if (!config.shields.index_file.empty()) out << "index_file: " << config.shields.index_file << '\n';
  if (!config.shields.samples_file.empty()) {
    out << "samples_file: " << config.shields.samples_file << '\n';
  }
  out << "n_probe: " << config.shields.n_probe << '\n';
  out << "n_cells: " << config.shields.n_cells << '\n';
  out << "index_seed: " << config.shields.index_seed << '\n';
  out << "use_index: " << (config.shields.use_index ? "on" : "off") << '\n';
  out << "accumulate: " << (config.shields.accumulate ? "on" : "off") << '\n';

  out << "\n[metrics]\n";
  out << "enabled: " << (config.metrics.enabled ? "on" : "off") << '\n';
  out << "k_neighbors: " << config.metrics.k_neighbors << '\n';
  out << "reference_samples: " << config.metrics.reference_samples << '\n';
  out << "reference_seed: " << config.metrics.reference_seed << '\n';
  if (config.metrics.vendi_bandwidth) {
    out << "vendi_bandwidth: " << fd(*config.metrics.vendi_bandwidth) << '\n';
  }

  if (config.sweep.any()) {
    out << "\n[sweep]\n";
    if (!config.sweep.radius.empty()) {
      out << "radius: ";
      write_double_list(out, config.sweep.radius);
      out << '\n';
    }
    if (!config.sweep.lambda.empty()) {
      out << "lambda: ";
      write_double_list(out, config.sweep.lambda);
      out << '\n';
    }
    if (!config.sweep.gamma.empty()) {
      out << "gamma: ";
      write_double_list(out, config.sweep.gamma);
      out << '\n';
    }
    if (!config.sweep.n_probe.empty()) {
      out << "n_probe: ";
      for (std::size_t i = 0; i < config.sweep.n_probe.size(); ++i) {
        if (i > 0) out << ',';
        out << config.sweep.n_probe[i];
      }
      out << '\n';
    }
  }
  return out.str();
}

std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t hash = 14695981039346656037ULL;
  for (unsigned char byte : text) {
    hash ^= byte;
    hash *= 1099511628211ULL;
  }
  return hash;
}

std::string hash_hex(std::uint64_t value) {
  static const char* kDigits = "0123456789abcdef";
  std::string text(16, '0');
  for (int i = 15; i >= 0; --i) {
    text[static_cast<std::size_t>(i)] = kDigits[value & 0xF];
    value >>= 4;
  }
  return text;
}

std::string compatibility_hash(const ExperimentConfig& config) {
  std::ostringstream out;
  out << "seed:" << config.seed << "|batch:" << config.batch
      << "|n_batches:" << config.n_batches
      << "|label:" << (config.label ? std::to_string(*config.label) : "-")
      << "|gamma:" << csv::format_double(config.gamma)
      << "|pg:" << csv::format_double(config.pg_bandwidth)
      << "|beta_min:" << csv::format_double(config.schedule.beta_min)
      << "|beta_max:" << csv::format_double(config.schedule.beta_max)
      << "|t_min:" << csv::format_double(config.schedule.t_min)
      << "|n_steps:" << config.n_steps << "|dim:" << config.dim << '\n';
  for (const auto& component : config.components) write_component(out, component);
  return hash_hex(fnv1a(out.str()));
}

}  // namespace spell
