#include "bridge/config.hpp"

#include <cinttypes>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "bridge/hash.hpp"

namespace bridge {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ValidationError("config: bad number for '" + key + "': " + value);
  }
}

long long parse_int(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const long long v = std::stoll(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ValidationError("config: bad integer for '" + key + "': " + value);
  }
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const unsigned long long v = std::stoull(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ValidationError("config: bad unsigned integer for '" + key + "': " + value);
  }
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ValidationError("config: bad boolean for '" + key + "': " + value);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) {
    item = trim(item);
    if (!item.empty()) parts.push_back(item);
  }
  return parts;
}

std::vector<int> parse_int_list(const std::string& key, const std::string& value) {
  std::vector<int> out;
  for (const auto& part : split(value, ',')) {
    out.push_back(static_cast<int>(parse_int(key, part)));
  }
  if (out.empty()) throw ValidationError("config: empty list for '" + key + "'");
  return out;
}

std::vector<double> parse_double_list(const std::string& key, const std::string& value) {
  std::vector<double> out;
  for (const auto& part : split(value, ',')) out.push_back(parse_double(key, part));
  if (out.empty()) throw ValidationError("config: empty list for '" + key + "'");
  return out;
}

// Semicolon-separated points, comma-separated coordinates.
Eigen::MatrixXd parse_centers(const std::string& value) {
  const auto points = split(value, ';');
  if (points.empty()) return {};
  std::vector<std::vector<double>> rows;
  for (const auto& p : points) rows.push_back(parse_double_list("centers", p));
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()),
                    static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != rows.front().size()) {
      throw ValidationError("config: centers rows have different lengths");
    }
    for (std::size_t j = 0; j < rows[i].size(); ++j) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
  }
  return m;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

RunConfig RunConfig::parse(const std::string& text) {
  RunConfig cfg;
  std::string section;
  std::stringstream stream(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(stream, raw)) {
    ++line_no;
    std::string line = trim(raw);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw ValidationError("config line " + std::to_string(line_no) + ": malformed section");
      }
      section = trim(line.substr(1, line.size() - 2));
      if (section != "run" && section != "target" && section != "sizes" &&
          section != "pretrain" && section != "score" && section != "schedule" &&
          section != "sweep") {
        throw ValidationError("config: unknown section [" + section + "]");
      }
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ValidationError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const std::string qualified = section + "." + key;

    if (qualified == "run.seed") {
      cfg.seed = parse_u64(key, value);
    } else if (qualified == "run.output_dir") {
      cfg.output_dir = value;
    } else if (qualified == "target.kind") {
      if (value == "uniform_cube") {
        cfg.kind = TargetKind::UniformCube;
      } else if (value == "truncated_gaussian_mixture") {
        cfg.kind = TargetKind::TruncatedGaussianMixture;
      } else if (value == "embedded_manifold") {
        cfg.kind = TargetKind::EmbeddedManifold;
      } else {
        throw ValidationError("config: unknown target kind '" + value + "'");
      }
    } else if (qualified == "target.d") {
      cfg.d = static_cast<int>(parse_int(key, value));
    } else if (qualified == "target.d_star") {
      cfg.d_star = static_cast<int>(parse_int(key, value));
    } else if (qualified == "target.centers") {
      cfg.centers = parse_centers(value);
    } else if (qualified == "target.std") {
      cfg.std_dev = parse_double(key, value);
    } else if (qualified == "target.shift") {
      cfg.shift = parse_double(key, value);
    } else if (qualified == "target.embedding_seed") {
      cfg.embedding_seed = parse_u64(key, value);
    } else if (qualified == "sizes.n") {
      cfg.n = parse_int(key, value);
    } else if (qualified == "sizes.pretrain_m") {
      cfg.pretrain_m = parse_int(key, value);
    } else if (qualified == "sizes.eval_count") {
      cfg.eval_count = parse_int(key, value);
    } else if (qualified == "sizes.chains") {
      cfg.chains = parse_int(key, value);
    } else if (qualified == "pretrain.encoder_hidden") {
      cfg.encoder_hidden = parse_int_list(key, value);
    } else if (qualified == "pretrain.decoder_hidden") {
      cfg.decoder_hidden = parse_int_list(key, value);
    } else if (qualified == "pretrain.epochs") {
      cfg.epochs = static_cast<int>(parse_int(key, value));
    } else if (qualified == "pretrain.lr") {
      cfg.pretrain_lr = parse_double(key, value);
    } else if (qualified == "pretrain.batch") {
      cfg.pretrain_batch = static_cast<int>(parse_int(key, value));
    } else if (qualified == "score.hidden") {
      cfg.score_hidden = parse_int_list(key, value);
    } else if (qualified == "score.steps") {
      cfg.score_steps = static_cast<int>(parse_int(key, value));
    } else if (qualified == "score.time_batch") {
      cfg.time_batch = static_cast<int>(parse_int(key, value));
    } else if (qualified == "score.point_batch") {
      cfg.point_batch = static_cast<int>(parse_int(key, value));
    } else if (qualified == "score.lr") {
      cfg.score_lr = parse_double(key, value);
    } else if (qualified == "score.T") {
      cfg.stop_time_override = parse_double(key, value);
    } else if (qualified == "schedule.sigma") {
      cfg.sigma = parse_double(key, value);
    } else if (qualified == "schedule.K") {
      cfg.schedule_steps = static_cast<int>(parse_int(key, value));
    } else if (qualified == "schedule.L") {
      cfg.truncation = parse_double(key, value);
    } else if (qualified == "schedule.beta") {
      cfg.beta = parse_double(key, value);
    } else if (qualified == "schedule.use_derived_schedule") {
      cfg.use_derived_schedule = parse_bool(key, value);
    } else if (qualified == "schedule.noise_scale") {
      if (value == "em") {
        cfg.noise_scale = NoiseScale::Em;
      } else if (value == "algorithm1") {
        cfg.noise_scale = NoiseScale::Algorithm1;
      } else {
        throw ValidationError("config: noise_scale must be 'em' or 'algorithm1'");
      }
    } else if (qualified == "schedule.init_from") {
      if (value == "training") {
        cfg.init_from_heldout = false;
      } else if (value == "heldout") {
        cfg.init_from_heldout = true;
      } else {
        throw ValidationError("config: init_from must be 'training' or 'heldout'");
      }
    } else if (qualified == "sweep.T_values") {
      cfg.sweep_stop_times = parse_double_list(key, value);
    } else {
      throw ValidationError("config: unknown key '" + key + "' in section [" + section + "]");
    }
  }
  cfg.validate();
  return cfg;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  RunConfig cfg = parse(ss.str());
  if (const char* env = std::getenv("BRIDGEGEN_OUT"); env != nullptr && *env != '\0') {
    cfg.output_dir = env;
  }
  return cfg;
}

void RunConfig::validate() const {
  target_spec().validate();
  if (n < 1 || pretrain_m < 1) throw ValidationError("config: n and pretrain_m must be >= 1");
  if (eval_count < 0 || chains < 0) throw ValidationError("config: counts must be >= 0");
  if (epochs < 1) throw ValidationError("config: epochs must be >= 1");
  if (pretrain_batch < 1) throw ValidationError("config: pretrain batch must be >= 1");
  if (score_steps < 0) throw ValidationError("config: score steps must be >= 0");
  if (time_batch < 1 || point_batch < 1) throw ValidationError("config: minibatch sizes must be >= 1");
  if (stop_time_override && !(*stop_time_override > 0.0 && *stop_time_override < 1.0)) {
    throw ValidationError("config: T override must lie in (0,1)");
  }
  if (!(sigma > 0.0)) throw ValidationError("config: sigma must be > 0");
  if (schedule_steps < 1) throw ValidationError("config: K must be >= 1");
  if (truncation && !(*truncation > 0.0)) throw ValidationError("config: L must be > 0");
  if (!(beta > 0.0)) throw ValidationError("config: beta must be > 0");
  for (double t : sweep_stop_times) {
    if (!(t > 0.0 && t < 1.0)) throw ValidationError("config: sweep T values must lie in (0,1)");
  }
  if (!use_derived_schedule && !stop_time_override) {
    throw ValidationError("config: set score.T or schedule.use_derived_schedule=true");
  }
}

TargetSpec RunConfig::target_spec() const {
  TargetSpec spec;
  spec.kind = kind;
  spec.d = d;
  spec.d_star = d_star;
  spec.centers = centers;
  spec.std_dev = std_dev;
  if (kind == TargetKind::EmbeddedManifold) {
    spec.embedding = make_embedding(d, d_star, embedding_seed);
  }
  return spec;
}

DiffusionSchedule RunConfig::make_schedule() const {
  const double L = truncation.value_or(default_truncation_level(sigma));
  DiffusionSchedule s;
  if (use_derived_schedule) {
    s = derive_schedule(n, d_star, beta, sigma, schedule_steps, L);
    if (stop_time_override) {
      s.stop_time = *stop_time_override;
      s.step_warning = s.dt() > s.step_size_target;
    }
  } else {
    s = manual_schedule(sigma, schedule_steps, *stop_time_override, L);
  }
  s.noise_scale = noise_scale;
  return s;
}

double RunConfig::stop_time() const { return make_schedule().stop_time; }

std::vector<int> RunConfig::encoder_dims() const {
  std::vector<int> dims{d};
  dims.insert(dims.end(), encoder_hidden.begin(), encoder_hidden.end());
  dims.push_back(d_star);
  return dims;
}

std::vector<int> RunConfig::decoder_dims() const {
  std::vector<int> dims{d_star};
  dims.insert(dims.end(), decoder_hidden.begin(), decoder_hidden.end());
  dims.push_back(d);
  return dims;
}

std::vector<int> RunConfig::score_dims() const {
  std::vector<int> dims{d_star + 1};
  dims.insert(dims.end(), score_hidden.begin(), score_hidden.end());
  dims.push_back(d_star);
  return dims;
}

std::string RunConfig::canonical() const {
  // output_dir is deliberately excluded: run identity is the experiment,
  // not where its artifacts land.
  std::ostringstream out;
  out << "seed=" << seed << "\n";
  out << "kind=" << static_cast<int>(kind) << "\n";
  out << "d=" << d << "\nd_star=" << d_star << "\n";
  out << "centers=";
  for (Eigen::Index i = 0; i < centers.rows(); ++i) {
    for (Eigen::Index j = 0; j < centers.cols(); ++j) {
      out << fmt(centers(i, j)) << (j + 1 < centers.cols() ? "," : "");
    }
    out << ";";
  }
  out << "\nstd=" << fmt(std_dev) << "\nshift=" << fmt(shift)
      << "\nembedding_seed=" << embedding_seed << "\n";
  out << "n=" << n << "\npretrain_m=" << pretrain_m << "\neval_count=" << eval_count
      << "\nchains=" << chains << "\n";
  out << "encoder_hidden=";
  for (int h : encoder_hidden) out << h << ",";
  out << "\ndecoder_hidden=";
  for (int h : decoder_hidden) out << h << ",";
  out << "\nepochs=" << epochs << "\npretrain_lr=" << fmt(pretrain_lr)
      << "\npretrain_batch=" << pretrain_batch << "\n";
  out << "score_hidden=";
  for (int h : score_hidden) out << h << ",";
  out << "\nscore_steps=" << score_steps << "\ntime_batch=" << time_batch
      << "\npoint_batch=" << point_batch << "\nscore_lr=" << fmt(score_lr) << "\n";
  out << "T=" << (stop_time_override ? fmt(*stop_time_override) : "derived") << "\n";
  out << "sigma=" << fmt(sigma) << "\nK=" << schedule_steps << "\nL="
      << (truncation ? fmt(*truncation) : "default") << "\nbeta=" << fmt(beta)
      << "\nuse_derived_schedule=" << use_derived_schedule << "\nnoise_scale="
      << (noise_scale == NoiseScale::Em ? "em" : "algorithm1")
      << "\ninit_from=" << (init_from_heldout ? "heldout" : "training") << "\n";
  out << "sweep=";
  for (double t : sweep_stop_times) out << fmt(t) << ",";
  out << "\n";
  return out.str();
}

std::string RunConfig::run_id() const { return hex64(fnv1a64(canonical())); }

}  // namespace bridge
