#include "config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "fsutil.hpp"

namespace dpf {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    require(used == value.size(), ErrorCode::Parse, "trailing characters in value for " + key);
    return v;
  } catch (const Error&) {
    throw;
  } catch (const std::exception&) {
    fail(ErrorCode::Parse, "cannot parse value '" + value + "' for key " + key);
  }
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  require(ec == std::errc() && ptr == value.data() + value.size(), ErrorCode::Parse,
          "cannot parse value '" + value + "' for key " + key);
  return v;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "1" || value == "true") return true;
  if (value == "0" || value == "false") return false;
  fail(ErrorCode::Parse, "cannot parse value '" + value + "' for key " + key + " (use 0/1)");
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  // Shortest representation that round-trips a double.
  for (int precision = 1; precision <= 17; ++precision) {
    std::snprintf(buf, sizeof(buf), "%.*g", precision, v);
    if (std::stod(buf) == v) break;
  }
  return buf;
}

void FitConfig::set(const std::string& key, const std::string& value) {
  if (key == "steps") {
    steps = static_cast<std::size_t>(parse_u64(key, value));
  } else if (key == "sample_count") {
    sample_count = static_cast<std::size_t>(parse_u64(key, value));
  } else if (key == "lr") {
    lr = parse_double(key, value);
  } else if (key == "seed") {
    seed = parse_u64(key, value);
  } else if (key == "k") {
    k = static_cast<std::size_t>(parse_u64(key, value));
  } else if (key == "normalize") {
    normalize = parse_bool(key, value);
  } else if (key == "lambda_cd") {
    weights.lambda_cd = parse_double(key, value);
  } else if (key == "lambda_n") {
    weights.lambda_n = parse_double(key, value);
  } else if (key == "lambda_ni") {
    weights.lambda_ni = parse_double(key, value);
  } else if (key == "lambda_s") {
    weights.lambda_s = parse_double(key, value);
  } else if (key == "lambda_iso") {
    weights.lambda_iso = parse_double(key, value);
  } else if (key == "lambda_v") {
    weights.lambda_v = parse_double(key, value);
  } else if (key == "phase1_frac") {
    phase1_frac = parse_double(key, value);
  } else if (key == "ramp_frac") {
    ramp_frac = parse_double(key, value);
  } else if (key == "omega0") {
    omega0 = parse_double(key, value);
  } else if (key == "resolution") {
    resolution = static_cast<std::size_t>(parse_u64(key, value));
  } else if (key == "radius_px") {
    radius_px = parse_double(key, value);
  } else if (key == "tau") {
    tau = parse_double(key, value);
  } else if (key == "splat_k") {
    splat_k = static_cast<std::size_t>(parse_u64(key, value));
  } else if (key == "patience") {
    patience = static_cast<std::size_t>(parse_u64(key, value));
  } else if (key == "lr_factor") {
    lr_factor = parse_double(key, value);
  } else if (key == "lr_min") {
    lr_min = parse_double(key, value);
  } else {
    fail(ErrorCode::UnknownKey, "unknown config key '" + key + "'");
  }
  explicit_keys.insert(key);
}

void FitConfig::validate() const {
  require(steps >= 1, ErrorCode::InvalidArgument, "steps must be >= 1");
  require(sample_count >= 1, ErrorCode::InvalidArgument, "sample_count must be >= 1");
  require(std::isfinite(lr) && lr > 0.0, ErrorCode::InvalidArgument, "lr must be positive");
  require(k >= 1, ErrorCode::InvalidArgument, "k must be >= 1");
  weights.validate();
  require(phase1_frac >= 0.0 && phase1_frac <= 1.0, ErrorCode::InvalidArgument,
          "phase1_frac must lie in [0,1]");
  require(ramp_frac >= 0.0 && phase1_frac + ramp_frac <= 1.0, ErrorCode::InvalidArgument,
          "phase1_frac + ramp_frac must not exceed 1");
  require(omega0 > 0.0, ErrorCode::InvalidArgument, "omega0 must be positive");
  require(resolution >= 8, ErrorCode::InvalidArgument, "resolution must be >= 8");
  require(radius_px >= 0.5, ErrorCode::InvalidArgument, "radius_px must be >= 0.5");
  require(tau > 0.0, ErrorCode::InvalidArgument, "tau must be positive");
  require(splat_k >= 1, ErrorCode::InvalidArgument, "splat_k must be >= 1");
  require(patience >= 1, ErrorCode::InvalidArgument, "patience must be >= 1");
  require(lr_factor > 0.0 && lr_factor < 1.0, ErrorCode::InvalidArgument,
          "lr_factor must lie in (0,1)");
  require(lr_min >= 0.0, ErrorCode::InvalidArgument, "lr_min must be >= 0");
}

std::string FitConfig::to_string() const {
  std::ostringstream out;
  out << "k=" << k << "\n";
  out << "lambda_cd=" << format_double(weights.lambda_cd) << "\n";
  out << "lambda_iso=" << format_double(weights.lambda_iso) << "\n";
  out << "lambda_n=" << format_double(weights.lambda_n) << "\n";
  out << "lambda_ni=" << format_double(weights.lambda_ni) << "\n";
  out << "lambda_s=" << format_double(weights.lambda_s) << "\n";
  out << "lambda_v=" << format_double(weights.lambda_v) << "\n";
  out << "lr=" << format_double(lr) << "\n";
  out << "lr_factor=" << format_double(lr_factor) << "\n";
  out << "lr_min=" << format_double(lr_min) << "\n";
  out << "normalize=" << (normalize ? 1 : 0) << "\n";
  out << "omega0=" << format_double(omega0) << "\n";
  out << "patience=" << patience << "\n";
  out << "phase1_frac=" << format_double(phase1_frac) << "\n";
  out << "radius_px=" << format_double(radius_px) << "\n";
  out << "ramp_frac=" << format_double(ramp_frac) << "\n";
  out << "resolution=" << resolution << "\n";
  out << "sample_count=" << sample_count << "\n";
  out << "seed=" << seed << "\n";
  out << "splat_k=" << splat_k << "\n";
  out << "steps=" << steps << "\n";
  out << "tau=" << format_double(tau) << "\n";
  return out.str();
}

FitConfig parse_config(const std::string& text) {
  FitConfig config;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    require(eq != std::string::npos, ErrorCode::Parse,
            "line " + std::to_string(line_no) + ": expected key=value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    require(!key.empty(), ErrorCode::Parse, "line " + std::to_string(line_no) + ": empty key");
    config.set(key, value);
  }
  config.validate();
  return config;
}

FitConfig read_config(const std::string& path) { return parse_config(read_file(path)); }

FitConfig animation_defaults(FitConfig config) {
  if (!config.is_set("lambda_iso")) config.weights.lambda_iso = 1e3;
  if (!config.is_set("lambda_v")) config.weights.lambda_v = 1e4;
  config.weights.lambda_s = 0.0;
  return config;
}

}  // namespace dpf
