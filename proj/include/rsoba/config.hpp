/**
 * \file config.hpp
 * \brief key=value run configuration with typed lookups. Unknown keys and
 *        malformed values are rejected.
 */
#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "rsoba/errors.hpp"
#include "rsoba/evaluation.hpp"
#include "rsoba/robust_kernel.hpp"
#include "rsoba/solver.hpp"
#include "rsoba/synthetic.hpp"
#include "rsoba/voxel_map.hpp"

namespace rsoba {

enum class ValueKind { kDouble, kInt, kBool, kChoice, kString };

struct ConfigKey {
  const char* key;
  const char* default_value;
  ValueKind kind;
  std::vector<std::string> choices = {};
  const char* help = "";
};

inline const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = {
      {"mode", "synthetic", ValueKind::kChoice, {"synthetic", "dataset"}, "input kind"},
      {"seed", "1", ValueKind::kInt, {}, "RNG seed for simulation"},
      {"robust.kernel", "huber", ValueKind::kChoice, {"huber", "none"}},
      {"robust.delta", "0.02", ValueKind::kDouble, {}, "Huber threshold on the metric (m^2)"},
      {"robust.clamp", "auto", ValueKind::kChoice, {"auto", "always"}},
      {"lm.lambda_init", "0.01", ValueKind::kDouble},
      {"lm.max_iter", "20", ValueKind::kInt},
      {"lm.cost_tol", "1e-8", ValueKind::kDouble},
      {"lm.step_tol", "1e-10", ValueKind::kDouble},
      {"lm.freeze_lambda", "false", ValueKind::kBool},
      {"lm.hessian", "full", ValueKind::kChoice, {"full", "gauss_newton"}},
      {"gauge.fixed_frame", "0", ValueKind::kInt},
      {"map.r_max", "1.0", ValueKind::kDouble},
      {"map.d_max", "4", ValueKind::kInt},
      {"map.n_min", "10", ValueKind::kInt},
      {"map.planarity_max_eigen", "0.0025", ValueKind::kDouble},
      {"map.planarity_ratio", "0.1", ValueKind::kDouble},
      {"map.min_plane_spread", "0.01", ValueKind::kDouble, {}, "middle eigenvalue lower bound for a new plane (m^2)"},
      {"window.size", "10", ValueKind::kInt},
      {"keyframe.gating", "true", ValueKind::kBool},
      {"keyframe.th_time", "0.25", ValueKind::kDouble},
      {"keyframe.th_pos", "0.1", ValueKind::kDouble},
      {"keyframe.th_deg", "0.05", ValueKind::kDouble},
      {"eval.alignment", "se3", ValueKind::kChoice, {"se3", "translation", "none"}},
      {"eval.assoc_tol", "0.02", ValueKind::kDouble},
      {"eval.voxel_size", "0.1", ValueKind::kDouble},
      {"sim.frames", "12", ValueKind::kInt},
      {"sim.planes", "12", ValueKind::kInt},
      {"sim.points", "400", ValueKind::kInt},
      {"sim.sigma", "0.0", ValueKind::kDouble},
      {"sim.extent", "4.0", ValueKind::kDouble},
      {"sim.patch_size", "2.0", ValueKind::kDouble},
      {"sim.outlier_fraction", "0.0", ValueKind::kDouble},
      {"sim.min_separation", "1.8", ValueKind::kDouble, {}, "smallest gap between plane patches (m)"},
      {"sim.dt", "0.5", ValueKind::kDouble},
      {"sim.perturb_trans", "0.02", ValueKind::kDouble},
      {"sim.perturb_rot", "0.005", ValueKind::kDouble},
  };
  return keys;
}

class Config {
 public:
  Config() {
    for (const auto& k : config_keys()) values_[k.key] = k.default_value;
  }

  void set(const std::string& key, const std::string& value) {
    const ConfigKey* spec = find(key);
    if (!spec) throw InvalidInputError("unknown config key '" + key + "'");
    check_value(*spec, value);
    values_[key] = value;
  }

  /// Parses a `key=value` assignment as given to --set.
  void set_assignment(const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) throw InvalidInputError("expected key=value, got '" + assignment + "'");
    set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
  }

  void parse(std::istream& in) {
    std::string line;
    while (std::getline(in, line)) {
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      line = trim(line);
      if (!line.empty()) set_assignment(line);
    }
  }

  void load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InvalidInputError("cannot read config " + path.string());
    parse(in);
  }

  const std::string& get(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) throw InvalidInputError("unknown config key '" + key + "'");
    return it->second;
  }

  double get_double(const std::string& key) const { return std::stod(get(key)); }
  long long get_int(const std::string& key) const { return std::stoll(get(key)); }
  bool get_bool(const std::string& key) const { return get(key) == "true" || get(key) == "1"; }

  /// Keys with a given prefix, sorted, one `key=value` per line.
  std::string to_text(const std::string& prefix = "") const {
    std::string out;
    for (const auto& [k, v] : values_)
      if (k.rfind(prefix, 0) == 0) out += k + "=" + v + "\n";
    return out;
  }

  HuberKernel kernel() const {
    if (get("robust.kernel") == "none") return HuberKernel::off();
    return HuberKernel::with_threshold(get_double("robust.delta"));
  }

  LmConfig lm() const {
    LmConfig c;
    c.lambda_init = get_double("lm.lambda_init");
    c.max_iter = static_cast<int>(get_int("lm.max_iter"));
    c.cost_tol = get_double("lm.cost_tol");
    c.step_tol = get_double("lm.step_tol");
    c.freeze_lambda = get_bool("lm.freeze_lambda");
    c.clamp = get("robust.clamp") == "always" ? ClampPolicy::kAlways : ClampPolicy::kAuto;
    c.hessian = get("lm.hessian") == "gauss_newton" ? HessianMode::kGaussNewton : HessianMode::kFull;
    c.fixed_frame = static_cast<std::size_t>(get_int("gauge.fixed_frame"));
    return c;
  }

  VoxelMapConfig voxel_map() const {
    VoxelMapConfig c;
    c.r_max = get_double("map.r_max");
    c.d_max = static_cast<int>(get_int("map.d_max"));
    c.n_min = static_cast<int>(get_int("map.n_min"));
    c.planarity_max_eigen = get_double("map.planarity_max_eigen");
    c.planarity_ratio = get_double("map.planarity_ratio");
    c.min_plane_spread = get_double("map.min_plane_spread");
    return c;
  }

  synthetic::SceneSpec scene() const {
    synthetic::SceneSpec s;
    s.frames = static_cast<int>(get_int("sim.frames"));
    s.planes = static_cast<int>(get_int("sim.planes"));
    s.points_per_plane = static_cast<int>(get_int("sim.points"));
    s.sigma = get_double("sim.sigma");
    s.extent = get_double("sim.extent");
    s.patch_size = get_double("sim.patch_size");
    s.outlier_fraction = get_double("sim.outlier_fraction");
    s.min_separation = get_double("sim.min_separation");
    s.dt = get_double("sim.dt");
    s.seed = static_cast<std::uint64_t>(get_int("seed"));
    return s;
  }

  AteOptions ate() const {
    AteOptions o;
    const auto& a = get("eval.alignment");
    o.alignment = a == "none" ? Alignment::kNone : a == "translation" ? Alignment::kTranslation : Alignment::kSe3;
    o.max_time_difference = get_double("eval.assoc_tol");
    return o;
  }

 private:
  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
  }

  static const ConfigKey* find(const std::string& key) {
    for (const auto& k : config_keys())
      if (key == k.key) return &k;
    return nullptr;
  }

  static void check_value(const ConfigKey& spec, const std::string& value) {
    auto bad = [&] { throw InvalidInputError("invalid value '" + value + "' for " + spec.key); };
    switch (spec.kind) {
      case ValueKind::kDouble: {
        double v = 0.0;
        const auto r = std::from_chars(value.data(), value.data() + value.size(), v);
        if (r.ec != std::errc() || r.ptr != value.data() + value.size()) bad();
        break;
      }
      case ValueKind::kInt: {
        long long v = 0;
        const auto r = std::from_chars(value.data(), value.data() + value.size(), v);
        if (r.ec != std::errc() || r.ptr != value.data() + value.size() || v < 0) bad();
        break;
      }
      case ValueKind::kBool:
        if (value != "true" && value != "false" && value != "1" && value != "0") bad();
        break;
      case ValueKind::kChoice: {
        bool ok = false;
        for (const auto& c : spec.choices) ok = ok || c == value;
        if (!ok) bad();
        break;
      }
      case ValueKind::kString:
        break;
    }
  }

  std::map<std::string, std::string> values_;
};

}  // namespace rsoba
