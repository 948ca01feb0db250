#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>
#include <vector>

#include <fmt/format.h>

#include "ahflow/error.hpp"

namespace ahflow {

class ConfigError : public Error {
 public:
  using Error::Error;
};

enum class ValueType { integer, real, boolean, text, real_list };

/// One schema entry. Keys outside any section are written without a prefix
/// ("n"); section keys as "section.key".
struct ConfigKey {
  std::string name;
  ValueType type;
  std::string fallback;
  std::vector<std::string> choices = {};  ///< allowed values for text keys (empty: any)
  std::string help = {};
};

inline const std::vector<ConfigKey>& config_schema() {
  static const std::vector<ConfigKey> schema = {
      {"n", ValueType::integer, "3", {}, "manifold dimension"},
      {"r_max", ValueType::real, "10", {}, "outer radius of the grid"},
      {"h", ValueType::real, "0.05", {}, "grid spacing"},
      {"mu", ValueType::real, "1", {}, "weight exponent, in (0, n-1)"},
      {"k", ValueType::integer, "2", {}, "derivative order of the weighted norm"},
      {"metric.profile", ValueType::text, "bump", {"hyperbolic", "bump", "random", "snapshot"}, "initial metric"},
      {"metric.amplitude", ValueType::real, "1", {}, "A in w = A r^2 exp(-r^2)"},
      {"metric.snapshot", ValueType::text, "", {}, "snapshot file for profile = snapshot"},
      {"flow.kind", ValueType::text, "deturck", {"ricci", "deturck"}, "ungauged flow or DeTurck flow with reference g_h"},
      {"flow.normalized", ValueType::boolean, "true"},
      {"flow.t_end", ValueType::real, "1"},
      {"flow.integrator", ValueType::text, "explicit-rk4", {"explicit-rk4", "semi-implicit"}},
      {"flow.cfl", ValueType::real, "0.5", {}, "fraction of the explicit step bound"},
      {"flow.record_interval", ValueType::real, "0.1", {}, "flow time between recorded snapshots"},
      {"flow.segments", ValueType::integer, "1", {}, "equal chaining segments for gauge-check"},
      {"spectrum.normalized", ValueType::boolean, "true"},
      {"sector.omega", ValueType::real, "0.5"},
      {"sector.theta", ValueType::real, "1.0471975511965976"},
      {"sector.rays", ValueType::integer, "32"},
      {"sector.radii", ValueType::integer, "64"},
      {"sector.s_min", ValueType::real, "0.01"},
      {"sector.s_max", ValueType::real, "10000"},
      {"indicial.operator", ValueType::text, "scalar", {"scalar", "lichnerowicz"}},
      {"indicial.lambda", ValueType::real, "0"},
      {"indicial.gamma_min", ValueType::real, "0.05"},
      {"indicial.gamma_max", ValueType::real, "6"},
      {"indicial.gamma_step", ValueType::real, "0.05"},
      {"experiment.name", ValueType::text, "convergence",
       {"convergence", "stability", "dependence", "gauge", "curvature-scan"}},
      {"experiment.epsilon", ValueType::real, "0.001", {}, "convergence target in weighted C^0"},
      {"experiment.min_r2", ValueType::real, "0.99"},
      {"experiment.fit_fraction", ValueType::real, "0.5", {}, "trailing fraction of records used by the fit"},
      {"experiment.deltas", ValueType::real_list, "0.001, 0.0001"},
      {"experiment.tau", ValueType::real, "1"},
      {"experiment.levels", ValueType::real_list, "0.1, 0.05, 0.025", {}, "grid spacings for gauge"},
      {"experiment.amplitudes", ValueType::real_list, "0, 0.25, 0.5, 0.75, 1"},
      {"experiment.bumps", ValueType::integer, "5", {}, "perturbation profiles used by stability (1..5)"},
  };
  return schema;
}

using ConfigValue = std::variant<long, double, bool, std::string, std::vector<double>>;

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::optional<double> to_real(std::string_view s) {
  s = trim(s);
  double v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

inline std::optional<long> to_integer(std::string_view s) {
  s = trim(s);
  long v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) return std::nullopt;
  return v;
}

inline const ConfigKey* find_key(std::string_view name) {
  for (const auto& k : config_schema())
    if (k.name == name) return &k;
  return nullptr;
}

inline const char* type_name(ValueType t) {
  switch (t) {
    case ValueType::integer: return "an integer";
    case ValueType::real: return "a number";
    case ValueType::boolean: return "true or false";
    case ValueType::text: return "a word";
    case ValueType::real_list: return "a comma-separated list of numbers";
  }
  return "?";
}

/// Converts `raw` to the key's type; `where` prefixes error messages.
inline ConfigValue convert(const ConfigKey& key, std::string_view raw, const std::string& where) {
  raw = trim(raw);
  auto mismatch = [&] {
    return ConfigError(fmt::format("{}: {} expects {}, got '{}'", where, key.name, type_name(key.type), raw));
  };
  switch (key.type) {
    case ValueType::integer: {
      if (auto v = to_integer(raw)) return *v;
      throw mismatch();
    }
    case ValueType::real: {
      if (auto v = to_real(raw)) return *v;
      throw mismatch();
    }
    case ValueType::boolean:
      if (raw == "true") return true;
      if (raw == "false") return false;
      throw mismatch();
    case ValueType::text: {
      std::string v(raw);
      if (!key.choices.empty() && std::find(key.choices.begin(), key.choices.end(), v) == key.choices.end()) {
        std::string list;
        for (const auto& c : key.choices) list += (list.empty() ? "" : ", ") + c;
        throw ConfigError(fmt::format("{}: {} must be one of {{{}}}, got '{}'", where, key.name, list, v));
      }
      return v;
    }
    case ValueType::real_list: {
      std::vector<double> out;
      std::string_view rest = raw;
      while (!rest.empty()) {
        const auto comma = rest.find(',');
        const auto item = rest.substr(0, comma);
        auto v = to_real(item);
        if (!v) throw mismatch();
        out.push_back(*v);
        if (comma == std::string_view::npos) break;
        rest.remove_prefix(comma + 1);
      }
      if (out.empty()) throw mismatch();
      return out;
    }
  }
  throw mismatch();
}

inline std::string render(const ConfigValue& v) {
  return std::visit(
      [](const auto& x) -> std::string {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, bool>) return x ? "true" : "false";
        else if constexpr (std::is_same_v<T, std::string>) return x;
        else if constexpr (std::is_same_v<T, double>) return fmt::format("{}", x);
        else if constexpr (std::is_same_v<T, long>) return fmt::format("{}", x);
        else {
          std::string s;
          for (double d : x) s += (s.empty() ? "" : ", ") + fmt::format("{}", d);
          return s;
        }
      },
      v);
}

}  // namespace detail

/// Parsed configuration: every schema key has a value, either from the text,
/// from an override, or from its default.
class Config {
 public:
  struct Entry {
    ConfigValue value;
    std::string origin;  ///< "default", "line N" or "--set"
  };

  /// Parses "key = value" lines with optional [section] headers. '#' and ';'
  /// start comments.
  static Config parse(std::string_view text) {
    Config cfg;
    std::map<std::string, int> seen;
    std::string section;
    int lineno = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
      const auto end = std::min(text.find('\n', pos), text.size());
      std::string_view line = text.substr(pos, end - pos);
      pos = end + 1;
      ++lineno;
      if (const auto c = line.find_first_of("#;"); c != std::string_view::npos) line = line.substr(0, c);
      line = detail::trim(line);
      if (line.empty()) {
        if (end == text.size()) break;
        continue;
      }
      const std::string where = fmt::format("line {}", lineno);
      if (line.front() == '[') {
        if (line.back() != ']') throw ConfigError(where + ": malformed section header");
        section = std::string(detail::trim(line.substr(1, line.size() - 2)));
        bool known = false;
        for (const auto& k : config_schema())
          if (k.name.rfind(section + ".", 0) == 0) known = true;
        if (!known) throw ConfigError(fmt::format("{}: unknown section [{}]", where, section));
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string_view::npos) throw ConfigError(where + ": expected 'key = value'");
      const std::string key(detail::trim(line.substr(0, eq)));
      const std::string full = section.empty() ? key : section + "." + key;
      const ConfigKey* schema = detail::find_key(full);
      if (!schema) throw ConfigError(fmt::format("{}: unknown key '{}'", where, full));
      if (auto it = seen.find(full); it != seen.end())
        throw ConfigError(fmt::format("line {}: duplicate key '{}' (first set on line {})", lineno, full, it->second));
      seen[full] = lineno;
      cfg.entries_[full] = {detail::convert(*schema, line.substr(eq + 1), where), where};
      if (end == text.size()) break;
    }
    cfg.fill_defaults();
    cfg.validate();
    return cfg;
  }

  /// Applies a "key=value" override on top of the parsed values.
  void set(std::string_view assignment) { apply({std::string(assignment)}); }

  /// Applies several overrides, later ones winning, and validates once at the
  /// end so that keys constraining each other can be set in any order.
  void apply(const std::vector<std::string>& assignments) {
    auto next = entries_;
    for (const std::string_view assignment : assignments) {
      const auto eq = assignment.find('=');
      if (eq == std::string_view::npos) throw ConfigError(fmt::format("--set {}: expected key=value", assignment));
      const std::string key(detail::trim(assignment.substr(0, eq)));
      const ConfigKey* schema = detail::find_key(key);
      if (!schema) throw ConfigError(fmt::format("--set {}: unknown key '{}'", assignment, key));
      next[key] = {detail::convert(*schema, assignment.substr(eq + 1), "--set"), "--set"};
    }
    std::swap(entries_, next);
    try {
      validate();
    } catch (...) {
      std::swap(entries_, next);
      throw;
    }
  }

  long integer(const std::string& key) const { return get<long>(key); }
  double real(const std::string& key) const { return get<double>(key); }
  bool boolean(const std::string& key) const { return get<bool>(key); }
  const std::string& text(const std::string& key) const { return get<std::string>(key); }
  const std::vector<double>& list(const std::string& key) const { return get<std::vector<double>>(key); }
  const std::string& origin(const std::string& key) const { return entry(key).origin; }

  /// Canonical text with every key, in schema order, defaults marked.
  std::string echo() const {
    std::string out;
    std::string section;
    for (const auto& k : config_schema()) {
      const auto dot = k.name.find('.');
      const std::string sec = dot == std::string::npos ? "" : k.name.substr(0, dot);
      const std::string leaf = dot == std::string::npos ? k.name : k.name.substr(dot + 1);
      if (sec != section) {
        out += fmt::format("\n[{}]\n", sec);
        section = sec;
      }
      const auto& e = entry(k.name);
      out += fmt::format("{} = {}{}\n", leaf, detail::render(e.value), e.origin == "default" ? "  # default" : "");
    }
    return out;
  }

 private:
  std::map<std::string, Entry> entries_;

  const Entry& entry(const std::string& key) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) throw ConfigError(fmt::format("no configuration key '{}'", key));
    return it->second;
  }

  template <class T>
  const T& get(const std::string& key) const {
    const auto& e = entry(key);
    if (const T* v = std::get_if<T>(&e.value)) return *v;
    throw ConfigError(fmt::format("configuration key '{}' read with the wrong type", key));
  }

  void fill_defaults() {
    for (const auto& k : config_schema())
      if (!entries_.count(k.name)) entries_[k.name] = {detail::convert(k, k.fallback, "default"), "default"};
  }

  void range(const std::string& key, bool ok, const std::string& rule) const {
    if (!ok) throw ConfigError(fmt::format("{}: {} = {} out of range, {}", origin(key), key, detail::render(entry(key).value), rule));
  }

  void validate() const {
    const long n = integer("n");
    range("n", n >= 2 && n <= 12, "need 2 <= n <= 12");
    range("mu", real("mu") > 0 && real("mu") < static_cast<double>(n - 1),
          fmt::format("need mu in (0, n-1) = (0, {})", n - 1));
    range("k", integer("k") >= 0 && integer("k") <= 2, "need k in {0, 1, 2}");
    range("r_max", real("r_max") > 0, "need r_max > 0");
    range("h", real("h") > 0 && real("h") < real("r_max") / 8, "need 0 < h < r_max / 8");
    range("flow.t_end", real("flow.t_end") > 0, "need t_end > 0");
    range("flow.cfl", real("flow.cfl") > 0 && real("flow.cfl") <= 1, "need cfl in (0, 1]");
    range("flow.record_interval", real("flow.record_interval") > 0, "need record_interval > 0");
    range("flow.segments", integer("flow.segments") >= 1, "need segments >= 1");
    range("metric.amplitude", real("metric.amplitude") >= 0, "need amplitude >= 0");
    range("sector.theta", real("sector.theta") > 0 && real("sector.theta") < std::numbers::pi / 2, "need theta in (0, pi/2)");
    range("sector.rays", integer("sector.rays") >= 1, "need rays >= 1");
    range("sector.radii", integer("sector.radii") >= 2, "need radii >= 2");
    range("sector.s_min", real("sector.s_min") > 0 && real("sector.s_min") < real("sector.s_max"),
          "need 0 < s_min < s_max");
    range("indicial.gamma_step", real("indicial.gamma_step") > 0, "need gamma_step > 0");
    range("indicial.gamma_max", real("indicial.gamma_max") > real("indicial.gamma_min"), "need gamma_max > gamma_min");
    range("experiment.epsilon", real("experiment.epsilon") > 0, "need epsilon > 0");
    range("experiment.min_r2", real("experiment.min_r2") > 0 && real("experiment.min_r2") <= 1, "need min_r2 in (0, 1]");
    range("experiment.fit_fraction", real("experiment.fit_fraction") > 0 && real("experiment.fit_fraction") <= 1,
          "need fit_fraction in (0, 1]");
    range("experiment.tau", real("experiment.tau") > 0, "need tau > 0");
    range("experiment.bumps", integer("experiment.bumps") >= 1 && integer("experiment.bumps") <= 5, "need 1..5");
    const auto& d = list("experiment.deltas");
    range("experiment.deltas", std::all_of(d.begin(), d.end(), [](double x) { return x > 0; }), "need positive deltas");
    const auto& l = list("experiment.levels");
    range("experiment.levels", l.size() >= 2 && std::all_of(l.begin(), l.end(), [](double x) { return x > 0; }),
          "need at least two positive spacings");
    if (text("metric.profile") == "snapshot")
      range("metric.snapshot", !text("metric.snapshot").empty(), "profile = snapshot needs a file");
  }
};

}  // namespace ahflow
