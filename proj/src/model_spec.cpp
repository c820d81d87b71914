#include "bnoise/model_spec.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <string_view>

#include "bnoise/errors.hpp"

namespace bnoise {

using nlohmann::json;

namespace {

class Validator {
 public:
  void fail(const std::string& path, const std::string& message) { issues_.push_back({path, message}); }
  bool ok() const noexcept { return issues_.empty(); }
  void raise() const {
    if (!issues_.empty()) throw SchemaError(issues_);
  }

  bool object(const json& j, const std::string& path, const std::set<std::string>& allowed) {
    if (!j.is_object()) {
      fail(path, "expected an object");
      return false;
    }
    for (const auto& [key, value] : j.items()) {
      if (!allowed.count(key)) fail(path + "." + key, "unknown field");
    }
    return true;
  }

  std::optional<double> number(const json& j, const std::string& path) {
    if (!j.is_number()) {
      fail(path, "expected a number");
      return std::nullopt;
    }
    const double v = j.get<double>();
    if (!std::isfinite(v)) {
      fail(path, "expected a finite number");
      return std::nullopt;
    }
    return v;
  }

  std::optional<std::size_t> count(const json& j, const std::string& path) {
    if (!j.is_number_integer() || j.get<long long>() < 1) {
      fail(path, "expected a positive integer");
      return std::nullopt;
    }
    return static_cast<std::size_t>(j.get<long long>());
  }

  std::optional<std::string> string(const json& j, const std::string& path) {
    if (!j.is_string()) {
      fail(path, "expected a string");
      return std::nullopt;
    }
    return j.get<std::string>();
  }

  std::vector<double> vector(const json& j, const std::string& path) {
    std::vector<double> out;
    if (!j.is_array()) {
      fail(path, "expected an array of numbers");
      return out;
    }
    for (std::size_t i = 0; i < j.size(); ++i) {
      auto v = number(j[i], path + "[" + std::to_string(i) + "]");
      out.push_back(v.value_or(0.0));
    }
    return out;
  }

  std::vector<std::vector<double>> matrix(const json& j, const std::string& path) {
    std::vector<std::vector<double>> out;
    if (!j.is_array() || j.empty()) {
      fail(path, "expected a non-empty array of rows");
      return out;
    }
    for (std::size_t i = 0; i < j.size(); ++i) {
      out.push_back(vector(j[i], path + "[" + std::to_string(i) + "]"));
      if (out.back().size() != out.front().size() || out.back().empty()) {
        fail(path + "[" + std::to_string(i) + "]", "rows must be non-empty and of equal length");
      }
    }
    return out;
  }

 private:
  std::vector<SchemaIssue> issues_;
};

const std::set<std::string> kPresets = {"heat_neumann_left", "heat_neumann_right", "transport"};

bool valid_tail_rule(const std::string& s) {
  if (s == "constant" || s == "zero_tail") return true;
  for (const std::string prefix : {"ell2:", "constant:"}) {
    if (s.rfind(prefix, 0) == 0) {
      try {
        std::size_t used = 0;
        const double v = std::stod(s.substr(prefix.size()), &used);
        return used == s.size() - prefix.size() && std::isfinite(v) && v >= 0.0;
      } catch (const std::exception&) {
        return false;
      }
    }
  }
  return false;
}

json matrix_json(const std::vector<std::vector<double>>& m) {
  json out = json::array();
  for (const auto& row : m) out.push_back(row);
  return out;
}

Eigen::MatrixXd to_matrix(const std::vector<std::vector<double>>& rows) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()),
                    static_cast<Eigen::Index>(rows.empty() ? 0 : rows[0].size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t k = 0; k < rows[i].size(); ++k) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i][k];
    }
  }
  return m;
}

ZeroModeNormalization zero_mode_of(const ControlSpec& c) {
  return c.zero_mode.value_or("orthonormal") == "literal" ? ZeroModeNormalization::Literal
                                                          : ZeroModeNormalization::Orthonormal;
}

}  // namespace

bool ModelSpec::is_heat() const noexcept {
  return control.preset == "heat_neumann_left" || control.preset == "heat_neumann_right";
}

json ModelSpec::to_json() const {
  json j;
  j["name"] = name;
  if (modes) j["modes"] = *modes;
  if (spectrum) {
    json s;
    s["type"] = spectrum->type;
    if (spectrum->type == "explicit") {
      s["values"] = spectrum->values;
    } else {
      s["c"] = spectrum->c;
      s["p"] = spectrum->p;
      if (spectrum->include_zero_mode) s["include_zero_mode"] = *spectrum->include_zero_mode;
    }
    j["spectrum"] = s;
  }
  if (noise_countable) {
    j["noise_dim"] = "countable";
  } else if (noise_dim) {
    j["noise_dim"] = *noise_dim;
  }
  json c;
  if (!control.preset.empty()) {
    c["preset"] = control.preset;
    if (control.zero_mode) c["zero_mode"] = *control.zero_mode;
    if (control.r) c["r"] = *control.r;
  } else {
    c["type"] = "explicit";
    c["beta"] = matrix_json(control.beta);
  }
  if (control.tail_rule) c["tail_rule"] = *control.tail_rule;
  j["control"] = c;
  if (observation) {
    json o;
    o["gamma"] = matrix_json(observation->gamma);
    if (observation->tail_rule) o["tail_rule"] = *observation->tail_rule;
    j["observation"] = o;
  }
  if (perturbation) {
    json p;
    p["type"] = perturbation->type;
    if (perturbation->b_preset.empty()) {
      p["b"] = perturbation->b;
    } else {
      p["b"] = perturbation->b_preset;
    }
    if (perturbation->m_constant_one) {
      p["m"] = "constant_one";
    } else {
      p["m"] = perturbation->m;
    }
    j["perturbation"] = p;
  }
  return j;
}

ModelSpec model_from_json(const json& doc) {
  Validator v;
  ModelSpec spec;
  if (!v.object(doc, "$", {"name", "modes", "spectrum", "noise_dim", "control", "observation",
                           "perturbation"})) {
    v.raise();
  }
  if (!doc.contains("name")) {
    v.fail("$.name", "required field missing");
  } else if (auto s = v.string(doc["name"], "$.name")) {
    spec.name = *s;
  }
  if (doc.contains("modes")) spec.modes = v.count(doc["modes"], "$.modes");

  if (doc.contains("spectrum")) {
    const json& s = doc["spectrum"];
    SpectrumSpec sp;
    if (v.object(s, "$.spectrum", {"type", "values", "c", "p", "include_zero_mode"})) {
      const auto type = s.contains("type") ? v.string(s["type"], "$.spectrum.type") : std::nullopt;
      if (!type || (*type != "explicit" && *type != "power")) {
        v.fail("$.spectrum.type", "expected \"explicit\" or \"power\"");
      } else {
        sp.type = *type;
        if (sp.type == "explicit") {
          for (const char* key : {"c", "p", "include_zero_mode"}) {
            if (s.contains(key)) v.fail(std::string("$.spectrum.") + key, "not allowed for an explicit spectrum");
          }
          if (!s.contains("values")) {
            v.fail("$.spectrum.values", "required field missing");
          } else {
            sp.values = v.vector(s["values"], "$.spectrum.values");
            if (sp.values.empty()) v.fail("$.spectrum.values", "need at least one eigenvalue");
          }
        } else {
          if (s.contains("values")) v.fail("$.spectrum.values", "not allowed for a power spectrum");
          for (const char* key : {"c", "p"}) {
            if (!s.contains(key)) {
              v.fail(std::string("$.spectrum.") + key, "required field missing");
              continue;
            }
            auto x = v.number(s[key], std::string("$.spectrum.") + key);
            if (x && !(*x > 0.0)) v.fail(std::string("$.spectrum.") + key, "must be > 0");
            if (x) (std::string(key) == "c" ? sp.c : sp.p) = *x;
          }
          if (s.contains("include_zero_mode")) {
            if (!s["include_zero_mode"].is_boolean()) {
              v.fail("$.spectrum.include_zero_mode", "expected a boolean");
            } else {
              sp.include_zero_mode = s["include_zero_mode"].get<bool>();
            }
          }
        }
      }
    }
    spec.spectrum = sp;
  }

  if (doc.contains("noise_dim")) {
    const json& d = doc["noise_dim"];
    if (d.is_string()) {
      if (d.get<std::string>() == "countable") {
        spec.noise_countable = true;
      } else {
        v.fail("$.noise_dim", "expected a positive integer or \"countable\"");
      }
    } else {
      spec.noise_dim = v.count(d, "$.noise_dim");
    }
  }

  if (!doc.contains("control")) {
    v.fail("$.control", "required field missing");
  } else {
    const json& c = doc["control"];
    if (v.object(c, "$.control", {"preset", "type", "beta", "tail_rule", "zero_mode", "r"})) {
      if (c.contains("preset")) {
        if (c.contains("type") || c.contains("beta")) {
          v.fail("$.control", "use either a preset or an explicit beta table, not both");
        }
        auto p = v.string(c["preset"], "$.control.preset");
        if (p && !kPresets.count(*p)) {
          v.fail("$.control.preset", "unknown preset \"" + *p + "\"");
        } else if (p) {
          spec.control.preset = *p;
        }
        if (c.contains("tail_rule")) v.fail("$.control.tail_rule", "presets carry their own tail rule");
      } else {
        const auto type = c.contains("type") ? v.string(c["type"], "$.control.type") : std::nullopt;
        if (!type || *type != "explicit") v.fail("$.control.type", "expected \"explicit\" (or a preset)");
        if (!c.contains("beta")) {
          v.fail("$.control.beta", "required field missing");
        } else {
          spec.control.beta = v.matrix(c["beta"], "$.control.beta");
        }
        if (c.contains("tail_rule")) {
          auto t = v.string(c["tail_rule"], "$.control.tail_rule");
          if (t && !valid_tail_rule(*t)) {
            v.fail("$.control.tail_rule", "expected \"constant\", \"constant:<w>\", \"zero_tail\" or \"ell2:<bound>\"");
          }
          spec.control.tail_rule = t;
        }
      }
      if (c.contains("zero_mode")) {
        auto z = v.string(c["zero_mode"], "$.control.zero_mode");
        if (!spec.is_heat()) v.fail("$.control.zero_mode", "only meaningful for heat presets");
        if (z && *z != "orthonormal" && *z != "literal") {
          v.fail("$.control.zero_mode", "expected \"orthonormal\" or \"literal\"");
        }
        spec.control.zero_mode = z;
      }
      if (c.contains("r")) {
        auto r = v.number(c["r"], "$.control.r");
        if (!spec.is_transport()) v.fail("$.control.r", "only meaningful for the transport preset");
        if (r && !(*r > 0.0)) v.fail("$.control.r", "must be > 0");
        spec.control.r = r;
      }
    }
  }

  if (doc.contains("observation")) {
    const json& o = doc["observation"];
    ObservationSpec ob;
    if (v.object(o, "$.observation", {"gamma", "tail_rule"})) {
      if (!o.contains("gamma")) {
        v.fail("$.observation.gamma", "required field missing");
      } else {
        ob.gamma = v.matrix(o["gamma"], "$.observation.gamma");
      }
      if (o.contains("tail_rule")) {
        auto t = v.string(o["tail_rule"], "$.observation.tail_rule");
        if (t && !valid_tail_rule(*t)) v.fail("$.observation.tail_rule", "unrecognized tail rule");
        ob.tail_rule = t;
      }
    }
    spec.observation = ob;
  }

  if (doc.contains("perturbation")) {
    const json& p = doc["perturbation"];
    PerturbationSpec ps;
    if (v.object(p, "$.perturbation", {"type", "b", "m"})) {
      if (!p.contains("type") || !p["type"].is_string() || p["type"].get<std::string>() != "rank_one") {
        v.fail("$.perturbation.type", "expected \"rank_one\"");
      }
      if (!p.contains("b")) {
        v.fail("$.perturbation.b", "required field missing");
      } else if (p["b"].is_string()) {
        ps.b_preset = p["b"].get<std::string>();
        if (ps.b_preset != "heat_neumann_left" && ps.b_preset != "heat_neumann_right") {
          v.fail("$.perturbation.b", "expected a heat preset name or an array");
        } else if (!spec.is_heat()) {
          v.fail("$.perturbation.b", "heat presets need a heat model");
        }
      } else {
        ps.b = v.vector(p["b"], "$.perturbation.b");
      }
      if (!p.contains("m")) {
        v.fail("$.perturbation.m", "required field missing");
      } else if (p["m"].is_string()) {
        if (p["m"].get<std::string>() != "constant_one") {
          v.fail("$.perturbation.m", "expected \"constant_one\" or an array");
        } else if (!spec.is_heat()) {
          v.fail("$.perturbation.m", "\"constant_one\" needs a heat model");
        }
        ps.m_constant_one = true;
      } else {
        ps.m = v.vector(p["m"], "$.perturbation.m");
      }
    }
    spec.perturbation = ps;
  }

  // Cross-field consistency.
  if (v.ok()) {
    if (spec.is_transport()) {
      if (spec.spectrum) v.fail("$.spectrum", "the transport model has no spectrum");
      if (spec.modes) v.fail("$.modes", "the transport model has no modes");
      if (spec.observation) v.fail("$.observation", "not supported for the transport model");
      if (spec.perturbation) v.fail("$.perturbation", "not supported for the transport model");
    } else {
      if (spec.noise_countable) {
        v.fail("$.noise_dim", "\"countable\" noise needs the transport preset");
      }
      if (spec.is_heat()) {
        if (!spec.modes) v.fail("$.modes", "required for heat presets");
        if (spec.noise_dim && *spec.noise_dim != 1) v.fail("$.noise_dim", "heat presets have one channel");
        if (spec.spectrum && (spec.spectrum->type != "power" || spec.spectrum->c != 1.0 ||
                              spec.spectrum->p != 2.0 || !spec.spectrum->include_zero_mode.value_or(true))) {
          v.fail("$.spectrum", "inconsistent with the heat preset (power c = 1, p = 2, zero mode)");
        }
      } else {
        std::size_t n = 0;
        if (!spec.spectrum) {
          v.fail("$.spectrum", "required for explicit control tables");
        } else if (spec.spectrum->type == "explicit") {
          n = spec.spectrum->values.size();
          if (spec.modes && *spec.modes != n) {
            v.fail("$.modes", "explicit spectrum has " + std::to_string(n) + " values");
          }
        } else if (!spec.modes) {
          v.fail("$.modes", "required for power spectra");
        } else {
          n = *spec.modes;
        }
        if (n && spec.control.beta.size() != n) {
          v.fail("$.control.beta", "has " + std::to_string(spec.control.beta.size()) +
                                        " rows, expected one per mode (" + std::to_string(n) + ")");
        }
        if (!spec.control.beta.empty() && spec.noise_dim &&
            spec.control.beta[0].size() != *spec.noise_dim) {
          v.fail("$.control.beta", "has " + std::to_string(spec.control.beta[0].size()) +
                                        " columns, noise_dim is " + std::to_string(*spec.noise_dim));
        }
      }
      const std::size_t n = spec.is_heat() ? spec.modes.value_or(0)
                            : spec.spectrum && spec.spectrum->type == "explicit"
                                ? spec.spectrum->values.size()
                                : spec.modes.value_or(0);
      if (spec.observation && n && spec.observation->gamma.size() != n) {
        v.fail("$.observation.gamma", "expected one row per mode (" + std::to_string(n) + ")");
      }
      if (spec.perturbation && n) {
        if (spec.perturbation->b_preset.empty() && spec.perturbation->b.size() != n) {
          v.fail("$.perturbation.b", "expected " + std::to_string(n) + " coefficients");
        }
        if (!spec.perturbation->m_constant_one && spec.perturbation->m.size() != n) {
          v.fail("$.perturbation.m", "expected " + std::to_string(n) + " coefficients");
        }
      }
    }
  }
  v.raise();
  return spec;
}

ModelSpec parse_model_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw SchemaError({{"$", std::string("malformed JSON: ") + e.what()}});
  }
  return model_from_json(doc);
}

ModelSpec parse_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot read model file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_model_text(buf.str());
}

TailRule parse_tail_rule(const std::optional<std::string>& text, const std::string& path,
                         double last_weight) {
  if (!text) return UnknownTail{};
  const std::string& s = *text;
  if (s == "zero_tail") return ZeroTail{};
  if (s == "constant") return ConstantWeightTail{last_weight};
  auto amount = [&](std::string_view digits) {
    double v = 0.0;
    const auto [end, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), v);
    if (ec != std::errc() || end != digits.data() + digits.size() || !std::isfinite(v) || v < 0.0) {
      throw SchemaError({{path, "tail rule \"" + s + "\" needs a finite nonnegative number"}});
    }
    return v;
  };
  const std::string_view view = s;
  if (view.starts_with("constant:")) return ConstantWeightTail{amount(view.substr(9))};
  if (view.starts_with("ell2:")) return SquareSummableTail{amount(view.substr(5))};
  throw SchemaError({{path, "unrecognized tail rule \"" + s + "\""}});
}

BuiltModel build_model(const ModelSpec& spec, std::optional<std::size_t> modes_override) {
  if (spec.is_transport()) {
    return build_transport(spec.control.r.value_or(1.0),
                           spec.noise_countable ? std::nullopt
                                                : std::optional<std::size_t>(spec.noise_dim.value_or(1)));
  }
  DiagonalSystem sys;
  if (spec.is_heat()) {
    const std::size_t n = modes_override.value_or(*spec.modes);
    const Side side = spec.control.preset == "heat_neumann_left" ? Side::Left : Side::Right;
    const ZeroModeNormalization norm = zero_mode_of(spec.control);
    std::optional<std::vector<double>> feedback;
    if (spec.perturbation) {
      if (spec.perturbation->m_constant_one) {
        feedback = heat_constant_feedback(n, norm);
      } else {
        if (modes_override && *modes_override != spec.perturbation->m.size()) {
          throw InvalidArgument("--modes cannot resize an explicit perturbation array");
        }
        feedback = spec.perturbation->m;
      }
    }
    HeatNeumannModel heat = build_heat_neumann(side, n, feedback, norm);
    sys.model = heat.model;
    sys.control = heat.control;
    if (spec.perturbation) {
      RankOnePerturbation p;
      if (spec.perturbation->b_preset.empty()) {
        p.b = spec.perturbation->b;
        if (p.b.size() != n) throw InvalidArgument("--modes cannot resize an explicit perturbation array");
      } else {
        const Side bs = spec.perturbation->b_preset == "heat_neumann_left" ? Side::Left : Side::Right;
        const HeatNeumannModel b_model = build_heat_neumann(bs, n, std::nullopt, norm);
        p.b.assign(b_model.control.values().data(), b_model.control.values().data() + n);
      }
      p.m = *feedback;
      sys.perturbation = p;
    }
    sys.heat = std::move(heat);
  } else {
    const SpectrumSpec& sp = *spec.spectrum;
    if (sp.type == "explicit") {
      if (modes_override && *modes_override != sp.values.size()) {
        throw InvalidArgument("--modes cannot resize an explicit spectrum");
      }
      sys.model = DiagonalModel::explicit_spectrum(sp.values);
    } else {
      if (modes_override && *modes_override != *spec.modes) {
        throw InvalidArgument("--modes cannot resize an explicit control table");
      }
      sys.model = DiagonalModel::power_family(sp.c, sp.p, *spec.modes, sp.include_zero_mode.value_or(true));
    }
    const Eigen::MatrixXd beta = to_matrix(spec.control.beta);
    const double last_w = beta.row(beta.rows() - 1).squaredNorm();
    sys.control = ControlCoefficients(beta, parse_tail_rule(spec.control.tail_rule, "$.control.tail_rule", last_w));
    if (spec.perturbation) {
      sys.perturbation = RankOnePerturbation{spec.perturbation->b, spec.perturbation->m, ZeroTail{}};
    }
  }
  if (spec.observation) {
    const Eigen::MatrixXd gamma = to_matrix(spec.observation->gamma);
    if (static_cast<std::size_t>(gamma.rows()) != sys.model.mode_count()) {
      throw InvalidArgument("--modes cannot resize an explicit observation table");
    }
    const double last_w = gamma.row(gamma.rows() - 1).squaredNorm();
    sys.observation = ObservationCoefficients(
        gamma, parse_tail_rule(spec.observation->tail_rule, "$.observation.tail_rule", last_w));
  }
  return sys;
}

}  // namespace bnoise
