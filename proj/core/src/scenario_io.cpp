#include "choicectl/scenario_io.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <sstream>

#include <json.hpp>

namespace choicectl {

namespace {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

[[noreturn]] void fail(const std::string& context, const std::string& what) {
  throw ParseError("scenario document: " + context + ": " + what);
}

void check_keys(const json& obj, const std::string& context,
                std::initializer_list<const char*> allowed) {
  for (const auto& item : obj.items()) {
    bool known = false;
    for (const char* key : allowed)
      if (item.key() == key) {
        known = true;
        break;
      }
    if (!known) fail(context, "unknown key '" + item.key() + "'");
  }
}

double require_number(const json& obj, const std::string& context,
                      const char* key) {
  if (!obj.contains(key)) fail(context, std::string("missing key '") + key + "'");
  if (!obj[key].is_number()) fail(context, std::string("'") + key + "' must be a number");
  return obj[key].get<double>();
}

Matrix parse_matrix(const json& value, const std::string& context) {
  if (!value.is_array() || value.empty())
    fail(context, "expected a non-empty array of rows");
  const auto rows = static_cast<Eigen::Index>(value.size());
  if (!value[0].is_array() || value[0].empty())
    fail(context, "each row must be a non-empty array");
  const auto cols = static_cast<Eigen::Index>(value[0].size());
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    if (!value[r].is_array() ||
        static_cast<Eigen::Index>(value[r].size()) != cols)
      fail(context, "ragged rows");
    for (Eigen::Index c = 0; c < cols; ++c) {
      if (!value[r][c].is_number()) fail(context, "non-numeric entry");
      m(r, c) = value[r][c].get<double>();
    }
  }
  return m;
}

Vector parse_vector(const json& value, const std::string& context) {
  if (!value.is_array()) fail(context, "expected an array");
  Vector v(static_cast<Eigen::Index>(value.size()));
  for (std::size_t k = 0; k < value.size(); ++k) {
    if (!value[k].is_number()) fail(context, "non-numeric entry");
    v(static_cast<Eigen::Index>(k)) = value[k].get<double>();
  }
  return v;
}

ordered_json matrix_to_json(const Matrix& m) {
  ordered_json rows = ordered_json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    ordered_json row = ordered_json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

ordered_json vector_to_json(const Vector& v) {
  ordered_json out = ordered_json::array();
  for (Eigen::Index k = 0; k < v.size(); ++k) out.push_back(v(k));
  return out;
}

std::string line_context(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t k = 0; k < byte && k < text.size(); ++k) {
    if (text[k] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

}  // namespace

const char* controller_kind_name(ControllerKind kind) {
  switch (kind) {
    case ControllerKind::open_loop: return "open_loop";
    case ControllerKind::feedback_hybrid: return "feedback_hybrid";
    case ControllerKind::approach: return "approach";
  }
  return "open_loop";
}

ScenarioDocument parse_scenario_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& err) {
    fail("parse error at " + line_context(text, err.byte), err.what());
  }
  if (!doc.is_object()) fail("top level", "expected an object");
  check_keys(doc, "top level",
             {"version", "system", "horizon", "x0", "targets", "noise",
              "penalty_f", "controller"});

  if (!doc.contains("version") || !doc["version"].is_number_integer() ||
      doc["version"].get<int>() != 1)
    fail("top level", "missing or unsupported 'version' (expected 1)");

  ScenarioDocument out;
  Scenario& sc = out.scenario;

  if (!doc.contains("system") || !doc["system"].is_object())
    fail("system", "missing or not an object");
  const json& system = doc["system"];
  check_keys(system, "system", {"A", "B"});
  if (!system.contains("A")) fail("system", "missing 'A'");
  sc.system.a = parse_matrix(system["A"], "system.A");
  if (!system.contains("B") || !system["B"].is_array() || system["B"].empty())
    fail("system.B", "expected a non-empty array of per-agent matrices");
  for (std::size_t l = 0; l < system["B"].size(); ++l)
    sc.system.inputs.push_back(parse_matrix(
        system["B"][l], "system.B[" + std::to_string(l) + "]"));

  if (!doc.contains("horizon") || !doc["horizon"].is_object())
    fail("horizon", "missing or not an object");
  const json& horizon = doc["horizon"];
  check_keys(horizon, "horizon", {"t0", "T", "switch_time"});
  sc.t0 = require_number(horizon, "horizon", "t0");
  sc.horizon_end = require_number(horizon, "horizon", "T");
  if (horizon.contains("switch_time"))
    sc.switch_time = require_number(horizon, "horizon", "switch_time");

  if (!doc.contains("x0")) fail("x0", "missing");
  sc.x0 = parse_vector(doc["x0"], "x0");

  if (!doc.contains("targets") || !doc["targets"].is_object())
    fail("targets", "missing or not an object");
  const json& targets = doc["targets"];
  check_keys(targets, "targets", {"dims", "entries"});
  if (!targets.contains("dims") || !targets["dims"].is_array())
    fail("targets.dims", "expected an array of choice counts");
  std::vector<int> dims;
  for (const auto& d : targets["dims"]) {
    if (!d.is_number_integer() || d.get<int>() < 1)
      fail("targets.dims", "choice counts must be integers >= 1");
    dims.push_back(d.get<int>());
  }
  if (!targets.contains("entries") || !targets["entries"].is_array())
    fail("targets.entries", "expected a row-major array of state vectors");
  std::vector<Vector> entries;
  for (std::size_t k = 0; k < targets["entries"].size(); ++k)
    entries.push_back(parse_vector(
        targets["entries"][k], "targets.entries[" + std::to_string(k) + "]"));
  try {
    sc.targets = TargetTensor(dims, std::move(entries));
  } catch (const Error& err) {
    fail("targets", err.what());
  }

  if (doc.contains("noise")) {
    const json& noise = doc["noise"];
    if (!noise.is_object()) fail("noise", "expected an object");
    check_keys(noise, "noise", {"sigma", "hold_interval", "seed", "channels"});
    NoiseConfig cfg;
    cfg.sigma = require_number(noise, "noise", "sigma");
    cfg.hold_interval = require_number(noise, "noise", "hold_interval");
    if (!noise.contains("seed") || !noise["seed"].is_number_unsigned())
      fail("noise", "missing or negative 'seed'");
    cfg.seed = noise["seed"].get<std::uint64_t>();
    if (noise.contains("channels")) {
      if (!noise["channels"].is_array())
        fail("noise.channels", "expected an array of state indices");
      for (const auto& c : noise["channels"]) {
        if (!c.is_number_integer())
          fail("noise.channels", "indices must be integers");
        cfg.channels.push_back(c.get<int>());
      }
    }
    sc.noise = std::move(cfg);
  }

  if (doc.contains("penalty_f")) {
    if (!doc["penalty_f"].is_number())
      fail("penalty_f", "expected a number");
    sc.penalty_weight = doc["penalty_f"].get<double>();
  }

  if (!doc.contains("controller") || !doc["controller"].is_string())
    fail("controller", "missing or not a string");
  const std::string kind = doc["controller"].get<std::string>();
  if (kind == "open_loop")
    out.controller = ControllerKind::open_loop;
  else if (kind == "feedback_hybrid")
    out.controller = ControllerKind::feedback_hybrid;
  else if (kind == "approach")
    out.controller = ControllerKind::approach;
  else
    fail("controller",
         "expected one of open_loop | feedback_hybrid | approach");

  try {
    sc.validate();
  } catch (const Error& err) {
    fail("validation", err.what());
  }
  return out;
}

ScenarioDocument load_scenario_file(const std::string& path) {
  return parse_scenario_text(read_file(path));
}

std::string serialize_scenario(const ScenarioDocument& doc) {
  const Scenario& sc = doc.scenario;
  ordered_json out;
  out["version"] = 1;
  out["system"]["A"] = matrix_to_json(sc.system.a);
  ordered_json inputs = ordered_json::array();
  for (const Matrix& b : sc.system.inputs) inputs.push_back(matrix_to_json(b));
  out["system"]["B"] = std::move(inputs);
  out["horizon"]["t0"] = sc.t0;
  out["horizon"]["T"] = sc.horizon_end;
  if (sc.switch_time) out["horizon"]["switch_time"] = *sc.switch_time;
  out["x0"] = vector_to_json(sc.x0);
  out["targets"]["dims"] = sc.targets.dims();
  ordered_json entries = ordered_json::array();
  for (std::size_t k = 0; k < sc.targets.entry_count(); ++k)
    entries.push_back(vector_to_json(sc.targets.flat(k)));
  out["targets"]["entries"] = std::move(entries);
  if (sc.noise) {
    out["noise"]["sigma"] = sc.noise->sigma;
    out["noise"]["hold_interval"] = sc.noise->hold_interval;
    out["noise"]["seed"] = sc.noise->seed;
    if (!sc.noise->channels.empty())
      out["noise"]["channels"] = sc.noise->channels;
  }
  if (sc.penalty_weight) out["penalty_f"] = *sc.penalty_weight;
  out["controller"] = controller_kind_name(doc.controller);
  return out.dump(2) + "\n";
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t hash = 0xCBF29CE484222325ULL;
  for (unsigned char c : bytes) {
    hash ^= c;
    hash *= 0x100000001B3ULL;
  }
  return hash;
}

std::string hash_hex(std::string_view bytes) {
  static const char digits[] = "0123456789abcdef";
  std::uint64_t h = fnv1a64(bytes);
  std::string out(16, '0');
  for (int k = 15; k >= 0; --k) {
    out[k] = digits[h & 0xF];
    h >>= 4;
  }
  return out;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open file: " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_file_atomic(const std::string& path, const std::string& contents) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open file for writing: " + tmp);
    out << contents;
    if (!out) throw Error("short write: " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

std::string format_float(double value) {
  char buffer[64];
  const auto result = std::to_chars(buffer, buffer + sizeof(buffer), value,
                                    std::chars_format::general, 17);
  return std::string(buffer, result.ptr);
}

}  // namespace choicectl
