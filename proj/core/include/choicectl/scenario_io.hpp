#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "choicectl/model.hpp"

namespace choicectl {

enum class ControllerKind { open_loop, feedback_hybrid, approach };

const char* controller_kind_name(ControllerKind kind);

/// Structured-text description of one problem: system, horizon, initial
/// state, targets, optional noise / switch time / penalty weight, and the
/// controller to synthesize. Version 1; unknown keys are rejected.
struct ScenarioDocument {
  Scenario scenario;
  ControllerKind controller = ControllerKind::open_loop;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

ScenarioDocument parse_scenario_text(const std::string& text);
ScenarioDocument load_scenario_file(const std::string& path);

/// Canonical serialization; parse-then-print is idempotent.
std::string serialize_scenario(const ScenarioDocument& doc);

std::uint64_t fnv1a64(std::string_view bytes);
std::string hash_hex(std::string_view bytes);

std::string read_file(const std::string& path);
/// Writes through a temp file and renames into place.
void write_file_atomic(const std::string& path, const std::string& contents);

/// Locale-independent decimal form with 17 significant digits.
std::string format_float(double value);

}  // namespace choicectl
