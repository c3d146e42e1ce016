#pragma once

// Command-line front end. Every command writes its outputs and a
// manifest.json into --out; `replay` re-runs a manifest and checks that the
// outputs come out byte-identical.
//
//   sdr fit DATA --response y --method pfc --d 1 --basis linear
//   sdr select-dim DATA --response y --basis linear --alpha 0.05
//   sdr simulate CONFIG.json
//   sdr reproduce-figure 2c --reps 200 --seed 1 --threads 4
//   sdr replay OUT/manifest.json --out OUT2
//
// Exit codes: 0 success, 2 malformed input or arguments, 3 fit failure.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "sdr/simulate.hpp"

namespace sdr {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 2;
inline constexpr int kExitFit = 3;

/// `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

nlohmann::json config_to_json(const SimConfig& cfg);
/// Missing keys keep their SimConfig defaults; unknown keys are errors.
SimConfig config_from_json(const nlohmann::json& j);

/// 64-bit FNV-1a digest, hex encoded, used to fingerprint output files.
std::string fnv1a_hex(const std::string& bytes);

std::string version_string();

}  // namespace sdr
