#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace epistat::io {

#ifndef EPISTAT_VERSION
#define EPISTAT_VERSION "0.1.0"
#endif

inline constexpr const char* version = EPISTAT_VERSION;

/// Report wrapper: toolkit version, the exact command line, the seed when one
/// was used, elapsed wall-clock seconds and the payload. Re-running the echoed
/// command reproduces the payload exactly.
struct ResultEnvelope {
  std::string command;
  std::vector<std::string> argv;
  std::optional<std::uint64_t> seed;
  double wall_clock_seconds = 0.0;
  nlohmann::ordered_json payload = nlohmann::ordered_json::object();

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["version"] = version;
    j["command"] = command;
    j["config"]["argv"] = argv;
    if (seed) j["config"]["seed"] = *seed;
    else j["config"]["seed"] = nullptr;
    j["wall_clock_seconds"] = wall_clock_seconds;
    j["payload"] = payload;
    return j;
  }

  std::string dump() const { return to_json().dump(2) + "\n"; }
};

/// Stopwatch for the envelope's wall-clock field.
class WallClock {
 public:
  WallClock() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

}  // namespace epistat::io
