#pragma once

#include <cstdint>
#include <ctime>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace solvertune {

#ifndef SOLVERTUNE_VERSION
#define SOLVERTUNE_VERSION "0.0.0"
#endif

inline const char* tool_version() { return SOLVERTUNE_VERSION; }

/// Provenance block embedded in every artifact file. The timestamp is kept
/// out of artifact bytes in deterministic (work-units) runs so that identical
/// inputs and seeds reproduce identical files; it still appears on stdout.
struct RunManifest {
  std::string command;
  std::string arguments;
  std::vector<std::pair<std::string, std::string>> inputs;  // name -> fingerprint/path
  std::vector<std::pair<std::string, std::uint64_t>> seeds;
  std::string timestamp;  // empty -> omitted

  static std::string now_utc() {
    std::time_t t = std::time(nullptr);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
  }

  /// Renders "<prefix>key: value" lines for file headers.
  std::string render(const std::string& prefix) const {
    std::ostringstream out;
    out << prefix << "tool: solvertune " << tool_version() << "\n";
    if (!command.empty()) out << prefix << "command: " << command << "\n";
    if (!arguments.empty()) out << prefix << "arguments: " << arguments << "\n";
    for (const auto& [name, value] : inputs) out << prefix << "input " << name << ": " << value << "\n";
    for (const auto& [name, seed] : seeds) out << prefix << "seed " << name << ": " << seed << "\n";
    if (!timestamp.empty()) out << prefix << "created: " << timestamp << "\n";
    return out.str();
  }
};

}  // namespace solvertune
