#pragma once

#include <map>
#include <string>
#include <vector>

namespace chembed {

// One manifest per CLI invocation: command, resolved config, content
// digests of inputs and outputs, seed, wall time.
struct RunManifest {
  std::string command;
  std::map<std::string, std::string> config;
  std::map<std::string, std::string> input_digests;
  std::map<std::string, std::string> output_digests;
  std::uint64_t seed = 0;
  double wall_time_seconds = 0.0;
  std::string version = "0.1.0";

  void add_input(const std::string& path);
  void add_output(const std::string& path);
  void write(const std::string& path) const;
};

}  // namespace chembed
