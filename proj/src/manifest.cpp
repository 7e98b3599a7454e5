#include "chembed/manifest.hpp"

#include <json.hpp>

#include "chembed/util.hpp"

namespace chembed {

using nlohmann::json;

void RunManifest::add_input(const std::string& path) {
  input_digests[path] = file_digest(path);
}

void RunManifest::add_output(const std::string& path) {
  output_digests[path] = file_digest(path);
}

void RunManifest::write(const std::string& path) const {
  json doc{{"command", command},
           {"config", config},
           {"inputs", input_digests},
           {"outputs", output_digests},
           {"seed", seed},
           {"wall_time_seconds", wall_time_seconds},
           {"version", version}};
  write_file(path, doc.dump(2) + "\n");
}

}  // namespace chembed
