#pragma once

#include <json.hpp>

#include <map>
#include <stdexcept>
#include <string>

namespace exitflow {

struct TomlError : std::runtime_error {
  TomlError(int line_, const std::string& msg)
      : std::runtime_error("line " + std::to_string(line_) + ": " + msg),
        line(line_) {}
  int line;
};

// Parsed TOML document as a JSON tree, plus the source line of every key
// so semantic errors can point back into the file.
struct TomlDoc {
  nlohmann::json root;
  std::map<std::string, int> key_lines;

  int line_of(const std::string& dotted_path) const {
    const auto it = key_lines.find(dotted_path);
    return it == key_lines.end() ? 0 : it->second;
  }
};

// Supports the config subset: [tables], [[arrays of tables]], strings,
// booleans, integers, floats, and (possibly nested, possibly multi-line)
// arrays. Unsupported constructs fail with a line-anchored TomlError.
TomlDoc parse_toml(const std::string& text);

}  // namespace exitflow
