#include "exitflow/toml.hpp"

#include <cctype>
#include <charconv>
#include <sstream>

namespace exitflow {

namespace {

using nlohmann::json;

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return {};
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

// Removes a trailing comment, honoring quoted strings.
std::string strip_comment(const std::string& s) {
  bool in_str = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"' && (i == 0 || s[i - 1] != '\\')) in_str = !in_str;
    if (s[i] == '#' && !in_str) return s.substr(0, i);
  }
  return s;
}

int bracket_balance(const std::string& s) {
  bool in_str = false;
  int depth = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"' && (i == 0 || s[i - 1] != '\\')) in_str = !in_str;
    if (in_str) continue;
    if (s[i] == '[') ++depth;
    if (s[i] == ']') --depth;
  }
  return depth;
}

class ValueParser {
 public:
  ValueParser(const std::string& text, int line) : s_(text), line_(line) {}

  json parse() {
    json v = parse_value();
    skip_ws();
    if (pos_ != s_.size()) fail("trailing characters after value");
    return v;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const { throw TomlError(line_, msg); }

  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_])))
      ++pos_;
  }

  json parse_value() {
    skip_ws();
    if (pos_ >= s_.size()) fail("missing value");
    const char c = s_[pos_];
    if (c == '"') return parse_string();
    if (c == '[') return parse_array();
    if (c == '{') fail("inline tables are not supported");
    return parse_scalar();
  }

  json parse_string() {
    ++pos_;
    std::string out;
    while (pos_ < s_.size() && s_[pos_] != '"') {
      char c = s_[pos_++];
      if (c == '\\' && pos_ < s_.size()) {
        const char e = s_[pos_++];
        switch (e) {
          case 'n': c = '\n'; break;
          case 't': c = '\t'; break;
          case '"': c = '"'; break;
          case '\\': c = '\\'; break;
          default: fail(std::string("unsupported escape \\") + e);
        }
      }
      out += c;
    }
    if (pos_ >= s_.size()) fail("unterminated string");
    ++pos_;
    return json(out);
  }

  json parse_array() {
    ++pos_;
    json arr = json::array();
    skip_ws();
    if (pos_ < s_.size() && s_[pos_] == ']') {
      ++pos_;
      return arr;
    }
    for (;;) {
      arr.push_back(parse_value());
      skip_ws();
      if (pos_ >= s_.size()) fail("unterminated array");
      if (s_[pos_] == ',') {
        ++pos_;
        skip_ws();
        if (pos_ < s_.size() && s_[pos_] == ']') {  // trailing comma
          ++pos_;
          return arr;
        }
        continue;
      }
      if (s_[pos_] == ']') {
        ++pos_;
        return arr;
      }
      fail("expected ',' or ']' in array");
    }
  }

  json parse_scalar() {
    std::size_t end = pos_;
    while (end < s_.size() && s_[end] != ',' && s_[end] != ']' &&
           !std::isspace(static_cast<unsigned char>(s_[end])))
      ++end;
    const std::string tok = s_.substr(pos_, end - pos_);
    pos_ = end;
    if (tok == "true") return json(true);
    if (tok == "false") return json(false);
    const bool is_float = tok.find_first_of(".eE") != std::string::npos ||
                          tok == "inf" || tok == "-inf" || tok == "nan";
    if (!is_float) {
      std::int64_t iv = 0;
      const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), iv);
      if (res.ec == std::errc() && res.ptr == tok.data() + tok.size()) return json(iv);
    }
    try {
      std::size_t used = 0;
      const double dv = std::stod(tok, &used);
      if (used == tok.size()) return json(dv);
    } catch (...) {
    }
    fail("cannot parse value '" + tok + "'");
  }

  const std::string& s_;
  std::size_t pos_ = 0;
  int line_;
};

std::vector<std::string> split_path(const std::string& s, int line) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : s) {
    if (c == '.') {
      if (cur.empty()) throw TomlError(line, "empty table path component");
      parts.push_back(cur);
      cur.clear();
    } else if (!std::isspace(static_cast<unsigned char>(c))) {
      cur += c;
    }
  }
  if (cur.empty()) throw TomlError(line, "empty table path component");
  parts.push_back(cur);
  return parts;
}

}  // namespace

TomlDoc parse_toml(const std::string& text) {
  TomlDoc doc;
  doc.root = json::object();
  json* table = &doc.root;
  std::string table_path;

  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = trim(strip_comment(raw));
    if (line.empty()) continue;

    if (line.size() >= 2 && line[0] == '[' && line[1] == '[') {
      if (line.size() < 5 || line.substr(line.size() - 2) != "]]")
        throw TomlError(line_no, "malformed [[table]] header");
      const auto parts = split_path(line.substr(2, line.size() - 4), line_no);
      json* node = &doc.root;
      std::string path;
      for (std::size_t i = 0; i < parts.size(); ++i) {
        path += (i ? "." : "") + parts[i];
        if (i + 1 == parts.size()) {
          if (!node->contains(parts[i])) (*node)[parts[i]] = json::array();
          json& arr = (*node)[parts[i]];
          if (!arr.is_array())
            throw TomlError(line_no, "'" + path + "' is not an array of tables");
          arr.push_back(json::object());
          path += "[" + std::to_string(arr.size() - 1) + "]";
          node = &arr.back();
        } else {
          if (!node->contains(parts[i])) (*node)[parts[i]] = json::object();
          node = &(*node)[parts[i]];
          if (node->is_array()) node = &node->back();
        }
      }
      table = node;
      table_path = path;
      continue;
    }

    if (line[0] == '[') {
      if (line.back() != ']') throw TomlError(line_no, "malformed [table] header");
      const auto parts = split_path(line.substr(1, line.size() - 2), line_no);
      json* node = &doc.root;
      std::string path;
      for (std::size_t i = 0; i < parts.size(); ++i) {
        path += (i ? "." : "") + parts[i];
        if (!node->contains(parts[i])) (*node)[parts[i]] = json::object();
        node = &(*node)[parts[i]];
        if (node->is_array()) node = &node->back();
        if (!node->is_object())
          throw TomlError(line_no, "'" + path + "' is not a table");
      }
      table = node;
      table_path = path;
      continue;
    }

    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw TomlError(line_no, "expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty() || key.find('.') != std::string::npos)
      throw TomlError(line_no, "unsupported key '" + key + "'");
    std::string value = trim(line.substr(eq + 1));
    const int value_line = line_no;

    // Multi-line arrays: keep appending lines until brackets balance.
    int depth = bracket_balance(value);
    while (depth > 0 && std::getline(in, raw)) {
      ++line_no;
      const std::string more = trim(strip_comment(raw));
      value += " " + more;
      depth = bracket_balance(value);
    }
    if (depth != 0) throw TomlError(value_line, "unbalanced brackets in value");
    if (value.empty()) throw TomlError(value_line, "missing value for '" + key + "'");

    if (table->contains(key))
      throw TomlError(value_line, "duplicate key '" + key + "'");
    (*table)[key] = ValueParser(value, value_line).parse();
    doc.key_lines[table_path.empty() ? key : table_path + "." + key] = value_line;
  }
  return doc;
}

}  // namespace exitflow
