/*
 * Copyright 2026 The Modlearn Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "modlearn/config.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_map>

namespace modlearn {

const char* diag_code_name(DiagCode c) {
  switch (c) {
    case DiagCode::kSyntax: return "syntax";
    case DiagCode::kUndefinedAlias: return "undefined-alias";
    case DiagCode::kDuplicateKey: return "duplicate-key";
    case DiagCode::kUnknownType: return "unknown-type";
    case DiagCode::kUnknownParam: return "unknown-param";
    case DiagCode::kMissingParam: return "missing-param";
    case DiagCode::kTypeMismatch: return "type-mismatch";
    case DiagCode::kValidation: return "validation";
    case DiagCode::kBadOverride: return "bad-override";
    case DiagCode::kIo: return "io";
  }
  return "?";
}

std::string Diag::to_string() const {
  std::string out = "[";
  out += diag_code_name(code);
  out += "]";
  if (line > 0) {
    out += " line " + std::to_string(line) + ", col " + std::to_string(col);
  }
  if (!path.empty()) out += " at " + path;
  out += ": " + message;
  return out;
}

std::string ConfigError::join(const std::vector<Diag>& diags) {
  std::string out;
  for (const Diag& d : diags) {
    if (!out.empty()) out += "\n";
    out += d.to_string();
  }
  return out.empty() ? "configuration error" : out;
}

ConfigError::ConfigError(std::vector<Diag> diags)
    : Error(join(diags)), diags_(std::move(diags)) {}

namespace config {

const NodePtr* Node::find(const std::string& key) const {
  for (const MapEntry& e : entries)
    if (e.key == key) return &e.value;
  return nullptr;
}

double Node::as_number() const {
  if (kind != NodeKind::kScalar) throw ValueError("node is not a scalar");
  if (stype == ScalarType::kInt) return static_cast<double>(ival);
  if (stype == ScalarType::kFloat) return fval;
  throw ValueError("node is not numeric");
}

namespace {

[[noreturn]] void fail(DiagCode code, int line, int col, const std::string& msg) {
  throw ConfigError({Diag{code, line, col, "", msg}});
}

bool is_word_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
}

NodePtr make_scalar_from_text(const std::string& text, bool quoted, int line, int col) {
  auto node = std::make_shared<Node>();
  node->kind = NodeKind::kScalar;
  node->line = line;
  node->col = col;
  if (quoted) {
    node->stype = ScalarType::kString;
    node->sval = text;
    return node;
  }
  if (text.empty() || text == "null" || text == "~") {
    node->stype = ScalarType::kNull;
    return node;
  }
  if (text == "true" || text == "false") {
    node->stype = ScalarType::kBool;
    node->bval = text == "true";
    return node;
  }
  // integer?
  {
    std::size_t i = (text[0] == '+' || text[0] == '-') ? 1 : 0;
    bool all_digits = i < text.size();
    for (std::size_t k = i; k < text.size(); ++k)
      if (!std::isdigit(static_cast<unsigned char>(text[k]))) {
        all_digits = false;
        break;
      }
    if (all_digits) {
      errno = 0;
      char* end = nullptr;
      const long long v = std::strtoll(text.c_str(), &end, 10);
      if (errno == ERANGE)
        fail(DiagCode::kSyntax, line, col, "integer out of range: '" + text + "'");
      node->stype = ScalarType::kInt;
      node->ival = v;
      return node;
    }
  }
  // float?  [+-]? ( d+(.d*)? | .d+ ) ([eE][+-]?d+)?
  {
    std::size_t i = (text[0] == '+' || text[0] == '-') ? 1 : 0;
    std::size_t digits_before = 0, digits_after = 0;
    std::size_t k = i;
    while (k < text.size() && std::isdigit(static_cast<unsigned char>(text[k]))) {
      ++digits_before;
      ++k;
    }
    bool ok = true;
    if (k < text.size() && text[k] == '.') {
      ++k;
      while (k < text.size() && std::isdigit(static_cast<unsigned char>(text[k]))) {
        ++digits_after;
        ++k;
      }
    }
    if (digits_before + digits_after == 0) ok = false;
    if (ok && k < text.size() && (text[k] == 'e' || text[k] == 'E')) {
      ++k;
      if (k < text.size() && (text[k] == '+' || text[k] == '-')) ++k;
      std::size_t exp_digits = 0;
      while (k < text.size() && std::isdigit(static_cast<unsigned char>(text[k]))) {
        ++exp_digits;
        ++k;
      }
      if (exp_digits == 0) ok = false;
    }
    if (ok && k == text.size()) {
      node->stype = ScalarType::kFloat;
      node->fval = std::strtod(text.c_str(), nullptr);
      return node;
    }
  }
  node->stype = ScalarType::kString;
  node->sval = text;
  return node;
}

class Parser {
 public:
  explicit Parser(std::string_view text) {
    std::string cur;
    for (char c : text) {
      if (c == '\n') {
        if (!cur.empty() && cur.back() == '\r') cur.pop_back();
        lines_.push_back(cur);
        cur.clear();
      } else {
        cur.push_back(c);
      }
    }
    if (!cur.empty()) lines_.push_back(cur);
  }

  NodePtr parse_stream() {
    skip_blank_lines();
    if (eof()) {
      auto n = std::make_shared<Node>();
      n->line = 1;
      n->col = 1;
      return n;
    }
    if (indent_of(line_) != 0)
      syntax_error("top-level content must start in column 1");
    col_ = 0;
    NodePtr root = parse_block_node(0);
    skip_blank_lines();
    if (!eof()) syntax_error("unexpected content after the top-level node");
    return root;
  }

 private:
  std::vector<std::string> lines_;
  std::size_t line_ = 0, col_ = 0;
  std::map<std::string, NodePtr> anchors_;

  // -- low-level helpers ----------------------------------------------------

  bool eof() const { return line_ >= lines_.size(); }
  const std::string& cur_line() const { return lines_[line_]; }
  char cur() const {
    return col_ < cur_line().size() ? cur_line()[col_] : '\0';
  }
  int pline() const { return static_cast<int>(line_) + 1; }
  int pcol() const { return static_cast<int>(col_) + 1; }

  [[noreturn]] void syntax_error(const std::string& msg) {
    fail(DiagCode::kSyntax, eof() ? static_cast<int>(lines_.size()) : pline(),
         eof() ? 1 : pcol(), msg);
  }

  void advance_line() {
    ++line_;
    col_ = 0;
  }

  std::size_t indent_of(std::size_t l) {
    const std::string& s = lines_[l];
    std::size_t i = 0;
    while (i < s.size() && s[i] == ' ') ++i;
    if (i < s.size() && s[i] == '\t')
      fail(DiagCode::kSyntax, static_cast<int>(l) + 1, static_cast<int>(i) + 1,
           "tabs are not allowed in indentation");
    return i;
  }

  bool line_is_blank(std::size_t l) {
    const std::string& s = lines_[l];
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s[i] == ' ' || s[i] == '\t') continue;
      return s[i] == '#';
    }
    return true;
  }

  void skip_blank_lines() {
    while (!eof() && line_is_blank(line_)) advance_line();
  }

  void skip_spaces() {
    while (col_ < cur_line().size() && cur_line()[col_] == ' ') ++col_;
  }

  /// True when only whitespace or a comment remains on the current line.
  bool rest_is_blank() {
    std::size_t i = col_;
    const std::string& s = cur_line();
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    return i >= s.size() || s[i] == '#';
  }

  /// Consumes trailing whitespace/comment and moves to the next line.
  void end_line() {
    if (!rest_is_blank()) syntax_error("unexpected trailing content");
    advance_line();
  }

  // -- scalar tokens ---------------------------------------------------------

  std::string parse_quoted() {
    const char q = cur();
    ++col_;
    std::string out;
    const std::string& s = cur_line();
    while (true) {
      if (col_ >= s.size()) syntax_error("unterminated quoted string");
      const char c = s[col_];
      if (q == '\'' && c == '\'') {
        if (col_ + 1 < s.size() && s[col_ + 1] == '\'') {
          out.push_back('\'');
          col_ += 2;
          continue;
        }
        ++col_;
        return out;
      }
      if (q == '"' && c == '"') {
        ++col_;
        return out;
      }
      if (q == '"' && c == '\\') {
        if (col_ + 1 >= s.size()) syntax_error("dangling escape");
        const char e = s[col_ + 1];
        switch (e) {
          case 'n': out.push_back('\n'); break;
          case 't': out.push_back('\t'); break;
          case 'r': out.push_back('\r'); break;
          case '"': out.push_back('"'); break;
          case '\\': out.push_back('\\'); break;
          default: syntax_error(std::string("unknown escape '\\") + e + "'");
        }
        col_ += 2;
        continue;
      }
      out.push_back(c);
      ++col_;
    }
  }

  std::string scan_plain_value(bool in_flow) {
    const std::string& s = cur_line();
    std::size_t start = col_;
    std::size_t end = start;
    while (end < s.size()) {
      const char c = s[end];
      if (in_flow && (c == ',' || c == '}' || c == ']')) break;
      if (c == '#' && end > start && s[end - 1] == ' ') break;
      ++end;
    }
    std::size_t stop = end;
    while (stop > start && (s[stop - 1] == ' ' || s[stop - 1] == '\t')) --stop;
    std::string out = s.substr(start, stop - start);
    col_ = end;
    return out;
  }

  std::string read_name() {
    const std::string& s = cur_line();
    std::size_t start = col_;
    while (col_ < s.size() && is_word_char(s[col_])) ++col_;
    if (col_ == start) syntax_error("expected a name");
    return s.substr(start, col_ - start);
  }

  // -- structure detection ---------------------------------------------------

  /// Scans the rest of the line for a mapping colon (':' followed by space
  /// or end of line) at flow-nesting level zero, outside quotes.
  bool line_has_map_colon() {
    const std::string& s = cur_line();
    int nest = 0;
    char quote = '\0';
    for (std::size_t i = col_; i < s.size(); ++i) {
      const char c = s[i];
      if (quote) {
        if (quote == '"' && c == '\\') {
          ++i;
        } else if (c == quote) {
          quote = '\0';
        }
        continue;
      }
      if (c == '"' || c == '\'') {
        quote = c;
      } else if (c == '{' || c == '[') {
        ++nest;
      } else if (c == '}' || c == ']') {
        --nest;
      } else if (c == '#' && i > col_ && s[i - 1] == ' ') {
        return false;
      } else if (c == ':' && nest == 0) {
        if (i + 1 >= s.size() || s[i + 1] == ' ') return true;
      }
    }
    return false;
  }

  bool starts_sequence_item() {
    const std::string& s = cur_line();
    if (cur() != '-') return false;
    return col_ + 1 >= s.size() || s[col_ + 1] == ' ';
  }

  // -- grammar ---------------------------------------------------------------

  /// Parses a node whose content starts at the current (line, col); `indent`
  /// is the content column. `payload_threshold` is the column that block
  /// payloads of an inline tag must exceed (the key column for mapping
  /// values, the dash column for sequence items). Consumes up to and
  /// including the node's last line.
  NodePtr parse_block_node(std::size_t indent, long long payload_threshold = -1) {
    if (payload_threshold < 0) payload_threshold = static_cast<long long>(indent);
    if (starts_sequence_item()) return parse_block_sequence(indent);
    if (line_has_map_colon()) return parse_block_mapping(indent, true);
    NodePtr n = parse_inline_value(static_cast<std::size_t>(payload_threshold), false);
    return n;
  }

  NodePtr parse_block_mapping(std::size_t indent, bool first_midline) {
    auto node = std::make_shared<Node>();
    node->kind = NodeKind::kMapping;
    node->line = pline();
    node->col = pcol();
    bool first = first_midline;
    while (true) {
      if (!first) {
        skip_blank_lines();
        if (eof()) break;
        const std::size_t i = indent_of(line_);
        if (i < indent) break;
        if (i > indent) syntax_error("unexpected indentation");
        col_ = i;
        if (starts_sequence_item())
          syntax_error("sequence item where a mapping key was expected");
        if (!line_has_map_colon()) syntax_error("expected 'key: value'");
      }
      first = false;

      const int kl = pline(), kc = pcol();
      std::string key;
      if (cur() == '"' || cur() == '\'') {
        key = parse_quoted();
        skip_spaces();
        if (cur() != ':') syntax_error("expected ':' after key");
        ++col_;
      } else {
        key = scan_key();
      }
      for (const MapEntry& e : node->entries)
        if (e.key == key)
          fail(DiagCode::kDuplicateKey, kl, kc, "duplicate key '" + key + "'");

      NodePtr value = parse_value_after_colon(indent);
      node->entries.push_back(MapEntry{key, value, kl, kc});
      if (eof()) break;
    }
    return node;
  }

  /// Reads a plain key up to a mapping colon; leaves col_ just past ':'.
  std::string scan_key() {
    const std::string& s = cur_line();
    std::size_t start = col_;
    while (col_ < s.size()) {
      if (s[col_] == ':' && (col_ + 1 >= s.size() || s[col_ + 1] == ' ')) {
        std::size_t stop = col_;
        while (stop > start && s[stop - 1] == ' ') --stop;
        std::string key = s.substr(start, stop - start);
        ++col_;
        if (key.empty()) syntax_error("empty mapping key");
        return key;
      }
      ++col_;
    }
    syntax_error("expected ':' after key");
  }

  NodePtr parse_value_after_colon(std::size_t parent_indent) {
    skip_spaces();
    if (rest_is_blank()) {
      const int nl = pline(), nc = pcol();
      advance_line();
      skip_blank_lines();
      if (!eof()) {
        const std::size_t i = indent_of(line_);
        if (i > parent_indent) {
          col_ = i;
          return parse_block_node(i);
        }
      }
      auto n = std::make_shared<Node>();  // empty value -> null
      n->line = nl;
      n->col = nc;
      return n;
    }
    return parse_inline_value(parent_indent, false);
  }

  NodePtr parse_block_sequence(std::size_t indent) {
    auto node = std::make_shared<Node>();
    node->kind = NodeKind::kSequence;
    node->line = pline();
    node->col = pcol();
    bool first = true;  // the first dash is at the current cursor
    while (true) {
      if (!first) {
        skip_blank_lines();
        if (eof()) break;
        const std::size_t i = indent_of(line_);
        if (i < indent) break;
        if (i > indent) syntax_error("unexpected indentation");
        col_ = i;
        if (!starts_sequence_item()) break;
      }
      first = false;
      ++col_;  // past '-'
      skip_spaces();
      if (rest_is_blank()) {
        advance_line();
        skip_blank_lines();
        if (eof() || indent_of(line_) <= indent) {
          auto null_item = std::make_shared<Node>();
          null_item->line = pline();
          null_item->col = 1;
          node->items.push_back(null_item);
          continue;
        }
        const std::size_t child = indent_of(line_);
        col_ = child;
        node->items.push_back(parse_block_node(child));
      } else {
        node->items.push_back(
            parse_block_node(col_, static_cast<long long>(indent)));
      }
      if (eof()) break;
    }
    return node;
  }

  /// Anchors, aliases, tags, flow collections, and scalars. In block context
  /// the value consumes the rest of its line (and any block payload lines);
  /// in flow context the cursor stops after the value.
  NodePtr parse_inline_value(std::size_t parent_indent, bool in_flow) {
    skip_spaces();
    const int vl = pline(), vc = pcol();

    std::string anchor;
    if (cur() == '&') {
      ++col_;
      anchor = read_name();
      skip_spaces();
    }

    if (cur() == '*') {
      ++col_;
      const std::string name = read_name();
      auto it = anchors_.find(name);
      if (it == anchors_.end())
        fail(DiagCode::kUndefinedAlias, vl, vc, "undefined alias '*" + name + "'");
      if (!anchor.empty()) syntax_error("an alias cannot carry an anchor");
      if (!in_flow) end_line();
      return it->second;
    }

    NodePtr result;
    if (cur() == '!') {
      result = parse_tagged(parent_indent, in_flow, vl, vc);
    } else if (cur() == '{' || cur() == '[') {
      result = parse_flow_collection();
      if (!in_flow) end_line();
    } else if (cur() == '"' || cur() == '\'') {
      std::string s = parse_quoted();
      result = make_scalar_from_text(s, true, vl, vc);
      if (!in_flow) end_line();
    } else if (!in_flow && rest_is_blank()) {
      // anchored empty value / nested block
      advance_line();
      skip_blank_lines();
      if (!eof() && indent_of(line_) > parent_indent) {
        col_ = indent_of(line_);
        result = parse_block_node(col_);
      } else {
        result = std::make_shared<Node>();
        result->line = vl;
        result->col = vc;
      }
    } else {
      std::string text = scan_plain_value(in_flow);
      result = make_scalar_from_text(text, false, vl, vc);
      if (!in_flow) end_line();
    }

    if (!anchor.empty()) anchors_[anchor] = result;
    return result;
  }

  NodePtr parse_tagged(std::size_t parent_indent, bool in_flow, int vl, int vc) {
    ++col_;  // '!'
    const std::string& s = cur_line();
    std::size_t start = col_;
    while (col_ < s.size() && s[col_] != ' ') {
      if (in_flow && (s[col_] == ',' || s[col_] == '}' || s[col_] == ']')) break;
      ++col_;
    }
    const std::string tag = s.substr(start, col_ - start);
    auto node = std::make_shared<Node>();
    node->kind = NodeKind::kTagged;
    node->tag = tag;
    node->line = vl;
    node->col = vc;

    if (tag.rfind("npy:", 0) == 0) {
      if (tag.size() == 4)
        fail(DiagCode::kSyntax, vl, vc, "!npy: tag needs a file path");
      if (!in_flow) end_line();
      return node;
    }
    if (tag.rfind("obj:", 0) != 0 || tag.size() == 4)
      fail(DiagCode::kSyntax, vl, vc,
           "unknown tag '!" + tag + "' (expected !obj:<type> or !npy:<path>)");

    skip_spaces();
    if (!in_flow && rest_is_blank()) {
      advance_line();
      skip_blank_lines();
      if (!eof() && indent_of(line_) > parent_indent) {
        col_ = indent_of(line_);
        NodePtr payload = parse_block_node(col_);
        if (payload->kind != NodeKind::kMapping)
          fail(DiagCode::kSyntax, payload->line, payload->col,
               "!obj: payload must be a mapping");
        node->payload = payload;
      } else {
        auto empty = std::make_shared<Node>();
        empty->kind = NodeKind::kMapping;
        empty->line = vl;
        empty->col = vc;
        node->payload = empty;
      }
      return node;
    }
    if (cur() == '{') {
      node->payload = parse_flow_collection();
      if (!in_flow) end_line();
      return node;
    }
    fail(DiagCode::kSyntax, pline(), pcol(), "!obj: payload must be a mapping");
  }

  void skip_flow_ws() {
    while (true) {
      skip_spaces();
      if (col_ < cur_line().size() && cur() != '#') return;
      // end of line or comment: flow collections may span lines
      advance_line();
      if (eof()) syntax_error("unterminated flow collection");
    }
  }

  NodePtr parse_flow_collection() {
    const int vl = pline(), vc = pcol();
    const char open = cur();
    const char close = open == '{' ? '}' : ']';
    ++col_;
    auto node = std::make_shared<Node>();
    node->kind = open == '{' ? NodeKind::kMapping : NodeKind::kSequence;
    node->line = vl;
    node->col = vc;
    skip_flow_ws();
    if (cur() == close) {
      ++col_;
      return node;
    }
    while (true) {
      skip_flow_ws();
      if (open == '{') {
        const int kl = pline(), kc = pcol();
        std::string key;
        if (cur() == '"' || cur() == '\'') {
          key = parse_quoted();
          skip_flow_ws();
          if (cur() != ':') syntax_error("expected ':' in flow mapping");
          ++col_;
        } else {
          key = scan_flow_key();
        }
        for (const MapEntry& e : node->entries)
          if (e.key == key)
            fail(DiagCode::kDuplicateKey, kl, kc, "duplicate key '" + key + "'");
        skip_flow_ws();
        NodePtr value = parse_inline_value(0, true);
        node->entries.push_back(MapEntry{key, value, kl, kc});
      } else {
        node->items.push_back(parse_inline_value(0, true));
      }
      skip_flow_ws();
      if (cur() == ',') {
        ++col_;
        skip_flow_ws();
        if (cur() == close) {  // trailing comma
          ++col_;
          return node;
        }
        continue;
      }
      if (cur() == close) {
        ++col_;
        return node;
      }
      syntax_error(std::string("expected ',' or '") + close + "' in flow collection");
    }
  }

  std::string scan_flow_key() {
    const std::string& s = cur_line();
    std::size_t start = col_;
    while (col_ < s.size() && s[col_] != ':' && s[col_] != ',' && s[col_] != '}' &&
           s[col_] != ']')
      ++col_;
    if (col_ >= s.size() || s[col_] != ':')
      syntax_error("expected ':' in flow mapping");
    std::size_t stop = col_;
    while (stop > start && s[stop - 1] == ' ') --stop;
    std::string key = s.substr(start, stop - start);
    ++col_;
    if (key.empty()) syntax_error("empty mapping key");
    return key;
  }
};

}  // namespace

NodePtr parse(std::string_view text) {
  Parser p(text);
  return p.parse_stream();
}

NodePtr parse_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse(ss.str());
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

bool plain_safe(const std::string& s) {
  if (s.empty()) return false;
  if (s.front() == ' ' || s.back() == ' ') return false;
  static const std::string forbidden = "#,[]{}&*!|>'\"%@`";
  for (char c : s) {
    if (forbidden.find(c) != std::string::npos) return false;
    if (c == '\n' || c == '\t') return false;
  }
  if (s.find(": ") != std::string::npos || s.back() == ':') return false;
  if (s.rfind("- ", 0) == 0 || s == "-") return false;
  // must not re-parse as a non-string scalar
  NodePtr probe = make_scalar_from_text(s, false, 0, 0);
  return probe->stype == ScalarType::kString;
}

std::string quote_string(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    switch (c) {
      case '\\': out += "\\\\"; break;
      case '"': out += "\\\""; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case '\r': out += "\\r"; break;
      default: out.push_back(c);
    }
  }
  out += "\"";
  return out;
}

std::string scalar_text(const Node& n) {
  switch (n.stype) {
    case ScalarType::kNull: return "null";
    case ScalarType::kBool: return n.bval ? "true" : "false";
    case ScalarType::kInt: return std::to_string(n.ival);
    case ScalarType::kFloat: {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.17g", n.fval);
      std::string s = buf;
      if (s.find_first_of(".eE") == std::string::npos &&
          s.find("inf") == std::string::npos && s.find("nan") == std::string::npos)
        s += ".0";
      return s;
    }
    case ScalarType::kString:
      return plain_safe(n.sval) ? n.sval : quote_string(n.sval);
  }
  return "null";
}

class Serializer {
 public:
  explicit Serializer(const NodePtr& root) {
    count_refs(root);
    int next = 1;
    for (auto& [node, count] : refs_)
      if (count > 1) anchor_names_[node] = "a" + std::to_string(next++);
  }

  std::string run(const NodePtr& root) {
    emit_value(root, 0, true);
    return out_;
  }

 private:
  std::unordered_map<const Node*, int> refs_;
  std::unordered_map<const Node*, std::string> anchor_names_;
  std::unordered_map<const Node*, bool> emitted_;
  std::string out_;

  void count_refs(const NodePtr& n) {
    if (!n) return;
    if (++refs_[n.get()] > 1) return;
    for (const NodePtr& item : n->items) count_refs(item);
    for (const MapEntry& e : n->entries) count_refs(e.value);
    if (n->payload) count_refs(n->payload);
  }

  std::string indent_str(int indent) { return std::string(indent, ' '); }

  bool is_inline(const NodePtr& n) {
    if (emitted_.count(n.get())) return true;  // alias
    return flowable(n, true);
  }

  /// A node can be rendered in flow style when nothing inside it needs an
  /// anchor (the node itself may carry one; it is emitted as a prefix).
  bool flowable(const NodePtr& n, bool root) {
    if (!root && anchor_names_.count(n.get())) return false;
    switch (n->kind) {
      case NodeKind::kScalar:
        return true;
      case NodeKind::kSequence:
        for (const NodePtr& item : n->items)
          if (!flowable(item, false)) return false;
        return true;
      case NodeKind::kMapping:
        for (const MapEntry& e : n->entries)
          if (!flowable(e.value, false)) return false;
        return true;
      case NodeKind::kTagged:
        if (n->tag.rfind("npy:", 0) == 0) return true;
        return n->payload && flowable(n->payload, false);
    }
    return false;
  }

  std::string flow_text(const NodePtr& n) {
    switch (n->kind) {
      case NodeKind::kScalar:
        return scalar_text(*n);
      case NodeKind::kSequence: {
        std::string out = "[";
        for (std::size_t i = 0; i < n->items.size(); ++i) {
          if (i) out += ", ";
          out += flow_text(n->items[i]);
        }
        return out + "]";
      }
      case NodeKind::kMapping: {
        std::string out = "{";
        for (std::size_t i = 0; i < n->entries.size(); ++i) {
          if (i) out += ", ";
          const MapEntry& e = n->entries[i];
          out += (plain_safe(e.key) ? e.key : quote_string(e.key)) + ": " +
                 flow_text(e.value);
        }
        return out + "}";
      }
      case NodeKind::kTagged:
        if (n->tag.rfind("npy:", 0) == 0) return "!" + n->tag;
        return "!" + n->tag + " " + flow_text(n->payload);
    }
    return "null";
  }

  /// Alias or anchored-prefix handling; returns the prefix to place before
  /// the node's own text ("&a1 " or "") or the full alias text.
  std::string anchor_prefix(const NodePtr& n, bool& is_alias) {
    is_alias = false;
    auto it = anchor_names_.find(n.get());
    if (it == anchor_names_.end()) return "";
    if (emitted_.count(n.get())) {
      is_alias = true;
      return "*" + it->second;
    }
    emitted_[n.get()] = true;
    return "&" + it->second + " ";
  }

  std::string inline_text(const NodePtr& n) {
    bool is_alias = false;
    std::string prefix = anchor_prefix(n, is_alias);
    if (is_alias) return prefix;
    return prefix + flow_text(n);
  }

  /// Emits a node appearing as a mapping value or sequence item.
  /// `slot` is the text up to (not including) the node, e.g. "key:" or "-".
  void emit_slot(const std::string& slot, const NodePtr& n, int indent) {
    if (is_inline(n)) {
      out_ += indent_str(indent) + slot + " " + inline_text(n) + "\n";
      return;
    }
    bool is_alias = false;
    std::string prefix = anchor_prefix(n, is_alias);
    if (is_alias) {
      out_ += indent_str(indent) + slot + " " + prefix + "\n";
      return;
    }
    switch (n->kind) {
      case NodeKind::kTagged: {
        out_ += indent_str(indent) + slot + " " + prefix + "!" + n->tag;
        if (n->payload && !n->payload->entries.empty()) {
          out_ += "\n";
          emit_mapping_body(n->payload, indent + 2);
        } else {
          out_ += " {}\n";
        }
        break;
      }
      case NodeKind::kMapping:
        if (n->entries.empty()) {
          out_ += indent_str(indent) + slot + " " + prefix + "{}\n";
        } else if (!prefix.empty()) {
          out_ += indent_str(indent) + slot + " " + prefix + "\n";
          emit_mapping_body(n, indent + 2);
        } else {
          out_ += indent_str(indent) + slot + "\n";
          emit_mapping_body(n, indent + 2);
        }
        break;
      case NodeKind::kSequence:
        if (n->items.empty()) {
          out_ += indent_str(indent) + slot + " " + prefix + "[]\n";
        } else if (!prefix.empty()) {
          out_ += indent_str(indent) + slot + " " + prefix + "\n";
          emit_sequence_body(n, indent + 2);
        } else {
          out_ += indent_str(indent) + slot + "\n";
          emit_sequence_body(n, indent + 2);
        }
        break;
      default:
        break;
    }
  }

  void emit_mapping_body(const NodePtr& n, int indent) {
    for (const MapEntry& e : n->entries) {
      const std::string key = plain_safe(e.key) ? e.key : quote_string(e.key);
      emit_slot(key + ":", e.value, indent);
    }
  }

  void emit_sequence_body(const NodePtr& n, int indent) {
    for (const NodePtr& item : n->items) emit_slot("-", item, indent);
  }

  void emit_value(const NodePtr& n, int indent, bool top) {
    if (is_inline(n)) {
      out_ += inline_text(n) + "\n";
      return;
    }
    bool is_alias = false;
    std::string prefix = anchor_prefix(n, is_alias);
    if (is_alias) {
      out_ += prefix + "\n";
      return;
    }
    switch (n->kind) {
      case NodeKind::kTagged:
        out_ += prefix + "!" + n->tag;
        if (n->payload && !n->payload->entries.empty()) {
          out_ += "\n";
          emit_mapping_body(n->payload, indent + 2);
        } else {
          out_ += " {}\n";
        }
        break;
      case NodeKind::kMapping:
        if (n->entries.empty()) {
          out_ += prefix + "{}\n";
        } else {
          if (!prefix.empty()) out_ += prefix + "\n";
          emit_mapping_body(n, indent);
        }
        break;
      case NodeKind::kSequence:
        if (n->items.empty()) {
          out_ += prefix + "[]\n";
        } else {
          if (!prefix.empty()) out_ += prefix + "\n";
          emit_sequence_body(n, indent);
        }
        break;
      default:
        break;
    }
    (void)top;
  }
};

}  // namespace

std::string serialize(const NodePtr& root) {
  Serializer s(root);
  return s.run(root);
}

// ---------------------------------------------------------------------------
// Equality

namespace {

bool deep_equal_impl(const NodePtr& a, const NodePtr& b,
                     std::unordered_map<const Node*, const Node*>& pairing) {
  if (!a || !b) return a == b;
  auto it = pairing.find(a.get());
  if (it != pairing.end()) return it->second == b.get();
  pairing[a.get()] = b.get();

  if (a->kind != b->kind) return false;
  switch (a->kind) {
    case NodeKind::kScalar:
      if (a->stype != b->stype) return false;
      switch (a->stype) {
        case ScalarType::kNull: return true;
        case ScalarType::kBool: return a->bval == b->bval;
        case ScalarType::kInt: return a->ival == b->ival;
        case ScalarType::kFloat: return a->fval == b->fval;
        case ScalarType::kString: return a->sval == b->sval;
      }
      return false;
    case NodeKind::kSequence:
      if (a->items.size() != b->items.size()) return false;
      for (std::size_t i = 0; i < a->items.size(); ++i)
        if (!deep_equal_impl(a->items[i], b->items[i], pairing)) return false;
      return true;
    case NodeKind::kMapping:
      if (a->entries.size() != b->entries.size()) return false;
      for (std::size_t i = 0; i < a->entries.size(); ++i) {
        if (a->entries[i].key != b->entries[i].key) return false;
        if (!deep_equal_impl(a->entries[i].value, b->entries[i].value, pairing))
          return false;
      }
      return true;
    case NodeKind::kTagged:
      if (a->tag != b->tag) return false;
      if ((a->payload == nullptr) != (b->payload == nullptr)) return false;
      return !a->payload || deep_equal_impl(a->payload, b->payload, pairing);
  }
  return false;
}

}  // namespace

bool deep_equal(const NodePtr& a, const NodePtr& b) {
  std::unordered_map<const Node*, const Node*> pairing;
  return deep_equal_impl(a, b, pairing);
}

// ---------------------------------------------------------------------------
// Overrides

void apply_override(const NodePtr& root, const std::string& dotted_path,
                    const std::string& value_text) {
  std::vector<std::string> segments;
  std::string cur;
  for (char c : dotted_path) {
    if (c == '.') {
      segments.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  segments.push_back(cur);

  auto bad = [&](const std::string& msg) {
    throw ConfigError({Diag{DiagCode::kBadOverride, 0, 0, dotted_path, msg}});
  };
  if (segments.empty() || dotted_path.empty()) bad("empty override path");

  NodePtr parent = root;
  NodePtr* slot = nullptr;
  for (std::size_t si = 0; si < segments.size(); ++si) {
    const std::string& seg = segments[si];
    const bool last = si + 1 == segments.size();
    NodePtr at = slot ? *slot : parent;
    while (at->kind == NodeKind::kTagged) {
      if (!at->payload) bad("segment '" + seg + "' reaches a payload-less tag");
      at = at->payload;
    }
    if (at->kind == NodeKind::kMapping) {
      NodePtr* found = nullptr;
      for (MapEntry& e : at->entries)
        if (e.key == seg) found = &e.value;
      if (!found) {
        // The final segment may introduce an optional parameter; the
        // registry still validates it like any config value.
        if (!last) bad("no key '" + seg + "'");
        at->entries.push_back(MapEntry{seg, std::make_shared<Node>(), 0, 0});
        found = &at->entries.back().value;
      }
      slot = found;
    } else if (at->kind == NodeKind::kSequence) {
      char* end = nullptr;
      const long long idx = std::strtoll(seg.c_str(), &end, 10);
      if (end != seg.c_str() + seg.size()) bad("expected a list index, got '" + seg + "'");
      if (idx < 0 || static_cast<std::size_t>(idx) >= at->items.size())
        bad("index " + seg + " out of range");
      slot = &at->items[static_cast<std::size_t>(idx)];
    } else {
      bad("segment '" + seg + "' reaches a scalar");
    }
  }
  *slot = parse(value_text);
}

}  // namespace config
}  // namespace modlearn
