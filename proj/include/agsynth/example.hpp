#pragma once

// Input/output examples and their JSONL serialization.
//
// An example pairs a concrete input string with a context (free-variable
// bindings) and the expected output value. On disk a suite is one JSON
// object per line:
//
//   {"input": "x*x", "context": {"x": {"int": 4}}, "output": {"dual": [16.0, 8.0]}}

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "evaluator.hpp"

namespace agsynth {

struct Example {
  std::string input;
  Context context;
  Value output;
};

inline nlohmann::json example_to_json(const Example& e) {
  nlohmann::json ctx = nlohmann::json::object();
  for (const auto& [name, v] : e.context) ctx[name] = value_to_json(v);
  return nlohmann::json{{"input", e.input}, {"context", ctx}, {"output", value_to_json(e.output)}};
}

inline Example example_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("input") || !j.contains("output"))
    throw std::runtime_error("example record needs \"input\" and \"output\" fields");
  Example e;
  e.input = j.at("input").get<std::string>();
  if (j.contains("context")) {
    const auto& ctx = j.at("context");
    if (!ctx.is_object()) throw std::runtime_error("example \"context\" must be an object");
    for (auto it = ctx.begin(); it != ctx.end(); ++it) e.context[it.key()] = value_from_json(it.value());
  }
  e.output = value_from_json(j.at("output"));
  return e;
}

inline std::vector<Example> parse_examples_jsonl(std::istream& in) {
  std::vector<Example> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    bool blank = true;
    for (char c : line)
      if (!std::isspace(static_cast<unsigned char>(c))) { blank = false; break; }
    if (blank) continue;
    try {
      out.push_back(example_from_json(nlohmann::json::parse(line)));
    } catch (const std::exception& ex) {
      throw std::runtime_error("bad example on line " + std::to_string(lineno) + ": " + ex.what());
    }
  }
  return out;
}

inline std::vector<Example> load_examples_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open examples file: " + path);
  return parse_examples_jsonl(in);
}

inline void write_examples_jsonl(std::ostream& out, const std::vector<Example>& es) {
  for (const auto& e : es) out << example_to_json(e).dump() << "\n";
}

inline void save_examples_jsonl(const std::string& path, const std::vector<Example>& es) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open examples file for writing: " + path);
  write_examples_jsonl(out, es);
}

}  // namespace agsynth
