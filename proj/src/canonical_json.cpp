#include "scenerecon/canonical_json.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "scenerecon/common.hpp"

namespace scenerecon {
namespace {

void emit(const nlohmann::json& j, int depth, std::string& out) {
  const std::string pad(2 * (depth + 1), ' ');
  const std::string close_pad(2 * depth, ' ');
  switch (j.type()) {
    case nlohmann::json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += "{\n";
      bool first = true;
      for (const auto& [key, value] : j.items()) {
        if (!first) out += ",\n";
        first = false;
        out += pad + nlohmann::json(key).dump() + ": ";
        emit(value, depth + 1, out);
      }
      out += "\n" + close_pad + "}";
      return;
    }
    case nlohmann::json::value_t::array: {
      if (j.empty()) {
        out += "[]";
        return;
      }
      out += "[\n";
      for (std::size_t i = 0; i < j.size(); ++i) {
        if (i) out += ",\n";
        out += pad;
        emit(j[i], depth + 1, out);
      }
      out += "\n" + close_pad + "]";
      return;
    }
    case nlohmann::json::value_t::number_float: {
      const double v = j.get<double>();
      if (!std::isfinite(v)) throw Error("canonical JSON: non-finite number");
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.9g", v == 0.0 ? 0.0 : v);
      out += buf;
      return;
    }
    default:
      out += j.dump();
  }
}

std::string kind(const nlohmann::json& j) { return j.type_name(); }

}  // namespace

std::string canonical_dump(const nlohmann::json& doc) {
  std::string out;
  emit(doc, 0, out);
  out += '\n';
  return out;
}

void write_canonical(const nlohmann::json& doc, const std::filesystem::path& path) {
  const std::string text = canonical_dump(doc);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("failed writing " + path.string());
}

nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(path.string() + ": malformed JSON: " + e.what());
  }
}

void require_object(const nlohmann::json& j, const std::string& where) {
  if (!j.is_object()) throw Error(where + ": expected object, got " + kind(j));
}

void reject_unknown(const nlohmann::json& j, std::initializer_list<const char*> allowed,
                    const std::string& where) {
  require_object(j, where);
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    for (const char* a : allowed) known = known || key == a;
    if (!known) throw Error(where + "." + key + ": unknown field");
  }
}

const nlohmann::json& required(const nlohmann::json& j, const char* key,
                               const std::string& where) {
  require_object(j, where);
  const auto it = j.find(key);
  if (it == j.end()) throw Error(where + "." + key + ": missing required field");
  return *it;
}

double get_number(const nlohmann::json& j, const std::string& where) {
  if (!j.is_number()) throw Error(where + ": expected number, got " + kind(j));
  return j.get<double>();
}

long long get_integer(const nlohmann::json& j, const std::string& where) {
  if (j.is_number_integer()) return j.get<long long>();
  if (j.is_number_float()) {
    const double v = j.get<double>();
    if (std::floor(v) == v && std::abs(v) < 9e15) return static_cast<long long>(v);
  }
  throw Error(where + ": expected integer, got " + kind(j));
}

bool get_bool(const nlohmann::json& j, const std::string& where) {
  if (!j.is_boolean()) throw Error(where + ": expected boolean, got " + kind(j));
  return j.get<bool>();
}

std::string get_string(const nlohmann::json& j, const std::string& where) {
  if (!j.is_string()) throw Error(where + ": expected string, got " + kind(j));
  return j.get<std::string>();
}

}  // namespace scenerecon
