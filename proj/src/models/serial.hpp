#pragma once

// Whitespace-separated text encoding shared by the model save/load code.
// Doubles use %.17g, which round-trips exactly.

#include <cstdio>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "droidsynth/error.hpp"

namespace droidsynth::models::serial {

inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline void expect(std::istream& in, const std::string& tag) {
  std::string got;
  if (!(in >> got) || got != tag) {
    throw DataError("model file: expected '" + tag + "', found '" + got + "'");
  }
}

template <typename T>
T read(std::istream& in) {
  T value{};
  if constexpr (std::is_same_v<T, double>) {
    std::string token;
    if (!(in >> token)) throw DataError("model file: truncated");
    try {
      value = std::stod(token);
    } catch (const std::exception&) {
      throw DataError("model file: bad number '" + token + "'");
    }
  } else {
    if (!(in >> value)) throw DataError("model file: truncated");
  }
  return value;
}

inline void write_vector(std::ostream& out, const std::string& tag, const std::vector<double>& v) {
  out << tag << ' ' << v.size();
  for (double x : v) out << ' ' << fmt(x);
  out << '\n';
}

inline std::vector<double> read_vector(std::istream& in, const std::string& tag) {
  expect(in, tag);
  const auto n = read<std::size_t>(in);
  std::vector<double> v(n);
  for (auto& x : v) x = read<double>(in);
  return v;
}

}  // namespace droidsynth::models::serial
