#pragma once

// Shared framing for the project's binary files: a single line of JSON,
// '\n', then a little-endian payload.

#include <bit>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ssgc/common.hpp"

namespace ssgc::binio {

using json = nlohmann::json;

template <typename T>
T byteswap_if_big(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    unsigned char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    std::reverse(buf, buf + sizeof(T));
    std::memcpy(&v, buf, sizeof(T));
  }
  return v;
}

template <typename T>
void append_le(std::string& out, T v) {
  v = byteswap_if_big(v);
  const auto* p = reinterpret_cast<const char*>(&v);
  out.append(p, sizeof(T));
}

template <typename T>
T read_le(const char* p) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  return byteswap_if_big(v);
}

struct Framed {
  json header;
  std::string payload;
};

inline Framed read_framed(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::MalformedHeader, path + ": missing header line");
  Framed f;
  try {
    f.header = json::parse(line);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::MalformedHeader, path + ": " + e.what());
  }
  if (!f.header.is_object()) throw Error(ErrorCode::MalformedHeader, path + ": header is not an object");
  f.payload.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  return f;
}

inline void write_framed(const std::string& path, const json& header, const std::string& payload) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path);
  out << header.dump() << '\n';
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  if (!out) throw Error(ErrorCode::Io, "short write on " + path);
}

inline std::size_t header_dim(const json& h, const char* key, const std::string& path) {
  if (!h.contains(key) || !h[key].is_number_integer() || h[key].get<long long>() < 0)
    throw Error(ErrorCode::MalformedHeader, path + ": bad or missing '" + key + "'");
  return h[key].get<std::size_t>();
}

}  // namespace ssgc::binio
