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

#include "modlearn/npy.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

namespace modlearn {

static_assert(std::endian::native == std::endian::little,
              "NPY reader/writer assumes a little-endian host");

namespace {

constexpr char kMagic[] = "\x93NUMPY";

std::string header_dict(const Tensor& t) {
  std::ostringstream os;
  os << "{'descr': '<f8', 'fortran_order': False, 'shape': (";
  for (std::size_t i = 0; i < t.rank(); ++i) {
    os << t.shape()[i];
    if (t.rank() == 1 || i + 1 < t.rank()) os << ",";
    if (i + 1 < t.rank()) os << " ";
  }
  os << "), }";
  return os.str();
}

// Tiny scanner for the Python-literal header dict.
struct DictScanner {
  const std::string& s;
  std::size_t pos = 0;

  void skip_ws() {
    while (pos < s.size() && (s[pos] == ' ' || s[pos] == '\t' || s[pos] == '\n')) ++pos;
  }
  bool eat(char c) {
    skip_ws();
    if (pos < s.size() && s[pos] == c) {
      ++pos;
      return true;
    }
    return false;
  }
  std::string quoted() {
    skip_ws();
    if (pos >= s.size() || (s[pos] != '\'' && s[pos] != '"'))
      throw IoError("NPY header: expected quoted string");
    const char q = s[pos++];
    std::string out;
    while (pos < s.size() && s[pos] != q) out.push_back(s[pos++]);
    if (pos >= s.size()) throw IoError("NPY header: unterminated string");
    ++pos;
    return out;
  }
  std::string word() {
    skip_ws();
    std::string out;
    while (pos < s.size() && (std::isalnum(static_cast<unsigned char>(s[pos])) || s[pos] == '_'))
      out.push_back(s[pos++]);
    return out;
  }
};

}  // namespace

void save_npy(const std::string& path, const Tensor& t) {
  const std::string dict = header_dict(t);
  // magic(6) + version(2) + header_len(2) + dict + '\n', padded to 64 bytes
  std::size_t unpadded = 10 + dict.size() + 1;
  const std::size_t padded = (unpadded + 63) / 64 * 64;
  const std::size_t header_len = padded - 10;
  if (header_len > 65535) throw IoError("NPY header too large");

  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path + "' for writing");
  f.write(kMagic, 6);
  f.put('\x01');
  f.put('\x00');
  const std::uint16_t hl = static_cast<std::uint16_t>(header_len);
  f.put(static_cast<char>(hl & 0xff));
  f.put(static_cast<char>(hl >> 8));
  f.write(dict.data(), static_cast<std::streamsize>(dict.size()));
  for (std::size_t i = 10 + dict.size(); i + 1 < padded; ++i) f.put(' ');
  f.put('\n');
  f.write(reinterpret_cast<const char*>(t.data().data()),
          static_cast<std::streamsize>(t.size() * sizeof(double)));
  if (!f) throw IoError("write failed for '" + path + "'");
}

Tensor load_npy(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path + "'");
  char magic[6];
  f.read(magic, 6);
  if (!f || std::memcmp(magic, kMagic, 6) != 0)
    throw IoError("'" + path + "' is not an NPY file (bad magic)");
  unsigned char ver[2];
  f.read(reinterpret_cast<char*>(ver), 2);
  if (!f || ver[0] != 1 || ver[1] != 0)
    throw IoError("'" + path + "': unsupported NPY version " +
                  std::to_string(int(ver[0])) + "." + std::to_string(int(ver[1])));
  unsigned char hl[2];
  f.read(reinterpret_cast<char*>(hl), 2);
  if (!f) throw IoError("'" + path + "': truncated header");
  const std::size_t header_len = hl[0] | (static_cast<std::size_t>(hl[1]) << 8);
  std::string dict(header_len, '\0');
  f.read(dict.data(), static_cast<std::streamsize>(header_len));
  if (!f) throw IoError("'" + path + "': truncated header");

  DictScanner sc{dict};
  if (!sc.eat('{')) throw IoError("'" + path + "': malformed NPY header");
  std::string descr;
  bool fortran = false;
  Shape shape;
  bool have_descr = false, have_shape = false;
  while (true) {
    sc.skip_ws();
    if (sc.eat('}')) break;
    const std::string key = sc.quoted();
    if (!sc.eat(':')) throw IoError("'" + path + "': malformed NPY header");
    if (key == "descr") {
      descr = sc.quoted();
      have_descr = true;
    } else if (key == "fortran_order") {
      const std::string w = sc.word();
      if (w == "True")
        fortran = true;
      else if (w == "False")
        fortran = false;
      else
        throw IoError("'" + path + "': bad fortran_order");
    } else if (key == "shape") {
      if (!sc.eat('(')) throw IoError("'" + path + "': bad shape tuple");
      have_shape = true;
      while (true) {
        sc.skip_ws();
        if (sc.eat(')')) break;
        std::size_t end = sc.pos;
        while (end < dict.size() && std::isdigit(static_cast<unsigned char>(dict[end]))) ++end;
        if (end == sc.pos) throw IoError("'" + path + "': bad shape tuple");
        shape.push_back(std::stoll(dict.substr(sc.pos, end - sc.pos)));
        sc.pos = end;
        sc.eat(',');
      }
    } else {
      throw IoError("'" + path + "': unknown NPY header key '" + key + "'");
    }
    sc.eat(',');
  }
  if (!have_descr || !have_shape)
    throw IoError("'" + path + "': NPY header missing descr or shape");
  if (descr != "<f8")
    throw IoError("'" + path + "': unsupported dtype '" + descr +
                  "' (only little-endian f8 is accepted)");
  if (fortran) throw IoError("'" + path + "': Fortran-order arrays not supported");

  Tensor t(shape);
  f.read(reinterpret_cast<char*>(t.data().data()),
         static_cast<std::streamsize>(t.size() * sizeof(double)));
  if (!f) throw IoError("'" + path + "': truncated data section");
  return t;
}

}  // namespace modlearn
