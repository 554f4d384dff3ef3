#include "jumpns/field_io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "jumpns/errors.hpp"

namespace jumpns {

namespace {

constexpr std::array<char, 4> kMagic{'J', 'N', 'S', 'F'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint32_t kTag = 0x01020304;
constexpr std::uint32_t kSwappedTag = 0x04030201;

template <class T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T byteswap_value(T v) {
  std::array<unsigned char, sizeof(T)> b;
  std::memcpy(b.data(), &v, sizeof(T));
  std::reverse(b.begin(), b.end());
  std::memcpy(&v, b.data(), sizeof(T));
  return v;
}

template <class T>
T get(std::istream& is, bool swap) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(T))) throw ConfigError("field file truncated");
  return swap ? byteswap_value(v) : v;
}

}  // namespace

void write_field(const VelocityField& u, std::ostream& os) {
  os.write(kMagic.data(), kMagic.size());
  put(os, kVersion);
  put(os, kTag);
  put(os, static_cast<std::uint32_t>(u.grid().n()));
  put(os, u.grid().length());
  put(os, u.grid().dealias_fraction());
  for (auto comp : {u.x(), u.y()}) {
    for (const Complex& z : comp) {
      put(os, z.real());
      put(os, z.imag());
    }
  }
  if (!os) throw ConfigError("failed to write field data");
}

VelocityField read_field(std::istream& is) {
  std::array<char, 4> magic{};
  if (!is.read(magic.data(), magic.size()) || magic != kMagic) throw ConfigError("not a field snapshot file");
  const auto version_raw = get<std::uint32_t>(is, false);
  const auto tag = get<std::uint32_t>(is, false);
  bool swap = false;
  if (tag == kSwappedTag) {
    swap = true;
  } else if (tag != kTag) {
    throw ConfigError("field file has an unknown endianness tag");
  }
  const std::uint32_t version = swap ? byteswap_value(version_raw) : version_raw;
  if (version != kVersion) throw ConfigError("unsupported field file version " + std::to_string(version));
  const auto n = get<std::uint32_t>(is, swap);
  const auto length = get<double>(is, swap);
  const auto fraction = get<double>(is, swap);
  const SpectralGrid grid = SpectralGrid::make(static_cast<int>(n), length, fraction);
  CoefficientPair c;
  for (auto* comp : {&c.x, &c.y}) {
    comp->resize(grid.size());
    for (auto& z : *comp) {
      const double re = get<double>(is, swap);
      const double im = get<double>(is, swap);
      z = Complex(re, im);
    }
  }
  return VelocityField(grid, std::move(c));
}

void save_field(const VelocityField& u, const std::string& path, const nlohmann::json& provenance) {
  {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ConfigError("cannot write field file '" + path + "'");
    write_field(u, os);
  }
  const NormTriple nt = norms(u);
  nlohmann::ordered_json side;
  side["n_modes"] = u.grid().n();
  side["domain_length"] = u.grid().length();
  side["norms"] = {{"h", nt.h}, {"v", nt.v}, {"da", nt.da}};
  side["provenance"] = provenance.is_null() ? nlohmann::json::object() : provenance;
  std::ofstream js(path + ".json");
  if (!js) throw ConfigError("cannot write field sidecar '" + path + ".json'");
  js << side.dump(2) << '\n';
}

VelocityField load_field(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot open field file '" + path + "'");
  return read_field(is);
}

}  // namespace jumpns
