#pragma once

// Field snapshot format
// ---------------------
// Binary, header then payload:
//   char[4]  magic "JNSF"
//   uint32   format version (1)
//   uint32   endianness tag 0x01020304 as written by the producer
//   uint32   n_modes
//   float64  domain_length
//   float64  dealias_fraction
//   float64[2 * n * n]  x-component coefficients (re, im), row-major iy * n + ix
//   float64[2 * n * n]  y-component coefficients
// Readers byte-swap when the tag reads back as 0x04030201.
//
// Sidecar JSON ("<path>.json"): {"n_modes", "domain_length", "norms": {h, v, da},
// "provenance": {...}}.

#include <iosfwd>
#include <string>

#include <nlohmann/json.hpp>

#include "jumpns/spectral.hpp"

namespace jumpns {

void write_field(const VelocityField& u, std::ostream& os);
VelocityField read_field(std::istream& is);

/// Writes `path` and `path + ".json"`.
void save_field(const VelocityField& u, const std::string& path, const nlohmann::json& provenance = {});
VelocityField load_field(const std::string& path);

}  // namespace jumpns
