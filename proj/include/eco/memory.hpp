#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace eco {

enum class StorageFormat { None, Fp32, Bf16, Fp8, Int4 };

inline double bytes_per_element(StorageFormat f) {
  switch (f) {
    case StorageFormat::None: return 0.0;
    case StorageFormat::Fp32: return 4.0;
    case StorageFormat::Bf16: return 2.0;
    case StorageFormat::Fp8: return 1.0;
    case StorageFormat::Int4: return 0.5;
  }
  return 0.0;
}

inline StorageFormat parse_storage_format(std::string_view s) {
  if (s == "none") return StorageFormat::None;
  if (s == "fp32") return StorageFormat::Fp32;
  if (s == "bf16") return StorageFormat::Bf16;
  if (s == "fp8") return StorageFormat::Fp8;
  if (s == "int4") return StorageFormat::Int4;
  throw std::invalid_argument("unknown storage format '" + std::string(s) +
                              "' (expected fp32, bf16, fp8, int4 or none)");
}

inline std::string_view to_string(StorageFormat f) {
  switch (f) {
    case StorageFormat::None: return "none";
    case StorageFormat::Fp32: return "fp32";
    case StorageFormat::Bf16: return "bf16";
    case StorageFormat::Fp8: return "fp8";
    case StorageFormat::Int4: return "int4";
  }
  return "?";
}

/// Static bytes per parameter: weights + optional master copy + optimizer moments.
inline double memory_bytes_per_param(StorageFormat weights, std::optional<StorageFormat> master,
                                     StorageFormat m, std::optional<StorageFormat> v) {
  return bytes_per_element(weights) + bytes_per_element(master.value_or(StorageFormat::None)) +
         bytes_per_element(m) + bytes_per_element(v.value_or(StorageFormat::None));
}

}  // namespace eco
