#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>

#include "itals/composite.hpp"
#include "itals/model.hpp"

namespace itals {

// Binary layout, all integers and floats little-endian:
//   "ITALS" | u32 version | u32 kind
//   single:    u32 D | u32 K | D x u64 dims | D x str roles
//              | D x (K x S_i f64, row-major) | D x idmap | config | metadata
//   composite: u32 context_axis | u32 states | shape | D x idmap | config
//              | metadata | states x (u8 present [single body])
// str = u32 byte length + bytes; idmap = u64 count + count x str.
inline constexpr std::uint32_t kModelFormatVersion = 1;

enum class ModelKind : std::uint32_t { single = 0, composite = 1 };

void save_model(const Model& model, std::ostream& out);
Model load_model(std::istream& in);
void save_model(const Model& model, const std::filesystem::path& path);
Model load_model(const std::filesystem::path& path);

void save_composite(const CompositeModel& model, std::ostream& out);
CompositeModel load_composite(std::istream& in);
void save_composite(const CompositeModel& model, const std::filesystem::path& path);
CompositeModel load_composite(const std::filesystem::path& path);

/// Reads only the header of a model file.
ModelKind peek_model_kind(const std::filesystem::path& path);

}  // namespace itals
