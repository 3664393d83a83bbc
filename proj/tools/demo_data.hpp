#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>

namespace detangle::demo {

/// Writes data.csv, schema.json, knowledge.json, request.json and
/// config.json (output "out") into `dir`. The table is a synthetic customer
/// base: segments A and B share an income profile, spend follows income and
/// gender, and tax is a flat share of income.
void write_demo(const std::filesystem::path& dir, std::size_t rows, std::uint64_t seed);

}  // namespace detangle::demo
