#pragma once

// Binary checkpoint layout (all integers little-endian):
//
//   "BASSL" 0x01
//   u32 tensor count
//   per tensor: u32 name length, UTF-8 name, u8 rank, rank x u64 dims,
//               element count x f64 (row-major)
//   u32 CRC-32 of every preceding byte
//
// A rank-0 tensor stores no dims and one element.

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "bassl/autodiff.hpp"

namespace bassl {

class Trainer;

std::vector<std::uint8_t> encode_checkpoint(std::span<const Parameter* const> tensors);
// Throws CorruptCheckpointError on bad magic, version, CRC or layout.
std::vector<Parameter> decode_checkpoint(std::span<const std::uint8_t> bytes);

// Writes to "<path>.tmp" and renames over `path`.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> read_file(const std::filesystem::path& path);

void save_checkpoint(const std::filesystem::path& path, std::span<const Parameter* const> tensors);
std::vector<Parameter> load_checkpoint(const std::filesystem::path& path);

// Whole-trainer state: BA, Q, K, optimizer moments and the step counter.
void save_trainer(Trainer& trainer, const std::filesystem::path& path);
// The checkpoint must hold exactly the trainer's tensor names and shapes.
void load_trainer(Trainer& trainer, const std::filesystem::path& path);

}  // namespace bassl
