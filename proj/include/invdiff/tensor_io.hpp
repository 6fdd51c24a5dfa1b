#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "invdiff/tensor.hpp"

namespace invdiff {

/// INVDIFF1 container: 8-byte ASCII magic "INVDIFF1", u32-LE header length,
/// UTF-8 JSON header, then the payload as f32 little-endian in C order
/// (k slowest, n fastest). Writes are byte-reproducible for equal inputs.
struct TensorMeta {
    std::vector<std::int64_t> shape;           // [M,N] or [K,M,N]
    std::vector<double> sigma_edges;           // optional; empty = absent
    std::optional<double> pixel_pitch;
};

/// Values are stored as f32; doubles are rounded to nearest on write.
void tensor_write(const std::string& path, const TensorMeta& meta,
                  const std::vector<double>& payload);

/// Exact inverse of tensor_write; returned doubles are exactly the stored
/// f32 values. Throws std::runtime_error with "bad magic" or
/// "payload length mismatch" on malformed files.
std::pair<TensorMeta, std::vector<double>> tensor_read(const std::string& path);

// Typed wrappers.
void write_image(const std::string& path, const ImageGrid& img);
ImageGrid read_image(const std::string& path);
void write_stack(const std::string& path, const PsdrStack& stack);
PsdrStack read_stack(const std::string& path);

void write_text_file(const std::string& path, const std::string& contents);
std::string read_text_file(const std::string& path);

} // namespace invdiff
