#pragma once

#include <string>

#include "idr/unet.hpp"

namespace idr {

// Versioned binary checkpoint: 8-byte magic, format version u32, a
// length-prefixed UTF-8 JSON blob holding the ModelConfig, parameter count
// u32, then per parameter: name length u32 + UTF-8 name, rank u32, extents
// u32 each, values as little-endian f32. A CRC32 of everything before it
// closes the file. Round-trips bit-exactly.

void save_checkpoint(const UNet& model, const std::string& path);
UNet load_checkpoint(const std::string& path);

// FNV-1a over the raw parameter bytes, hex string. Used as provenance.
std::string checkpoint_hash(const UNet& model);

}  // namespace idr
