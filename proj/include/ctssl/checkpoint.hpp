#pragma once

#include <filesystem>
#include <iosfwd>

#include "ctssl/unet.hpp"

namespace ctssl {

/// Parameter checkpoint, all fields little-endian:
///
///   offset  size  field
///   0       8     magic "CTSSLNET"
///   8       4     uint32 format version (1)
///   12      4     uint32 depth
///   16      4     uint32 base_channels
///   20      4     uint32 kernel_size
///   24      4     uint32 skip_connections (0 or 1)
///   28      4     float32 leaky_slope
///   32      8     uint64 parameter count N
///   40      4*N   float32 parameters in layout order
///
/// Parameters are stored in single precision.
struct Checkpoint {
  NetConfig net;
  ParamVector params;
};

/// True if a stored network header describes `net` (the slope is compared
/// in single precision).
bool header_matches(const NetConfig& stored, const NetConfig& net);

void write_checkpoint(std::ostream& out, const NetConfig& net, const ParamVector& params);
Checkpoint read_checkpoint(std::istream& in);

void save_checkpoint(const std::filesystem::path& path, const NetConfig& net,
                     const ParamVector& params);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace ctssl
