#pragma once

#include <algorithm>
#include <span>

#include "cantids/types.hpp"

namespace cantids {

struct BitSizeOptions {
  bool worst_case_stuffing = true;
};

// Fixed field widths of a data frame, in bits.
//   standard: SOF 1, ID 11, RTR 1, IDE 1, r0 1, DLC 4, data, CRC 15,
//             CRC delimiter 1, ACK 2, EOF 7, interframe space 3
//   extended: SOF 1, ID 11, SRR 1, IDE 1, ID 18, RTR 1, r1 1, r0 1, DLC 4,
//             data, CRC 15, CRC delimiter 1, ACK 2, EOF 7, interframe space 3
// Stuffing applies from SOF through the CRC sequence.
inline constexpr int kStandardOverheadBits = 47;
inline constexpr int kExtendedOverheadBits = 67;
inline constexpr int kStandardStuffableBits = 34;
inline constexpr int kExtendedStuffableBits = 54;

inline int frame_bit_size(int dlc, bool extended, BitSizeOptions opts = {}) {
  const int data_bits = 8 * dlc;
  int bits = (extended ? kExtendedOverheadBits : kStandardOverheadBits) + data_bits;
  if (opts.worst_case_stuffing) {
    const int stuffable = (extended ? kExtendedStuffableBits : kStandardStuffableBits) + data_bits;
    bits += (stuffable - 1) / 4;
  }
  return bits;
}

inline int frame_bit_size(const CanFrame& frame, BitSizeOptions opts = {}) {
  return frame_bit_size(frame.dlc, frame.extended, opts);
}

/// Longest transmission time over the given frames, in milliseconds.
inline double worst_case_tx_time(std::span<const CanFrame> frames, std::uint32_t bitrate,
                                 BitSizeOptions opts = {}) {
  if (frames.empty()) throw ValidationError("worst_case_tx_time: no frames");
  if (bitrate == 0) throw ValidationError("worst_case_tx_time: bitrate must be positive");
  int max_bits = 0;
  for (const auto& f : frames) max_bits = std::max(max_bits, frame_bit_size(f, opts));
  return 1000.0 * max_bits / static_cast<double>(bitrate);
}

}  // namespace cantids
