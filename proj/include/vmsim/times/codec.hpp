#pragma once

#include <vmsim/model.hpp>

#include <cstdint>
#include <span>
#include <vector>

namespace vmsim::times {

/// TSB1 blob layout, all big-endian:
///   "TSB1" | name_len u32 | name | start_s i64 | interval_s u32 | count u32 | count x f64
using Bytes = std::vector<std::uint8_t>;

inline constexpr std::uint8_t kSeriesMagic[4] = {0x54, 0x53, 0x42, 0x31};
inline constexpr std::size_t kMaxNameLength = 0xFFFF;

std::size_t encoded_size(const TimeSeries& series) noexcept;

Bytes encode_series(const TimeSeries& series);

/// Rejects arbitrary input with BadMagic, TruncatedPayload, InvalidSample,
/// NameTooLong or InvalidSeries; never reads past `bytes`.
TimeSeries decode_series(std::span<const std::uint8_t> bytes);

// Big-endian helpers shared with the wire protocol.
void put_u32(Bytes& out, std::uint32_t v);
void put_u64(Bytes& out, std::uint64_t v);
std::uint32_t get_u32(const std::uint8_t* p) noexcept;
std::uint64_t get_u64(const std::uint8_t* p) noexcept;

} // namespace vmsim::times
