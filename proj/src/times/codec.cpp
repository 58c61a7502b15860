#include <vmsim/times/codec.hpp>

#include <vmsim/error.hpp>

#include <bit>
#include <cmath>
#include <cstring>

namespace vmsim::times {

void put_u32(Bytes& out, std::uint32_t v) {
    for (int shift = 24; shift >= 0; shift -= 8) {
        out.push_back(static_cast<std::uint8_t>(v >> shift));
    }
}

void put_u64(Bytes& out, std::uint64_t v) {
    for (int shift = 56; shift >= 0; shift -= 8) {
        out.push_back(static_cast<std::uint8_t>(v >> shift));
    }
}

std::uint32_t get_u32(const std::uint8_t* p) noexcept {
    return (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) | (std::uint32_t{p[2]} << 8) |
           std::uint32_t{p[3]};
}

std::uint64_t get_u64(const std::uint8_t* p) noexcept {
    return (std::uint64_t{get_u32(p)} << 32) | get_u32(p + 4);
}

std::size_t encoded_size(const TimeSeries& series) noexcept {
    return 4 + 4 + series.name.size() + 8 + 4 + 4 + 8 * series.samples.size();
}

Bytes encode_series(const TimeSeries& series) {
    if (series.name.size() > kMaxNameLength) {
        throw Error(Errc::NameTooLong, "series name exceeds 65535 octets");
    }
    series.validate();
    Bytes out;
    out.reserve(encoded_size(series));
    out.insert(out.end(), std::begin(kSeriesMagic), std::end(kSeriesMagic));
    put_u32(out, static_cast<std::uint32_t>(series.name.size()));
    out.insert(out.end(), series.name.begin(), series.name.end());
    put_u64(out, static_cast<std::uint64_t>(series.start_s));
    put_u32(out, series.interval_s);
    put_u32(out, static_cast<std::uint32_t>(series.samples.size()));
    for (double s : series.samples) {
        put_u64(out, std::bit_cast<std::uint64_t>(s));
    }
    return out;
}

namespace {

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    const std::uint8_t* take(std::size_t n, const char* what) {
        if (bytes_.size() - pos_ < n) {
            throw Error(Errc::TruncatedPayload, std::string("TSB1 blob truncated in ") + what);
        }
        const auto* p = bytes_.data() + pos_;
        pos_ += n;
        return p;
    }

    std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

private:
    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

} // namespace

TimeSeries decode_series(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 4 || std::memcmp(bytes.data(), kSeriesMagic, 4) != 0) {
        throw Error(Errc::BadMagic, "not a TSB1 blob");
    }
    Reader in(bytes.subspan(4));
    const std::uint32_t name_len = get_u32(in.take(4, "name length"));
    if (name_len > kMaxNameLength) {
        throw Error(Errc::NameTooLong, "TSB1 name length exceeds 65535");
    }
    const auto* name = in.take(name_len, "name");
    TimeSeries series;
    series.name.assign(reinterpret_cast<const char*>(name), name_len);
    series.start_s = static_cast<std::int64_t>(get_u64(in.take(8, "start_s")));
    series.interval_s = get_u32(in.take(4, "interval_s"));
    if (series.interval_s == 0) {
        throw Error(Errc::InvalidSeries, "TSB1 interval_s is zero");
    }
    const std::uint32_t count = get_u32(in.take(4, "count"));
    if (in.remaining() / 8 < count) {
        throw Error(Errc::TruncatedPayload, "TSB1 declares " + std::to_string(count) +
                                                " samples but only " +
                                                std::to_string(in.remaining() / 8) + " present");
    }
    series.samples.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        const double s = std::bit_cast<double>(get_u64(in.take(8, "samples")));
        if (!std::isfinite(s) || s < 0.0 || s > 100.0) {
            throw Error(Errc::InvalidSample, "TSB1 sample " + std::to_string(i) + " invalid");
        }
        series.samples.push_back(s);
    }
    if (in.remaining() != 0) {
        throw Error(Errc::TruncatedPayload, "TSB1 blob has trailing octets");
    }
    return series;
}

} // namespace vmsim::times
