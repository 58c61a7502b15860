#pragma once

#include <vmsim/times/codec.hpp>
#include <vmsim/times/store.hpp>

#include <atomic>
#include <cstdint>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace vmsim::times {

// Request frame:  0x54 0x4D | version | opcode | name_len u32 | name | payload_len u32 | payload
// Response frame: status | payload_len u32 | payload
inline constexpr std::uint8_t kFrameMagic[2] = {0x54, 0x4D};
inline constexpr std::uint8_t kProtocolVersion = 0x01;
inline constexpr std::uint32_t kMaxPayload = 64u << 20;

enum class Opcode : std::uint8_t { put = 0x01, get = 0x02, list = 0x03 };
enum class Status : std::uint8_t { ok = 0x00, not_found = 0x01, error = 0x02 };

struct Endpoint {
    std::string host;
    std::uint16_t port = 0;
};

/// Parses HOST:PORT. Returns nullopt on anything else.
std::optional<Endpoint> parse_endpoint(const std::string& text);

Bytes encode_request(Opcode op, const std::string& name, std::span<const std::uint8_t> payload);

/// Serves a FileStore over TCP, one thread per connection.
class TimesServer {
public:
    explicit TimesServer(FileStore& store);
    ~TimesServer();

    TimesServer(const TimesServer&) = delete;
    TimesServer& operator=(const TimesServer&) = delete;

    /// Binds and starts accepting in the background. Port 0 picks a free port.
    /// Throws Error(BindFailure).
    void start(const Endpoint& listen);
    void stop();

    /// Actual bound port, valid after start().
    std::uint16_t port() const noexcept { return port_; }

private:
    void accept_loop();
    void serve_connection(int fd);

    FileStore& store_;
    int listen_fd_ = -1;
    std::uint16_t port_ = 0;
    std::atomic<bool> stopping_{false};
    std::thread acceptor_;
    std::mutex conn_mutex_;
    std::vector<std::thread> connections_;
    std::vector<int> open_fds_;
};

/// One connection to a Times service. Not for concurrent use; give each
/// worker its own client.
class TimesClient final : public WorkloadSource {
public:
    TimesClient(std::string host, std::uint16_t port);
    ~TimesClient() override;

    TimesClient(const TimesClient&) = delete;
    TimesClient& operator=(const TimesClient&) = delete;

    void put(const std::string& name, const TimeSeries& series);
    TimeSeries get(const std::string& name) override;
    std::vector<std::uint8_t> get_blob(const std::string& name);
    std::vector<std::string> list(std::string_view prefix) override;

    struct Response {
        Status status = Status::error;
        Bytes payload;
    };
    /// Sends one raw frame and reads the response.
    Response roundtrip(std::span<const std::uint8_t> frame);

private:
    void ensure_connected();
    void disconnect() noexcept;

    std::string host_;
    std::uint16_t port_;
    int fd_ = -1;
};

} // namespace vmsim::times
