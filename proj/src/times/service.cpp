#include <vmsim/times/service.hpp>

#include <vmsim/error.hpp>

#include <arpa/inet.h>
#include <cerrno>
#include <charconv>
#include <cstring>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>

namespace vmsim::times {

std::optional<Endpoint> parse_endpoint(const std::string& text) {
    const auto colon = text.rfind(':');
    if (colon == std::string::npos || colon == 0 || colon + 1 == text.size()) {
        return std::nullopt;
    }
    unsigned port = 0;
    const char* first = text.data() + colon + 1;
    const char* last = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(first, last, port);
    if (ec != std::errc{} || ptr != last || port > 65535) {
        return std::nullopt;
    }
    return Endpoint{text.substr(0, colon), static_cast<std::uint16_t>(port)};
}

Bytes encode_request(Opcode op, const std::string& name, std::span<const std::uint8_t> payload) {
    Bytes frame;
    frame.reserve(12 + name.size() + payload.size());
    frame.insert(frame.end(), std::begin(kFrameMagic), std::end(kFrameMagic));
    frame.push_back(kProtocolVersion);
    frame.push_back(static_cast<std::uint8_t>(op));
    put_u32(frame, static_cast<std::uint32_t>(name.size()));
    frame.insert(frame.end(), name.begin(), name.end());
    put_u32(frame, static_cast<std::uint32_t>(payload.size()));
    frame.insert(frame.end(), payload.begin(), payload.end());
    return frame;
}

namespace {

bool write_all(int fd, const std::uint8_t* data, std::size_t n) {
    while (n > 0) {
        const auto w = ::send(fd, data, n, MSG_NOSIGNAL);
        if (w < 0 && errno == EINTR) continue;
        if (w <= 0) return false;
        data += w;
        n -= static_cast<std::size_t>(w);
    }
    return true;
}

/// Reads exactly n octets. Returns false on EOF, error, or when `stop` is
/// raised while waiting.
bool read_all(int fd, std::uint8_t* data, std::size_t n, const std::atomic<bool>* stop = nullptr) {
    while (n > 0) {
        if (stop) {
            pollfd p{fd, POLLIN, 0};
            const int r = ::poll(&p, 1, 100);
            if (stop->load()) return false;
            if (r == 0 || (r < 0 && errno == EINTR)) continue;
            if (r < 0) return false;
        }
        const auto got = ::recv(fd, data, n, 0);
        if (got < 0 && errno == EINTR) continue;
        if (got <= 0) return false;
        data += got;
        n -= static_cast<std::size_t>(got);
    }
    return true;
}

bool send_response(int fd, Status status, std::span<const std::uint8_t> payload) {
    Bytes out;
    out.reserve(5 + payload.size());
    out.push_back(static_cast<std::uint8_t>(status));
    put_u32(out, static_cast<std::uint32_t>(payload.size()));
    out.insert(out.end(), payload.begin(), payload.end());
    return write_all(fd, out.data(), out.size());
}

bool send_error(int fd, const std::string& message) {
    return send_response(fd, Status::error,
                         {reinterpret_cast<const std::uint8_t*>(message.data()), message.size()});
}

} // namespace

TimesServer::TimesServer(FileStore& store) : store_(store) {}

TimesServer::~TimesServer() { stop(); }

void TimesServer::start(const Endpoint& listen) {
    addrinfo hints{};
    hints.ai_family = AF_INET;
    hints.ai_socktype = SOCK_STREAM;
    hints.ai_flags = AI_PASSIVE;
    addrinfo* res = nullptr;
    const auto service = std::to_string(listen.port);
    const char* host = listen.host.empty() || listen.host == "*" ? nullptr : listen.host.c_str();
    if (::getaddrinfo(host, service.c_str(), &hints, &res) != 0 || res == nullptr) {
        throw Error(Errc::BindFailure, "cannot resolve listen address " + listen.host);
    }
    listen_fd_ = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
    int one = 1;
    ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    const bool ok = listen_fd_ >= 0 && ::bind(listen_fd_, res->ai_addr, res->ai_addrlen) == 0 &&
                    ::listen(listen_fd_, 64) == 0;
    ::freeaddrinfo(res);
    if (!ok) {
        const std::string why = std::strerror(errno);
        if (listen_fd_ >= 0) ::close(listen_fd_);
        listen_fd_ = -1;
        throw Error(Errc::BindFailure, "cannot bind " + listen.host + ":" + service + ": " + why);
    }
    sockaddr_in bound{};
    socklen_t len = sizeof bound;
    ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&bound), &len);
    port_ = ntohs(bound.sin_port);
    stopping_ = false;
    acceptor_ = std::thread([this] { accept_loop(); });
}

void TimesServer::stop() {
    if (stopping_.exchange(true)) return;
    if (acceptor_.joinable()) acceptor_.join();
    std::vector<std::thread> conns;
    {
        std::lock_guard lock(conn_mutex_);
        for (int fd : open_fds_) ::shutdown(fd, SHUT_RDWR);
        conns.swap(connections_);
    }
    for (auto& t : conns) t.join();
    if (listen_fd_ >= 0) ::close(listen_fd_);
    listen_fd_ = -1;
}

void TimesServer::accept_loop() {
    while (!stopping_) {
        pollfd p{listen_fd_, POLLIN, 0};
        const int r = ::poll(&p, 1, 100);
        if (r <= 0) continue;
        const int fd = ::accept(listen_fd_, nullptr, nullptr);
        if (fd < 0) continue;
        int one = 1;
        ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
        std::lock_guard lock(conn_mutex_);
        open_fds_.push_back(fd);
        connections_.emplace_back([this, fd] { serve_connection(fd); });
    }
}

void TimesServer::serve_connection(int fd) {
    for (;;) {
        std::uint8_t head[4];
        if (!read_all(fd, head, 2, &stopping_)) break;
        if (head[0] != kFrameMagic[0] || head[1] != kFrameMagic[1]) {
            send_error(fd, "bad frame magic");
            break;
        }
        if (!read_all(fd, head + 2, 2, &stopping_)) break;
        if (head[2] != kProtocolVersion) {
            send_error(fd, "unsupported protocol version");
            break;
        }
        std::uint8_t len[4];
        if (!read_all(fd, len, 4, &stopping_)) break;
        const std::uint32_t name_len = get_u32(len);
        if (name_len > kMaxNameLength) {
            send_error(fd, "name too long");
            break;
        }
        std::string name(name_len, '\0');
        if (!read_all(fd, reinterpret_cast<std::uint8_t*>(name.data()), name_len, &stopping_)) break;
        if (!read_all(fd, len, 4, &stopping_)) break;
        const std::uint32_t payload_len = get_u32(len);
        if (payload_len > kMaxPayload) {
            send_error(fd, "payload too large");
            break;
        }
        Bytes payload(payload_len);
        if (!read_all(fd, payload.data(), payload_len, &stopping_)) break;

        bool sent = false;
        try {
            switch (static_cast<Opcode>(head[3])) {
            case Opcode::put: {
                // Validate before storing so a bad blob never reaches disk.
                decode_series(payload);
                store_.put_blob(name, payload);
                sent = send_response(fd, Status::ok, {});
                break;
            }
            case Opcode::get: {
                const auto blob = store_.get_blob(name);
                sent = send_response(fd, Status::ok, blob);
                break;
            }
            case Opcode::list: {
                std::string joined;
                for (const auto& n : store_.list(name)) {
                    if (!joined.empty()) joined += '\n';
                    joined += n;
                }
                sent = send_response(
                    fd, Status::ok, {reinterpret_cast<const std::uint8_t*>(joined.data()), joined.size()});
                break;
            }
            default:
                sent = send_error(fd, "unknown opcode");
                break;
            }
        } catch (const Error& e) {
            sent = e.code() == Errc::NotFound ? send_response(fd, Status::not_found, {})
                                              : send_error(fd, e.what());
        } catch (const std::exception& e) {
            sent = send_error(fd, e.what());
        }
        if (!sent) break;
    }
    std::lock_guard lock(conn_mutex_);
    open_fds_.erase(std::remove(open_fds_.begin(), open_fds_.end(), fd), open_fds_.end());
    ::close(fd);
}

TimesClient::TimesClient(std::string host, std::uint16_t port) : host_(std::move(host)), port_(port) {}

TimesClient::~TimesClient() { disconnect(); }

void TimesClient::disconnect() noexcept {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
}

void TimesClient::ensure_connected() {
    if (fd_ >= 0) return;
    addrinfo hints{};
    hints.ai_family = AF_INET;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    const auto service = std::to_string(port_);
    if (::getaddrinfo(host_.c_str(), service.c_str(), &hints, &res) != 0 || res == nullptr) {
        throw Error(Errc::StorageFailure, "cannot resolve " + host_);
    }
    fd_ = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
    const bool ok = fd_ >= 0 && ::connect(fd_, res->ai_addr, res->ai_addrlen) == 0;
    ::freeaddrinfo(res);
    if (!ok) {
        disconnect();
        throw Error(Errc::StorageFailure, "cannot connect to " + host_ + ":" + service);
    }
    int one = 1;
    ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
}

TimesClient::Response TimesClient::roundtrip(std::span<const std::uint8_t> frame) {
    ensure_connected();
    if (!write_all(fd_, frame.data(), frame.size())) {
        disconnect();
        throw Error(Errc::StorageFailure, "connection lost while sending");
    }
    std::uint8_t head[5];
    if (!read_all(fd_, head, 5)) {
        disconnect();
        throw Error(Errc::ProtocolError, "connection closed before response");
    }
    Response resp;
    resp.status = static_cast<Status>(head[0]);
    const std::uint32_t n = get_u32(head + 1);
    if (n > kMaxPayload) {
        disconnect();
        throw Error(Errc::ProtocolError, "response payload too large");
    }
    resp.payload.resize(n);
    if (!read_all(fd_, resp.payload.data(), n)) {
        disconnect();
        throw Error(Errc::ProtocolError, "truncated response");
    }
    if (resp.status == Status::error) {
        // The server may close after an error; reconnect lazily next time.
        disconnect();
    }
    return resp;
}

namespace {

[[noreturn]] void raise_from(const TimesClient::Response& resp, const std::string& name) {
    if (resp.status == Status::not_found) {
        throw Error(Errc::NotFound, "no series named '" + name + "'");
    }
    throw Error(Errc::StorageFailure,
                "server error: " + std::string(resp.payload.begin(), resp.payload.end()));
}

} // namespace

void TimesClient::put(const std::string& name, const TimeSeries& series) {
    if (!is_valid_name(name)) {
        throw Error(Errc::InvalidName, "invalid series name '" + name + "'");
    }
    const auto resp = roundtrip(encode_request(Opcode::put, name, encode_series(series)));
    if (resp.status != Status::ok) raise_from(resp, name);
}

std::vector<std::uint8_t> TimesClient::get_blob(const std::string& name) {
    auto resp = roundtrip(encode_request(Opcode::get, name, {}));
    if (resp.status != Status::ok) raise_from(resp, name);
    return std::move(resp.payload);
}

TimeSeries TimesClient::get(const std::string& name) { return decode_series(get_blob(name)); }

std::vector<std::string> TimesClient::list(std::string_view prefix) {
    const auto resp = roundtrip(encode_request(Opcode::list, std::string(prefix), {}));
    if (resp.status != Status::ok) raise_from(resp, std::string(prefix));
    std::vector<std::string> names;
    std::string current;
    for (auto c : resp.payload) {
        if (c == '\n') {
            names.push_back(std::move(current));
            current.clear();
        } else {
            current.push_back(static_cast<char>(c));
        }
    }
    if (!current.empty()) names.push_back(std::move(current));
    return names;
}

} // namespace vmsim::times
