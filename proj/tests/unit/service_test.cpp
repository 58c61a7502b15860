#include <vmsim/error.hpp>
#include <vmsim/times/codec.hpp>
#include <vmsim/times/service.hpp>

#include "support/oracles.hpp"

#include <gtest/gtest.h>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <thread>

using namespace vmsim;
using namespace vmsim::times;
using vmsim::testing::TempDir;

namespace {

class ServiceTest : public ::testing::Test {
protected:
    void SetUp() override {
        store_ = std::make_unique<FileStore>(dir_.path());
        server_ = std::make_unique<TimesServer>(*store_);
        server_->start({"127.0.0.1", 0});
    }
    void TearDown() override { server_->stop(); }

    TimesClient client() { return TimesClient("127.0.0.1", server_->port()); }

    /// Raw socket for malformed frames.
    int raw_connect() {
        const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
        sockaddr_in addr{};
        addr.sin_family = AF_INET;
        addr.sin_port = htons(server_->port());
        addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
        EXPECT_EQ(::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr), 0);
        return fd;
    }

    TempDir dir_;
    std::unique_ptr<FileStore> store_;
    std::unique_ptr<TimesServer> server_;
};

TimeSeries sample_series(const std::string& name, double v) { return {name, 60, 3, {v, v / 2, 0.0}}; }

} // namespace

TEST_F(ServiceTest, PutThenGetIsByteIdentical) {
    auto c = client();
    const auto s = sample_series("w1", 80);
    c.put("w1", s);
    EXPECT_EQ(c.get_blob("w1"), encode_series(s));
    EXPECT_EQ(c.get("w1"), s);
}

TEST_F(ServiceTest, UnknownNameIsNotFoundWithEmptyPayload) {
    auto c = client();
    const auto resp = c.roundtrip(encode_request(Opcode::get, "nope", {}));
    EXPECT_EQ(resp.status, Status::not_found);
    EXPECT_TRUE(resp.payload.empty());
}

TEST_F(ServiceTest, ListReturnsSortedNamesByPrefix) {
    auto c = client();
    for (const char* n : {"b1", "a2", "a1"}) c.put(n, sample_series(n, 10));
    EXPECT_EQ(c.list("a"), (std::vector<std::string>{"a1", "a2"}));
    EXPECT_EQ(c.list(""), (std::vector<std::string>{"a1", "a2", "b1"}));
    EXPECT_TRUE(c.list("q").empty());
}

TEST_F(ServiceTest, BadMagicGetsErrorThenClose) {
    const int fd = raw_connect();
    const std::uint8_t junk[] = {'X', 'X', 1, 2, 0, 0, 0, 0, 0, 0, 0, 0};
    ASSERT_EQ(::send(fd, junk, sizeof junk, 0), static_cast<ssize_t>(sizeof junk));
    std::uint8_t head[5];
    ASSERT_EQ(::recv(fd, head, 5, MSG_WAITALL), 5);
    EXPECT_EQ(head[0], static_cast<std::uint8_t>(Status::error));
    const auto n = get_u32(head + 1);
    std::vector<std::uint8_t> msg(n);
    ASSERT_EQ(::recv(fd, msg.data(), n, MSG_WAITALL), static_cast<ssize_t>(n));
    std::uint8_t extra;
    // Closed: either EOF or a reset, since the unread junk may trigger an RST.
    EXPECT_LE(::recv(fd, &extra, 1, 0), 0);
    ::close(fd);
}

TEST_F(ServiceTest, InvalidRequestsKeepTheConnectionUsable) {
    auto c = client();
    // PUT with a corrupt blob, PUT with a traversal name, unknown opcode.
    const std::uint8_t garbage[] = {1, 2, 3};
    EXPECT_EQ(c.roundtrip(encode_request(Opcode::put, "w", garbage)).status, Status::error);
    EXPECT_EQ(c.roundtrip(encode_request(Opcode::put, "../w", encode_series(sample_series("w", 1)))).status,
              Status::error);
    EXPECT_EQ(c.roundtrip(encode_request(static_cast<Opcode>(0x09), "w", {})).status, Status::error);
    c.put("ok", sample_series("ok", 5));
    EXPECT_EQ(c.get("ok"), sample_series("ok", 5));
}

TEST_F(ServiceTest, TenConcurrentClients) {
    constexpr int kClients = 10;
    std::vector<std::thread> threads;
    std::atomic<int> failures{0};
    for (int k = 0; k < kClients; ++k) {
        threads.emplace_back([&, k] {
            try {
                TimesClient c("127.0.0.1", server_->port());
                for (int rep = 0; rep < 25; ++rep) {
                    const auto name = "c" + std::to_string(k) + "_" + std::to_string(rep);
                    const auto s = sample_series(name, (k * 7 + rep) % 100);
                    c.put(name, s);
                    if (c.get_blob(name) != encode_series(s)) ++failures;
                }
            } catch (const std::exception&) {
                ++failures;
            }
        });
    }
    for (auto& t : threads) t.join();
    EXPECT_EQ(failures.load(), 0);
    EXPECT_EQ(store_->list("c").size(), static_cast<std::size_t>(kClients * 25));
}

TEST_F(ServiceTest, ConcurrentPutsToOneNameStayIntact) {
    constexpr int kClients = 6;
    std::vector<TimeSeries> variants;
    for (int k = 0; k < kClients; ++k) {
        variants.push_back({"hot", 0, 1, std::vector<double>(5000, static_cast<double>(k))});
    }
    std::vector<std::thread> threads;
    for (int k = 0; k < kClients; ++k) {
        threads.emplace_back([&, k] {
            TimesClient c("127.0.0.1", server_->port());
            for (int rep = 0; rep < 5; ++rep) c.put("hot", variants[k]);
        });
    }
    for (auto& t : threads) t.join();
    auto c = client();
    const auto got = c.get("hot");
    EXPECT_NE(std::find(variants.begin(), variants.end(), got), variants.end());
}

TEST(ServiceBind, ReportsBindFailure) {
    TempDir dir;
    FileStore store(dir.path());
    TimesServer first(store);
    first.start({"127.0.0.1", 0});
    TimesServer second(store);
    try {
        second.start({"127.0.0.1", first.port()});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::BindFailure);
    }
}

TEST(Endpoint, Parsing) {
    const auto ep = parse_endpoint("localhost:7855");
    ASSERT_TRUE(ep);
    EXPECT_EQ(ep->host, "localhost");
    EXPECT_EQ(ep->port, 7855);
    EXPECT_FALSE(parse_endpoint("localhost"));
    EXPECT_FALSE(parse_endpoint(":80"));
    EXPECT_FALSE(parse_endpoint("h:99999"));
    EXPECT_FALSE(parse_endpoint("h:12x"));
}
