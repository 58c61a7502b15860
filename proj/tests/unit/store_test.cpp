#include <vmsim/error.hpp>
#include <vmsim/times/codec.hpp>
#include <vmsim/times/store.hpp>

#include "support/oracles.hpp"

#include <gtest/gtest.h>

#include <thread>

using namespace vmsim;
using namespace vmsim::times;
using vmsim::testing::TempDir;

namespace {

TimeSeries series(const std::string& name, double v, std::size_t n = 3) {
    return {name, 0, 3, std::vector<double>(n, v)};
}

} // namespace

TEST(FileStore, PutThenGet) {
    TempDir dir;
    FileStore store(dir.path());
    store.put("w1", series("w1", 10));
    EXPECT_EQ(store.get("w1"), series("w1", 10));
}

TEST(FileStore, LastWriteWins) {
    TempDir dir;
    FileStore store(dir.path());
    store.put("w1", series("w1", 10));
    store.put("w1", series("w1", 20));
    EXPECT_EQ(store.get("w1"), series("w1", 20));
}

TEST(FileStore, RejectsPathTraversalAndBadNames) {
    TempDir dir;
    FileStore store(dir.path());
    for (const char* bad : {"../x", "a/b", "", ".", "..", "sp ace", "tilde~"}) {
        try {
            store.put(bad, series("x", 1));
            FAIL() << bad;
        } catch (const Error& e) {
            EXPECT_EQ(e.code(), Errc::InvalidName) << bad;
        }
    }
    EXPECT_FALSE(std::filesystem::exists(dir.path().parent_path() / "x"));
}

TEST(FileStore, GetMissingIsNotFound) {
    TempDir dir;
    FileStore store(dir.path());
    try {
        store.get("absent");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::NotFound);
    }
}

TEST(FileStore, ListFiltersAndSorts) {
    TempDir dir;
    FileStore store(dir.path());
    EXPECT_TRUE(store.list("a").empty());
    for (const char* n : {"b1", "a2", "a1"}) store.put(n, series(n, 1));
    EXPECT_EQ(store.list("a"), (std::vector<std::string>{"a1", "a2"}));
    EXPECT_EQ(store.list(""), (std::vector<std::string>{"a1", "a2", "b1"}));
    EXPECT_TRUE(store.list("zz").empty());
}

TEST(FileStore, NamesAreCaseSensitive) {
    TempDir dir;
    FileStore store(dir.path());
    store.put("W", series("W", 1));
    store.put("w", series("w", 2));
    EXPECT_EQ(store.get("W").samples.front(), 1.0);
    EXPECT_EQ(store.get("w").samples.front(), 2.0);
}

TEST(FileStore, ConcurrentWritersLeaveOneIntactSeries) {
    TempDir dir;
    FileStore store(dir.path());
    constexpr int kWriters = 8;
    std::vector<TimeSeries> written;
    for (int k = 0; k < kWriters; ++k) written.push_back(series("hot", k * 10.0, 2000));
    std::vector<std::thread> threads;
    for (int k = 0; k < kWriters; ++k) {
        threads.emplace_back([&, k] {
            for (int rep = 0; rep < 20; ++rep) store.put("hot", written[k]);
        });
    }
    for (auto& t : threads) t.join();
    const auto got = store.get("hot");
    EXPECT_NE(std::find(written.begin(), written.end(), got), written.end());
    EXPECT_EQ(store.list(""), std::vector<std::string>{"hot"});
}

TEST(OpenWorkloads, DirectoryOrAddress) {
    TempDir dir;
    EXPECT_NE(dynamic_cast<FileStore*>(open_workloads(dir.path().string()).get()), nullptr);
    EXPECT_NE(open_workloads("127.0.0.1:9"), nullptr);
    EXPECT_THROW(open_workloads("/definitely/not/here"), Error);
}
