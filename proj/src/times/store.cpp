#include <vmsim/times/store.hpp>

#include <vmsim/error.hpp>
#include <vmsim/times/codec.hpp>
#include <vmsim/times/service.hpp>

#include <algorithm>
#include <atomic>
#include <fstream>
#include <iterator>
#include <system_error>
#include <unistd.h>

namespace fs = std::filesystem;

namespace vmsim::times {

bool is_valid_name(std::string_view name) noexcept {
    if (name.empty() || name == "." || name == ".." || name.size() > kMaxNameLength) {
        return false;
    }
    return std::all_of(name.begin(), name.end(), [](char c) {
        return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') ||
               c == '_' || c == '.' || c == '-';
    });
}

namespace {

void require_name(const std::string& name) {
    if (!is_valid_name(name)) {
        throw Error(Errc::InvalidName, "invalid series name '" + name + "'");
    }
}

std::atomic<std::uint64_t> temp_counter{0};

} // namespace

FileStore::FileStore(fs::path root) : root_(std::move(root)) {
    std::error_code ec;
    fs::create_directories(root_, ec);
    if (ec || !fs::is_directory(root_)) {
        throw Error(Errc::StorageFailure, "cannot open store at " + root_.string());
    }
}

void FileStore::put(const std::string& name, const TimeSeries& series) {
    require_name(name);
    put_blob(name, encode_series(series));
}

void FileStore::put_blob(const std::string& name, std::span<const std::uint8_t> blob) {
    require_name(name);
    // '~' is outside the name alphabet, so temp files never show up in list().
    const auto temp = root_ / (name + "~" + std::to_string(::getpid()) + "-" +
                               std::to_string(temp_counter.fetch_add(1)));
    {
        std::ofstream out(temp, std::ios::binary | std::ios::trunc);
        out.write(reinterpret_cast<const char*>(blob.data()), static_cast<std::streamsize>(blob.size()));
        out.flush();
        if (!out) {
            std::error_code ignored;
            fs::remove(temp, ignored);
            throw Error(Errc::StorageFailure, "write failed for '" + name + "'");
        }
    }
    std::error_code ec;
    fs::rename(temp, root_ / name, ec);
    if (ec) {
        fs::remove(temp, ec);
        throw Error(Errc::StorageFailure, "cannot replace '" + name + "'");
    }
}

std::vector<std::uint8_t> FileStore::get_blob(const std::string& name) const {
    if (!is_valid_name(name)) {
        throw Error(Errc::NotFound, "no series named '" + name + "'");
    }
    std::ifstream in(root_ / name, std::ios::binary);
    if (!in) {
        throw Error(Errc::NotFound, "no series named '" + name + "'");
    }
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

TimeSeries FileStore::get(const std::string& name) {
    const auto blob = get_blob(name);
    return decode_series(blob);
}

std::vector<std::string> FileStore::list(std::string_view prefix) {
    std::vector<std::string> names;
    std::error_code ec;
    for (const auto& entry : fs::directory_iterator(root_, ec)) {
        if (!entry.is_regular_file()) continue;
        auto name = entry.path().filename().string();
        if (is_valid_name(name) && name.starts_with(prefix)) {
            names.push_back(std::move(name));
        }
    }
    if (ec) {
        throw Error(Errc::StorageFailure, "cannot list store at " + root_.string());
    }
    std::sort(names.begin(), names.end());
    return names;
}

std::unique_ptr<WorkloadSource> open_workloads(const std::string& location) {
    std::error_code ec;
    if (fs::is_directory(location, ec)) {
        return std::make_unique<FileStore>(location);
    }
    if (auto endpoint = parse_endpoint(location)) {
        return std::make_unique<TimesClient>(endpoint->host, endpoint->port);
    }
    throw Error(Errc::WorkloadMissing,
                "workloads '" + location + "' is neither a directory nor HOST:PORT");
}

} // namespace vmsim::times
