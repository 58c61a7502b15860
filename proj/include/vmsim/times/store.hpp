#pragma once

#include <vmsim/model.hpp>

#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace vmsim::times {

/// Names are case-sensitive and restricted to [A-Za-z0-9_.-]+ (and never
/// "." or ".."), so a name is always a plain file name under the root.
bool is_valid_name(std::string_view name) noexcept;

/// Anything that can hand out workload series by name: a local store
/// directory or a remote Times service.
class WorkloadSource {
public:
    virtual ~WorkloadSource() = default;
    virtual TimeSeries get(const std::string& name) = 0;
    virtual std::vector<std::string> list(std::string_view prefix) = 0;
};

/// One TSB1 file per series directly under `root`. Writes go to a temp file
/// and are renamed into place, so readers see either the old or the new blob.
class FileStore final : public WorkloadSource {
public:
    /// Creates `root` if missing.
    explicit FileStore(std::filesystem::path root);

    void put(const std::string& name, const TimeSeries& series);
    void put_blob(const std::string& name, std::span<const std::uint8_t> blob);
    TimeSeries get(const std::string& name) override;
    std::vector<std::uint8_t> get_blob(const std::string& name) const;
    std::vector<std::string> list(std::string_view prefix) override;

    const std::filesystem::path& root() const noexcept { return root_; }

private:
    std::filesystem::path root_;
};

/// Opens a workload source from a config string: an existing directory, or
/// HOST:PORT of a running Times service.
std::unique_ptr<WorkloadSource> open_workloads(const std::string& location);

} // namespace vmsim::times
