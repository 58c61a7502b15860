#include <vmsim/cli.hpp>

#include <csignal>
#include <iostream>
#include <string>
#include <vector>

namespace {

extern "C" void on_signal(int) { vmsim::cli::shutdown_flag().store(true); }

} // namespace

int main(int argc, char** argv) {
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    std::vector<std::string> args(argv + 1, argv + argc);
    return vmsim::cli::dispatch(args, std::cout, std::cerr);
}
