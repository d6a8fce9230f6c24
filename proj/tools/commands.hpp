// commands.hpp
//
// Subcommands of the perfscen tool. Each returns a process exit code:
// 0 success, 1 invalid input (flags, config, trace format), 2 runtime
// failure, 3 I/O failure.
#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

namespace perfscen::cli {

enum ExitCode : int { kOk = 0, kValidation = 1, kRuntime = 2, kIo = 3 };

// Output directory used when --out is absent.
inline constexpr const char* kOutDirEnv = "PERFSCEN_OUT_DIR";

struct RunOptions {
    std::filesystem::path config;
    std::optional<std::filesystem::path> out_dir;
    std::optional<std::uint64_t> seed;
    std::size_t sweep{1};
    bool check{false};  // fixed-point self-consistency at the final iterate
    bool quiet{false};
};

int cmd_sample_size(double epsilon, double beta, std::size_t dim, bool show_tail, std::ostream& out);
int cmd_run(const RunOptions& options, std::ostream& out);
int cmd_nash(const std::filesystem::path& config, std::ostream& out);
int cmd_export_csv(const std::filesystem::path& trace, const std::filesystem::path& out_dir, std::ostream& out);

// Parses argv and dispatches; all errors are reported on `err`.
int run_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace perfscen::cli
