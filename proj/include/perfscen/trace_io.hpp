// trace_io.hpp
//
// Trace files are JSON Lines, one record per line:
//
//   {"record":"header","format":"perfscen-trace","version":1,"seed":S,"config":{...}}
//   {"record":"state","t":T,"n_samples":N|null,"w":[...],"residual":R|null,
//    "violation_estimate":V|null,"objective":F,"solver_status":"ok"|"infeasible_fallback"|"none"}
//   {"record":"snapshot","t":T,"labels":[...],"features":[[...],...]}      (optional)
//   {"record":"summary","converged":B,"steps":K,"final_w":[...],"contraction_estimate":C|null}
//
// Numbers are written in shortest round-trip form, so identical runs give
// identical bytes. Wallclock time is not written.
#pragma once

#include "json.hpp"

#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>

#include "perfscen/fixed_point.hpp"

namespace perfscen {

inline constexpr const char* kTraceFormat = "perfscen-trace";
inline constexpr int kTraceVersion = 1;

class TraceFormatError : public std::runtime_error {
public:
    TraceFormatError(std::size_t line, const std::string& what)
        : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

struct TraceFile {
    nlohmann::json config;  // header config snapshot
    Trace trace;
};

void write_trace(std::ostream& out, const Trace& trace, const nlohmann::json& config);
void write_trace_file(const std::filesystem::path& path, const Trace& trace, const nlohmann::json& config);

TraceFile read_trace(std::istream& in);
TraceFile read_trace_file(const std::filesystem::path& path);

/// Shortest decimal string that parses back to exactly `x`.
std::string format_double(double x);

// CSV exports: residuals.csv, schedule.csv, iterates.csv, violations.csv and,
// when the trace has snapshots, snapshots/<t>.csv. One row per state record;
// cells that a terminal state does not carry are left empty.
void export_csv(const Trace& trace, const std::filesystem::path& out_dir);

}  // namespace perfscen
