#include "perfscen/trace_io.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <system_error>

#include "perfscen/config.hpp"
#include "perfscen/error.hpp"

namespace perfscen {

using nlohmann::json;

namespace {

json vector_json(const Eigen::VectorXd& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
}

Eigen::VectorXd vector_from(const json& a, std::size_t line, const char* what) {
    if (!a.is_array()) throw TraceFormatError(line, std::string(what) + " must be an array");
    Eigen::VectorXd v(static_cast<Eigen::Index>(a.size()));
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (!a[i].is_number()) throw TraceFormatError(line, std::string(what) + " must hold numbers");
        v[static_cast<Eigen::Index>(i)] = a[i].get<double>();
    }
    return v;
}

template <class T>
std::optional<T> optional_number(const json& rec, const char* key, std::size_t line) {
    auto it = rec.find(key);
    if (it == rec.end()) throw TraceFormatError(line, std::string("missing field '") + key + "'");
    if (it->is_null()) return std::nullopt;
    if (!it->is_number()) throw TraceFormatError(line, std::string("field '") + key + "' must be a number");
    return it->get<T>();
}

const json& required(const json& rec, const char* key, std::size_t line) {
    auto it = rec.find(key);
    if (it == rec.end()) throw TraceFormatError(line, std::string("missing field '") + key + "'");
    return *it;
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    return out;
}

}  // namespace

std::string format_double(double x) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
    if (ec != std::errc()) return "nan";
    return std::string(buf, ptr);
}

void write_trace(std::ostream& out, const Trace& trace, const json& config) {
    out << json{{"record", "header"}, {"format", kTraceFormat}, {"version", kTraceVersion},
                {"seed", trace.seed}, {"config", config}}.dump()
        << '\n';
    auto snap = trace.snapshots.begin();
    for (const auto& s : trace.states) {
        const bool executed = s.residual.has_value();
        json rec{{"record", "state"},
                 {"t", s.t},
                 {"n_samples", executed ? json(s.samples_used) : json(nullptr)},
                 {"w", vector_json(s.iterate)},
                 {"residual", executed ? json(*s.residual) : json(nullptr)},
                 {"violation_estimate", s.violation_estimate ? json(*s.violation_estimate) : json(nullptr)},
                 {"objective", s.objective},
                 {"solver_status", to_string(s.solver_status)}};
        out << rec.dump() << '\n';
        while (snap != trace.snapshots.end() && snap->t == s.t) {
            json labels = json::array();
            json features = json::array();
            for (const auto& sc : snap->samples) {
                labels.push_back(sc.label);
                features.push_back(vector_json(sc.features));
            }
            out << json{{"record", "snapshot"}, {"t", snap->t}, {"labels", labels}, {"features", features}}.dump()
                << '\n';
            ++snap;
        }
    }
    json summary{{"record", "summary"},
                 {"converged", trace.summary.converged},
                 {"steps", trace.summary.steps},
                 {"final_w", vector_json(trace.summary.final_iterate)},
                 {"contraction_estimate",
                  trace.summary.contraction_estimate ? json(*trace.summary.contraction_estimate) : json(nullptr)}};
    out << summary.dump() << '\n';
}

void write_trace_file(const std::filesystem::path& path, const Trace& trace, const json& config) {
    auto out = open_out(path);
    write_trace(out, trace, config);
    if (!out) throw IoError("failed writing '" + path.string() + "'");
}

TraceFile read_trace(std::istream& in) {
    TraceFile file;
    std::string text;
    std::size_t line = 0;
    bool have_header = false;
    bool have_summary = false;
    while (std::getline(in, text)) {
        ++line;
        if (text.empty()) continue;
        if (have_summary) throw TraceFormatError(line, "record after the summary");
        json rec;
        try {
            rec = json::parse(text);
        } catch (const json::parse_error& e) {
            throw TraceFormatError(line, std::string("malformed JSON: ") + e.what());
        }
        if (!rec.is_object()) throw TraceFormatError(line, "record must be an object");
        const json& kind = required(rec, "record", line);
        if (!kind.is_string()) throw TraceFormatError(line, "'record' must be a string");
        const std::string k = kind.get<std::string>();

        try {
            if (k == "header") {
                if (have_header) throw TraceFormatError(line, "duplicate header");
                if (required(rec, "format", line) != kTraceFormat)
                    throw TraceFormatError(line, "not a perfscen trace");
                if (required(rec, "version", line) != kTraceVersion)
                    throw TraceFormatError(line, "unsupported trace version");
                file.trace.seed = required(rec, "seed", line).get<std::uint64_t>();
                file.config = required(rec, "config", line);
                have_header = true;
                continue;
            }
            if (!have_header) throw TraceFormatError(line, "expected the header record first");
            if (k == "state") {
                IterationState s;
                s.t = required(rec, "t", line).get<std::size_t>();
                if (s.t != file.trace.states.size())
                    throw TraceFormatError(line, "state t values must be consecutive from 0");
                const auto n = optional_number<std::size_t>(rec, "n_samples", line);
                s.samples_used = n.value_or(0);
                s.iterate = vector_from(required(rec, "w", line), line, "w");
                s.residual = optional_number<double>(rec, "residual", line);
                s.violation_estimate = optional_number<double>(rec, "violation_estimate", line);
                s.objective = required(rec, "objective", line).get<double>();
                s.solver_status = solver_status_from_string(required(rec, "solver_status", line).get<std::string>());
                file.trace.states.push_back(std::move(s));
            } else if (k == "snapshot") {
                Snapshot snap;
                snap.t = required(rec, "t", line).get<std::size_t>();
                const json& labels = required(rec, "labels", line);
                const json& features = required(rec, "features", line);
                if (!labels.is_array() || !features.is_array() || labels.size() != features.size())
                    throw TraceFormatError(line, "labels and features must be arrays of equal length");
                for (std::size_t i = 0; i < labels.size(); ++i)
                    snap.samples.push_back({vector_from(features[i], line, "features"), labels[i].get<int>()});
                file.trace.snapshots.push_back(std::move(snap));
            } else if (k == "summary") {
                file.trace.summary.converged = required(rec, "converged", line).get<bool>();
                file.trace.summary.steps = required(rec, "steps", line).get<std::size_t>();
                file.trace.summary.final_iterate = vector_from(required(rec, "final_w", line), line, "final_w");
                file.trace.summary.contraction_estimate = optional_number<double>(rec, "contraction_estimate", line);
                have_summary = true;
            } else {
                throw TraceFormatError(line, "unknown record type '" + k + "'");
            }
        } catch (const json::exception& e) {
            throw TraceFormatError(line, e.what());
        } catch (const InvalidParameter& e) {
            throw TraceFormatError(line, e.what());
        }
    }
    if (!have_header) throw TraceFormatError(line, "trace is empty or lacks a header");
    if (!have_summary) throw TraceFormatError(line, "trace lacks a summary record");
    if (file.trace.states.empty()) throw TraceFormatError(line, "trace has no state records");
    return file;
}

TraceFile read_trace_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    return read_trace(in);
}

void export_csv(const Trace& trace, const std::filesystem::path& out_dir) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create '" + out_dir.string() + "': " + ec.message());

    auto residuals = open_out(out_dir / "residuals.csv");
    auto schedule = open_out(out_dir / "schedule.csv");
    auto iterates = open_out(out_dir / "iterates.csv");
    auto violations = open_out(out_dir / "violations.csv");
    residuals << "t,residual\n";
    schedule << "t,n_samples\n";
    violations << "t,violation_estimate\n";
    iterates << "t";
    const Eigen::Index d = trace.states.front().iterate.size();
    for (Eigen::Index j = 0; j < d; ++j) iterates << ",w" << j;
    iterates << '\n';

    for (const auto& s : trace.states) {
        const bool executed = s.residual.has_value();
        residuals << s.t << ',' << (executed ? format_double(*s.residual) : "") << '\n';
        schedule << s.t << ',' << (executed ? std::to_string(s.samples_used) : "") << '\n';
        violations << s.t << ',' << (s.violation_estimate ? format_double(*s.violation_estimate) : "") << '\n';
        iterates << s.t;
        for (Eigen::Index j = 0; j < s.iterate.size(); ++j) iterates << ',' << format_double(s.iterate[j]);
        iterates << '\n';
    }
    for (auto* f : {&residuals, &schedule, &iterates, &violations})
        if (!*f) throw IoError("failed writing CSV files under '" + out_dir.string() + "'");

    if (trace.snapshots.empty()) return;
    const auto snap_dir = out_dir / "snapshots";
    std::filesystem::create_directories(snap_dir, ec);
    if (ec) throw IoError("cannot create '" + snap_dir.string() + "': " + ec.message());
    for (const auto& snap : trace.snapshots) {
        auto out = open_out(snap_dir / (std::to_string(snap.t) + ".csv"));
        out << "label";
        for (Eigen::Index j = 0; j < d; ++j) out << ",x" << j;
        out << '\n';
        for (const auto& sc : snap.samples) {
            out << sc.label;
            for (Eigen::Index j = 0; j < sc.features.size(); ++j) out << ',' << format_double(sc.features[j]);
            out << '\n';
        }
    }
}

}  // namespace perfscen
