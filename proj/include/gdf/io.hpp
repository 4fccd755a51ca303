#pragma once

// On-disk formats: event CSV files, model checkpoints and training curves.
//
// A data directory holds
//   totals.csv                    unit_id,customers
//   manifest.csv                  event_id,trajectory_file,covariate_file
//   event_<id>_trajectory.csv     event_id,unit_id,timestamp,outaged_customers
//   event_<id>_covariates.csv     event_id,unit_id,<feature columns>
// Fields are plain comma-separated values without quoting.

#include "gdf/errors.hpp"
#include "gdf/ode.hpp"
#include "gdf/training.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cerrno>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

namespace gdf::io {

namespace fs = std::filesystem;

/// Shortest text that parses back to the same double.
inline std::string format_double(double v) {
    char buf[32];
    for (int precision = 15; precision <= 17; ++precision) {
        std::snprintf(buf, sizeof buf, "%.*g", precision, v);
        if (std::strtod(buf, nullptr) == v) break;
    }
    return buf;
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

struct CsvTable {
    std::string path;
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> lines; // source line of each row

    std::size_t column(const std::string& name) const {
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw DataError(path + ": missing column '" + name + "'");
        return static_cast<std::size_t>(it - header.begin());
    }
    std::string where(std::size_t row, std::size_t col) const {
        return path + ":" + std::to_string(lines[row]) + " column '" + header[col] + "'";
    }
    double number(std::size_t row, std::size_t col) const {
        const std::string& s = rows[row][col];
        char* end = nullptr;
        errno = 0;
        const double v = std::strtod(s.c_str(), &end);
        if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE || !std::isfinite(v)) {
            throw DataError(where(row, col) + ": expected a finite number, got '" + s + "'");
        }
        return v;
    }
};

inline std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) {
        while (!field.empty() && (field.back() == '\r' || field.back() == ' ')) field.pop_back();
        while (!field.empty() && field.front() == ' ') field.erase(field.begin());
        out.push_back(field);
    }
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

inline CsvTable read_csv(const fs::path& path) {
    std::ifstream f(path);
    if (!f) throw DataError("cannot read " + path.string());
    CsvTable t;
    t.path = path.string();
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        auto fields = split_fields(line);
        if (t.header.empty()) {
            t.header = std::move(fields);
            continue;
        }
        if (fields.size() != t.header.size()) {
            throw DataError(t.path + ":" + std::to_string(lineno) + ": expected " + std::to_string(t.header.size()) +
                            " fields, found " + std::to_string(fields.size()));
        }
        t.rows.push_back(std::move(fields));
        t.lines.push_back(lineno);
    }
    if (t.header.empty()) throw DataError(t.path + ": empty file");
    return t;
}

/// Writes text atomically enough for our purposes: whole file or an exception.
inline void write_text(const fs::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("cannot write " + path.string());
    f << text;
    if (!f) throw DataError("write failed for " + path.string());
}

// ---------------------------------------------------------------------------
// Events
// ---------------------------------------------------------------------------

struct Dataset {
    std::vector<std::string> unit_ids;
    std::vector<std::string> features;
    std::vector<ode::HazardEvent> events;
};

inline std::string trajectory_file(const std::string& id) { return "event_" + id + "_trajectory.csv"; }
inline std::string covariate_file(const std::string& id) { return "event_" + id + "_covariates.csv"; }

inline void write_dataset(const fs::path& dir, const Dataset& d) {
    if (d.events.empty()) throw DataError("write_dataset: no events");
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw DataError("cannot create " + dir.string() + ": " + ec.message());

    const std::size_t K = d.unit_ids.size();
    std::string totals = "unit_id,customers\n";
    for (std::size_t k = 0; k < K; ++k) {
        totals += d.unit_ids[k] + "," + format_double(d.events.front().customers[k]) + "\n";
    }
    std::string manifest = "event_id,trajectory_file,covariate_file\n";
    for (const auto& e : d.events) {
        e.validate();
        if (e.units() != K || e.customers != d.events.front().customers) {
            throw DataError("write_dataset: event " + e.id + " does not share the unit totals");
        }
        std::string traj = "event_id,unit_id,timestamp,outaged_customers\n";
        for (std::size_t k = 0; k < K; ++k) {
            for (std::size_t j = 0; j < e.timestamps.size(); ++j) {
                traj += e.id + "," + d.unit_ids[k] + "," + format_double(e.timestamps[j]) + "," +
                        format_double(e.outages[k][j]) + "\n";
            }
        }
        std::string cov = "event_id,unit_id";
        for (const auto& f : d.features) cov += "," + f;
        cov += "\n";
        for (std::size_t k = 0; k < K; ++k) {
            cov += e.id + "," + d.unit_ids[k];
            for (double z : e.covariates[k]) cov += "," + format_double(z);
            cov += "\n";
        }
        write_text(dir / trajectory_file(e.id), traj);
        write_text(dir / covariate_file(e.id), cov);
        manifest += e.id + "," + trajectory_file(e.id) + "," + covariate_file(e.id) + "\n";
    }
    write_text(dir / "totals.csv", totals);
    write_text(dir / "manifest.csv", manifest);
}

namespace detail {

inline ode::HazardEvent read_event(const fs::path& dir, const std::string& id, const std::string& traj_name,
                                   const std::string& cov_name, const std::vector<std::string>& units,
                                   const std::vector<double>& customers, std::vector<std::string>& features) {
    std::map<std::string, std::size_t> index;
    for (std::size_t k = 0; k < units.size(); ++k) index[units[k]] = k;
    auto unit_of = [&](const CsvTable& t, std::size_t row, std::size_t col) {
        const auto it = index.find(t.rows[row][col]);
        if (it == index.end()) throw DataError(t.where(row, col) + ": unknown unit '" + t.rows[row][col] + "'");
        return it->second;
    };
    auto check_event = [&](const CsvTable& t, std::size_t row, std::size_t col) {
        if (t.rows[row][col] != id) throw DataError(t.where(row, col) + ": event id '" + t.rows[row][col] + "' differs from manifest '" + id + "'");
    };

    ode::HazardEvent e;
    e.id = id;
    e.customers = customers;

    const CsvTable cov = read_csv(dir / cov_name);
    const std::size_t ce = cov.column("event_id"), cu = cov.column("unit_id");
    std::vector<std::string> names;
    std::vector<std::size_t> fcols;
    for (std::size_t c = 0; c < cov.header.size(); ++c) {
        if (c != ce && c != cu) {
            names.push_back(cov.header[c]);
            fcols.push_back(c);
        }
    }
    if (names.empty()) throw DataError(cov.path + ": no feature columns");
    if (features.empty()) features = names;
    else if (features != names) throw DataError(cov.path + ": feature columns differ from earlier events");
    e.covariates.assign(units.size(), {});
    for (std::size_t r = 0; r < cov.rows.size(); ++r) {
        check_event(cov, r, ce);
        const std::size_t k = unit_of(cov, r, cu);
        if (!e.covariates[k].empty()) throw DataError(cov.where(r, cu) + ": duplicate unit");
        for (std::size_t c : fcols) e.covariates[k].push_back(cov.number(r, c));
    }
    for (std::size_t k = 0; k < units.size(); ++k) {
        if (e.covariates[k].empty()) throw DataError(cov.path + ": no covariates for unit '" + units[k] + "'");
    }

    const CsvTable traj = read_csv(dir / traj_name);
    const std::size_t te = traj.column("event_id"), tu = traj.column("unit_id"), tt = traj.column("timestamp"),
                      ty = traj.column("outaged_customers");
    std::vector<std::vector<std::pair<double, double>>> series(units.size());
    for (std::size_t r = 0; r < traj.rows.size(); ++r) {
        check_event(traj, r, te);
        const std::size_t k = unit_of(traj, r, tu);
        const double y = traj.number(r, ty);
        if (y < 0.0 || y > customers[k]) throw DataError(traj.where(r, ty) + ": outage count outside [0, customers]");
        series[k].emplace_back(traj.number(r, tt), y);
    }
    for (std::size_t k = 0; k < units.size(); ++k) {
        auto& s = series[k];
        std::sort(s.begin(), s.end());
        if (s.empty()) throw DataError(traj.path + ": no observations for unit '" + units[k] + "'");
        std::vector<double> ts;
        std::vector<double> ys;
        for (const auto& [t, y] : s) {
            if (!ts.empty() && t == ts.back()) throw DataError(traj.path + ": duplicate timestamp for unit '" + units[k] + "'");
            ts.push_back(t);
            ys.push_back(y);
        }
        if (k == 0) e.timestamps = ts;
        else if (ts != e.timestamps) throw DataError(traj.path + ": unit '" + units[k] + "' has a different time grid");
        e.outages.push_back(std::move(ys));
    }
    e.validate();
    return e;
}

} // namespace detail

inline Dataset read_dataset(const fs::path& dir) {
    Dataset d;
    const CsvTable totals = read_csv(dir / "totals.csv");
    const std::size_t tu = totals.column("unit_id"), tc = totals.column("customers");
    std::vector<double> customers;
    for (std::size_t r = 0; r < totals.rows.size(); ++r) {
        const std::string& u = totals.rows[r][tu];
        if (u.empty()) throw DataError(totals.where(r, tu) + ": empty unit id");
        if (std::find(d.unit_ids.begin(), d.unit_ids.end(), u) != d.unit_ids.end()) {
            throw DataError(totals.where(r, tu) + ": duplicate unit '" + u + "'");
        }
        const double n = totals.number(r, tc);
        if (!(n > 0.0)) throw DataError(totals.where(r, tc) + ": customers must be positive");
        d.unit_ids.push_back(u);
        customers.push_back(n);
    }
    if (d.unit_ids.empty()) throw DataError(totals.path + ": no units");

    const CsvTable manifest = read_csv(dir / "manifest.csv");
    const std::size_t me = manifest.column("event_id"), mt = manifest.column("trajectory_file"),
                      mc = manifest.column("covariate_file");
    for (std::size_t r = 0; r < manifest.rows.size(); ++r) {
        const auto& row = manifest.rows[r];
        d.events.push_back(detail::read_event(dir, row[me], row[mt], row[mc], d.unit_ids, customers, d.features));
    }
    if (d.events.empty()) throw DataError(manifest.path + ": no events");
    return d;
}

/// Starts the event at the first timestamp where the outage share across units reaches
/// `fraction`, re-bases time to zero there, and keeps `horizon` steps.
inline ode::HazardEvent apply_start_trigger(ode::HazardEvent e, double fraction, std::size_t horizon) {
    const double total = std::accumulate(e.customers.begin(), e.customers.end(), 0.0);
    std::size_t start = e.timestamps.size();
    for (std::size_t j = 0; j < e.timestamps.size(); ++j) {
        double out = 0.0;
        for (const auto& row : e.outages) out += row[j];
        if (out >= fraction * total * (1.0 - 1e-12)) {
            start = j;
            break;
        }
    }
    if (start == e.timestamps.size()) {
        throw DataError("event " + e.id + ": outage share never reaches the start threshold");
    }
    if (e.timestamps.size() - start < horizon + 1) {
        throw DataError("event " + e.id + ": only " + std::to_string(e.timestamps.size() - start - 1) +
                        " steps after the start trigger, need " + std::to_string(horizon));
    }
    const auto first = static_cast<std::ptrdiff_t>(start), last = static_cast<std::ptrdiff_t>(start + horizon + 1);
    const double t0 = e.timestamps[start];
    std::vector<double> ts(e.timestamps.begin() + first, e.timestamps.begin() + last);
    for (double& t : ts) t -= t0;
    e.timestamps = std::move(ts);
    for (auto& row : e.outages) row = std::vector<double>(row.begin() + first, row.begin() + last);
    return e;
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

static_assert(std::endian::native == std::endian::little, "checkpoint format assumes a little-endian host");

inline constexpr char kCheckpointMagic[8] = {'G', 'D', 'F', 'C', 'K', 'P', 'T', '\0'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
    ode::OutageModel model;
    ode::CovariateScaler scaler;
    friend bool operator==(const Checkpoint& a, const Checkpoint& b) {
        return a.model.parameters() == b.model.parameters() && a.model.inputs() == b.model.inputs() &&
               a.model.failure.hidden() == b.model.failure.hidden() && a.model.caps.failure == b.model.caps.failure &&
               a.model.caps.restoration == b.model.caps.restoration && a.scaler.mean == b.scaler.mean &&
               a.scaler.scale == b.scaler.scale;
    }
};

/// Layout: magic[8], u32 version, u32 zero, u64 inputs, u64 hidden, f64 failure cap,
/// f64 restoration cap, f64 scaler mean[inputs], f64 scaler scale[inputs],
/// u64 parameter count, f64 parameters[count]. Little-endian throughout.
inline std::string encode_checkpoint(const Checkpoint& c) {
    std::string out(kCheckpointMagic, sizeof kCheckpointMagic);
    auto put = [&out](const auto& v) {
        char buf[sizeof v];
        std::memcpy(buf, &v, sizeof v);
        out.append(buf, sizeof v);
    };
    put(kCheckpointVersion);
    put(std::uint32_t{0});
    put(static_cast<std::uint64_t>(c.model.inputs()));
    put(static_cast<std::uint64_t>(c.model.failure.hidden()));
    put(c.model.caps.failure);
    put(c.model.caps.restoration);
    if (c.scaler.mean.size() != c.model.inputs() || c.scaler.scale.size() != c.model.inputs()) {
        throw DimensionError("checkpoint: scaler width differs from model inputs");
    }
    for (double v : c.scaler.mean) put(v);
    for (double v : c.scaler.scale) put(v);
    const std::vector<double> theta = c.model.parameters();
    put(static_cast<std::uint64_t>(theta.size()));
    for (double v : theta) put(v);
    return out;
}

inline Checkpoint decode_checkpoint(const std::string& bytes, const std::string& origin = "checkpoint") {
    std::size_t pos = 0;
    auto get = [&](auto& v) {
        if (pos + sizeof v > bytes.size()) throw DataError(origin + ": truncated");
        std::memcpy(&v, bytes.data() + pos, sizeof v);
        pos += sizeof v;
    };
    if (bytes.size() < sizeof kCheckpointMagic || std::memcmp(bytes.data(), kCheckpointMagic, sizeof kCheckpointMagic) != 0) {
        throw DataError(origin + ": not a checkpoint file");
    }
    pos = sizeof kCheckpointMagic;
    std::uint32_t version = 0, reserved = 0;
    get(version);
    get(reserved);
    if (version != kCheckpointVersion) {
        throw DataError(origin + ": unsupported checkpoint version " + std::to_string(version));
    }
    std::uint64_t inputs = 0, hidden = 0, count = 0;
    ode::RateCaps caps;
    get(inputs);
    get(hidden);
    get(caps.failure);
    get(caps.restoration);
    if (inputs > (1u << 20) || hidden > (1u << 20)) throw DataError(origin + ": implausible model size");
    Checkpoint c;
    c.scaler.mean.resize(inputs);
    c.scaler.scale.resize(inputs);
    for (double& v : c.scaler.mean) get(v);
    for (double& v : c.scaler.scale) get(v);
    get(count);
    c.model = ode::OutageModel::initialized(inputs, hidden, 0, caps);
    if (count != c.model.parameter_count()) throw DataError(origin + ": parameter count does not match model shape");
    std::vector<double> theta(count);
    for (double& v : theta) get(v);
    if (pos != bytes.size()) throw DataError(origin + ": trailing bytes");
    c.model.set_parameters(theta);
    return c;
}

inline void save_checkpoint(const fs::path& path, const Checkpoint& c) { write_text(path, encode_checkpoint(c)); }

inline Checkpoint load_checkpoint(const fs::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot read checkpoint " + path.string());
    std::stringstream ss;
    ss << f.rdbuf();
    return decode_checkpoint(ss.str(), path.string());
}

inline std::string curve_csv(const training::Curve& curve) {
    std::string out = "phase,epoch,train_mse,train_regret\n";
    for (const auto& p : curve) {
        out += p.phase + "," + std::to_string(p.epoch) + "," + format_double(p.train_mse) + "," +
               format_double(p.train_regret) + "\n";
    }
    return out;
}

} // namespace gdf::io
