#include "ttm/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace ttm {

ChannelRole channel_role_from_string(const std::string& s) {
    if (s == "target") return ChannelRole::target;
    if (s == "exogenous") return ChannelRole::exogenous;
    if (s == "conditional") return ChannelRole::conditional;
    throw ConfigError("unknown channel role: " + s);
}

std::string channel_role_to_string(ChannelRole r) {
    switch (r) {
        case ChannelRole::target: return "target";
        case ChannelRole::exogenous: return "exogenous";
        default: return "conditional";
    }
}

std::vector<int> TimeSeriesDataset::channels_with_role(ChannelRole r) const {
    std::vector<int> out;
    for (std::size_t i = 0; i < roles.size(); ++i)
        if (roles[i] == r) out.push_back(static_cast<int>(i));
    return out;
}

void TimeSeriesDataset::validate() const {
    if (values.empty()) throw DataError(name + ": dataset has no channels");
    for (const auto& ch : values)
        if (static_cast<std::int64_t>(ch.size()) != length())
            throw DataError(name + ": ragged channel lengths");
    if (roles.size() != values.size()) throw DataError(name + ": role per channel required");
    if (channels_with_role(ChannelRole::target).empty())
        throw DataError(name + ": at least one target channel required");
}

// ---------------------------------------------------------------------------
// CSV ingestion
// ---------------------------------------------------------------------------

namespace {

// RFC 4180 records; quoted fields may contain commas, quotes ("" escape) and
// newlines.
std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool in_quotes = false;
    bool field_started = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char ch = text[i];
        if (in_quotes) {
            if (ch == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') { field.push_back('"'); ++i; }
                else in_quotes = false;
            } else field.push_back(ch);
        } else if (ch == '"' && field.empty() && !field_started) {
            in_quotes = true;
            field_started = true;
        } else if (ch == ',') {
            row.push_back(field);
            field.clear();
            field_started = false;
        } else if (ch == '\n' || ch == '\r') {
            if (ch == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
            row.push_back(field);
            field.clear();
            field_started = false;
            rows.push_back(row);
            row.clear();
        } else {
            field.push_back(ch);
            field_started = true;
        }
    }
    if (field_started || !field.empty() || !row.empty()) {
        row.push_back(field);
        rows.push_back(row);
    }
    return rows;
}

bool parse_epoch(const std::string& s, std::int64_t& out) {
    if (s.empty()) return false;
    char* end = nullptr;
    const long long v = std::strtoll(s.c_str(), &end, 10);
    if (end == nullptr || *end != '\0') return false;
    out = v;
    return true;
}

bool parse_iso8601(const std::string& s, std::int64_t& out) {
    int y, mo, d, h = 0, mi = 0, sec = 0;
    const int n = std::sscanf(s.c_str(), "%d-%d-%d%*1[T ]%d:%d:%d", &y, &mo, &d, &h, &mi, &sec);
    if (n != 3 && n != 5 && n != 6) return false;
    std::tm tm{};
    tm.tm_year = y - 1900;
    tm.tm_mon = mo - 1;
    tm.tm_mday = d;
    tm.tm_hour = h;
    tm.tm_min = mi;
    tm.tm_sec = sec;
    out = timegm(&tm);
    return true;
}

std::int64_t parse_timestamp(const std::string& s, std::int64_t row) {
    std::int64_t v;
    if (parse_epoch(s, v) || parse_iso8601(s, v)) return v;
    throw DataError("csv: unparseable timestamp '" + s + "' at row " + std::to_string(row));
}

} // namespace

TimeSeriesDataset load_csv(const std::string& path, const CsvSchema& schema,
                           const ResolutionRegistry& registry) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("csv: cannot open " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    auto rows = parse_csv(text);
    if (rows.size() < 2) throw DataError("csv: need a header row and at least one data row: " + path);
    const auto& header = rows[0];
    if (header.size() < 2) throw DataError("csv: need a timestamp column and >= 1 channel: " + path);
    const std::size_t cols = header.size();
    const std::size_t c = cols - 1;

    TimeSeriesDataset ds;
    {
        auto slash = path.find_last_of('/');
        auto base = (slash == std::string::npos) ? path : path.substr(slash + 1);
        auto dot = base.find_last_of('.');
        ds.name = (dot == std::string::npos) ? base : base.substr(0, dot);
    }
    ds.values.assign(c, {});
    ds.roles.reserve(c);
    for (std::size_t j = 1; j < cols; ++j) {
        auto it = schema.roles.find(header[j]);
        const std::string role = (it != schema.roles.end()) ? it->second : schema.default_role;
        ds.roles.push_back(channel_role_from_string(role));
    }

    std::vector<std::int64_t> timestamps;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        const std::int64_t data_row = static_cast<std::int64_t>(r); // 1-based data row
        if (row.size() != cols)
            throw DataError("csv: ragged row " + std::to_string(data_row) + " in " + path + " (" +
                            std::to_string(row.size()) + " fields, expected " + std::to_string(cols) + ")");
        timestamps.push_back(parse_timestamp(row[0], data_row));
        for (std::size_t j = 1; j < cols; ++j) {
            const std::string& cell = row[j];
            if (cell.empty())
                throw DataError("csv: missing value at row " + std::to_string(data_row) +
                                ", column " + header[j]);
            char* end = nullptr;
            const double v = std::strtod(cell.c_str(), &end);
            if (end == nullptr || *end != '\0' || std::isnan(v))
                throw DataError("csv: non-numeric or NaN cell '" + cell + "' at row " +
                                std::to_string(data_row) + ", column " + header[j]);
            ds.values[j - 1].push_back(static_cast<real>(v));
        }
    }
    if (timestamps.size() < 2) throw DataError("csv: need at least two rows to infer spacing");
    ds.start_epoch = timestamps[0];
    const std::int64_t step = timestamps[1] - timestamps[0];
    if (step <= 0) throw DataError("csv: non-monotone timestamps at row 2 in " + path);
    for (std::size_t i = 1; i < timestamps.size(); ++i) {
        const std::int64_t d = timestamps[i] - timestamps[i - 1];
        if (d <= 0)
            throw DataError("csv: non-monotone timestamps at row " + std::to_string(i + 1) +
                            " in " + path);
        if (std::llabs(d - step) > schema.spacing_tolerance)
            throw DataError("csv: uneven spacing at row " + std::to_string(i + 1) + " in " + path +
                            " (step " + std::to_string(d) + "s, expected " + std::to_string(step) + "s)");
    }
    if (!schema.resolution_label.empty()) {
        ds.resolution_id = registry.id_for_label(schema.resolution_label);
        ds.seconds_per_step = registry.seconds_for_label(schema.resolution_label);
        if (ds.seconds_per_step == 0) ds.seconds_per_step = step;
    } else {
        ds.seconds_per_step = step;
        ds.resolution_id = registry.id_for_seconds(step);
    }
    ds.validate();
    return ds;
}

void write_csv(const TimeSeriesDataset& ds, const std::string& path,
               const std::vector<std::string>& channel_names) {
    std::ofstream out(path);
    if (!out) throw IoError("csv: cannot write " + path);
    out << "timestamp";
    for (std::int64_t j = 0; j < ds.channels(); ++j) {
        if (j < static_cast<std::int64_t>(channel_names.size()))
            out << "," << channel_names[static_cast<std::size_t>(j)];
        else
            out << ",ch" << j;
    }
    out << "\n";
    out.precision(17);
    for (std::int64_t i = 0; i < ds.length(); ++i) {
        out << ds.start_epoch + i * ds.seconds_per_step;
        for (std::int64_t j = 0; j < ds.channels(); ++j)
            out << "," << ds.values[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)];
        out << "\n";
    }
}

// ---------------------------------------------------------------------------
// Diverse resolution sampling
// ---------------------------------------------------------------------------

namespace {

TimeSeriesDataset drs_common(const TimeSeriesDataset& ds, std::int64_t k, const char* tag,
                             const ResolutionRegistry& registry) {
    if (k < 1) throw ContractError("drs: k must be >= 1");
    if (ds.length() < k) throw ContractError("drs: series shorter than k");
    TimeSeriesDataset out;
    out.name = ds.name + "@" + tag + std::to_string(k);
    out.seconds_per_step = ds.seconds_per_step * k;
    out.resolution_id = registry.id_for_seconds(out.seconds_per_step);
    out.start_epoch = ds.start_epoch;
    out.roles = ds.roles;
    return out;
}

} // namespace

TimeSeriesDataset drs_average(const TimeSeriesDataset& ds, std::int64_t k,
                              const ResolutionRegistry& registry) {
    auto out = drs_common(ds, k, "avg", registry);
    const std::int64_t n = ds.length() / k; // trailing remainder dropped
    out.values.reserve(static_cast<std::size_t>(ds.channels()));
    for (const auto& ch : ds.values) {
        std::vector<real> v(static_cast<std::size_t>(n));
        for (std::int64_t i = 0; i < n; ++i) {
            real acc = real(0);
            for (std::int64_t j = 0; j < k; ++j) acc += ch[static_cast<std::size_t>(i * k + j)];
            v[static_cast<std::size_t>(i)] = acc / static_cast<real>(k);
        }
        out.values.push_back(std::move(v));
    }
    return out;
}

TimeSeriesDataset drs_decimate(const TimeSeriesDataset& ds, std::int64_t k,
                               const ResolutionRegistry& registry) {
    auto out = drs_common(ds, k, "dec", registry);
    const std::int64_t n = (ds.length() + k - 1) / k; // indices 0, k, 2k, ...
    out.values.reserve(static_cast<std::size_t>(ds.channels()));
    for (const auto& ch : ds.values) {
        std::vector<real> v(static_cast<std::size_t>(n));
        for (std::int64_t i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = ch[static_cast<std::size_t>(i * k)];
        out.values.push_back(std::move(v));
    }
    return out;
}

// ---------------------------------------------------------------------------
// splits and windows
// ---------------------------------------------------------------------------

void split_temporal(TimeSeriesDataset& ds, double f_train, double f_val, double f_test) {
    if (f_train < 0 || f_val < 0 || f_test < 0 || f_train + f_val + f_test > 1.0 + 1e-12)
        throw ConfigError("split_temporal: fractions must be nonnegative and sum <= 1");
    const auto T = static_cast<double>(ds.length());
    SplitBounds b;
    b.train_begin = 0;
    b.train_end = static_cast<std::int64_t>(std::floor(T * f_train));
    b.val_end = static_cast<std::int64_t>(std::floor(T * (f_train + f_val)));
    b.test_end = static_cast<std::int64_t>(std::floor(T * (f_train + f_val + f_test)));
    if (b.train_end <= b.train_begin) throw ConfigError("split_temporal: empty train split");
    b.populated = true;
    ds.splits = b;
}

std::vector<std::int64_t> make_windows(const TimeSeriesDataset& ds, Split split, int sl, int fl,
                                       int stride, bool allow_context_overlap,
                                       double few_shot_fraction) {
    if (sl < 1 || fl < 1 || stride < 1) throw ContractError("make_windows: sl, fl, stride must be >= 1");
    if (!ds.splits.populated) throw ContractError("make_windows: dataset has no splits");
    auto [begin, end] = ds.splits.range(split);
    std::vector<std::int64_t> offsets;
    // offset o: context [o, o+sl), future [o+sl, o+sl+fl)
    std::int64_t first = allow_context_overlap ? std::max<std::int64_t>(0, begin - sl) : begin;
    for (std::int64_t o = first; o + sl + fl <= end; o += stride) offsets.push_back(o);
    if (split == Split::train && few_shot_fraction < 1.0) {
        const auto keep = static_cast<std::size_t>(
            std::ceil(few_shot_fraction * static_cast<double>(offsets.size())));
        offsets.erase(offsets.begin(), offsets.end() - static_cast<std::ptrdiff_t>(keep));
    }
    return offsets;
}

std::vector<TimeSeriesDataset> to_univariate(const TimeSeriesDataset& ds) {
    std::vector<TimeSeriesDataset> out;
    out.reserve(static_cast<std::size_t>(ds.channels()));
    for (std::int64_t j = 0; j < ds.channels(); ++j) {
        TimeSeriesDataset u;
        u.name = ds.name + "#" + std::to_string(j);
        u.resolution_id = ds.resolution_id;
        u.seconds_per_step = ds.seconds_per_step;
        u.start_epoch = ds.start_epoch;
        u.values = {ds.values[static_cast<std::size_t>(j)]};
        u.roles = {ChannelRole::target};
        u.splits = ds.splits;
        out.push_back(std::move(u));
    }
    return out;
}

WindowBatch materialize(const std::vector<WindowSpec>& specs, int sl, int fl) {
    if (specs.empty()) throw ContractError("materialize: empty batch");
    const std::int64_t c = specs[0].dataset->channels();
    const std::int64_t b = static_cast<std::int64_t>(specs.size());
    std::vector<real> x(static_cast<std::size_t>(b * c * sl));
    std::vector<real> y(static_cast<std::size_t>(b * c * fl));
    WindowBatch batch;
    for (std::int64_t i = 0; i < b; ++i) {
        const auto& spec = specs[static_cast<std::size_t>(i)];
        const auto* ds = spec.dataset;
        if (ds->channels() != c) throw ContractError("materialize: mixed channel counts in batch");
        if (spec.offset < 0 || spec.offset + sl + fl > ds->length())
            throw ContractError("materialize: window out of bounds");
        for (std::int64_t j = 0; j < c; ++j) {
            const auto& ch = ds->values[static_cast<std::size_t>(j)];
            for (int t = 0; t < sl; ++t)
                x[static_cast<std::size_t>((i * c + j) * sl + t)] = ch[static_cast<std::size_t>(spec.offset + t)];
            for (int t = 0; t < fl; ++t)
                y[static_cast<std::size_t>((i * c + j) * fl + t)] = ch[static_cast<std::size_t>(spec.offset + sl + t)];
        }
        batch.resolution_ids.push_back(ds->resolution_id);
        batch.offsets.push_back(spec.offset);
    }
    batch.X = Tensor({b, c, sl}, std::move(x));
    batch.Y = Tensor({b, c, fl}, std::move(y));
    return batch;
}

// ---------------------------------------------------------------------------
// manifest
// ---------------------------------------------------------------------------

std::vector<ManifestEntry> load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("manifest: cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw DataError("manifest: invalid JSON in " + path + ": " + e.what());
    }
    std::vector<ManifestEntry> out;
    for (const auto& d : j.at("datasets")) {
        ManifestEntry e;
        e.file = d.at("file");
        e.name = d.value("name", "");
        if (d.contains("roles"))
            for (auto it = d["roles"].begin(); it != d["roles"].end(); ++it)
                e.schema.roles[it.key()] = it.value().get<std::string>();
        e.schema.default_role = d.value("default_role", "target");
        e.schema.resolution_label = d.value("resolution", "");
        e.schema.spacing_tolerance = d.value("spacing_tolerance", 0);
        if (d.contains("split")) {
            const auto& s = d["split"];
            e.f_train = s.at(0);
            e.f_val = s.at(1);
            e.f_test = s.at(2);
        }
        if (d.contains("drs"))
            for (const auto& op : d["drs"])
                e.drs.push_back({op.at("op"), op.at("k")});
        out.push_back(std::move(e));
    }
    if (out.empty()) throw DataError("manifest: no datasets listed in " + path);
    return out;
}

std::vector<TimeSeriesDataset> load_datasets(const std::string& manifest_path,
                                             const ResolutionRegistry& registry) {
    // resolve dataset files relative to the manifest location
    std::string dir;
    if (auto slash = manifest_path.find_last_of('/'); slash != std::string::npos)
        dir = manifest_path.substr(0, slash + 1);
    std::vector<TimeSeriesDataset> out;
    for (const auto& e : load_manifest(manifest_path)) {
        std::string file = e.file;
        if (!file.empty() && file[0] != '/') file = dir + file;
        auto ds = load_csv(file, e.schema, registry);
        if (!e.name.empty()) ds.name = e.name;
        split_temporal(ds, e.f_train, e.f_val, e.f_test);
        out.push_back(ds);
        for (const auto& op : e.drs) {
            TimeSeriesDataset derived = (op.op == "average") ? drs_average(ds, op.k, registry)
                                      : (op.op == "decimate") ? drs_decimate(ds, op.k, registry)
                                      : throw ConfigError("manifest: unknown drs op " + op.op);
            split_temporal(derived, e.f_train, e.f_val, e.f_test);
            out.push_back(std::move(derived));
        }
    }
    return out;
}

} // namespace ttm
