#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ttm/config.hpp"
#include "ttm/tensor.hpp"

namespace ttm {

enum class ChannelRole { target, exogenous, conditional };
enum class Split { train, validation, test };

ChannelRole channel_role_from_string(const std::string& s);
std::string channel_role_to_string(ChannelRole r);

// Chronological split bounds: train [train_begin, train_end), validation
// [train_end, val_end), test [val_end, test_end).
struct SplitBounds {
    std::int64_t train_begin = 0;
    std::int64_t train_end = 0;
    std::int64_t val_end = 0;
    std::int64_t test_end = 0;
    bool populated = false;

    std::pair<std::int64_t, std::int64_t> range(Split s) const {
        switch (s) {
            case Split::train: return {train_begin, train_end};
            case Split::validation: return {train_end, val_end};
            default: return {val_end, test_end};
        }
    }
};

struct TimeSeriesDataset {
    std::string name;
    int resolution_id = 0;
    std::int64_t seconds_per_step = 0;
    std::int64_t start_epoch = 0; // timestamp of the first sample
    std::vector<std::vector<real>> values; // [c][T]
    std::vector<ChannelRole> roles;
    SplitBounds splits;

    std::int64_t channels() const { return static_cast<std::int64_t>(values.size()); }
    std::int64_t length() const { return values.empty() ? 0 : static_cast<std::int64_t>(values[0].size()); }
    std::vector<int> channels_with_role(ChannelRole r) const;
    void validate() const;
};

struct CsvSchema {
    std::map<std::string, std::string> roles; // column name -> target|exogenous|conditional
    std::string default_role = "target";
    std::string resolution_label;   // optional override; inferred from spacing otherwise
    std::int64_t spacing_tolerance = 0; // allowed absolute deviation in seconds
};

// CSV: UTF-8, header row, RFC 4180 quoting, first column an ISO-8601 or
// integer-epoch timestamp, remaining columns numeric channels. Missing
// values and non-monotone timestamps are hard errors (with row numbers).
TimeSeriesDataset load_csv(const std::string& path, const CsvSchema& schema,
                           const ResolutionRegistry& registry = ResolutionRegistry::builtin());

void write_csv(const TimeSeriesDataset& ds, const std::string& path,
               const std::vector<std::string>& channel_names = {});

// Diverse resolution sampling.
TimeSeriesDataset drs_average(const TimeSeriesDataset& ds, std::int64_t k,
                              const ResolutionRegistry& registry = ResolutionRegistry::builtin());
TimeSeriesDataset drs_decimate(const TimeSeriesDataset& ds, std::int64_t k,
                               const ResolutionRegistry& registry = ResolutionRegistry::builtin());

// Chronological split by fractions (sum <= 1; remainder unused).
void split_temporal(TimeSeriesDataset& ds, double f_train, double f_val, double f_test);

// All valid window start offsets for (sl, fl) pairs inside a split. With
// allow_context_overlap, the context may reach back before the split start
// (never below 0); the future segment always stays inside the split.
std::vector<std::int64_t> make_windows(const TimeSeriesDataset& ds, Split split, int sl, int fl,
                                       int stride, bool allow_context_overlap = false,
                                       double few_shot_fraction = 1.0);

std::vector<TimeSeriesDataset> to_univariate(const TimeSeriesDataset& ds);

// A materialized batch of rolling windows.
struct WindowBatch {
    Tensor X; // [b x c x sl]
    Tensor Y; // [b x c x fl]
    std::vector<int> resolution_ids;
    std::vector<std::int64_t> offsets;
};

struct WindowSpec {
    const TimeSeriesDataset* dataset = nullptr;
    std::int64_t offset = 0;
};

WindowBatch materialize(const std::vector<WindowSpec>& specs, int sl, int fl);

// Dataset manifest (JSON): { "datasets": [ { "file", "name"?, "roles"?,
// "default_role"?, "resolution"?, "split" [tr,va,te], "drs"? [ {"op":
// "average"|"decimate", "k": int} ] } ] }
struct ManifestEntry {
    std::string file;
    std::string name;
    CsvSchema schema;
    double f_train = 0.7, f_val = 0.1, f_test = 0.2;
    struct DrsOp { std::string op; std::int64_t k; };
    std::vector<DrsOp> drs;
};

std::vector<ManifestEntry> load_manifest(const std::string& path);

// Loads every dataset named by a manifest, applies DRS variants and splits.
// DRS derivatives are appended after their base dataset.
std::vector<TimeSeriesDataset> load_datasets(const std::string& manifest_path,
                                             const ResolutionRegistry& registry = ResolutionRegistry::builtin());

} // namespace ttm
