#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ttm/data.hpp"

namespace ttm::synth {

// Seeded sum-of-sinusoids + trend + noise generator; the in-repo fixture
// source so tests and CI need no external data.
struct Component {
    double amplitude = 1.0;
    double period = 32.0; // in samples
    double phase = 0.0;   // radians
};

struct ChannelSpec {
    std::vector<Component> components;
    double trend_per_step = 0.0;
    double noise_std = 0.0;
    double offset = 0.0;
    int lag_of_channel = -1; // >= 0: copy that channel shifted by lag_steps
    int lag_steps = 0;
    std::string role = "target";
};

struct SynthSpec {
    std::string name = "synthetic";
    std::int64_t length = 2048;
    std::int64_t seconds_per_step = 3600;
    std::uint64_t seed = 0;
    std::vector<ChannelSpec> channels;
};

TimeSeriesDataset generate(const SynthSpec& spec,
                           const ResolutionRegistry& registry = ResolutionRegistry::builtin());

// Canned fixtures used across the test suites.
TimeSeriesDataset sine_fixture(std::uint64_t seed, std::int64_t length = 2048, double period = 32.0,
                               double phase = 0.0, double noise_std = 0.0);
// channel 0: noisy multi-sine driver; channel 1: channel 0 delayed by `lag`.
TimeSeriesDataset lag_coupled_fixture(std::uint64_t seed, std::int64_t length = 2048, int lag = 16);

} // namespace ttm::synth
