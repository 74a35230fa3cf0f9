#include "ttm/synth.hpp"

#include <cmath>
#include <random>

namespace ttm::synth {

TimeSeriesDataset generate(const SynthSpec& spec, const ResolutionRegistry& registry) {
    if (spec.channels.empty()) throw ConfigError("synth: at least one channel spec required");
    if (spec.length < 2) throw ConfigError("synth: length must be >= 2");
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> noise(0.0, 1.0);

    TimeSeriesDataset ds;
    ds.name = spec.name;
    ds.seconds_per_step = spec.seconds_per_step;
    ds.resolution_id = registry.id_for_seconds(spec.seconds_per_step);
    ds.start_epoch = 0;
    const auto T = spec.length;

    for (const auto& ch : spec.channels) {
        std::vector<real> v(static_cast<std::size_t>(T));
        if (ch.lag_of_channel < 0) {
            for (std::int64_t t = 0; t < T; ++t) {
                double x = ch.offset + ch.trend_per_step * static_cast<double>(t);
                for (const auto& comp : ch.components)
                    x += comp.amplitude *
                         std::sin(2.0 * M_PI * static_cast<double>(t) / comp.period + comp.phase);
                if (ch.noise_std > 0) x += ch.noise_std * noise(rng);
                v[static_cast<std::size_t>(t)] = static_cast<real>(x);
            }
        }
        ds.values.push_back(std::move(v));
        ds.roles.push_back(channel_role_from_string(ch.role));
    }
    // lagged copies resolve after all source channels exist
    for (std::size_t j = 0; j < spec.channels.size(); ++j) {
        const auto& ch = spec.channels[j];
        if (ch.lag_of_channel < 0) continue;
        if (ch.lag_of_channel >= static_cast<int>(spec.channels.size()) || ch.lag_steps < 0)
            throw ConfigError("synth: bad lag spec");
        const auto& src = ds.values[static_cast<std::size_t>(ch.lag_of_channel)];
        auto& dst = ds.values[j];
        for (std::int64_t t = 0; t < T; ++t) {
            const std::int64_t s = t - ch.lag_steps;
            double x = (s >= 0) ? static_cast<double>(src[static_cast<std::size_t>(s)]) : 0.0;
            if (ch.noise_std > 0) x += ch.noise_std * noise(rng);
            dst[static_cast<std::size_t>(t)] = static_cast<real>(x + ch.offset);
        }
    }
    ds.validate();
    return ds;
}

TimeSeriesDataset sine_fixture(std::uint64_t seed, std::int64_t length, double period,
                               double phase, double noise_std) {
    SynthSpec spec;
    spec.name = "sine";
    spec.length = length;
    spec.seed = seed;
    ChannelSpec ch;
    ch.components = {{1.0, period, phase}};
    ch.noise_std = noise_std;
    spec.channels = {ch};
    return generate(spec);
}

TimeSeriesDataset lag_coupled_fixture(std::uint64_t seed, std::int64_t length, int lag) {
    SynthSpec spec;
    spec.name = "lag_coupled";
    spec.length = length;
    spec.seed = seed;
    ChannelSpec driver;
    driver.components = {{1.0, 23.0, 0.3}, {0.7, 41.0, 1.1}, {0.5, 11.0, 2.0}};
    driver.noise_std = 0.05;
    ChannelSpec follower;
    follower.lag_of_channel = 0;
    follower.lag_steps = lag;
    spec.channels = {driver, follower};
    return generate(spec);
}

} // namespace ttm::synth
