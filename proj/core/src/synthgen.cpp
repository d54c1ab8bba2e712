#include "gattf/synthgen.hpp"

#include "gattf/errors.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <random>
#include <set>

namespace gattf {

std::string to_string(SensorRole role)
{
    switch (role) {
    case SensorRole::source:
        return "source";
    case SensorRole::derived:
        return "derived";
    case SensorRole::noise:
        return "noise";
    }
    return "unknown";
}

SensorRole sensor_role_from_string(const std::string& s)
{
    if (s == "source") {
        return SensorRole::source;
    }
    if (s == "derived") {
        return SensorRole::derived;
    }
    if (s == "noise") {
        return SensorRole::noise;
    }
    throw ValidationError("unknown sensor role '" + s + "'");
}

double commuter_profile(double tod, std::size_t period, double morning_peak, double evening_peak)
{
    const double p = static_cast<double>(period);
    const double floor = 0.35 * (1.0 - std::cos(2.0 * std::numbers::pi * tod / p)) / 2.0;
    // 08:00 and 17:30 with widths of one and 1.25 hours, scaled to the period.
    const double zm = (tod - p / 3.0) / (p / 24.0);
    const double ze = (tod - p * 17.5 / 24.0) / (p * 1.25 / 24.0);
    return 0.15 + floor + morning_peak * std::exp(-0.5 * zm * zm) + evening_peak * std::exp(-0.5 * ze * ze);
}

namespace {

// Derived sensors ordered so that every derived parent precedes its child.
std::vector<std::size_t> derived_order(const SynthNetworkSpec& spec, const std::map<SensorId, std::size_t>& index)
{
    std::vector<std::size_t> order;
    std::set<std::size_t> done;
    std::set<std::size_t> pending;
    for (std::size_t i = 0; i < spec.sensors.size(); ++i) {
        if (spec.sensors[i].role == SensorRole::derived) {
            pending.insert(i);
        }
    }
    while (!pending.empty()) {
        bool progressed = false;
        for (auto it = pending.begin(); it != pending.end();) {
            bool ready = true;
            for (const auto& e : spec.edges) {
                if (index.at(e.to) == *it) {
                    const std::size_t p = index.at(e.from);
                    if (spec.sensors[p].role == SensorRole::derived && done.count(p) == 0) {
                        ready = false;
                    }
                }
            }
            if (ready) {
                order.push_back(*it);
                done.insert(*it);
                it = pending.erase(it);
                progressed = true;
            } else {
                ++it;
            }
        }
        if (!progressed) {
            throw ValidationError("synthetic network: derived sensors form a cycle");
        }
    }
    return order;
}

std::map<SensorId, std::size_t> index_sensors(const SynthNetworkSpec& spec)
{
    std::map<SensorId, std::size_t> index;
    for (std::size_t i = 0; i < spec.sensors.size(); ++i) {
        if (!index.emplace(spec.sensors[i].id, i).second) {
            throw ValidationError("synthetic network: duplicate sensor " + spec.sensors[i].id.str());
        }
    }
    return index;
}

} // namespace

void SynthNetworkSpec::validate() const
{
    if (sensors.empty()) {
        throw ValidationError("synthetic network has no sensors");
    }
    const auto index = index_sensors(*this);
    if (!(seasonal_amplitude >= 0.0) || !(noise_std >= 0.0) || seasonal_period == 0 || step_seconds <= 0) {
        throw ValidationError("synthetic network: amplitude, noise_std, period and step must be non-negative "
                              "(period and step positive)");
    }
    if (!(noise_persistence >= 0.0 && noise_persistence < 1.0)) {
        throw ValidationError("synthetic network: noise_persistence must lie in [0, 1)");
    }
    if (!(derived_noise_ratio >= 0.0) || !(day_factor_std >= 0.0) ||
        !(day_factor_common >= 0.0 && day_factor_common <= 1.0)) {
        throw ValidationError("synthetic network: derived_noise_ratio and day_factor_std must be non-negative, "
                              "day_factor_common in [0, 1]");
    }
    std::size_t max_lag = 0;
    std::set<std::size_t> has_parent;
    for (const auto& e : edges) {
        const auto from = index.find(e.from);
        const auto to = index.find(e.to);
        if (from == index.end() || to == index.end()) {
            throw ValidationError("synthetic network: edge references an unknown sensor");
        }
        if (sensors[to->second].role != SensorRole::derived) {
            throw ValidationError("synthetic network: edge into non-derived sensor " + e.to.str());
        }
        if (e.lag < 1) {
            throw ValidationError("synthetic network: edge " + e.from.str() + " -> " + e.to.str() +
                                  " must have lag >= 1");
        }
        if (!std::isfinite(e.weight)) {
            throw ValidationError("synthetic network: non-finite edge weight");
        }
        max_lag = std::max(max_lag, e.lag);
        has_parent.insert(to->second);
    }
    for (std::size_t i = 0; i < sensors.size(); ++i) {
        if (sensors[i].role == SensorRole::derived && has_parent.count(i) == 0) {
            throw ValidationError("synthetic network: derived sensor " + sensors[i].id.str() + " has no parent");
        }
    }
    if (length <= max_lag + 864) {
        throw ValidationError("synthetic network: length " + std::to_string(length) + " must exceed max lag + 864 = " +
                              std::to_string(max_lag + 864));
    }
    if (warmup < max_lag) {
        throw ValidationError("synthetic network: warmup must cover the largest lag");
    }
    derived_order(*this, index);
}

nlohmann::json SynthNetworkSpec::to_json() const
{
    nlohmann::json j;
    auto ss = nlohmann::json::array();
    for (const auto& s : sensors) {
        nlohmann::json o{{"id", s.id.str()}, {"role", to_string(s.role)}};
        if (s.role == SensorRole::source) {
            o["morning_peak"] = s.morning_peak;
            o["evening_peak"] = s.evening_peak;
            if (!s.day_group.empty()) {
                o["day_group"] = s.day_group;
            }
        }
        ss.push_back(std::move(o));
    }
    auto es = nlohmann::json::array();
    for (const auto& e : edges) {
        es.push_back({{"from", e.from.str()}, {"to", e.to.str()}, {"lag", e.lag}, {"weight", e.weight}});
    }
    j["sensors"] = std::move(ss);
    j["edges"] = std::move(es);
    j["seasonal_amplitude"] = seasonal_amplitude;
    j["seasonal_period"] = seasonal_period;
    j["noise_std"] = noise_std;
    j["length"] = length;
    j["seed"] = seed;
    j["start"] = start;
    j["step_seconds"] = step_seconds;
    j["noise_persistence"] = noise_persistence;
    j["derived_noise_ratio"] = derived_noise_ratio;
    j["day_factor_std"] = day_factor_std;
    j["day_factor_common"] = day_factor_common;
    j["noise_sensor_level"] = noise_sensor_level;
    j["warmup"] = warmup;
    return j;
}

SynthNetworkSpec SynthNetworkSpec::from_json(const nlohmann::json& j)
{
    SynthNetworkSpec s;
    for (const auto& o : j.at("sensors")) {
        SynthSensor sensor;
        sensor.id = SensorId(o.at("id").get<std::string>());
        sensor.role = sensor_role_from_string(o.at("role").get<std::string>());
        sensor.morning_peak = o.value("morning_peak", 0.0);
        sensor.evening_peak = o.value("evening_peak", 0.0);
        sensor.day_group = o.value("day_group", std::string{});
        s.sensors.push_back(std::move(sensor));
    }
    for (const auto& o : j.value("edges", nlohmann::json::array())) {
        s.edges.push_back(SynthEdge{SensorId(o.at("from").get<std::string>()), SensorId(o.at("to").get<std::string>()),
                                    o.at("lag").get<std::size_t>(), o.value("weight", 1.0)});
    }
    s.seasonal_amplitude = j.value("seasonal_amplitude", s.seasonal_amplitude);
    s.seasonal_period = j.value("seasonal_period", s.seasonal_period);
    s.noise_std = j.value("noise_std", s.noise_std);
    s.length = j.value("length", s.length);
    s.seed = j.value("seed", s.seed);
    s.start = j.value("start", s.start);
    s.step_seconds = j.value("step_seconds", s.step_seconds);
    s.noise_persistence = j.value("noise_persistence", s.noise_persistence);
    s.derived_noise_ratio = j.value("derived_noise_ratio", s.derived_noise_ratio);
    s.day_factor_std = j.value("day_factor_std", s.day_factor_std);
    s.day_factor_common = j.value("day_factor_common", s.day_factor_common);
    s.noise_sensor_level = j.value("noise_sensor_level", s.noise_sensor_level);
    s.warmup = j.value("warmup", s.warmup);
    return s;
}

SynthNetworkSpec default_template(std::uint64_t seed, double noise_fraction)
{
    SynthNetworkSpec spec;
    spec.seed = seed;
    spec.noise_std = noise_fraction * spec.seasonal_amplitude;
    spec.day_factor_std = 0.4;

    auto source = [](const char* id, double m, double e, const char* group = "") {
        return SynthSensor{SensorId(id), SensorRole::source, m, e, group};
    };
    auto derived = [](const char* id) { return SynthSensor{SensorId(id), SensorRole::derived, 0.0, 0.0, {}}; };
    auto noise = [](const char* id) { return SynthSensor{SensorId(id), SensorRole::noise, 0.0, 0.0, {}}; };

    spec.sensors = {
        source("A1", 1.0, 0.3),
        source("A2", 0.9, 0.5),
        source("A3", 0.6, 0.6),
        derived("A4"),
        derived("A5"),
        derived("A6"),
        source("B1", 0.9, 1.2),
        source("B2", 1.1, 0.2),
        source("B3", 0.4, 0.9),
        noise("B4"),
        source("C1", 0.5, 1.2),
        source("C2", 0.2, 0.4),
        derived("C3"),
        noise("C4"),
    };
    auto edge = [](const char* from, const char* to, std::size_t lag, double w) {
        return SynthEdge{SensorId(from), SensorId(to), lag, w};
    };
    spec.edges = {
        edge("A1", "A4", 3, 0.6), edge("A2", "A4", 6, 0.5), edge("A3", "A5", 4, 0.9),
        edge("C1", "C3", 6, 0.7), edge("B3", "C3", 9, 0.6), edge("B1", "A6", 36, 1.0),
    };
    return spec;
}

std::vector<SensorId> parents_of(const SynthNetworkSpec& spec, const SensorId& derived)
{
    std::vector<SensorId> out;
    for (const auto& e : spec.edges) {
        if (e.to == derived) {
            out.push_back(e.from);
        }
    }
    return out;
}

SensorDataset generate(const SynthNetworkSpec& spec)
{
    spec.validate();
    const auto index = index_sensors(spec);
    const std::size_t total = spec.length + spec.warmup;
    const std::size_t period = spec.seasonal_period;
    const std::size_t days = (total + period - 1) / period + 1;
    const double amp = spec.seasonal_amplitude;

    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> normal(0.0, 1.0);

    // Day factors: shared component first, then one stream per group in
    // name order so that adding a sensor to an existing group is stable.
    std::vector<double> shared(days);
    for (auto& g : shared) {
        g = normal(rng);
    }
    std::map<std::string, std::vector<double>> groups;
    for (const auto& s : spec.sensors) {
        if (s.role == SensorRole::source) {
            groups.emplace(s.day_group.empty() ? "#" + s.id.str() : s.day_group, std::vector<double>{});
        }
    }
    const double wc = std::sqrt(spec.day_factor_common);
    const double wu = std::sqrt(1.0 - spec.day_factor_common);
    for (auto& [name, kappa] : groups) {
        kappa.resize(days);
        for (std::size_t d = 0; d < days; ++d) {
            kappa[d] = std::max(0.2, 1.0 + spec.day_factor_std * (wc * shared[d] + wu * normal(rng)));
        }
    }

    // The output starts at tod 0; the warmup precedes it, so position 0 of
    // the working buffer sits `warmup` steps before midnight.
    const std::size_t offset = (period - spec.warmup % period) % period;
    std::vector<std::vector<double>> raw(spec.sensors.size());
    const double phi = spec.noise_persistence;
    const double innovation = std::sqrt(1.0 - phi * phi) * spec.noise_std;

    for (std::size_t i = 0; i < spec.sensors.size(); ++i) {
        const auto& s = spec.sensors[i];
        if (s.role != SensorRole::source) {
            continue;
        }
        const auto& kappa = groups.at(s.day_group.empty() ? "#" + s.id.str() : s.day_group);
        auto& v = raw[i];
        v.resize(total);
        double ar = spec.noise_std * normal(rng);
        for (std::size_t t = 0; t < total; ++t) {
            if (t > 0) {
                ar = phi * ar + innovation * normal(rng);
            }
            const std::size_t k = t + offset;
            const double tod = static_cast<double>(k % period);
            v[t] = std::max(0.0, amp * kappa[k / period] * commuter_profile(tod, period, s.morning_peak, s.evening_peak) + ar);
        }
    }
    for (std::size_t i = 0; i < spec.sensors.size(); ++i) {
        if (spec.sensors[i].role != SensorRole::noise) {
            continue;
        }
        auto& v = raw[i];
        v.resize(total);
        for (auto& x : v) {
            x = std::max(0.0, spec.noise_sensor_level * amp + spec.noise_std * normal(rng));
        }
    }
    for (std::size_t i : derived_order(spec, index)) {
        auto& v = raw[i];
        v.assign(total, 0.0);
        for (const auto& e : spec.edges) {
            if (index.at(e.to) != i) {
                continue;
            }
            const auto& parent = raw[index.at(e.from)];
            for (std::size_t t = e.lag; t < total; ++t) {
                v[t] += e.weight * parent[t - e.lag];
            }
        }
        const double sd = spec.derived_noise_ratio * spec.noise_std;
        for (auto& x : v) {
            x = std::max(0.0, x + sd * normal(rng));
        }
    }

    std::vector<SensorSeries> out;
    out.reserve(spec.sensors.size());
    for (std::size_t i = 0; i < spec.sensors.size(); ++i) {
        const auto& v = raw[i];
        out.emplace_back(spec.sensors[i].id, spec.start, spec.step_seconds,
                         std::vector<double>(v.begin() + static_cast<std::ptrdiff_t>(spec.warmup), v.end()));
    }
    return SensorDataset(std::move(out));
}

} // namespace gattf
