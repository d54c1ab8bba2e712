#include "gattf/errors.hpp"
#include "gattf/mi_select.hpp"
#include "gattf/synthgen.hpp"

#include <gtest/gtest.h>

#include <algorithm>

using namespace gattf;

namespace {

SynthNetworkSpec copy_network(std::size_t lag, double noise)
{
    SynthNetworkSpec spec;
    spec.sensors = {SynthSensor{SensorId("S"), SensorRole::source, 1.0, 0.5, {}},
                    SynthSensor{SensorId("D"), SensorRole::derived, 0.0, 0.0, {}}};
    spec.edges = {SynthEdge{SensorId("S"), SensorId("D"), lag, 1.0}};
    spec.noise_std = noise;
    spec.length = 1200;
    spec.seed = 3;
    return spec;
}

} // namespace

TEST(Synthgen, NoiselessCopyWithLag)
{
    const auto ds = generate(copy_network(3, 0.0));
    const auto& s = ds[ds.index_of(SensorId("S"))];
    const auto& d = ds[ds.index_of(SensorId("D"))];
    for (std::size_t t = 3; t < ds.length(); ++t) {
        ASSERT_DOUBLE_EQ(d.value(t), s.value(t - 3)) << t;
    }
}

TEST(Synthgen, DefaultTemplateShape)
{
    const auto spec = default_template(0);
    const auto ds = generate(spec);
    EXPECT_EQ(ds.size(), 14u);
    EXPECT_EQ(ds.length(), 5472u);
    EXPECT_EQ(ds.step(), 300);
    EXPECT_EQ(ds.start(), 1704067200);
    for (const auto& s : ds.series()) {
        EXPECT_EQ(s.observed_count(), s.size());
        EXPECT_GE(*std::min_element(s.values().begin(), s.values().end()), 0.0) << s.id().str();
    }
    EXPECT_EQ(parents_of(spec, SensorId("A4")), (std::vector<SensorId>{SensorId("A1"), SensorId("A2")}));
    EXPECT_TRUE(parents_of(spec, SensorId("A1")).empty());
}

TEST(Synthgen, SeedDeterminism)
{
    EXPECT_EQ(generate(default_template(7)), generate(default_template(7)));
    EXPECT_NE(generate(default_template(7)), generate(default_template(8)));
}

TEST(Synthgen, SpecJsonRoundTrip)
{
    const auto spec = default_template(4, 0.3);
    const auto back = SynthNetworkSpec::from_json(spec.to_json());
    EXPECT_EQ(back.to_json(), spec.to_json());
    EXPECT_EQ(generate(back), generate(spec));
}

TEST(Synthgen, Validation)
{
    auto spec = copy_network(3, 10.0);
    spec.edges.push_back(SynthEdge{SensorId("D"), SensorId("S"), 1, 1.0});
    EXPECT_THROW(spec.validate(), ValidationError);

    spec = copy_network(3, 10.0);
    spec.edges[0].lag = 0;
    EXPECT_THROW(spec.validate(), ValidationError);

    spec = copy_network(3, 10.0);
    spec.edges.clear();
    EXPECT_THROW(spec.validate(), ValidationError);

    spec = copy_network(3, 10.0);
    spec.edges.push_back(SynthEdge{SensorId("X"), SensorId("D"), 1, 1.0});
    EXPECT_THROW(spec.validate(), ValidationError);

    spec = copy_network(3, 10.0);
    spec.sensors.push_back(spec.sensors[0]);
    EXPECT_THROW(spec.validate(), ValidationError);

    spec = copy_network(3, 10.0);
    spec.sensors[1].role = SensorRole::source;
    EXPECT_THROW(spec.validate(), ValidationError);

    spec = copy_network(3, 10.0);
    spec.length = 800;
    EXPECT_THROW(spec.validate(), ValidationError);

    spec = copy_network(3, 10.0);
    spec.noise_persistence = 1.0;
    EXPECT_THROW(spec.validate(), ValidationError);

    auto cyc = copy_network(3, 10.0);
    cyc.sensors.push_back(SynthSensor{SensorId("E"), SensorRole::derived, 0.0, 0.0, {}});
    cyc.edges.push_back(SynthEdge{SensorId("E"), SensorId("D"), 1, 0.5});
    cyc.edges.push_back(SynthEdge{SensorId("D"), SensorId("E"), 1, 0.5});
    EXPECT_THROW(cyc.validate(), ValidationError);

    EXPECT_THROW(sensor_role_from_string("sink"), ValidationError);
}

TEST(Synthgen, NoiseSensorsCarryLittleInformation)
{
    const auto ds = generate(default_template(1));
    const auto m = mi_matrix(ds);
    const auto b4 = m.index_of(SensorId("B4"));
    const auto a1 = m.index_of(SensorId("A1"));
    const double noise = m.at(b4, a1);
    const double parent = m.score(SensorId("A4"), SensorId("A1"));
    // A plug-in estimate of an independent pair sits at its bias floor.
    EXPECT_LT(noise, 2.0 * mi_bias_floor(m, b4, a1));
    EXPECT_GT(parent, 5.0 * noise);
    EXPECT_GT(m.score(SensorId("C3"), SensorId("C1")), m.score(SensorId("C3"), SensorId("C4")));
}

TEST(Synthgen, CommuterProfilePeaks)
{
    const double morning = commuter_profile(96.0, 288, 1.0, 0.0);
    const double night = commuter_profile(12.0, 288, 1.0, 0.0);
    EXPECT_GT(morning, night);
    EXPECT_GT(commuter_profile(210.0, 288, 0.0, 1.0), commuter_profile(210.0, 288, 0.0, 0.0));
}
