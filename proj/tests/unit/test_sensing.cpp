#include <set>

#include "glu/sensing.hpp"
#include "support.hpp"

using namespace glu;
using namespace glu::sensing;

TEST_CASE("sensor sampling is sorted, distinct, in range and seeded") {
    const auto a = sample_sensors(1000, 64, 9), b = sample_sensors(1000, 64, 9), c = sample_sensors(1000, 64, 10);
    CHECK(a == b);
    CHECK(a != c);
    CHECK(std::set<std::size_t>(a.begin(), a.end()).size() == 64);
    CHECK(std::is_sorted(a.begin(), a.end()));
    CHECK(a.back() < 1000);
    CHECK(sample_sensors(10, 10, 0).size() == 10);
    CHECK_THROWS_WITH(sample_sensors(10, 11, 0), doctest::Contains("exceeds"));
    CHECK_THROWS(sample_sensors(10, 0, 0));
}

TEST_CASE("sensor sampling is close to uniform over points") {
    std::vector<int> hits(20, 0);
    for (std::uint64_t s = 0; s < 4000; ++s)
        for (auto i : sample_sensors(20, 5, s)) ++hits[i];
    for (int h : hits) CHECK(std::abs(h - 1000) < 150);  // expectation 4000 * 5 / 20
}

TEST_CASE("observations gather coordinates and values; noise is seeded") {
    const auto ds = test::toy_dataset(6, 2, 3);
    const std::vector<std::size_t> idx{0, 7, 35};
    const auto o = make_observation(ds, 1, 2, idx);
    for (std::size_t i = 0; i < idx.size(); ++i) {
        CHECK(o.x(i, 0) == ds.coord(idx[i], 0));
        CHECK(o.u(i, 1) == ds.at(1, 2, idx[i], 1));
    }
    const auto n1 = make_observation(ds, 1, 2, idx, 0.1, 4), n2 = make_observation(ds, 1, 2, idx, 0.1, 4);
    CHECK(test::max_abs_diff(n1.u, n2.u) == 0.0);
    CHECK(test::max_abs_diff(n1.u, o.u) > 0.0);
    CHECK(coverage(64, 10000) == doctest::Approx(0.0064));
    CHECK_THROWS(make_observation(ds, 1, 2, {36}));
    CHECK_THROWS(make_observation(ds, 2, 0, idx));
}

TEST_CASE("forecast tasks slice window and future; overrun reports the admissible horizon") {
    const auto ds = test::toy_dataset(5, 1, 10);
    const auto t = make_forecast_task(ds, 0, 2, 3, 4, {1, 2});
    CHECK(t.window.size() == 3);
    CHECK(t.window.back().t_index == 4);
    CHECK(t.future.size() == 4);
    CHECK(t.future[0](3, 0) == ds.at(0, 5, 3, 0));
    CHECK(t.last_observed(3, 1) == ds.at(0, 4, 3, 1));
    CHECK_THROWS_WITH(make_forecast_task(ds, 0, 2, 3, 6, {1}), doctest::Contains("max admissible H = 5"));
    const nlohmann::json j{{"case", 0}, {"t0", 1}, {"n_obs", 2}, {"horizon", 3}, {"indices", {4, 9}}};
    const auto f = forecast_task_from_json(ds, j);
    CHECK(f.window[0].indices == std::vector<std::size_t>{4, 9});
    CHECK(f.future.size() == 3);
}
