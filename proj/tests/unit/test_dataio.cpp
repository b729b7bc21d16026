#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <cstring>
#include <set>
#include <unistd.h>

#include "glu/dataio.hpp"
#include "glu/errors.hpp"
#include "support.hpp"

using namespace glu;
using namespace glu::dataio;
namespace fs = std::filesystem;

namespace {

FieldDataset one_channel(std::vector<float> values, std::size_t n_t = 1) {
    FieldDataset ds;
    ds.n_cases = 1, ds.n_t = n_t, ds.n_p = values.size() / n_t, ds.n_c = 1, ds.n_d = 1;
    ds.fields = std::move(values);
    ds.coords.resize(ds.n_p);
    for (std::size_t i = 0; i < ds.n_p; ++i) ds.coords[i] = ds.n_p == 1 ? 0.0f : float(-1.0 + 2.0 * double(i) / double(ds.n_p - 1));
    return ds;
}

fs::path temp_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("glu_test_" + name + "_" + std::to_string(::getpid()));
    fs::remove_all(p);
    return p;
}

}  // namespace

TEST_CASE("constant channel normalizes to zeros with std clamped to the floor") {
    auto ds = one_channel({5, 5, 5, 5});
    const auto r = normalize_fields(ds);
    CHECK(r.stats.stddev[0] == kStdFloor);
    CHECK(r.warnings.size() == 1);
    for (float v : ds.fields) CHECK(v == 0.0f);
}

TEST_CASE("values {1,3} normalize to {-1,+1} with mean 2 and std 1") {
    auto ds = one_channel({1, 3});
    const auto r = normalize_fields(ds);
    CHECK(r.stats.mean[0] == 2.0);
    CHECK(r.stats.stddev[0] == 1.0);
    CHECK(ds.fields[0] == -1.0f);
    CHECK(ds.fields[1] == 1.0f);
}

TEST_CASE("normalize then denormalize is the identity within 1e-6 relative") {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> g(3.0, 7.0);
    std::vector<float> v(500);
    for (auto& x : v) x = float(g(rng));
    auto ds = one_channel(v, 5);
    normalize_fields(ds);
    denormalize_fields(ds);
    for (std::size_t i = 0; i < v.size(); ++i) CHECK(std::abs(ds.fields[i] - v[i]) <= 1e-6 * std::max(1.0f, std::abs(v[i])));
}

TEST_CASE("normalization statistics can come from a subset of cases") {
    auto ds = one_channel({0, 0, 10, 10}, 1);
    ds.n_cases = 2, ds.n_p = 2;
    ds.coords = {-1, 1};
    std::vector<std::size_t> train{0};
    const auto r = normalize_fields(ds, train);
    CHECK(r.stats.mean[0] == 0.0);
    CHECK(r.warnings.size() == 1);
}

TEST_CASE("non-finite input is rejected naming the channel") {
    auto ds = one_channel({1, NAN});
    CHECK_THROWS_WITH_AS(normalize_fields(ds), doctest::Contains("channel 0"), std::invalid_argument);
}

TEST_CASE("rescale_coords maps per-dimension extremes to -1 and +1") {
    const auto r = rescale_coords(std::vector<double>{0, 5, 10}, 3, 1);
    CHECK(r.coords == std::vector<double>{-1, 0, 1});
    const std::vector<double> id{-1, -0.25, 1};
    const auto same = rescale_coords(id, 3, 1);
    for (std::size_t i = 0; i < 3; ++i) CHECK(std::abs(same.coords[i] - id[i]) <= 1e-12);
    // 2-D grid [0,4] x [2,6]; corner (4,2) -> (+1,-1)
    const auto g = rescale_coords(std::vector<double>{0, 2, 4, 2, 0, 6, 4, 6}, 4, 2);
    CHECK(g.coords[2] == 1.0);
    CHECK(g.coords[3] == -1.0);
    CHECK_THROWS_WITH(rescale_coords(std::vector<double>{1, 0, 1, 5}, 2, 2), doctest::Contains("dimension 0"));
}

TEST_CASE("split_cases: counts, floor protection, determinism, partition") {
    auto s = split_cases(20, 0.85, 7);
    CHECK(s.train.size() == 17);
    CHECK(s.test.size() == 3);
    auto s2 = split_cases(20, 0.85, 7);
    CHECK(s.train == s2.train);
    std::set<std::size_t> all(s.train.begin(), s.train.end());
    for (auto t : s.test) CHECK(all.insert(t).second);
    CHECK(all.size() == 20);
    auto tiny = split_cases(2, 0.85, 0);
    CHECK(tiny.train.size() == 1);
    CHECK(tiny.test.size() == 1);
    CHECK_THROWS(split_cases(1, 0.5, 0));
}

TEST_CASE("dataset round trip is bit-exact") {
    auto ds = test::toy_dataset(5, 2, 3);
    ds.generator = {{"name", "toy"}};
    const fs::path dir = temp_dir("roundtrip");
    save_dataset(ds, dir);
    const auto back = load_dataset(dir);
    CHECK(std::memcmp(back.fields.data(), ds.fields.data(), ds.fields.size() * sizeof(float)) == 0);
    CHECK(std::memcmp(back.coords.data(), ds.coords.data(), ds.coords.size() * sizeof(float)) == 0);
    CHECK(back.grid_shape == ds.grid_shape);
    CHECK(back.channel_names == ds.channel_names);
    CHECK(back.generator["name"] == "toy");
    fs::remove_all(dir);
}

TEST_CASE("corrupted manifest and missing files use distinct errors") {
    auto ds = test::toy_dataset(4, 2, 2);
    const fs::path dir = temp_dir("corrupt");
    save_dataset(ds, dir);
    {
        std::ifstream f(dir / "manifest.json");
        auto m = nlohmann::json::parse(f);
        m["shapes"]["fields"][2] = 99;
        std::ofstream(dir / "manifest.json") << m.dump();
    }
    CHECK_THROWS_AS(load_dataset(dir), FormatError);
    {
        std::ifstream f(dir / "manifest.json");
        auto m = nlohmann::json::parse(f);
        m["shapes"]["fields"][2] = 16;
        m["format_version"] = 42;
        std::ofstream(dir / "manifest.json") << m.dump();
    }
    CHECK_THROWS_AS(load_dataset(dir), FormatError);
    CHECK_THROWS_AS(load_dataset(dir / "nope"), NotFoundError);
    fs::remove_all(dir);
}

TEST_CASE("named arrays round trip") {
    const fs::path dir = temp_dir("arrays");
    save_arrays(dir, "demo", {{"a", {{2, 3}, {1, 2, 3, 4, 5, 6}}}, {"b", {{1}, {7}}}}, {{"k", 1}});
    const auto back = load_arrays(dir);
    REQUIRE(back.size() == 2);
    CHECK(back[0].first == "a");
    CHECK(back[0].second.shape == std::vector<std::size_t>{2, 3});
    CHECK(back[0].second.data[5] == 6.0f);
    CHECK_THROWS(save_arrays(dir, "bad", {{"c", {{2, 2}, {1}}}}));
    fs::remove_all(dir);
}
