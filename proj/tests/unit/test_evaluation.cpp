#include <filesystem>
#include <fstream>
#include <unistd.h>

#include "glu/errors.hpp"
#include "glu/evaluation.hpp"
#include "support.hpp"

using namespace glu;
using namespace glu::eval;
namespace fs = std::filesystem;

namespace {

ModelConfig tiny_model(DecoderMode mode) {
    ModelConfig c;
    c.encoder.n_d = 2, c.encoder.n_c = 2, c.encoder.n_freq = 4, c.encoder.width = 8, c.encoder.latents = 3;
    c.importance.n_freq = 4, c.importance.hidden = 8;
    c.reconstructor.K = 4, c.reconstructor.hidden = 8;
    c.mode = mode;
    c.seed = 4;
    return c;
}

fs::path temp(const std::string& n) {
    auto p = fs::temp_directory_path() / ("glu_eval_" + n + "_" + std::to_string(::getpid()));
    fs::remove_all(p);
    return p;
}

class NanProp final : public Propagator {
public:
    std::size_t window() const override { return 2; }
    double dt() const override { return 1.0; }
    std::string name() const override { return "nan"; }
    ParamList params() override { return {}; }
    StepVars step(ad::Tape& t, std::span<const ad::Var> g, std::span<const ad::Var> z, const Mat&) override {
        Mat bad = z.back().value();
        bad[0] = NAN;
        return {g.back(), t.constant(bad), g.back(), z.back()};
    }
};

}  // namespace

TEST_CASE("relative L2 is measured in physical units") {
    auto ds = test::toy_dataset(3, 1, 1);
    ds.norm.mean = {10.0, -5.0};
    ds.norm.stddev = {2.0, 0.5};
    Mat pred(2, 2), truth(2, 2);
    truth(0, 0) = 1, truth(1, 1) = -1;
    // physical truth (12, -5; 10, -5.5), prediction (10, -5; 10, -5)
    const double num = std::sqrt(4.0 + 0.25), den = std::sqrt(144.0 + 25.0 + 100.0 + 30.25);
    CHECK(frame_rel_l2(ds, pred, truth) == doctest::Approx(num / den).epsilon(1e-14));
    ds.normalized = false;
    CHECK(frame_rel_l2(ds, truth, truth) == 0.0);
}

TEST_CASE("evaluation sensors are fixed per case and seed") {
    const auto ds = test::toy_dataset();
    CHECK(eval_sensors(ds, 0, 10, 1) == eval_sensors(ds, 0, 10, 1));
    CHECK(eval_sensors(ds, 0, 10, 1) != eval_sensors(ds, 1, 10, 1));
    CHECK(eval_sensors(ds, 0, 10, 1) != eval_sensors(ds, 0, 10, 2));
}

TEST_CASE("coefficient of variation") {
    CHECK(coefficient_of_variation({1, 3}) == doctest::Approx(0.5));
    CHECK(coefficient_of_variation({2, 2, 2}) == 0.0);
    CHECK_THROWS(coefficient_of_variation({}));
}

TEST_CASE("reconstruction evaluation covers the strided frames deterministically") {
    const auto ds = test::toy_dataset(8, 3, 6);
    GluModel m(tiny_model(DecoderMode::adaptive));
    const auto a = evaluate_reconstruction(m, ds, {1, 2}, 12, 0, 2);
    const auto b = evaluate_reconstruction(m, ds, {1, 2}, 12, 0, 2);
    CHECK(a.per_frame.size() == 2 * 3);
    CHECK(a.per_frame == b.per_frame);
    CHECK(std::isfinite(a.mean));
    CHECK_THROWS(evaluate_reconstruction(m, ds, {1}, 12, 0, 0));
}

TEST_CASE("POD-GPR recovers a low-rank toy field well") {
    const auto ds = test::toy_dataset(10, 6, 8);
    const auto r = evaluate_pod_gpr(ds, {0, 1, 2, 3, 4}, {5}, 20, 8, 0);
    CHECK(r.per_frame.size() == 8);
    CHECK(r.mean < 0.5);
}

TEST_CASE("forecast divergence step is the first non-finite frame; censored at the horizon otherwise") {
    const auto ds = test::toy_dataset(6, 1, 10);
    GluModel m(tiny_model(DecoderMode::adaptive));
    const auto task = sensing::make_forecast_task(ds, 0, 0, 3, 4, {0, 5, 11, 20, 30});
    NanProp bad;
    const auto r = forecast(m, bad, ds, task);
    CHECK(r.diverged);
    CHECK(r.divergence_step == 1);
    CHECK(std::isinf(r.rel_l2[3]));
    LfdConfig lc;
    lc.width = 8, lc.window = 3, lc.hidden = 8;
    Lfd lfd(lc);
    const auto p = forecast(m, lfd, ds, task, true);
    CHECK(p.rel_l2.size() == 4);
    CHECK(p.predictions.size() == 4);
    CHECK(p.trajectory.size() == 3 + 4);
    // the untrained LFD is the persistence model: every forecast frame is identical
    CHECK(p.predictions[0].vec() == p.predictions[3].vec());
    if (!p.diverged) CHECK(p.divergence_step == 4);
    CHECK(p.to_json().contains("divergence_step"));
}

TEST_CASE("propagators reload by kind; missing and unknown configs are distinct errors") {
    const auto dir = temp("prop");
    fs::create_directories(dir);
    CausalConfig cc;
    cc.width = 8, cc.window = 3, cc.hidden = 8, cc.blocks = 1;
    CausalTransformer ct(cc);
    ct.head.b.value.fill(0.25);
    ct.save(dir, "t");
    auto back = load_propagator(dir);
    CHECK(back->name() == "causal_transformer");
    CHECK(back->params().back()->value.vec() == ct.params().back()->value.vec());
    CHECK_THROWS_AS(load_propagator(dir / "none"), NotFoundError);
    std::ofstream(dir / "dynamics_config.json") << R"({"kind":"rnn","config":{}})";
    CHECK_THROWS_AS(load_propagator(dir), FormatError);
    fs::remove_all(dir);
}

TEST_CASE("array dumps are readable with the dataset array loader") {
    const auto ds = test::toy_dataset(6, 1, 3);
    GluModel m(tiny_model(DecoderMode::adaptive));
    const auto dir = temp("dump");
    const auto s = sensing::make_observation(ds, 0, 1, {0, 7, 14, 21, 28});
    dump_reconstruction(dir / "rec", m, ds, s);
    const auto arrs = dataio::load_arrays(dir / "rec");
    bool found = false;
    for (const auto& [name, a] : arrs)
        if (name == "mean") found = a.shape == std::vector<std::size_t>{36, 2};
    CHECK(found);
    const auto phi = importance_map(m, ds);
    CHECK(phi.size() == 36);
    dump_importance(dir / "imp", ds, phi);
    CHECK(dataio::load_arrays(dir / "imp")[0].second.shape == std::vector<std::size_t>{6, 6});
    fs::remove_all(dir);
}
