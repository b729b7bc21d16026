// glu: data generation, training, evaluation, forecasting, cost benches and plots.
//
// Exit codes: 0 ok, 1 runtime failure, 2 config error (field path printed),
// 3 missing artifact.

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "glu/bench.hpp"
#include "glu/errors.hpp"
#include "glu/evaluation.hpp"
#include "glu/metrics.hpp"
#include "glu/plot.hpp"
#include "glu/sim.hpp"
#include "glu/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace glu;

namespace {

fs::path out_path(const std::string& p) {
    const fs::path path(p);
    if (path.is_absolute()) return path;
    if (const char* root = std::getenv("GLU_OUTPUT_ROOT"); root && *root) return fs::path(root) / path;
    return path;
}

json read_json(const fs::path& p) {
    if (!fs::exists(p)) throw NotFoundError("file not found: " + p.string());
    std::ifstream f(p);
    try {
        return json::parse(f);
    } catch (const json::exception& e) {
        throw ConfigError(p.filename().string(), std::string("not valid JSON: ") + e.what());
    }
}

void write_json(const fs::path& p, const json& j) {
    fs::create_directories(p.parent_path().empty() ? fs::path(".") : p.parent_path());
    std::ofstream(p) << j.dump(2) << "\n";
}

const char* type_name(const json& j) {
    if (j.is_boolean()) return "boolean";
    if (j.is_number()) return "number";
    if (j.is_string()) return "string";
    if (j.is_array()) return "array";
    if (j.is_object()) return "object";
    return "null";
}

// Rejects unknown keys and type mismatches against the defaults.
void check_schema(const json& user, const json& defaults, const std::string& path) {
    if (!user.is_object()) throw ConfigError(path, std::string("expected object, got ") + type_name(user));
    for (const auto& [k, v] : user.items()) {
        const std::string p = path.empty() ? k : path + "." + k;
        if (!defaults.contains(k)) throw ConfigError(p, "unknown field");
        const json& d = defaults.at(k);
        if (d.is_object()) {
            check_schema(v, d, p);
        } else if (d.is_number()) {
            if (!v.is_number()) throw ConfigError(p, std::string("expected number, got ") + type_name(v));
            if ((d.is_number_unsigned() || d.is_number_integer()) && !v.is_number_integer())
                throw ConfigError(p, "expected integer");
            if (d.is_number_unsigned() && v.is_number_integer() && v.get<long long>() < 0)
                throw ConfigError(p, "must be non-negative");
        } else if (d.is_boolean() && !v.is_boolean()) {
            throw ConfigError(p, std::string("expected boolean, got ") + type_name(v));
        } else if (d.is_string() && !v.is_string()) {
            throw ConfigError(p, std::string("expected string, got ") + type_name(v));
        } else if (d.is_array() && !v.is_array()) {
            throw ConfigError(p, std::string("expected array, got ") + type_name(v));
        }
    }
}

// --set a.b.c=value overrides; value parsed as JSON, falling back to a string.
void apply_overrides(json& cfg, const std::vector<std::string>& sets) {
    for (const auto& s : sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos || eq == 0) throw ConfigError(s, "override must look like path=value");
        const std::string path = s.substr(0, eq), raw = s.substr(eq + 1);
        json value;
        try {
            value = json::parse(raw);
        } catch (const json::exception&) {
            value = raw;
        }
        json* node = &cfg;
        std::stringstream ss(path);
        std::string part;
        std::vector<std::string> parts;
        while (std::getline(ss, part, '.')) parts.push_back(part);
        for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
            if (!node->contains(parts[i])) (*node)[parts[i]] = json::object();
            node = &(*node)[parts[i]];
            if (!node->is_object()) throw ConfigError(path, "override traverses a non-object field");
        }
        (*node)[parts.back()] = value;
    }
}

json load_config(const std::string& file, const std::vector<std::string>& sets) {
    json cfg = file.empty() ? json::object() : read_json(file);
    apply_overrides(cfg, sets);
    return cfg;
}

std::vector<std::size_t> cases_of(const dataio::FieldDataset& ds, const std::string& which) {
    const auto split = dataio::split_cases(ds);
    if (which == "train") return split.train;
    if (which == "test") return split.test;
    throw ConfigError("split", "must be 'train' or 'test'");
}

// ---------------------------------------------------------------- generate

struct GenerateArgs {
    std::string config, out;
    std::vector<std::string> sets;
};

json generate_defaults(const json& sim) {
    return {{"sim", sim}, {"n_cases", 24}, {"train_frac", 0.85}, {"split_seed", 0}, {"normalize", true}};
}

sim::GenerateOptions generate_options(const json& cfg) {
    sim::GenerateOptions opt;
    opt.train_frac = cfg.value("train_frac", opt.train_frac);
    opt.split_seed = cfg.value("split_seed", opt.split_seed);
    opt.normalize = cfg.value("normalize", opt.normalize);
    if (!(opt.train_frac > 0.0 && opt.train_frac < 1.0)) throw ConfigError("train_frac", "must be in (0,1)");
    return opt;
}

// Re-roots a validation error at the config file location `prefix`, dropping the
// struct-local head `strip` if present.
template <class Config>
void validate_under(const std::string& prefix, const Config& c, const std::string& strip = "") {
    try {
        c.validate();
    } catch (const ConfigError& e) {
        if (e.path.rfind(prefix + ".", 0) == 0) throw;
        std::string p = e.path;
        if (!strip.empty() && p.rfind(strip + ".", 0) == 0) p = p.substr(strip.size() + 1);
        const std::string what = e.what();
        throw ConfigError(prefix + "." + p, what.substr(std::min(what.size(), e.path.size() + 2)));
    }
}

std::size_t n_cases_of(const json& cfg) {
    const std::size_t n = cfg.value("n_cases", std::size_t(24));
    if (n < 2) throw ConfigError("n_cases", "must be >= 2");
    return n;
}

int cmd_generate_fhn(const GenerateArgs& a) {
    json cfg = load_config(a.config, a.sets);
    check_schema(cfg, generate_defaults(sim::FhnConfig{}.to_json()), "");
    const auto fhn = sim::FhnConfig::from_json(cfg.value("sim", json::object()));
    validate_under("sim", fhn);
    const auto ds = sim::generate_fhn(fhn, n_cases_of(cfg), generate_options(cfg));
    const fs::path out = out_path(a.out);
    dataio::save_dataset(ds, out);
    write_json(out / "config.json", cfg);
    std::cout << "wrote " << out.string() << " (" << ds.n_cases << " cases, " << ds.n_t << " frames, " << ds.n_p
              << " points)\n";
    return 0;
}

int cmd_generate_advection(const GenerateArgs& a) {
    json cfg = load_config(a.config, a.sets);
    check_schema(cfg, generate_defaults(sim::AdvectionConfig{}.to_json()), "");
    const auto adv = sim::AdvectionConfig::from_json(cfg.value("sim", json::object()));
    validate_under("sim", adv);
    const auto ds = sim::generate_advection(adv, n_cases_of(cfg), generate_options(cfg));
    const fs::path out = out_path(a.out);
    dataio::save_dataset(ds, out);
    write_json(out / "config.json", cfg);
    std::cout << "wrote " << out.string() << " (" << ds.n_cases << " cases, " << ds.n_t << " frames, " << ds.n_p
              << " points)\n";
    return 0;
}

// ---------------------------------------------------------------- train

json train_defaults() {
    return {{"model", ModelConfig{}.to_json()},
            {"train", training::TrainConfig{}.to_json()},
            {"dynamics", {{"kind", "none"}, {"lfd", LfdConfig{}.to_json()}, {"causal_transformer", CausalConfig{}.to_json()}}}};
}

struct TrainArgs {
    std::string config, data, out;
    std::vector<std::string> sets;
};

int cmd_train(const TrainArgs& a) {
    json cfg = load_config(a.config, a.sets);
    check_schema(cfg, train_defaults(), "");
    const auto ds = dataio::load_dataset(a.data);
    json mj = cfg.value("model", json::object());
    if (mj.contains("encoder") && mj["encoder"].contains("n_d") && mj["encoder"]["n_d"] != ds.n_d)
        throw ConfigError("model.encoder.n_d", "does not match the dataset (" + std::to_string(ds.n_d) + ")");
    if (mj.contains("encoder") && mj["encoder"].contains("n_c") && mj["encoder"]["n_c"] != ds.n_c)
        throw ConfigError("model.encoder.n_c", "does not match the dataset (" + std::to_string(ds.n_c) + ")");
    mj["encoder"]["n_d"] = ds.n_d;
    mj["encoder"]["n_c"] = ds.n_c;
    const ModelConfig mc = ModelConfig::from_json(mj);
    validate_under("model", mc);
    const auto tc = training::TrainConfig::from_json(cfg.value("train", json::object()));
    tc.validate();

    const json dyn = cfg.value("dynamics", json::object());
    const std::string kind = dyn.value("kind", "none");
    if (kind != "none" && kind != "lfd" && kind != "causal_transformer")
        throw ConfigError("dynamics.kind", "must be none, lfd or causal_transformer");
    std::unique_ptr<Propagator> prop;
    if (kind == "lfd") {
        json lj = dyn.value("lfd", json::object());
        lj["width"] = mc.encoder.width;
        auto lc = LfdConfig::from_json(lj);
        validate_under("dynamics.lfd", lc, "dynamics");
        prop = std::make_unique<Lfd>(lc);
    } else if (kind == "causal_transformer") {
        json cj = dyn.value("causal_transformer", json::object());
        cj["width"] = mc.encoder.width;
        auto cc = CausalConfig::from_json(cj);
        validate_under("dynamics.causal_transformer", cc, "causal");
        prop = std::make_unique<CausalTransformer>(cc);
    }

    const fs::path out = out_path(a.out);
    training::RunDir run(out);
    json snapshot = cfg;
    snapshot["data"] = fs::absolute(a.data).string();
    run.write_config(snapshot);
    const auto split = dataio::split_cases(ds);
    GluModel model(mc);

    auto ck1 = [&](std::size_t step, bool final) {
        if (final) model.save(out / "model", "final");
        else model.save(run.checkpoint("model_step" + std::to_string(step)), "step" + std::to_string(step));
    };
    const auto r1 = training::train_stage1(model, ds, split.train, tc, ck1);
    run.write_loss_csv("loss_stage1.csv", r1);
    json report{{"stage1", {{"steps", r1.steps}, {"diverged", r1.diverged}, {"diagnostics", r1.diagnostics},
                            {"seconds", r1.seconds}}}};
    std::cout << "stage 1: " << r1.steps << " steps in " << r1.seconds << " s"
              << (r1.log.empty() ? "" : ", final loss " + std::to_string(r1.log.back().total)) << "\n";
    if (r1.diverged) {
        run.write_json("train_report.json", report);
        std::cerr << "error: stage 1 diverged: " << r1.diagnostics << "\n";
        return 1;
    }
    if (prop) {
        auto save_prop = [&](const fs::path& dir, const std::string& tag) {
            if (auto* l = dynamic_cast<Lfd*>(prop.get())) l->save(dir, tag);
            else dynamic_cast<CausalTransformer*>(prop.get())->save(dir, tag);
        };
        auto ck2 = [&](std::size_t step, bool final) {
            if (final) save_prop(out / "dynamics", "final");
            else save_prop(run.checkpoint("dynamics_step" + std::to_string(step)), "step" + std::to_string(step));
        };
        const auto r2 = training::train_stage2(*prop, model, ds, split.train, tc, ck2);
        run.write_loss_csv("loss_stage2.csv", r2);
        report["stage2"] = {{"kind", kind}, {"steps", r2.steps}, {"diverged", r2.diverged},
                            {"diagnostics", r2.diagnostics}, {"seconds", r2.seconds}};
        std::cout << "stage 2 (" << kind << "): " << r2.steps << " steps in " << r2.seconds << " s\n";
        if (r2.diverged) {
            run.write_json("train_report.json", report);
            std::cerr << "error: stage 2 diverged: " << r2.diagnostics << "\n";
            return 1;
        }
    }
    run.write_json("train_report.json", report);
    std::cout << "wrote " << out.string() << "\n";
    return 0;
}

// ---------------------------------------------------------------- evaluate

struct EvalArgs {
    std::string run, data, out, split = "test";
    std::size_t sensors = 64, stride = 1;
    std::uint64_t seed = 0;
    std::vector<std::size_t> sweep;
    bool dumps = true;
};

json metric_row(const std::string& metric, const std::string& dataset, const std::string& model, std::uint64_t seed,
                double value) {
    return {{"metric", metric}, {"dataset", dataset}, {"model", model}, {"seed", seed}, {"value", value}};
}

int cmd_evaluate(const EvalArgs& a) {
    const fs::path run(a.run);
    auto model = load_model(run / "model");
    const auto ds = dataio::load_dataset(a.data);
    if (ds.n_d != model->config().encoder.n_d || ds.n_c != model->config().encoder.n_c)
        throw ConfigError("data", "dataset dimensions do not match the trained model");
    if (a.sensors < 1 || a.sensors > ds.n_p) throw ConfigError("sensors", "must be in [1, n_p]");
    if (a.stride < 1) throw ConfigError("stride", "must be >= 1");
    const auto cases = cases_of(ds, a.split);
    const std::string dname = ds.generator.value("name", std::string("dataset"));
    const std::string mname = to_string(model->mode());

    json rows = json::array();
    const auto rec = eval::evaluate_reconstruction(*model, ds, cases, a.sensors, a.seed, a.stride);
    rows.push_back(metric_row("rel_l2", dname, mname, a.seed, rec.mean));
    rows.push_back(metric_row("rel_l2_std", dname, mname, a.seed, rec.stddev));

    // Physics diagnostics on the first frame of each evaluated case.
    if (ds.grid_shape.size() == 2) {
        const Mat q = sensing::all_coords(ds);
        double lsd_sum = 0, jsd_sum = 0, gr_pred = 0, gr_true = 0;
        for (std::size_t c : cases) {
            const auto s = sensing::make_observation(ds, c, 0, eval::eval_sensors(ds, c, a.sensors, a.seed));
            const auto out = model->reconstruct(s, q);
            const Mat truth = sensing::full_frame(ds, c, 0);
            std::vector<double> p0(ds.n_p), t0(ds.n_p);
            for (std::size_t i = 0; i < ds.n_p; ++i) p0[i] = out.mean(i, 0), t0[i] = truth(i, 0);
            lsd_sum += metrics::lsd(metrics::energy_spectrum(t0, ds.grid_shape), metrics::energy_spectrum(p0, ds.grid_shape)).value;
            gr_pred += metrics::spatial_corr_length(p0, ds.grid_shape).length;
            gr_true += metrics::spatial_corr_length(t0, ds.grid_shape).length;
            if (ds.n_c >= 2) {
                std::vector<double> p1(ds.n_p), t1(ds.n_p);
                for (std::size_t i = 0; i < ds.n_p; ++i) p1[i] = out.mean(i, 1), t1[i] = truth(i, 1);
                auto [a0, a1] = std::minmax_element(t0.begin(), t0.end());
                auto [b0, b1] = std::minmax_element(t1.begin(), t1.end());
                const auto hp = metrics::joint_pdf(p0, p1, 32, 32, *a0, *a1, *b0, *b1);
                const auto ht = metrics::joint_pdf(t0, t1, 32, 32, *a0, *a1, *b0, *b1);
                jsd_sum += metrics::jsd(ht, hp);
            }
        }
        const double n = double(cases.size());
        rows.push_back(metric_row("lsd", dname, mname, a.seed, lsd_sum / n));
        rows.push_back(metric_row("g_r_pred", dname, mname, a.seed, gr_pred / n));
        rows.push_back(metric_row("g_r_true", dname, mname, a.seed, gr_true / n));
        if (ds.n_c >= 2) {
            rows.push_back(metric_row("jsd", dname, mname, a.seed, jsd_sum / n));
            rows.push_back(metric_row("jsd_normalized", dname, mname, a.seed, jsd_sum / n / std::log(2.0)));
        }
    }

    json out{{"rows", rows}, {"split", a.split}, {"sensors", a.sensors}, {"stride", a.stride}};
    if (!a.sweep.empty()) {
        json sw = json::array();
        for (std::size_t n : a.sweep) {
            if (n < 1 || n > ds.n_p) throw ConfigError("sensor_sweep", "entries must be in [1, n_p]");
            const auto r = eval::evaluate_reconstruction(*model, ds, cases, n, a.seed, a.stride);
            sw.push_back({{"sensors", n}, {"rel_l2", r.mean}, {"rel_l2_std", r.stddev}});
        }
        out["sensor_scaling"] = sw;
    }
    const auto phi = eval::importance_map(*model, ds);
    out["importance_cv"] = eval::coefficient_of_variation(phi);

    const fs::path dest = a.out.empty() ? run / "metrics.json" : out_path(a.out);
    write_json(dest, out);
    if (a.dumps) {
        eval::dump_importance(run / "importance", ds, phi);
        const std::size_t c = cases.front();
        eval::dump_reconstruction(run / "reconstruction", *model, ds,
                                  sensing::make_observation(ds, c, 0, eval::eval_sensors(ds, c, a.sensors, a.seed)));
    }
    std::cout << "rel_l2 " << rec.mean << " +- " << rec.stddev << " over " << rec.per_frame.size() << " frames\n"
              << "wrote " << dest.string() << "\n";
    return 0;
}

// ---------------------------------------------------------------- forecast

struct ForecastArgs {
    std::string run, data, task, out;
    std::size_t case_index = 0, t0 = 0, n_obs = 16, horizon = 50, sensors = 64;
    std::uint64_t seed = 0;
};

int cmd_forecast(const ForecastArgs& a) {
    const fs::path run(a.run);
    auto model = load_model(run / "model");
    auto prop = eval::load_propagator(run / "dynamics");
    const auto ds = dataio::load_dataset(a.data);
    sensing::ForecastTask task;
    if (!a.task.empty()) {
        task = sensing::forecast_task_from_json(ds, read_json(a.task));
    } else {
        if (a.case_index >= ds.n_cases) throw ConfigError("case", "out of range");
        if (a.sensors < 1 || a.sensors > ds.n_p) throw ConfigError("sensors", "must be in [1, n_p]");
        try {
            task = sensing::make_forecast_task(ds, a.case_index, a.t0, a.n_obs, a.horizon,
                                               eval::eval_sensors(ds, a.case_index, a.sensors, a.seed), a.seed);
        } catch (const std::invalid_argument& e) {
            throw ConfigError("horizon", e.what());
        }
    }
    const auto r = eval::forecast(*model, *prop, ds, task);
    const fs::path dest = a.out.empty() ? run / "forecast" : out_path(a.out);
    json j = r.to_json();
    j["task"] = task.to_json();
    j["propagator"] = prop->name();
    write_json(dest / "forecast.json", j);
    eval::dump_trajectory(dest / "trajectory", r);
    std::cout << "divergence step " << r.divergence_step << (r.diverged ? "" : " (none within horizon)");
    if (!r.rel_l2.empty()) std::cout << ", final rel_l2 " << r.rel_l2.back();
    std::cout << "\nwrote " << dest.string() << "\n";
    return 0;
}

// ---------------------------------------------------------------- bench

struct BenchArgs {
    std::string config, out = "bench";
    std::vector<std::string> sets;
};

int cmd_bench(const BenchArgs& a) {
    json cfg = load_config(a.config, a.sets);
    check_schema(cfg, bench::SweepGrid{}.to_json(), "");
    bench::SweepGrid grid;
    try {
        grid = bench::SweepGrid::from_json(cfg);
    } catch (const std::invalid_argument& e) {
        std::string path = e.what();
        if (path.rfind("bench.", 0) == 0) path = path.substr(6);
        throw ConfigError(path, "must be a positive integer (list)");
    }
    const auto res = bench::sweep(grid);
    const fs::path out = out_path(a.out);
    fs::create_directories(out);
    bench::write_csv((out / "bench.csv").string(), res.rows);
    write_json(out / "summary.json", res.summary);
    write_json(out / "config.json", grid.to_json());
    std::cout << "encoder slope " << res.summary["encoder_vs_N"]["loglog"]["slope"].get<double>() << ", causal slope "
              << res.summary["causal_vs_N"]["loglog"]["slope"].get<double>() << "\nwrote " << out.string() << "\n";
    return 0;
}

// ---------------------------------------------------------------- plot

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
    std::ifstream f(p);
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(f, line)) {
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string c;
        while (std::getline(ss, c, ',')) cells.push_back(c);
        rows.push_back(cells);
    }
    return rows;
}

int plot_loss(const fs::path& csv, const fs::path& svg) {
    const auto rows = read_csv(csv);
    if (rows.size() < 2) return 0;
    std::vector<plot::Series> series;
    for (std::size_t col = 3; col < rows[0].size(); ++col) {
        plot::Series s{rows[0][col], {}, {}};
        for (std::size_t r = 1; r < rows.size(); ++r) {
            const double v = std::stod(rows[r][col]);
            if (col == 3 || v > 0) s.x.push_back(std::stod(rows[r][0])), s.y.push_back(v);
        }
        if (col == 3 || rows[0][col] == "mse" || rows[0][col] == "latent" || rows[0][col] == "decode")
            series.push_back(s);
    }
    plot::write_file(svg.string(), plot::line_plot_svg({"training loss", "step", "loss", false, false}, series));
    return 1;
}

int cmd_plot(const std::string& dir_s) {
    const fs::path dir(dir_s);
    if (!fs::exists(dir)) throw NotFoundError("directory not found: " + dir.string());
    const fs::path figs = dir / "figures";
    fs::create_directories(figs);
    int n = 0;
    for (const char* name : {"loss_stage1", "loss_stage2"})
        if (fs::exists(dir / (std::string(name) + ".csv")))
            n += plot_loss(dir / (std::string(name) + ".csv"), figs / (std::string(name) + ".svg"));
    if (fs::exists(dir / "importance" / "manifest.json")) {
        for (const auto& [name, arr] : dataio::load_arrays(dir / "importance")) {
            if (arr.shape.size() != 2) continue;
            std::vector<double> v(arr.data.begin(), arr.data.end());
            plot::write_file((figs / "importance_map.svg").string(),
                             plot::heatmap_svg("importance phi_bar", v, arr.shape[0], arr.shape[1]));
            ++n;
        }
    }
    if (fs::exists(dir / "metrics.json")) {
        const json m = read_json(dir / "metrics.json");
        if (m.contains("sensor_scaling")) {
            plot::Series s{"rel L2", {}, {}};
            for (const auto& r : m["sensor_scaling"]) {
                s.x.push_back(r["sensors"].get<double>());
                s.y.push_back(r["rel_l2"].get<double>());
            }
            plot::write_file((figs / "error_vs_sensors.svg").string(),
                             plot::line_plot_svg({"reconstruction error vs sensors", "sensors", "relative L2", true, true}, {s}));
            ++n;
        }
    }
    if (fs::exists(dir / "forecast" / "forecast.json")) {
        const json f = read_json(dir / "forecast" / "forecast.json");
        plot::Series s{f.value("propagator", std::string("rollout")), {}, {}};
        const auto err = f["rel_l2"];
        for (std::size_t h = 0; h < err.size(); ++h)
            if (err[h].is_number()) s.x.push_back(double(h + 1)), s.y.push_back(err[h].get<double>());
        plot::write_file((figs / "rollout_error.svg").string(),
                         plot::line_plot_svg({"rollout error", "step", "relative L2", false, false}, {s}));
        ++n;
    }
    if (fs::exists(dir / "bench.csv")) {
        const auto rows = read_csv(dir / "bench.csv");
        const fs::path cfgp = dir / "config.json";
        const json base = fs::exists(cfgp) ? read_json(cfgp)["base"] : bench::CostConfig{}.to_json();
        // Columns: component,N,S,D,K,w,n_q,N_ref,heads,blocks,attention_scores,macs,peak_live,selection,aggregation
        auto by = [&](const std::string& comp, std::size_t xcol, std::size_t ycol, const std::vector<std::size_t>& fixed) {
            plot::Series s{comp, {}, {}};
            for (std::size_t r = 1; r < rows.size(); ++r) {
                if (rows[r][0] != comp) continue;
                bool ok = true;
                for (std::size_t c : fixed) ok = ok && std::stod(rows[r][c]) == base[rows[0][c]].get<double>();
                if (ok) s.x.push_back(std::stod(rows[r][xcol])), s.y.push_back(std::stod(rows[r][ycol]));
            }
            return s;
        };
        plot::write_file((figs / "cost_vs_sensors.svg").string(),
                         plot::line_plot_svg({"attention score elements vs N", "N", "score elements", true, true},
                                             {by("encoder", 1, 10, {5, 6}), by("lfd", 1, 10, {5}), by("causal", 1, 10, {5})}));
        plot::write_file((figs / "peak_live_vs_queries.svg").string(),
                         plot::line_plot_svg({"peak live elements vs queries", "n_q", "elements", true, true},
                                             {by("decoder", 6, 12, {4}), by("dense_reference", 6, 12, {})}));
        plot::write_file((figs / "cost_vs_window.svg").string(),
                         plot::line_plot_svg({"propagator score elements vs window", "w", "score elements", true, true},
                                             {by("lfd", 5, 10, {1}), by("causal", 5, 10, {1})}));
        n += 3;
    }
    std::cout << "wrote " << n << " figure(s) to " << figs.string() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"GLU sparse-sensor reconstruction and latent forecasting"};
    app.require_subcommand(1);

    GenerateArgs gf, ga;
    auto* g1 = app.add_subcommand("generate-fhn", "simulate FitzHugh-Nagumo trajectories");
    g1->add_option("-c,--config", gf.config, "JSON config");
    g1->add_option("-o,--out", gf.out, "output dataset directory")->required();
    g1->add_option("--set", gf.sets, "override a config field: path=value");
    auto* g2 = app.add_subcommand("generate-advection", "generate periodic advection trajectories");
    g2->add_option("-c,--config", ga.config, "JSON config");
    g2->add_option("-o,--out", ga.out, "output dataset directory")->required();
    g2->add_option("--set", ga.sets, "override a config field: path=value");

    TrainArgs ta;
    auto* tr = app.add_subcommand("train", "train a reconstruction model and optional propagator");
    tr->add_option("-c,--config", ta.config, "JSON config");
    tr->add_option("-d,--data", ta.data, "dataset directory")->required();
    tr->add_option("-o,--out", ta.out, "run directory")->required();
    tr->add_option("--set", ta.sets, "override a config field: path=value");

    EvalArgs ea;
    auto* ev = app.add_subcommand("evaluate", "evaluate a trained run");
    ev->add_option("-r,--run", ea.run, "run directory")->required();
    ev->add_option("-d,--data", ea.data, "dataset directory")->required();
    ev->add_option("-o,--out", ea.out, "metrics JSON path (default RUN/metrics.json)");
    ev->add_option("--split", ea.split, "train or test");
    ev->add_option("--sensors", ea.sensors, "sensor count");
    ev->add_option("--seed", ea.seed, "sensor placement seed");
    ev->add_option("--stride", ea.stride, "frame stride");
    ev->add_option("--sensor-sweep", ea.sweep, "sensor counts for the scaling curve")->delimiter(',');
    ev->add_flag("!--no-dumps", ea.dumps, "skip importance and reconstruction dumps");

    ForecastArgs fa;
    auto* fc = app.add_subcommand("forecast", "roll out a trained propagator from an observation window");
    fc->add_option("-r,--run", fa.run, "run directory")->required();
    fc->add_option("-d,--data", fa.data, "dataset directory")->required();
    fc->add_option("-t,--task", fa.task, "forecast task JSON");
    fc->add_option("-o,--out", fa.out, "output directory (default RUN/forecast)");
    fc->add_option("--case", fa.case_index, "case index");
    fc->add_option("--t0", fa.t0, "first observed frame");
    fc->add_option("--n-obs", fa.n_obs, "observed frames");
    fc->add_option("--horizon", fa.horizon, "forecast steps");
    fc->add_option("--sensors", fa.sensors, "sensor count");
    fc->add_option("--seed", fa.seed, "sensor placement seed");

    BenchArgs ba;
    auto* be = app.add_subcommand("bench", "counted-work cost sweep");
    be->add_option("-c,--config", ba.config, "JSON sweep grid");
    be->add_option("-o,--out", ba.out, "output directory");
    be->add_option("--set", ba.sets, "override a config field: path=value");

    std::string plot_dir;
    auto* pl = app.add_subcommand("plot", "emit SVG figures from persisted results");
    pl->add_option("dir", plot_dir, "run, evaluation or bench directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        if (*g1) return cmd_generate_fhn(gf);
        if (*g2) return cmd_generate_advection(ga);
        if (*tr) return cmd_train(ta);
        if (*ev) return cmd_evaluate(ea);
        if (*fc) return cmd_forecast(fa);
        if (*be) return cmd_bench(ba);
        if (*pl) return cmd_plot(plot_dir);
    } catch (const ConfigError& e) {
        const std::string what = e.what();
        std::cerr << "config error at " << e.path << ": " << what.substr(std::min(what.size(), e.path.size() + 2)) << "\n";
        return 2;
    } catch (const NotFoundError& e) {
        std::cerr << "missing artifact: " << e.what() << "\n";
        return 3;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
