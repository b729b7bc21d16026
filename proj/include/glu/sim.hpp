#pragma once
// Dataset generators: FitzHugh-Nagumo reaction-diffusion on a periodic
// square, plus analytic periodic-advection and localized-activity fields.

#include <cstdint>
#include <vector>

#include <json.hpp>

#include "glu/dataio.hpp"
#include "glu/fft.hpp"

namespace glu::sim {

struct FhnConfig {
    double mu_u = 1.0;
    double mu_v = 100.0;
    double alpha = 0.01;  // reaction offset
    double beta = 0.25;   // recovery rate
    double half_width = 50.0;
    double dx = 1.0;
    double dt = 0.02;
    std::size_t n_steps = 1000;
    std::size_t save_every = 10;
    std::size_t burn_in = 0;  // solver steps discarded before the first snapshot
    double init_std = 0.05;
    std::uint64_t seed = 0;
    std::size_t max_retries = 3;
    bool reaction = true;  // false freezes the reaction terms (diffusion only)

    std::size_t grid_n() const;
    void validate() const;
    nlohmann::json to_json() const;
    static FhnConfig from_json(const nlohmann::json& j);
};

/// Split-step integrator: exact spectral diffusion followed by explicit
/// Euler on the reaction terms. Fields are row-major n x n.
class FhnStepper {
public:
    explicit FhnStepper(const FhnConfig& cfg);
    // Throws NumericalError naming `step_index` if the state turns non-finite.
    void step(std::vector<double>& u, std::vector<double>& v, std::size_t step_index = 0);
    std::size_t n() const { return n_; }
    // Wavenumber magnitude squared |k|^2 for spectrum bin (iy, ix) of the r2c layout.
    double k2(std::size_t iy, std::size_t ix) const;

private:
    FhnConfig cfg_;
    std::size_t n_;
    fft::Real2dPlan plan_;
    std::vector<double> decay_u_, decay_v_;
    std::vector<fft::cplx> spec_;
};

/// One step on fresh state (allocates a stepper; use FhnStepper in loops).
void fhn_step(std::vector<double>& u, std::vector<double>& v, const FhnConfig& cfg);

/// Snapshot count produced per case.
inline std::size_t fhn_snapshot_count(const FhnConfig& c) { return 1 + c.n_steps / c.save_every; }

struct GenerateOptions {
    double train_frac = 0.85;
    std::uint64_t split_seed = 0;
    bool normalize = true;
};

dataio::FieldDataset generate_fhn(const FhnConfig& cfg, std::size_t n_cases, const GenerateOptions& opt = {});

struct AdvectionConfig {
    std::size_t grid_n = 32;
    std::size_t n_t = 256;
    double speed_x = 1.0 / 64.0;  // domain lengths per snapshot
    double speed_y = 1.0 / 128.0;
    int max_wavenumber = 3;
    std::uint64_t seed = 0;

    void validate() const;
    nlohmann::json to_json() const;
    static AdvectionConfig from_json(const nlohmann::json& j);
};

/// Random smooth periodic fields translated at constant velocity, evaluated
/// analytically (exact at every snapshot).
dataio::FieldDataset generate_advection(const AdvectionConfig& cfg, std::size_t n_cases,
                                        const GenerateOptions& opt = {});

struct LocalizedConfig {
    std::size_t grid_n = 32;
    std::size_t n_t = 24;
    double center_x = 0.4, center_y = 0.4;  // in [-1,1]
    double radius = 0.35;
    double active_amplitude = 1.0;
    double background_amplitude = 0.3;
    int active_wavenumber = 5;
    std::uint64_t seed = 0;

    nlohmann::json to_json() const;
};

/// Static smooth background plus fine-scale, randomly re-phased activity
/// confined to a disc. Used to check that importance concentrates there.
dataio::FieldDataset generate_localized(const LocalizedConfig& cfg, std::size_t n_cases,
                                        const GenerateOptions& opt = {});

/// Mask of grid points inside the active disc of a localized dataset.
std::vector<bool> localized_active_mask(const dataio::FieldDataset& ds, const LocalizedConfig& cfg);

}  // namespace glu::sim
