#pragma once

// Optimizers, learning-rate schedule, training loops and checkpoints.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "grae/datasets.hpp"
#include "grae/error.hpp"
#include "grae/network.hpp"
#include "grae/numerics.hpp"
#include "grae/probmodel.hpp"

namespace grae {

struct LrSchedule {
    double initial = 0.1;
    double decay = 10.0;
    std::size_t period = 1000;
    double floor = 1e-5;
};

/// initial * decay^-floor(iter / period), never below floor.
double schedule_lr(const LrSchedule& s, std::size_t iter);

enum class OptimizerKind { gd, adam };
std::string_view to_string(OptimizerKind kind);
OptimizerKind parse_optimizer(std::string_view name);

struct OptimizerState {
    OptimizerKind kind = OptimizerKind::adam;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::size_t step = 0;
    Vector m;
    Vector v;
};

/// In-place GD or bias-corrected Adam update. Throws NonFiniteGradient and
/// leaves both state and params untouched when a gradient entry is not finite.
void optimizer_step(OptimizerState& state, std::span<double> params, std::span<const double> grads, double lr);

enum class TrainObjective { beta_vae, grae_approx, unamortized_vi };
std::string_view to_string(TrainObjective objective);
TrainObjective parse_objective(std::string_view name);

struct TrainConfig {
    TrainObjective objective = TrainObjective::beta_vae;
    double beta = 1.0;
    std::size_t iterations = 1000;
    std::size_t batch_size = 0;  ///< 0 = full batch
    std::uint64_t seed = 0;
    CovarianceStructure structure = CovarianceStructure::diagonal();
    bool amortized_covariance = false;  ///< encoder emits the factor; otherwise one shared factor
    bool rotation_randomization = false;
    OptimizerKind optimizer = OptimizerKind::adam;
    double lr = 1e-3;
    std::size_t schedule_period = 0;  ///< > 0 selects LrSchedule with this period
    std::size_t latent_dim = 2;
    std::vector<std::size_t> encoder_hidden;
    std::vector<std::size_t> decoder_hidden;
    ActivationKind hidden_activation = ActivationKind::elu;
    ActivationKind decoder_output = ActivationKind::identity;
    std::size_t k = 1;
    ObservationKind obs = ObservationKind::gaussian_unit;
    std::size_t log_every = 1;
    std::size_t checkpoint_every = 0;  ///< 0 = initial and final only
    double local_init_std = 0.1;  ///< scale of the random initial local means and covariance factors

    void validate() const;
    double lr_at(std::size_t iter) const;
};

/// Encoder, decoder and posterior parameters. The posterior mean is
/// O1 * m(x) and the covariance O2 L L^T O2^T with L from the raw factor.
struct VaeModel {
    MlpNetwork encoder;  ///< amortized modes only
    MlpNetwork decoder;
    CovarianceStructure structure;
    ObservationModel obs;
    std::size_t latent_dim = 0;
    bool amortized = true;
    bool amortized_covariance = false;
    Vector posterior_raw;  ///< shared factor when the covariance is not amortized
    Matrix local_means;    ///< unamortized: one row per training example
    Matrix local_raw;
    Matrix mean_rotation;
    Matrix cov_rotation;

    std::size_t parameter_count() const;
    Vector pack() const;
    void unpack(std::span<const double> params);

    /// q(z | x) for row `index` of the training data (index is used only by
    /// unamortized models).
    GaussianPosterior posterior(std::span<const double> x, std::size_t index = 0) const;
    Matrix posterior_means(const Matrix& x) const;

    bool operator==(const VaeModel&) const = default;
};

VaeModel init_model(const TrainConfig& config, std::size_t data_dim, std::size_t n, Rng& rng);

struct TraceEntry {
    std::size_t iter = 0;
    double objective = 0.0;
    double lr = 0.0;
};

struct TrainingTrace {
    std::vector<TraceEntry> entries;
    void write_csv(std::ostream& out) const;
};

/// Minimization loss of one step and its gradient in VaeModel::pack order.
struct LossAndGrad {
    double loss = 0.0;
    Vector grad;
};

/// `rows` indexes the training data; `rng` supplies the reparameterization
/// noise and sampled Jacobian columns.
LossAndGrad loss_and_grad(const VaeModel& model, const TrainConfig& config, const Matrix& data,
                          std::span<const std::size_t> rows, Rng& rng);

/// Called with the iteration count reached: 0 first, then every
/// checkpoint_every, and once at the end.
using TrainCallback = std::function<void(std::size_t iteration, const VaeModel& model, const Rng& rng)>;

struct TrainResult {
    VaeModel model;
    TrainingTrace trace;
};

class TrainingAborted : public Error {
public:
    TrainingAborted(ErrorCode code, const std::string& what, VaeModel last_good, TrainingTrace trace,
                    std::size_t iteration);
    const VaeModel& last_good() const noexcept { return last_good_; }
    const TrainingTrace& trace() const noexcept { return trace_; }
    std::size_t iteration() const noexcept { return iteration_; }

private:
    VaeModel last_good_;
    TrainingTrace trace_;
    std::size_t iteration_;
};

TrainResult train(const TrainConfig& config, const Dataset& dataset, Rng& rng, const TrainCallback& callback = {});

/// Mean over rows of the Monte-Carlo beta-VAE objective (maximization convention).
double dataset_objective(const VaeModel& model, const Matrix& data, double beta, std::size_t samples, Rng& rng);

inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
    int version = kCheckpointVersion;
    TrainConfig config;
    VaeModel model;
    std::string rng_state;
    std::size_t iteration = 0;
};

std::string rng_state_string(const Rng& rng);
Rng rng_from_state(const std::string& state);

std::string serialize_checkpoint(const Checkpoint& c);
Checkpoint parse_checkpoint(std::string_view text);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace grae
