#pragma once

// Experiment pipelines shared by the command-line tool and the acceptance suite.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "grae/datasets.hpp"
#include "grae/probmodel.hpp"
#include "grae/trainer.hpp"

namespace grae {

/// Independent stream seed for (master, index).
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index);

struct SweepConfig {
    SyntheticSpec data;
    double beta = 0.05;
    bool amortized = true;
    CovarianceStructure structure = CovarianceStructure::diagonal();
    std::vector<std::size_t> schedule_n{100, 200, 500, 1000};
    std::size_t trials_per_n = 10;
    std::uint64_t seed = 0;
    std::size_t elbo_samples = 4;
};

struct SweepRow {
    std::size_t trial = 0;
    std::size_t n_schedule = 0;
    double elbo = 0.0;
    double angle = 0.0;
    double residual = 0.0;
    bool ok = true;
    std::string error;
};

TrainConfig sweep_train_config(const SweepConfig& config, std::size_t n_schedule, std::uint64_t seed);
SweepRow run_uniqueness_trial(const SweepConfig& config, std::size_t trial, std::size_t n_schedule);
/// Trials are numbered consecutively over schedule_n x trials_per_n and run
/// on `threads` workers (0 = hardware concurrency). Rows come back in trial order.
std::vector<SweepRow> run_uniqueness_sweep(const SweepConfig& config, std::size_t threads = 0);
void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows);

struct SweepSummary {
    std::size_t top_count = 0;
    double median_abs_angle = 0.0;
    double angle_iqr = 0.0;
};

/// Statistics over the successful rows whose ELBO lies in the top decile
/// (at least one row).
SweepSummary summarize_top_decile(const std::vector<SweepRow>& rows);

/// Linear-interpolated quantile of unsorted values.
double quantile(std::vector<double> values, double q);

struct ObjectiveRow {
    std::string checkpoint;
    double beta = 0.0;
    double beta_vae_mc = 0.0;
    double taylor = 0.0;
    double grae = 0.0;  ///< -grae - D/2 log 2pi
    double gap = 0.0;
    double mean_abs_mc_taylor = 0.0;
};

/// Dataset averages over the rows of `test` (gaussian_unit observations).
ObjectiveRow evaluate_objectives(const VaeModel& model, const Matrix& test, double beta, std::size_t mc_samples,
                                 std::uint64_t seed);
void write_objectives_csv(std::ostream& out, const std::vector<ObjectiveRow>& rows);

struct StructureRow {
    std::size_t point = 0;
    double off_block_mass = 0.0;
    double metric_residual = 0.0;
    Matrix sigma_inv;
    Matrix jtj;
};

std::vector<StructureRow> jacobian_structure(const VaeModel& model, const Matrix& test, double beta,
                                             std::size_t block);
double mean_metric_residual(const VaeModel& model, const Matrix& test, double beta);
void write_structure_csv(std::ostream& out, const std::vector<StructureRow>& rows);

struct ImageSplit {
    Dataset train;
    Dataset test;
};

/// First m shuffled images for training, the next test_size held out.
ImageSplit load_image_split(const std::filesystem::path& idx_images, std::size_t side, std::size_t m,
                            std::size_t test_size, std::uint64_t seed);

}  // namespace grae
