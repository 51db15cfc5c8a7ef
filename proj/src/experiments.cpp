#include "grae/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <numbers>
#include <ostream>
#include <thread>

#include "grae/objectives.hpp"
#include "grae/symmetry.hpp"

namespace grae {

namespace {

void put(std::ostream& out, double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    out.write(buf, res.ptr - buf);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
    std::uint64_t z = master + 0x9e3779b97f4a7c15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

TrainConfig sweep_train_config(const SweepConfig& config, std::size_t n_schedule, std::uint64_t seed) {
    TrainConfig t;
    t.objective = config.amortized ? TrainObjective::beta_vae : TrainObjective::unamortized_vi;
    t.beta = config.beta;
    t.iterations = 5 * n_schedule;
    t.schedule_period = n_schedule;
    t.optimizer = OptimizerKind::gd;
    t.batch_size = 0;
    t.seed = seed;
    t.structure = config.structure;
    t.rotation_randomization = true;
    t.latent_dim = config.data.latent_dim;
    t.decoder_output = config.data.nu;
    t.log_every = std::max<std::size_t>(1, n_schedule);
    return t;
}

SweepRow run_uniqueness_trial(const SweepConfig& config, std::size_t trial, std::size_t n_schedule) {
    SweepRow row;
    row.trial = trial;
    row.n_schedule = n_schedule;
    try {
        const Dataset data = gen_synthetic(config.data, derive_seed(config.seed, 3 * trial));
        const TrainConfig tc = sweep_train_config(config, n_schedule, derive_seed(config.seed, 3 * trial + 1));
        Rng rng(tc.seed);
        const TrainResult result = train(tc, data, rng);
        Rng eval_rng(derive_seed(config.seed, 3 * trial + 2));
        row.elbo = dataset_objective(result.model, data.x, config.beta, config.elbo_samples, eval_rng);
        const Matrix means = result.model.posterior_means(data.x);
        const AlignmentResult al = procrustes_align(data.z_true->transpose(), means.transpose());
        row.angle = al.angle;
        row.residual = al.residual;
        if (!std::isfinite(row.elbo)) throw Error(ErrorCode::NonFiniteObjective, "non-finite ELBO");
    } catch (const std::exception& e) {
        row.ok = false;
        row.error = e.what();
        row.elbo = row.angle = row.residual = std::nan("");
    }
    return row;
}

std::vector<SweepRow> run_uniqueness_sweep(const SweepConfig& config, std::size_t threads) {
    std::vector<std::size_t> schedule;
    for (std::size_t n : config.schedule_n) schedule.insert(schedule.end(), config.trials_per_n, n);
    std::vector<SweepRow> rows(schedule.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < schedule.size(); i = next++) rows[i] = run_uniqueness_trial(config, i, schedule[i]);
    };
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = std::min(threads, std::max<std::size_t>(1, schedule.size()));
    std::vector<std::thread> pool;
    for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();
    return rows;
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
    out << "trial,n_schedule,elbo,angle,residual\n";
    for (const auto& r : rows) {
        out << r.trial << ',' << r.n_schedule << ',';
        if (r.ok) {
            put(out, r.elbo);
            out << ',';
            put(out, r.angle);
            out << ',';
            put(out, r.residual);
        } else {
            out << "nan,nan,nan";
        }
        out << '\n';
    }
}

double quantile(std::vector<double> values, double q) {
    if (values.empty()) throw Error(ErrorCode::EmptySelection, "quantile of an empty set");
    std::sort(values.begin(), values.end());
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

SweepSummary summarize_top_decile(const std::vector<SweepRow>& rows) {
    std::vector<const SweepRow*> ok;
    for (const auto& r : rows)
        if (r.ok) ok.push_back(&r);
    if (ok.empty()) throw Error(ErrorCode::EmptySelection, "no successful trials");
    std::sort(ok.begin(), ok.end(), [](const SweepRow* a, const SweepRow* b) { return a->elbo > b->elbo; });
    const std::size_t top = std::max<std::size_t>(1, (ok.size() + 9) / 10);
    std::vector<double> angles, abs_angles;
    for (std::size_t i = 0; i < top; ++i) {
        angles.push_back(ok[i]->angle);
        abs_angles.push_back(std::abs(ok[i]->angle));
    }
    SweepSummary s;
    s.top_count = top;
    s.median_abs_angle = quantile(abs_angles, 0.5);
    s.angle_iqr = quantile(angles, 0.75) - quantile(angles, 0.25);
    return s;
}

ObjectiveRow evaluate_objectives(const VaeModel& model, const Matrix& test, double beta, std::size_t mc_samples,
                                 std::uint64_t seed) {
    if (test.rows() == 0) throw Error(ErrorCode::EmptySelection, "empty test split");
    if (model.obs.kind != ObservationKind::gaussian_unit) {
        throw Error(ErrorCode::ConfigError, "objective comparison needs gaussian_unit observations");
    }
    const double offset = 0.5 * static_cast<double>(test.cols()) * std::log(2.0 * std::numbers::pi);
    Rng rng(seed);
    ObjectiveRow row;
    row.beta = beta;
    for (std::size_t i = 0; i < test.rows(); ++i) {
        const auto x = test.row(i);
        const GaussianPosterior post = model.posterior(x, i);
        const Matrix sigma = post.covariance();
        const double mc = beta_vae_mc(post, model.decoder, model.obs, x, beta, mc_samples, rng);
        const double taylor = taylor_objective(post.mean, sigma, model.decoder, model.obs, x, beta);
        row.beta_vae_mc += mc;
        row.taylor += taylor;
        row.grae += -grae(post.mean, model.decoder, x, beta) - offset;
        row.gap += taylor_gap(input_jacobian(model.decoder, post.mean), sigma, beta);
        row.mean_abs_mc_taylor += std::abs(mc - taylor);
    }
    const double n = static_cast<double>(test.rows());
    row.beta_vae_mc /= n;
    row.taylor /= n;
    row.grae /= n;
    row.gap /= n;
    row.mean_abs_mc_taylor /= n;
    return row;
}

void write_objectives_csv(std::ostream& out, const std::vector<ObjectiveRow>& rows) {
    out << "checkpoint,beta,beta_vae_mc,taylor,grae,gap\n";
    for (const auto& r : rows) {
        out << r.checkpoint << ',';
        put(out, r.beta);
        out << ',';
        put(out, r.beta_vae_mc);
        out << ',';
        put(out, r.taylor);
        out << ',';
        put(out, r.grae);
        out << ',';
        put(out, r.gap);
        out << '\n';
    }
}

std::vector<StructureRow> jacobian_structure(const VaeModel& model, const Matrix& test, double beta,
                                             std::size_t block) {
    if (test.rows() == 0) throw Error(ErrorCode::EmptySelection, "no test points");
    std::vector<StructureRow> rows;
    for (std::size_t i = 0; i < test.rows(); ++i) {
        const GaussianPosterior post = model.posterior(test.row(i), i);
        const Matrix jac = input_jacobian(model.decoder, post.mean);
        const Matrix sigma = post.covariance();
        StructureRow r;
        r.point = i;
        r.sigma_inv = invert_pd(sigma);
        r.jtj = symmetrize(matmul_tn(jac, jac));
        r.off_block_mass = off_block_mass(r.jtj, block);
        r.metric_residual = metric_residual(jac, sigma, beta);
        rows.push_back(std::move(r));
    }
    return rows;
}

double mean_metric_residual(const VaeModel& model, const Matrix& test, double beta) {
    double s = 0.0;
    for (std::size_t i = 0; i < test.rows(); ++i) {
        const GaussianPosterior post = model.posterior(test.row(i), i);
        s += metric_residual(input_jacobian(model.decoder, post.mean), post.covariance(), beta);
    }
    return s / static_cast<double>(test.rows());
}

void write_structure_csv(std::ostream& out, const std::vector<StructureRow>& rows) {
    out << "point,off_block_mass,metric_residual\n";
    for (const auto& r : rows) {
        out << r.point << ',';
        put(out, r.off_block_mass);
        out << ',';
        put(out, r.metric_residual);
        out << '\n';
    }
}

ImageSplit load_image_split(const std::filesystem::path& idx_images, std::size_t side, std::size_t m,
                            std::size_t test_size, std::uint64_t seed) {
    const IdxArray images = load_idx(idx_images);
    ImageSplit split;
    split.train = preprocess(images, side, m, seed, 0);
    split.test = preprocess(images, side, test_size, seed, m);
    return split;
}

}  // namespace grae
