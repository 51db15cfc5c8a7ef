#include "grae/trainer.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <numeric>
#include <sstream>

#include "grae/objectives.hpp"

namespace grae {

using nlohmann::json;

double schedule_lr(const LrSchedule& s, std::size_t iter) {
    if (s.period == 0) throw Error(ErrorCode::ConfigError, "schedule period must be positive");
    const double steps = static_cast<double>(iter / s.period);
    return std::max(s.initial * std::pow(s.decay, -steps), s.floor);
}

std::string_view to_string(OptimizerKind kind) { return kind == OptimizerKind::gd ? "gd" : "adam"; }

OptimizerKind parse_optimizer(std::string_view name) {
    if (name == "gd") return OptimizerKind::gd;
    if (name == "adam") return OptimizerKind::adam;
    throw Error(ErrorCode::ConfigError, "unknown optimizer '" + std::string(name) + "'");
}

void optimizer_step(OptimizerState& state, std::span<double> params, std::span<const double> grads, double lr) {
    if (params.size() != grads.size()) throw Error(ErrorCode::LengthMismatch, "optimizer_step");
    if (!all_finite(grads)) throw Error(ErrorCode::NonFiniteGradient, "non-finite gradient entry");
    if (state.kind == OptimizerKind::gd) {
        for (std::size_t i = 0; i < params.size(); ++i) params[i] -= lr * grads[i];
        ++state.step;
        return;
    }
    if (state.m.size() != params.size()) {
        state.m.assign(params.size(), 0.0);
        state.v.assign(params.size(), 0.0);
        state.step = 0;
    }
    ++state.step;
    const double t = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(state.beta1, t);
    const double c2 = 1.0 - std::pow(state.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * grads[i];
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * grads[i] * grads[i];
        params[i] -= lr * (state.m[i] / c1) / (std::sqrt(state.v[i] / c2) + state.eps);
    }
}

std::string_view to_string(TrainObjective objective) {
    switch (objective) {
        case TrainObjective::beta_vae: return "beta_vae";
        case TrainObjective::grae_approx: return "grae_approx";
        case TrainObjective::unamortized_vi: return "unamortized_vi";
    }
    return "beta_vae";
}

TrainObjective parse_objective(std::string_view name) {
    if (name == "beta_vae") return TrainObjective::beta_vae;
    if (name == "grae_approx") return TrainObjective::grae_approx;
    if (name == "unamortized_vi") return TrainObjective::unamortized_vi;
    throw Error(ErrorCode::ConfigError, "unknown objective '" + std::string(name) + "'");
}

void TrainConfig::validate() const {
    if (!(beta > 0.0) || !std::isfinite(beta)) throw Error(ErrorCode::ConfigError, "beta must be positive");
    if (latent_dim == 0) throw Error(ErrorCode::ConfigError, "latent_dim must be positive");
    if (k == 0) throw Error(ErrorCode::ConfigError, "k must be positive");
    if (log_every == 0) throw Error(ErrorCode::ConfigError, "log_every must be positive");
    if (!(lr > 0.0)) throw Error(ErrorCode::ConfigError, "lr must be positive");
    if (objective == TrainObjective::grae_approx && obs != ObservationKind::gaussian_unit) {
        throw Error(ErrorCode::ConfigError, "grae_approx training requires gaussian_unit observations");
    }
    if (objective == TrainObjective::unamortized_vi && amortized_covariance) {
        throw Error(ErrorCode::ConfigError, "unamortized_vi keeps per-example factors");
    }
    structure.raw_size(latent_dim);
}

double TrainConfig::lr_at(std::size_t iter) const {
    if (schedule_period == 0) return lr;
    LrSchedule s;
    s.period = schedule_period;
    return schedule_lr(s, iter);
}

std::size_t VaeModel::parameter_count() const {
    return encoder.parameter_count() + decoder.parameter_count() + posterior_raw.size() + local_means.data().size() +
           local_raw.data().size();
}

Vector VaeModel::pack() const {
    Vector out = encoder.flatten();
    const Vector dec = decoder.flatten();
    out.insert(out.end(), dec.begin(), dec.end());
    out.insert(out.end(), posterior_raw.begin(), posterior_raw.end());
    out.insert(out.end(), local_means.data().begin(), local_means.data().end());
    out.insert(out.end(), local_raw.data().begin(), local_raw.data().end());
    return out;
}

void VaeModel::unpack(std::span<const double> params) {
    if (params.size() != parameter_count()) throw Error(ErrorCode::LengthMismatch, "VaeModel::unpack");
    std::size_t pos = 0;
    auto take = [&](std::size_t n) {
        auto s = params.subspan(pos, n);
        pos += n;
        return s;
    };
    encoder.assign(take(encoder.parameter_count()));
    decoder.assign(take(decoder.parameter_count()));
    auto raw = take(posterior_raw.size());
    std::copy(raw.begin(), raw.end(), posterior_raw.begin());
    auto lm = take(local_means.data().size());
    std::copy(lm.begin(), lm.end(), local_means.data().begin());
    auto lr = take(local_raw.data().size());
    std::copy(lr.begin(), lr.end(), local_raw.data().begin());
}

namespace {

bool is_identity(const Matrix& m) { return m == Matrix::identity(m.rows()); }

struct PosteriorParams {
    Vector m;
    Vector raw;
};

PosteriorParams posterior_params(const VaeModel& model, std::span<const double> encoder_out, std::size_t index) {
    const std::size_t d = model.latent_dim;
    PosteriorParams p;
    if (model.amortized) {
        p.m.assign(encoder_out.begin(), encoder_out.begin() + static_cast<std::ptrdiff_t>(d));
        if (model.amortized_covariance) {
            p.raw.assign(encoder_out.begin() + static_cast<std::ptrdiff_t>(d), encoder_out.end());
        } else {
            p.raw = model.posterior_raw;
        }
    } else {
        if (index >= model.local_means.rows()) throw Error(ErrorCode::DimensionMismatch, "example index");
        p.m.assign(model.local_means.row(index).begin(), model.local_means.row(index).end());
        p.raw.assign(model.local_raw.row(index).begin(), model.local_raw.row(index).end());
    }
    return p;
}

}  // namespace

GaussianPosterior VaeModel::posterior(std::span<const double> x, std::size_t index) const {
    Vector enc_out;
    if (amortized) enc_out = forward(encoder, x).first;
    const PosteriorParams p = posterior_params(*this, enc_out, index);
    GaussianPosterior post;
    post.mean = matvec(mean_rotation, p.m);
    post.factor = assemble_covariance(p.raw, structure, latent_dim);
    if (!is_identity(cov_rotation)) {
        const Matrix c = matmul(cov_rotation, post.factor.lower);
        post.factor = cholesky(symmetrize(matmul_nt(c, c)));
    }
    return post;
}

Matrix VaeModel::posterior_means(const Matrix& x) const {
    Matrix m(x.rows(), latent_dim);
    if (amortized) {
        const Matrix out = forward_batch(encoder, x).output;
        for (std::size_t r = 0; r < x.rows(); ++r)
            for (std::size_t c = 0; c < latent_dim; ++c) m(r, c) = out(r, c);
    } else {
        if (x.rows() != local_means.rows()) throw Error(ErrorCode::DimensionMismatch, "posterior_means");
        m = local_means;
    }
    return matmul_nt(m, mean_rotation);
}

VaeModel init_model(const TrainConfig& config, std::size_t data_dim, std::size_t n, Rng& rng) {
    config.validate();
    const std::size_t d = config.latent_dim;
    const std::size_t r = config.structure.raw_size(d);
    VaeModel model;
    model.latent_dim = d;
    model.structure = config.structure;
    model.obs.kind = config.obs;
    model.amortized = config.objective != TrainObjective::unamortized_vi;
    model.amortized_covariance = model.amortized && config.amortized_covariance;
    if (model.amortized) {
        std::vector<std::size_t> dims{data_dim};
        dims.insert(dims.end(), config.encoder_hidden.begin(), config.encoder_hidden.end());
        dims.push_back(d + (model.amortized_covariance ? r : 0));
        model.encoder = MlpNetwork::random(dims, config.hidden_activation, ActivationKind::identity, rng);
    }
    std::vector<std::size_t> dims{d};
    dims.insert(dims.end(), config.decoder_hidden.begin(), config.decoder_hidden.end());
    dims.push_back(data_dim);
    model.decoder = MlpNetwork::random(dims, config.hidden_activation, config.decoder_output, rng);
    if (model.amortized) {
        if (!model.amortized_covariance) {
            model.posterior_raw = standard_normal(rng, r);
            for (double& v : model.posterior_raw) v *= config.local_init_std;
        }
    } else {
        model.local_means = Matrix(n, d);
        fill_standard_normal(rng, model.local_means.data());
        model.local_means *= config.local_init_std;
        model.local_raw = Matrix(n, r);
        fill_standard_normal(rng, model.local_raw.data());
        model.local_raw *= config.local_init_std;
    }
    model.mean_rotation = Matrix::identity(d);
    model.cov_rotation = Matrix::identity(d);
    if (config.rotation_randomization) {
        model.mean_rotation = random_orthogonal(d, rng);
        if (config.structure.kind == CovarianceKind::full) model.cov_rotation = random_orthogonal(d, rng);
    }
    return model;
}

void TrainingTrace::write_csv(std::ostream& out) const {
    out << "iter,objective,lr\n";
    char buf[64];
    for (const auto& e : entries) {
        out << e.iter << ',';
        auto res = std::to_chars(buf, buf + sizeof buf, e.objective);
        out.write(buf, res.ptr - buf);
        out << ',';
        res = std::to_chars(buf, buf + sizeof buf, e.lr);
        out.write(buf, res.ptr - buf);
        out << '\n';
    }
}

namespace {

struct GradLayout {
    std::size_t encoder = 0, decoder = 0, raw = 0, local_means = 0, local_raw = 0, total = 0;
};

GradLayout layout_of(const VaeModel& m) {
    GradLayout g;
    g.encoder = 0;
    g.decoder = m.encoder.parameter_count();
    g.raw = g.decoder + m.decoder.parameter_count();
    g.local_means = g.raw + m.posterior_raw.size();
    g.local_raw = g.local_means + m.local_means.data().size();
    g.total = g.local_raw + m.local_raw.data().size();
    return g;
}

void write_at(Vector& dst, std::size_t offset, std::span<const double> src) {
    std::copy(src.begin(), src.end(), dst.begin() + static_cast<std::ptrdiff_t>(offset));
}

Matrix gather_rows(const Matrix& data, std::span<const std::size_t> rows) {
    Matrix out(rows.size(), data.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        auto src = data.row(rows[i]);
        std::copy(src.begin(), src.end(), out.row(i).begin());
    }
    return out;
}

// Factor entries of one posterior, assembled in place from a raw span.
struct FactorBuffer {
    const std::vector<std::pair<std::size_t, std::size_t>>* pos = nullptr;
    Matrix l;
    double log_diag = 0.0;

    void assemble(std::span<const double> raw) {
        log_diag = 0.0;
        for (std::size_t k = 0; k < pos->size(); ++k) {
            const auto [i, j] = (*pos)[k];
            if (i == j) {
                l(i, j) = std::max(std::exp(raw[k]), kFactorDiagonalFloor);
                log_diag += std::log(l(i, j));
            } else {
                l(i, j) = raw[k];
            }
        }
    }

    // Accumulates dLoss/dRaw given dLoss/dL restricted to the structure.
    void backward(std::span<const double> raw, const Matrix& lbar, std::span<double> out, double scale) const {
        for (std::size_t k = 0; k < pos->size(); ++k) {
            const auto [i, j] = (*pos)[k];
            if (i == j) {
                const double e = std::exp(raw[k]);
                if (e > kFactorDiagonalFloor) out[k] += scale * lbar(i, j) * e;
            } else {
                out[k] += scale * lbar(i, j);
            }
        }
    }
};

LossAndGrad beta_vae_step(const VaeModel& model, const TrainConfig& config, const Matrix& xb,
                          std::span<const std::size_t> rows, Rng& rng) {
    const std::size_t b = xb.rows();
    const std::size_t d = model.latent_dim;
    const double inv_b = 1.0 / static_cast<double>(b);
    const double beta = config.beta;
    const GradLayout lay = layout_of(model);
    const auto positions = factor_positions(model.structure, d);
    const std::size_t nraw = positions.size();
    const bool shared = model.amortized && !model.amortized_covariance;
    const Matrix& o1 = model.mean_rotation;
    const Matrix& o2 = model.cov_rotation;
    LossAndGrad out;
    out.grad.assign(lay.total, 0.0);

    ForwardTrace enc_trace;
    if (model.amortized) enc_trace = forward_batch(model.encoder, xb);
    auto m_of = [&](std::size_t i) -> std::span<const double> {
        if (model.amortized) return enc_trace.output.row(i).first(d);
        return model.local_means.row(rows[i]);
    };
    auto raw_of = [&](std::size_t i) -> std::span<const double> {
        if (shared) return model.posterior_raw;
        if (model.amortized) return enc_trace.output.row(i).subspan(d);
        return model.local_raw.row(rows[i]);
    };

    FactorBuffer fb{&positions, Matrix(d, d), 0.0};
    if (shared) fb.assemble(model.posterior_raw);

    Matrix mu(b, d), eps(b, d), z(b, d);
    fill_standard_normal(rng, eps.data());
    Vector tmp(d);
    for (std::size_t i = 0; i < b; ++i) {
        const auto m = m_of(i);
        if (!shared) fb.assemble(raw_of(i));
        for (std::size_t r = 0; r < d; ++r) {
            double a = 0.0, c = 0.0;
            for (std::size_t k = 0; k < d; ++k) a += o1(r, k) * m[k];
            for (std::size_t k = 0; k <= r; ++k) c += fb.l(r, k) * eps(i, k);
            mu(i, r) = a;
            tmp[r] = c;
        }
        for (std::size_t r = 0; r < d; ++r) {
            double c = 0.0;
            for (std::size_t k = 0; k < d; ++k) c += o2(r, k) * tmp[k];
            z(i, r) = mu(i, r) + c;
        }
    }

    const ForwardTrace dec_trace = forward_batch(model.decoder, z);
    Matrix upstream(b, xb.cols());
    double loss = 0.0;
    for (std::size_t i = 0; i < b; ++i) {
        const auto g = dec_trace.output.row(i);
        const auto x = xb.row(i);
        loss += -obs_loglik(model.obs, x, g) + 0.5 * beta * squared_norm(mu.row(i));
        const Vector og = obs_grad(model.obs, x, g);
        for (std::size_t j = 0; j < og.size(); ++j) upstream(i, j) = -og[j] * inv_b;
    }

    Matrix gz;
    const ParamGradients dec_grads = backward_batch(model.decoder, dec_trace, upstream, &gz);
    write_at(out.grad, lay.decoder, dec_grads.flatten());

    const std::size_t enc_cols = model.amortized ? model.encoder.out_dim() : 0;
    Matrix enc_up(b, enc_cols);
    Matrix lbar(d, d);
    Vector shared_raw_grad(shared ? nraw : 0, 0.0);
    const double local_scale = static_cast<double>(b);
    // Covariance part of beta * KL: 1/2 ||L||_F^2 - sum log L_ii.
    auto kl_factor = [&]() { return 0.5 * (squared_norm(fb.l.data()) - static_cast<double>(d)) - fb.log_diag; };
    if (shared) {
        loss += static_cast<double>(b) * beta * kl_factor();
        lbar = Matrix(d, d);
    }
    for (std::size_t i = 0; i < b; ++i) {
        if (!shared) {
            fb.assemble(raw_of(i));
            loss += beta * kl_factor();
            lbar = Matrix(d, d);
        }
        Vector mbar(d, 0.0);
        for (std::size_t r = 0; r < d; ++r) {
            double rg = 0.0;
            for (std::size_t k = 0; k < d; ++k) rg += o2(k, r) * gz(i, k);
            tmp[r] = rg;
        }
        for (std::size_t r = 0; r < d; ++r)
            for (std::size_t c = 0; c <= r; ++c) lbar(r, c) += tmp[r] * eps(i, c);
        for (std::size_t k = 0; k < d; ++k) {
            const double mub = gz(i, k) + beta * inv_b * mu(i, k);
            for (std::size_t r = 0; r < d; ++r) mbar[r] += o1(k, r) * mub;
        }
        if (!shared) {
            for (std::size_t r = 0; r < d; ++r) {
                for (std::size_t c = 0; c <= r; ++c) {
                    lbar(r, c) += beta * inv_b * (fb.l(r, c) - (r == c ? 1.0 / fb.l(r, r) : 0.0));
                }
            }
        }
        if (model.amortized) {
            std::copy(mbar.begin(), mbar.end(), enc_up.row(i).begin());
            if (model.amortized_covariance) fb.backward(raw_of(i), lbar, enc_up.row(i).subspan(d), 1.0);
        } else {
            const std::size_t idx = rows[i];
            for (std::size_t c = 0; c < d; ++c) out.grad[lay.local_means + idx * d + c] += local_scale * mbar[c];
            fb.backward(raw_of(i), lbar, std::span(out.grad).subspan(lay.local_raw + idx * nraw, nraw), local_scale);
        }
    }
    out.loss = loss * inv_b;
    if (model.amortized) {
        write_at(out.grad, lay.encoder, backward_batch(model.encoder, enc_trace, enc_up).flatten());
        if (shared) {
            for (std::size_t r = 0; r < d; ++r) {
                for (std::size_t c = 0; c <= r; ++c) {
                    lbar(r, c) += beta * (fb.l(r, c) - (r == c ? 1.0 / fb.l(r, r) : 0.0));
                }
            }
            fb.backward(model.posterior_raw, lbar, std::span(out.grad).subspan(lay.raw, nraw), 1.0);
        }
    }
    return out;
}

LossAndGrad grae_step(const VaeModel& model, const TrainConfig& config, const Matrix& xb, Rng& rng) {
    const std::size_t b = xb.rows();
    const std::size_t d = model.latent_dim;
    const std::size_t k = config.k;
    const double inv_b = 1.0 / static_cast<double>(b);
    const double beta = config.beta;
    const double col_weight = static_cast<double>(d) / static_cast<double>(k);
    const GradLayout lay = layout_of(model);
    LossAndGrad out;
    out.grad.assign(lay.total, 0.0);

    const ForwardTrace enc_trace = forward_batch(model.encoder, xb);
    Matrix h(b, d);
    for (std::size_t i = 0; i < b; ++i) {
        const auto row = enc_trace.output.row(i);
        const Vector hv = matvec(model.mean_rotation, row.first(d));
        std::copy(hv.begin(), hv.end(), h.row(i).begin());
    }
    const ForwardTrace dec_trace = forward_batch(model.decoder, h);
    Matrix upstream(b, xb.cols());
    double loss = 0.0;
    for (std::size_t i = 0; i < b; ++i) {
        double r2 = 0.0;
        for (std::size_t j = 0; j < xb.cols(); ++j) {
            const double diff = dec_trace.output(i, j) - xb(i, j);
            r2 += diff * diff;
            upstream(i, j) = diff * inv_b;
        }
        loss += 0.5 * r2 + 0.5 * beta * squared_norm(h.row(i));
    }
    Matrix gh;
    ParamGradients dec_grads = backward_batch(model.decoder, dec_trace, upstream, &gh);

    Matrix hk(b * k, d), tangents(b * k, d);
    std::uniform_int_distribution<std::size_t> pick(0, d - 1);
    for (std::size_t i = 0; i < b; ++i) {
        for (std::size_t j = 0; j < k; ++j) {
            std::copy(h.row(i).begin(), h.row(i).end(), hk.row(i * k + j).begin());
            tangents(i * k + j, pick(rng)) = 1.0;
        }
    }
    const JvpSqnormGrad jg = grad_jvp_sqnorm_batch(model.decoder, hk, tangents, [&](std::size_t, double s) {
        return 0.5 * beta * col_weight * inv_b / (beta + s);
    });
    for (double s : jg.sqnorms) loss += 0.5 * beta * col_weight * std::log1p(s / beta);
    out.loss = loss * inv_b;
    dec_grads += jg.params;
    write_at(out.grad, lay.decoder, dec_grads.flatten());

    Matrix enc_up(b, model.encoder.out_dim());
    for (std::size_t i = 0; i < b; ++i) {
        Vector hbar(d);
        for (std::size_t c = 0; c < d; ++c) {
            hbar[c] = gh(i, c) + beta * inv_b * h(i, c);
            for (std::size_t j = 0; j < k; ++j) hbar[c] += jg.input_grad(i * k + j, c);
        }
        const Vector mbar = matvec_t(model.mean_rotation, hbar);
        std::copy(mbar.begin(), mbar.end(), enc_up.row(i).begin());
    }
    write_at(out.grad, lay.encoder, backward_batch(model.encoder, enc_trace, enc_up).flatten());
    return out;
}

}  // namespace

LossAndGrad loss_and_grad(const VaeModel& model, const TrainConfig& config, const Matrix& data,
                          std::span<const std::size_t> rows, Rng& rng) {
    if (rows.empty()) throw Error(ErrorCode::EmptySelection, "empty batch");
    const Matrix xb = gather_rows(data, rows);
    if (config.objective == TrainObjective::grae_approx) return grae_step(model, config, xb, rng);
    return beta_vae_step(model, config, xb, rows, rng);
}

TrainingAborted::TrainingAborted(ErrorCode code, const std::string& what, VaeModel last_good, TrainingTrace trace,
                                 std::size_t iteration)
    : Error(code, what), last_good_(std::move(last_good)), trace_(std::move(trace)), iteration_(iteration) {}

TrainResult train(const TrainConfig& config, const Dataset& dataset, Rng& rng, const TrainCallback& callback) {
    config.validate();
    const std::size_t n = dataset.size();
    if (n == 0) throw Error(ErrorCode::EmptySelection, "training data is empty");
    TrainResult result;
    result.model = init_model(config, dataset.dim(), n, rng);
    VaeModel& model = result.model;
    OptimizerState opt;
    opt.kind = config.optimizer;
    Vector params = model.pack();
    if (callback) callback(0, model, rng);

    const bool full_batch = config.batch_size == 0 || config.batch_size >= n;
    const std::size_t batch = full_batch ? n : config.batch_size;
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::size_t cursor = n;

    for (std::size_t it = 0; it < config.iterations; ++it) {
        std::span<const std::size_t> rows(order);
        if (!full_batch) {
            if (cursor + batch > n) {
                std::shuffle(order.begin(), order.end(), rng);
                cursor = 0;
            }
            rows = rows.subspan(cursor, batch);
            cursor += batch;
        }
        const LossAndGrad lg = loss_and_grad(model, config, dataset.x, rows, rng);
        if (!std::isfinite(lg.loss)) {
            throw TrainingAborted(ErrorCode::NonFiniteObjective,
                                  "objective became non-finite at iteration " + std::to_string(it), model,
                                  result.trace, it);
        }
        const double lr = config.lr_at(it);
        Vector next = params;
        try {
            optimizer_step(opt, next, lg.grad, lr);
        } catch (const Error& e) {
            throw TrainingAborted(e.code(), e.what(), model, result.trace, it);
        }
        if (!all_finite(next)) {
            throw TrainingAborted(ErrorCode::NonFiniteObjective,
                                  "parameters became non-finite at iteration " + std::to_string(it), model,
                                  result.trace, it);
        }
        params = std::move(next);
        model.unpack(params);
        if (it % config.log_every == 0 || it + 1 == config.iterations) {
            result.trace.entries.push_back({it, lg.loss, lr});
        }
        if (callback && config.checkpoint_every > 0 && (it + 1) % config.checkpoint_every == 0 &&
            it + 1 != config.iterations) {
            callback(it + 1, model, rng);
        }
    }
    if (callback && config.iterations > 0) callback(config.iterations, model, rng);
    return result;
}

double dataset_objective(const VaeModel& model, const Matrix& data, double beta, std::size_t samples, Rng& rng) {
    if (data.rows() == 0) throw Error(ErrorCode::EmptySelection, "dataset_objective on empty data");
    double s = 0.0;
    for (std::size_t i = 0; i < data.rows(); ++i) {
        s += beta_vae_mc_estimate(model.posterior(data.row(i), i), model.decoder, model.obs, data.row(i), beta,
                                  samples, rng)
                 .value;
    }
    return s / static_cast<double>(data.rows());
}

std::string rng_state_string(const Rng& rng) {
    std::ostringstream os;
    os << rng;
    return os.str();
}

Rng rng_from_state(const std::string& state) {
    Rng rng;
    std::istringstream is(state);
    is >> rng;
    if (is.fail()) throw Error(ErrorCode::CorruptDocument, "invalid rng state");
    return rng;
}

namespace {

json matrix_json(const Matrix& m) {
    return json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::vector<double>(m.data().begin(), m.data().end())}};
}

Matrix matrix_from_json(const json& j) {
    const auto rows = j.at("rows").get<std::size_t>();
    const auto cols = j.at("cols").get<std::size_t>();
    const auto data = j.at("data").get<std::vector<double>>();
    if (data.size() != rows * cols) throw Error(ErrorCode::CorruptDocument, "matrix entry count mismatch");
    Matrix m(rows, cols);
    std::copy(data.begin(), data.end(), m.data().begin());
    return m;
}

std::string activation_name(ActivationKind k) { return std::string(to_string(k)); }

json config_json(const TrainConfig& c) {
    return json{{"objective", std::string(to_string(c.objective))},
                {"beta", c.beta},
                {"iterations", c.iterations},
                {"batch_size", c.batch_size},
                {"seed", c.seed},
                {"structure", c.structure.to_string()},
                {"amortized_covariance", c.amortized_covariance},
                {"rotation_randomization", c.rotation_randomization},
                {"optimizer", std::string(to_string(c.optimizer))},
                {"lr", c.lr},
                {"schedule_period", c.schedule_period},
                {"latent_dim", c.latent_dim},
                {"encoder_hidden", c.encoder_hidden},
                {"decoder_hidden", c.decoder_hidden},
                {"hidden_activation", activation_name(c.hidden_activation)},
                {"decoder_output", activation_name(c.decoder_output)},
                {"k", c.k},
                {"obs", std::string(to_string(c.obs))},
                {"log_every", c.log_every},
                {"checkpoint_every", c.checkpoint_every},
                {"local_init_std", c.local_init_std}};
}

TrainConfig config_from_json(const json& j) {
    TrainConfig c;
    c.objective = parse_objective(j.at("objective").get<std::string>());
    c.beta = j.at("beta").get<double>();
    c.iterations = j.at("iterations").get<std::size_t>();
    c.batch_size = j.at("batch_size").get<std::size_t>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.structure = CovarianceStructure::parse(j.at("structure").get<std::string>());
    c.amortized_covariance = j.at("amortized_covariance").get<bool>();
    c.rotation_randomization = j.at("rotation_randomization").get<bool>();
    c.optimizer = parse_optimizer(j.at("optimizer").get<std::string>());
    c.lr = j.at("lr").get<double>();
    c.schedule_period = j.at("schedule_period").get<std::size_t>();
    c.latent_dim = j.at("latent_dim").get<std::size_t>();
    c.encoder_hidden = j.at("encoder_hidden").get<std::vector<std::size_t>>();
    c.decoder_hidden = j.at("decoder_hidden").get<std::vector<std::size_t>>();
    c.hidden_activation = parse_activation(j.at("hidden_activation").get<std::string>());
    c.decoder_output = parse_activation(j.at("decoder_output").get<std::string>());
    c.k = j.at("k").get<std::size_t>();
    c.obs = parse_observation(j.at("obs").get<std::string>());
    c.log_every = j.at("log_every").get<std::size_t>();
    c.checkpoint_every = j.at("checkpoint_every").get<std::size_t>();
    c.local_init_std = j.at("local_init_std").get<double>();
    return c;
}

void append_layers(json& layers, const MlpNetwork& net, const std::string& name) {
    for (const auto& l : net.layers()) {
        layers.push_back(json{{"network", name},
                              {"w", matrix_json(l.weight)},
                              {"b", l.bias},
                              {"activation", activation_name(l.activation)}});
    }
}

MlpNetwork network_from_layers(const json& layers, const std::string& name) {
    std::vector<DenseLayer> out;
    for (const auto& l : layers) {
        if (l.at("network").get<std::string>() != name) continue;
        DenseLayer layer;
        layer.weight = matrix_from_json(l.at("w"));
        layer.bias = l.at("b").get<Vector>();
        layer.activation = parse_activation(l.at("activation").get<std::string>());
        out.push_back(std::move(layer));
    }
    if (out.empty()) return MlpNetwork();
    return MlpNetwork(std::move(out));
}

}  // namespace

std::string serialize_checkpoint(const Checkpoint& c) {
    const VaeModel& m = c.model;
    json layers = json::array();
    append_layers(layers, m.encoder, "encoder");
    append_layers(layers, m.decoder, "decoder");
    json doc{{"version", c.version},
             {"config", config_json(c.config)},
             {"iteration", c.iteration},
             {"layers", layers},
             {"posterior_raw", m.posterior_raw},
             {"rng_state", c.rng_state},
             {"model",
              {{"latent_dim", m.latent_dim},
               {"structure", m.structure.to_string()},
               {"obs", std::string(to_string(m.obs.kind))},
               {"obs_clamp", m.obs.clamp},
               {"amortized", m.amortized},
               {"amortized_covariance", m.amortized_covariance},
               {"local_means", matrix_json(m.local_means)},
               {"local_raw", matrix_json(m.local_raw)},
               {"mean_rotation", matrix_json(m.mean_rotation)},
               {"cov_rotation", matrix_json(m.cov_rotation)}}}};
    return doc.dump(1);
}

Checkpoint parse_checkpoint(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::CorruptDocument, std::string("checkpoint is not valid JSON: ") + e.what());
    }
    try {
        Checkpoint c;
        c.version = doc.at("version").get<int>();
        if (c.version != kCheckpointVersion) {
            throw Error(ErrorCode::VersionMismatch, "checkpoint version " + std::to_string(c.version) +
                                                        ", expected " + std::to_string(kCheckpointVersion));
        }
        c.config = config_from_json(doc.at("config"));
        c.iteration = doc.at("iteration").get<std::size_t>();
        c.rng_state = doc.at("rng_state").get<std::string>();
        const json& mj = doc.at("model");
        VaeModel& m = c.model;
        m.latent_dim = mj.at("latent_dim").get<std::size_t>();
        m.structure = CovarianceStructure::parse(mj.at("structure").get<std::string>());
        m.obs.kind = parse_observation(mj.at("obs").get<std::string>());
        m.obs.clamp = mj.at("obs_clamp").get<double>();
        m.amortized = mj.at("amortized").get<bool>();
        m.amortized_covariance = mj.at("amortized_covariance").get<bool>();
        m.local_means = matrix_from_json(mj.at("local_means"));
        m.local_raw = matrix_from_json(mj.at("local_raw"));
        m.mean_rotation = matrix_from_json(mj.at("mean_rotation"));
        m.cov_rotation = matrix_from_json(mj.at("cov_rotation"));
        m.posterior_raw = doc.at("posterior_raw").get<Vector>();
        m.encoder = network_from_layers(doc.at("layers"), "encoder");
        m.decoder = network_from_layers(doc.at("layers"), "decoder");
        return c;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::CorruptDocument, std::string("checkpoint field error: ") + e.what());
    } catch (const Error& e) {
        if (e.code() == ErrorCode::VersionMismatch) throw;
        throw Error(ErrorCode::CorruptDocument, e.what());
    }
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c) {
    const std::string text = serialize_checkpoint(c);
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorCode::IoError, "cannot write " + tmp.string());
        out << text;
        if (!out) throw Error(ErrorCode::IoError, "write failed for " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw Error(ErrorCode::IoError, "cannot move checkpoint into place: " + ec.message());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_checkpoint(buf.str());
}

}  // namespace grae
