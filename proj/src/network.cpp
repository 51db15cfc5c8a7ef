#include "grae/network.hpp"

#include <cmath>
#include <string>

#include "grae/error.hpp"

namespace grae {

std::string_view to_string(ActivationKind kind) {
    switch (kind) {
        case ActivationKind::identity: return "identity";
        case ActivationKind::tanh: return "tanh";
        case ActivationKind::sigmoid: return "sigmoid";
        case ActivationKind::elu: return "elu";
        case ActivationKind::relu: return "relu";
        case ActivationKind::leaky_relu: return "leaky_relu";
    }
    return "identity";
}

ActivationKind parse_activation(std::string_view name) {
    for (auto k : {ActivationKind::identity, ActivationKind::tanh, ActivationKind::sigmoid, ActivationKind::elu,
                   ActivationKind::relu, ActivationKind::leaky_relu}) {
        if (to_string(k) == name) return k;
    }
    throw Error(ErrorCode::ConfigError, "unknown activation '" + std::string(name) + "'");
}

bool is_kinked(ActivationKind kind) {
    return kind == ActivationKind::relu || kind == ActivationKind::leaky_relu;
}

double activate(ActivationKind kind, double x) {
    switch (kind) {
        case ActivationKind::identity: return x;
        case ActivationKind::tanh: return std::tanh(x);
        case ActivationKind::sigmoid: return 1.0 / (1.0 + std::exp(-x));
        case ActivationKind::elu: return x > 0.0 ? x : std::expm1(x);
        case ActivationKind::relu: return x > 0.0 ? x : 0.0;
        case ActivationKind::leaky_relu: return x > 0.0 ? x : kLeakyReluSlope * x;
    }
    return x;
}

double activate_d1(ActivationKind kind, double x) {
    switch (kind) {
        case ActivationKind::identity: return 1.0;
        case ActivationKind::tanh: {
            const double t = std::tanh(x);
            return 1.0 - t * t;
        }
        case ActivationKind::sigmoid: {
            const double s = 1.0 / (1.0 + std::exp(-x));
            return s * (1.0 - s);
        }
        case ActivationKind::elu: return x > 0.0 ? 1.0 : std::exp(x);
        case ActivationKind::relu: return x > 0.0 ? 1.0 : 0.0;
        case ActivationKind::leaky_relu: return x > 0.0 ? 1.0 : kLeakyReluSlope;
    }
    return 1.0;
}

double activate_d2(ActivationKind kind, double x) {
    switch (kind) {
        case ActivationKind::tanh: {
            const double t = std::tanh(x);
            return -2.0 * t * (1.0 - t * t);
        }
        case ActivationKind::sigmoid: {
            const double s = 1.0 / (1.0 + std::exp(-x));
            return s * (1.0 - s) * (1.0 - 2.0 * s);
        }
        case ActivationKind::elu: return x > 0.0 ? 0.0 : std::exp(x);
        default: return 0.0;
    }
}

MlpNetwork::MlpNetwork(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const auto& layer = layers_[l];
        if (layer.bias.size() != layer.out_dim()) {
            throw Error(ErrorCode::DimensionMismatch, "layer " + std::to_string(l) + ": bias length");
        }
        if (l > 0 && layer.in_dim() != layers_[l - 1].out_dim()) {
            throw Error(ErrorCode::DimensionMismatch, "layer " + std::to_string(l) + ": input does not chain");
        }
        if (!all_finite(layer.weight.data()) || !all_finite(layer.bias)) {
            throw Error(ErrorCode::DomainError, "layer " + std::to_string(l) + ": non-finite parameters");
        }
    }
}

MlpNetwork MlpNetwork::random(std::span<const std::size_t> dims, ActivationKind hidden, ActivationKind output,
                              Rng& rng) {
    if (dims.size() < 2) throw Error(ErrorCode::DimensionMismatch, "MlpNetwork::random needs >= 2 dims");
    std::vector<DenseLayer> layers;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        const std::size_t fan_in = dims[l], fan_out = dims[l + 1];
        const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        std::uniform_real_distribution<double> u(-limit, limit);
        DenseLayer layer{Matrix(fan_out, fan_in), Vector(fan_out, 0.0),
                         l + 2 == dims.size() ? output : hidden};
        for (double& w : layer.weight.data()) w = u(rng);
        layers.push_back(std::move(layer));
    }
    return MlpNetwork(std::move(layers));
}

std::size_t MlpNetwork::in_dim() const { return layers_.empty() ? 0 : layers_.front().in_dim(); }
std::size_t MlpNetwork::out_dim() const { return layers_.empty() ? 0 : layers_.back().out_dim(); }

std::size_t MlpNetwork::parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += l.weight.size() + l.bias.size();
    return n;
}

Vector MlpNetwork::flatten() const {
    Vector out;
    out.reserve(parameter_count());
    for (const auto& l : layers_) {
        out.insert(out.end(), l.weight.data().begin(), l.weight.data().end());
        out.insert(out.end(), l.bias.begin(), l.bias.end());
    }
    return out;
}

void MlpNetwork::assign(std::span<const double> params) {
    if (params.size() != parameter_count()) throw Error(ErrorCode::LengthMismatch, "MlpNetwork::assign");
    std::size_t pos = 0;
    for (auto& l : layers_) {
        auto w = l.weight.data();
        std::copy(params.begin() + pos, params.begin() + pos + w.size(), w.begin());
        pos += w.size();
        std::copy(params.begin() + pos, params.begin() + pos + l.bias.size(), l.bias.begin());
        pos += l.bias.size();
    }
}

ParamGradients ParamGradients::zeros_like(const MlpNetwork& net) {
    ParamGradients g;
    for (const auto& l : net.layers()) {
        g.weight.emplace_back(l.weight.rows(), l.weight.cols());
        g.bias.emplace_back(l.bias.size(), 0.0);
    }
    return g;
}

ParamGradients& ParamGradients::operator+=(const ParamGradients& other) {
    if (other.weight.size() != weight.size()) throw Error(ErrorCode::DimensionMismatch, "ParamGradients::+=");
    for (std::size_t l = 0; l < weight.size(); ++l) {
        weight[l] += other.weight[l];
        axpy(1.0, other.bias[l], bias[l]);
    }
    return *this;
}

ParamGradients& ParamGradients::operator*=(double s) {
    for (std::size_t l = 0; l < weight.size(); ++l) {
        weight[l] *= s;
        for (double& b : bias[l]) b *= s;
    }
    return *this;
}

Vector ParamGradients::flatten() const {
    Vector out;
    for (std::size_t l = 0; l < weight.size(); ++l) {
        out.insert(out.end(), weight[l].data().begin(), weight[l].data().end());
        out.insert(out.end(), bias[l].begin(), bias[l].end());
    }
    return out;
}

namespace {

template <typename F>
Matrix map(const Matrix& m, F f) {
    Matrix out(m.rows(), m.cols());
    auto src = m.data();
    auto dst = out.data();
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] = f(src[i]);
    return out;
}

Matrix activate(ActivationKind kind, const Matrix& m) {
    return map(m, [kind](double x) { return activate(kind, x); });
}

Matrix derivative(ActivationKind kind, const Matrix& m) {
    return map(m, [kind](double x) { return activate_d1(kind, x); });
}

Matrix second_derivative(ActivationKind kind, const Matrix& m) {
    return map(m, [kind](double x) { return activate_d2(kind, x); });
}

void hadamard_inplace(Matrix& a, const Matrix& b) {
    auto x = a.data();
    auto y = b.data();
    for (std::size_t i = 0; i < x.size(); ++i) x[i] *= y[i];
}

Matrix affine(const Matrix& in, const DenseLayer& layer) {
    Matrix pre = matmul_nt(in, layer.weight);
    for (std::size_t r = 0; r < pre.rows(); ++r) axpy(1.0, layer.bias, pre.row(r));
    return pre;
}

Vector column_sums(const Matrix& m) {
    Vector s(m.cols(), 0.0);
    for (std::size_t r = 0; r < m.rows(); ++r) axpy(1.0, m.row(r), s);
    return s;
}

void require_input(const MlpNetwork& net, std::size_t cols, const char* op) {
    if (net.depth() == 0) throw Error(ErrorCode::DimensionMismatch, std::string(op) + ": empty network");
    if (cols != net.in_dim()) {
        throw Error(ErrorCode::DimensionMismatch, std::string(op) + ": input has " + std::to_string(cols) +
                                                      " columns, network expects " + std::to_string(net.in_dim()));
    }
}

Matrix row_matrix(std::span<const double> v) {
    Matrix m(1, v.size());
    std::copy(v.begin(), v.end(), m.data().begin());
    return m;
}

}  // namespace

ForwardTrace forward_batch(const MlpNetwork& net, const Matrix& z) {
    require_input(net, z.cols(), "forward");
    ForwardTrace trace;
    Matrix a = z;
    for (const auto& layer : net.layers()) {
        Matrix pre = affine(a, layer);
        trace.inputs.push_back(std::move(a));
        a = activate(layer.activation, pre);
        trace.pre.push_back(std::move(pre));
    }
    trace.output = std::move(a);
    return trace;
}

ParamGradients backward_batch(const MlpNetwork& net, const ForwardTrace& trace, const Matrix& upstream,
                              Matrix* input_grad) {
    if (trace.pre.size() != net.depth() || upstream.rows() != trace.output.rows() ||
        upstream.cols() != net.out_dim()) {
        throw Error(ErrorCode::DimensionMismatch, "backward: upstream/trace shape");
    }
    ParamGradients g;
    g.weight.resize(net.depth());
    g.bias.resize(net.depth());
    Matrix abar = upstream;
    for (std::size_t l = net.depth(); l-- > 0;) {
        const auto& layer = net.layers()[l];
        Matrix pbar = derivative(layer.activation, trace.pre[l]);
        hadamard_inplace(pbar, abar);
        g.weight[l] = matmul_tn(pbar, trace.inputs[l]);
        g.bias[l] = column_sums(pbar);
        if (l > 0 || input_grad) abar = matmul(pbar, layer.weight);
    }
    if (input_grad) *input_grad = std::move(abar);
    return g;
}

JvpTrace jvp_batch(const MlpNetwork& net, const Matrix& z, const Matrix& tangents) {
    require_input(net, z.cols(), "jvp");
    if (tangents.rows() != z.rows() || tangents.cols() != z.cols()) {
        throw Error(ErrorCode::DimensionMismatch, "jvp: tangent shape");
    }
    JvpTrace trace;
    Matrix a = z;
    Matrix t = tangents;
    for (const auto& layer : net.layers()) {
        Matrix pre = affine(a, layer);
        Matrix u = matmul_nt(t, layer.weight);
        Matrix next_t = derivative(layer.activation, pre);
        hadamard_inplace(next_t, u);
        trace.forward.inputs.push_back(std::move(a));
        trace.tangent_in.push_back(std::move(t));
        a = activate(layer.activation, pre);
        trace.forward.pre.push_back(std::move(pre));
        trace.tangent_pre.push_back(std::move(u));
        t = std::move(next_t);
    }
    trace.forward.output = std::move(a);
    trace.tangent_out = std::move(t);
    return trace;
}

JvpSqnormGrad grad_jvp_sqnorm_batch(const MlpNetwork& net, const Matrix& z, const Matrix& tangents,
                                    const std::function<double(std::size_t, double)>& weight) {
    const JvpTrace tr = jvp_batch(net, z, tangents);
    const std::size_t n = z.rows();
    JvpSqnormGrad out;
    out.sqnorms.resize(n);
    Matrix tbar = tr.tangent_out;
    for (std::size_t r = 0; r < n; ++r) {
        out.sqnorms[r] = squared_norm(tr.tangent_out.row(r));
        const double w = 2.0 * weight(r, out.sqnorms[r]);
        for (double& x : tbar.row(r)) x *= w;
    }
    // Adjoint of the value path; zero at the output because the loss only
    // reads the tangent.
    Matrix abar(n, net.out_dim());
    out.params.weight.resize(net.depth());
    out.params.bias.resize(net.depth());
    for (std::size_t l = net.depth(); l-- > 0;) {
        const auto& layer = net.layers()[l];
        const Matrix& pre = tr.forward.pre[l];
        const Matrix d1 = derivative(layer.activation, pre);
        Matrix ubar = d1;
        hadamard_inplace(ubar, tbar);
        Matrix pbar = second_derivative(layer.activation, pre);
        hadamard_inplace(pbar, tr.tangent_pre[l]);
        hadamard_inplace(pbar, tbar);
        Matrix direct = d1;
        hadamard_inplace(direct, abar);
        pbar += direct;
        out.params.weight[l] = matmul_tn(pbar, tr.forward.inputs[l]) + matmul_tn(ubar, tr.tangent_in[l]);
        out.params.bias[l] = column_sums(pbar);
        abar = matmul(pbar, layer.weight);
        tbar = matmul(ubar, layer.weight);
    }
    out.input_grad = std::move(abar);
    return out;
}

std::pair<Vector, ForwardTrace> forward(const MlpNetwork& net, std::span<const double> z) {
    ForwardTrace trace = forward_batch(net, row_matrix(z));
    Vector out(trace.output.data().begin(), trace.output.data().end());
    return {std::move(out), std::move(trace)};
}

std::pair<ParamGradients, Vector> backward(const MlpNetwork& net, const ForwardTrace& trace,
                                           std::span<const double> upstream) {
    if (upstream.size() != net.out_dim()) throw Error(ErrorCode::DimensionMismatch, "backward: upstream length");
    Matrix input_grad;
    ParamGradients g = backward_batch(net, trace, row_matrix(upstream), &input_grad);
    return {std::move(g), Vector(input_grad.data().begin(), input_grad.data().end())};
}

Matrix input_jacobian(const MlpNetwork& net, std::span<const double> z) {
    require_input(net, z.size(), "input_jacobian");
    Matrix jac = Matrix::identity(z.size());
    Vector a(z.begin(), z.end());
    for (const auto& layer : net.layers()) {
        Vector pre = matvec(layer.weight, a);
        axpy(1.0, layer.bias, pre);
        Matrix next = matmul(layer.weight, jac);
        for (std::size_t r = 0; r < next.rows(); ++r) {
            const double s = activate_d1(layer.activation, pre[r]);
            for (double& x : next.row(r)) x *= s;
            pre[r] = activate(layer.activation, pre[r]);
        }
        jac = std::move(next);
        a = std::move(pre);
    }
    return jac;
}

std::pair<Vector, JvpTrace> jvp(const MlpNetwork& net, std::span<const double> z, std::span<const double> t) {
    if (t.size() != z.size()) throw Error(ErrorCode::DimensionMismatch, "jvp: tangent length");
    JvpTrace trace = jvp_batch(net, row_matrix(z), row_matrix(t));
    Vector out(trace.tangent_out.data().begin(), trace.tangent_out.data().end());
    return {std::move(out), std::move(trace)};
}

std::pair<ParamGradients, Vector> grad_jvp_sqnorm(const MlpNetwork& net, std::span<const double> z,
                                                  std::span<const double> t) {
    if (t.size() != z.size()) throw Error(ErrorCode::DimensionMismatch, "grad_jvp_sqnorm: tangent length");
    JvpSqnormGrad g = grad_jvp_sqnorm_batch(net, row_matrix(z), row_matrix(t), [](std::size_t, double) { return 1.0; });
    return {std::move(g.params), Vector(g.input_grad.data().begin(), g.input_grad.data().end())};
}

}  // namespace grae
