#pragma once

// Small dense MLPs with analytic reverse mode, forward-mode tangents and the
// reverse pass through a tangent computation (gradients of ||J t||^2).
//
// Batched entry points take one example per row. The single-example
// functions are thin wrappers over the batched kernels.

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "grae/numerics.hpp"

namespace grae {

enum class ActivationKind { identity, tanh, sigmoid, elu, relu, leaky_relu };

inline constexpr double kLeakyReluSlope = 0.2;

std::string_view to_string(ActivationKind kind);
ActivationKind parse_activation(std::string_view name);
/// True for activations with a derivative discontinuity at 0.
bool is_kinked(ActivationKind kind);

double activate(ActivationKind kind, double x);
double activate_d1(ActivationKind kind, double x);
/// Second derivative; 0 on the linear pieces of relu/leaky_relu.
double activate_d2(ActivationKind kind, double x);

struct DenseLayer {
    Matrix weight;  ///< out x in
    Vector bias;    ///< out
    ActivationKind activation = ActivationKind::identity;

    std::size_t in_dim() const noexcept { return weight.cols(); }
    std::size_t out_dim() const noexcept { return weight.rows(); }

    bool operator==(const DenseLayer&) const = default;
};

class MlpNetwork {
public:
    MlpNetwork() = default;
    explicit MlpNetwork(std::vector<DenseLayer> layers);

    /// dims = {in, hidden..., out}. Hidden layers use `hidden`, the last layer
    /// `output`. Weights uniform in +-sqrt(6/(fan_in+fan_out)), biases zero.
    static MlpNetwork random(std::span<const std::size_t> dims, ActivationKind hidden, ActivationKind output,
                             Rng& rng);

    std::size_t in_dim() const;
    std::size_t out_dim() const;
    std::size_t depth() const noexcept { return layers_.size(); }
    const std::vector<DenseLayer>& layers() const noexcept { return layers_; }
    DenseLayer& layer(std::size_t i) { return layers_.at(i); }

    std::size_t parameter_count() const;
    Vector flatten() const;
    void assign(std::span<const double> params);

    bool operator==(const MlpNetwork&) const = default;

private:
    std::vector<DenseLayer> layers_;
};

/// Same layout as the network parameters.
struct ParamGradients {
    std::vector<Matrix> weight;
    std::vector<Vector> bias;

    static ParamGradients zeros_like(const MlpNetwork& net);
    ParamGradients& operator+=(const ParamGradients& other);
    ParamGradients& operator*=(double s);
    Vector flatten() const;
};

/// Cached per-layer inputs and pre-activations, one row per example.
struct ForwardTrace {
    std::vector<Matrix> inputs;  ///< inputs[l] feeds layer l
    std::vector<Matrix> pre;     ///< pre-activations of layer l
    Matrix output;
};

struct JvpTrace {
    ForwardTrace forward;
    std::vector<Matrix> tangent_in;   ///< tangent entering layer l
    std::vector<Matrix> tangent_pre;  ///< W_l * tangent_in[l]
    Matrix tangent_out;
};

ForwardTrace forward_batch(const MlpNetwork& net, const Matrix& z);
/// Gradients of sum_r upstream[r] . output[r]; input gradient written when requested.
ParamGradients backward_batch(const MlpNetwork& net, const ForwardTrace& trace, const Matrix& upstream,
                              Matrix* input_grad = nullptr);
JvpTrace jvp_batch(const MlpNetwork& net, const Matrix& z, const Matrix& tangents);

struct JvpSqnormGrad {
    ParamGradients params;
    Matrix input_grad;
    Vector sqnorms;  ///< ||J(z_r) t_r||^2 per row
};

/// Gradient of sum_r w_r * ||J(z_r) t_r||^2, with w_r = weight(r, ||J t_r||^2).
JvpSqnormGrad grad_jvp_sqnorm_batch(const MlpNetwork& net, const Matrix& z, const Matrix& tangents,
                                    const std::function<double(std::size_t, double)>& weight);

std::pair<Vector, ForwardTrace> forward(const MlpNetwork& net, std::span<const double> z);
std::pair<ParamGradients, Vector> backward(const MlpNetwork& net, const ForwardTrace& trace,
                                           std::span<const double> upstream);
/// D x d Jacobian of the network output with respect to its input.
Matrix input_jacobian(const MlpNetwork& net, std::span<const double> z);
std::pair<Vector, JvpTrace> jvp(const MlpNetwork& net, std::span<const double> z, std::span<const double> t);
/// Gradient of ||J(z) t||^2 with respect to parameters and z.
std::pair<ParamGradients, Vector> grad_jvp_sqnorm(const MlpNetwork& net, std::span<const double> z,
                                                  std::span<const double> t);

}  // namespace grae
