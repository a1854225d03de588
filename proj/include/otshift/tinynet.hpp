#pragma once

#include "otshift/simplex.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace otshift {

enum class Activation { relu, leaky_relu, linear, softmax };

inline constexpr double kLeakySlope = 0.1;

std::string to_string(Activation a);
Activation activation_from_string(const std::string& name);

struct DenseLayer {
    Matrix weight;  // out x in
    Vector bias;    // out
    Activation activation = Activation::linear;
};

struct LayerSpec {
    int units = 1;
    Activation activation = Activation::linear;
};

class DenseNet;

// Activations recorded by a forward pass over a batch (one sample per column).
struct ForwardCache {
    const DenseNet* owner = nullptr;
    std::uint64_t revision = 0;
    std::vector<Matrix> inputs;   // input to layer k
    std::vector<Matrix> outputs;  // activation of layer k

    const Matrix& output() const { return outputs.back(); }
};

struct NetGradient {
    Vector params;  // flat, same layout as DenseNet::parameters()
    Matrix input;   // d loss / d input, one column per sample
};

// Small fully connected network with exact reverse-mode gradients.
class DenseNet {
public:
    DenseNet() = default;

    // He-uniform init for ReLU-family layers, Xavier-uniform otherwise; biases start at 0.
    DenseNet(int input_dim, const std::vector<LayerSpec>& layers, std::uint64_t seed);

    // Throws DimensionError if shapes do not chain, DomainError if softmax is not last.
    explicit DenseNet(std::vector<DenseLayer> layers);

    int input_dim() const noexcept { return input_dim_; }
    int output_dim() const noexcept;
    const std::vector<DenseLayer>& layers() const noexcept { return layers_; }
    Eigen::Index parameter_count() const noexcept;
    std::uint64_t revision() const noexcept { return revision_; }

    Vector parameters() const;
    void set_parameters(const Vector& flat);

    ForwardCache forward(const Matrix& batch) const;
    Vector predict(const Vector& x) const;
    Matrix predict(const Matrix& batch) const;

    // Throws CacheError when the cache came from another network or an older revision.
    NetGradient backward(const ForwardCache& cache, const Matrix& output_grad) const;

    nlohmann::json to_json() const;
    static DenseNet from_json(const nlohmann::json& j);

private:
    void check_shapes() const;

    int input_dim_ = 0;
    std::vector<DenseLayer> layers_;
    std::uint64_t revision_ = 0;
};

struct AdamOptions {
    double learning_rate = 1e-3;
    double beta1 = 0.5;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Adam moments plus a Polyak shadow holding the running mean of all iterates.
struct AdamState {
    AdamOptions options;
    Vector first_moment;
    Vector second_moment;
    Vector polyak;
    long step_count = 0;

    AdamState() = default;
    AdamState(Eigen::Index size, AdamOptions opts);
};

// One descent step: params -= lr * m_hat / (sqrt(v_hat) + eps). Callers that
// ascend pass the negated gradient.
void adam_step(AdamState& state, Vector& params, const Vector& grads);

// Applies an Adam step to a network's flat parameter vector.
void adam_step(AdamState& state, DenseNet& net, const Vector& grads);

}  // namespace otshift
