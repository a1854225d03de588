#include "otshift/tinynet.hpp"

#include "otshift/errors.hpp"

#include <cmath>
#include <random>

namespace otshift {

std::string to_string(Activation a)
{
    switch (a) {
    case Activation::relu: return "relu";
    case Activation::leaky_relu: return "leaky_relu";
    case Activation::linear: return "linear";
    case Activation::softmax: return "softmax";
    }
    return "linear";
}

Activation activation_from_string(const std::string& name)
{
    if (name == "relu") return Activation::relu;
    if (name == "leaky_relu") return Activation::leaky_relu;
    if (name == "linear") return Activation::linear;
    if (name == "softmax") return Activation::softmax;
    throw DomainError("unknown activation '" + name + "'");
}

namespace {

void apply_activation(Activation act, Matrix& z)
{
    switch (act) {
    case Activation::relu:
        z = z.cwiseMax(0.0);
        break;
    case Activation::leaky_relu:
        z = z.unaryExpr([](double v) { return v > 0.0 ? v : kLeakySlope * v; });
        break;
    case Activation::linear:
        break;
    case Activation::softmax:
        for (Eigen::Index c = 0; c < z.cols(); ++c) {
            auto col = z.col(c);
            const double top = col.maxCoeff();
            col = (col.array() - top).exp();
            col /= col.sum();
        }
        break;
    }
}

// Maps d loss / d activation to d loss / d pre-activation.
Matrix activation_backward(Activation act, const Matrix& out, const Matrix& grad)
{
    switch (act) {
    case Activation::relu:
        return grad.cwiseProduct((out.array() > 0.0).cast<double>().matrix());
    case Activation::leaky_relu:
        return grad.cwiseProduct(
            out.unaryExpr([](double v) { return v > 0.0 ? 1.0 : kLeakySlope; }));
    case Activation::linear:
        return grad;
    case Activation::softmax: {
        Matrix dz(grad.rows(), grad.cols());
        for (Eigen::Index c = 0; c < grad.cols(); ++c) {
            const double inner = out.col(c).dot(grad.col(c));
            dz.col(c) = out.col(c).cwiseProduct((grad.col(c).array() - inner).matrix());
        }
        return dz;
    }
    }
    return grad;
}

}  // namespace

DenseNet::DenseNet(int input_dim, const std::vector<LayerSpec>& layers, std::uint64_t seed)
    : input_dim_(input_dim)
{
    std::mt19937_64 rng(seed);
    int fan_in = input_dim;
    for (const auto& spec : layers) {
        DenseLayer layer;
        layer.activation = spec.activation;
        const bool rectified =
            spec.activation == Activation::relu || spec.activation == Activation::leaky_relu;
        const double limit = rectified ? std::sqrt(6.0 / fan_in)
                                       : std::sqrt(6.0 / (fan_in + spec.units));
        std::uniform_real_distribution<double> dist(-limit, limit);
        layer.weight = Matrix(spec.units, fan_in);
        for (Eigen::Index r = 0; r < layer.weight.rows(); ++r)
            for (Eigen::Index c = 0; c < layer.weight.cols(); ++c)
                layer.weight(r, c) = dist(rng);
        layer.bias = Vector::Zero(spec.units);
        layers_.push_back(std::move(layer));
        fan_in = spec.units;
    }
    check_shapes();
}

DenseNet::DenseNet(std::vector<DenseLayer> layers) : layers_(std::move(layers))
{
    if (layers_.empty())
        throw DimensionError("a network needs at least one layer");
    input_dim_ = static_cast<int>(layers_.front().weight.cols());
    check_shapes();
}

void DenseNet::check_shapes() const
{
    if (layers_.empty())
        throw DimensionError("a network needs at least one layer");
    Eigen::Index width = input_dim_;
    for (std::size_t k = 0; k < layers_.size(); ++k) {
        const auto& layer = layers_[k];
        if (layer.weight.cols() != width || layer.bias.size() != layer.weight.rows())
            throw DimensionError("layer " + std::to_string(k) + " does not chain");
        if (layer.activation == Activation::softmax && k + 1 != layers_.size())
            throw DomainError("softmax is only allowed on the final layer");
        if (!layer.weight.allFinite() || !layer.bias.allFinite())
            throw DomainError("non-finite network parameter");
        width = layer.weight.rows();
    }
}

int DenseNet::output_dim() const noexcept
{
    return layers_.empty() ? 0 : static_cast<int>(layers_.back().weight.rows());
}

Eigen::Index DenseNet::parameter_count() const noexcept
{
    Eigen::Index n = 0;
    for (const auto& layer : layers_)
        n += layer.weight.size() + layer.bias.size();
    return n;
}

// Layout: for each layer, weights row-major followed by the bias.
Vector DenseNet::parameters() const
{
    Vector flat(parameter_count());
    Eigen::Index at = 0;
    for (const auto& layer : layers_) {
        for (Eigen::Index r = 0; r < layer.weight.rows(); ++r)
            for (Eigen::Index c = 0; c < layer.weight.cols(); ++c)
                flat[at++] = layer.weight(r, c);
        flat.segment(at, layer.bias.size()) = layer.bias;
        at += layer.bias.size();
    }
    return flat;
}

void DenseNet::set_parameters(const Vector& flat)
{
    if (flat.size() != parameter_count())
        throw DimensionError("parameter vector has the wrong length");
    Eigen::Index at = 0;
    for (auto& layer : layers_) {
        for (Eigen::Index r = 0; r < layer.weight.rows(); ++r)
            for (Eigen::Index c = 0; c < layer.weight.cols(); ++c)
                layer.weight(r, c) = flat[at++];
        layer.bias = flat.segment(at, layer.bias.size());
        at += layer.bias.size();
    }
    ++revision_;
}

ForwardCache DenseNet::forward(const Matrix& batch) const
{
    if (batch.rows() != input_dim_)
        throw DimensionError("input has " + std::to_string(batch.rows()) + " rows, network expects " +
                             std::to_string(input_dim_));
    ForwardCache cache;
    cache.owner = this;
    cache.revision = revision_;
    cache.inputs.reserve(layers_.size());
    cache.outputs.reserve(layers_.size());
    const Matrix* current = &batch;
    for (const auto& layer : layers_) {
        cache.inputs.push_back(*current);
        Matrix z = layer.weight * (*current);
        z.colwise() += layer.bias;
        apply_activation(layer.activation, z);
        cache.outputs.push_back(std::move(z));
        current = &cache.outputs.back();
    }
    return cache;
}

Vector DenseNet::predict(const Vector& x) const
{
    return forward(Matrix(x)).output().col(0);
}

Matrix DenseNet::predict(const Matrix& batch) const
{
    return forward(batch).output();
}

NetGradient DenseNet::backward(const ForwardCache& cache, const Matrix& output_grad) const
{
    if (cache.owner != this || cache.revision != revision_ || cache.outputs.size() != layers_.size())
        throw CacheError("forward cache is stale or belongs to a different network");
    if (output_grad.rows() != output_dim() || output_grad.cols() != cache.output().cols())
        throw DimensionError("output gradient shape does not match the forward pass");

    NetGradient grad;
    grad.params = Vector::Zero(parameter_count());

    std::vector<Eigen::Index> offsets(layers_.size());
    Eigen::Index at = 0;
    for (std::size_t k = 0; k < layers_.size(); ++k) {
        offsets[k] = at;
        at += layers_[k].weight.size() + layers_[k].bias.size();
    }

    Matrix upstream = output_grad;
    for (std::size_t k = layers_.size(); k-- > 0;) {
        const auto& layer = layers_[k];
        const Matrix dz = activation_backward(layer.activation, cache.outputs[k], upstream);
        const Matrix dw = dz * cache.inputs[k].transpose();
        Eigen::Index pos = offsets[k];
        for (Eigen::Index r = 0; r < dw.rows(); ++r)
            for (Eigen::Index c = 0; c < dw.cols(); ++c)
                grad.params[pos++] = dw(r, c);
        grad.params.segment(pos, layer.bias.size()) = dz.rowwise().sum();
        upstream = layer.weight.transpose() * dz;
    }
    grad.input = std::move(upstream);
    return grad;
}

nlohmann::json DenseNet::to_json() const
{
    nlohmann::json j;
    j["input_dim"] = input_dim_;
    j["layers"] = nlohmann::json::array();
    for (const auto& layer : layers_) {
        nlohmann::json l;
        l["rows"] = layer.weight.rows();
        l["cols"] = layer.weight.cols();
        l["activation"] = to_string(layer.activation);
        std::vector<double> w;
        w.reserve(static_cast<std::size_t>(layer.weight.size()));
        for (Eigen::Index r = 0; r < layer.weight.rows(); ++r)
            for (Eigen::Index c = 0; c < layer.weight.cols(); ++c)
                w.push_back(layer.weight(r, c));
        l["weight"] = std::move(w);
        l["bias"] = std::vector<double>(layer.bias.data(), layer.bias.data() + layer.bias.size());
        j["layers"].push_back(std::move(l));
    }
    return j;
}

DenseNet DenseNet::from_json(const nlohmann::json& j)
{
    std::vector<DenseLayer> layers;
    try {
        for (const auto& l : j.at("layers")) {
            const auto rows = l.at("rows").get<Eigen::Index>();
            const auto cols = l.at("cols").get<Eigen::Index>();
            const auto w = l.at("weight").get<std::vector<double>>();
            const auto b = l.at("bias").get<std::vector<double>>();
            if (static_cast<Eigen::Index>(w.size()) != rows * cols ||
                static_cast<Eigen::Index>(b.size()) != rows)
                throw DimensionError("checkpoint layer arrays do not match their shape");
            DenseLayer layer;
            layer.activation = activation_from_string(l.at("activation").get<std::string>());
            layer.weight = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                                          Eigen::RowMajor>>(w.data(), rows, cols);
            layer.bias = Eigen::Map<const Vector>(b.data(), rows);
            layers.push_back(std::move(layer));
        }
    } catch (const nlohmann::json::exception& e) {
        throw DomainError(std::string("malformed network checkpoint: ") + e.what());
    }
    DenseNet net(std::move(layers));
    if (j.contains("input_dim") && j["input_dim"].get<int>() != net.input_dim())
        throw DimensionError("checkpoint input_dim disagrees with its first layer");
    return net;
}

AdamState::AdamState(Eigen::Index size, AdamOptions opts)
    : options(opts),
      first_moment(Vector::Zero(size)),
      second_moment(Vector::Zero(size)),
      polyak(Vector::Zero(size))
{
    if (!(opts.beta1 > 0.0 && opts.beta1 < 1.0) || !(opts.beta2 > 0.0 && opts.beta2 < 1.0))
        throw DomainError("Adam betas must lie in (0, 1)");
}

void adam_step(AdamState& state, Vector& params, const Vector& grads)
{
    if (params.size() != grads.size() || params.size() != state.first_moment.size())
        throw DimensionError("Adam state, parameters and gradients must have equal length");
    const auto& o = state.options;
    ++state.step_count;
    state.first_moment = o.beta1 * state.first_moment + (1.0 - o.beta1) * grads;
    state.second_moment = o.beta2 * state.second_moment + (1.0 - o.beta2) * grads.cwiseAbs2();
    const double t = static_cast<double>(state.step_count);
    const double c1 = 1.0 - std::pow(o.beta1, t);
    const double c2 = 1.0 - std::pow(o.beta2, t);
    params.array() -= o.learning_rate * (state.first_moment.array() / c1) /
                      ((state.second_moment.array() / c2).sqrt() + o.eps);
    state.polyak += (params - state.polyak) / t;
}

void adam_step(AdamState& state, DenseNet& net, const Vector& grads)
{
    Vector params = net.parameters();
    adam_step(state, params, grads);
    net.set_parameters(params);
}

}  // namespace otshift
