#pragma once

#include "otshift/errors.hpp"
#include "otshift/mixture.hpp"
#include "otshift/ot.hpp"
#include "otshift/simplex.hpp"
#include "otshift/tinynet.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace otshift {

enum class WeightMode { constant, similarity };

std::string to_string(WeightMode m);
WeightMode weight_mode_from_string(const std::string& name);

struct LdrotConfig {
    double alpha = 0.1;    // shifting loss weight
    double beta = 0.5;     // clustering loss weight
    double epsilon = 0.1;  // entropic rate of the shifting loss
    double tau = 0.5;      // similarity weight temperature
    std::optional<double> theta;  // VAT radius; unset = 0.5 x median pairwise distance of a warmup batch
    WeightMode weight_mode = WeightMode::similarity;
    double lambda = 1.0;   // d_X weight in constant mode
    int k_phi = 5;         // potential ascent steps per classifier step
    int classes = 3;
    int per_class_batch = 16;
    int target_batch = 48;
    double lr_classifier = 1e-3;
    double lr_phi = 1e-2;
    int total_steps = 2000;
    int pretrain_steps = 500;  // source-only warm start before adaptation
    std::vector<int> hidden = {32, 16};  // widths of g
    int eval_subset = 64;      // points per side for ws_latent
    std::uint64_t seed = 0;

    // Throws ConfigError on out-of-range values.
    void validate() const;
};

// g: input -> hidden ReLU layers; heads: latent -> softmax; phi: latent -> 1 linear unit.
struct LdrotModel {
    DenseNet g;
    DenseNet head_s;
    DenseNet head_t;
    DenseNet phi;

    static LdrotModel create(int input_dim, const LdrotConfig& cfg);
};

struct ModelGradient {
    Vector g;
    Vector head_s;
    Vector head_t;

    static ModelGradient zeros(const LdrotModel& m);
    ModelGradient& operator+=(const ModelGradient& o);
    ModelGradient& operator*=(double s);
};

// Similarity weights w_ij = exp((s_ij - mu_j) / tau), where s_ij is the cosine
// similarity of source row i and target row j, and mu_j is the (M-1)/M
// percentile (linear interpolation) of column j. Rows of `source` must come in
// equal counts from `classes` distinct labels.
Matrix similarity_weights(const Matrix& source, const std::vector<int>& source_labels, const Matrix& target,
                          double tau, int classes);

struct ShiftValue {
    double value = 0.0;  // semi-dual objective
    Matrix cost;         // w_ij * cos(g(xs_i), g(xt_j)) + KL(h^S(xs_i) || h^T(xt_j))
    ModelGradient grad;  // of value w.r.t. g, h^S, h^T at fixed phi
};

// Entropic semi-dual over the similarity-aware cost, phi evaluated on g(xs).
// Batches hold one sample per row; `weights` is n_s x n_t.
ShiftValue shifting_loss(const LdrotModel& model, const Matrix& xs, const Matrix& xt, const Matrix& weights,
                         double epsilon);

struct ClusterValue {
    double value = 0.0;
    double entropy = 0.0;
    double vat = 0.0;
    ModelGradient grad;
};

// Mean target prediction entropy of h^T plus VAT on the even source/target
// mixture: one power iteration with probe size 1e-6 * theta, clean prediction
// held fixed.
ClusterValue clustering_loss(const LdrotModel& model, const Matrix& xs, const Matrix& xt, double theta,
                             std::uint64_t seed);

// Fraction of rows whose argmax prediction (lowest index on ties) equals the label.
double evaluate_accuracy(const DenseNet& g, const DenseNet& head, const LabeledSample& samples);

struct TrainRecord {
    int step = 0;
    double loss_s = 0.0;
    double loss_shift = 0.0;
    double loss_clus = 0.0;
    double src_acc = 0.0;
    double tgt_acc = 0.0;
    double ws_latent = 0.0;
};

struct TrainHistory {
    std::vector<TrainRecord> records;

    static std::string csv_header();
    void write_csv(std::ostream& out) const;
};

struct TrainResult {
    LdrotModel model;
    TrainHistory history;
    double theta = 0.0;
};

// Thrown when training hits a non-finite value; carries the history so far.
class TrainingFailure : public NumericalFailure {
public:
    TrainingFailure(const std::string& what, std::size_t step, TrainHistory partial)
        : NumericalFailure(what, step), history_(std::move(partial))
    {
    }
    const TrainHistory& history() const noexcept { return history_; }

private:
    TrainHistory history_;
};

// Alternates k_phi ascent steps of phi with one descent step of g, h^S, h^T
// on L^S + alpha L^shift + beta L^clus. Target labels are only used for the
// recorded accuracy. With alpha or beta positive, training starts from a
// source-only network pretrained for pretrain_steps (h^T copied from h^S),
// whose class probabilities also feed the similarity weights. Target accuracy
// is measured with h^T, or with h^S when alpha = beta = 0 leaves h^T untrained.
TrainResult ldrot_train(const LdrotConfig& cfg, const LabeledSample& source, const LabeledSample& target);

// Cross-entropy on the source plus weight * entropic W_{L1} between the latent
// pushforwards; a single head classifies both domains.
TrainResult invariance_demo(const LdrotConfig& cfg, const LabeledSample& source, const LabeledSample& target,
                            double weight = 0.1);

}  // namespace otshift
