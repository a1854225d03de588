#include "otshift/ldrot.hpp"

#include "otshift/errors.hpp"
#include "otshift/seed.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <numeric>
#include <ostream>
#include <random>

namespace otshift {

std::string to_string(WeightMode m)
{
    return m == WeightMode::constant ? "constant" : "similarity";
}

WeightMode weight_mode_from_string(const std::string& name)
{
    if (name == "constant") return WeightMode::constant;
    if (name == "similarity") return WeightMode::similarity;
    throw ConfigError("unknown weight mode '" + name + "'");
}

void LdrotConfig::validate() const
{
    auto need = [](bool ok, const std::string& msg) {
        if (!ok)
            throw ConfigError(msg);
    };
    need(alpha >= 0.0 && beta >= 0.0, "alpha and beta must be non-negative");
    need(epsilon > 0.0, "epsilon must be positive");
    need(tau > 0.0, "tau must be positive");
    need(!theta || *theta >= 0.0, "theta must be non-negative");
    need(lambda >= 0.0, "lambda must be non-negative");
    need(k_phi >= 1, "k_phi must be at least 1");
    need(classes >= 1, "classes must be positive");
    need(per_class_batch >= 1 && target_batch >= 1, "batch sizes must be positive");
    need(lr_classifier > 0.0 && lr_phi > 0.0, "learning rates must be positive");
    need(total_steps >= 0 && pretrain_steps >= 0, "step counts must be non-negative");
    need(!hidden.empty(), "g needs at least one hidden layer");
    for (const int h : hidden)
        need(h >= 1, "hidden widths must be positive");
    need(eval_subset >= 1, "eval_subset must be positive");
}

LdrotModel LdrotModel::create(int input_dim, const LdrotConfig& cfg)
{
    std::vector<LayerSpec> g_layers;
    for (const int h : cfg.hidden)
        g_layers.push_back({h, Activation::relu});
    const int latent = cfg.hidden.back();
    LdrotModel m;
    m.g = DenseNet(input_dim, g_layers, derive_seed(cfg.seed, 100));
    m.head_s = DenseNet(latent, {{cfg.classes, Activation::softmax}}, derive_seed(cfg.seed, 101));
    m.head_t = DenseNet(latent, {{cfg.classes, Activation::softmax}}, derive_seed(cfg.seed, 102));
    m.phi = DenseNet(latent, {{1, Activation::linear}}, derive_seed(cfg.seed, 103));
    return m;
}

ModelGradient ModelGradient::zeros(const LdrotModel& m)
{
    return {Vector::Zero(m.g.parameter_count()), Vector::Zero(m.head_s.parameter_count()),
            Vector::Zero(m.head_t.parameter_count())};
}

ModelGradient& ModelGradient::operator+=(const ModelGradient& o)
{
    g += o.g;
    head_s += o.head_s;
    head_t += o.head_t;
    return *this;
}

ModelGradient& ModelGradient::operator*=(double s)
{
    g *= s;
    head_s *= s;
    head_t *= s;
    return *this;
}

namespace {

Vector uniform_weights(Eigen::Index n)
{
    return Vector::Constant(n, 1.0 / static_cast<double>(n));
}

// 1 - cosine similarity; a zero latent counts as orthogonal to everything.
double safe_cosine_distance(const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b, Vector* da,
                            Vector* db)
{
    const double na = a.norm();
    const double nb = b.norm();
    if (na < 1e-12 || nb < 1e-12) {
        if (da)
            da->setZero(a.size());
        if (db)
            db->setZero(b.size());
        return 1.0;
    }
    const double c = a.dot(b) / (na * nb);
    if (da)
        *da = -(b / (na * nb) - c * a / (na * na));
    if (db)
        *db = -(a / (na * nb) - c * b / (nb * nb));
    return 1.0 - c;
}

double percentile_linear(std::vector<double> values, double q)
{
    std::sort(values.begin(), values.end());
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

int argmax_lowest(const Eigen::Ref<const Vector>& v)
{
    int best = 0;
    for (Eigen::Index k = 1; k < v.size(); ++k)
        if (v[k] > v[best])
            best = static_cast<int>(k);
    return best;
}

bool finite(const ModelGradient& g)
{
    return g.g.allFinite() && g.head_s.allFinite() && g.head_t.allFinite();
}

// Mean cross-entropy KL(onehot || h(g(x))) and its gradient for head `which`.
double source_loss(const LdrotModel& m, const Matrix& xs, const std::vector<int>& ys, bool target_head,
                   ModelGradient& grad)
{
    const DenseNet& head = target_head ? m.head_t : m.head_s;
    const ForwardCache zc = m.g.forward(xs.transpose());
    const ForwardCache pc = head.forward(zc.output());
    const Matrix& p = pc.output();
    const auto n = static_cast<double>(xs.rows());
    const int classes = static_cast<int>(p.rows());
    Matrix dp(p.rows(), p.cols());
    double loss = 0.0;
    for (Eigen::Index i = 0; i < p.cols(); ++i) {
        const Vector y = ProbVector::one_hot(classes, ys[static_cast<std::size_t>(i)]).values();
        const Vector pi = p.col(i);
        loss += kl_divergence(y, pi);
        dp.col(i) = kl_divergence_grad(y, pi).d_second / n;
    }
    const NetGradient hg = head.backward(pc, dp);
    const NetGradient gg = m.g.backward(zc, hg.input);
    grad.g += gg.params;
    (target_head ? grad.head_t : grad.head_s) += hg.params;
    return loss / n;
}

}  // namespace

Matrix similarity_weights(const Matrix& source, const std::vector<int>& source_labels, const Matrix& target,
                          double tau, int classes)
{
    if (!(tau > 0.0))
        throw DomainError("tau must be positive");
    if (classes < 1)
        throw DomainError("classes must be positive");
    if (source.rows() != static_cast<Eigen::Index>(source_labels.size()))
        throw DimensionError("one label per source row is required");
    if (source.cols() != target.cols())
        throw DimensionError("source and target features differ in width");
    if (source.rows() == 0 || target.rows() == 0)
        throw DomainError("similarity weights need non-empty batches");
    std::map<int, int> counts;
    for (const int y : source_labels)
        ++counts[y];
    const bool balanced =
        static_cast<int>(counts.size()) == classes &&
        std::all_of(counts.begin(), counts.end(),
                    [&](const auto& kv) { return kv.second * classes == static_cast<int>(source.rows()); });
    if (!balanced)
        throw PreconditionError("source batch is not class-balanced over " + std::to_string(classes) + " classes");

    Vector ns = source.rowwise().norm();
    Vector nt = target.rowwise().norm();
    if ((ns.array() == 0.0).any() || (nt.array() == 0.0).any())
        throw DegenerateVector("cosine similarity of a zero feature vector");
    const Matrix s = (ns.cwiseInverse().asDiagonal() * source) * (nt.cwiseInverse().asDiagonal() * target).transpose();

    const double q = static_cast<double>(classes - 1) / classes;
    Matrix w(s.rows(), s.cols());
    std::vector<double> column(static_cast<std::size_t>(s.rows()));
    for (Eigen::Index j = 0; j < s.cols(); ++j) {
        for (Eigen::Index i = 0; i < s.rows(); ++i)
            column[static_cast<std::size_t>(i)] = s(i, j);
        const double mu = percentile_linear(column, q);
        w.col(j) = ((s.col(j).array() - mu) / tau).exp();
    }
    return w;
}

ShiftValue shifting_loss(const LdrotModel& model, const Matrix& xs, const Matrix& xt, const Matrix& weights,
                         double epsilon)
{
    if (xs.rows() == 0 || xt.rows() == 0)
        throw DomainError("shifting loss needs non-empty batches");
    if (weights.rows() != xs.rows() || weights.cols() != xt.rows())
        throw DimensionError("weight matrix must be n_s x n_t");
    const Eigen::Index ns = xs.rows();
    const Eigen::Index nt = xt.rows();

    const ForwardCache zs_c = model.g.forward(xs.transpose());
    const ForwardCache zt_c = model.g.forward(xt.transpose());
    const Matrix& zs = zs_c.output();
    const Matrix& zt = zt_c.output();
    const ForwardCache ps_c = model.head_s.forward(zs);
    const ForwardCache pt_c = model.head_t.forward(zt);
    const Matrix& ps = ps_c.output();
    const Matrix& pt = pt_c.output();

    ShiftValue out;
    out.cost.resize(ns, nt);
    for (Eigen::Index i = 0; i < ns; ++i)
        for (Eigen::Index j = 0; j < nt; ++j)
            out.cost(i, j) = combined_cost(weights(i, j), safe_cosine_distance(zs.col(i), zt.col(j), nullptr, nullptr),
                                           kl_divergence(ps.col(i), pt.col(j)));

    const ForwardCache phi_c = model.phi.forward(zs);
    const Vector phi = phi_c.output().row(0).transpose();
    const SemiDualValue sd = semidual_objective(phi, out.cost, epsilon, uniform_weights(ns), uniform_weights(nt), true);
    out.value = sd.objective;
    if (!std::isfinite(out.value))
        throw NumericalFailure("shifting loss is not finite", 0);

    Matrix dzs = Matrix::Zero(zs.rows(), ns);
    Matrix dzt = Matrix::Zero(zt.rows(), nt);
    Matrix dps = Matrix::Zero(ps.rows(), ns);
    Matrix dpt = Matrix::Zero(pt.rows(), nt);
    Vector da, db;
    for (Eigen::Index i = 0; i < ns; ++i) {
        for (Eigen::Index j = 0; j < nt; ++j) {
            const double gc = sd.grad_cost(i, j);
            if (gc == 0.0)
                continue;
            if (weights(i, j) != 0.0) {
                safe_cosine_distance(zs.col(i), zt.col(j), &da, &db);
                dzs.col(i) += gc * weights(i, j) * da;
                dzt.col(j) += gc * weights(i, j) * db;
            }
            const PairGradient kg = kl_divergence_grad(ps.col(i), pt.col(j));
            dps.col(i) += gc * kg.d_first;
            dpt.col(j) += gc * kg.d_second;
        }
    }
    dzs += model.phi.backward(phi_c, sd.grad_phi.transpose()).input;

    const NetGradient hs = model.head_s.backward(ps_c, dps);
    const NetGradient ht = model.head_t.backward(pt_c, dpt);
    dzs += hs.input;
    dzt += ht.input;
    out.grad.g = model.g.backward(zs_c, dzs).params + model.g.backward(zt_c, dzt).params;
    out.grad.head_s = hs.params;
    out.grad.head_t = ht.params;
    return out;
}

ClusterValue clustering_loss(const LdrotModel& model, const Matrix& xs, const Matrix& xt, double theta,
                             std::uint64_t seed)
{
    if (!(theta >= 0.0))
        throw DomainError("theta must be non-negative");
    if (xt.rows() == 0)
        throw DomainError("clustering loss needs a target batch");
    ClusterValue out;
    out.grad = ModelGradient::zeros(model);
    const Eigen::Index nt = xt.rows();

    {
        const ForwardCache zc = model.g.forward(xt.transpose());
        const ForwardCache pc = model.head_t.forward(zc.output());
        const Matrix& p = pc.output();
        Matrix dp(p.rows(), p.cols());
        for (Eigen::Index j = 0; j < nt; ++j) {
            out.entropy += entropy(p.col(j));
            for (Eigen::Index k = 0; k < p.rows(); ++k)
                dp(k, j) = -(std::log(std::max(p(k, j), 1e-300)) + 1.0) / static_cast<double>(nt);
        }
        out.entropy /= static_cast<double>(nt);
        const NetGradient hg = model.head_t.backward(pc, dp);
        out.grad.head_t += hg.params;
        out.grad.g += model.g.backward(zc, hg.input).params;
    }

    if (theta > 0.0) {
        const Eigen::Index ns = xs.rows();
        const Eigen::Index n = ns + nt;
        const Eigen::Index d = xt.cols();
        Matrix x(d, n);
        if (ns > 0)
            x.leftCols(ns) = xs.transpose();
        x.rightCols(nt) = xt.transpose();
        Vector mix(n);
        for (Eigen::Index i = 0; i < n; ++i)
            mix[i] = i < ns ? 0.5 / static_cast<double>(ns) : (ns > 0 ? 0.5 : 1.0) / static_cast<double>(nt);

        const Matrix p = model.head_t.predict(model.g.predict(x));

        std::mt19937_64 rng(seed);
        std::normal_distribution<double> normal(0.0, 1.0);
        Matrix dir(d, n);
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index k = 0; k < d; ++k)
                dir(k, i) = normal(rng);
            const double len = dir.col(i).norm();
            if (len > 0.0)
                dir.col(i) /= len;
            else
                dir(0, i) = 1.0;
        }

        const double xi = 1e-6 * theta;
        const ForwardCache z1 = model.g.forward(x + xi * dir);
        const ForwardCache q1 = model.head_t.forward(z1.output());
        Matrix dq(p.rows(), n);
        for (Eigen::Index i = 0; i < n; ++i)
            dq.col(i) = kl_divergence_grad(p.col(i), q1.output().col(i)).d_second;
        const Matrix gx = model.g.backward(z1, model.head_t.backward(q1, dq).input).input;

        Matrix r(d, n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const double len = gx.col(i).norm();
            r.col(i) = (len > 0.0 && std::isfinite(len)) ? Vector(theta * gx.col(i) / len) : Vector(theta * dir.col(i));
        }

        const ForwardCache z2 = model.g.forward(x + r);
        const ForwardCache q2 = model.head_t.forward(z2.output());
        Matrix dq2(p.rows(), n);
        for (Eigen::Index i = 0; i < n; ++i) {
            out.vat += mix[i] * kl_divergence(p.col(i), q2.output().col(i));
            dq2.col(i) = mix[i] * kl_divergence_grad(p.col(i), q2.output().col(i)).d_second;
        }
        const NetGradient hg = model.head_t.backward(q2, dq2);
        out.grad.head_t += hg.params;
        out.grad.g += model.g.backward(z2, hg.input).params;
    }
    out.value = out.entropy + out.vat;
    return out;
}

double evaluate_accuracy(const DenseNet& g, const DenseNet& head, const LabeledSample& samples)
{
    if (samples.size() == 0)
        throw DomainError("accuracy of an empty sample");
    const Matrix p = head.predict(g.predict(Matrix(samples.points.transpose())));
    Eigen::Index hits = 0;
    for (Eigen::Index i = 0; i < p.cols(); ++i)
        if (argmax_lowest(p.col(i)) == samples.labels[static_cast<std::size_t>(i)])
            ++hits;
    return static_cast<double>(hits) / static_cast<double>(samples.size());
}

std::string TrainHistory::csv_header()
{
    return "step,loss_s,loss_shift,loss_clus,src_acc,tgt_acc,ws_latent";
}

void TrainHistory::write_csv(std::ostream& out) const
{
    out << csv_header() << '\n';
    out << std::setprecision(17);
    for (const auto& r : records)
        out << r.step << ',' << r.loss_s << ',' << r.loss_shift << ',' << r.loss_clus << ',' << r.src_acc << ','
            << r.tgt_acc << ',' << r.ws_latent << '\n';
}

namespace {

enum class Objective { ldrot, invariance };

class Trainer {
public:
    Trainer(const LdrotConfig& cfg, const LabeledSample& source, const LabeledSample& target, Objective objective,
            double invariance_weight)
        : cfg_(cfg), source_(source), target_(target), objective_(objective), inv_weight_(invariance_weight),
          batch_rng_(derive_seed(cfg.seed, 1))
    {
        cfg_.validate();
        if (source.size() == 0 || target.size() == 0)
            throw DomainError("training needs non-empty source and target samples");
        if (source.points.cols() != target.points.cols())
            throw DimensionError("source and target points differ in dimension");
        for (const int y : source.labels)
            if (y < 0 || y >= cfg.classes)
                throw DomainError("source label outside [0, classes)");
        for (const int y : target.labels)
            if (y < 0 || y >= cfg.classes)
                throw DomainError("target label outside [0, classes)");
        for (Eigen::Index i = 0; i < source.size(); ++i)
            by_class_[source.labels[static_cast<std::size_t>(i)]].push_back(static_cast<int>(i));

        input_dim_ = static_cast<int>(source.points.cols());
        model_ = LdrotModel::create(input_dim_, cfg_);
        const AdamOptions clf{cfg_.lr_classifier, 0.5, 0.999, 1e-8};
        adam_g_ = AdamState(model_.g.parameter_count(), clf);
        adam_hs_ = AdamState(model_.head_s.parameter_count(), clf);
        adam_ht_ = AdamState(model_.head_t.parameter_count(), clf);
        adam_phi_ = AdamState(model_.phi.parameter_count(), AdamOptions{cfg_.lr_phi, 0.5, 0.999, 1e-8});

        std::mt19937_64 eval_rng(derive_seed(cfg_.seed, 3));
        eval_s_ = pick(static_cast<int>(source.size()), cfg_.eval_subset, eval_rng);
        eval_t_ = pick(static_cast<int>(target.size()), cfg_.eval_subset, eval_rng);

        theta_ = cfg_.theta ? *cfg_.theta : default_theta();
        if (objective_ == Objective::ldrot && (cfg_.alpha > 0.0 || cfg_.beta > 0.0)) {
            // Adaptation fine-tunes a source-only network; h^T starts as a copy of h^S.
            const LdrotModel pre = pretrain();
            model_.g = pre.g;
            model_.head_s = pre.head_s;
            model_.head_t = pre.head_s;
            // Similarity features: the pretrained network's class probabilities.
            sim_s_ = pre.head_s.predict(pre.g.predict(Matrix(source_.points.transpose()))).transpose();
            sim_t_ = pre.head_s.predict(pre.g.predict(Matrix(target_.points.transpose()))).transpose();
        }
    }

    TrainResult run()
    {
        TrainResult result;
        result.theta = theta_;
        for (int step = 0; step < cfg_.total_steps; ++step) {
            TrainRecord rec;
            try {
                rec = objective_ == Objective::ldrot ? ldrot_step(step) : invariance_step(step);
            } catch (const NumericalFailure& e) {
                throw TrainingFailure(e.what(), static_cast<std::size_t>(step), history_);
            }
            history_.records.push_back(rec);
        }
        result.model = model_;
        result.history = history_;
        return result;
    }

private:
    static std::vector<int> pick(int n, int k, std::mt19937_64& rng)
    {
        std::vector<int> all(static_cast<std::size_t>(n));
        std::iota(all.begin(), all.end(), 0);
        std::vector<int> out;
        std::sample(all.begin(), all.end(), std::back_inserter(out), std::min(n, k), rng);
        return out;
    }

    static Matrix rows(const Matrix& m, const std::vector<int>& idx)
    {
        Matrix out(static_cast<Eigen::Index>(idx.size()), m.cols());
        for (std::size_t i = 0; i < idx.size(); ++i)
            out.row(static_cast<Eigen::Index>(i)) = m.row(idx[i]);
        return out;
    }

    std::vector<int> source_batch(std::mt19937_64& rng) const
    {
        std::vector<int> out;
        for (const auto& [label, members] : by_class_) {
            std::vector<int> chosen;
            std::sample(members.begin(), members.end(), std::back_inserter(chosen),
                        std::min<std::size_t>(members.size(), static_cast<std::size_t>(cfg_.per_class_batch)), rng);
            // Small classes are topped up with replacement so every class contributes b rows.
            std::uniform_int_distribution<std::size_t> any(0, members.size() - 1);
            while (static_cast<int>(chosen.size()) < cfg_.per_class_batch)
                chosen.push_back(members[any(rng)]);
            out.insert(out.end(), chosen.begin(), chosen.end());
        }
        return out;
    }

    std::vector<int> labels_of(const std::vector<int>& idx) const
    {
        std::vector<int> out;
        for (const int i : idx)
            out.push_back(source_.labels[static_cast<std::size_t>(i)]);
        return out;
    }

    double default_theta()
    {
        std::mt19937_64 rng(derive_seed(cfg_.seed, 5));
        const Matrix xs = rows(source_.points, source_batch(rng));
        const Matrix xt = rows(target_.points, pick(static_cast<int>(target_.size()), cfg_.target_batch, rng));
        Matrix all(xs.rows() + xt.rows(), xs.cols());
        all << xs, xt;
        std::vector<double> dist;
        for (Eigen::Index i = 0; i < all.rows(); ++i)
            for (Eigen::Index j = i + 1; j < all.rows(); ++j)
                dist.push_back((all.row(i) - all.row(j)).norm());
        if (dist.empty())
            return 0.0;
        std::nth_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(dist.size() / 2), dist.end());
        return 0.5 * dist[dist.size() / 2];
    }

    LdrotModel pretrain()
    {
        LdrotConfig pre = cfg_;
        pre.seed = derive_seed(cfg_.seed, 4);
        LdrotModel net = LdrotModel::create(input_dim_, pre);
        const AdamOptions opts{cfg_.lr_classifier, 0.5, 0.999, 1e-8};
        AdamState ag(net.g.parameter_count(), opts), ah(net.head_s.parameter_count(), opts);
        std::mt19937_64 rng(derive_seed(cfg_.seed, 6));
        for (int step = 0; step < cfg_.pretrain_steps; ++step) {
            const auto idx = source_batch(rng);
            ModelGradient grad = ModelGradient::zeros(net);
            source_loss(net, rows(source_.points, idx), labels_of(idx), false, grad);
            adam_step(ag, net.g, grad.g);
            adam_step(ah, net.head_s, grad.head_s);
        }
        return net;
    }

    Matrix shift_weights(const std::vector<int>& s_idx, const std::vector<int>& t_idx) const
    {
        if (cfg_.weight_mode == WeightMode::constant)
            return Matrix::Constant(static_cast<Eigen::Index>(s_idx.size()), static_cast<Eigen::Index>(t_idx.size()),
                                    cfg_.lambda);
        return similarity_weights(rows(sim_s_, s_idx), labels_of(s_idx), rows(sim_t_, t_idx), cfg_.tau,
                                  static_cast<int>(by_class_.size()));
    }

    void ascend_phi(const Matrix& latents_s, const Matrix& cost)
    {
        const Vector a = uniform_weights(cost.rows());
        const Vector b = uniform_weights(cost.cols());
        for (int k = 0; k < cfg_.k_phi; ++k) {
            const ForwardCache c = model_.phi.forward(latents_s);
            const SemiDualValue v = semidual_objective(c.output().row(0).transpose(), cost, cfg_.epsilon, a, b);
            if (!std::isfinite(v.objective))
                throw NumericalFailure("potential objective is not finite", 0);
            const NetGradient g = model_.phi.backward(c, Matrix(-v.grad_phi.transpose()));
            adam_step(adam_phi_, model_.phi, g.params);
        }
    }

    void descend(const ModelGradient& grad)
    {
        if (!finite(grad))
            throw NumericalFailure("classifier gradient is not finite", 0);
        adam_step(adam_g_, model_.g, grad.g);
        adam_step(adam_hs_, model_.head_s, grad.head_s);
        adam_step(adam_ht_, model_.head_t, grad.head_t);
    }

    double ws_latent() const
    {
        const Matrix zs = model_.g.predict(Matrix(rows(source_.points, eval_s_).transpose()));
        const Matrix zt = model_.g.predict(Matrix(rows(target_.points, eval_t_).transpose()));
        Matrix c(zs.cols(), zt.cols());
        for (Eigen::Index i = 0; i < zs.cols(); ++i)
            for (Eigen::Index j = 0; j < zt.cols(); ++j)
                c(i, j) = (zs.col(i) - zt.col(j)).lpNorm<1>();
        return exact_ot(uniform_weights(c.rows()), uniform_weights(c.cols()), c).cost;
    }

    void finish(TrainRecord& rec, int step, bool target_uses_head_t) const
    {
        rec.step = step;
        rec.src_acc = evaluate_accuracy(model_.g, model_.head_s, source_);
        rec.tgt_acc = evaluate_accuracy(model_.g, target_uses_head_t ? model_.head_t : model_.head_s, target_);
        rec.ws_latent = ws_latent();
        for (const double v : {rec.loss_s, rec.loss_shift, rec.loss_clus, rec.ws_latent})
            if (!std::isfinite(v))
                throw NumericalFailure("training produced a non-finite value", 0);
    }

    TrainRecord ldrot_step(int step)
    {
        const auto s_idx = source_batch(batch_rng_);
        const auto t_idx = pick(static_cast<int>(target_.size()), cfg_.target_batch, batch_rng_);
        const Matrix xs = rows(source_.points, s_idx);
        const Matrix xt = rows(target_.points, t_idx);

        TrainRecord rec;
        ModelGradient total = ModelGradient::zeros(model_);
        rec.loss_s = source_loss(model_, xs, labels_of(s_idx), false, total);

        if (cfg_.alpha > 0.0) {
            const Matrix w = shift_weights(s_idx, t_idx);
            const ShiftValue before = shifting_loss(model_, xs, xt, w, cfg_.epsilon);
            ascend_phi(model_.g.predict(Matrix(xs.transpose())), before.cost);
            ShiftValue sv = shifting_loss(model_, xs, xt, w, cfg_.epsilon);
            rec.loss_shift = sv.value;
            sv.grad *= cfg_.alpha;
            total += sv.grad;
        }
        if (cfg_.beta > 0.0) {
            ClusterValue cv = clustering_loss(model_, xs, xt, theta_, derive_seed(cfg_.seed, 1000 + static_cast<std::uint64_t>(step)));
            rec.loss_clus = cv.value;
            cv.grad *= cfg_.beta;
            total += cv.grad;
        }
        descend(total);
        finish(rec, step, cfg_.alpha > 0.0 || cfg_.beta > 0.0);
        return rec;
    }

    TrainRecord invariance_step(int step)
    {
        const auto s_idx = source_batch(batch_rng_);
        const auto t_idx = pick(static_cast<int>(target_.size()), cfg_.target_batch, batch_rng_);
        const Matrix xs = rows(source_.points, s_idx);
        const Matrix xt = rows(target_.points, t_idx);

        TrainRecord rec;
        ModelGradient total = ModelGradient::zeros(model_);
        rec.loss_s = source_loss(model_, xs, labels_of(s_idx), false, total);

        if (inv_weight_ > 0.0) {
            const ForwardCache zs_c = model_.g.forward(xs.transpose());
            const ForwardCache zt_c = model_.g.forward(xt.transpose());
            const Matrix& zs = zs_c.output();
            const Matrix& zt = zt_c.output();
            Matrix cost(zs.cols(), zt.cols());
            for (Eigen::Index i = 0; i < zs.cols(); ++i)
                for (Eigen::Index j = 0; j < zt.cols(); ++j)
                    cost(i, j) = (zs.col(i) - zt.col(j)).lpNorm<1>();
            ascend_phi(zs, cost);

            const ForwardCache phi_c = model_.phi.forward(zs);
            const SemiDualValue sd =
                semidual_objective(phi_c.output().row(0).transpose(), cost, cfg_.epsilon, uniform_weights(zs.cols()),
                                   uniform_weights(zt.cols()), true);
            rec.loss_shift = sd.objective;
            Matrix dzs = model_.phi.backward(phi_c, sd.grad_phi.transpose()).input;
            Matrix dzt = Matrix::Zero(zt.rows(), zt.cols());
            for (Eigen::Index i = 0; i < zs.cols(); ++i)
                for (Eigen::Index j = 0; j < zt.cols(); ++j) {
                    const double gc = sd.grad_cost(i, j);
                    if (gc == 0.0)
                        continue;
                    const Vector sgn = (zs.col(i) - zt.col(j)).array().sign();
                    dzs.col(i) += gc * sgn;
                    dzt.col(j) -= gc * sgn;
                }
            total.g += inv_weight_ * (model_.g.backward(zs_c, dzs).params + model_.g.backward(zt_c, dzt).params);
        }
        descend(total);
        finish(rec, step, false);
        return rec;
    }

    LdrotConfig cfg_;
    const LabeledSample& source_;
    const LabeledSample& target_;
    Objective objective_;
    double inv_weight_;
    int input_dim_ = 0;
    std::map<int, std::vector<int>> by_class_;
    LdrotModel model_;
    AdamState adam_g_, adam_hs_, adam_ht_, adam_phi_;
    std::mt19937_64 batch_rng_;
    std::vector<int> eval_s_, eval_t_;
    Matrix sim_s_, sim_t_;
    double theta_ = 0.0;
    TrainHistory history_;
};

}  // namespace

TrainResult ldrot_train(const LdrotConfig& cfg, const LabeledSample& source, const LabeledSample& target)
{
    return Trainer(cfg, source, target, Objective::ldrot, 0.0).run();
}

TrainResult invariance_demo(const LdrotConfig& cfg, const LabeledSample& source, const LabeledSample& target,
                            double weight)
{
    if (!(weight >= 0.0))
        throw DomainError("invariance weight must be non-negative");
    return Trainer(cfg, source, target, Objective::invariance, weight).run();
}

}  // namespace otshift
