#ifndef MIXUP_TRAINING_HPP
#define MIXUP_TRAINING_HPP

#include "datasets.hpp"
#include "mixing.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

namespace mixup::training {

struct DenseLayer {
    Eigen::MatrixXd weight; // out x in
    Eigen::VectorXd bias;
};

/// Fully connected network: ReLU on hidden layers, softmax on the output.
struct MlpModel {
    std::vector<int> layer_sizes;
    std::vector<DenseLayer> layers;

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const auto& l : layers) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
        return n;
    }
    int input_dim() const { return layer_sizes.front(); }
    int num_classes() const { return layer_sizes.back(); }
    bool operator==(const MlpModel& o) const {
        if (layer_sizes != o.layer_sizes) return false;
        for (std::size_t i = 0; i < layers.size(); ++i)
            if (layers[i].weight != o.layers[i].weight || layers[i].bias != o.layers[i].bias) return false;
        return true;
    }
};

/// Weights and biases uniform on +-1/sqrt(fan_in).
inline MlpModel init_mlp(const std::vector<int>& sizes, std::uint64_t seed) {
    if (sizes.size() < 2) throw ContractError("init_mlp needs at least an input and an output layer");
    for (int s : sizes)
        if (s < 1) throw ContractError("init_mlp: layer sizes must be positive");
    Rng rng(seed);
    MlpModel m{sizes, {}};
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(sizes[l]));
        std::uniform_real_distribution<double> u(-bound, bound);
        DenseLayer layer{Eigen::MatrixXd(sizes[l + 1], sizes[l]), Eigen::VectorXd(sizes[l + 1])};
        for (Eigen::Index c = 0; c < layer.weight.cols(); ++c)
            for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) layer.weight(r, c) = u(rng);
        for (Eigen::Index r = 0; r < layer.bias.size(); ++r) layer.bias(r) = u(rng);
        m.layers.push_back(std::move(layer));
    }
    return m;
}

/// Column-wise stable softmax.
inline Eigen::MatrixXd softmax(const Eigen::MatrixXd& logits) {
    Eigen::MatrixXd p = logits;
    for (Eigen::Index c = 0; c < p.cols(); ++c) {
        p.col(c).array() -= p.col(c).maxCoeff();
        p.col(c) = p.col(c).array().exp();
        p.col(c) /= p.col(c).sum();
    }
    return p;
}

namespace detail {
struct Activations {
    std::vector<Eigen::MatrixXd> a; // a[0] = input, a[l] = output of layer l (post-ReLU for hidden)
    Eigen::MatrixXd logits;
};

inline Activations forward_all(const MlpModel& model, const Eigen::MatrixXd& inputs) {
    if (inputs.rows() != model.input_dim()) throw ContractError("forward: input dimension mismatch");
    Activations act;
    act.a.push_back(inputs);
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        Eigen::MatrixXd z = model.layers[l].weight * act.a.back();
        z.colwise() += model.layers[l].bias;
        if (l + 1 == model.layers.size())
            act.logits = std::move(z);
        else
            act.a.push_back(z.cwiseMax(0.0));
    }
    return act;
}
} // namespace detail

/// Class probabilities for a batch of column inputs (input_dim x B).
inline Eigen::MatrixXd forward(const MlpModel& model, const Eigen::MatrixXd& inputs) {
    return softmax(detail::forward_all(model, inputs).logits);
}

inline ClassProbs predict(const MlpModel& model, const Eigen::VectorXd& x) {
    const Eigen::MatrixXd p = forward(model, x);
    return ClassProbs{std::vector<double>(p.data(), p.data() + p.size())};
}

struct Gradients {
    std::vector<DenseLayer> layers; // same shapes as the model
};

/// Mean cross-entropy against soft targets (k x B columns on the simplex) and
/// its gradient.
inline std::pair<double, Gradients> loss_and_grad(const MlpModel& model, const Eigen::MatrixXd& inputs,
                                                  const Eigen::MatrixXd& targets) {
    if (targets.rows() != model.num_classes() || targets.cols() != inputs.cols())
        throw ContractError("loss_and_grad: target shape mismatch");
    for (Eigen::Index c = 0; c < targets.cols(); ++c) {
        if (targets.col(c).minCoeff() < -1e-12 || std::abs(targets.col(c).sum() - 1.0) > 1e-9)
            throw ContractError("loss_and_grad: label column " + std::to_string(c) + " is not on the simplex");
    }
    const auto act = detail::forward_all(model, inputs);
    const double B = static_cast<double>(inputs.cols());
    double loss = 0.0;
    Eigen::MatrixXd probs(act.logits.rows(), act.logits.cols());
    for (Eigen::Index c = 0; c < act.logits.cols(); ++c) {
        const double mx = act.logits.col(c).maxCoeff();
        const Eigen::VectorXd shifted = act.logits.col(c).array() - mx;
        const double lse = std::log(shifted.array().exp().sum());
        const Eigen::VectorXd logp = shifted.array() - lse;
        probs.col(c) = logp.array().exp();
        for (Eigen::Index r = 0; r < logp.size(); ++r)
            if (targets(r, c) > 0.0) loss -= targets(r, c) * logp(r);
    }
    loss /= B;

    Gradients g;
    g.layers.resize(model.layers.size());
    Eigen::MatrixXd delta = (probs - targets) / B;
    for (std::size_t l = model.layers.size(); l-- > 0;) {
        g.layers[l].weight = delta * act.a[l].transpose();
        g.layers[l].bias = delta.rowwise().sum();
        if (l > 0) {
            delta = (model.layers[l].weight.transpose() * delta).cwiseProduct(
                (act.a[l].array() > 0.0).cast<double>().matrix());
        }
    }
    return {loss, std::move(g)};
}

/// Inputs and hard one-hot targets for a whole dataset, as columns.
inline std::pair<Eigen::MatrixXd, Eigen::MatrixXd> dataset_batch(const LabeledDataset& ds) {
    Eigen::MatrixXd X = ds.points().transpose();
    Eigen::MatrixXd Y = Eigen::MatrixXd::Zero(ds.num_classes(), static_cast<Eigen::Index>(ds.size()));
    for (std::size_t i = 0; i < ds.size(); ++i) Y(ds.label(i) - 1, static_cast<Eigen::Index>(i)) = 1.0;
    return {std::move(X), std::move(Y)};
}

struct MixedBatch {
    Eigen::MatrixXd inputs;  // n x B
    Eigen::MatrixXd targets; // k x B
    std::vector<std::tuple<std::size_t, std::size_t, double>> provenance; // (s, t, lambda)
};

/// B mixtures lambda s + (1 - lambda) t with s, t drawn independently and
/// uniformly (with replacement) from the dataset.
inline MixedBatch mixup_batch(const LabeledDataset& ds, const MixingDistribution& dist, std::size_t batch_size,
                              Rng& rng) {
    if (batch_size < 1) throw ContractError("mixup_batch: batch_size must be >= 1");
    const auto B = static_cast<Eigen::Index>(batch_size);
    MixedBatch mb{Eigen::MatrixXd(static_cast<Eigen::Index>(ds.dim()), B),
                  Eigen::MatrixXd::Zero(ds.num_classes(), B), {}};
    mb.provenance.reserve(batch_size);
    for (Eigen::Index b = 0; b < B; ++b) {
        const std::size_t s = uniform_index(rng, ds.size());
        const std::size_t t = uniform_index(rng, ds.size());
        const double lam = dist.sample(rng);
        mb.inputs.col(b) = (lam * ds.point(s) + (1.0 - lam) * ds.point(t)).transpose();
        mb.targets(ds.label(s) - 1, b) += lam;
        mb.targets(ds.label(t) - 1, b) += 1.0 - lam;
        mb.provenance.emplace_back(s, t, lam);
    }
    return mb;
}

struct AdamHyper {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double lr = 1e-3;
    double eps = 1e-8;
};

struct AdamState {
    AdamHyper hyper;
    std::vector<DenseLayer> m;
    std::vector<DenseLayer> v;
    std::size_t step = 0;

    static AdamState for_model(const MlpModel& model, AdamHyper h = {}) {
        AdamState s{h, {}, {}, 0};
        for (const auto& l : model.layers) {
            DenseLayer z{Eigen::MatrixXd::Zero(l.weight.rows(), l.weight.cols()), Eigen::VectorXd::Zero(l.bias.size())};
            s.m.push_back(z);
            s.v.push_back(z);
        }
        return s;
    }
};

namespace detail {
template <class P, class G, class M>
void adam_update(P& p, const G& g, M& m, M& v, const AdamHyper& h, double c1, double c2) {
    if (p.rows() != g.rows() || p.cols() != g.cols() || m.rows() != g.rows() || m.cols() != g.cols())
        throw ContractError("adam_step: shape mismatch");
    m = h.beta1 * m + (1.0 - h.beta1) * g;
    v = h.beta2 * v + (1.0 - h.beta2) * g.cwiseProduct(g);
    p.array() -= h.lr * (m.array() / c1) / ((v.array() / c2).sqrt() + h.eps);
}
} // namespace detail

/// Bias-corrected Adam update applied in place.
inline void adam_step(AdamState& state, MlpModel& model, const Gradients& grads) {
    if (state.m.size() != model.layers.size() || grads.layers.size() != model.layers.size())
        throw ContractError("adam_step: layer count mismatch");
    ++state.step;
    const double c1 = 1.0 - std::pow(state.hyper.beta1, static_cast<double>(state.step));
    const double c2 = 1.0 - std::pow(state.hyper.beta2, static_cast<double>(state.step));
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        detail::adam_update(model.layers[l].weight, grads.layers[l].weight, state.m[l].weight, state.v[l].weight,
                            state.hyper, c1, c2);
        detail::adam_update(model.layers[l].bias, grads.layers[l].bias, state.m[l].bias, state.v[l].bias,
                            state.hyper, c1, c2);
    }
}

struct Evaluation {
    std::vector<ClassProbs> probs;
    std::vector<bool> correct;
    double accuracy = 0.0;
};

inline Evaluation evaluate(const MlpModel& model, const LabeledDataset& ds) {
    if (static_cast<int>(ds.dim()) != model.input_dim()) throw ContractError("evaluate: dimension mismatch");
    const Eigen::MatrixXd P = forward(model, ds.points().transpose());
    Evaluation ev;
    std::size_t hits = 0;
    for (Eigen::Index c = 0; c < P.cols(); ++c) {
        ClassProbs cp{std::vector<double>(P.col(c).data(), P.col(c).data() + P.rows())};
        const bool ok = cp.predicted_class() == ds.label(static_cast<std::size_t>(c));
        hits += ok ? 1 : 0;
        ev.correct.push_back(ok);
        ev.probs.push_back(std::move(cp));
    }
    ev.accuracy = static_cast<double>(hits) / static_cast<double>(ds.size());
    return ev;
}

enum class Mode { erm, mixup };

inline std::string to_string(Mode m) { return m == Mode::erm ? "erm" : "mixup"; }

struct TrainOptions {
    Mode mode = Mode::erm;
    std::optional<MixingDistribution> dist;
    int epochs = 3000;
    std::size_t batch_size = 0; // 0: full batch
    std::uint64_t seed = 0;
    AdamHyper adam{};
};

struct History {
    std::vector<double> loss;        // per epoch, mean over the epoch's steps
    std::vector<double> train_error; // on the original points, after each epoch
    MlpModel model;
};

/// Trains in place on a copy of the model. Each epoch covers m examples:
/// ERM shuffles the data into batches, Mixup draws m fresh mixtures.
inline History train(MlpModel model, const LabeledDataset& ds, const TrainOptions& opt) {
    if (opt.mode == Mode::mixup && !opt.dist) throw ContractError("train: mixup mode requires a mixing distribution");
    if (opt.epochs < 0) throw ContractError("train: epochs must be >= 0");
    if (static_cast<int>(ds.dim()) != model.input_dim() || ds.num_classes() != model.num_classes())
        throw ContractError("train: model shape does not match the dataset");
    Rng rng(opt.seed);
    auto adam = AdamState::for_model(model, opt.adam);
    const std::size_t m = ds.size();
    const std::size_t B = opt.batch_size == 0 ? m : std::min(opt.batch_size, m);
    const auto [X, Y] = dataset_batch(ds);
    std::vector<Eigen::Index> order(m);
    std::iota(order.begin(), order.end(), Eigen::Index{0});

    History h{{}, {}, {}};
    h.loss.reserve(static_cast<std::size_t>(opt.epochs));
    for (int e = 0; e < opt.epochs; ++e) {
        double total = 0.0;
        std::size_t steps = 0;
        if (opt.mode == Mode::erm && B < m) std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t start = 0; start < m; start += B) {
            const std::size_t len = std::min(B, m - start);
            std::pair<double, Gradients> lg;
            if (opt.mode == Mode::mixup) {
                const auto mb = mixup_batch(ds, *opt.dist, len, rng);
                lg = loss_and_grad(model, mb.inputs, mb.targets);
            } else if (len == m) {
                lg = loss_and_grad(model, X, Y);
            } else {
                const std::vector<Eigen::Index> idx(order.begin() + static_cast<std::ptrdiff_t>(start),
                                                    order.begin() + static_cast<std::ptrdiff_t>(start + len));
                lg = loss_and_grad(model, X(Eigen::all, idx), Y(Eigen::all, idx));
            }
            adam_step(adam, model, lg.second);
            total += lg.first;
            ++steps;
        }
        h.loss.push_back(total / static_cast<double>(steps));
        h.train_error.push_back(1.0 - evaluate(model, ds).accuracy);
    }
    h.model = std::move(model);
    return h;
}

} // namespace mixup::training

#endif // MIXUP_TRAINING_HPP
