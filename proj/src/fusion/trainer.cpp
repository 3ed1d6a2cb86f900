#include "refpoint/fusion/trainer.hpp"

#include "refpoint/error.hpp"
#include "refpoint/fusion/loss.hpp"
#include "refpoint/fusion/network.hpp"
#include "refpoint/seed.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>
#include <random>

namespace refpoint::fusion {

namespace {

constexpr std::size_t kEvalBatch = 64;
constexpr std::uint64_t kShuffleStream = 0x5eed5;

double packed_loss(const FusionNet<float>& net, std::span<const float> params, const PackedSet<float>& set,
                   Workspace<float>& ws) {
    double sum = 0.0;
    for (std::size_t i0 = 0; i0 < set.n; i0 += kEvalBatch) {
        const std::size_t nb = std::min(kEvalBatch, set.n - i0);
        net.forward(params, std::span<const float>(set.x).subspan(i0 * SampleTensor::kSize, nb * SampleTensor::kSize),
                    nb, ws);
        sum += mad_loss<float>(ws.output, std::span<const float>(set.y).subspan(3 * i0, 3 * nb)) *
               static_cast<double>(nb);
    }
    return sum / static_cast<double>(set.n);
}

}  // namespace

std::vector<Vec3> FusionModel::predict(std::span<const SampleTensor> samples) const {
    std::vector<Vec3> out;
    if (samples.empty()) return out;
    const FusionNet<float> net(this->net);
    if (params.size() != net.num_params()) throw Error(Errc::ShapeMismatch, "model parameters do not match config");
    const PackedSet<float> set = pack<float>(samples, norm);
    Workspace<float> ws;
    out.reserve(set.n);
    for (std::size_t i0 = 0; i0 < set.n; i0 += kEvalBatch) {
        const std::size_t nb = std::min(kEvalBatch, set.n - i0);
        net.forward(params, std::span<const float>(set.x).subspan(i0 * SampleTensor::kSize, nb * SampleTensor::kSize),
                    nb, ws);
        for (std::size_t i = 0; i < nb; ++i) out.emplace_back(ws.output[3 * i], ws.output[3 * i + 1], ws.output[3 * i + 2]);
    }
    return out;
}

double evaluate_loss(const FusionModel& model, std::span<const SampleTensor> samples) {
    if (samples.empty()) throw Error(Errc::EmptyInput, "no samples to evaluate");
    const FusionNet<float> net(model.net);
    const PackedSet<float> set = pack<float>(samples, model.norm);
    Workspace<float> ws;
    return packed_loss(net, model.params, set, ws);
}

TrainResult train(std::span<const SampleTensor> train_set, std::span<const SampleTensor> val_set,
                  const NetworkConfig& net_cfg, const TrainConfig& cfg, const TrainResult* resume,
                  const EpochCallback& on_epoch) {
    cfg.validate();
    net_cfg.validate();
    if (train_set.empty()) throw Error(Errc::EmptySplit, "training split is empty");
    if (val_set.empty()) throw Error(Errc::EmptySplit, "validation split is empty");

    const FusionNet<float> net(net_cfg);
    TrainResult r;
    if (resume != nullptr) {
        if (!(resume->model.net == net_cfg)) throw Error(Errc::InvalidArgument, "resume checkpoint has a different network config");
        if (resume->state.params.size() != net.num_params()) throw Error(Errc::ShapeMismatch, "resume state size mismatch");
        r = *resume;
    } else {
        r.model.net = net_cfg;
        r.model.norm = Normalizer::fit(train_set);
        r.model.seed = cfg.seed;
        r.state.params = init_params<float>(net.layout(), cfg.seed);
        r.state.adam.reset(net.num_params());
        r.state.lr = cfg.lr;
        r.state.best_val = std::numeric_limits<double>::infinity();
        r.model.params = r.state.params;
    }

    const PackedSet<float> tr = pack<float>(train_set, r.model.norm);
    const PackedSet<float> va = pack<float>(val_set, r.model.norm);
    const auto bs = static_cast<std::size_t>(cfg.batch_size);
    std::vector<std::size_t> order(tr.n);
    std::vector<float> bx(bs * SampleTensor::kSize), by(bs * 3), d_out(bs * 3);
    std::vector<float> grad(net.num_params());
    Workspace<float> ws, eval_ws;
    TrainState& st = r.state;

    for (int epoch = st.epochs_done + 1; epoch <= cfg.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::mt19937_64 rng(derive_seed(cfg.seed, kShuffleStream, static_cast<std::uint64_t>(epoch)));
        std::shuffle(order.begin(), order.end(), rng);

        double epoch_loss = 0.0;
        for (std::size_t i0 = 0; i0 < tr.n; i0 += bs) {
            const std::size_t nb = std::min(bs, tr.n - i0);
            for (std::size_t i = 0; i < nb; ++i) {
                const std::size_t src = order[i0 + i];
                std::memcpy(bx.data() + i * SampleTensor::kSize, tr.x.data() + src * SampleTensor::kSize,
                            sizeof(float) * SampleTensor::kSize);
                std::memcpy(by.data() + 3 * i, tr.y.data() + 3 * src, sizeof(float) * 3);
            }
            net.forward(st.params, std::span<const float>(bx).first(nb * SampleTensor::kSize), nb, ws);
            double loss = 0.0;
            try {
                loss = mad_loss<float>(ws.output, std::span<const float>(by).first(3 * nb),
                                       std::span<float>(d_out).first(3 * nb));
            } catch (const Error& e) {
                throw Error(Errc::NumericalFailure, std::string("training diverged: ") + e.what());
            }
            net.backward(st.params, std::span<const float>(d_out).first(3 * nb), ws, grad);
            adam_step(st.params, grad, st.adam, st.lr, cfg.beta1, cfg.beta2, cfg.eps);
            epoch_loss += loss * static_cast<double>(nb);
        }
        epoch_loss /= static_cast<double>(tr.n);
        double val_loss = 0.0;
        try {
            val_loss = packed_loss(net, st.params, va, eval_ws);
        } catch (const Error& e) {
            throw Error(Errc::NumericalFailure, std::string("validation failed: ") + e.what());
        }
        if (!std::isfinite(epoch_loss) || !std::isfinite(val_loss)) {
            throw Error(Errc::NumericalFailure, "non-finite loss at epoch " + std::to_string(epoch));
        }

        const EpochRecord rec{epoch, epoch_loss, val_loss, st.lr};
        r.history.epochs.push_back(rec);
        if (val_loss < st.best_val) {
            st.best_val = val_loss;
            st.wait = 0;
            r.history.best_epoch = epoch;
            r.model.params = st.params;
        } else if (++st.wait >= cfg.plateau_patience) {
            st.lr *= cfg.plateau_factor;
            st.wait = 0;
        }
        st.epochs_done = epoch;
        if (on_epoch) on_epoch(rec);
    }
    return r;
}

}  // namespace refpoint::fusion
