#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mpag/checkpoint.hpp"
#include "mpag/graph.hpp"
#include "mpag/model.hpp"

namespace mpag {

struct TrainLogEntry {
    std::uint64_t epoch = 0;
    std::uint64_t step = 0;
    double loss = 0.0; // batch mean NLL
};

using TrainLogFn = std::function<void(const TrainLogEntry&)>;
using EpochFn = std::function<void(const TrainingState&)>;

/// One epoch of seeded-shuffle mini-batches. Per batch: forward each member,
/// backpropagate with a 1/B seed so gradients accumulate the batch mean, then
/// one Adagrad step.
inline void train_epoch(TrainingState& st, const std::vector<PreparedExample>& data,
                        const TrainLogFn& log) {
    std::vector<std::size_t> order(data.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    st.rng.shuffle(order);

    const Config& cfg = st.model.cfg;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch) {
        std::size_t end = std::min(order.size(), start + cfg.batch);
        double batch_size = static_cast<double>(end - start);
        double loss_sum = 0.0;
        for (std::size_t i = start; i < end; ++i) {
            Graph g;
            TrainForward fwd = forward_train(g, st.model, data[order[i]]);
            loss_sum += fwd.loss.scalar();
            g.backward(fwd.loss, 1.0 / batch_size);
        }
        st.model.params.adagrad_update(cfg.lr, cfg.adagrad_eps);
        ++st.step;
        if (log) log({st.epoch + 1, st.step, loss_sum / batch_size});
    }
    ++st.epoch;
}

/// Run until cfg.epochs, invoking `on_epoch` after each epoch (checkpoint
/// hook). Resuming a loaded state continues from its stored epoch counter.
inline void train_run(TrainingState& st, const std::vector<PreparedExample>& data,
                      const TrainLogFn& log = nullptr, const EpochFn& on_epoch = nullptr) {
    while (st.epoch < st.model.cfg.epochs) {
        train_epoch(st, data, log);
        if (on_epoch) on_epoch(st);
    }
}

/// Mean per-target-token NLL over a dataset (teacher forced), the overfit
/// yardstick.
inline double per_token_nll(Model& m, const std::vector<PreparedExample>& data) {
    double total = 0.0;
    std::size_t tokens = 0;
    for (const auto& pe : data) {
        Graph g;
        TrainForward fwd = forward_train(g, m, pe);
        total += fwd.loss.scalar();
        tokens += fwd.target_tokens;
    }
    return tokens == 0 ? 0.0 : total / static_cast<double>(tokens);
}

} // namespace mpag
