#pragma once

#include <filesystem>
#include <functional>
#include <vector>

#include "compenkit/dataset.hpp"
#include "compenkit/loss.hpp"
#include "compenkit/model.hpp"

namespace compenkit {

struct TrainConfig {
    double lr = 1e-3;
    double decay_factor = 5.0;
    int decay_every = 1500;
    int iters = 2000;
    int batch = 4;
    LossTerms terms; // defaults to l1 + l2 + ssim
    unsigned seed = 0;
};

struct TrainIterRecord {
    int iter = 0;
    double loss = 0.0, l1 = 0.0, l2 = 0.0, ssim_term = 0.0;
    double lr = 0.0;
};

struct TrainLog {
    std::vector<TrainIterRecord> rows;
    void write_csv(const std::filesystem::path& path) const;
};

/// Adam with the step-decay schedule lr(t) = lr0 / factor^floor(t / every).
class AdamOptimizer {
public:
    AdamOptimizer(std::vector<Param> params, const TrainConfig& cfg);
    void step();
    void zero_grads();
    double current_lr() const;
    int iteration() const { return t_; }

private:
    std::vector<Param> params_;
    TrainConfig cfg_;
    std::vector<std::vector<float>> m_, v_;
    int t_ = 0;
};

/// Trains in place. Batches are drawn deterministically from cfg.seed.
/// Throws DivergedError if the loss becomes non-finite.
/// `on_iter` (optional) is called after every iteration with the new record.
TrainLog train(CompensationModel& model, const Dataset& data, const TrainConfig& cfg,
               const std::function<void(const TrainIterRecord&)>& on_iter = {});

} // namespace compenkit
