#include "compenkit/train.hpp"

#include <cmath>
#include <fstream>
#include <random>

#include "compenkit/errors.hpp"
#include "compenkit/ops.hpp"

namespace compenkit {

void TrainLog::write_csv(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("TrainLog::write_csv: cannot open " + path.string());
    out << "iter,loss,l1,l2,ssim,lr\n";
    char buf[160];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "%d,%.8g,%.8g,%.8g,%.8g,%.8g\n", r.iter, r.loss,
                      r.l1, r.l2, r.ssim_term, r.lr);
        out << buf;
    }
}

AdamOptimizer::AdamOptimizer(std::vector<Param> params, const TrainConfig& cfg)
    : params_(std::move(params)), cfg_(cfg) {
    for (const auto& p : params_) {
        m_.emplace_back(p.tensor.numel(), 0.0f);
        v_.emplace_back(p.tensor.numel(), 0.0f);
    }
}

double AdamOptimizer::current_lr() const {
    const int k = cfg_.decay_every > 0 ? t_ / cfg_.decay_every : 0;
    return cfg_.lr / std::pow(cfg_.decay_factor, k);
}

void AdamOptimizer::step() {
    constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    const double lr = current_lr();
    const double bc1 = 1.0 - std::pow(beta1, t_ + 1);
    const double bc2 = 1.0 - std::pow(beta2, t_ + 1);
    for (std::size_t i = 0; i < params_.size(); ++i) {
        auto w = params_[i].tensor.data();
        const auto g = params_[i].tensor.grad();
        auto& m = m_[i];
        auto& v = v_[i];
        for (std::size_t j = 0; j < w.size(); ++j) {
            const double gj = g[j];
            m[j] = static_cast<float>(beta1 * m[j] + (1.0 - beta1) * gj);
            v[j] = static_cast<float>(beta2 * v[j] + (1.0 - beta2) * gj * gj);
            const double mhat = m[j] / bc1;
            const double vhat = v[j] / bc2;
            w[j] = static_cast<float>(w[j] - lr * mhat / (std::sqrt(vhat) + eps));
        }
    }
    ++t_;
}

void AdamOptimizer::zero_grads() {
    for (auto& p : params_) p.tensor.zero_grad();
}

TrainLog train(CompensationModel& model, const Dataset& data, const TrainConfig& cfg,
               const std::function<void(const TrainIterRecord&)>& on_iter) {
    if (data.train_prj.empty()) throw ArgumentError("train: dataset has no training pairs");
    if (cfg.batch < 1 || cfg.iters < 0) throw ArgumentError("train: bad batch or iters");
    if (!cfg.terms.any()) throw ArgumentError("train: no loss terms selected");

    AdamOptimizer opt(model.params(), cfg);
    std::mt19937 rng(cfg.seed);
    std::uniform_int_distribution<std::size_t> pick(0, data.train_prj.size() - 1);

    TrainLog log;
    log.rows.reserve(static_cast<std::size_t>(cfg.iters));
    std::vector<Tensor> cams, prjs;
    for (int it = 0; it < cfg.iters; ++it) {
        cams.clear();
        prjs.clear();
        for (int b = 0; b < cfg.batch; ++b) {
            const auto idx = pick(rng);
            cams.push_back(data.train_cam[idx]);
            prjs.push_back(data.train_prj[idx]);
        }
        auto cam = stack_batch(cams);
        auto prj = stack_batch(prjs);

        opt.zero_grads();
        auto x_hat = model.forward(cam, data.surface);
        auto lr_result = loss(x_hat, prj, cfg.terms);
        const double total = lr_result.total.item();
        if (!std::isfinite(total))
            throw DivergedError("train: loss is not finite", it);
        backward(lr_result.total);
        const double used_lr = opt.current_lr();
        opt.step();

        TrainIterRecord rec;
        rec.iter = it;
        rec.loss = total;
        rec.l1 = lr_result.l1;
        rec.l2 = lr_result.l2;
        rec.ssim_term = lr_result.ssim_term;
        rec.lr = used_lr;
        log.rows.push_back(rec);
        if (on_iter) on_iter(rec);
    }
    return log;
}

} // namespace compenkit
