#include "llc/optimizer.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "llc/error.hpp"

namespace llc {

SgdMomentum::SgdMomentum(double lr_max, double momentum, Schedule schedule,
                         std::size_t total_steps)
    : lr_max_(lr_max), momentum_(momentum), schedule_(schedule), total_steps_(total_steps) {
    if (lr_max <= 0.0) throw ValidationError("optimizer: lr must be > 0");
    if (momentum < 0.0 || momentum >= 1.0)
        throw ValidationError("optimizer: momentum must be in [0,1)");
}

double SgdMomentum::current_lr() const {
    if (schedule_ == Schedule::constant) return lr_max_;
    const double t = static_cast<double>(step_index_);
    const double total = static_cast<double>(total_steps_ == 0 ? 1 : total_steps_);
    return lr_max_ * 0.5 * (1.0 + std::cos(std::numbers::pi * t / total));
}

void SgdMomentum::step(const std::vector<Matrix*>& params,
                       const std::vector<const Matrix*>& grads) {
    if (params.size() != grads.size())
        throw DimensionError("optimizer: params/grads count mismatch");
    if (velocity_.empty()) {
        velocity_.reserve(params.size());
        for (const Matrix* p : params) velocity_.emplace_back(p->rows(), p->cols());
    }
    if (velocity_.size() != params.size())
        throw DimensionError("optimizer: parameter count changed mid-run");

    const double lr = current_lr();
    for (std::size_t p = 0; p < params.size(); ++p) {
        Matrix& w = *params[p];
        const Matrix& g = *grads[p];
        Matrix& v = velocity_[p];
        if (w.rows() != g.rows() || w.cols() != g.cols() || w.rows() != v.rows() ||
            w.cols() != v.cols()) {
            throw DimensionError("optimizer: shape mismatch at parameter " + std::to_string(p));
        }
        for (std::size_t i = 0; i < w.size(); ++i) {
            v.data()[i] = momentum_ * v.data()[i] + g.data()[i];
            w.data()[i] -= lr * v.data()[i];
        }
    }
    ++step_index_;
}

std::vector<std::size_t> shuffled_indices(std::size_t n, RandomStream& rng) {
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    rng.shuffle(order);
    return order;
}

std::vector<std::vector<std::size_t>> make_batches(const std::vector<std::size_t>& order,
                                                   std::size_t batch_size) {
    if (batch_size == 0) throw ValidationError("make_batches: batch_size must be >= 1");
    std::vector<std::vector<std::size_t>> batches;
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
        const std::size_t end = std::min(order.size(), start + batch_size);
        batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                             order.begin() + static_cast<std::ptrdiff_t>(end));
    }
    return batches;
}

}  // namespace llc
