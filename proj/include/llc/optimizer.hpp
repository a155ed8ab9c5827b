#pragma once

#include <cstddef>
#include <vector>

#include "llc/matrix.hpp"
#include "llc/rng.hpp"

namespace llc {

enum class Schedule { constant, cosine };

// SGD with momentum: v <- mu*v + g; w <- w - lr(t)*v.
// Cosine schedule: lr(t) = lr_max * 0.5 * (1 + cos(pi * t / T)).
class SgdMomentum {
public:
    SgdMomentum(double lr_max, double momentum, Schedule schedule, std::size_t total_steps);

    double current_lr() const;

    // params and grads are parallel lists; velocity buffers are created on
    // first use and must keep their shapes afterwards.
    void step(const std::vector<Matrix*>& params, const std::vector<const Matrix*>& grads);

    std::size_t step_index() const { return step_index_; }

private:
    double lr_max_;
    double momentum_;
    Schedule schedule_;
    std::size_t step_index_ = 0;
    std::size_t total_steps_;
    std::vector<Matrix> velocity_;
};

// Seeded epoch shuffling: returns [0..n) permuted by the stream.
std::vector<std::size_t> shuffled_indices(std::size_t n, RandomStream& rng);

// Consecutive index slices of at most batch_size (last one may be short).
std::vector<std::vector<std::size_t>> make_batches(const std::vector<std::size_t>& order,
                                                   std::size_t batch_size);

}  // namespace llc
