#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "llc/matrix.hpp"

namespace llc {

using VarId = std::size_t;

// Wengert list. Forward calls append nodes; backward() replays the recorded
// operations in exact reverse order, accumulating gradients into each node.
// One tape per training step; leaves are registered fresh each time.
class Tape {
public:
    // Leaf holding a copy of `value`. No backward contribution of its own.
    VarId leaf(Matrix value);

    // input[n×d] · weight[k×d]^T  ->  [n×k]
    VarId linear(VarId input, VarId weight);

    // input[n×k] + bias[1×k] broadcast over rows.
    VarId bias_add(VarId input, VarId bias);

    VarId relu(VarId input);

    // Elementwise sign with sign(0) = +1; backward passes the upstream
    // gradient through unchanged.
    VarId ste_binarize(VarId input);

    // Mean over rows of -log softmax(logits)[label]. Returns a 1×1 scalar node.
    VarId softmax_cross_entropy(VarId logits, const std::vector<int>& labels);

    // Mean over all entries of binary cross-entropy between sigmoid(logits)
    // and targets in {0,1}. Returns a 1×1 scalar node.
    VarId sigmoid_bce(VarId logits, const Matrix& targets);

    // Seeds d(root)/d(root) = 1 and runs every recorded backward step in
    // reverse. Nodes not feeding into root keep zero gradients.
    void backward(VarId root);

    const Matrix& value(VarId id) const { return nodes_[id].value; }
    const Matrix& grad(VarId id) const { return nodes_[id].grad; }
    std::size_t size() const { return nodes_.size(); }

private:
    struct Node {
        Matrix value;
        Matrix grad;
        std::function<void(Tape&)> backward_step;  // null for leaves
    };

    VarId push(Matrix value, std::function<void(Tape&)> backward_step);
    Matrix& grad_mut(VarId id) { return nodes_[id].grad; }

    std::vector<Node> nodes_;
};

}  // namespace llc
