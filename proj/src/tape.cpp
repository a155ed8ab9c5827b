#include "llc/tape.hpp"

#include <cmath>
#include <string>
#include <utility>

#include "llc/error.hpp"

namespace llc {

VarId Tape::push(Matrix value, std::function<void(Tape&)> backward_step) {
    Node node;
    node.grad = Matrix(value.rows(), value.cols());
    node.value = std::move(value);
    node.backward_step = std::move(backward_step);
    nodes_.push_back(std::move(node));
    return nodes_.size() - 1;
}

VarId Tape::leaf(Matrix value) { return push(std::move(value), nullptr); }

VarId Tape::linear(VarId input, VarId weight) {
    Matrix out = matmul_nt(value(input), value(weight));
    return push(std::move(out), [input, weight, out_id = nodes_.size()](Tape& t) {
        const Matrix& g = t.grad(out_id);            // n×k
        add_inplace(t.grad_mut(input), matmul_nt(g, transpose(t.value(weight))));  // g·W -> n×d
        add_inplace(t.grad_mut(weight), matmul_tn(g, t.value(input)));             // g^T·X -> k×d
    });
}

VarId Tape::bias_add(VarId input, VarId bias) {
    const Matrix& x = value(input);
    const Matrix& b = value(bias);
    if (b.rows() != 1 || b.cols() != x.cols()) {
        throw DimensionError("bias_add: bias " + std::to_string(b.rows()) + "x" +
                             std::to_string(b.cols()) + " vs input cols " +
                             std::to_string(x.cols()));
    }
    Matrix out(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.rows(); ++i)
        for (std::size_t j = 0; j < x.cols(); ++j) out.at(i, j) = x.at(i, j) + b.at(0, j);
    return push(std::move(out), [input, bias, out_id = nodes_.size()](Tape& t) {
        const Matrix& g = t.grad(out_id);
        add_inplace(t.grad_mut(input), g);
        Matrix& db = t.grad_mut(bias);
        for (std::size_t i = 0; i < g.rows(); ++i)
            for (std::size_t j = 0; j < g.cols(); ++j) db.at(0, j) += g.at(i, j);
    });
}

VarId Tape::relu(VarId input) {
    const Matrix& x = value(input);
    Matrix out(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.size(); ++i)
        out.data()[i] = x.data()[i] > 0.0 ? x.data()[i] : 0.0;
    return push(std::move(out), [input, out_id = nodes_.size()](Tape& t) {
        const Matrix& g = t.grad(out_id);
        const Matrix& x = t.value(input);
        Matrix& dx = t.grad_mut(input);
        for (std::size_t i = 0; i < g.size(); ++i)
            if (x.data()[i] > 0.0) dx.data()[i] += g.data()[i];
    });
}

VarId Tape::ste_binarize(VarId input) {
    const Matrix& x = value(input);
    Matrix out(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.size(); ++i)
        out.data()[i] = x.data()[i] >= 0.0 ? 1.0 : -1.0;
    return push(std::move(out), [input, out_id = nodes_.size()](Tape& t) {
        add_inplace(t.grad_mut(input), t.grad(out_id));
    });
}

VarId Tape::softmax_cross_entropy(VarId logits, const std::vector<int>& labels) {
    const Matrix& z = value(logits);
    const std::size_t n = z.rows();
    const std::size_t num_classes = z.cols();
    if (labels.size() != n) {
        throw DimensionError("softmax_cross_entropy: " + std::to_string(labels.size()) +
                             " labels for " + std::to_string(n) + " rows");
    }
    for (int y : labels) {
        if (y < 0 || static_cast<std::size_t>(y) >= num_classes) {
            throw ValidationError("softmax_cross_entropy: label " + std::to_string(y) +
                                  " outside [0, " + std::to_string(num_classes) + ")");
        }
    }

    // Row-max subtraction keeps exp() in range; cache the softmax for backward.
    Matrix softmax(n, num_classes);
    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double row_max = z.at(i, 0);
        for (std::size_t j = 1; j < num_classes; ++j) row_max = std::max(row_max, z.at(i, j));
        double denom = 0.0;
        for (std::size_t j = 0; j < num_classes; ++j) denom += std::exp(z.at(i, j) - row_max);
        const double log_denom = std::log(denom);
        for (std::size_t j = 0; j < num_classes; ++j)
            softmax.at(i, j) = std::exp(z.at(i, j) - row_max) / denom;
        const std::size_t y = static_cast<std::size_t>(labels[i]);
        loss += -(z.at(i, y) - row_max - log_denom);
    }
    loss /= static_cast<double>(n);

    Matrix out(1, 1);
    out.at(0, 0) = loss;
    return push(std::move(out), [logits, labels, cached = std::move(softmax),
                                 out_id = nodes_.size()](Tape& t) {
        const double g = t.grad(out_id).at(0, 0);
        Matrix& dz = t.grad_mut(logits);
        const double inv_n = 1.0 / static_cast<double>(cached.rows());
        for (std::size_t i = 0; i < cached.rows(); ++i) {
            for (std::size_t j = 0; j < cached.cols(); ++j) {
                double p = cached.at(i, j);
                if (static_cast<std::size_t>(labels[i]) == j) p -= 1.0;
                dz.at(i, j) += g * inv_n * p;
            }
        }
    });
}

VarId Tape::sigmoid_bce(VarId logits, const Matrix& targets) {
    const Matrix& z = value(logits);
    if (z.rows() != targets.rows() || z.cols() != targets.cols()) {
        throw DimensionError("sigmoid_bce: logits " + std::to_string(z.rows()) + "x" +
                             std::to_string(z.cols()) + " vs targets " +
                             std::to_string(targets.rows()) + "x" +
                             std::to_string(targets.cols()));
    }
    for (std::size_t i = 0; i < targets.size(); ++i) {
        double t = targets.data()[i];
        if (t != 0.0 && t != 1.0)
            throw ValidationError("sigmoid_bce: target " + std::to_string(t) +
                                  " outside {0,1}");
    }

    // Log-sum-exp form: max(z,0) - z*t + log1p(exp(-|z|)).
    double loss = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        const double zi = z.data()[i];
        const double ti = targets.data()[i];
        loss += std::max(zi, 0.0) - zi * ti + std::log1p(std::exp(-std::fabs(zi)));
    }
    loss /= static_cast<double>(z.size());

    Matrix out(1, 1);
    out.at(0, 0) = loss;
    return push(std::move(out), [logits, targets, out_id = nodes_.size()](Tape& t) {
        const double g = t.grad(out_id).at(0, 0);
        const Matrix& z = t.value(logits);
        Matrix& dz = t.grad_mut(logits);
        const double inv_n = 1.0 / static_cast<double>(z.size());
        for (std::size_t i = 0; i < z.size(); ++i) {
            const double sig = 1.0 / (1.0 + std::exp(-z.data()[i]));
            dz.data()[i] += g * inv_n * (sig - targets.data()[i]);
        }
    });
}

void Tape::backward(VarId root) {
    if (root >= nodes_.size()) throw ValidationError("backward: no such node");
    const Matrix& v = nodes_[root].value;
    if (v.size() != 1) throw ValidationError("backward: root must be a scalar node");
    nodes_[root].grad.at(0, 0) = 1.0;
    for (std::size_t i = nodes_.size(); i > 0; --i) {
        auto& step = nodes_[i - 1].backward_step;
        if (step) step(*this);
    }
}

}  // namespace llc
