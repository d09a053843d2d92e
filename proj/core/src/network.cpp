#include "swm/network.hpp"

#include <algorithm>
#include <cmath>

namespace swm {

void Architecture::validate() const {
    if (points < 1) throw std::invalid_argument("architecture: points must be positive");
    if (encoder_widths.empty()) throw std::invalid_argument("architecture: encoder needs at least one layer");
    if (classifier_widths.empty() && classes == 0) throw std::invalid_argument("architecture: no classifier");
    if (classes < 2) throw std::invalid_argument("architecture: at least 2 classes are required");
    if (projector_widths.size() != 2) throw std::invalid_argument("architecture: projector has exactly 2 layers");
    auto positive = [](const std::vector<std::size_t>& w) {
        return std::all_of(w.begin(), w.end(), [](std::size_t v) { return v > 0; });
    };
    if (!positive(encoder_widths) || !positive(classifier_widths) || !positive(projector_widths)) {
        throw std::invalid_argument("architecture: layer widths must be positive");
    }
}

namespace {

Linear init_linear(std::size_t in, std::size_t out, std::mt19937_64& rng) {
    Linear l;
    l.in = in;
    l.out = out;
    l.weight.resize(in * out);
    l.bias.assign(out, 0.0);
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (auto& w : l.weight) w = dist(rng);
    return l;
}

BatchNorm init_norm(std::size_t width) {
    BatchNorm n;
    n.gamma.assign(width, 1.0);
    n.beta.assign(width, 0.0);
    n.running_mean.assign(width, 0.0);
    n.running_var.assign(width, 1.0);
    return n;
}

Linear zero_linear(const Linear& l) {
    Linear z = l;
    std::fill(z.weight.begin(), z.weight.end(), 0.0);
    std::fill(z.bias.begin(), z.bias.end(), 0.0);
    return z;
}

BatchNorm zero_norm(const BatchNorm& n) {
    BatchNorm z = n;
    std::fill(z.gamma.begin(), z.gamma.end(), 0.0);
    std::fill(z.beta.begin(), z.beta.end(), 0.0);
    std::fill(z.running_mean.begin(), z.running_mean.end(), 0.0);
    std::fill(z.running_var.begin(), z.running_var.end(), 0.0);
    return z;
}

void check_finite(const Matrix& m, const std::string& where) {
    for (double v : m.values()) {
        if (!std::isfinite(v)) throw NumericalError("non-finite activation in " + where);
    }
}

void require_finite(const std::vector<double>& probe, const std::string& where) {
    for (double v : probe) {
        if (!std::isfinite(v)) throw NumericalError("non-finite activation in " + where);
    }
}

Matrix transposed_weight(const Linear& l) {
    Matrix wt = Matrix::for_overwrite(l.in, l.out);
    for (std::size_t o = 0; o < l.out; ++o) {
        for (std::size_t i = 0; i < l.in; ++i) wt(i, o) = l.weight[o * l.in + i];
    }
    return wt;
}

// x * W^T without the bias.
Matrix linear_part(const Matrix& x, const Linear& l) {
    if (x.cols() != l.in) throw std::invalid_argument("affine: input width mismatch");
    const Matrix wt = transposed_weight(l);
    Matrix z = Matrix::for_overwrite(x.rows(), l.out);
    matmul(x.rows(), l.out, l.in, x.data(), wt.data(), z.data());
    return z;
}

// z = x * W^T + b
Matrix affine(const Matrix& x, const Linear& l) {
    Matrix z = linear_part(x, l);
    for (std::size_t r = 0; r < z.rows(); ++r) {
        auto row = z.row(r);
        for (std::size_t o = 0; o < l.out; ++o) row[o] += l.bias[o];
    }
    return z;
}

// Row loops over raw restrict pointers so that the compiler vectorises across
// columns; per-column sums still accumulate in row order, so the results equal
// plain scalar loops bit for bit.

// out[c] += sum over rows of m[r][c]
void add_column_sums(const double* __restrict m, std::size_t rows, std::size_t cols, double* __restrict out) {
    for (std::size_t r = 0; r < rows; ++r) {
        const double* __restrict row = m + r * cols;
        for (std::size_t c = 0; c < cols; ++c) out[c] += row[c];
    }
}

void add_bias(double* __restrict z, std::size_t rows, std::size_t cols, const double* __restrict bias,
              double* __restrict sums) {
    for (std::size_t r = 0; r < rows; ++r) {
        double* __restrict row = z + r * cols;
        for (std::size_t c = 0; c < cols; ++c) {
            row[c] += bias[c];
            sums[c] += row[c];
        }
    }
}

void add_squared_deviations(const double* __restrict z, std::size_t rows, std::size_t cols,
                            const double* __restrict mean, double* __restrict var) {
    for (std::size_t r = 0; r < rows; ++r) {
        const double* __restrict row = z + r * cols;
        for (std::size_t c = 0; c < cols; ++c) {
            const double d = row[c] - mean[c];
            var[c] += d * d;
        }
    }
}

// z becomes the normalised value, y the ReLU output.
void normalize_relu(double* __restrict z, double* __restrict y, std::size_t rows, std::size_t cols,
                    const double* __restrict mean, const double* __restrict inv, const double* __restrict gamma,
                    const double* __restrict beta, double* __restrict probe) {
    for (std::size_t r = 0; r < rows; ++r) {
        double* __restrict zr = z + r * cols;
        double* __restrict yr = y + r * cols;
        for (std::size_t c = 0; c < cols; ++c) {
            zr[c] = (zr[c] - mean[c]) * inv[c];
            const double v = gamma[c] * zr[c] + beta[c];
            yr[c] = v > 0.0 ? v : 0.0;
            probe[c] += zr[c] * 0.0;
        }
    }
}

// Affine -> batch norm -> ReLU. The tape keeps the normalised values; the
// returned matrix is the ReLU output.
Matrix normed_layer(const Matrix& x, const Linear& l, const BatchNorm& n, Mode mode, NormTape& tape,
                    const std::string& where) {
    Matrix z = linear_part(x, l);
    const std::size_t rows = z.rows();
    const std::size_t cols = z.cols();
    std::vector<double> mean(cols, 0.0);
    std::vector<double> probe(cols, 0.0);
    tape.inv_std.assign(cols, 0.0);
    if (mode == Mode::train) {
        add_bias(z.data(), rows, cols, l.bias.data(), mean.data());
        for (auto& m : mean) m /= static_cast<double>(rows);
        std::vector<double> var(cols, 0.0);
        add_squared_deviations(z.data(), rows, cols, mean.data(), var.data());
        for (auto& v : var) v /= static_cast<double>(rows);
        for (std::size_t c = 0; c < cols; ++c) tape.inv_std[c] = 1.0 / std::sqrt(var[c] + kNormEpsilon);
        tape.batch_mean = mean;
        tape.batch_var = std::move(var);
    } else {
        std::vector<double> unused(cols, 0.0);
        add_bias(z.data(), rows, cols, l.bias.data(), unused.data());
        mean = n.running_mean;
        for (std::size_t c = 0; c < cols; ++c) tape.inv_std[c] = 1.0 / std::sqrt(n.running_var[c] + kNormEpsilon);
        tape.batch_mean.clear();
        tape.batch_var.clear();
    }

    Matrix y = Matrix::for_overwrite(rows, cols);
    normalize_relu(z.data(), y.data(), rows, cols, mean.data(), tape.inv_std.data(), n.gamma.data(), n.beta.data(),
                   probe.data());
    require_finite(probe, where);
    tape.normalized = std::move(z);
    return y;
}

void relu_mask_and_norm_grads(double* __restrict d, const double* __restrict y, const double* __restrict xhat,
                              std::size_t rows, std::size_t cols, double* __restrict dgamma,
                              double* __restrict dbeta) {
    for (std::size_t r = 0; r < rows; ++r) {
        double* __restrict dr = d + r * cols;
        const double* __restrict yr = y + r * cols;
        const double* __restrict nr = xhat + r * cols;
        for (std::size_t c = 0; c < cols; ++c) {
            if (!(yr[c] > 0.0)) dr[c] = 0.0;
            dgamma[c] += dr[c] * nr[c];
            dbeta[c] += dr[c];
        }
    }
}

void eval_norm_backward(double* __restrict d, std::size_t rows, std::size_t cols, const double* __restrict gamma,
                        const double* __restrict inv, double* __restrict bias_grad) {
    for (std::size_t r = 0; r < rows; ++r) {
        double* __restrict dr = d + r * cols;
        for (std::size_t c = 0; c < cols; ++c) {
            dr[c] = dr[c] * gamma[c] * inv[c];
            bias_grad[c] += dr[c];
        }
    }
}

// dxhat = dy * gamma; sum(dxhat) = gamma * dbeta; sum(dxhat * xhat) = gamma * dgamma
void train_norm_backward(double* __restrict d, const double* __restrict xhat, std::size_t rows, std::size_t cols,
                         const double* __restrict gamma, const double* __restrict inv,
                         const double* __restrict dgamma, const double* __restrict dbeta,
                         double* __restrict bias_grad) {
    const double count = static_cast<double>(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        double* __restrict dr = d + r * cols;
        const double* __restrict nr = xhat + r * cols;
        for (std::size_t c = 0; c < cols; ++c) {
            const double dxhat = dr[c] * gamma[c];
            const double sum_dxhat = gamma[c] * dbeta[c];
            const double sum_dxhat_xhat = gamma[c] * dgamma[c];
            dr[c] = inv[c] / count * (count * dxhat - sum_dxhat - nr[c] * sum_dxhat_xhat);
            bias_grad[c] += dr[c];
        }
    }
}

// In place: d holds dL/dy of a ReLU output y on entry and dL/dz of the
// pre-norm activation on exit. Fills the norm gradients and the bias
// gradient of the preceding affine layer.
void normed_layer_backward(const BatchNorm& n, const NormTape& tape, Mode mode, const Matrix& y, Matrix& d,
                           BatchNorm& grad, std::vector<double>& bias_grad) {
    const std::size_t rows = d.rows();
    const std::size_t cols = d.cols();
    std::fill(grad.gamma.begin(), grad.gamma.end(), 0.0);
    std::fill(grad.beta.begin(), grad.beta.end(), 0.0);
    std::fill(bias_grad.begin(), bias_grad.end(), 0.0);
    relu_mask_and_norm_grads(d.data(), y.data(), tape.normalized.data(), rows, cols, grad.gamma.data(),
                             grad.beta.data());
    if (mode == Mode::eval) {
        eval_norm_backward(d.data(), rows, cols, n.gamma.data(), tape.inv_std.data(), bias_grad.data());
        return;
    }
    train_norm_backward(d.data(), tape.normalized.data(), rows, cols, n.gamma.data(), tape.inv_std.data(),
                        grad.gamma.data(), grad.beta.data(), bias_grad.data());
}

// Fills dW (and db unless `bias_done`) and returns dX for z = x * W^T + b.
Matrix affine_backward(const Matrix& x, const Linear& l, const Matrix& dz, Linear& grad, bool bias_done) {
    matmul_at(l.out, l.in, x.rows(), dz.data(), x.data(), grad.weight.data());
    if (!bias_done) {
        std::fill(grad.bias.begin(), grad.bias.end(), 0.0);
        add_column_sums(dz.data(), dz.rows(), l.out, grad.bias.data());
    }
    Matrix dx = Matrix::for_overwrite(x.rows(), l.in);
    matmul(x.rows(), l.in, l.out, dz.data(), l.weight.data(), dx.data());
    return dx;
}

}  // namespace

EncoderParams init_encoder(const Architecture& arch, std::mt19937_64& rng) {
    EncoderParams p;
    std::size_t in = 3;
    for (std::size_t w : arch.encoder_widths) {
        p.layers.push_back(init_linear(in, w, rng));
        p.norms.push_back(init_norm(w));
        in = w;
    }
    return p;
}

ClassifierParams init_classifier(const Architecture& arch, std::mt19937_64& rng) {
    ClassifierParams p;
    std::size_t in = arch.feature_dim();
    for (std::size_t w : arch.classifier_widths) {
        p.layers.push_back(init_linear(in, w, rng));
        p.norms.push_back(init_norm(w));
        in = w;
    }
    p.layers.push_back(init_linear(in, arch.classes, rng));
    return p;
}

ProjectorParams init_projector(const Architecture& arch, std::mt19937_64& rng) {
    ProjectorParams p;
    std::size_t in = arch.feature_dim();
    for (std::size_t w : arch.projector_widths) {
        p.layers.push_back(init_linear(in, w, rng));
        in = w;
    }
    return p;
}

Model init_model(const Architecture& arch, Stage stage, std::uint64_t seed, bool with_projector) {
    arch.validate();
    std::mt19937_64 rng(seed);
    Model m;
    m.stage = stage;
    m.arch = arch;
    m.encoder = init_encoder(arch, rng);
    if (with_projector) m.projector = init_projector(arch, rng);
    m.classifier = init_classifier(arch, rng);
    return m;
}

EncoderParams zeros_like(const EncoderParams& p) {
    EncoderParams z;
    for (const auto& l : p.layers) z.layers.push_back(zero_linear(l));
    for (const auto& n : p.norms) z.norms.push_back(zero_norm(n));
    return z;
}

ClassifierParams zeros_like(const ClassifierParams& p) {
    ClassifierParams z;
    for (const auto& l : p.layers) z.layers.push_back(zero_linear(l));
    for (const auto& n : p.norms) z.norms.push_back(zero_norm(n));
    return z;
}

ProjectorParams zeros_like(const ProjectorParams& p) {
    ProjectorParams z;
    for (const auto& l : p.layers) z.layers.push_back(zero_linear(l));
    return z;
}

PointBatch make_batch(std::span<const ResampledStreamline> streamlines) {
    PointBatch batch;
    if (streamlines.empty()) return batch;
    batch.points = streamlines.front().size();
    if (batch.points == 0) throw std::invalid_argument("make_batch: streamline has no points");
    batch.coords.resize(streamlines.size() * batch.points, 3);
    for (std::size_t s = 0; s < streamlines.size(); ++s) {
        if (streamlines[s].size() != batch.points) {
            throw std::invalid_argument("make_batch: streamlines have different point counts");
        }
        for (std::size_t i = 0; i < batch.points; ++i) {
            auto row = batch.coords.row(s * batch.points + i);
            std::copy(streamlines[s][i].begin(), streamlines[s][i].end(), row.begin());
        }
    }
    return batch;
}

EncoderTape encoder_forward(const EncoderParams& p, const PointBatch& x, Mode mode) {
    if (x.count() == 0) throw std::invalid_argument("encode: empty batch");
    if (x.coords.cols() != 3) throw std::invalid_argument("encode: input must have 3 coordinates per point");

    EncoderTape tape;
    tape.mode = mode;
    tape.points = x.points;
    tape.activations.reserve(p.layers.size() + 1);
    tape.norms.resize(p.layers.size());
    tape.activations.push_back(x.coords);
    for (std::size_t l = 0; l < p.layers.size(); ++l) {
        tape.activations.push_back(normed_layer(tape.activations.back(), p.layers[l], p.norms[l], mode,
                                                tape.norms[l], "encoder." + std::to_string(l)));
    }

    const Matrix& act = tape.activations.back();
    const std::size_t count = x.count();
    const std::size_t n = x.points;
    const std::size_t dim = act.cols();
    auto& f = tape.features;
    f.values.resize(count, dim);
    f.argmax.assign(count * dim, 0);
    for (std::size_t b = 0; b < count; ++b) {
        auto best = f.values.row(b);
        std::uint32_t* winner = f.argmax.data() + b * dim;
        const auto first = act.row(b * n);
        std::copy(first.begin(), first.end(), best.begin());
        for (std::size_t i = 1; i < n; ++i) {
            const auto row = act.row(b * n + i);
            for (std::size_t c = 0; c < dim; ++c) {
                if (row[c] > best[c]) {
                    best[c] = row[c];
                    winner[c] = static_cast<std::uint32_t>(i);
                }
            }
        }
    }
    return tape;
}

ClassifierTape classifier_forward(const ClassifierParams& p, const Matrix& g, Mode mode) {
    ClassifierTape tape;
    tape.mode = mode;
    tape.activations.reserve(p.layers.size() + 1);
    tape.norms.resize(p.norms.size());
    tape.activations.push_back(g);
    for (std::size_t l = 0; l < p.layers.size(); ++l) {
        if (l < p.norms.size()) {
            tape.activations.push_back(normed_layer(tape.activations.back(), p.layers[l], p.norms[l], mode,
                                                    tape.norms[l], "classifier." + std::to_string(l)));
        } else {
            Matrix z = affine(tape.activations.back(), p.layers[l]);
            check_finite(z, "classifier logits");
            tape.activations.push_back(std::move(z));
        }
    }
    return tape;
}

ProjectorTape projector_forward(const ProjectorParams& p, const Matrix& g) {
    ProjectorTape tape;
    tape.activations.push_back(g);
    for (std::size_t l = 0; l < p.layers.size(); ++l) {
        Matrix z = affine(tape.activations.back(), p.layers[l]);
        check_finite(z, "projector." + std::to_string(l));
        tape.activations.push_back(std::move(z));
    }
    const Matrix& u = tape.activations.back();
    tape.z.resize(u.rows(), u.cols());
    tape.norms.resize(u.rows());
    for (std::size_t r = 0; r < u.rows(); ++r) {
        const auto row = u.row(r);
        double sq = 0.0;
        for (double v : row) sq += v * v;
        const double norm = std::sqrt(sq);
        if (!(norm > 0.0)) throw NumericalError("projector: zero vector cannot be normalised (degenerate projection)");
        tape.norms[r] = norm;
        auto out = tape.z.row(r);
        for (std::size_t c = 0; c < row.size(); ++c) out[c] = row[c] / norm;
    }
    return tape;
}

namespace {

// In place: row = relu(gamma * (row + bias - mean) * inv + beta), in the
// operation order of normed_layer. Plain restrict pointers keep the loop
// vectorisable.
void norm_relu_rows(double* __restrict z, std::size_t rows, std::size_t cols, const double* __restrict bias,
                    const double* __restrict mean, const double* __restrict inv, const double* __restrict gamma,
                    const double* __restrict beta, double* __restrict probe) {
    for (std::size_t r = 0; r < rows; ++r) {
        double* __restrict row = z + r * cols;
        for (std::size_t c = 0; c < cols; ++c) {
            double v = row[c] + bias[c];
            v = (v - mean[c]) * inv[c];
            probe[c] += v * 0.0;
            v = gamma[c] * v + beta[c];
            row[c] = v > 0.0 ? v : 0.0;
        }
    }
}

// Eval-mode evaluation of a stack of layers over row chunks, so that every
// intermediate activation stays in cache. Bias, normalisation and ReLU run as
// one pass with the same operations, in the same order, as normed_layer and
// affine; results equal the tape-recording forward passes bit for bit.
class EvalStack {
public:
    EvalStack(const std::vector<Linear>& layers, const std::vector<BatchNorm>& norms, std::size_t in,
              std::string prefix)
        : layers_(layers), norms_(norms), prefix_(std::move(prefix)) {
        for (const auto& l : layers) {
            if (l.in != in) throw std::invalid_argument("affine: input width mismatch");
            wt_.push_back(transposed_weight(l));
            in = l.out;
        }
        for (const auto& n : norms) {
            std::vector<double> inv;
            for (double v : n.running_var) inv.push_back(1.0 / std::sqrt(v + kNormEpsilon));
            inv_std_.push_back(std::move(inv));
        }
        act_.resize(layers.size() + 1);
    }

    // Runs `rows` input rows through every layer; returns the last output.
    const Matrix& run(const double* input, std::size_t rows) {
        act_[0].reshape_for_overwrite(rows, layers_.front().in);
        std::copy_n(input, rows * layers_.front().in, act_[0].data());
        for (std::size_t l = 0; l < layers_.size(); ++l) {
            const Linear& lin = layers_[l];
            Matrix& z = act_[l + 1];
            z.reshape_for_overwrite(rows, lin.out);
            matmul(rows, lin.out, lin.in, act_[l].data(), wt_[l].data(), z.data());
            const std::size_t cols = lin.out;
            double* const base = z.data();
            if (l >= norms_.size()) {
                const double* __restrict bias = lin.bias.data();
                for (std::size_t r = 0; r < rows; ++r) {
                    double* __restrict row = base + r * cols;
                    for (std::size_t c = 0; c < cols; ++c) row[c] += bias[c];
                }
                continue;
            }
            const BatchNorm& bn = norms_[l];
            std::vector<double> probe(cols, 0.0);
            norm_relu_rows(base, rows, cols, lin.bias.data(), bn.running_mean.data(), inv_std_[l].data(),
                           bn.gamma.data(), bn.beta.data(), probe.data());
            require_finite(probe, prefix_ + std::to_string(l));
        }
        return act_.back();
    }

private:
    const std::vector<Linear>& layers_;
    const std::vector<BatchNorm>& norms_;
    std::string prefix_;
    std::vector<Matrix> wt_;
    std::vector<std::vector<double>> inv_std_;
    std::vector<Matrix> act_;
};

}  // namespace

GlobalFeatures encode(const EncoderParams& p, const PointBatch& x) {
    if (x.count() == 0) throw std::invalid_argument("encode: empty batch");
    if (x.coords.cols() != 3) throw std::invalid_argument("encode: input must have 3 coordinates per point");
    constexpr std::size_t chunk = 32;  // streamlines
    EvalStack stack(p.layers, p.norms, 3, "encoder.");

    const std::size_t count = x.count();
    const std::size_t n = x.points;
    const std::size_t dim = p.layers.back().out;
    GlobalFeatures out;
    out.values.resize(count, dim);
    out.argmax.assign(count * dim, 0);
    for (std::size_t first = 0; first < count; first += chunk) {
        const std::size_t len = std::min(chunk, count - first);
        const Matrix& last = stack.run(x.coords.data() + first * n * 3, len * n);
        for (std::size_t b = 0; b < len; ++b) {
            auto best = out.values.row(first + b);
            std::uint32_t* winner = out.argmax.data() + (first + b) * dim;
            const auto head = last.row(b * n);
            std::copy(head.begin(), head.end(), best.begin());
            for (std::size_t i = 1; i < n; ++i) {
                const auto row = last.row(b * n + i);
                for (std::size_t c = 0; c < dim; ++c) {
                    if (row[c] > best[c]) {
                        best[c] = row[c];
                        winner[c] = static_cast<std::uint32_t>(i);
                    }
                }
            }
        }
    }
    return out;
}

Matrix classify(const ClassifierParams& p, const Matrix& g) {
    constexpr std::size_t chunk = 256;  // rows
    EvalStack stack(p.layers, p.norms, g.cols(), "classifier.");
    Matrix out = Matrix::for_overwrite(g.rows(), p.classes());
    for (std::size_t first = 0; first < g.rows(); first += chunk) {
        const std::size_t len = std::min(chunk, g.rows() - first);
        const Matrix& logits = stack.run(g.data() + first * g.cols(), len);
        std::copy_n(logits.data(), logits.values().size(), out.data() + first * out.cols());
    }
    check_finite(out, "classifier logits");
    return out;
}

Matrix project(const ProjectorParams& p, const Matrix& g) {
    return std::move(projector_forward(p, g).z);
}

GlobalFeatures encode_train(EncoderParams& p, const PointBatch& x) {
    EncoderTape tape = encoder_forward(p, x, Mode::train);
    update_running_stats(p.norms, tape.norms, x.coords.rows());
    return std::move(tape.features);
}

void update_running_stats(std::vector<BatchNorm>& norms, const std::vector<NormTape>& tapes, std::size_t rows) {
    const double unbias = rows > 1 ? static_cast<double>(rows) / static_cast<double>(rows - 1) : 1.0;
    for (std::size_t l = 0; l < norms.size() && l < tapes.size(); ++l) {
        auto& n = norms[l];
        const auto& t = tapes[l];
        if (t.batch_mean.empty()) continue;
        for (std::size_t c = 0; c < n.running_mean.size(); ++c) {
            n.running_mean[c] = (1.0 - kNormMomentum) * n.running_mean[c] + kNormMomentum * t.batch_mean[c];
            n.running_var[c] = (1.0 - kNormMomentum) * n.running_var[c] + kNormMomentum * t.batch_var[c] * unbias;
        }
    }
}

std::vector<std::uint32_t> predict(const Matrix& logits) {
    std::vector<std::uint32_t> out(logits.rows(), 0);
    for (std::size_t r = 0; r < logits.rows(); ++r) {
        const auto row = logits.row(r);
        std::size_t best = 0;
        for (std::size_t c = 1; c < row.size(); ++c) {
            if (row[c] > row[best]) best = c;
        }
        out[r] = static_cast<std::uint32_t>(best);
    }
    return out;
}

Matrix encoder_backward(const EncoderParams& p, const EncoderTape& tape, const Matrix& d_features,
                        EncoderParams& grads) {
    const std::size_t count = tape.features.count();
    const std::size_t n = tape.points;
    const Matrix& last = tape.activations.back();
    const std::size_t dim = last.cols();
    if (d_features.rows() != count || d_features.cols() != dim) {
        throw std::invalid_argument("encoder_backward: gradient shape mismatch");
    }

    // Max-pool routes each pooled gradient to its winning point only.
    Matrix d_act(last.rows(), dim);
    for (std::size_t b = 0; b < count; ++b) {
        const auto dg = d_features.row(b);
        const std::uint32_t* winner = tape.features.argmax.data() + b * dim;
        for (std::size_t c = 0; c < dim; ++c) d_act(b * n + winner[c], c) = dg[c];
    }

    for (std::size_t l = p.layers.size(); l-- > 0;) {
        normed_layer_backward(p.norms[l], tape.norms[l], tape.mode, tape.activations[l + 1], d_act, grads.norms[l],
                              grads.layers[l].bias);
        d_act = affine_backward(tape.activations[l], p.layers[l], d_act, grads.layers[l], true);
    }
    return d_act;
}

Matrix classifier_backward(const ClassifierParams& p, const ClassifierTape& tape, const Matrix& d_logits,
                           ClassifierParams& grads) {
    Matrix d = d_logits;
    for (std::size_t l = p.layers.size(); l-- > 0;) {
        const bool normed = l < p.norms.size();
        if (normed) {
            normed_layer_backward(p.norms[l], tape.norms[l], tape.mode, tape.activations[l + 1], d, grads.norms[l],
                                  grads.layers[l].bias);
        }
        d = affine_backward(tape.activations[l], p.layers[l], d, grads.layers[l], normed);
    }
    return d;
}

Matrix projector_backward(const ProjectorParams& p, const ProjectorTape& tape, const Matrix& d_z,
                          ProjectorParams& grads) {
    // z = u / |u|  =>  du = (dz - z (z . dz)) / |u|
    Matrix d(d_z.rows(), d_z.cols());
    for (std::size_t r = 0; r < d_z.rows(); ++r) {
        const auto dz = d_z.row(r);
        const auto z = tape.z.row(r);
        double dot = 0.0;
        for (std::size_t c = 0; c < dz.size(); ++c) dot += z[c] * dz[c];
        auto out = d.row(r);
        for (std::size_t c = 0; c < dz.size(); ++c) out[c] = (dz[c] - z[c] * dot) / tape.norms[r];
    }
    for (std::size_t l = p.layers.size(); l-- > 0;) {
        d = affine_backward(tape.activations[l], p.layers[l], d, grads.layers[l], false);
    }
    return d;
}

}  // namespace swm
