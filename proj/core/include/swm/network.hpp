#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "swm/geometry.hpp"
#include "swm/matrix.hpp"

namespace swm {

enum class Mode { train, eval };

/// Batch-normalisation constants shared by every normalised layer.
inline constexpr double kNormEpsilon = 1e-5;
inline constexpr double kNormMomentum = 0.1;

/// Raised when a forward or backward pass produces a NaN or infinity. The
/// message names the offending layer or parameter block.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Layer widths of the point-set network. Defaults are the full-size
/// architecture; tests shrink every dimension.
struct Architecture {
    std::size_t points = 15;
    std::vector<std::size_t> encoder_widths{64, 128, 1024};
    std::vector<std::size_t> classifier_widths{512, 256};
    std::size_t classes = 2;
    std::vector<std::size_t> projector_widths{1024, 128};

    std::size_t feature_dim() const { return encoder_widths.back(); }
    std::size_t projection_dim() const { return projector_widths.back(); }

    /// Throws std::invalid_argument on an unusable description.
    void validate() const;

    friend bool operator==(const Architecture&, const Architecture&) = default;
};

struct Linear {
    std::size_t in = 0;
    std::size_t out = 0;
    std::vector<double> weight;  // out x in, row-major
    std::vector<double> bias;    // out

    friend bool operator==(const Linear&, const Linear&) = default;
};

struct BatchNorm {
    std::vector<double> gamma;
    std::vector<double> beta;
    std::vector<double> running_mean;
    std::vector<double> running_var;

    friend bool operator==(const BatchNorm&, const BatchNorm&) = default;
};

/// Shared per-point MLP; every layer is affine -> batch norm -> ReLU.
struct EncoderParams {
    std::vector<Linear> layers;
    std::vector<BatchNorm> norms;

    friend bool operator==(const EncoderParams&, const EncoderParams&) = default;
};

/// Fully connected head. All layers but the last are followed by batch norm
/// and ReLU; the last produces raw logits.
struct ClassifierParams {
    std::vector<Linear> layers;
    std::vector<BatchNorm> norms;

    std::size_t classes() const { return layers.empty() ? 0 : layers.back().out; }

    friend bool operator==(const ClassifierParams&, const ClassifierParams&) = default;
};

/// Two affine maps followed by projection onto the unit sphere.
struct ProjectorParams {
    std::vector<Linear> layers;

    friend bool operator==(const ProjectorParams&, const ProjectorParams&) = default;
};

enum class Stage : std::uint8_t { one = 1, two = 2 };

struct Model {
    Stage stage = Stage::one;
    Architecture arch;
    EncoderParams encoder;
    ClassifierParams classifier;
    std::optional<ProjectorParams> projector;

    friend bool operator==(const Model&, const Model&) = default;
};

EncoderParams init_encoder(const Architecture& arch, std::mt19937_64& rng);
ClassifierParams init_classifier(const Architecture& arch, std::mt19937_64& rng);
ProjectorParams init_projector(const Architecture& arch, std::mt19937_64& rng);
Model init_model(const Architecture& arch, Stage stage, std::uint64_t seed, bool with_projector = false);

/// Same shapes as the argument, every value zero (used for gradients).
EncoderParams zeros_like(const EncoderParams& p);
ClassifierParams zeros_like(const ClassifierParams& p);
ProjectorParams zeros_like(const ProjectorParams& p);

/// Visits every named parameter block. `f(name, dims, values, trainable)`;
/// running statistics are reported with trainable == false.
template <class Params, class F>
void for_each_block(Params& params, const std::string& prefix, F&& f);

// ---------------------------------------------------------------------------
// Batches and forward passes

/// Resampled streamlines stacked as (count * points) x 3 coordinates.
struct PointBatch {
    std::size_t points = 0;
    Matrix coords;

    std::size_t count() const { return points == 0 ? 0 : coords.rows() / points; }
};

PointBatch make_batch(std::span<const ResampledStreamline> streamlines);

/// Max-pooled streamline embeddings plus, per dimension, the index of the
/// winning point (lowest index on ties).
struct GlobalFeatures {
    Matrix values;                       // count x feature_dim
    std::vector<std::uint32_t> argmax;   // count x feature_dim, row-major

    std::size_t count() const { return values.rows(); }
};

struct NormTape {
    Matrix normalized;
    std::vector<double> inv_std;
    std::vector<double> batch_mean;  // train mode only
    std::vector<double> batch_var;   // biased; train mode only
};

struct EncoderTape {
    Mode mode = Mode::eval;
    std::size_t points = 0;
    std::vector<Matrix> activations;  // [0] = input coords, [l + 1] = output of layer l
    std::vector<NormTape> norms;
    GlobalFeatures features;
};

struct ClassifierTape {
    Mode mode = Mode::eval;
    std::vector<Matrix> activations;  // [0] = g, last = logits
    std::vector<NormTape> norms;

    const Matrix& logits() const { return activations.back(); }
};

struct ProjectorTape {
    std::vector<Matrix> activations;  // [0] = g, last = unnormalised projection
    std::vector<double> norms;        // per-row Euclidean norm of the last activation
    Matrix z;                         // unit-norm outputs
};

EncoderTape encoder_forward(const EncoderParams& p, const PointBatch& x, Mode mode);
ClassifierTape classifier_forward(const ClassifierParams& p, const Matrix& g, Mode mode);
ProjectorTape projector_forward(const ProjectorParams& p, const Matrix& g);

/// Eval-mode conveniences.
GlobalFeatures encode(const EncoderParams& p, const PointBatch& x);
Matrix classify(const ClassifierParams& p, const Matrix& g);
Matrix project(const ProjectorParams& p, const Matrix& g);

/// Train-mode forward that also folds the batch statistics into the running
/// statistics (momentum kNormMomentum, unbiased variance).
GlobalFeatures encode_train(EncoderParams& p, const PointBatch& x);

/// Applies the running-statistics update recorded in a train-mode tape.
void update_running_stats(std::vector<BatchNorm>& norms, const std::vector<NormTape>& tapes,
                          std::size_t rows);

/// Lowest-index argmax of each row.
std::vector<std::uint32_t> predict(const Matrix& logits);

// ---------------------------------------------------------------------------
// Reverse mode. Gradients are written (not accumulated) into `grads`, which
// must have the shapes of the parameters. The return value is the gradient
// with respect to the layer input.

Matrix encoder_backward(const EncoderParams& p, const EncoderTape& tape, const Matrix& d_features,
                        EncoderParams& grads);
Matrix classifier_backward(const ClassifierParams& p, const ClassifierTape& tape, const Matrix& d_logits,
                           ClassifierParams& grads);
Matrix projector_backward(const ProjectorParams& p, const ProjectorTape& tape, const Matrix& d_z,
                          ProjectorParams& grads);

// ---------------------------------------------------------------------------

namespace detail {

template <class LinearT, class F>
void visit_linear(LinearT& l, const std::string& name, F& f) {
    f(name + ".weight", std::vector<std::uint32_t>{static_cast<std::uint32_t>(l.out), static_cast<std::uint32_t>(l.in)},
      std::span(l.weight), true);
    f(name + ".bias", std::vector<std::uint32_t>{static_cast<std::uint32_t>(l.out)}, std::span(l.bias), true);
}

template <class NormT, class F>
void visit_norm(NormT& n, const std::string& name, F& f) {
    const std::vector<std::uint32_t> dims{static_cast<std::uint32_t>(n.gamma.size())};
    f(name + ".gamma", dims, std::span(n.gamma), true);
    f(name + ".beta", dims, std::span(n.beta), true);
    f(name + ".running_mean", dims, std::span(n.running_mean), false);
    f(name + ".running_var", dims, std::span(n.running_var), false);
}

}  // namespace detail

template <class Params, class F>
void for_each_block(Params& params, const std::string& prefix, F&& f) {
    for (std::size_t i = 0; i < params.layers.size(); ++i) {
        const std::string name = prefix + "." + std::to_string(i);
        detail::visit_linear(params.layers[i], name, f);
        if constexpr (requires { params.norms; }) {
            if (i < params.norms.size()) detail::visit_norm(params.norms[i], name + ".norm", f);
        }
    }
}

}  // namespace swm
