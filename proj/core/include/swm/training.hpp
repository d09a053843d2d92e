#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "swm/dataset.hpp"
#include "swm/network.hpp"
#include "swm/optimizer.hpp"

namespace swm {

struct EpochRecord {
    std::string phase;  // "stage_one", "contrastive", "downstream", "cross_entropy"
    std::size_t epoch = 0;
    double loss = 0.0;
    std::optional<double> train_accuracy;
    std::optional<double> val_accuracy;
    std::optional<double> val_macro_f1;
};

/// Hyperparameters for both stages. Defaults follow the published recipe;
/// epoch counts (not published) default to 50 / 100 / 50.
struct TrainingConfig {
    Architecture arch;  // `classes` is overwritten by the stage being trained

    double lr_stage_one = 1e-3;
    double lr_contrastive = 1e-2;
    double lr_downstream = 1e-3;

    std::size_t batch_stage_one = 1024;
    std::size_t batch_contrastive = 3072;  // before the bilateral copy doubles it
    std::size_t batch_downstream = 1024;

    std::size_t epochs_stage_one = 50;
    std::size_t epochs_contrastive = 100;
    std::size_t epochs_downstream = 50;

    double temperature = 0.1;
    std::uint64_t seed = 0;

    /// Called after every epoch; not part of the configuration proper.
    std::function<void(const EpochRecord&)> on_epoch;

    /// Throws std::invalid_argument on non-positive rates, temperature, or
    /// batch sizes.
    void validate() const;
};

struct TrainResult {
    Model model;
    std::vector<EpochRecord> history;
    std::vector<std::string> warnings;
    std::optional<std::size_t> best_epoch;  // of the checkpointed phase, when validation data was given
};

enum class StageTwoMethod {
    contrastive,    // supervised contrastive pre-training, then a frozen-encoder classifier
    cross_entropy,  // ablation: encoder and classifier trained jointly with cross-entropy
};

/// Encoder + classifier (k = 2) trained with cross-entropy. Labels must be
/// kDwmLabel / kSwmLabel and both classes present. With validation data the
/// parameters of the epoch with the best validation macro F1 are returned.
TrainResult train_stage_one(const LabeledDataset& d1, const TrainingConfig& cfg,
                            const LabeledDataset* validation = nullptr);

/// Stage two over 2K classes (K clusters, then K outlier classes).
///
/// Contrastive method: phase A trains encoder + projector with the
/// supervised contrastive loss on batches where every sampled streamline is
/// accompanied by its midsagittal mirror under the same label; phase B
/// freezes the encoder (weights and statistics) and trains the classifier
/// on its eval-mode features with cross-entropy.
TrainResult train_stage_two(const LabeledDataset& d2, const TrainingConfig& cfg,
                            const LabeledDataset* validation = nullptr,
                            StageTwoMethod method = StageTwoMethod::contrastive);

// ---------------------------------------------------------------------------
// Loss/gradient compositions. Each runs one forward and one backward pass and
// leaves the parameters untouched; running-statistic updates are returned in
// the norm tapes for the caller to apply.

struct Gradients {
    double loss = 0.0;
    std::optional<EncoderParams> encoder;
    std::optional<ClassifierParams> classifier;
    std::optional<ProjectorParams> projector;
    Matrix input;   // d loss / d input coordinates (or features for the classifier-only composition)
    Matrix output;  // logits or contrastive features of the forward pass
    std::vector<NormTape> encoder_norms;
    std::vector<NormTape> classifier_norms;
};

/// Encoder -> classifier -> cross-entropy.
Gradients backprop_cross_entropy(const EncoderParams& encoder, const ClassifierParams& classifier,
                                 const PointBatch& batch, std::span<const std::uint32_t> labels,
                                 Mode mode = Mode::train);

/// Encoder -> projector -> supervised contrastive loss.
Gradients backprop_supcon(const EncoderParams& encoder, const ProjectorParams& projector, const PointBatch& batch,
                          std::span<const std::uint32_t> labels, double temperature, Mode mode = Mode::train);

/// Classifier on fixed features -> cross-entropy (the encoder is frozen).
Gradients backprop_classifier(const ClassifierParams& classifier, const Matrix& features,
                              std::span<const std::uint32_t> labels, Mode mode = Mode::train);

/// Throws NumericalError naming the first block holding a NaN or infinity.
void check_gradients(const Gradients& grads);

/// Rows of `all` for the given streamline indices.
PointBatch gather(const PointBatch& all, std::span<const std::size_t> indices);

/// Appends the midsagittal mirror of every streamline after the originals.
PointBatch with_bilateral_copies(const PointBatch& batch);

}  // namespace swm
