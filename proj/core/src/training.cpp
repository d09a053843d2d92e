#include "swm/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include "swm/evaluation.hpp"
#include "swm/losses.hpp"
#include "swm/pipeline.hpp"

namespace swm {

void TrainingConfig::validate() const {
    if (!(lr_stage_one > 0.0) || !(lr_contrastive > 0.0) || !(lr_downstream > 0.0)) {
        throw std::invalid_argument("training: learning rates must be positive");
    }
    if (!(temperature > 0.0)) throw std::invalid_argument("training: temperature must be positive");
    if (batch_stage_one < 1 || batch_downstream < 1) throw std::invalid_argument("training: batch sizes must be positive");
    if (batch_contrastive < 1) throw std::invalid_argument("training: contrastive batch size must be positive");
    arch.validate();
}

PointBatch gather(const PointBatch& all, std::span<const std::size_t> indices) {
    PointBatch out;
    out.points = all.points;
    out.coords.resize(indices.size() * all.points, all.coords.cols());
    const std::size_t stride = all.points * all.coords.cols();
    for (std::size_t j = 0; j < indices.size(); ++j) {
        std::copy_n(all.coords.data() + indices[j] * stride, stride, out.coords.data() + j * stride);
    }
    return out;
}

PointBatch with_bilateral_copies(const PointBatch& batch) {
    PointBatch out;
    out.points = batch.points;
    const std::size_t rows = batch.coords.rows();
    out.coords.resize(2 * rows, 3);
    std::copy_n(batch.coords.data(), rows * 3, out.coords.data());
    for (std::size_t r = 0; r < rows; ++r) {
        out.coords(rows + r, 0) = -batch.coords(r, 0);
        out.coords(rows + r, 1) = batch.coords(r, 1);
        out.coords(rows + r, 2) = batch.coords(r, 2);
    }
    return out;
}

Gradients backprop_cross_entropy(const EncoderParams& encoder, const ClassifierParams& classifier,
                                 const PointBatch& batch, std::span<const std::uint32_t> labels, Mode mode) {
    EncoderTape et = encoder_forward(encoder, batch, mode);
    ClassifierTape ct = classifier_forward(classifier, et.features.values, mode);
    LossResult loss = cross_entropy_loss(ct.logits(), labels);

    Gradients out;
    out.loss = loss.loss;
    out.classifier = zeros_like(classifier);
    const Matrix d_features = classifier_backward(classifier, ct, loss.gradient, *out.classifier);
    out.encoder = zeros_like(encoder);
    out.input = encoder_backward(encoder, et, d_features, *out.encoder);
    out.output = std::move(ct.activations.back());
    out.encoder_norms = std::move(et.norms);
    out.classifier_norms = std::move(ct.norms);
    return out;
}

Gradients backprop_supcon(const EncoderParams& encoder, const ProjectorParams& projector, const PointBatch& batch,
                          std::span<const std::uint32_t> labels, double temperature, Mode mode) {
    EncoderTape et = encoder_forward(encoder, batch, mode);
    ProjectorTape pt = projector_forward(projector, et.features.values);
    LossResult loss = supcon_loss(pt.z, labels, temperature);

    Gradients out;
    out.loss = loss.loss;
    out.projector = zeros_like(projector);
    const Matrix d_features = projector_backward(projector, pt, loss.gradient, *out.projector);
    out.encoder = zeros_like(encoder);
    out.input = encoder_backward(encoder, et, d_features, *out.encoder);
    out.output = std::move(pt.z);
    out.encoder_norms = std::move(et.norms);
    return out;
}

Gradients backprop_classifier(const ClassifierParams& classifier, const Matrix& features,
                              std::span<const std::uint32_t> labels, Mode mode) {
    ClassifierTape ct = classifier_forward(classifier, features, mode);
    LossResult loss = cross_entropy_loss(ct.logits(), labels);
    Gradients out;
    out.loss = loss.loss;
    out.classifier = zeros_like(classifier);
    out.input = classifier_backward(classifier, ct, loss.gradient, *out.classifier);
    out.output = std::move(ct.activations.back());
    out.classifier_norms = std::move(ct.norms);
    return out;
}

void check_gradients(const Gradients& grads) {
    auto check = [](const auto& params, const std::string& prefix) {
        for_each_block(const_cast<std::remove_cvref_t<decltype(params)>&>(params), prefix,
                       [](const std::string& name, const auto&, std::span<double> values, bool trainable) {
                           if (!trainable) return;
                           for (double v : values) {
                               if (!std::isfinite(v)) throw NumericalError("non-finite gradient in " + name);
                           }
                       });
    };
    if (grads.encoder) check(*grads.encoder, "encoder");
    if (grads.projector) check(*grads.projector, "projector");
    if (grads.classifier) check(*grads.classifier, "classifier");
}

namespace {

struct Validation {
    const LabeledDataset* data = nullptr;
    PointBatch batch;
};

std::vector<std::size_t> shuffled(std::size_t n, std::mt19937_64& rng) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::shuffle(idx.begin(), idx.end(), rng);
    return idx;
}

std::vector<std::uint32_t> labels_of(std::span<const std::uint32_t> labels, std::span<const std::size_t> idx) {
    std::vector<std::uint32_t> out(idx.size());
    for (std::size_t j = 0; j < idx.size(); ++j) out[j] = labels[idx[j]];
    return out;
}

std::size_t hits(const Matrix& logits, std::span<const std::uint32_t> labels) {
    const auto pred = predict(logits);
    std::size_t n = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) n += pred[i] == labels[i];
    return n;
}

template <class... Params>
std::vector<std::span<double>> concat_blocks(Params&... params) {
    std::vector<std::span<double>> out;
    (
        [&] {
            auto b = trainable_blocks(params);
            out.insert(out.end(), b.begin(), b.end());
        }(),
        ...);
    return out;
}

std::vector<std::span<const double>> as_const(const std::vector<std::span<double>>& v) {
    return {v.begin(), v.end()};
}

void finish_epoch(TrainResult& result, EpochRecord record, const TrainingConfig& cfg) {
    if (cfg.on_epoch) cfg.on_epoch(record);
    result.history.push_back(std::move(record));
}

PointBatch resampled_batch(const LabeledDataset& d, std::size_t n) {
    return make_batch(resample_all(d.streamlines, n));
}

void require_all_classes(const LabeledDataset& d, TrainResult& result, bool fatal) {
    const auto counts = class_counts(d.labels, d.num_classes);
    for (std::size_t c = 0; c < counts.size(); ++c) {
        if (counts[c] != 0) continue;
        const std::string msg = "class " + std::to_string(c) + " has no training streamlines";
        if (fatal) throw std::invalid_argument("training: " + msg);
        result.warnings.push_back(msg + "; its metrics may be undefined");
    }
}

// Encoder and classifier trained jointly with cross-entropy (stage one and the
// cross-entropy-only stage-two ablation).
void train_jointly(TrainResult& result, const PointBatch& all, std::span<const std::uint32_t> labels,
                   const Validation& val, const TrainingConfig& cfg, const std::string& phase, double lr,
                   std::size_t batch_size, std::size_t epochs, std::mt19937_64& rng) {
    Model& model = result.model;
    OptimizerState state;
    const std::size_t k = model.classifier.classes();
    double best_f1 = -1.0;
    Model best = model;

    for (std::size_t epoch = 1; epoch <= epochs; ++epoch) {
        const auto order = shuffled(all.count(), rng);
        double loss_sum = 0.0;
        std::size_t correct = 0;
        for (std::size_t first = 0; first < order.size(); first += batch_size) {
            const auto idx = std::span(order).subspan(first, std::min(batch_size, order.size() - first));
            const PointBatch xb = gather(all, idx);
            const auto yb = labels_of(labels, idx);
            Gradients g = backprop_cross_entropy(model.encoder, model.classifier, xb, yb, Mode::train);
            check_gradients(g);
            const auto params = concat_blocks(model.encoder, model.classifier);
            const auto grads = concat_blocks(*g.encoder, *g.classifier);
            adam_step(params, as_const(grads), state, lr);
            update_running_stats(model.encoder.norms, g.encoder_norms, xb.coords.rows());
            update_running_stats(model.classifier.norms, g.classifier_norms, idx.size());
            loss_sum += g.loss * static_cast<double>(idx.size());
            correct += hits(g.output, yb);
        }

        EpochRecord record;
        record.phase = phase;
        record.epoch = epoch;
        record.loss = loss_sum / static_cast<double>(order.size());
        record.train_accuracy = static_cast<double>(correct) / static_cast<double>(order.size());
        if (val.data) {
            const auto pred = predict(classify(model.classifier, encode(model.encoder, val.batch).values));
            record.val_accuracy = accuracy(pred, val.data->labels);
            record.val_macro_f1 = macro_f1(pred, val.data->labels, k).mean;
            if (*record.val_macro_f1 > best_f1) {
                best_f1 = *record.val_macro_f1;
                best = model;
                result.best_epoch = epoch;
            }
        }
        finish_epoch(result, std::move(record), cfg);
    }
    if (val.data && epochs > 0) model = std::move(best);
}

Validation make_validation(const LabeledDataset* data, std::size_t n, std::uint32_t classes) {
    Validation v;
    if (!data || data->size() == 0) return v;
    data->validate();
    if (data->num_classes != classes) throw std::invalid_argument("training: validation set has a different class count");
    v.data = data;
    v.batch = resampled_batch(*data, n);
    return v;
}

}  // namespace

TrainResult train_stage_one(const LabeledDataset& d1, const TrainingConfig& cfg, const LabeledDataset* validation) {
    cfg.validate();
    d1.validate();
    if (d1.num_classes != 2) throw std::invalid_argument("train_stage_one: labels must be binary (DWM = 0, SWM = 1)");
    TrainResult result;
    require_all_classes(d1, result, /*fatal=*/true);

    Architecture arch = cfg.arch;
    arch.classes = 2;
    result.model = init_model(arch, Stage::one, cfg.seed);
    std::mt19937_64 rng(cfg.seed + 1);

    const PointBatch all = resampled_batch(d1, arch.points);
    const Validation val = make_validation(validation, arch.points, 2);
    train_jointly(result, all, d1.labels, val, cfg, "stage_one", cfg.lr_stage_one, cfg.batch_stage_one,
                  cfg.epochs_stage_one, rng);
    return result;
}

TrainResult train_stage_two(const LabeledDataset& d2, const TrainingConfig& cfg, const LabeledDataset* validation,
                            StageTwoMethod method) {
    cfg.validate();
    d2.validate();
    if (d2.num_classes < 2 || d2.num_classes % 2 != 0) {
        throw std::invalid_argument("train_stage_two: class count must be 2K (clusters then outliers)");
    }
    TrainResult result;
    require_all_classes(d2, result, /*fatal=*/false);

    Architecture arch = cfg.arch;
    arch.classes = d2.num_classes;
    const bool contrastive = method == StageTwoMethod::contrastive;
    result.model = init_model(arch, Stage::two, cfg.seed, contrastive);
    std::mt19937_64 rng(cfg.seed + 2);

    const PointBatch all = resampled_batch(d2, arch.points);
    const Validation val = make_validation(validation, arch.points, d2.num_classes);

    if (!contrastive) {
        train_jointly(result, all, d2.labels, val, cfg, "cross_entropy", cfg.lr_stage_one, cfg.batch_stage_one,
                      cfg.epochs_stage_one, rng);
        return result;
    }

    Model& model = result.model;

    // Phase A: encoder + projector, supervised contrastive loss with bilateral copies.
    {
        OptimizerState state;
        for (std::size_t epoch = 1; epoch <= cfg.epochs_contrastive; ++epoch) {
            const auto order = shuffled(all.count(), rng);
            double loss_sum = 0.0;
            std::size_t items = 0;
            for (std::size_t first = 0; first < order.size(); first += cfg.batch_contrastive) {
                const auto idx = std::span(order).subspan(first, std::min(cfg.batch_contrastive, order.size() - first));
                const PointBatch xb = with_bilateral_copies(gather(all, idx));
                auto yb = labels_of(d2.labels, idx);
                yb.insert(yb.end(), yb.begin(), yb.end());
                Gradients g = backprop_supcon(model.encoder, *model.projector, xb, yb, cfg.temperature, Mode::train);
                check_gradients(g);
                const auto params = concat_blocks(model.encoder, *model.projector);
                const auto grads = concat_blocks(*g.encoder, *g.projector);
                adam_step(params, as_const(grads), state, cfg.lr_contrastive);
                update_running_stats(model.encoder.norms, g.encoder_norms, xb.coords.rows());
                loss_sum += g.loss;
                items += yb.size();
            }
            EpochRecord record;
            record.phase = "contrastive";
            record.epoch = epoch;
            record.loss = items ? loss_sum / static_cast<double>(items) : 0.0;
            finish_epoch(result, std::move(record), cfg);
        }
    }

    // Phase B: frozen encoder, classifier trained on eval-mode features.
    {
        const Matrix features = encode(model.encoder, all).values;
        Matrix val_features;
        if (val.data) val_features = encode(model.encoder, val.batch).values;

        OptimizerState state;
        const std::size_t k = model.classifier.classes();
        double best_f1 = -1.0;
        ClassifierParams best = model.classifier;
        for (std::size_t epoch = 1; epoch <= cfg.epochs_downstream; ++epoch) {
            const auto order = shuffled(all.count(), rng);
            double loss_sum = 0.0;
            std::size_t correct = 0;
            Matrix fb;
            for (std::size_t first = 0; first < order.size(); first += cfg.batch_downstream) {
                const auto idx = std::span(order).subspan(first, std::min(cfg.batch_downstream, order.size() - first));
                fb.resize(idx.size(), features.cols());
                for (std::size_t j = 0; j < idx.size(); ++j) {
                    const auto src = features.row(idx[j]);
                    std::copy(src.begin(), src.end(), fb.row(j).begin());
                }
                const auto yb = labels_of(d2.labels, idx);
                Gradients g = backprop_classifier(model.classifier, fb, yb, Mode::train);
                check_gradients(g);
                const auto params = concat_blocks(model.classifier);
                const auto grads = concat_blocks(*g.classifier);
                adam_step(params, as_const(grads), state, cfg.lr_downstream);
                update_running_stats(model.classifier.norms, g.classifier_norms, idx.size());
                loss_sum += g.loss * static_cast<double>(idx.size());
                correct += hits(g.output, yb);
            }
            EpochRecord record;
            record.phase = "downstream";
            record.epoch = epoch;
            record.loss = loss_sum / static_cast<double>(order.size());
            record.train_accuracy = static_cast<double>(correct) / static_cast<double>(order.size());
            if (val.data) {
                const auto pred = predict(classify(model.classifier, val_features));
                record.val_accuracy = accuracy(pred, val.data->labels);
                record.val_macro_f1 = macro_f1(pred, val.data->labels, k).mean;
                if (*record.val_macro_f1 > best_f1) {
                    best_f1 = *record.val_macro_f1;
                    best = model.classifier;
                    result.best_epoch = epoch;
                }
            }
            finish_epoch(result, std::move(record), cfg);
        }
        if (val.data && cfg.epochs_downstream > 0) model.classifier = std::move(best);
    }
    return result;
}

}  // namespace swm
