#include "commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <stdexcept>

#include "swm/evaluation.hpp"
#include "swm/flops.hpp"
#include "swm/formats.hpp"
#include "swm/model_io.hpp"

namespace swm::cli {

namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

class Stopwatch {
public:
    Json timing(std::size_t streamlines) const {
        const double seconds = std::chrono::duration<double>(Clock::now() - start_).count();
        Json t;
        t["wall_seconds"] = seconds;
        t["streamlines"] = streamlines;
        t["streamlines_per_second"] = seconds > 0.0 ? static_cast<double>(streamlines) / seconds : 0.0;
        return t;
    }

private:
    Clock::time_point start_ = Clock::now();
};

Json summary(const Provenance& p, Json outputs, const Stopwatch& watch, std::size_t streamlines) {
    Json s;
    s["provenance"] = p.to_json();
    s["outputs"] = std::move(outputs);
    s["timing"] = watch.timing(streamlines);
    return s;
}

void write_json(const std::string& path, const Json& j) { write_text(path, j.dump(2) + "\n"); }

std::string hex(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

Json optional_json(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

Json history_json(const TrainResult& r) {
    Json h = Json::array();
    for (const auto& e : r.history) {
        Json row;
        row["phase"] = e.phase;
        row["epoch"] = e.epoch;
        row["loss"] = e.loss;
        row["train_accuracy"] = optional_json(e.train_accuracy);
        row["val_accuracy"] = optional_json(e.val_accuracy);
        row["val_macro_f1"] = optional_json(e.val_macro_f1);
        h.push_back(std::move(row));
    }
    return h;
}

Json spec_json(const SyntheticAtlasSpec& s) {
    Json j;
    j["clusters"] = s.clusters;
    j["per_cluster"] = s.per_cluster;
    j["outlier_fraction"] = s.outlier_fraction;
    j["outliers_per_cluster"] = s.outliers_per_cluster();
    j["dwm"] = s.dwm;
    j["sigma"] = s.sigma;
    j["outlier_sigma"] = s.outlier_sigma;
    j["min_length"] = s.min_length;
    j["bilateral"] = s.bilateral;
    j["seed"] = s.seed;
    return j;
}

std::uint64_t model_checksum(const Model& m) {
    const auto bytes = serialize_model(m);
    return fnv1a(std::as_bytes(std::span(bytes)));
}

LabeledDataset load_optional_validation(const std::string& data, const std::string& labels,
                                        std::optional<std::uint32_t> classes) {
    if (data.empty() != labels.empty()) {
        throw std::invalid_argument("validation data needs both a tractogram and a label file");
    }
    if (data.empty()) return {};
    return load_dataset(data, labels, classes);
}

std::uint32_t stage_two_classes(const LabeledDataset& d, std::optional<std::uint32_t> classes) {
    if (classes) return *classes;
    const std::uint32_t k = d.num_classes;
    return k + (k % 2);
}

Json train_output(const TrainOptions& o, const Provenance& p, const TrainResult& result) {
    save_model(o.out, result.model);
    const Model stored = load_model(o.out);
    Json h;
    h["provenance"] = p.to_json();
    h["model"] = o.out;
    h["model_checksum"] = hex(model_checksum(stored));
    h["classes"] = result.model.arch.classes;
    h["best_epoch"] = result.best_epoch ? Json(*result.best_epoch) : Json(nullptr);
    h["warnings"] = result.warnings;
    h["history"] = history_json(result);
    if (!o.history.empty()) write_json(o.history, h);
    return h;
}

struct FoldScore {
    double accuracy = 0.0;
    double macro_f1 = 0.0;
};

Json aggregate(const std::vector<FoldScore>& scores) {
    auto stats = [&](auto field) {
        double mean = 0.0;
        for (const auto& s : scores) mean += field(s);
        mean /= static_cast<double>(scores.size());
        double var = 0.0;
        for (const auto& s : scores) var += (field(s) - mean) * (field(s) - mean);
        Json j;
        j["mean"] = mean;
        j["std"] = std::sqrt(var / static_cast<double>(scores.size()));
        return j;
    };
    Json j;
    j["accuracy"] = stats([](const FoldScore& s) { return s.accuracy; });
    j["macro_f1"] = stats([](const FoldScore& s) { return s.macro_f1; });
    return j;
}

std::vector<ResampledStreamline> resampled(std::span<const Streamline> s, std::size_t n) {
    return resample_all(s, n);
}

}  // namespace

Json Provenance::to_json() const {
    Json j;
    j["command"] = command;
    j["seed"] = seed ? Json(*seed) : Json(nullptr);
    j["config"] = config;
    return j;
}

Json cmd_synth(const SynthOptions& o, const Provenance& p) {
    const Stopwatch watch;
    fs::create_directories(o.out_dir);
    const fs::path dir(o.out_dir);
    const SyntheticAtlas atlas = generate_atlas(o.spec);

    Json files = Json::array();
    auto path = [&](const std::string& name) {
        files.push_back(name);
        return (dir / name).string();
    };
    const std::string d1_tck = path("d1.swmt");
    const std::string d1_csv = path("d1_labels.csv");
    const std::string d2_tck = path("d2.swmt");
    const std::string d2_csv = path("d2_labels.csv");
    save_dataset(d1_tck, d1_csv, atlas.d1);
    save_dataset(d2_tck, d2_csv, atlas.d2);
    save_tractogram(path("prototypes.swmt"), atlas.prototypes);

    const bool round_trip =
        load_dataset(d1_tck, d1_csv, atlas.d1.num_classes) == atlas.d1 &&
        load_dataset(d2_tck, d2_csv, atlas.d2.num_classes) == atlas.d2;
    if (!round_trip) throw std::runtime_error("synth: written dataset does not re-read identically");

    std::size_t streamlines = atlas.d1.size();
    Json subjects = Json::array();
    for (std::size_t s = 0; s < o.subjects; ++s) {
        SyntheticAtlasSpec sub = o.spec;
        sub.per_cluster = o.subject_per_cluster;
        sub.dwm = o.subject_dwm;
        sub.seed = o.spec.seed * 1000003ULL + s + 1;
        const SyntheticSubject subject = generate_subject(atlas.prototypes, sub);
        char stem[32];
        std::snprintf(stem, sizeof stem, "subject_%03zu", s);
        const std::string tck = path(std::string(stem) + ".swmt");
        const std::string truth = path(std::string(stem) + "_truth.csv");
        save_tractogram(tck, subject.streamlines);
        save_final_labels(truth, subject.truth);
        Json sj;
        sj["name"] = stem;
        sj["seed"] = sub.seed;
        sj["streamlines"] = subject.streamlines.size();
        subjects.push_back(std::move(sj));
        streamlines += subject.streamlines.size();
    }

    Json manifest;
    manifest["provenance"] = p.to_json();
    manifest["spec"] = spec_json(o.spec);
    manifest["d1_class_counts"] = class_counts(atlas.d1.labels, atlas.d1.num_classes);
    manifest["d2_class_counts"] = class_counts(atlas.d2.labels, atlas.d2.num_classes);
    Json checksums = Json::array();
    for (auto c : atlas.checksums) checksums.push_back(hex(c));
    manifest["prototype_checksums"] = std::move(checksums);
    manifest["subjects"] = std::move(subjects);
    manifest["round_trip_exact"] = round_trip;
    write_json(path("manifest.json"), manifest);

    return summary(p, files, watch, streamlines);
}

Json cmd_train_stage1(const TrainOptions& o, const Provenance& p) {
    const Stopwatch watch;
    const LabeledDataset d1 = load_dataset(o.data, o.labels, 2);
    const LabeledDataset val = load_optional_validation(o.val_data, o.val_labels, 2);
    const TrainResult result = train_stage_one(d1, o.config, val.size() ? &val : nullptr);
    const Json h = train_output(o, p, result);
    Json outputs = Json::array({o.out});
    if (!o.history.empty()) outputs.push_back(o.history);
    Json s = summary(p, outputs, watch, d1.size() * o.config.epochs_stage_one);
    s["model_checksum"] = h["model_checksum"];
    return s;
}

Json cmd_train_stage2(const TrainOptions& o, const Provenance& p) {
    const Stopwatch watch;
    LabeledDataset d2 = load_dataset(o.data, o.labels, o.classes);
    d2.num_classes = stage_two_classes(d2, o.classes);
    const LabeledDataset val = load_optional_validation(o.val_data, o.val_labels, d2.num_classes);
    const auto method = o.method == "ce" ? StageTwoMethod::cross_entropy : StageTwoMethod::contrastive;
    const TrainResult result = train_stage_two(d2, o.config, val.size() ? &val : nullptr, method);
    const Json h = train_output(o, p, result);
    Json outputs = Json::array({o.out});
    if (!o.history.empty()) outputs.push_back(o.history);
    Json s = summary(p, outputs, watch, d2.size());
    s["model_checksum"] = h["model_checksum"];
    s["warnings"] = h["warnings"];
    return s;
}

Json cmd_parcellate(const ParcellateOptions& o, const Provenance& p) {
    const Stopwatch watch;
    const Model m1 = load_model(o.stage_one);
    const Model m2 = load_model(o.stage_two);
    const auto tractogram = load_tractogram(o.tractogram);
    const ParcellationResult result = parcellate(m1, m2, tractogram, o.inference);
    save_final_labels(o.out, result.final_label);
    Json outputs = Json::array({o.out});
    if (!o.extended.empty()) {
        save_extended_labels(o.extended, result);
        outputs.push_back(o.extended);
    }
    Json s = summary(p, outputs, watch, tractogram.size());
    const auto counts = cluster_counts(result);
    std::size_t assigned = 0;
    for (auto c : counts) assigned += c;
    std::size_t swm = 0;
    for (auto l : result.stage_one) swm += l == kSwmLabel;
    s["streamlines"] = tractogram.size();
    s["stage_one_swm"] = swm;
    s["assigned"] = assigned;
    s["non_swm"] = tractogram.size() - assigned;
    s["cluster_counts"] = counts;
    return s;
}

Json cmd_eval(const EvalOptions& o, const Provenance& p) {
    const Stopwatch watch;
    if (o.subjects.empty()) throw std::invalid_argument("eval: at least one --subject is required");
    LabeledDataset atlas;
    if (!o.atlas_data.empty()) atlas = load_dataset(o.atlas_data, o.atlas_labels);
    std::uint32_t k = 0;
    if (o.clusters) {
        k = *o.clusters;
    } else if (atlas.size()) {
        k = (atlas.num_classes + 1) / 2;
    } else {
        throw std::invalid_argument("eval: --clusters is required without an atlas");
    }

    std::vector<std::vector<ResampledStreamline>> atlas_clusters(k);
    for (std::size_t i = 0; i < atlas.size(); ++i) {
        if (atlas.labels[i] < k) atlas_clusters[atlas.labels[i]].push_back(resample(atlas.streamlines[i], o.points));
    }

    struct Subject {
        std::vector<Streamline> streamlines;
        std::vector<std::int32_t> predicted;
        std::optional<std::vector<std::int32_t>> truth;
    };
    std::vector<Subject> subjects;
    for (const auto& spec : o.subjects) {
        std::vector<std::string> parts;
        std::size_t start = 0;
        for (std::size_t comma; (comma = spec.find(',', start)) != std::string::npos; start = comma + 1) {
            parts.push_back(spec.substr(start, comma - start));
        }
        parts.push_back(spec.substr(start));
        if (parts.size() < 2 || parts.size() > 3) {
            throw std::invalid_argument("eval: --subject expects tractogram,predicted[,truth], got '" + spec + "'");
        }
        Subject s;
        s.streamlines = load_tractogram(parts[0]);
        s.predicted = load_final_labels(parts[1]);
        if (s.predicted.size() != s.streamlines.size()) {
            throw ShapeMismatchError(parts[1] + ": " + std::to_string(s.predicted.size()) + " labels for " +
                                     std::to_string(s.streamlines.size()) + " streamlines");
        }
        if (parts.size() == 3) {
            s.truth = load_final_labels(parts[2]);
            if (s.truth->size() != s.streamlines.size()) {
                throw ShapeMismatchError(parts[2] + ": truth length differs from the tractogram");
            }
        }
        for (auto l : s.predicted) {
            if (l != kNonSwm && (l < 0 || static_cast<std::uint32_t>(l) >= k)) {
                throw ShapeMismatchError(parts[1] + ": cluster id " + std::to_string(l) + " outside [0, " +
                                         std::to_string(k) + ")");
            }
        }
        subjects.push_back(std::move(s));
    }

    auto as_class = [k](std::int32_t l) { return l == kNonSwm ? k : static_cast<std::uint32_t>(l); };
    auto by_cluster = [&](const Subject& s, const std::vector<std::int32_t>& labels, std::size_t n) {
        std::vector<std::vector<ResampledStreamline>> clusters(k);
        for (std::size_t i = 0; i < labels.size(); ++i) {
            if (labels[i] != kNonSwm && static_cast<std::uint32_t>(labels[i]) < k) {
                clusters[static_cast<std::size_t>(labels[i])].push_back(resample(s.streamlines[i], n));
            }
        }
        return clusters;
    };

    Json report;
    report["provenance"] = p.to_json();
    report["clusters"] = k;
    report["cir_threshold"] = o.cir_threshold;
    Json per_subject = Json::array();
    std::vector<std::vector<std::size_t>> count_table;
    Json warnings = Json::array();
    std::size_t streamlines = 0;
    for (std::size_t si = 0; si < subjects.size(); ++si) {
        const Subject& s = subjects[si];
        streamlines += s.streamlines.size();
        std::vector<std::size_t> counts(k, 0);
        for (auto l : s.predicted) {
            if (l != kNonSwm) ++counts[static_cast<std::size_t>(l)];
        }
        count_table.push_back(counts);
        Json sj;
        sj["subject"] = o.subjects[si];
        sj["streamlines"] = s.streamlines.size();
        sj["cluster_counts"] = counts;
        sj["cir"] = cluster_identification_rate(counts, o.cir_threshold);
        if (s.truth) {
            std::vector<std::uint32_t> pred(s.predicted.size());
            std::vector<std::uint32_t> truth(s.predicted.size());
            for (std::size_t i = 0; i < pred.size(); ++i) {
                pred[i] = as_class(s.predicted[i]);
                truth[i] = as_class((*s.truth)[i]);
            }
            sj["accuracy"] = s.predicted.empty() ? Json(nullptr) : Json(accuracy(pred, truth));
            const F1Report f1 = macro_f1(pred, truth, k + 1);
            sj["macro_f1"] = f1.mean;
            sj["macro_f1_std"] = f1.stddev;
        }
        if (atlas.size()) {
            const CdaReport cda = cluster_distance_to_atlas(by_cluster(s, s.predicted, o.points), atlas_clusters);
            Json cj;
            cj["mean"] = cda.mean;
            cj["std"] = cda.stddev;
            cj["identified"] = cda.identified;
            Json per = Json::array();
            for (const auto& v : cda.per_cluster) per.push_back(optional_json(v));
            cj["per_cluster"] = std::move(per);
            sj["cda"] = std::move(cj);
            for (const auto& w : cda.warnings) warnings.push_back(o.subjects[si] + ": " + w);
        }
        per_subject.push_back(std::move(sj));
    }
    report["subjects"] = std::move(per_subject);

    if (subjects.size() >= 2) {
        Json ispv = Json::array();
        for (const auto& v : inter_subject_variability(count_table)) ispv.push_back(optional_json(v));
        report["ispv"] = std::move(ispv);
    }

    const bool all_truth = std::all_of(subjects.begin(), subjects.end(), [](const Subject& s) { return s.truth; });
    if (all_truth || !o.heatmap_dir.empty()) {
        std::vector<ResampledStreamline> everything;
        for (const auto& c : atlas_clusters) everything.insert(everything.end(), c.begin(), c.end());
        for (const auto& s : subjects) {
            for (const auto& st : s.streamlines) everything.push_back(resample(st, o.heatmap_points));
        }
        const GridSpec grid = bounding_grid(everything, o.voxel_size);
        std::vector<std::vector<std::vector<ResampledStreamline>>> predicted(k), truth(k);
        for (const auto& s : subjects) {
            auto pc = by_cluster(s, s.predicted, o.heatmap_points);
            for (std::uint32_t c = 0; c < k; ++c) predicted[c].push_back(std::move(pc[c]));
            if (all_truth) {
                auto tc = by_cluster(s, *s.truth, o.heatmap_points);
                for (std::uint32_t c = 0; c < k; ++c) truth[c].push_back(std::move(tc[c]));
            }
        }
        if (!o.heatmap_dir.empty()) fs::create_directories(o.heatmap_dir);
        Json wdice = Json::array();
        for (std::uint32_t c = 0; c < k; ++c) {
            const Heatmap hp = population_heatmap(predicted[c], grid);
            if (!o.heatmap_dir.empty()) {
                char name[48];
                std::snprintf(name, sizeof name, "cluster_%03u.swmh", c);
                save_heatmap((fs::path(o.heatmap_dir) / name).string(), hp);
            }
            if (all_truth) wdice.push_back(optional_json(weighted_dice(hp, population_heatmap(truth[c], grid))));
        }
        if (all_truth) report["wdice"] = std::move(wdice);
    }
    report["warnings"] = std::move(warnings);

    if (!o.out.empty()) write_json(o.out, report);
    Json outputs = Json::array();
    if (!o.out.empty()) outputs.push_back(o.out);
    Json s = summary(p, outputs, watch, streamlines);
    s["metrics"] = report;
    s["metrics"].erase("provenance");
    return s;
}

Json cmd_importance(const ImportanceOptions& o, const Provenance& p) {
    const Stopwatch watch;
    const Model model = load_model(o.model);
    const auto tractogram = load_tractogram(o.data);
    const auto counts = importance_counts(model, resampled(tractogram, model.arch.points));
    const ImportanceProfile profile = summarize_importance(counts, model.arch.feature_dim());
    std::uint64_t lo = counts.empty() ? 0 : UINT64_MAX;
    std::uint64_t hi = 0;
    for (const auto& row : counts) {
        std::uint64_t sum = 0;
        for (auto v : row) sum += v;
        lo = std::min(lo, sum);
        hi = std::max(hi, sum);
    }

    Json r;
    r["provenance"] = p.to_json();
    r["model"] = o.model;
    r["streamlines"] = profile.streamlines;
    r["points"] = profile.points;
    r["feature_dim"] = profile.feature_dim;
    r["count_sum_min"] = lo;
    r["count_sum_max"] = hi;
    r["mean"] = profile.mean;
    r["stddev"] = profile.stddev;
    r["endpoint_share"] = profile.endpoint_share;
    r["interior_share"] = profile.interior_share;
    r["uniform_endpoint_share"] = profile.points ? 2.0 / static_cast<double>(profile.points) : 0.0;
    if (!o.out.empty()) write_json(o.out, r);
    Json s = summary(p, o.out.empty() ? Json::array() : Json::array({o.out}), watch, tractogram.size());
    s["endpoint_share"] = profile.endpoint_share;
    s["count_sum_min"] = lo;
    s["count_sum_max"] = hi;
    return s;
}

Json cmd_flops(const FlopsOptions& o, const Provenance& p) {
    const Stopwatch watch;
    o.arch.validate();
    const FlopsReport f = count_flops(o.arch);
    Json r;
    r["provenance"] = p.to_json();
    Json layers = Json::array();
    for (const auto& l : f.layers) {
        Json lj;
        lj["name"] = l.name;
        lj["multiply_accumulate"] = l.multiply_accumulate;
        lj["bias"] = l.bias;
        lj["normalization"] = l.normalization;
        lj["activation"] = l.activation;
        lj["pooling"] = l.pooling;
        lj["total"] = l.total();
        layers.push_back(std::move(lj));
    }
    r["layers"] = std::move(layers);
    r["encoder"] = f.encoder;
    r["classifier"] = f.classifier;
    r["total"] = f.total;
    r["total_millions"] = static_cast<double>(f.total) / 1e6;
    if (!o.out.empty()) write_json(o.out, r);
    Json s = summary(p, o.out.empty() ? Json::array() : Json::array({o.out}), watch, 0);
    s["flops"] = r;
    s["flops"].erase("provenance");
    return s;
}

Json cmd_crossval(const CrossvalOptions& o, const Provenance& p) {
    const Stopwatch watch;
    const LabeledDataset d1 = load_dataset(o.d1, o.d1_labels, 2);
    LabeledDataset d2 = load_dataset(o.d2, o.d2_labels);
    d2.num_classes = stage_two_classes(d2, std::nullopt);
    const auto method = o.method == "ce" ? StageTwoMethod::cross_entropy : StageTwoMethod::contrastive;
    const std::size_t n = o.config.arch.points;

    auto run_folds = [&](const LabeledDataset& data, bool stage_one) {
        const auto fold_of = kfold_split(data.size(), o.folds, o.config.seed);
        std::vector<FoldScore> scores;
        Json folds = Json::array();
        for (std::uint32_t f = 0; f < o.folds; ++f) {
            std::vector<std::size_t> train, test;
            for (std::size_t i = 0; i < fold_of.size(); ++i) (fold_of[i] == f ? test : train).push_back(i);
            const LabeledDataset tr = data.subset(train);
            const LabeledDataset te = data.subset(test);
            const TrainResult result = stage_one ? train_stage_one(tr, o.config) : train_stage_two(tr, o.config, nullptr, method);
            const auto pred = predict_labels(result.model, resampled(te.streamlines, n), o.inference);
            FoldScore score;
            score.accuracy = accuracy(pred, te.labels);
            score.macro_f1 = macro_f1(pred, te.labels, data.num_classes).mean;
            scores.push_back(score);
            Json fj;
            fj["fold"] = f;
            fj["train"] = tr.size();
            fj["test"] = te.size();
            fj["accuracy"] = score.accuracy;
            fj["macro_f1"] = score.macro_f1;
            fj["model_checksum"] = hex(model_checksum(result.model));
            fj["warnings"] = result.warnings;
            folds.push_back(std::move(fj));
        }
        Json j;
        j["folds"] = std::move(folds);
        j["aggregate"] = aggregate(scores);
        return j;
    };

    Json r;
    r["provenance"] = p.to_json();
    r["method"] = o.method;
    r["stage_one"] = run_folds(d1, true);
    r["stage_two"] = run_folds(d2, false);
    if (!o.out.empty()) write_json(o.out, r);
    Json s = summary(p, o.out.empty() ? Json::array() : Json::array({o.out}), watch, d1.size() + d2.size());
    s["stage_one"] = r["stage_one"]["aggregate"];
    s["stage_two"] = r["stage_two"]["aggregate"];
    return s;
}

}  // namespace swm::cli
