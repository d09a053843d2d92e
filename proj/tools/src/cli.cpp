#include "swm/cli.hpp"

#include <algorithm>
#include <charconv>
#include <exception>
#include <fstream>
#include <functional>
#include <iostream>
#include <stdexcept>

#include "CLI11.hpp"
#include "commands.hpp"
#include "swm/errors.hpp"

namespace swm::cli {

namespace {

// Doubles are echoed in shortest round-trip form so a saved config reproduces
// the run exactly.
std::string exact(double v) {
    char buf[32];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return {buf, r.ptr};
}

// One plain-text line per epoch on the error stream; stdout stays pure JSON.
std::function<void(const EpochRecord&)> epoch_logger(std::ostream& err) {
    return [&err](const EpochRecord& r) {
        err << r.phase << " epoch " << r.epoch << " loss " << exact(r.loss);
        if (r.train_accuracy) err << " train_acc " << exact(*r.train_accuracy);
        if (r.val_accuracy) err << " val_acc " << exact(*r.val_accuracy);
        if (r.val_macro_f1) err << " val_f1 " << exact(*r.val_macro_f1);
        err << '\n';
    };
}

CLI::Option* add_real(CLI::App& sub, const std::string& name, double& v, const std::string& help) {
    return sub.add_option(name, v, help)->default_function([&v] { return exact(v); })->capture_default_str();
}

void add_architecture(CLI::App& sub, Architecture& arch, bool with_classes) {
    sub.add_option("--points", arch.points, "Points per resampled streamline")->group("Architecture");
    sub.add_option("--encoder-widths", arch.encoder_widths, "Encoder layer widths")->delimiter(',')->group("Architecture");
    sub.add_option("--classifier-widths", arch.classifier_widths, "Hidden classifier widths")
        ->delimiter(',')
        ->group("Architecture");
    sub.add_option("--projector-widths", arch.projector_widths, "Projector widths")->delimiter(',')->group("Architecture");
    if (with_classes) sub.add_option("--classes", arch.classes, "Output classes")->group("Architecture");
}

void add_training(CLI::App& sub, TrainingConfig& c) {
    add_architecture(sub, c.arch, false);
    const std::string g = "Training";
    sub.add_option("--seed", c.seed, "Random seed")->group(g);
    add_real(sub, "--lr-stage-one", c.lr_stage_one, "Stage-one (and CE ablation) learning rate")->group(g);
    add_real(sub, "--lr-contrastive", c.lr_contrastive, "Contrastive learning rate")->group(g);
    add_real(sub, "--lr-downstream", c.lr_downstream, "Downstream classifier learning rate")->group(g);
    sub.add_option("--batch-stage-one", c.batch_stage_one, "Stage-one (and CE ablation) batch size")->group(g);
    sub.add_option("--batch-contrastive", c.batch_contrastive, "Contrastive batch size before mirroring")->group(g);
    sub.add_option("--batch-downstream", c.batch_downstream, "Downstream batch size")->group(g);
    sub.add_option("--epochs-stage-one", c.epochs_stage_one, "Stage-one (and CE ablation) epochs")->group(g);
    sub.add_option("--epochs-contrastive", c.epochs_contrastive, "Contrastive epochs")->group(g);
    sub.add_option("--epochs-downstream", c.epochs_downstream, "Downstream epochs")->group(g);
    add_real(sub, "--temperature", c.temperature, "Contrastive temperature")->group(g);
}

void add_inference(CLI::App& sub, InferenceOptions& o) {
    sub.add_option("--workers", o.workers, "Inference worker threads")->check(CLI::PositiveNumber);
    sub.add_option("--inference-batch", o.batch_size, "Streamlines per inference batch")->check(CLI::PositiveNumber);
}

Json error_json(const std::string& kind, const std::string& message, int code) {
    Json j;
    j["error"] = kind;
    j["message"] = message;
    j["exit_code"] = code;
    return j;
}

// The effective configuration of a parsed subcommand in config-file syntax.
// One `key=value` line per option in declaration order. Lists are
// comma-joined whether they came from the command line, the config file or a
// default, so the echo reads back as a config file.
std::string effective_config(const CLI::App& sub) {
    std::string out;
    for (const CLI::Option* opt : sub.get_options()) {
        const std::string name = opt->get_single_name();
        if (name.empty() || name == "help" || name == "config") continue;
        std::string value;
        if (opt->count() > 0) {
            for (const auto& r : opt->results()) value += (value.empty() ? "" : ",") + r;
        } else {
            value = opt->get_default_str();
            if (value.size() >= 2 && value.front() == '[' && value.back() == ']') value = value.substr(1, value.size() - 2);
        }
        if (value.empty() || value.find_first_of(" \t#;\"") != std::string::npos) value = '"' + value + '"';
        out += name + '=' + value + '\n';
    }
    return out;
}

std::optional<std::string> config_argument(const std::vector<std::string>& args) {
    for (std::size_t i = 1; i < args.size(); ++i) {
        if (args[i] == "--config") {
            if (i + 1 == args.size()) throw CLI::ArgumentMismatch("--config needs a file name");
            return args[i + 1];
        }
        if (args[i].rfind("--config=", 0) == 0) return args[i].substr(9);
    }
    return std::nullopt;
}

bool given(const std::vector<std::string>& args, const std::string& flag) {
    return std::any_of(args.begin() + 1, args.end(),
                       [&](const std::string& a) { return a == flag || a.rfind(flag + "=", 0) == 0; });
}

// Inserts the entries of the subcommand's config file as options right after
// the subcommand name, skipping keys that are also on the command line.
std::vector<std::string> with_config(const std::vector<std::string>& args) {
    if (args.empty()) return args;
    const auto path = config_argument(args);
    if (!path) return args;
    std::ifstream in(*path);
    if (!in) throw CLI::FileError::Missing(*path);
    std::vector<std::string> from_file;
    for (const CLI::ConfigItem& item : CLI::ConfigINI().from_config(in)) {
        if (!item.parents.empty() && !(item.parents.size() == 1 && item.parents[0] == args[0])) {
            throw CLI::ConversionError(*path + ": unexpected section '" + item.parents[0] + "'");
        }
        if (item.name == "config") throw CLI::ConversionError(*path + ": config files cannot nest");
        const std::string flag = "--" + item.name;
        if (given(args, flag)) continue;
        from_file.push_back(flag);
        from_file.insert(from_file.end(), item.inputs.begin(), item.inputs.end());
    }
    std::vector<std::string> out{args.front()};
    out.insert(out.end(), from_file.begin(), from_file.end());
    out.insert(out.end(), args.begin() + 1, args.end());
    return out;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Superficial white matter parcellation tools", "swm"};
    app.require_subcommand(1);
    app.option_defaults()->always_capture_default();
    app.set_version_flag("--version", "swm 0.1.0");

    std::function<Json(const Provenance&)> action;
    std::optional<std::uint64_t> seed;
    CLI::App* chosen = nullptr;
    std::string config_path;

    auto command = [&](const std::string& name, const std::string& help) {
        CLI::App* sub = app.add_subcommand(name, help);
        sub->add_option("--config", config_path, "Flat key=value config file; command-line values take precedence");
        return sub;
    };

    SynthOptions synth;
    {
        CLI::App* sub = command("synth", "Generate a synthetic atlas (D1, D2) and optional test subjects");
        auto& s = synth.spec;
        sub->add_option("--out", synth.out_dir, "Output directory")->required();
        sub->add_option("--clusters", s.clusters, "Number of clusters K");
        sub->add_option("--per-cluster", s.per_cluster, "Streamlines per cluster, outliers included");
        add_real(*sub, "--outlier-fraction", s.outlier_fraction, "Share of each cluster that is outlier");
        sub->add_option("--dwm", s.dwm, "Deep white matter streamlines");
        add_real(*sub, "--sigma", s.sigma, "Plausible perturbation scale (mm)");
        add_real(*sub, "--outlier-sigma", s.outlier_sigma, "Outlier perturbation scale (mm)");
        add_real(*sub, "--min-length", s.min_length, "Minimum superficial streamline length (mm)");
        sub->add_option("--bilateral", s.bilateral, "Mirror clusters into both hemispheres");
        sub->add_option("--seed", s.seed, "Random seed");
        sub->add_option("--subjects", synth.subjects, "Test subjects to generate");
        sub->add_option("--subject-per-cluster", synth.subject_per_cluster, "Streamlines per cluster in a subject");
        sub->add_option("--subject-dwm", synth.subject_dwm, "Deep white matter streamlines in a subject");
        sub->callback([&, sub] {
            synth.spec.validate();
            seed = synth.spec.seed;
            chosen = sub;
            action = [&](const Provenance& p) { return cmd_synth(synth, p); };
        });
    }

    TrainOptions train1;
    TrainOptions train2;
    for (auto* t : {&train1, &train2}) {
        const bool one = t == &train1;
        CLI::App* sub = command(one ? "train-stage1" : "train-stage2",
                                one ? "Train the SWM/DWM classifier" : "Train the cluster/outlier classifier");
        sub->add_option("--data", t->data, "Tractogram (.swmt)")->required();
        sub->add_option("--labels", t->labels, "Label CSV")->required();
        sub->add_option("--val-data", t->val_data, "Validation tractogram");
        sub->add_option("--val-labels", t->val_labels, "Validation label CSV");
        sub->add_option("--out", t->out, "Model file (.swmm)")->required();
        sub->add_option("--history", t->history, "Training history JSON");
        add_training(*sub, t->config);
        if (!one) {
            sub->add_option("--classes", t->classes, "Class count 2K (default: inferred, rounded up to even)");
            sub->add_option("--method", t->method, "Stage-two training: scl or ce")
                ->check(CLI::IsMember({"scl", "ce"}));
        }
        sub->callback([&, t, one, sub] {
            t->config.validate();
            t->config.on_epoch = epoch_logger(err);
            seed = t->config.seed;
            chosen = sub;
            action = [&, t, one](const Provenance& p) {
                return one ? cmd_train_stage1(*t, p) : cmd_train_stage2(*t, p);
            };
        });
    }

    ParcellateOptions parc;
    {
        CLI::App* sub = command("parcellate", "Label a tractogram with the two-stage classifier");
        sub->add_option("--stage-one", parc.stage_one, "Stage-one model")->required();
        sub->add_option("--stage-two", parc.stage_two, "Stage-two model")->required();
        sub->add_option("--tractogram", parc.tractogram, "Input tractogram")->required();
        sub->add_option("--out", parc.out, "Final label CSV")->required();
        sub->add_option("--extended", parc.extended, "Extended label CSV with per-stage columns");
        add_inference(*sub, parc.inference);
        sub->callback([&, sub] {
            chosen = sub;
            action = [&](const Provenance& p) { return cmd_parcellate(parc, p); };
        });
    }

    EvalOptions eval;
    {
        CLI::App* sub = command("eval", "Compute parcellation metrics");
        sub->add_option("--subject", eval.subjects, "tractogram,predicted[,truth]; repeat per subject")->required();
        sub->add_option("--atlas-data", eval.atlas_data, "Atlas tractogram (stage-two labels)");
        sub->add_option("--atlas-labels", eval.atlas_labels, "Atlas label CSV");
        sub->add_option("--clusters", eval.clusters, "Cluster count K (default: half the atlas classes)");
        sub->add_option("--out", eval.out, "Metrics report JSON");
        sub->add_option("--heatmap-dir", eval.heatmap_dir, "Directory for per-cluster population heatmaps");
        sub->add_option("--cir-threshold", eval.cir_threshold, "Minimum streamlines for an identified cluster");
        sub->add_option("--points", eval.points, "Resampling for distances")->check(CLI::Range(2, 100000));
        sub->add_option("--heatmap-points", eval.heatmap_points, "Resampling for heatmaps")
            ->check(CLI::Range(2, 100000));
        add_real(*sub, "--voxel-size", eval.voxel_size, "Heatmap voxel size (mm)")->check(CLI::PositiveNumber);
        sub->callback([&, sub] {
            if (eval.atlas_data.empty() != eval.atlas_labels.empty()) {
                throw CLI::ValidationError("--atlas-data and --atlas-labels must be given together");
            }
            chosen = sub;
            action = [&](const Provenance& p) { return cmd_eval(eval, p); };
        });
    }

    ImportanceOptions imp;
    {
        CLI::App* sub = command("importance", "Max-pool point importance profile of a model");
        sub->add_option("--model", imp.model, "Model file")->required();
        sub->add_option("--data", imp.data, "Tractogram")->required();
        sub->add_option("--out", imp.out, "Importance JSON");
        sub->callback([&, sub] {
            chosen = sub;
            action = [&](const Provenance& p) { return cmd_importance(imp, p); };
        });
    }

    FlopsOptions flops;
    flops.arch.classes = 199;
    {
        CLI::App* sub = command("flops", "Inference FLOPs per streamline");
        add_architecture(*sub, flops.arch, true);
        sub->add_option("--out", flops.out, "FLOPs report JSON");
        sub->callback([&, sub] {
            chosen = sub;
            action = [&](const Provenance& p) { return cmd_flops(flops, p); };
        });
    }

    CrossvalOptions cv;
    {
        CLI::App* sub = command("crossval", "k-fold cross-validation of both stages");
        sub->add_option("--d1", cv.d1, "Stage-one tractogram")->required();
        sub->add_option("--d1-labels", cv.d1_labels, "Stage-one label CSV")->required();
        sub->add_option("--d2", cv.d2, "Stage-two tractogram")->required();
        sub->add_option("--d2-labels", cv.d2_labels, "Stage-two label CSV")->required();
        sub->add_option("--folds", cv.folds, "Number of folds")->check(CLI::Range(2u, 1000u));
        sub->add_option("--method", cv.method, "Stage-two training: scl or ce")->check(CLI::IsMember({"scl", "ce"}));
        sub->add_option("--out", cv.out, "Cross-validation JSON");
        add_training(*sub, cv.config);
        add_inference(*sub, cv.inference);
        sub->callback([&, sub] {
            cv.config.validate();
            cv.config.on_epoch = epoch_logger(err);
            seed = cv.config.seed;
            chosen = sub;
            action = [&](const Provenance& p) { return cmd_crossval(cv, p); };
        });
    }

    auto fail = [&](const std::string& kind, const std::string& message, int code) {
        err << error_json(kind, message, code).dump() << '\n';
        return code;
    };

    try {
        const std::vector<std::string> expanded = with_config(args);
        std::vector<std::string> reversed(expanded.rbegin(), expanded.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kOk;
    } catch (const CLI::CallForVersion& e) {
        out << e.what() << '\n';
        return kOk;
    } catch (const CLI::FileError& e) {
        return fail("missing_file", e.what(), kMissingFile);
    } catch (const CLI::ParseError& e) {
        return fail("usage", e.what(), kUsage);
    } catch (const std::invalid_argument& e) {
        return fail("usage", e.what(), kUsage);
    }

    try {
        Provenance p;
        p.command = chosen->get_name();
        p.config = effective_config(*chosen);
        p.seed = seed;
        out << action(p).dump(2) << '\n';
        return kOk;
    } catch (const MissingFileError& e) {
        return fail("missing_file", e.what(), kMissingFile);
    } catch (const ShapeMismatchError& e) {
        return fail("shape_mismatch", e.what(), kShapeMismatch);
    } catch (const FormatError& e) {
        return fail("format", e.what(), kFormat);
    } catch (const std::invalid_argument& e) {
        return fail("invalid_argument", e.what(), kUsage);
    } catch (const std::exception& e) {
        return fail("failure", e.what(), kFailure);
    }
}

int run(int argc, const char* const* argv) {
    std::vector<std::string> args(argv + std::min(argc, 1), argv + argc);
    return run(args, std::cout, std::cerr);
}

}  // namespace swm::cli
