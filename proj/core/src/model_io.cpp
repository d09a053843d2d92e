#include "swm/model_io.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "byte_io.hpp"

namespace swm {

namespace {

constexpr std::string_view kMagic = "SWMM";

struct RawBlock {
    std::vector<std::uint32_t> dims;
    std::vector<float> values;
};

std::string dims_str(const std::vector<std::uint32_t>& dims) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < dims.size(); ++i) os << (i ? "," : "") << dims[i];
    os << ']';
    return os.str();
}

template <class F>
void for_each_model_block(Model& m, F&& f) {
    for_each_block(m.encoder, "encoder", f);
    if (m.projector) for_each_block(*m.projector, "projector", f);
    for_each_block(m.classifier, "classifier", f);
}

template <class F>
void for_each_model_block(const Model& m, F&& f) {
    for_each_model_block(const_cast<Model&>(m), [&](const std::string& name, const std::vector<std::uint32_t>& dims,
                                                   std::span<double> values, bool trainable) {
        f(name, dims, std::span<const double>(values), trainable);
    });
}

std::size_t count_layers(const std::map<std::string, RawBlock>& blocks, const std::string& prefix) {
    std::size_t n = 0;
    while (blocks.count(prefix + "." + std::to_string(n) + ".weight")) ++n;
    return n;
}

std::uint32_t out_width(const std::map<std::string, RawBlock>& blocks, const std::string& name) {
    const auto& b = blocks.at(name);
    if (b.dims.size() != 2) throw ShapeMismatchError("model: block " + name + " must be rank 2, found " + dims_str(b.dims));
    return b.dims[0];
}

Architecture infer_architecture(const std::map<std::string, RawBlock>& blocks, std::uint32_t n, std::uint32_t k) {
    Architecture arch;
    arch.points = n;
    arch.classes = k;
    const std::size_t enc = count_layers(blocks, "encoder");
    const std::size_t cls = count_layers(blocks, "classifier");
    const std::size_t proj = count_layers(blocks, "projector");
    if (enc == 0) throw ShapeMismatchError("model: no encoder blocks");
    if (cls == 0) throw ShapeMismatchError("model: no classifier blocks");
    arch.encoder_widths.clear();
    for (std::size_t i = 0; i < enc; ++i) arch.encoder_widths.push_back(out_width(blocks, "encoder." + std::to_string(i) + ".weight"));
    arch.classifier_widths.clear();
    for (std::size_t i = 0; i + 1 < cls; ++i) {
        arch.classifier_widths.push_back(out_width(blocks, "classifier." + std::to_string(i) + ".weight"));
    }
    if (proj == 2) {
        arch.projector_widths = {out_width(blocks, "projector.0.weight"), out_width(blocks, "projector.1.weight")};
    }
    return arch;
}

}  // namespace

std::vector<std::uint8_t> serialize_model(const Model& model) {
    detail::ByteWriter w;
    w.bytes(kMagic);
    w.put<std::uint32_t>(kModelFormatVersion);
    w.put<std::uint8_t>(static_cast<std::uint8_t>(model.stage));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(model.arch.points));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(model.classifier.classes()));

    std::uint32_t count = 0;
    for_each_model_block(model, [&](const auto&, const auto&, auto, bool) { ++count; });
    w.put<std::uint32_t>(count);

    for_each_model_block(model, [&](const std::string& name, const std::vector<std::uint32_t>& dims,
                                    std::span<const double> values, bool) {
        w.put<std::uint16_t>(static_cast<std::uint16_t>(name.size()));
        w.bytes(name);
        w.put<std::uint8_t>(static_cast<std::uint8_t>(dims.size()));
        for (auto d : dims) w.put<std::uint32_t>(d);
        for (double v : values) w.put<float>(static_cast<float>(v));
    });
    return w.take();
}

Model deserialize_model(std::span<const std::uint8_t> bytes, const Architecture* expected) {
    detail::ByteReader r(bytes, "model");
    if (bytes.size() < kMagic.size() || r.bytes(kMagic.size()) != kMagic) {
        throw BadMagicError("model: bad magic (expected \"SWMM\")");
    }
    const auto version = r.get<std::uint32_t>();
    if (version != kModelFormatVersion) {
        throw VersionMismatchError("model: unsupported format version " + std::to_string(version) + " (expected " +
                                   std::to_string(kModelFormatVersion) + ")");
    }
    const auto stage = r.get<std::uint8_t>();
    if (stage != 1 && stage != 2) throw FormatError("model: invalid stage tag " + std::to_string(stage));
    const auto n = r.get<std::uint32_t>();
    const auto k = r.get<std::uint32_t>();
    const auto count = r.get<std::uint32_t>();

    std::map<std::string, RawBlock> blocks;
    for (std::uint32_t b = 0; b < count; ++b) {
        const auto len = r.get<std::uint16_t>();
        std::string name(r.bytes(len));
        const auto rank = r.get<std::uint8_t>();
        RawBlock block;
        std::uint64_t elements = 1;
        for (std::uint8_t d = 0; d < rank; ++d) {
            block.dims.push_back(r.get<std::uint32_t>());
            elements *= block.dims.back();
        }
        if (elements * 4 > r.remaining()) {
            throw TruncatedError("model: truncated stream in block " + name);
        }
        block.values.resize(elements);
        for (auto& v : block.values) v = r.get<float>();
        if (!blocks.emplace(name, std::move(block)).second) throw FormatError("model: duplicate block " + name);
    }
    if (!r.done()) throw FormatError("model: trailing bytes after last block");

    Architecture arch = infer_architecture(blocks, n, k);
    if (expected) {
        Architecture want = *expected;
        want.points = expected->points;
        if (!blocks.count("projector.0.weight")) want.projector_widths = arch.projector_widths;
        arch = want;
    }

    Model model;
    model.stage = static_cast<Stage>(stage);
    model.arch = arch;
    std::mt19937_64 unused(0);
    model.encoder = zeros_like(init_encoder(arch, unused));
    if (blocks.count("projector.0.weight")) model.projector = zeros_like(init_projector(arch, unused));
    model.classifier = zeros_like(init_classifier(arch, unused));

    std::size_t consumed = 0;
    for_each_model_block(model, [&](const std::string& name, const std::vector<std::uint32_t>& dims,
                                    std::span<double> values, bool) {
        const auto it = blocks.find(name);
        if (it == blocks.end()) throw ShapeMismatchError("model: missing block " + name);
        if (it->second.dims != dims) {
            throw ShapeMismatchError("model: shape mismatch in block " + name + ": expected " + dims_str(dims) +
                                     ", file has " + dims_str(it->second.dims));
        }
        std::transform(it->second.values.begin(), it->second.values.end(), values.begin(),
                       [](float v) { return static_cast<double>(v); });
        ++consumed;
    });
    if (consumed != blocks.size()) throw ShapeMismatchError("model: file has blocks this architecture does not use");
    if (expected && n != expected->points) {
        throw ShapeMismatchError("model: point count " + std::to_string(n) + " differs from expected " +
                                 std::to_string(expected->points));
    }
    if (model.classifier.classes() != k) {
        throw ShapeMismatchError("model: header k = " + std::to_string(k) + " but classifier outputs " +
                                 std::to_string(model.classifier.classes()));
    }
    for (const auto& norm : model.encoder.norms) {
        for (double v : norm.running_var) {
            if (!(v > 0.0)) throw FormatError("model: running variance must be positive");
        }
    }
    return model;
}

void save_model(const std::string& path, const Model& model) {
    detail::write_file(path, serialize_model(model));
}

Model load_model(const std::string& path, const Architecture* expected) {
    const auto bytes = detail::read_file(path);
    return deserialize_model(bytes, expected);
}

Model quantize(const Model& model) {
    Model out = model;
    for_each_model_block(out, [](const std::string&, const auto&, std::span<double> values, bool) {
        for (double& v : values) v = static_cast<double>(static_cast<float>(v));
    });
    return out;
}

}  // namespace swm
