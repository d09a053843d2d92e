#include "swm/flops.hpp"

namespace swm {

FlopsReport count_flops(const Architecture& arch, const FlopsConvention& convention) {
    FlopsReport report;
    const std::uint64_t n = arch.points;

    auto dense = [&](const std::string& name, std::uint64_t in, std::uint64_t out, std::uint64_t rows,
                     bool normalized) {
        LayerFlops l;
        l.name = name;
        l.multiply_accumulate = 2 * rows * in * out;
        if (convention.bias) l.bias = rows * out;
        if (normalized && convention.normalization) l.normalization = 2 * rows * out;
        if (normalized && convention.activation) l.activation = rows * out;
        return l;
    };

    std::uint64_t in = 3;
    for (std::size_t i = 0; i < arch.encoder_widths.size(); ++i) {
        const std::uint64_t out = arch.encoder_widths[i];
        auto l = dense("encoder." + std::to_string(i), in, out, n, true);
        report.encoder += l.total();
        report.layers.push_back(std::move(l));
        in = out;
    }
    if (convention.pooling) {
        LayerFlops pool;
        pool.name = "encoder.maxpool";
        pool.pooling = (n - 1) * in;
        report.encoder += pool.total();
        report.layers.push_back(std::move(pool));
    }

    for (std::size_t i = 0; i <= arch.classifier_widths.size(); ++i) {
        const bool hidden = i < arch.classifier_widths.size();
        const std::uint64_t out = hidden ? arch.classifier_widths[i] : arch.classes;
        auto l = dense("classifier." + std::to_string(i), in, out, 1, hidden);
        report.classifier += l.total();
        report.layers.push_back(std::move(l));
        in = out;
    }

    report.total = report.encoder + report.classifier;
    return report;
}

}  // namespace swm
