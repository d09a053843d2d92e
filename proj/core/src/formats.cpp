#include "swm/formats.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>
#include <stdexcept>

#include "byte_io.hpp"

namespace swm {

namespace detail {

std::vector<std::uint8_t> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingFileError("cannot open '" + path + "'");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::string& path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

}  // namespace detail

namespace {

void expect_header(detail::ByteReader& in, std::string_view magic, std::uint32_t version, const std::string& what) {
    if (in.remaining() < magic.size() || in.bytes(magic.size()) != magic) {
        throw BadMagicError(what + ": bad magic, expected \"" + std::string(magic) + "\"");
    }
    const auto found = in.get<std::uint32_t>();
    if (found != version) {
        throw VersionMismatchError(what + ": unsupported version " + std::to_string(found) + " (expected " +
                                   std::to_string(version) + ")");
    }
}

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (;;) {
        const std::size_t comma = line.find(',', start);
        out.push_back(line.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

// Rows of a CSV whose header must equal `header`; the first column must be
// the row index.
std::vector<std::vector<std::string>> read_indexed_csv(const std::string& path, const std::string& header) {
    std::istringstream in(read_text(path));
    std::string line;
    if (!std::getline(in, line)) throw TruncatedError(path + ": missing header");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != header) throw FormatError(path + ": expected header '" + header + "', found '" + line + "'");
    std::vector<std::vector<std::string>> rows;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto fields = split(line);
        const std::size_t expected_index = rows.size();
        std::size_t index = 0;
        const auto& f = fields.front();
        const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), index);
        if (ec != std::errc() || ptr != f.data() + f.size() || index != expected_index) {
            throw FormatError(path + ": row " + std::to_string(expected_index + 1) + " has index '" + f +
                              "', expected " + std::to_string(expected_index));
        }
        rows.push_back(std::move(fields));
    }
    return rows;
}

template <class T>
T parse_integer(const std::string& text, const std::string& where) {
    T value{};
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || ptr != text.data() + text.size()) {
        throw FormatError(where + ": '" + text + "' is not a valid label");
    }
    return value;
}

constexpr std::string_view kNonSwmToken = "NON_SWM";

}  // namespace

std::string read_text(const std::string& path) {
    const auto bytes = detail::read_file(path);
    return {bytes.begin(), bytes.end()};
}

void write_text(const std::string& path, const std::string& text) {
    detail::write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::vector<std::uint8_t> serialize_tractogram(std::span<const Streamline> streamlines) {
    detail::ByteWriter out;
    out.bytes("SWMT");
    out.put<std::uint32_t>(kTractogramFormatVersion);
    out.put<std::uint64_t>(streamlines.size());
    for (const auto& s : streamlines) {
        out.put<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
        for (const auto& p : s.points()) {
            for (double v : p) out.put<float>(static_cast<float>(v));
        }
    }
    return out.take();
}

std::vector<Streamline> deserialize_tractogram(std::span<const std::uint8_t> bytes) {
    detail::ByteReader in(bytes, "tractogram");
    expect_header(in, "SWMT", kTractogramFormatVersion, "tractogram");
    const auto count = in.get<std::uint64_t>();
    // Every streamline needs at least its 4-byte point count.
    if (count > in.remaining() / 4) throw TruncatedError("tractogram: declared streamline count exceeds the file");
    std::vector<Streamline> out;
    out.reserve(static_cast<std::size_t>(count));
    for (std::uint64_t i = 0; i < count; ++i) {
        const auto points = in.get<std::uint32_t>();
        if (points > in.remaining() / 12) {
            throw TruncatedError("tractogram: streamline " + std::to_string(i) + " declares " + std::to_string(points) +
                                 " points beyond the end of the file");
        }
        std::vector<Point3> coords(points);
        for (auto& p : coords) {
            for (double& v : p) v = static_cast<double>(in.get<float>());
        }
        try {
            out.emplace_back(std::move(coords));
        } catch (const std::invalid_argument& e) {
            throw FormatError("tractogram: streamline " + std::to_string(i) + ": " + e.what());
        }
    }
    if (!in.done()) throw FormatError("tractogram: " + std::to_string(in.remaining()) + " trailing bytes");
    return out;
}

void save_tractogram(const std::string& path, std::span<const Streamline> streamlines) {
    detail::write_file(path, serialize_tractogram(streamlines));
}

std::vector<Streamline> load_tractogram(const std::string& path) {
    return deserialize_tractogram(detail::read_file(path));
}

std::vector<std::uint8_t> serialize_heatmap(const Heatmap& map) {
    if (map.values.size() != map.grid.voxels()) throw std::invalid_argument("heatmap: value count differs from grid");
    detail::ByteWriter out;
    out.bytes("SWMH");
    out.put<std::uint32_t>(kHeatmapFormatVersion);
    for (double o : map.grid.origin) out.put<float>(static_cast<float>(o));
    out.put<float>(static_cast<float>(map.grid.voxel_size));
    for (auto d : map.grid.dims) out.put<std::uint32_t>(d);
    for (double v : map.values) out.put<float>(static_cast<float>(v));
    return out.take();
}

Heatmap deserialize_heatmap(std::span<const std::uint8_t> bytes) {
    detail::ByteReader in(bytes, "heatmap");
    expect_header(in, "SWMH", kHeatmapFormatVersion, "heatmap");
    Heatmap map;
    for (double& o : map.grid.origin) o = static_cast<double>(in.get<float>());
    map.grid.voxel_size = static_cast<double>(in.get<float>());
    if (!(map.grid.voxel_size > 0.0)) throw FormatError("heatmap: voxel size must be positive");
    for (auto& d : map.grid.dims) d = in.get<std::uint32_t>();
    const std::size_t voxels = map.grid.voxels();
    if (voxels != in.remaining() / 4 || in.remaining() % 4 != 0) {
        throw ShapeMismatchError("heatmap: dims imply " + std::to_string(voxels) + " voxels but " +
                                 std::to_string(in.remaining() / 4) + " values are stored");
    }
    map.values.resize(voxels);
    for (double& v : map.values) v = static_cast<double>(in.get<float>());
    return map;
}

void save_heatmap(const std::string& path, const Heatmap& map) { detail::write_file(path, serialize_heatmap(map)); }

Heatmap load_heatmap(const std::string& path) { return deserialize_heatmap(detail::read_file(path)); }

void save_heatmap_csv(const std::string& path, const Heatmap& map) {
    std::ostringstream out;
    out << "i,j,k,value\n";
    const auto& dims = map.grid.dims;
    for (std::size_t v = 0; v < map.values.size(); ++v) {
        if (map.values[v] == 0.0) continue;
        out << v % dims[0] << ',' << (v / dims[0]) % dims[1] << ',' << v / (std::size_t{dims[0]} * dims[1]) << ','
            << map.values[v] << '\n';
    }
    write_text(path, out.str());
}

void save_labels(const std::string& path, std::span<const std::uint32_t> labels) {
    std::string out = "index,label\n";
    for (std::size_t i = 0; i < labels.size(); ++i) out += std::to_string(i) + ',' + std::to_string(labels[i]) + '\n';
    write_text(path, out);
}

std::vector<std::uint32_t> load_labels(const std::string& path) {
    const auto rows = read_indexed_csv(path, "index,label");
    std::vector<std::uint32_t> labels;
    labels.reserve(rows.size());
    for (const auto& row : rows) {
        if (row.size() != 2) throw FormatError(path + ": expected 2 columns at index " + row.front());
        labels.push_back(parse_integer<std::uint32_t>(row[1], path));
    }
    return labels;
}

void save_final_labels(const std::string& path, std::span<const std::int32_t> labels) {
    std::string out = "index,label\n";
    for (std::size_t i = 0; i < labels.size(); ++i) {
        out += std::to_string(i) + ',';
        out += labels[i] == kNonSwm ? std::string(kNonSwmToken) : std::to_string(labels[i]);
        out += '\n';
    }
    write_text(path, out);
}

std::vector<std::int32_t> load_final_labels(const std::string& path) {
    const auto rows = read_indexed_csv(path, "index,label");
    std::vector<std::int32_t> labels;
    labels.reserve(rows.size());
    for (const auto& row : rows) {
        if (row.size() != 2) throw FormatError(path + ": expected 2 columns at index " + row.front());
        if (row[1] == kNonSwmToken) {
            labels.push_back(kNonSwm);
            continue;
        }
        const auto v = parse_integer<std::int32_t>(row[1], path);
        if (v < 0) throw FormatError(path + ": negative cluster id at index " + row.front());
        labels.push_back(v);
    }
    return labels;
}

void save_extended_labels(const std::string& path, const ParcellationResult& result) {
    std::string out = "index,stage_one,stage_two,label\n";
    for (std::size_t i = 0; i < result.size(); ++i) {
        out += std::to_string(i) + ',' + std::to_string(result.stage_one[i]) + ',';
        if (result.stage_two[i]) out += std::to_string(*result.stage_two[i]);
        out += ',';
        out += result.final_label[i] == kNonSwm ? std::string(kNonSwmToken) : std::to_string(result.final_label[i]);
        out += '\n';
    }
    write_text(path, out);
}

void save_dataset(const std::string& tractogram_path, const std::string& labels_path, const LabeledDataset& data) {
    data.validate();
    save_tractogram(tractogram_path, data.streamlines);
    save_labels(labels_path, data.labels);
}

LabeledDataset load_dataset(const std::string& tractogram_path, const std::string& labels_path,
                            std::optional<std::uint32_t> num_classes) {
    LabeledDataset data;
    data.streamlines = load_tractogram(tractogram_path);
    data.labels = load_labels(labels_path);
    if (data.labels.size() != data.streamlines.size()) {
        throw ShapeMismatchError(labels_path + ": " + std::to_string(data.labels.size()) + " labels for " +
                                 std::to_string(data.streamlines.size()) + " streamlines");
    }
    if (num_classes) {
        data.num_classes = *num_classes;
    } else {
        const auto top = std::max_element(data.labels.begin(), data.labels.end());
        data.num_classes = top == data.labels.end() ? 0 : *top + 1;
    }
    try {
        data.validate();
    } catch (const std::invalid_argument& e) {
        throw FormatError(labels_path + ": " + e.what());
    }
    return data;
}

}  // namespace swm
